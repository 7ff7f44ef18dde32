"""Different types enumeration definition.

This module defines the enums used to categorize operators, iteration
variants, certificate statements and verdicts across the system.
"""

import enum

class OperatorKind(enum.Enum):
    """Enumeration for the catalog of maximal monotone operators."""

    # The zero operator: every point is a zero, the resolvent is the identity
    ZERO = "zero"

    # Symmetric positive semidefinite matrix acting linearly
    LINEAR_PSD = "linear_psd"

    # Subdifferential of the absolute value (coordinatewise in higher dimensions)
    ABS_VALUE_SUBDIFF = "abs_value_subdiff"

    # Normal cone of a box; the resolvent is the projection onto the box
    BOX_INDICATOR = "box_indicator"

    # Normal cone of a closed ball; the resolvent is the projection onto the ball
    BALL_INDICATOR = "ball_indicator"

    # Multiplication by a nonnegative scalar
    SCALED_IDENTITY = "scaled_identity"

class ErrorMode(enum.Enum):
    """Enumeration for the two admissible summability conditions on errors."""

    # Partial sums of the error norms are Cauchy with rate E
    SUMMABLE_Q5A = "Q5a"

    # Error norms divided by the anchor weights tend to zero with rate E
    RATIO_Q5B = "Q5b"

class Variant(enum.Enum):
    """Enumeration for the two iteration variants."""

    # Iteration carrying the error terms e_n
    INEXACT = "inexact"

    # Error-free companion iteration started at the same point
    EXACT = "exact"


class StatementKind(enum.Enum):
    """Enumeration for the statements a certificate can be issued for."""

    # Smallness of ||y_n - z||^2 on a window for some probe z
    SMALLNESS = "smallness"

    # Metastability of the exact iterates
    CAUCHY_Y = "cauchy_y"

    # Metastability of the inexact iterates
    CAUCHY_Z = "cauchy_z"

    # Asymptotic regularity of the exact iterates, per-step resolvents
    RESIDUAL_Y = "residual_y"

    # Asymptotic regularity of the exact iterates, fixed resolvent
    RESIDUAL_Y_FIXED = "residual_y_fixed"

    # Asymptotic regularity of the inexact iterates, per-step resolvents
    RESIDUAL_Z = "residual_z"

    # Asymptotic regularity of the inexact iterates, fixed resolvent
    RESIDUAL_Z_FIXED = "residual_z_fixed"

    # Rate of convergence of ||z_n - y_n|| to zero
    THETA_RATE = "theta_rate"

class Verdict(enum.Enum):
    """Enumeration for certificate outcomes."""

    # Witness found and witness <= bound
    CERTIFIED = "Certified"

    # No witness inside the finite horizon
    WITNESS_BEYOND_HORIZON = "WitnessBeyondHorizon"

    # Witness found but the partial bound does not reach it yet
    BOUND_BUDGET_EXCEEDED = "BoundBudgetExceeded"

    # Witness found and bound known to be smaller: a genuine failure
    VIOLATED = "Violated"
