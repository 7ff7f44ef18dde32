"""Hilbert-space primitives on R^d and the catalog of monotone operators.

Every operator in the catalog has a closed-form resolvent
``J_sigma = (I + sigma*A)^-1`` and a designated zero ``p`` (``A(p) = 0``).
Points are one-dimensional float64 arrays.
"""

from __future__ import annotations

import logging
import threading
from typing import Any, Dict, Optional

import numpy as np
from scipy import linalg

from ppa.errors import (
    DimensionMismatchError,
    IllPosedConfigError,
    InvalidParameterError,
    PPAError,
    UnknownCatalogNameError,
)
from utils.types_enum import OperatorKind

logger = logging.getLogger(__name__)

PSD_PROBES = 100
PSD_TOLERANCE = 1e-10
FACTOR_CACHE_SIZE = 64


def as_point(coords: Any, dim: Optional[int] = None) -> np.ndarray:
    """Validate coords as a point of R^dim and return it as a float64 array.

    Raises:
        InvalidParameterError: empty, non-finite or not one-dimensional.
        DimensionMismatchError: dim is given and does not match.
    """
    point = np.array(coords, dtype=np.float64)
    if point.ndim == 0:
        point = point.reshape(1)
    if point.ndim != 1 or point.size == 0:
        raise InvalidParameterError(f"a point must be a non-empty vector, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise InvalidParameterError("a point must have finite coordinates")
    if dim is not None and point.size != dim:
        raise DimensionMismatchError(dim, point.size)
    return point


def _check_dims(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionMismatchError(x.size, y.size)


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean inner product."""
    _check_dims(x, y)
    return float(np.dot(x, y))


def norm(x: np.ndarray) -> float:
    """Euclidean norm."""
    return float(np.sqrt(np.dot(x, x)))


def distance(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean distance."""
    _check_dims(x, y)
    return norm(x - y)


# ----------------------------------------------------------------------------
# Operators
# ----------------------------------------------------------------------------

class MonotoneOperator:
    """A maximal monotone operator on R^dim with an exact resolvent.

    Attributes:
        kind: catalog entry.
        dim: ambient dimension.
        zero: designated point p with 0 in A(p).
    """

    kind: OperatorKind

    def __init__(self, dim: int, zero: np.ndarray):
        if dim < 1:
            raise InvalidParameterError("dimension must be positive")
        self.dim = dim
        self.zero = as_point(zero, dim)
        self.zero.setflags(write=False)

    def _resolve(self, sigma: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def resolvent(self, sigma: float, x: np.ndarray) -> np.ndarray:
        """Return J_sigma(x), the unique y with x in y + sigma*A(y)."""
        return resolvent(self, sigma, x)

    def describe(self) -> Dict[str, Any]:
        """JSON-friendly description, the inverse of :func:`build_operator`."""
        return {"kind": self.kind.value, "dim": self.dim}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class ZeroOperator(MonotoneOperator):
    """A = 0; the resolvent is the identity."""

    kind = OperatorKind.ZERO

    def __init__(self, dim: int):
        super().__init__(dim, np.zeros(dim))

    def _resolve(self, sigma, x):
        return x.copy()


class LinearPSDOperator(MonotoneOperator):
    """A(x) = Mx for a symmetric positive semidefinite matrix M.

    The resolvent solves (I + sigma*M) y = x with a Cholesky factorization,
    cached per distinct sigma.
    """

    kind = OperatorKind.LINEAR_PSD

    def __init__(self, matrix: Any, seed: int = 0):
        m = np.array(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InvalidParameterError(f"matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidParameterError("matrix entries must be finite")
        if not np.array_equal(m, m.T):
            raise InvalidParameterError("matrix is not symmetric")
        rng = np.random.default_rng(seed)
        probes = rng.standard_normal((PSD_PROBES, m.shape[0]))
        rayleigh = np.einsum("ij,jk,ik->i", probes, m, probes) / np.einsum("ij,ij->i", probes, probes)
        if np.min(rayleigh) < -PSD_TOLERANCE:
            raise InvalidParameterError("matrix is not positive semidefinite")
        super().__init__(m.shape[0], np.zeros(m.shape[0]))
        self.matrix = m
        self.matrix.setflags(write=False)
        self._factors: Dict[float, Any] = {}
        self._lock = threading.Lock()

    def _factor(self, sigma: float):
        factors = self._factors.get(sigma)
        if factors is None:
            try:
                computed = linalg.cho_factor(np.eye(self.dim) + sigma * self.matrix)
            except linalg.LinAlgError as exc:
                raise PPAError(f"I + {sigma}*M is not positive definite") from exc
            with self._lock:
                if len(self._factors) >= FACTOR_CACHE_SIZE:
                    self._factors.pop(next(iter(self._factors)))
                factors = self._factors.setdefault(sigma, computed)
        return factors

    def _resolve(self, sigma, x):
        return linalg.cho_solve(self._factor(sigma), x)

    def describe(self):
        return {**super().describe(), "matrix": self.matrix.tolist()}


class AbsValueSubdiff(MonotoneOperator):
    """Subdifferential of |x| (of the l1 norm, coordinatewise, when dim > 1).

    The resolvent is soft-thresholding at level sigma.
    """

    kind = OperatorKind.ABS_VALUE_SUBDIFF

    def __init__(self, dim: int = 1):
        super().__init__(dim, np.zeros(dim))

    def _resolve(self, sigma, x):
        return np.sign(x) * np.maximum(np.abs(x) - sigma, 0.0)


class BoxIndicator(MonotoneOperator):
    """Normal cone of the box [lower, upper]; the resolvent clips."""

    kind = OperatorKind.BOX_INDICATOR

    def __init__(self, lower: Any, upper: Any, feasible: Any = None):
        lo = as_point(lower)
        hi = as_point(upper, lo.size)
        if np.any(lo > hi):
            raise InvalidParameterError("box needs lower <= upper in every coordinate")
        p = np.clip(np.zeros(lo.size), lo, hi) if feasible is None else as_point(feasible, lo.size)
        if np.any(p < lo) or np.any(p > hi):
            raise InvalidParameterError("designated point lies outside the box")
        super().__init__(lo.size, p)
        self.lower, self.upper = lo, hi

    def _resolve(self, sigma, x):
        return np.clip(x, self.lower, self.upper)

    def describe(self):
        return {**super().describe(), "lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "feasible": self.zero.tolist()}


class BallIndicator(MonotoneOperator):
    """Normal cone of the closed ball B(center, radius); the resolvent projects."""

    kind = OperatorKind.BALL_INDICATOR

    def __init__(self, center: Any, radius: float, feasible: Any = None):
        c = as_point(center)
        if not radius > 0 or not np.isfinite(radius):
            raise InvalidParameterError("ball radius must be positive and finite")
        p = c.copy() if feasible is None else as_point(feasible, c.size)
        if norm(p - c) > radius:
            raise InvalidParameterError("designated point lies outside the ball")
        super().__init__(c.size, p)
        self.center, self.radius = c, float(radius)

    def _resolve(self, sigma, x):
        return project_ball(x, self.center, self.radius)

    def describe(self):
        return {**super().describe(), "center": self.center.tolist(), "radius": self.radius,
                "feasible": self.zero.tolist()}


class ScaledIdentity(MonotoneOperator):
    """A(x) = a*x with a >= 0; the resolvent is x / (1 + sigma*a)."""

    kind = OperatorKind.SCALED_IDENTITY

    def __init__(self, dim: int, a: float = 1.0):
        if not a >= 0 or not np.isfinite(a):
            raise InvalidParameterError("scaled identity needs a finite a >= 0")
        super().__init__(dim, np.zeros(dim))
        self.a = float(a)

    def _resolve(self, sigma, x):
        return x / (1.0 + sigma * self.a)

    def describe(self):
        return {**super().describe(), "a": self.a}


def resolvent(op: MonotoneOperator, sigma: float, x: np.ndarray) -> np.ndarray:
    """Return J_sigma(x) for op.

    Raises:
        InvalidParameterError: sigma is not a positive finite number.
        DimensionMismatchError: x does not live in op's space.
        IllPosedConfigError: the result is not finite.
    """
    sigma = float(sigma)
    if not sigma > 0 or not np.isfinite(sigma):
        raise InvalidParameterError(f"resolvent parameter must be positive, got {sigma}")
    if x.shape != (op.dim,):
        raise DimensionMismatchError(op.dim, x.size)
    y = op._resolve(sigma, x)  # pylint: disable=protected-access
    if not np.all(np.isfinite(y)):
        raise IllPosedConfigError(f"non-finite resolvent value for {op!r}")
    return y


# ----------------------------------------------------------------------------
# Catalog
# ----------------------------------------------------------------------------

def build_operator(spec: Dict[str, Any], dim: int, seed: int = 0) -> MonotoneOperator:
    """Build an operator from its config description.

    Args:
        spec: ``{"kind": <OperatorKind value>, ...parameters}``.
        dim: dimension taken from the scenario's points.
        seed: seed for the PSD probes of ``linear_psd``.

    Raises:
        UnknownCatalogNameError: unknown kind.
        InvalidParameterError / DimensionMismatchError: bad parameters.
    """
    try:
        kind = OperatorKind(spec["kind"])
    except ValueError as exc:
        raise UnknownCatalogNameError("operator", spec["kind"]) from exc

    if kind is OperatorKind.ZERO:
        op: MonotoneOperator = ZeroOperator(dim)
    elif kind is OperatorKind.LINEAR_PSD:
        op = LinearPSDOperator(spec["matrix"], seed=seed)
    elif kind is OperatorKind.ABS_VALUE_SUBDIFF:
        op = AbsValueSubdiff(dim)
    elif kind is OperatorKind.BOX_INDICATOR:
        op = BoxIndicator(spec["lower"], spec["upper"], spec.get("feasible"))
    elif kind is OperatorKind.BALL_INDICATOR:
        op = BallIndicator(spec["center"], spec["radius"], spec.get("feasible"))
    else:
        op = ScaledIdentity(dim, spec.get("a", 1.0))

    if op.dim != dim:
        raise DimensionMismatchError(dim, op.dim)
    logger.debug("built operator %r", op)
    return op


def sample_ball(rng: np.random.Generator, center: np.ndarray, radius: float,
                count: int) -> np.ndarray:
    """Draw count points of B(center, radius): uniform direction, radius uniform in [0, radius]."""
    directions = rng.standard_normal((count, center.size))
    lengths = np.linalg.norm(directions, axis=1)
    lengths[lengths == 0] = 1.0
    radii = rng.uniform(0.0, radius, size=count)
    return center + directions * (radii / lengths)[:, None]


def project_ball(x: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Metric projection onto B(center, radius)."""
    offset = x - center
    length = norm(offset)
    if length <= radius:
        return x.copy()
    return center + offset * (radius / length)
