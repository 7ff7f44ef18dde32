"""Parameter sequences of the iteration and the moduli that witness them.

A :class:`Schedule` bundles the exact (``Fraction``) sequences
lambda_n, gamma_n, delta_n, c_n and the error magnitudes ||e_n|| with a
:class:`ModuliPack` of counter-functions h, ell, L, E, Cfun and the constant
c. :func:`validate_conditions` checks the quantitative conditions on a finite
horizon and :func:`derive_constants` computes the scenario constants
D, d0, d1, d2 and d.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ppa.counterfn import (
    ID,
    Add,
    CeilExp,
    CeilLog2,
    Const,
    CounterFn,
    Evaluator,
    affine,
)
from ppa.errors import InvalidParameterError, UnknownCatalogNameError
from ppa.space_ops import as_point, norm
from utils.types_enum import ErrorMode

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-12
DEFAULT_SAMPLES = tuple(range(9))


@dataclass(frozen=True)
class ModuliPack:
    """Counter-functions and constants witnessing the conditions on a schedule.

    Attributes:
        h: lambda_n >= 1/h(n).
        ell: rate of convergence of lambda_n to 0.
        L: rate of divergence of the series of lambda_n.
        E: rate for the error terms, read according to err_mode.
        c: min{c_n, delta_n^2} >= 1/c.
        Cfun: c_n <= Cfun(n).
        err_mode: which error condition E witnesses.
    """

    h: CounterFn
    ell: CounterFn
    L: CounterFn
    E: CounterFn
    c: int
    Cfun: CounterFn
    err_mode: ErrorMode = ErrorMode.SUMMABLE_Q5A

    def __post_init__(self):
        if isinstance(self.c, bool) or not isinstance(self.c, int) or self.c < 1:
            raise InvalidParameterError("the constant c must be a positive integer")

    def to_dict(self) -> Dict[str, str]:
        """Serialize the moduli as prefix expressions."""
        return {
            "h": self.h.to_expr(),
            "ell": self.ell.to_expr(),
            "L": self.L.to_expr(),
            "E": self.E.to_expr(),
            "c": str(self.c),
            "Cfun": self.Cfun.to_expr(),
            "err_mode": self.err_mode.value,
        }


@dataclass(frozen=True)
class ScenarioConstants:
    """Constants tied to a concrete scenario (anchor, start point, zero p)."""

    D: int
    d0: int
    d1: int
    d2: int

    @property
    def d(self) -> int:
        """max{2*d0 + d1, d2}."""
        return max(2 * self.d0 + self.d1, self.d2)

    def to_dict(self) -> Dict[str, str]:
        return {"D": str(self.D), "d0": str(self.d0), "d1": str(self.d1),
                "d2": str(self.d2), "d": str(self.d)}


@dataclass(frozen=True)
class Schedule:
    """Closed-form parameter sequences plus their moduli.

    The sequences are exact: ``lam(n)``, ``gamma(n)``, ``step(n)`` and
    ``error_norm(n)`` return ``Fraction`` values. ``delta`` is defined as
    ``1 - lambda - gamma``. Error vectors are ``error_norm(n)`` times the unit
    ``direction``.
    """

    name: str
    lam: Callable[[int], Fraction]
    gamma: Callable[[int], Fraction]
    step: Callable[[int], Fraction]
    error_norm: Callable[[int], Fraction]
    moduli: ModuliPack
    direction: np.ndarray = field(default_factory=lambda: np.ones(1))

    def delta(self, n: int) -> Fraction:
        return 1 - self.lam(n) - self.gamma(n)

    def error(self, n: int) -> np.ndarray:
        """The error vector e_n."""
        return float(self.error_norm(n)) * self.direction

    @property
    def dim(self) -> int:
        return self.direction.size

    def tabulate(self, horizon: int) -> Dict[str, np.ndarray]:
        """Float64 tables of every sequence for n = 0..horizon."""
        n = range(horizon + 1)
        lam = np.array([float(self.lam(i)) for i in n])
        gamma = np.array([float(self.gamma(i)) for i in n])
        delta = np.array([float(self.delta(i)) for i in n])
        return {
            "lam": lam,
            "gamma": gamma,
            "delta": delta,
            "step": np.array([float(self.step(i)) for i in n]),
            "error_norm": np.array([float(self.error_norm(i)) for i in n]),
        }


# ----------------------------------------------------------------------------
# Catalog sequences
# ----------------------------------------------------------------------------

def _harmonic(n: int) -> Fraction:
    return Fraction(1, n + 2)


def _half_rest(n: int) -> Fraction:
    return (1 - _harmonic(n)) / 2


def _nothing(n: int) -> Fraction:  # pylint: disable=unused-argument
    return Fraction(0)


def _unit(n: int) -> Fraction:  # pylint: disable=unused-argument
    return Fraction(1)


def _alternating(n: int) -> Fraction:
    return Fraction(1 + n % 2)


def _geometric(n: int) -> Fraction:
    return Fraction(1, 2 ** n)


def _harmonic_squared(n: int) -> Fraction:
    return _harmonic(n) ** 2


_HARMONIC_MODULI = ModuliPack(
    h=affine(1, 2),
    ell=ID,
    L=CeilExp(3),
    E=Const(0),
    c=16,
    Cfun=Const(1),
)

# name -> (aliases, lambda, gamma, step, error norm, moduli)
_CATALOG: Dict[str, tuple] = {
    "S1": ("harmonic-exact", _harmonic, _half_rest, _unit, _nothing, _HARMONIC_MODULI),
    "S2": ("harmonic-summable-error", _harmonic, _half_rest, _unit, _geometric,
           dataclasses.replace(_HARMONIC_MODULI, E=Add(CeilLog2(), Const(1)))),
    "S3": ("halpern-reduction", _harmonic, _nothing, _unit, _nothing, _HARMONIC_MODULI),
    "S4": ("harmonic-ratio-error", _harmonic, _half_rest, _unit, _harmonic_squared,
           dataclasses.replace(_HARMONIC_MODULI, E=ID, err_mode=ErrorMode.RATIO_Q5B)),
    "S5": ("alternating-step", _harmonic, _half_rest, _alternating, _nothing,
           dataclasses.replace(_HARMONIC_MODULI, Cfun=Const(2))),
}

_ALIASES = {entry[0]: key for key, entry in _CATALOG.items()}


def catalog_names() -> List[str]:
    """All accepted schedule names (short and long forms)."""
    return sorted(_CATALOG) + sorted(_ALIASES)


def builtin_schedule(name: str, dim: int, moduli: Optional[Dict[str, Any]] = None,
                     direction: Optional[Sequence[float]] = None) -> Schedule:
    """Return a catalog schedule in dimension dim.

    Args:
        name: ``S1``..``S5`` or the long name (``harmonic-exact`` ...).
        dim: dimension of the error direction.
        moduli: replacement moduli (parsed ``CounterFn``/int/ErrorMode values
            keyed by ModuliPack field name).
        direction: error direction, normalized; defaults to the first basis vector.

    Raises:
        UnknownCatalogNameError: name is not in the catalog.
    """
    key = _ALIASES.get(name, name)
    if key not in _CATALOG:
        raise UnknownCatalogNameError("schedule", name)
    _, lam, gamma, step, error_norm, pack = _CATALOG[key]
    if moduli:
        pack = dataclasses.replace(pack, **moduli)

    if direction is None:
        unit = np.zeros(dim)
        unit[0] = 1.0
    else:
        unit = as_point(direction, dim)
        length = norm(unit)
        if length == 0:
            raise InvalidParameterError("error direction must be nonzero")
        unit = unit / length
    unit.setflags(write=False)
    return Schedule(key, lam, gamma, step, error_norm, pack, unit)


# ----------------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------------

@dataclass
class ConditionResult:
    """Outcome of one condition check (for one sampled k, when relevant)."""

    condition: str
    passed: bool
    k: Optional[int] = None
    first_violation: Optional[int] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class ValidationReport:
    """All condition results for one schedule at one horizon."""

    schedule: str
    horizon: int
    results: List[ConditionResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    def failures(self) -> List[ConditionResult]:
        return [result for result in self.results if not result.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schedule": self.schedule,
            "horizon": self.horizon,
            "passed": self.passed,
            "results": [result.to_dict() for result in self.results],
        }


def _modulus(ev: Evaluator, fn: CounterFn, n: int) -> Optional[int]:
    value = ev.value(fn, n)
    return None if ev.exhausted else value


def _first(indices: np.ndarray) -> Optional[int]:
    return int(indices[0]) if indices.size else None


def validate_conditions(schedule: Schedule, horizon: int,
                        samples: Sequence[int] = DEFAULT_SAMPLES,
                        max_steps: int = 1_000_000) -> ValidationReport:
    """Check the quantitative conditions of schedule for n <= horizon.

    Failures are reported in the returned report, never raised. Conditions
    whose modulus cannot be evaluated within max_steps are reported as
    failed with a detail naming the modulus.
    """
    if horizon < 1:
        raise InvalidParameterError("horizon must be at least 1")
    report = ValidationReport(schedule.name, horizon)
    moduli = schedule.moduli
    indices = range(horizon + 1)
    lam = [schedule.lam(n) for n in indices]
    gamma = [schedule.gamma(n) for n in indices]
    step = [schedule.step(n) for n in indices]
    err = [schedule.error_norm(n) for n in indices]
    delta = [1 - lam[n] - gamma[n] for n in indices]

    def record(condition, bad, k=None, detail=""):
        report.results.append(ConditionResult(condition, bad is None, k, bad, detail))

    # well-formedness
    bad = next((n for n in indices if not (0 < lam[n] < 1 and 0 < delta[n] < 1
                                          and 0 <= gamma[n] < 1 and step[n] > 0)), None)
    record("ranges", bad, detail="lambda, delta in (0,1), gamma in [0,1), c_n > 0")
    sums = np.array([float(lam[n]) + float(gamma[n]) + float(delta[n]) for n in indices])
    record("sum_to_one", _first(np.flatnonzero(np.abs(sums - 1.0) > SUM_TOLERANCE)))

    ev = Evaluator(max_steps=max_steps)

    # (Q1) lambda_n >= 1/h(n)
    bad, detail = None, ""
    for n in indices:
        h_n = _modulus(ev, moduli.h, n)
        if h_n is None:
            bad, detail = n, "h exceeded the evaluation budget"
            break
        if h_n < 1 or lam[n] * h_n < 1:
            bad = n
            break
    record("Q1", bad, detail=detail)

    # (Q2) n >= ell(k) implies lambda_n <= 1/(k+1)
    for k in samples:
        ell_k = _modulus(ev, moduli.ell, k)
        if ell_k is None:
            record("Q2", k, k, "ell exceeded the evaluation budget")
            continue
        bad = next((n for n in range(ell_k, horizon + 1) if lam[n] * (k + 1) > 1), None)
        record("Q2", bad, k)

    # (Q3) sum_{i=1}^{L(k)} lambda_i >= k
    partial = np.concatenate(([0.0], np.cumsum([float(x) for x in lam[1:]])))
    for k in samples:
        L_k = _modulus(ev, moduli.L, k)
        if L_k is None or L_k > horizon:
            record("Q3", None, k, "L(k) beyond horizon, not checked")
            continue
        total = math.fsum(float(x) for x in lam[1:L_k + 1])
        if abs(total - k) <= SUM_TOLERANCE * (k + 1):
            ok = sum(lam[1:L_k + 1], Fraction(0)) >= k
        else:
            ok = total >= k
        record("Q3", None if ok else L_k, k, f"partial sum {partial[L_k]:.6g}")

    # (Q4) min{c_n, delta_n^2} >= 1/c, plus c_n <= Cfun(n)
    bad = next((n for n in indices if step[n] * moduli.c < 1 or delta[n] ** 2 * moduli.c < 1), None)
    record("Q4", bad)
    bad = None
    for n in indices:
        bound = _modulus(ev, moduli.Cfun, n)
        if bound is not None and step[n] > bound:
            bad = n
            break
    record("step_bound", bad)

    # (Q5a) / (Q5b)
    if moduli.err_mode is ErrorMode.SUMMABLE_Q5A:
        floats = np.array([float(x) for x in err])
        for k in samples:
            E_k = _modulus(ev, moduli.E, k)
            if E_k is None or E_k >= horizon:
                record("Q5a", None, k, "E(k) beyond horizon, not checked")
                continue
            tail = np.cumsum(floats[E_k + 1:])
            over = np.flatnonzero(tail > 1.0 / (k + 1) + SUM_TOLERANCE)
            bad = None if not over.size else E_k + 1 + int(over[0])
            record("Q5a", bad, k, "windows inside the horizon only")
    else:
        for k in samples:
            E_k = _modulus(ev, moduli.E, k)
            if E_k is None:
                record("Q5b", k, k, "E exceeded the evaluation budget")
                continue
            bad = next((n for n in range(E_k, horizon + 1) if err[n] * (k + 1) > lam[n]), None)
            record("Q5b", bad, k)

    # L(n) >= n on the samples
    bad = None
    for n in samples:
        L_n = _modulus(ev, moduli.L, n)
        if L_n is not None and L_n < n:
            bad = n
            break
    record("L_dominates_identity", bad)

    for failure in report.failures():
        logger.info("schedule %s fails %s at %s (k=%s)", schedule.name, failure.condition,
                    failure.first_violation, failure.k)
    return report


# ----------------------------------------------------------------------------
# Scenario constants
# ----------------------------------------------------------------------------

def ceil_nat(x: float) -> int:
    """Smallest positive integer >= x."""
    return max(1, math.ceil(x))


def derive_constants(schedule: Schedule, zero: np.ndarray, u: np.ndarray, z0: np.ndarray,
                     gaps: Optional[Sequence[float]] = None,
                     overrides: Optional[Dict[str, int]] = None) -> ScenarioConstants:
    """Smallest valid D, d0, d1, d2 for a scenario.

    Args:
        schedule: the schedule (E and the error magnitudes are read from it).
        zero: the designated zero p of the operator.
        u, z0: anchor and starting point.
        gaps: ||z_n - y_n|| along a run covering indices 0..E(0); when
            omitted d2 falls back to its derivable bound from the errors.
        overrides: explicit values; each must be at least the derived one.

    Raises:
        InvalidParameterError: an override is too small, gaps are too short, or
            E(0) exceeds the evaluation budget.
    """
    to_u = norm(u - zero)
    to_start = norm(z0 - zero)
    ev = Evaluator()
    e0 = ev.value(schedule.moduli.E, 0)
    if ev.exhausted:
        raise InvalidParameterError(f"E(0) exceeds the evaluation budget in {ev.exhausted_in}")
    errors = [schedule.error_norm(i) for i in range(e0 + 1)]

    D = ceil_nat(max(2 * to_u, to_start))
    d0 = ceil_nat(max(to_u, to_start))
    d1 = ceil_nat(math.fsum(float(x) for x in errors) + 1)
    if gaps is None:
        # ||z_n - y_n|| <= sum_{i<n} ||e_i|| for n <= E(0)
        d2 = ceil_nat(math.fsum(float(x) for x in errors[:-1]))
    else:
        if len(gaps) < e0 + 1:
            raise InvalidParameterError(f"trajectory shorter than E(0) = {e0}")
        d2 = ceil_nat(max(gaps[: e0 + 1]))
    derived = ScenarioConstants(D, d0, d1, d2)

    for key, value in (overrides or {}).items():
        if value < getattr(derived, key):
            raise InvalidParameterError(
                f"{key} = {value} is below the valid minimum {getattr(derived, key)}"
            )
    if overrides:
        derived = dataclasses.replace(derived, **overrides)
    logger.debug("scenario constants %s", derived.to_dict())
    return derived
