"""Witness searches, certificates and audits over finite runs.

A certificate pairs the smallest witness found inside the horizon with the
bound computed by :mod:`ppa.rate_calculus`. Audits re-check the inequalities
the bounds are derived from, numerically, on the same runs; implications are
only checked where their hypotheses hold, and vacuous cases are counted.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist, pdist

from ppa.counterfn import ID, Add, CeilExp, CeilLog2, Const, CounterFn, Evaluator
from ppa.errors import InvalidParameterError
from ppa.iteration_engine import AuxSeries, Trajectory, aux_series, coupling_gap
from ppa.rate_calculus import BoundContext, BoundValue, RateCalculus
from ppa.schedules import ScenarioConstants
from ppa.space_ops import MonotoneOperator, resolvent
from utils.types_enum import ErrorMode, StatementKind, Variant, Verdict

logger = logging.getLogger(__name__)

RUN_TOLERANCE = 1e-8
RATE_TOLERANCE = 1e-9
LAW_TOLERANCE = 1e-9
FIXED_POINT_TOLERANCE = 1e-12
SYNTHETIC_TOLERANCE = 1e-12
SYNTHETIC_HORIZON = 1000
HYPOTHESIS_MARGIN = 1e-10

WINDOW_STEP_BUDGET = 100_000
HULL_MIN_POINTS = 64
PDIST_LIMIT = 4096
CDIST_CHUNK = 1024
GRID_TRAJECTORY_POINTS = 512
PROJECTION_LEVELS = 64
CONDITIONED_PROBES = 8
INCREASING_CASE_LIMIT = 200
LAW_INSTANCES = 1000

RATE_KS = range(7)
SEGMENT_KS = (0, 1, 2)
SEGMENT_FNS = (Add(ID, Const(1)), Add(Add(ID, ID), Const(1)))
FIXED_POINT_MS = (0, 1)
WINDOW_FNS = (ID, Add(ID, Const(5)))


# ----------------------------------------------------------------------------
# Windows
# ----------------------------------------------------------------------------

def window_end(f: CounterFn, n: int, horizon: int) -> Optional[int]:
    """f(n) when it is known to be at most horizon, otherwise None."""
    ev = Evaluator(WINDOW_STEP_BUDGET)
    end = ev.value(f, n)
    if ev.exhausted or end > horizon:
        return None
    return end


def _next_true(mask: np.ndarray) -> np.ndarray:
    """nxt[i] = smallest j >= i with mask[j], or mask.size; one trailing entry."""
    size = mask.size
    nxt = np.full(size + 1, size, dtype=np.int64)
    if size:
        idx = np.where(mask, np.arange(size), size)
        nxt[:size] = np.minimum.accumulate(idx[::-1])[::-1]
    return nxt


def find_window_witness(bad: np.ndarray, f: CounterFn, horizon: int,
                        start: int = 0) -> Optional[int]:
    """Smallest n >= start with f(n) <= horizon and no bad index in [n, f(n)].

    An empty window (f(n) < n) is a witness. Indices in a window that
    contains a bad index b can be skipped up to b, since f is monotone.
    """
    bad = np.asarray(bad, dtype=bool)
    horizon = min(horizon, bad.size - 1)
    nxt = _next_true(bad[: horizon + 1])
    n = start
    while n <= horizon:
        end = window_end(f, n, horizon)
        if end is None:
            return None
        if end < n or nxt[n] > end:
            return n
        n = int(nxt[n]) + 1
    return None


def find_residual_witness(residuals: np.ndarray, k: int, f: CounterFn,
                          horizon: int) -> Optional[int]:
    """Smallest n with every residual in [n, f(n)] at most 1/(k+1)."""
    return find_window_witness(np.asarray(residuals) > 1.0 / (k + 1), f, horizon)


def window_diameter(window: np.ndarray) -> float:
    """Largest pairwise distance of a set of points (rows)."""
    if window.shape[0] < 2:
        return 0.0
    if window.shape[1] == 1:
        return float(np.ptp(window[:, 0]))
    candidates = window
    if window.shape[1] <= 3 and window.shape[0] >= HULL_MIN_POINTS:
        try:
            candidates = window[ConvexHull(window).vertices]
        except (QhullError, ValueError):
            # degenerate (e.g. collinear) windows
            candidates = window
    if candidates.shape[0] <= PDIST_LIMIT:
        return float(pdist(candidates).max())
    best = 0.0
    for begin in range(0, candidates.shape[0], CDIST_CHUNK):
        block = cdist(candidates[begin:begin + CDIST_CHUNK], candidates)
        best = max(best, float(block.max()))
    return best


def find_cauchy_witness(points: np.ndarray, k: int, f: CounterFn,
                        horizon: int) -> Optional[int]:
    """Smallest n <= horizon with f(n) <= horizon and diameter of x[n..f(n)] <= 1/(k+1)."""
    eps = 1.0 / (k + 1)
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    horizon = min(horizon, points.shape[0] - 1)
    n = 0
    while n <= horizon:
        end = window_end(f, n, horizon)
        if end is None:
            return None
        if end <= n:
            return n
        window = points[n:end + 1]
        spread = np.linalg.norm(window - window[-1], axis=1)
        far = np.flatnonzero(spread > eps)
        if far.size:
            # the pair (far, end) stays inside every later window up to far
            n += int(far[-1]) + 1
            continue
        if spread.max() <= eps / 2 or window_diameter(window) <= eps:
            return n
        n += 1
    return None


def window_holds(values: np.ndarray, n: int, end: int, eps: float) -> bool:
    """Brute-force recheck of a window: all pairs of rows in [n, end] within eps."""
    window = np.asarray(values, dtype=np.float64)[n:end + 1]
    if window.ndim == 1:
        window = window[:, None]
    if window.shape[0] < 2:
        return True
    return bool(np.all(cdist(window, window) <= eps))


# ----------------------------------------------------------------------------
# tau
# ----------------------------------------------------------------------------

def tau(s: Sequence[float], m: int, n: int) -> int:
    """Last strict increase s_k < s_{k+1} with k in [m, n]; n when there is none or n < m.

    Raises:
        InvalidParameterError: m or n negative, or n >= len(s) - 1.
    """
    if m < 0 or n < 0 or n >= len(s) - 1:
        raise InvalidParameterError(f"tau needs 0 <= n < {len(s) - 1} and m >= 0")
    if n < m:
        return n
    for k in range(n, m - 1, -1):
        if s[k] < s[k + 1]:
            return k
    return n


def tau_table(s: Sequence[float]) -> np.ndarray:
    """T[m, i] = tau(s, m, i) for m, i in [0, len(s) - 2]."""
    s = np.asarray(s)
    if s.size < 2:
        raise InvalidParameterError("tau needs a sequence of length at least 2")
    idx = np.arange(s.size - 1)
    last = np.maximum.accumulate(np.where(s[:-1] < s[1:], idx, -1))
    start, index = idx[:, None], idx[None, :]
    return np.where((index >= start) & (last[None, :] >= start), last[None, :], index)


@dataclass(frozen=True)
class TauView:
    """tau over a fixed sequence and start index m."""

    s: Tuple[float, ...]
    m: int

    def __call__(self, n: int) -> int:
        return tau(self.s, self.m, n)

    def table(self) -> np.ndarray:
        """Values at every admissible n."""
        if self.m >= len(self.s) - 1:
            return np.arange(len(self.s) - 1)
        return tau_table(self.s)[self.m]


# ----------------------------------------------------------------------------
# Scenario runs
# ----------------------------------------------------------------------------

class RunBundle:
    """Exact and inexact runs of one scenario plus the series derived from them.

    Args:
        name: scenario name used in counterexamples.
        exact, inexact: runs sharing operator, schedule, anchor and start.
        constants: D, d0, d1, d2 of the scenario.
        probes: points of B_D; the first one is the designated zero.
        c: the constant with J = J_{1/c}.
    """

    def __init__(self, name: str, exact: Trajectory, inexact: Trajectory,
                 constants: ScenarioConstants, probes: Sequence[np.ndarray], c: int):
        self.name = name
        self.exact = exact
        self.inexact = inexact
        self.constants = constants
        self.probes = list(probes)
        self.fixed_sigma = 1.0 / c
        self.gaps = coupling_gap(inexact, exact)
        self._aux: Dict[int, AuxSeries] = {}
        self._fixed: Dict[Variant, np.ndarray] = {}
        self._grid: Optional[ProbeGrid] = None

    @property
    def horizon(self) -> int:
        return self.exact.horizon

    @property
    def operator(self) -> MonotoneOperator:
        return self.exact.operator

    def trajectory(self, variant: Variant) -> Trajectory:
        return self.exact if variant is Variant.EXACT else self.inexact

    def aux(self, index: int) -> AuxSeries:
        """Auxiliary series of the exact run for probe index."""
        series = self._aux.get(index)
        if series is None:
            series = self._aux.setdefault(index, aux_series(self.exact, self.probes[index]))
        return series

    def fixed_residuals(self, variant: Variant) -> np.ndarray:
        """||J(x_n) - x_n|| with J = J_{1/c}."""
        values = self._fixed.get(variant)
        if values is None:
            computed = self.trajectory(variant).fixed_residuals(self.fixed_sigma)
            values = self._fixed.setdefault(variant, computed)
        return values

    def fixed_gap(self, z: np.ndarray) -> float:
        return float(np.linalg.norm(resolvent(self.operator, self.fixed_sigma, z) - z))

    @property
    def grid(self) -> "ProbeGrid":
        if self._grid is None:
            self._grid = ProbeGrid(self)
        return self._grid


class ProbeGrid:
    """Finite stand-in for B_D: probes, a subsample of the exact run and J of the probes."""

    def __init__(self, bundle: RunBundle):
        op, sigma = bundle.operator, bundle.fixed_sigma
        stride = max(1, bundle.horizon // GRID_TRAJECTORY_POINTS)
        rows = list(bundle.probes)
        rows.extend(bundle.exact.points[::stride])
        rows.append(bundle.exact.points[-1])
        rows.extend(resolvent(op, sigma, probe) for probe in bundle.probes)
        self.points = np.vstack(rows)
        images = np.vstack([resolvent(op, sigma, x) for x in self.points])
        self.residuals = np.linalg.norm(images - self.points, axis=1)
        self.anchor = bundle.exact.anchor

    def variational_max(self, z: np.ndarray, m: int) -> float:
        """max <u - z, y - z> over grid points y with ||J(y) - y|| <= 1/(m+1)."""
        mask = self.residuals <= 1.0 / (m + 1)
        if not mask.any():
            return float("-inf")
        return float(np.max((self.points[mask] - z) @ (self.anchor - z)))


# ----------------------------------------------------------------------------
# Certificates
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Statement:
    """A metastability or rate statement at precision k and counter-function f."""

    kind: StatementKind
    k: int
    f: CounterFn = ID

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 0:
            raise InvalidParameterError(f"k must be a natural number, got {self.k!r}")

    def label(self) -> str:
        return f"{self.kind.value}(k={self.k}, f={self.f.to_expr()})"


@dataclass(frozen=True)
class Certificate:
    """Outcome of certifying one statement on one scenario."""

    statement: Statement
    witness: Optional[int]
    bound: BoundValue
    verdict: Verdict
    probe: Optional[int] = None
    timings: Dict[str, float] = field(default_factory=dict, compare=False)

    def to_dict(self, with_timings: bool = False) -> Dict[str, Any]:
        payload = {
            "statement": self.statement.kind.value,
            "k": self.statement.k,
            "f": self.statement.f.to_expr(),
            "witness": self.witness,
            **self.bound.to_dict(),
            "verdict": self.verdict.value,
            "probe": self.probe,
        }
        if with_timings:
            payload["timings"] = dict(self.timings)
        return payload


def decide(witness: Optional[int], bound: BoundValue) -> Verdict:
    """Verdict for a witness against a bound."""
    if witness is None:
        return Verdict.WITNESS_BEYOND_HORIZON
    if bound.covers(witness):
        return Verdict.CERTIFIED
    if bound.exact:
        return Verdict.VIOLATED
    return Verdict.BOUND_BUDGET_EXCEEDED


def statement_bound(calculus: RateCalculus, statement: Statement) -> BoundValue:
    """The bound that the statement is claimed under."""
    k, f, kind = statement.k, statement.f, statement.kind
    if kind is StatementKind.SMALLNESS:
        return calculus.mu(k, f)
    if kind is StatementKind.CAUCHY_Y:
        return calculus.mu(4 * (k + 1) ** 2 - 1, f)
    if kind is StatementKind.CAUCHY_Z:
        return calculus.nu(k, f)
    if kind is StatementKind.RESIDUAL_Y:
        return calculus.mu_tilde(k, f)
    if kind is StatementKind.RESIDUAL_Y_FIXED:
        return calculus.mu_tilde(2 * k + 1, f)
    if kind is StatementKind.RESIDUAL_Z:
        return calculus.nu_tilde(k, f)
    if kind is StatementKind.RESIDUAL_Z_FIXED:
        return calculus.nu_tilde(2 * k + 1, f)
    return calculus.Theta(k)


def _smallness_witness(bundle: RunBundle, k: int, f: CounterFn,
                       horizon: int) -> Tuple[Optional[int], Optional[int]]:
    eps = 1.0 / (k + 1)
    best: Tuple[Optional[int], Optional[int]] = (None, None)
    for index in range(len(bundle.probes)):
        witness = find_window_witness(bundle.aux(index).s > eps, f, horizon)
        if witness is not None and (best[0] is None or witness < best[0]):
            best = (witness, index)
            if witness == 0:
                break
    return best


def _rate_witness(gaps: np.ndarray, k: int, horizon: int) -> Optional[int]:
    violations = np.flatnonzero(gaps[: horizon + 1] > 1.0 / (k + 1))
    if violations.size == 0:
        return 0
    last = int(violations[-1])
    return None if last >= horizon else last + 1


def find_witness(statement: Statement, bundle: RunBundle,
                 horizon: Optional[int] = None) -> Tuple[Optional[int], Optional[int]]:
    """(witness, probe index) for a statement; the probe is only set for smallness."""
    horizon = bundle.horizon if horizon is None else min(horizon, bundle.horizon)
    k, f, kind = statement.k, statement.f, statement.kind
    if kind is StatementKind.SMALLNESS:
        return _smallness_witness(bundle, k, f, horizon)
    if kind is StatementKind.THETA_RATE:
        return _rate_witness(bundle.gaps, k, horizon), None
    if kind in (StatementKind.CAUCHY_Y, StatementKind.CAUCHY_Z):
        variant = Variant.EXACT if kind is StatementKind.CAUCHY_Y else Variant.INEXACT
        return find_cauchy_witness(bundle.trajectory(variant).points, k, f, horizon), None
    variant = (Variant.EXACT if kind in (StatementKind.RESIDUAL_Y, StatementKind.RESIDUAL_Y_FIXED)
               else Variant.INEXACT)
    if kind in (StatementKind.RESIDUAL_Y_FIXED, StatementKind.RESIDUAL_Z_FIXED):
        residuals = bundle.fixed_residuals(variant)
    else:
        residuals = bundle.trajectory(variant).residuals
    return find_residual_witness(residuals, k, f, horizon), None


def certify(statement: Statement, bundle: RunBundle, calculus: RateCalculus) -> Certificate:
    """Search a witness, compute the bound and decide the verdict.

    Budget exhaustion only ever turns into a verdict.
    """
    started = time.perf_counter()
    witness, probe = find_witness(statement, bundle)
    searched = time.perf_counter()
    bound = statement_bound(calculus, statement)
    finished = time.perf_counter()
    verdict = decide(witness, bound)
    if verdict is Verdict.VIOLATED:
        logger.error("%s on %s: witness %s exceeds bound %s", statement.label(), bundle.name,
                     witness, bound.value)
    else:
        logger.debug("%s on %s: %s (witness %s)", statement.label(), bundle.name,
                     verdict.value, witness)
    return Certificate(statement, witness, bound, verdict, probe,
                       {"search": searched - started, "bound": finished - searched})


# ----------------------------------------------------------------------------
# Projection search
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionProbe:
    """A grid point that passed both conditions of the projection argument.

    The quantifier over B_D is only checked on the probe grid.
    """

    n: int
    point: np.ndarray
    residual: float
    variational: float
    bound: BoundValue
    status: str = "grid-checked"

    @property
    def within_bound(self) -> bool:
        return self.bound.covers(self.n)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "point": [repr(float(x)) for x in self.point],
            "residual": repr(self.residual),
            "variational": repr(self.variational),
            "beta": self.bound.to_dict(),
            "within_bound": self.within_bound,
            "status": self.status,
        }


def _reciprocal(value: int) -> float:
    # huge values underflow to an exact-zero threshold
    return 0.0 if value.bit_length() > 1000 else 1.0 / (value + 1)


def projection_probe_search(calculus: RateCalculus, bundle: RunBundle, k: int,
                            f: CounterFn, levels: int = PROJECTION_LEVELS
                            ) -> Optional[ProjectionProbe]:
    """Smallest n < levels with a grid point z such that ||J(z) - z|| <= 1/(f(n)+1)
    and <u - z, y - z> <= 1/(k+1) for every grid y with ||J(y) - y|| <= 1/(n+1).

    Candidates are tried in order of their distance to the anchor. None means
    the grid failed, not that no such point exists.
    """
    grid = bundle.grid
    order = np.argsort(np.linalg.norm(grid.points - grid.anchor, axis=1), kind="stable")
    eps = 1.0 / (k + 1)
    for n in range(levels):
        ev = Evaluator(WINDOW_STEP_BUDGET)
        value = ev.value(f, n)
        threshold = 0.0 if ev.exhausted else _reciprocal(value)
        mask = grid.residuals <= 1.0 / (n + 1)
        if not mask.any():
            continue
        ys = grid.points[mask]
        for index in order:
            if grid.residuals[index] > threshold:
                continue
            z = grid.points[index]
            worst = float(np.max((ys - z) @ (grid.anchor - z)))
            if worst <= eps:
                logger.debug("projection probe for k=%d found at n=%d", k, n)
                return ProjectionProbe(n, z.copy(), float(grid.residuals[index]), worst,
                                       calculus.beta(k, f))
    logger.info("projection probe search for k=%d failed on the grid", k)
    return None


# ----------------------------------------------------------------------------
# Audit reports
# ----------------------------------------------------------------------------

def _order_key(where: Dict[str, Any]) -> tuple:
    return tuple(sorted(where.items()))


@dataclass
class AuditCheck:
    """Counts for one audited property.

    Attributes:
        checked: instances whose hypotheses held.
        failures: instances where the conclusion failed.
        vacuous: instances whose hypotheses did not hold.
        margin: smallest observed rhs - lhs, when tracked.
        counterexample: the least failing instance.
    """

    name: str
    checked: int = 0
    failures: int = 0
    vacuous: int = 0
    margin: Optional[float] = None
    counterexample: Optional[Dict[str, Any]] = None

    def _keep(self, where: Dict[str, Any]) -> None:
        if self.counterexample is None or _order_key(where) < _order_key(self.counterexample):
            self.counterexample = where

    def observe(self, margin: float, where: Dict[str, Any], tolerance: float = 0.0) -> bool:
        """Record one instance of rhs - lhs >= -tolerance."""
        self.checked += 1
        margin = float(margin)
        self.margin = margin if self.margin is None else min(self.margin, margin)
        if margin >= -tolerance:
            return True
        self.failures += 1
        self._keep(where)
        return False

    def observe_all(self, margins: np.ndarray, where: Callable[[int], Dict[str, Any]],
                    tolerance: Any = 0.0) -> None:
        """Vectorized :meth:`observe`; where maps a flat index to its location."""
        margins = np.ravel(np.asarray(margins, dtype=np.float64))
        if margins.size == 0:
            return
        self.checked += margins.size
        lowest = float(margins.min())
        self.margin = lowest if self.margin is None else min(self.margin, lowest)
        failing = np.flatnonzero(margins < -np.ravel(np.broadcast_to(tolerance, margins.shape)))
        if failing.size:
            self.failures += int(failing.size)
            self._keep(where(int(failing[0])))

    def tally(self, ok: bool, where: Dict[str, Any]) -> bool:
        """Record one instance without a margin."""
        self.checked += 1
        if not ok:
            self.failures += 1
            self._keep(where)
        return ok

    def tally_all(self, bad: np.ndarray, where: Callable[[tuple], Dict[str, Any]]) -> None:
        bad = np.asarray(bad, dtype=bool)
        self.checked += bad.size
        failing = np.argwhere(bad)
        if failing.size:
            self.failures += len(failing)
            self._keep(where(tuple(int(i) for i in failing[0])))

    def skip(self, count: int = 1) -> None:
        self.vacuous += count

    @property
    def status(self) -> str:
        if self.failures:
            return "fail"
        return "pass" if self.checked else "vacuous"

    def merge(self, other: "AuditCheck") -> "AuditCheck":
        merged = AuditCheck(self.name, self.checked + other.checked,
                            self.failures + other.failures, self.vacuous + other.vacuous)
        margins = [m for m in (self.margin, other.margin) if m is not None]
        merged.margin = min(margins) if margins else None
        for where in (self.counterexample, other.counterexample):
            if where is not None:
                merged._keep(where)  # pylint: disable=protected-access
        return merged

    def to_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "checked": self.checked,
            "failures": self.failures,
            "vacuous": self.vacuous,
            "margin": None if self.margin is None else repr(self.margin),
            "counterexample": self.counterexample,
        }


@dataclass
class AuditReport:
    """Audit checks by name; merging is associative and order-independent."""

    checks: Dict[str, AuditCheck] = field(default_factory=dict)

    def check(self, name: str) -> AuditCheck:
        return self.checks.setdefault(name, AuditCheck(name))

    def merge(self, other: "AuditReport") -> "AuditReport":
        merged = AuditReport(dict(self.checks))
        for name, check in other.checks.items():
            merged.checks[name] = merged.checks[name].merge(check) if name in merged.checks \
                else check
        return merged

    @property
    def passed(self) -> bool:
        return all(check.failures == 0 for check in self.checks.values())

    def failures(self) -> List[AuditCheck]:
        return [self.checks[name] for name in sorted(self.checks) if self.checks[name].failures]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "checks": {name: self.checks[name].to_dict() for name in sorted(self.checks)},
        }


# ----------------------------------------------------------------------------
# Audits on runs
# ----------------------------------------------------------------------------

def _ends(f: CounterFn, horizon: int) -> List[int]:
    """f(0), f(1), ... for as long as the values stay within horizon."""
    ends = []
    while True:
        end = window_end(f, len(ends), horizon)
        if end is None or len(ends) > horizon:
            return ends
        ends.append(end)


def _exact(bound: BoundValue, horizon: int) -> Optional[int]:
    return bound.value if bound.exact and bound.value <= horizon else None


def _audit_coupling(report: AuditReport, calculus: RateCalculus, bundle: RunBundle) -> None:
    y, gaps, const = bundle.exact, bundle.gaps, bundle.constants
    h = bundle.horizon
    tables = y.tables

    def at(**where):
        return lambda i: {"scenario": bundle.name, **{k: v(i) for k, v in where.items()}}

    index = at(index=lambda i: i)
    distances = np.linalg.norm(y.points - y.operator.zero, axis=1)
    report.check("exact_iterates_bounded").observe_all(const.d0 - distances, index,
                                                       RUN_TOLERANCE)
    if y.schedule.moduli.err_mode is ErrorMode.SUMMABLE_Q5A:
        ceiling = 2 * const.d0 + const.d1
    else:
        ceiling = const.d2
    report.check("coupling_gap_bounded").observe_all(ceiling - gaps, index, RUN_TOLERANCE)

    rhs = (1 - tables["lam"][:h]) * gaps[:-1] + tables["error_norm"][:h]
    report.check("coupling_gap_contracts").observe_all(rhs - gaps[1:], index, RUN_TOLERANCE)

    rate = report.check("coupling_rate")
    for k in RATE_KS:
        theta = _exact(calculus.Theta(k), h)
        if theta is None:
            rate.skip()
            continue
        rate.observe_all(1.0 / (k + 1) - gaps[theta:],
                         at(k=lambda i, k=k: k, index=lambda i, t=theta: t + i),
                         RATE_TOLERANCE)


def _audit_descent(report: AuditReport, bundle: RunBundle, c: int) -> None:
    y, h, D = bundle.exact, bundle.horizon, bundle.constants.D
    lam = y.tables["lam"][:h]
    squared_residuals = y.residuals[:h] ** 2
    descent = report.check("descent_inequality")
    residual = report.check("residual_inequality")
    for probe in range(len(bundle.probes)):
        aux = bundle.aux(probe)
        s, P = aux.s, aux.P

        def where(i, probe=probe):
            return {"scenario": bundle.name, "probe": probe, "index": i}

        rhs = (1 - lam) * (s[:h] + P[:h]) + 2 * lam * aux.inner
        descent.observe_all(rhs - s[1:], where, RUN_TOLERANCE)
        rhs = c * (8 * D * D * lam + s[:h] - s[1:] + P[:h])
        residual.observe_all(rhs - squared_residuals, where, RUN_TOLERANCE)


def _audit_step_gaps(report: AuditReport, calculus: RateCalculus, bundle: RunBundle) -> None:
    """A small fixed-resolvent gap controls every per-step gap up to n."""
    h = bundle.horizon
    check = report.check("fixed_resolvent_controls_steps")
    starts = sorted({n for n in (0, 1, 10, 100, 1000, h) if n <= h})
    zetas = {(k, n): calculus.zeta(k, n) for k in range(4) for n in starts}
    candidates = [(f"probe{i}", bundle.aux(i)) for i in range(len(bundle.probes))]
    candidates.extend((f"y{n}", aux_series(bundle.exact, bundle.exact.points[n])) for n in starts)
    for label, aux in candidates:
        fixed = bundle.fixed_gap(aux.probe)
        running = np.maximum.accumulate(aux.resolvent_gap)
        for k in range(4):
            for n in starts:
                zeta = zetas[(k, n)]
                if not zeta.exact or fixed > _reciprocal(zeta.value) - HYPOTHESIS_MARGIN:
                    check.skip()
                    continue
                check.observe(1.0 / (k + 1) - running[n],
                              {"scenario": bundle.name, "point": label, "k": k, "index": n},
                              RATE_TOLERANCE)


def _audit_window_recursion_run(report: AuditReport, calculus: RateCalculus,
                                bundle: RunBundle) -> None:
    """Smallness after sigma(k, n) on runs whose inputs are small on [n, q]."""
    h = bundle.horizon
    q = h - 1
    lam = bundle.exact.tables["lam"]
    check = report.check("anchored_recursion_window")
    for probe in range(min(CONDITIONED_PROBES, len(bundle.probes))):
        aux = bundle.aux(probe)
        v, r = aux.P[:h], 2 * aux.inner
        for k in SEGMENT_KS:
            v_cap = 1.0 / (3 * (k + 1) * (q + 1)) - HYPOTHESIS_MARGIN
            r_cap = 1.0 / (3 * (k + 1)) - HYPOTHESIS_MARGIN
            bad = (v > v_cap) | (r > r_cap)
            later_bad = np.flatnonzero(bad)
            # the recursion itself must hold everywhere, up to rounding
            recursion = (1 - lam[:h]) * (aux.s[:h] + v) + lam[:h] * r - aux.s[1:]
            if np.any(recursion < -RUN_TOLERANCE):
                check.skip()
                continue
            for n in (0, 1, 10, 100):
                start = _exact(calculus.sigma(k, n), q)
                if n > q or start is None or (later_bad.size and later_bad[-1] >= n):
                    check.skip()
                    continue
                check.observe_all(1.0 / (k + 1) - aux.s[start:q + 1],
                                  lambda i, k=k, n=n, start=start, probe=probe: {
                                      "scenario": bundle.name, "probe": probe, "k": k,
                                      "n": n, "index": start + i},
                                  RATE_TOLERANCE)


def _orbit(g: CounterFn, n: int, count: int) -> List[int]:
    points = [n]
    for _ in range(count):
        points.append(Evaluator(WINDOW_STEP_BUDGET).value(g, points[-1]))
        if points[-1] == points[-2]:
            break
    return points


def _audit_monotone_segments(report: AuditReport, calculus: RateCalculus,
                             bundle: RunBundle) -> None:
    h, D = bundle.horizon, bundle.constants.D
    cauchy = report.check("monotone_segment_cauchy")
    steps = report.check("monotone_segment_steps")
    for probe in range(min(CONDITIONED_PROBES, len(bundle.probes))):
        s = bundle.aux(probe).s
        rising = s[1:] > s[:-1]
        nxt = _next_true(rising)
        for k in SEGMENT_KS:
            eps = 1.0 / (k + 1)
            count = 4 * D * D * (k + 1)
            for f in SEGMENT_FNS:
                for check, g in ((cauchy, f), (steps, Add(f, Const(1)))):
                    for n in (0, 10, 100):
                        last = _exact(calculus.phi1(k, n, g), h - 1)
                        if last is None or nxt[n] <= last:
                            check.skip()
                            continue
                        best = -np.inf
                        for start in _orbit(g, n, count):
                            end = Evaluator(WINDOW_STEP_BUDGET).value(f, start)
                            if end < start:
                                best = eps
                                break
                            if check is cauchy:
                                spread = float(np.ptp(s[start:end + 1]))
                            else:
                                spread = float(np.max(s[start:end + 1] - s[start + 1:end + 2]))
                            best = max(best, eps - spread)
                        check.observe(best, {"scenario": bundle.name, "probe": probe, "k": k,
                                             "f": f.to_expr(), "n": n}, RATE_TOLERANCE)


def _audit_almost_fixed_points(report: AuditReport, calculus: RateCalculus,
                               bundle: RunBundle, c: int) -> None:
    h, D = bundle.horizon, bundle.constants.D
    ell = calculus.ctx.ell
    fixed = bundle.fixed_residuals(Variant.EXACT)
    window = report.check("almost_fixed_points")
    segment = report.check("monotone_segment_fixed_points")
    for m in FIXED_POINT_MS:
        eps = 1.0 / (m + 1)
        fixed_bad = _next_true(fixed[:h] > eps)
        small = 1.0 / (12 * c * (m + 1) ** 2) - HYPOTHESIS_MARGIN
        threshold = _exact(calculus.evaluate(
            "ell", lambda ev, m=m: ev.value(ell, 96 * c * D * D * (m + 1) ** 2 - 1)), h - 1)
        r1 = 12 * c * (m + 1) ** 2 - 1
        segment_start = _exact(calculus.evaluate(
            "ell", lambda ev: ev.value(ell, (r1 + 1) * 8 * D * D - 1)), h - 1)
        for probe in range(min(CONDITIONED_PROBES, len(bundle.probes))):
            aux = bundle.aux(probe)
            s, P = aux.s, aux.P
            hypothesis_bad = _next_true((s[:h] - s[1:] > small) | (P[:h] > small))
            for f in WINDOW_FNS:
                where = {"scenario": bundle.name, "probe": probe, "m": m, "f": f.to_expr()}
                ends = _ends(f, h - 1)
                if threshold is None or threshold >= len(ends):
                    window.skip()
                else:
                    for n in range(threshold, len(ends)):
                        end = ends[n]
                        if end >= n and hypothesis_bad[n] <= end:
                            window.skip()
                            continue
                        window.tally(end < n or fixed_bad[n] > end, {**where, "n": n})

                g = Add(f, Const(1))
                if segment_start is None:
                    segment.skip()
                    continue
                last = _exact(calculus.phi1(r1, segment_start, g), h - 1)
                if last is None:
                    segment.skip()
                    continue
                increasing = (s[segment_start + 1:last + 2] > s[segment_start:last + 1]).any()
                perturbed = (P[segment_start:last + 1] > 1.0 / (r1 + 1) - HYPOTHESIS_MARGIN).any()
                if increasing or perturbed:
                    segment.skip()
                    continue
                reach = _exact(calculus.phi2(r1, segment_start, g), h - 1)
                witness = find_window_witness(fixed > eps, f, h - 1, start=segment_start)
                segment.tally(witness is not None and reach is not None and witness <= reach,
                              {**where, "n": segment_start})


def _audit_increasing_case(report: AuditReport, calculus: RateCalculus,
                           bundle: RunBundle) -> None:
    h = bundle.horizon
    check = report.check("increasing_case_smallness")
    for probe in range(min(CONDITIONED_PROBES, len(bundle.probes))):
        aux = bundle.aux(probe)
        s = aux.s
        fixed_gap = bundle.fixed_gap(aux.probe)
        rising = np.flatnonzero(s[:h] < s[1:])
        for k in (0, 1):
            eps = 1.0 / (k + 1)
            for m in FIXED_POINT_MS:
                start = _exact(calculus.r3(k, m), h - 1)
                variational = bundle.grid.variational_max(aux.probe, m)
                if (start is None or variational > 1.0 / (32 * (k + 1) ** 2) - HYPOTHESIS_MARGIN):
                    check.skip(len(WINDOW_FNS))
                    continue
                for f in WINDOW_FNS:
                    tried = 0
                    for n in rising[rising >= start]:
                        n = int(n)
                        end = window_end(f, n, h)
                        if end is None or tried >= INCREASING_CASE_LIMIT:
                            break
                        tried += 1
                        xi = calculus.xi(k, f, n)
                        if not xi.exact or fixed_gap > _reciprocal(xi.value) - HYPOTHESIS_MARGIN:
                            check.skip()
                            continue
                        check.observe(eps - float(np.max(s[n:end + 1], initial=-np.inf)),
                                      {"scenario": bundle.name, "probe": probe, "k": k,
                                       "m": m, "f": f.to_expr(), "n": n}, RATE_TOLERANCE)
                    if not tried:
                        check.skip()


def audit_lemmas(calculus: RateCalculus, bundle: RunBundle, c: int,
                 seed: int = 0, law_instances: int = LAW_INSTANCES) -> AuditReport:
    """Audit every run-level inequality of one scenario, plus the operator laws.

    Args:
        calculus: bound calculus of the scenario.
        bundle: the scenario's runs and probes.
        c: the constant of the step-size condition.
        seed: seed of the operator-law samples.
        law_instances: randomized instances for the operator laws.
    """
    report = AuditReport()
    _audit_coupling(report, calculus, bundle)
    _audit_descent(report, bundle, c)
    _audit_step_gaps(report, calculus, bundle)
    _audit_window_recursion_run(report, calculus, bundle)
    _audit_monotone_segments(report, calculus, bundle)
    _audit_almost_fixed_points(report, calculus, bundle, c)
    _audit_increasing_case(report, calculus, bundle)
    report = report.merge(audit_operator_laws(bundle.operator, np.random.default_rng(seed),
                                              law_instances, label=bundle.name))
    for check in report.failures():
        logger.warning("audit %s failed on %s: first counterexample %s", check.name,
                       bundle.name, check.counterexample)
    return report


# ----------------------------------------------------------------------------
# Operator laws
# ----------------------------------------------------------------------------

def audit_operator_laws(op: MonotoneOperator, rng: np.random.Generator,
                        instances: int = LAW_INSTANCES,
                        label: Optional[str] = None) -> AuditReport:
    """Resolvent and Hilbert-space identities on randomized instances."""
    report = AuditReport()
    name = label or op.kind.value
    firm = report.check("firm_nonexpansive")
    identity = report.check("resolvent_identity")
    comparison = report.check("resolvent_comparison")
    inequality = report.check("hilbert_inequality")
    expansion = report.check("hilbert_identity")
    fixed = report.check("zero_is_fixed")
    for i in range(instances):
        where = {"operator": name, "index": i}
        scale = 10.0 ** int(rng.integers(-1, 2))
        x = rng.normal(scale=scale, size=op.dim)
        y = rng.normal(scale=scale, size=op.dim)
        sigma = 10.0 ** rng.uniform(-2, 2)
        a, b = 10.0 ** rng.uniform(-2, 2, size=2)
        t, s = rng.uniform(0, 2, size=2)

        dj = resolvent(op, sigma, x) - resolvent(op, sigma, y)
        lhs, rhs = float(dj @ dj), float((x - y) @ dj)
        firm.observe(rhs - lhs, where, LAW_TOLERANCE * max(1.0, abs(lhs), abs(rhs)))

        ja = resolvent(op, a, x)
        shifted = (b / a) * x + (1 - b / a) * ja
        drift = float(np.linalg.norm(ja - resolvent(op, b, shifted)))
        identity.observe(-drift, where, LAW_TOLERANCE * (1.0 + float(np.linalg.norm(x))))

        small, large = min(a, b), max(a, b)
        near = float(np.linalg.norm(resolvent(op, small, x) - x))
        far = float(np.linalg.norm(resolvent(op, large, x) - x))
        comparison.observe(2 * far - near, where, LAW_TOLERANCE * max(1.0, near))

        lhs = float((x + y) @ (x + y))
        rhs = float(x @ x + 2 * y @ (x + y))
        inequality.observe(rhs - lhs, where, LAW_TOLERANCE * max(1.0, abs(lhs), abs(rhs)))

        combo = t * x + s * y
        lhs = float(combo @ combo)
        rhs = float(t * (t + s) * (x @ x) + s * (t + s) * (y @ y)
                    - s * t * ((x - y) @ (x - y)))
        expansion.observe(-abs(lhs - rhs), where, LAW_TOLERANCE * max(1.0, abs(lhs), abs(rhs)))

        fixed.observe(-float(np.linalg.norm(resolvent(op, sigma, op.zero) - op.zero)), where,
                      FIXED_POINT_TOLERANCE)
    return report


# ----------------------------------------------------------------------------
# Synthetic suites
# ----------------------------------------------------------------------------

def audit_tau(rng: np.random.Generator, count: int = 10_000, max_length: int = 30,
              max_value: int = 4) -> AuditReport:
    """Monotonicity and last-increase properties of tau on random integer sequences."""
    report = AuditReport()
    in_index = report.check("tau_monotone_in_index")
    in_start = report.check("tau_monotone_in_start")
    bounds = report.check("tau_range")
    last_increase = report.check("tau_last_increase")
    for case in range(count):
        length = int(rng.integers(2, max_length + 1))
        s = rng.integers(0, max_value + 1, size=length)
        table = tau_table(s)
        size = length - 1
        idx = np.arange(size)

        def where(cell, case=case):
            return {"sequence": case, "m": cell[0], "i": cell[-1]}

        in_index.tally_all(table[:, :-1] > table[:, 1:], where)
        extended = np.vstack([table, idx])
        in_start.tally_all(extended[:-1] > extended[1:], where)
        bounds.tally_all(table > idx[None, :], where)
        bounds.tally_all((table[idx, idx] != idx)[None, :],
                         lambda cell, case=case: {"sequence": case, "m": cell[1], "i": cell[1]})

        for m in np.flatnonzero(s[:-1] < s[1:]):
            row = table[m, m:]
            later = s[m:size]
            bad = (row < m) | (np.maximum(s[row], later) > s[row + 1])
            last_increase.tally_all(bad[None, :],
                                    lambda cell, case=case, m=int(m): {
                                        "sequence": case, "m": m, "i": m + cell[1]})
    return report


_SYNTHETIC_CONTEXT = BoundContext(c=1, D=1, d=1, h=Const(1), ell=ID, L=CeilExp(3), E=ID,
                                  Cfun=Const(1))


def _next_value(rng: np.random.Generator, bound: float, cap: float) -> float:
    # tight half of the time, otherwise anywhere in [0, bound]
    value = min(cap, bound)
    return value if rng.random() < 0.5 else value * rng.random()


def audit_window_recursion(rng: np.random.Generator, count: int = 500) -> AuditReport:
    """Sequences built to satisfy s_{i+1} <= (1-l_i)(s_i+v_i) + l_i r_i with small v, r on [n, q]."""
    report = AuditReport()
    check = report.check("synthetic_window_recursion")
    calculus = RateCalculus(_SYNTHETIC_CONTEXT)
    for case in range(count):
        k, n = int(rng.integers(0, 3)), int(rng.integers(0, 3))
        M = int(rng.choice((1, 2, 4)))
        start = calculus.sigma(k, n, M).value
        q = start + int(rng.integers(0, 50))
        v_cap, r_cap = 1.0 / (3 * (k + 1) * (q + 1)), 1.0 / (3 * (k + 1))
        s = [float(rng.uniform(0, M))]
        for i in range(q):
            lam = 1.0 / (i + 2)
            if i >= n:
                v, r = rng.uniform(0, v_cap), rng.uniform(0, r_cap)
            else:
                v, r = rng.uniform(0, M), rng.uniform(0, M)
            s.append(_next_value(rng, (1 - lam) * (s[i] + v) + lam * r, M))
        values = np.array(s)
        check.observe_all(1.0 / (k + 1) - values[start:q + 1],
                          lambda i, case=case, start=start: {"sequence": case, "index": start + i},
                          SYNTHETIC_TOLERANCE)
    return report


def perturbed_recursion_sequence(rng: np.random.Generator, d: int, length: int) -> np.ndarray:
    """s_0 in [0, d] and s_{i+1} <= (1-a_i)s_i + a_i r_i + g_i for i < length.

    a_i = 1/(i+2) diverges with rate CeilExp(3), r_i <= 1/(i+1) tends to 0
    with rate id and g_i <= 2^-i sums with rate CeilLog2.
    """
    s = [float(rng.uniform(0, d))]
    for i in range(length):
        alpha = 1.0 / (i + 2)
        r = rng.random() / (i + 1)
        g = rng.random() * 2.0 ** -i
        s.append(_next_value(rng, (1 - alpha) * s[i] + alpha * r + g, d))
    return np.array(s)


def audit_perturbed_recursion(rng: np.random.Generator, count: int = 500,
                              horizon: int = SYNTHETIC_HORIZON) -> AuditReport:
    """Perturbed recursions checked on [theta(k), theta(k) + horizon]."""
    report = AuditReport()
    check = report.check("synthetic_perturbed_recursion")
    calculus = RateCalculus(_SYNTHETIC_CONTEXT)
    A, R, G = CeilExp(3), ID, CeilLog2()
    for case in range(count):
        k, d = int(rng.integers(0, 2)), int(rng.integers(1, 3))
        start = calculus.theta_llpp(A, R, G, d, k).value
        values = perturbed_recursion_sequence(rng, d, start + horizon)
        check.observe_all(1.0 / (k + 1) - values[start:],
                          lambda i, case=case, start=start: {"sequence": case, "index": start + i},
                          SYNTHETIC_TOLERANCE)
    return report


def audit_synthetic(seed: int = 0, tau_count: int = 10_000,
                    recursion_count: int = 500) -> AuditReport:
    """All scenario-independent suites under one seed."""
    rng = np.random.default_rng(seed)
    report = audit_tau(rng, tau_count)
    report = report.merge(audit_window_recursion(rng, recursion_count))
    return report.merge(audit_perturbed_recursion(rng, recursion_count))
