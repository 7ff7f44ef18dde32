"""Trajectories of the anchored multi-parameter proximal iteration.

``z_{n+1} = lambda_n u + gamma_n z_n + delta_n J_{c_n}(z_n) + e_n``

The exact variant drops ``e_n``; the Halpern-type special case is simply a
schedule with ``gamma_n = 0``. Both variants start from the same point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from ppa.errors import DimensionMismatchError, IllPosedConfigError, InvalidParameterError
from ppa.schedules import Schedule
from ppa.space_ops import MonotoneOperator, as_point, project_ball, resolvent, sample_ball
from utils.types_enum import Variant

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """An immutable run of the iteration.

    Attributes:
        variant: exact or inexact.
        points: array of shape (horizon + 1, dim), row n is x_n.
        resolvents: row n is J_{c_n}(x_n).
        residuals: ||J_{c_n}(x_n) - x_n||.
        anchor: the anchor u.
        schedule, operator: what produced the run.
        horizon: index of the last point.
        tables: float tables of the schedule sequences used by the run.
    """

    variant: Variant
    points: np.ndarray
    resolvents: np.ndarray
    residuals: np.ndarray
    anchor: np.ndarray
    schedule: Schedule
    operator: MonotoneOperator
    horizon: int
    tables: Dict[str, np.ndarray]

    def fixed_residuals(self, sigma: float) -> np.ndarray:
        """||J_sigma(x_n) - x_n|| for a single resolvent parameter."""
        return np.array([
            np.linalg.norm(resolvent(self.operator, sigma, x) - x) for x in self.points
        ])

    def increments(self) -> np.ndarray:
        """||x_{n+1} - x_n|| for n < horizon."""
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    def csv_rows(self) -> Iterator[List]:
        """Header then one row per index: n, coordinates, residual."""
        yield ["n"] + [f"x{i}" for i in range(self.points.shape[1])] + ["residual"]
        for n, (point, residual) in enumerate(zip(self.points, self.residuals)):
            yield [n] + [repr(float(x)) for x in point] + [repr(float(residual))]


@dataclass(frozen=True, eq=False)
class AuxSeries:
    """Auxiliary series of an exact run for a probe z.

    Attributes:
        probe: the point z.
        s: ||y_n - z||^2.
        P: 2||J_n z - z|| (3||y_n - z|| + ||J_n z - z||).
        inner: <u - z, y_{n+1} - z>, one entry shorter than s.
        resolvent_gap: ||J_{c_n}(z) - z||.
    """

    probe: np.ndarray
    s: np.ndarray
    P: np.ndarray
    inner: np.ndarray
    resolvent_gap: np.ndarray

    def csv_rows(self) -> Iterator[List]:
        yield ["n", "s", "P", "inner"]
        for n in range(self.s.size):
            inner = repr(float(self.inner[n])) if n < self.inner.size else ""
            yield [n, repr(float(self.s[n])), repr(float(self.P[n])), inner]


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def run(variant: Variant, op: MonotoneOperator, u: np.ndarray, z0: np.ndarray,
        schedule: Schedule, horizon: int,
        tables: Optional[Dict[str, np.ndarray]] = None) -> Trajectory:
    """Generate x_0 .. x_horizon of the chosen variant.

    Args:
        tables: precomputed ``schedule.tabulate(horizon)``; computed when omitted.

    Raises:
        InvalidParameterError: horizon < 1.
        DimensionMismatchError: u, z0, operator and error direction disagree.
        IllPosedConfigError: an iterate stops being finite.
    """
    if horizon < 1:
        raise InvalidParameterError("horizon must be at least 1")
    u = as_point(u, op.dim)
    x = as_point(z0, op.dim)
    if schedule.dim != op.dim:
        raise DimensionMismatchError(op.dim, schedule.dim)
    tables = tables or schedule.tabulate(horizon)
    lam, gamma, delta = tables["lam"], tables["gamma"], tables["delta"]
    step, error_norm = tables["step"], tables["error_norm"]
    with_errors = variant is Variant.INEXACT and bool(np.any(error_norm[:horizon]))

    points = np.empty((horizon + 1, op.dim))
    resolvents = np.empty_like(points)
    points[0] = x
    for n in range(horizon):
        jx = resolvent(op, step[n], x)
        resolvents[n] = jx
        x = lam[n] * u + gamma[n] * x + delta[n] * jx
        if with_errors and error_norm[n]:
            x = x + error_norm[n] * schedule.direction
        if not np.all(np.isfinite(x)):
            raise IllPosedConfigError(f"non-finite iterate at n = {n + 1}")
        points[n + 1] = x
    resolvents[horizon] = resolvent(op, step[horizon], x)
    residuals = np.linalg.norm(resolvents - points, axis=1)

    logger.debug("%s run of %s finished: horizon %d, last residual %.3g",
                 variant.value, schedule.name, horizon, residuals[-1])
    return Trajectory(variant, _freeze(points), _freeze(resolvents), _freeze(residuals),
                      _freeze(u.copy()), schedule, op, horizon, tables)


def aux_series(trajectory: Trajectory, z: np.ndarray) -> AuxSeries:
    """Series s, P and the inner products along an exact run for probe z."""
    z = as_point(z, trajectory.operator.dim)
    gaps = np.empty(trajectory.horizon + 1)
    cache: Dict[float, float] = {}
    steps = trajectory.tables["step"]
    for n in range(trajectory.horizon + 1):
        sigma = float(steps[n])
        if sigma not in cache:
            cache[sigma] = float(np.linalg.norm(resolvent(trajectory.operator, sigma, z) - z))
        gaps[n] = cache[sigma]
    offsets = trajectory.points - z
    distances = np.linalg.norm(offsets, axis=1)
    s = distances ** 2
    P = 2 * gaps * (3 * distances + gaps)
    inner = offsets[1:] @ (trajectory.anchor - z)
    return AuxSeries(_freeze(z.copy()), _freeze(s), _freeze(P), _freeze(inner), _freeze(gaps))


def coupling_gap(inexact: Trajectory, exact: Trajectory) -> np.ndarray:
    """||z_n - y_n|| for an inexact run and its exact companion.

    Raises:
        InvalidParameterError: the runs do not share operator, anchor,
            schedule, horizon and starting point.
    """
    if (inexact.operator is not exact.operator or inexact.schedule is not exact.schedule
            or inexact.horizon != exact.horizon
            or not np.array_equal(inexact.anchor, exact.anchor)
            or not np.array_equal(inexact.points[0], exact.points[0])):
        raise InvalidParameterError("trajectories do not come from the same configuration")
    return np.linalg.norm(inexact.points - exact.points, axis=1)


def generate_probes(zero: np.ndarray, radius: float, count: int, seed: int,
                    extra: Sequence[np.ndarray] = ()) -> List[np.ndarray]:
    """Probe points of B(zero, radius).

    The zero itself comes first, then each extra point projected onto the
    ball, then count seeded random points (uniform direction, radius uniform
    in [0, radius]).
    """
    probes = [zero.copy()]
    probes.extend(project_ball(point, zero, radius) for point in extra)
    rng = np.random.default_rng(seed)
    probes.extend(sample_ball(rng, zero, radius, count))
    return probes
