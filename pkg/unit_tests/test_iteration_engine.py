"""Unit tests for trajectories, auxiliary series, coupling gaps and probes."""

import unittest

import numpy as np

from ppa.errors import DimensionMismatchError, InvalidParameterError
from ppa.iteration_engine import aux_series, coupling_gap, generate_probes, run
from ppa.schedules import builtin_schedule
from ppa.space_ops import AbsValueSubdiff, LinearPSDOperator, ScaledIdentity
from utils.types_enum import Variant


class TestRun(unittest.TestCase):
    """Test suite for the iteration itself."""

    @classmethod
    def setUpClass(cls):
        """Exact and inexact runs of S1 and S2 for A = I, u = 0, z0 = 4."""
        cls.op = ScaledIdentity(1, 1.0)
        cls.u = np.zeros(1)
        cls.z0 = np.array([4.0])
        cls.s1 = builtin_schedule("S1", 1)
        cls.s2 = builtin_schedule("S2", 1)
        cls.y = run(Variant.EXACT, cls.op, cls.u, cls.z0, cls.s1, 200)
        cls.y2 = run(Variant.EXACT, cls.op, cls.u, cls.z0, cls.s2, 200)
        cls.z2 = run(Variant.INEXACT, cls.op, cls.u, cls.z0, cls.s2, 200)

    def test_first_iterates(self):
        """Test y1 = 1.5, y2 = 0.75, y3 = 0.421875."""
        np.testing.assert_allclose(self.y.points[:4, 0], [4.0, 1.5, 0.75, 0.421875])
        self.assertEqual(self.y.points.shape, (201, 1))

    def test_resolvents_and_residuals(self):
        """Test J(x) = x/2 and the residual ||J(x) - x|| = |x|/2."""
        np.testing.assert_allclose(self.y.resolvents[:, 0], self.y.points[:, 0] / 2)
        np.testing.assert_allclose(self.y.residuals, np.abs(self.y.points[:, 0]) / 2)
        np.testing.assert_allclose(self.y.fixed_residuals(1 / 16)[0], 4.0 - 4.0 / (1 + 1 / 16))

    def test_runs_are_immutable(self):
        """Test that trajectory arrays are read-only."""
        with self.assertRaises(ValueError):
            self.y.points[0, 0] = 1.0

    def test_exact_variant_ignores_errors(self):
        """Test that S2 without errors equals S1 and that errors move z."""
        np.testing.assert_array_equal(self.y2.points, self.y.points)
        self.assertEqual(self.z2.points[1, 0], self.y2.points[1, 0] + 1.0)

    def test_coupling_gap(self):
        """Test ||z_n - y_n||, its start at 0 and its decay."""
        gaps = coupling_gap(self.z2, self.y2)
        self.assertEqual(gaps[0], 0.0)
        self.assertAlmostEqual(gaps[1], 1.0)
        self.assertLess(gaps[-1], 0.1)
        other = run(Variant.EXACT, self.op, np.ones(1), self.z0, self.s2, 200)
        with self.assertRaises(InvalidParameterError):
            coupling_gap(self.z2, other)

    def test_halpern_reduction(self):
        """Test that gamma = 0 gives y_{n+1} = lambda_n u + (1 - lambda_n) J(y_n)."""
        s3 = builtin_schedule("S3", 1)
        y = run(Variant.EXACT, self.op, np.array([1.0]), self.z0, s3, 3)
        self.assertAlmostEqual(y.points[1, 0], 0.5 * 1.0 + 0.5 * 2.0)

    def test_convergence_to_projection(self):
        """Test that the iterates approach the zero nearest to the anchor."""
        op = AbsValueSubdiff(1)
        y = run(Variant.EXACT, op, np.array([0.5]), np.array([3.0]), self.s1, 5000)
        self.assertLess(abs(y.points[-1, 0]), 0.05)

    def test_validation(self):
        """Test horizon, dimension and coordinate checks."""
        with self.assertRaises(InvalidParameterError):
            run(Variant.EXACT, self.op, self.u, self.z0, self.s1, 0)
        with self.assertRaises(DimensionMismatchError):
            run(Variant.EXACT, ScaledIdentity(2), np.zeros(2), np.zeros(2), self.s1, 5)
        with self.assertRaises(DimensionMismatchError):
            run(Variant.EXACT, self.op, np.zeros(2), self.z0, self.s1, 5)
        with self.assertRaises(InvalidParameterError):
            run(Variant.EXACT, self.op, self.u, np.array([np.nan]), self.s1, 5)

    def test_csv_rows(self):
        """Test the CSV layout of a trajectory."""
        rows = list(self.y.csv_rows())
        self.assertEqual(rows[0], ["n", "x0", "residual"])
        self.assertEqual(rows[2], [1, "1.5", "0.75"])
        self.assertEqual(len(rows), 202)


class TestAuxSeries(unittest.TestCase):
    """Test suite for the auxiliary series of an exact run."""

    @classmethod
    def setUpClass(cls):
        """An exact S1 run with a non-trivial linear operator."""
        op = LinearPSDOperator([[2.0, 0.0], [0.0, 0.5]])
        cls.u = np.array([1.0, -1.0])
        cls.y = run(Variant.EXACT, op, cls.u, np.array([3.0, 2.0]), builtin_schedule("S1", 2), 100)

    def test_series_at_the_zero(self):
        """Test s = ||y||^2, P = 0 and the inner products at the zero."""
        series = aux_series(self.y, np.zeros(2))
        np.testing.assert_allclose(series.s, np.sum(self.y.points ** 2, axis=1))
        np.testing.assert_array_equal(series.P, 0.0)
        np.testing.assert_allclose(series.inner, self.y.points[1:] @ self.u)
        self.assertEqual(series.inner.size, series.s.size - 1)

    def test_series_away_from_the_zero(self):
        """Test P at a probe that is not a zero."""
        z = np.array([1.0, 1.0])
        series = aux_series(self.y, z)
        gap = np.linalg.norm(self.y.operator.resolvent(1.0, z) - z)
        distance = np.linalg.norm(self.y.points[7] - z)
        self.assertAlmostEqual(series.P[7], 2 * gap * (3 * distance + gap))
        self.assertEqual(list(series.csv_rows())[0], ["n", "s", "P", "inner"])


class TestProbes(unittest.TestCase):
    """Test suite for probe generation."""

    def test_probe_layout(self):
        """Test zero first, then projected extras, then seeded samples."""
        zero = np.zeros(2)
        probes = generate_probes(zero, 4.0, 5, seed=1, extra=(np.array([10.0, 0.0]),))
        self.assertEqual(len(probes), 7)
        np.testing.assert_array_equal(probes[0], zero)
        np.testing.assert_allclose(probes[1], [4.0, 0.0])
        self.assertTrue(all(np.linalg.norm(p) <= 4.0 + 1e-12 for p in probes))
        again = generate_probes(zero, 4.0, 5, seed=1, extra=(np.array([10.0, 0.0]),))
        for first, second in zip(probes, again):
            np.testing.assert_array_equal(first, second)


if __name__ == "__main__":
    unittest.main()
