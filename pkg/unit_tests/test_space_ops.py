"""Unit tests for the Hilbert-space primitives and the operator catalog.

Closed-form resolvents are compared against hand-computed values, the
catalog builder is checked for its error paths, and every catalog operator
is run through the randomized resolvent laws.
"""

import unittest

import numpy as np

from ppa.errors import DimensionMismatchError, InvalidParameterError, UnknownCatalogNameError
from ppa.space_ops import (
    AbsValueSubdiff,
    BallIndicator,
    BoxIndicator,
    LinearPSDOperator,
    ScaledIdentity,
    ZeroOperator,
    as_point,
    build_operator,
    distance,
    inner,
    norm,
    project_ball,
    resolvent,
    sample_ball,
)
from ppa.verifier import audit_operator_laws
from utils.types_enum import OperatorKind


class TestPrimitives(unittest.TestCase):
    """Test suite for points, norms and inner products."""

    def test_as_point(self):
        """Test scalar promotion and validation of points."""
        np.testing.assert_array_equal(as_point(2.5), np.array([2.5]))
        np.testing.assert_array_equal(as_point([1, 2], 2), np.array([1.0, 2.0]))
        with self.assertRaises(InvalidParameterError):
            as_point([])
        with self.assertRaises(InvalidParameterError):
            as_point([1.0, float("nan")])
        with self.assertRaises(InvalidParameterError):
            as_point([[1.0, 2.0]])
        with self.assertRaises(DimensionMismatchError):
            as_point([1.0, 2.0], 3)

    def test_inner_norm_distance(self):
        """Test the Euclidean structure."""
        x, y = as_point([3.0, 4.0]), as_point([0.0, 1.0])
        self.assertEqual(norm(x), 5.0)
        self.assertEqual(inner(x, y), 4.0)
        self.assertAlmostEqual(distance(x, y), np.sqrt(18.0))
        with self.assertRaises(DimensionMismatchError):
            inner(x, as_point([1.0]))

    def test_project_and_sample_ball(self):
        """Test projection onto a ball and seeded sampling inside it."""
        center = np.zeros(2)
        np.testing.assert_allclose(project_ball(np.array([6.0, 8.0]), center, 5.0), [3.0, 4.0])
        np.testing.assert_array_equal(project_ball(np.array([1.0, 1.0]), center, 5.0), [1.0, 1.0])
        points = sample_ball(np.random.default_rng(3), center, 2.0, 200)
        self.assertEqual(points.shape, (200, 2))
        self.assertTrue(np.all(np.linalg.norm(points, axis=1) <= 2.0 + 1e-12))
        again = sample_ball(np.random.default_rng(3), center, 2.0, 200)
        np.testing.assert_array_equal(points, again)


class TestResolvents(unittest.TestCase):
    """Test suite for closed-form resolvents."""

    def test_zero_operator(self):
        """Test that the resolvent of A = 0 is the identity."""
        op = ZeroOperator(2)
        x = as_point([1.5, -2.0])
        np.testing.assert_array_equal(resolvent(op, 3.0, x), x)

    def test_scaled_identity(self):
        """Test J_sigma(x) = x / (1 + sigma*a)."""
        op = ScaledIdentity(1, 1.0)
        np.testing.assert_allclose(op.resolvent(1.0, as_point(3.0)), [1.5])
        op = ScaledIdentity(2, 4.0)
        np.testing.assert_allclose(op.resolvent(0.5, as_point([3.0, 6.0])), [1.0, 2.0])

    def test_soft_thresholding(self):
        """Test the resolvent of the subdifferential of |x|."""
        op = AbsValueSubdiff(3)
        x = as_point([2.0, -0.5, -3.0])
        np.testing.assert_allclose(op.resolvent(1.0, x), [1.0, 0.0, -2.0])

    def test_box_and_ball(self):
        """Test projections of the indicator operators."""
        box = BoxIndicator([-1.0, 0.0], [1.0, 2.0])
        np.testing.assert_array_equal(box.resolvent(7.0, as_point([3.0, -1.0])), [1.0, 0.0])
        np.testing.assert_array_equal(box.zero, [0.0, 0.0])
        ball = BallIndicator([1.0, 1.0], 1.0)
        np.testing.assert_allclose(ball.resolvent(0.1, as_point([1.0, 3.0])), [1.0, 2.0])
        np.testing.assert_array_equal(ball.zero, [1.0, 1.0])

    def test_linear_psd(self):
        """Test the Cholesky resolvent against a dense solve."""
        matrix = [[2.0, 1.0], [1.0, 2.0]]
        op = LinearPSDOperator(matrix)
        x = as_point([1.0, -4.0])
        expected = np.linalg.solve(np.eye(2) + 0.7 * np.array(matrix), x)
        np.testing.assert_allclose(op.resolvent(0.7, x), expected)
        # cached factor gives the same answer
        np.testing.assert_allclose(op.resolvent(0.7, x), expected)

    def test_linear_psd_rejects_bad_matrices(self):
        """Test symmetry and semidefiniteness checks."""
        with self.assertRaises(InvalidParameterError):
            LinearPSDOperator([[1.0, 2.0], [0.0, 1.0]])
        with self.assertRaises(InvalidParameterError):
            LinearPSDOperator([[-1.0, 0.0], [0.0, 1.0]])
        with self.assertRaises(InvalidParameterError):
            LinearPSDOperator([[1.0, 0.0]])

    def test_resolvent_validation(self):
        """Test sigma and dimension checks."""
        op = ScaledIdentity(2)
        with self.assertRaises(InvalidParameterError):
            resolvent(op, 0.0, as_point([1.0, 1.0]))
        with self.assertRaises(InvalidParameterError):
            resolvent(op, float("inf"), as_point([1.0, 1.0]))
        with self.assertRaises(DimensionMismatchError):
            resolvent(op, 1.0, as_point([1.0]))


class TestCatalog(unittest.TestCase):
    """Test suite for building operators from config descriptions."""

    def test_build_every_kind(self):
        """Test that every catalog kind can be built and described."""
        specs = [
            {"kind": "zero"},
            {"kind": "linear_psd", "matrix": [[1.0, 0.0], [0.0, 3.0]]},
            {"kind": "abs_value_subdiff"},
            {"kind": "box_indicator", "lower": [0.0, 0.0], "upper": [1.0, 1.0]},
            {"kind": "ball_indicator", "center": [0.0, 0.0], "radius": 2.0},
            {"kind": "scaled_identity", "a": 2.0},
        ]
        for spec in specs:
            op = build_operator(spec, 2)
            self.assertEqual(op.kind, OperatorKind(spec["kind"]))
            self.assertEqual(op.dim, 2)
            self.assertEqual(op.describe()["kind"], spec["kind"])

    def test_unknown_kind(self):
        """Test that an unknown kind names the catalog."""
        with self.assertRaises(UnknownCatalogNameError) as ctx:
            build_operator({"kind": "nope"}, 1)
        self.assertEqual(ctx.exception.catalog, "operator")

    def test_dimension_mismatch(self):
        """Test that parameters in the wrong dimension are refused."""
        with self.assertRaises(DimensionMismatchError):
            build_operator({"kind": "ball_indicator", "center": [0.0], "radius": 1.0}, 2)

    def test_infeasible_designated_point(self):
        """Test that a designated zero outside the set is refused."""
        with self.assertRaises(InvalidParameterError):
            BoxIndicator([0.0], [1.0], feasible=[2.0])
        with self.assertRaises(InvalidParameterError):
            BallIndicator([0.0], 1.0, feasible=[1.5])


class TestOperatorLaws(unittest.TestCase):
    """Test suite for the randomized resolvent laws on every catalog operator."""

    @classmethod
    def setUpClass(cls):
        """Build one operator of each kind in dimension 3."""
        cls.operators = [
            ZeroOperator(3),
            LinearPSDOperator([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 0.0]]),
            AbsValueSubdiff(3),
            BoxIndicator([-1.0, -1.0, 0.0], [1.0, 2.0, 0.5]),
            BallIndicator([0.5, 0.0, 0.0], 1.5, feasible=[0.0, 0.0, 0.0]),
            ScaledIdentity(3, 2.5),
        ]

    def test_laws_hold(self):
        """Test that every law holds on 300 instances per operator."""
        for op in self.operators:
            report = audit_operator_laws(op, np.random.default_rng(11), instances=300)
            self.assertTrue(report.passed, report.to_dict())
            self.assertEqual(report.check("firm_nonexpansive").checked, 300)

    def test_audit_is_reproducible(self):
        """Test that the same seed gives the same report."""
        op = self.operators[1]
        first = audit_operator_laws(op, np.random.default_rng(5), instances=50).to_dict()
        second = audit_operator_laws(op, np.random.default_rng(5), instances=50).to_dict()
        self.assertEqual(first, second)


if __name__ == "__main__":
    unittest.main()
