"""Unit tests for the bound functionals.

Hand-derived values pin the simple functionals; a naive reference evaluator
(``reference_bounds``) checks every composite functional on the trivial
context for small parameters; sampled checks cover monotonicity and the
budgeted behaviour of the astronomically large bounds.
"""

import dataclasses
import unittest

from ppa.counterfn import ID, Const, Evaluator, RawTable, Table, affine
from ppa.errors import InvalidParameterError
from ppa.rate_calculus import BoundContext, BoundValue, RateCalculus, theta_llpp
from ppa.schedules import ScenarioConstants, builtin_schedule
from unit_tests import reference_bounds as ref

SUCC = affine(1, 1)


def _identity(n):
    return n


class TestGoldenValues(unittest.TestCase):
    """Test suite for hand-derived values of the simple functionals."""

    @classmethod
    def setUpClass(cls):
        """The trivial context: c = 1, Cfun = 1, D = d = 1, L = ell = E = id, h = 1."""
        cls.trivial = BoundContext.trivial()
        cls.calc = RateCalculus(cls.trivial)

    def test_zeta(self):
        """Test zeta(3, 4) = 39 for c = 2, Cfun(n) = n + 1, and its collapse when c = 1."""
        calc = RateCalculus(dataclasses.replace(self.trivial, c=2, Cfun=SUCC))
        self.assertEqual(calc.zeta(3, 4).value, 39)
        self.assertEqual(self.calc.zeta(7, 100).value, 7)
        calc = RateCalculus(dataclasses.replace(self.trivial, c=16))
        self.assertEqual(calc.zeta(0, 99).value, 15)

    def test_zeta_reads_zero_cfun_as_one(self):
        """Test that Cfun = 0 gives the same value as Cfun = 1."""
        calc = RateCalculus(dataclasses.replace(self.trivial, c=16, Cfun=Const(0)))
        self.assertEqual(calc.zeta(0, 5).value, 15)
        calc = RateCalculus(dataclasses.replace(self.trivial, Cfun=Const(0)))
        self.assertEqual(calc.zeta(0, 0).value, 0)

    def test_sigma_bar(self):
        """Test sigma_bar(0, 0) = 8 for L(n) = 2n + 1 and the identity with sigma."""
        calc = RateCalculus(dataclasses.replace(self.trivial, L=affine(2, 1)))
        self.assertEqual(calc.sigma_bar(0, 0).value, 8)
        for k in range(4):
            for n in range(6):
                self.assertEqual(calc.sigma_bar(k, n), calc.sigma(k, n, 4))
                self.assertGreaterEqual(self.calc.sigma_bar(k, n).value, n + 1)
        with self.assertRaises(InvalidParameterError):
            calc.sigma(0, 0, 0)

    def test_phi(self):
        """Test phi2(0, 2, n+1) = 6, phi1 = 7, phi2(0, 1, 2n) = 16 and phi2 with id."""
        self.assertEqual(self.calc.phi2(0, 2, SUCC).value, 6)
        self.assertEqual(self.calc.phi1(0, 2, SUCC).value, 7)
        self.assertEqual(self.calc.phi2(0, 1, affine(2, 0)).value, 16)
        self.assertEqual(self.calc.phi2(5, 9, ID).value, 9)

    def test_r_terms(self):
        """Test r1(0) = 11, r2(0) = 128, r3(0) = 262144 and f_tilde(n) = n + 4."""
        self.assertEqual(self.calc.r1(0).value, 11)
        self.assertEqual(self.calc.r2(0, 0).value, 128)
        self.assertEqual(self.calc.r3(0, 0).value, 262144)
        for n in range(5):
            self.assertEqual(self.calc.f_tilde(0, ID, n).value, n + 4)

    def test_w_orbit(self):
        """Test w(0) = 24, w^2(0) = 15000 and w^3(0) = 5400720024 for f = id."""
        self.assertEqual(self.calc.w_orbit(ID, 1).value, 24)
        self.assertEqual(self.calc.w_orbit(ID, 2).value, 15000)
        self.assertEqual(self.calc.w_orbit(ID, 3).value, 5400720024)

    def test_theta(self):
        """Test Theta(0) = 5, Theta(1) = 8 and the perturbed-recursion rate."""
        self.assertEqual(self.calc.Theta(0).value, 5)
        self.assertEqual(self.calc.Theta(1).value, 8)
        self.assertEqual(self.calc.theta_llpp(ID, ID, ID, 1, 0).value, 5)
        for k in range(5):
            self.assertEqual(self.calc.theta_llpp(Const(0), ID, ID, 3, k).value, 1)
        with self.assertRaises(InvalidParameterError):
            theta_llpp(Evaluator(), ID, ID, ID, 0, 0)

    def test_xi1_collapses(self):
        """Test Xi1 = 2(6D+1) max{r1, r4} - 1 when c = 1 and Cfun = 1."""
        for n in range(3):
            r = max(self.calc.r1(n).value, self.calc.r4(0, ID, n).value)
            self.assertEqual(self.calc.Xi1(0, ID, n).value, 14 * r - 1)

    def test_scenario_context(self):
        """Test Theta(0) = 3291 for the S2 catalog moduli with d = 11."""
        moduli = builtin_schedule("S2", 1).moduli
        ctx = BoundContext.from_scenario(moduli, ScenarioConstants(4, 4, 3, 1))
        self.assertEqual(ctx.d, 11)
        self.assertEqual(ctx.M, 64)
        self.assertEqual(RateCalculus(ctx).Theta(0).value, 3291)

    def test_context_validation(self):
        """Test that non-positive constants are refused."""
        with self.assertRaises(InvalidParameterError):
            dataclasses.replace(self.trivial, D=0)
        with self.assertRaises(InvalidParameterError):
            dataclasses.replace(self.trivial, c=True)


class TestReferenceEquivalence(unittest.TestCase):
    """Test suite comparing every composite functional with the naive evaluator."""

    @classmethod
    def setUpClass(cls):
        """Production calculus and naive reference for the trivial context."""
        cls.calc = RateCalculus(BoundContext.trivial())
        cls.ref = ref.Reference(c=1, D=1, d=1, h=lambda n: 1, ell=_identity, L=_identity,
                                E=_identity, Cfun=lambda n: 1)
        cls.functions = [(ID, _identity), (SUCC, lambda n: n + 1)]

    def assertExact(self, bound: BoundValue, expected: int):
        """The bound is exact and equals expected."""
        self.assertTrue(bound.exact, bound.exhausted_in)
        self.assertEqual(bound.value, expected)

    def test_simple_terms(self):
        """Test zeta, sigma_bar, r1, r2, r3 and Theta."""
        for k in range(3):
            self.assertExact(self.calc.Theta(k), self.ref.Theta(k))
            for n in range(6):
                self.assertExact(self.calc.zeta(k, n), self.ref.zeta(k, n))
                self.assertExact(self.calc.sigma_bar(k, n), self.ref.sigma_bar(k, n))
                self.assertExact(self.calc.r1(n), self.ref.r1(n))
                self.assertExact(self.calc.r2(k, n), self.ref.r2(k, n))
                self.assertExact(self.calc.r3(k, n), self.ref.r3(k, n))

    def test_phi_terms(self):
        """Test phi1 and phi2."""
        for fn, plain in self.functions + [(affine(2, 0), lambda n: 2 * n)]:
            for k in range(3):
                for n in range(4):
                    self.assertExact(self.calc.phi2(k, n, fn), self.ref.phi2(k, n, plain))
                    self.assertExact(self.calc.phi1(k, n, fn), self.ref.phi1(k, n, plain))

    def test_composite_terms(self):
        """Test r4, Phi, Xi1, xi, Xi2 and Xi."""
        for fn, plain in self.functions:
            for k in range(3):
                for n in range(3):
                    self.assertExact(self.calc.r4(k, fn, n), self.ref.r4(k, plain, n))
                    self.assertExact(self.calc.Phi(k, fn, n), self.ref.Phi(k, plain, n))
                    self.assertExact(self.calc.Xi1(k, fn, n), self.ref.Xi1(k, plain, n))
                    self.assertExact(self.calc.xi(k, fn, n), self.ref.xi(k, plain, n))
                    self.assertExact(self.calc.Xi2(k, fn, n), self.ref.Xi2(k, plain, n))
                    self.assertExact(self.calc.Xi(k, fn, n), self.ref.Xi(k, plain, n))

    def test_beta(self):
        """Test beta(0, f), whose orbit has four steps."""
        for fn, plain in self.functions + [(Const(0), lambda n: 0)]:
            self.assertExact(self.calc.beta(0, fn), self.ref.beta(0, plain))

    def test_theta_llpp(self):
        """Test the perturbed-recursion rate on small inputs."""
        for d in (1, 4):
            for k in range(3):
                self.assertExact(self.calc.theta_llpp(SUCC, affine(2, 0), ID, d, k),
                                 ref.theta_llpp(lambda n: n + 1, lambda n: 2 * n,
                                                lambda n: n, d, k))

    def test_recomputation_is_identical(self):
        """Test that a second evaluation gives the same integer and trace."""
        first, second = self.calc.Xi(1, SUCC, 2), self.calc.Xi(1, SUCC, 2)
        self.assertEqual(first, second)
        self.assertEqual(first.trace, second.trace)


class TestMonotonicity(unittest.TestCase):
    """Test suite for sampled monotonicity in k, n and f."""

    @classmethod
    def setUpClass(cls):
        """A context with non-trivial moduli."""
        ctx = dataclasses.replace(BoundContext.trivial(), c=2, D=2, Cfun=SUCC, L=affine(2, 1))
        cls.calc = RateCalculus(ctx)

    def test_in_k_and_n(self):
        """Test zeta, sigma_bar, r1..r4, Phi, Xi and Theta for k <= k' and n <= n'."""
        for k in range(2):
            for n in range(2):
                for k2, n2 in ((k + 1, n), (k, n + 1)):
                    pairs = [
                        (self.calc.zeta(k, n), self.calc.zeta(k2, n2)),
                        (self.calc.sigma_bar(k, n), self.calc.sigma_bar(k2, n2)),
                        (self.calc.r1(n), self.calc.r1(n2)),
                        (self.calc.r2(k, n), self.calc.r2(k2, n2)),
                        (self.calc.r3(k, n), self.calc.r3(k2, n2)),
                        (self.calc.r4(k, ID, n), self.calc.r4(k2, ID, n2)),
                        (self.calc.Phi(k, ID, n), self.calc.Phi(k2, ID, n2)),
                        (self.calc.Xi(k, ID, n), self.calc.Xi(k2, ID, n2)),
                        (self.calc.Theta(k), self.calc.Theta(k2)),
                    ]
                    for low, high in pairs:
                        self.assertTrue(low.exact and high.exact)
                        self.assertLessEqual(low.value, high.value)

    def test_in_f(self):
        """Test that a pointwise larger f gives larger bounds."""
        for n in range(3):
            self.assertLessEqual(self.calc.Phi(0, ID, n).value, self.calc.Phi(0, SUCC, n).value)
            self.assertLessEqual(self.calc.Xi(0, ID, n).value, self.calc.Xi(0, SUCC, n).value)
        self.assertLessEqual(self.calc.beta(0, Const(0)).value, self.calc.beta(0, ID).value)


class TestBudgets(unittest.TestCase):
    """Test suite for the main bounds, which exceed any practical budget."""

    @classmethod
    def setUpClass(cls):
        """A calculus with small budgets on the trivial context."""
        cls.calc = RateCalculus(BoundContext.trivial(), max_steps=20_000, max_bits=4096)

    def test_mu_reports_lower_bound(self):
        """Test that mu(0, id) is a traced lower bound."""
        bound = self.calc.mu(0, ID)
        self.assertFalse(bound.exact)
        self.assertIsNotNone(bound.exhausted_in)
        self.assertGreater(bound.value, 0)
        self.assertEqual(bound.trace["k_bar[0]"], 31)
        payload = bound.to_dict(with_trace=True)
        self.assertEqual(payload["bound"], "budget-exceeded")
        self.assertEqual(payload["lower_bound"], str(bound.value))
        self.assertEqual(payload["trace"]["k_bar[0]"], "31")

    def test_derived_bounds_dominate_their_thresholds(self):
        """Test nu >= Theta(3k+2), nu_tilde >= Theta(4k+3) and mu_tilde >= ell(4cD(k+1)-1)."""
        for k in range(2):
            self.assertGreaterEqual(self.calc.nu(k, ID).value, self.calc.Theta(3 * k + 2).value)
            self.assertGreaterEqual(self.calc.nu_tilde(k, ID).value,
                                    self.calc.Theta(4 * k + 3).value)
            self.assertGreaterEqual(self.calc.mu_tilde(k, ID).value, 4 * (k + 1) - 1)

    def test_rho_uses_the_majorant(self):
        """Test rho(k, f) = nu(k, f^maj) for a non-monotone table."""
        raw = RawTable((3, 1, 4, 1, 5))
        self.assertEqual(self.calc.rho(0, raw), self.calc.nu(0, Table((3, 3, 4, 4, 5))))
        self.assertEqual(self.calc.rho_tilde(0, raw),
                         self.calc.nu_tilde(0, Table((3, 3, 4, 4, 5))))

    def test_bounded_budget_never_materializes(self):
        """Test that every intermediate respects the bit budget."""
        bound = self.calc.beta(3, SUCC)
        self.assertFalse(bound.exact)
        self.assertLessEqual(bound.value.bit_length(), 4096 * 2 + 64)


if __name__ == "__main__":
    unittest.main()
