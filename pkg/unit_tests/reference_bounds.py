"""Naive reference evaluator for the bound functionals.

Plain recursion over Python callables: no memo, no budgets, no fixed-point
short-circuit in iteration, and logarithms through mpmath at high precision.
Only usable for small parameters; the tests compare it with
:class:`ppa.rate_calculus.RateCalculus`.
"""

import mpmath

mpmath.mp.dps = 80


def ceil_ln(x):
    return int(mpmath.ceil(mpmath.log(x)))


def iterate(f, count, n):
    for _ in range(count):
        n = f(n)
    return n


class Reference:
    """Bounds for the parameters c, D, d, h, ell, L, E, Cfun (callables)."""

    def __init__(self, c, D, d, h, ell, L, E, Cfun):
        self.c, self.D, self.d = c, D, d
        self.h, self.ell, self.L, self.E, self.Cfun = h, ell, L, E, Cfun

    def zeta(self, k, n):
        return self.c * (k + 1) * self.Cfun(n) - 1

    def sigma(self, k, n, M):
        return self.L(n + ceil_ln(3 * M * (k + 1))) + 1

    def sigma_bar(self, k, n):
        return self.L(n + ceil_ln(12 * self.D ** 2 * (k + 1))) + 1

    def phi2(self, k, n, f):
        return max(n, iterate(f, 4 * self.D ** 2 * (k + 1), n))

    def phi1(self, k, n, f):
        return f(self.phi2(k, n, f))

    def f_tilde(self, k, f):
        return lambda m: f(self.sigma_bar(k, m))

    def r1(self, n):
        return 12 * self.c * (n + 1) ** 2 - 1

    def r2(self, k, n):
        return max(2 * (n + 1), 128 * self.D * (k + 1) ** 2)

    def r3(self, k, n):
        c, D = self.c, self.D
        return self.ell(max(96 * c * D ** 2 * (n + 1) ** 2 - 1,
                            256 * D ** 2 * (k + 1) ** 2 - 1,
                            16 * c * self.r2(k, n) ** 2 * D ** 2))

    def _g(self, k, f):
        tilde = self.f_tilde(k, f)
        return lambda m: tilde(m) + 2

    def r4(self, k, f, n):
        inner = self.phi2(self.r1(n), self.r3(k, n), self._g(k, f))
        return 3 * (k + 1) * (self.f_tilde(k, f)(inner) + 1)

    def Phi(self, k, f, n):
        return self.phi1(self.r1(n), self.r3(k, n), self._g(k, f))

    def Xi1(self, k, f, n):
        r = max(self.r1(n), self.r4(k, f, n))
        return self.zeta(2 * (6 * self.D + 1) * r - 1, self.Phi(k, f, n))

    def xi(self, k, f, n):
        D = self.D
        first = 16 * self.h(f(n)) * (k + 1) ** 2 * (6 * D + 1)
        second = 4 * self.c * self.r2(k, n) ** 2 * (6 * D + 1)
        return self.zeta(max(first, second), f(n))

    def Xi2(self, k, f, n):
        return self.xi(k, f, self.Phi(k, f, n))

    def Xi(self, k, f, n):
        return max(self.Xi1(k, f, n), self.Xi2(k, f, n))

    def w(self, f):
        D = self.D
        return lambda m: max(f(24 * D * (m + 1) ** 2), 24 * D * (m + 1) ** 2)

    def beta(self, k, f):
        R = 4 * self.D ** 4 * (k + 1) ** 2
        return 24 * self.D * (iterate(self.w(f), R, 0) + 1) ** 2

    def Theta(self, k):
        return self.L(self.E(3 * k + 2) + ceil_ln(3 * self.d * (k + 1))) + 1


def theta_llpp(A, R, G, d, k):
    N = max(R(3 * k + 2), G(3 * k + 2) + 1)
    return A(N - 1 + ceil_ln(3 * d * (k + 1))) + 1
