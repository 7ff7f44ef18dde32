"""Exact bound functionals for the anchored proximal iteration.

Every functional is transcribed as stated, without simplification, and
evaluated over Python integers through a budgeted
:class:`~ppa.counterfn.Evaluator`. A public call returns a
:class:`BoundValue`; when a budget runs out the value is a proven lower
bound and ``exact`` is False.

Naming follows the quantities they compute: ``zeta``, ``sigma_bar``,
``phi1``/``phi2``, ``f_tilde``, ``r1``..``r4``, ``Phi``, ``Xi1``, ``xi``,
``Xi2``, ``Xi``, ``beta``, ``mu`` and the derived ``mu_tilde``, ``nu``,
``nu_tilde``, ``rho``, ``rho_tilde``, ``Theta`` and ``theta_llpp``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Union

from ppa.counterfn import (
    ID,
    Add,
    AffinePoly,
    Compose,
    Const,
    CounterFn,
    Evaluator,
    Lifted,
    Max,
    RawTable,
    ceil_ln,
    majorant,
    DEFAULT_BIT_BUDGET,
    DEFAULT_STEP_BUDGET,
)
from ppa.errors import InvalidParameterError
from ppa.schedules import ModuliPack, ScenarioConstants

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundContext:
    """Parameters shared by every functional.

    Attributes:
        c, D, d: positive naturals.
        h, ell, L, E, Cfun: monotone counter-functions.
        M: upper bound on the sequence fed to ``sigma``; defaults to 4*D**2.
    """

    c: int
    D: int
    d: int
    h: CounterFn
    ell: CounterFn
    L: CounterFn
    E: CounterFn
    Cfun: CounterFn
    M: Optional[int] = None

    def __post_init__(self):
        for name in ("c", "D", "d"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {value!r}")
        if self.M is None:
            object.__setattr__(self, "M", 4 * self.D * self.D)
        elif self.M < 1:
            raise InvalidParameterError("M must be a positive integer")

    @classmethod
    def from_scenario(cls, moduli: ModuliPack, constants: ScenarioConstants) -> "BoundContext":
        """Context of a concrete scenario."""
        return cls(c=moduli.c, D=constants.D, d=constants.d, h=moduli.h, ell=moduli.ell,
                   L=moduli.L, E=moduli.E, Cfun=moduli.Cfun)

    @classmethod
    def trivial(cls) -> "BoundContext":
        """c = 1, Cfun = 1, D = d = 1, L = ell = E = id, h = 1."""
        return cls(c=1, D=1, d=1, h=Const(1), ell=ID, L=ID, E=ID, Cfun=Const(1))

    def to_dict(self) -> Dict[str, str]:
        return {
            "c": str(self.c), "D": str(self.D), "d": str(self.d), "M": str(self.M),
            "h": self.h.to_expr(), "ell": self.ell.to_expr(), "L": self.L.to_expr(),
            "E": self.E.to_expr(), "Cfun": self.Cfun.to_expr(),
        }


@dataclass(frozen=True)
class BoundValue:
    """A computed bound.

    Attributes:
        value: the bound when exact, a proven lower bound otherwise.
        exact: whether every sub-term finished within budget.
        exhausted_in: first sub-term that ran out of budget.
        trace: named sub-terms computed on the way.
    """

    value: int
    exact: bool = True
    exhausted_in: Optional[str] = None
    trace: Dict[str, int] = field(default_factory=dict, compare=False)

    def covers(self, witness: int) -> bool:
        """True when witness <= bound is established (exactly or via the lower bound)."""
        return witness <= self.value

    def to_dict(self, with_trace: bool = False) -> Dict[str, Any]:
        payload = {
            "bound": str(self.value) if self.exact else "budget-exceeded",
            "lower_bound": str(self.value),
            "exact": self.exact,
            "exhausted_in": self.exhausted_in,
        }
        if with_trace:
            payload["trace"] = {name: str(value) for name, value in self.trace.items()}
        return payload


Fn = Union[CounterFn, RawTable]


class RateCalculus:
    """Evaluates the bound functionals for one context.

    Every public method runs in a fresh evaluator, so memo tables never leak
    between bounds. Methods prefixed with an underscore take the evaluator
    explicitly and compose with each other.

    Args:
        context: the shared parameters.
        max_steps, max_bits: budgets for each public evaluation.
    """

    def __init__(self, context: BoundContext, max_steps: int = DEFAULT_STEP_BUDGET,
                 max_bits: int = DEFAULT_BIT_BUDGET, memo: bool = True):
        self.ctx = context
        self.max_steps = max_steps
        self.max_bits = max_bits
        self.memo = memo

    # ------------------------------------------------------------------ #
    # Evaluation plumbing
    # ------------------------------------------------------------------ #

    def evaluate(self, name: str, compute: Callable[[Evaluator], int]) -> BoundValue:
        """Run compute in a fresh evaluator and wrap the result."""
        ev = Evaluator(self.max_steps, self.max_bits, memo=self.memo)
        value = compute(ev)
        if ev.exhausted:
            logger.info("%s exceeded the budget in %s; reporting a lower bound", name,
                        ev.exhausted_in)
        return BoundValue(value, not ev.exhausted, ev.exhausted_in, dict(ev.trace))

    def _functional(self, ev: Evaluator, name: str, k: int, f: Optional[CounterFn],
                    build: Callable[[], CounterFn]) -> CounterFn:
        key = (name, k, f)
        fn = ev.functionals.get(key)
        if fn is None:
            fn = ev.functionals[key] = build()
        return fn

    def _lift(self, ev: Evaluator, name: str, k: int, f: CounterFn,
              method: Callable[[Evaluator, int, CounterFn, int], int]) -> CounterFn:
        label = f"{name}[{k}]"
        return self._functional(ev, name, k, f,
                                lambda: Lifted(label, lambda e, n: method(e, k, f, n)))

    @staticmethod
    def _sq(ev: Evaluator, x: int) -> int:
        return ev.mul(x, x)

    @staticmethod
    def _cln(x: int) -> int:
        return ceil_ln(max(1, x))

    # ------------------------------------------------------------------ #
    # Building blocks
    # ------------------------------------------------------------------ #

    def _zeta(self, ev: Evaluator, k: int, n: int) -> int:
        """c(k+1)Cfun(n) - 1, reading Cfun(n) as at least 1 so that a zero-valued
        Cfun from a config still yields a natural number (c_n > 0 forces Cfun >= 1)."""
        bound = max(1, ev.value(self.ctx.Cfun, n))
        return max(0, ev.mul(ev.mul(self.ctx.c, k + 1), bound) - 1)

    def _sigma_fn(self, ev: Evaluator, k: int, M: int) -> CounterFn:
        """n -> L(n + ceil(ln(3M(k+1)))) + 1 as a counter-function."""
        def build():
            shift = self._cln(ev.mul(3 * M, k + 1))
            return Add(Compose(self.ctx.L, Add(ID, Const(shift))), Const(1))
        return self._functional(ev, f"sigma[M={M}]", k, None, build)

    def _sigma_bar_fn(self, ev: Evaluator, k: int) -> CounterFn:
        # sigma_bar[L, D] = sigma[L, 4D^2]
        return self._sigma_fn(ev, k, 4 * self.ctx.D * self.ctx.D)

    def _f_tilde_fn(self, ev: Evaluator, k: int, f: CounterFn) -> CounterFn:
        return self._functional(ev, "f_tilde", k, f,
                                lambda: Compose(f, self._sigma_bar_fn(ev, k)))

    def _f_tilde_plus2_fn(self, ev: Evaluator, k: int, f: CounterFn) -> CounterFn:
        return self._functional(ev, "f_tilde+2", k, f,
                                lambda: Add(self._f_tilde_fn(ev, k, f), Const(2)))

    def _phi2(self, ev: Evaluator, k: int, n: int, g: CounterFn) -> int:
        count = ev.mul(4 * self.ctx.D * self.ctx.D, k + 1)
        return max(n, ev.iterate(g, count, n, term="phi2"))

    def _phi1(self, ev: Evaluator, k: int, n: int, g: CounterFn) -> int:
        return ev.value(g, self._phi2(ev, k, n, g))

    def _r1(self, ev: Evaluator, n: int) -> int:
        return ev.mul(12 * self.ctx.c, self._sq(ev, n + 1)) - 1

    def _r2(self, ev: Evaluator, k: int, n: int) -> int:
        return max(ev.mul(2, n + 1), ev.mul(128 * self.ctx.D, self._sq(ev, k + 1)))

    def _r3(self, ev: Evaluator, k: int, n: int) -> int:
        c, D = self.ctx.c, self.ctx.D
        argument = max(
            ev.mul(96 * c * D * D, self._sq(ev, n + 1)) - 1,
            ev.mul(256 * D * D, self._sq(ev, k + 1)) - 1,
            ev.mul(16 * c * D * D, self._sq(ev, self._r2(ev, k, n))),
        )
        return ev.value(self.ctx.ell, argument)

    def _r4(self, ev: Evaluator, k: int, f: CounterFn, n: int) -> int:
        g = self._f_tilde_plus2_fn(ev, k, f)
        inner = self._phi2(ev, self._r1(ev, n), self._r3(ev, k, n), g)
        return ev.mul(3 * (k + 1), ev.add(ev.value(self._f_tilde_fn(ev, k, f), inner), 1))

    def _Phi(self, ev: Evaluator, k: int, f: CounterFn, n: int) -> int:
        g = self._f_tilde_plus2_fn(ev, k, f)
        return self._phi1(ev, self._r1(ev, n), self._r3(ev, k, n), g)

    def _Phi_fn(self, ev: Evaluator, k: int, f: CounterFn) -> CounterFn:
        return self._lift(ev, "Phi", k, f, self._Phi)

    # ------------------------------------------------------------------ #
    # Xi
    # ------------------------------------------------------------------ #

    def _Xi1(self, ev: Evaluator, k: int, f: CounterFn, n: int) -> int:
        D = self.ctx.D
        r = max(self._r1(ev, n), self._r4(ev, k, f, n))
        # the first argument subtracts one here but not in xi
        return self._zeta(ev, ev.mul(2 * (6 * D + 1), r) - 1,
                          ev.value(self._Phi_fn(ev, k, f), n))

    def _xi(self, ev: Evaluator, k: int, f: CounterFn, n: int) -> int:
        c, D = self.ctx.c, self.ctx.D
        fn = ev.value(f, n)
        # h maps into the positive naturals
        h_value = max(1, ev.value(self.ctx.h, fn))
        first = ev.mul(ev.mul(16 * (6 * D + 1), self._sq(ev, k + 1)), h_value)
        second = ev.mul(4 * c * (6 * D + 1), self._sq(ev, self._r2(ev, k, n)))
        return self._zeta(ev, max(first, second), fn)

    def _Xi2(self, ev: Evaluator, k: int, f: CounterFn, n: int) -> int:
        return self._xi(ev, k, f, ev.value(self._Phi_fn(ev, k, f), n))

    def _Xi(self, ev: Evaluator, k: int, f: CounterFn, n: int) -> int:
        return max(self._Xi1(ev, k, f, n), self._Xi2(ev, k, f, n))

    def _Xi_fn(self, ev: Evaluator, k: int, f: CounterFn) -> CounterFn:
        return self._lift(ev, "Xi", k, f, self._Xi)

    # ------------------------------------------------------------------ #
    # beta and mu
    # ------------------------------------------------------------------ #

    def _w_fn(self, ev: Evaluator, f: CounterFn) -> CounterFn:
        """m -> max{f(24D(m+1)^2), 24D(m+1)^2}."""
        def build():
            D24 = 24 * self.ctx.D
            square = AffinePoly((D24, 2 * D24, D24))
            return Max(Compose(f, square), square)
        return self._functional(ev, "w", 0, f, build)

    def _w_orbit(self, ev: Evaluator, f: CounterFn, count: int) -> int:
        return ev.iterate(self._w_fn(ev, f), count, 0, term="w_orbit")

    def _beta(self, ev: Evaluator, k: int, f: CounterFn) -> int:
        D = self.ctx.D
        R = ev.mul(4 * D ** 4, self._sq(ev, k + 1))
        orbit = self._w_orbit(ev, f, R)
        return ev.mul(24 * D, self._sq(ev, ev.add(orbit, 1)))

    def _mu(self, ev: Evaluator, k: int, f: CounterFn) -> int:
        k_bar = ev.record(f"k_bar[{k}]", 32 * (k + 1) ** 2 - 1)
        beta = ev.record(f"beta(k_bar,Xi)[{k}]", self._beta(ev, k_bar, self._Xi_fn(ev, k, f)))
        r_bar = ev.record(f"r_bar[{k}]", self._r1(ev, beta))
        n_bar = ev.record(f"n_bar[{k}]", self._r3(ev, k, beta))
        g = self._f_tilde_plus2_fn(ev, k, f)
        inner = ev.record(f"phi2(r_bar,n_bar,f_tilde+2)[{k}]", self._phi2(ev, r_bar, n_bar, g))
        first = ev.record(f"sigma_bar(k,phi2)[{k}]", ev.value(self._sigma_bar_fn(ev, k), inner))
        second = ev.record(f"Phi(beta)[{k}]", ev.value(self._Phi_fn(ev, k, f), beta))
        return max(first, second)

    def _mu_tilde(self, ev: Evaluator, k: int, f: CounterFn) -> int:
        c, D = self.ctx.c, self.ctx.D
        threshold = ev.record(f"ell(4cD(k+1)-1)[{k}]",
                              ev.value(self.ctx.ell, ev.mul(4 * c * D, k + 1) - 1))
        f_check = Compose(f, Max(ID, Const(threshold)))
        k_inner = ev.mul(16 * c * c, self._sq(ev, k + 1)) - 1
        return max(self._mu(ev, k_inner, Add(f_check, Const(1))), threshold)

    def _Theta(self, ev: Evaluator, k: int) -> int:
        shift = self._cln(ev.mul(3 * self.ctx.d, k + 1))
        return ev.add(ev.value(self.ctx.L, ev.add(ev.value(self.ctx.E, 3 * k + 2), shift)), 1)

    def _nu(self, ev: Evaluator, k: int, f: CounterFn) -> int:
        theta = ev.record(f"Theta(3k+2)[{k}]", self._Theta(ev, 3 * k + 2))
        f_hat = Compose(f, Max(ID, Const(theta)))
        return max(self._mu(ev, 36 * (k + 1) ** 2 - 1, f_hat), theta)

    def _nu_tilde(self, ev: Evaluator, k: int, f: CounterFn) -> int:
        theta = ev.record(f"Theta(4k+3)[{k}]", self._Theta(ev, 4 * k + 3))
        f_breve = Compose(f, Max(ID, Const(theta)))
        return max(self._mu_tilde(ev, 2 * k + 1, f_breve), theta)

    # ------------------------------------------------------------------ #
    # Public functionals
    # ------------------------------------------------------------------ #

    def zeta(self, k: int, n: int) -> BoundValue:
        """c(k+1)Cfun(n) - 1."""
        return self.evaluate("zeta", lambda ev: self._zeta(ev, k, n))

    def sigma_bar(self, k: int, n: int) -> BoundValue:
        """L(n + ceil(ln(12 D^2 (k+1)))) + 1."""
        return self.evaluate("sigma_bar", lambda ev: ev.value(self._sigma_bar_fn(ev, k), n))

    def sigma(self, k: int, n: int, M: Optional[int] = None) -> BoundValue:
        """L(n + ceil(ln(3 M (k+1)))) + 1, M defaulting to the context's."""
        M = self.ctx.M if M is None else M
        if M < 1:
            raise InvalidParameterError("M must be a positive integer")
        return self.evaluate("sigma", lambda ev: ev.value(self._sigma_fn(ev, k, M), n))

    def phi2(self, k: int, n: int, f: CounterFn) -> BoundValue:
        """max{n, f^(4D^2(k+1))(n)}."""
        return self.evaluate("phi2", lambda ev: self._phi2(ev, k, n, f))

    def phi1(self, k: int, n: int, f: CounterFn) -> BoundValue:
        """f(phi2(k, n, f))."""
        return self.evaluate("phi1", lambda ev: self._phi1(ev, k, n, f))

    def f_tilde(self, k: int, f: CounterFn, n: int) -> BoundValue:
        """f(sigma_bar(k, n))."""
        return self.evaluate("f_tilde", lambda ev: ev.value(self._f_tilde_fn(ev, k, f), n))

    def r1(self, n: int) -> BoundValue:
        return self.evaluate("r1", lambda ev: self._r1(ev, n))

    def r2(self, k: int, n: int) -> BoundValue:
        return self.evaluate("r2", lambda ev: self._r2(ev, k, n))

    def r3(self, k: int, n: int) -> BoundValue:
        return self.evaluate("r3", lambda ev: self._r3(ev, k, n))

    def r4(self, k: int, f: CounterFn, n: int) -> BoundValue:
        return self.evaluate("r4", lambda ev: self._r4(ev, k, f, n))

    def Phi(self, k: int, f: CounterFn, n: int) -> BoundValue:
        return self.evaluate("Phi", lambda ev: self._Phi(ev, k, f, n))

    def Xi1(self, k: int, f: CounterFn, n: int) -> BoundValue:
        return self.evaluate("Xi1", lambda ev: self._Xi1(ev, k, f, n))

    def xi(self, k: int, f: CounterFn, n: int) -> BoundValue:
        return self.evaluate("xi", lambda ev: self._xi(ev, k, f, n))

    def Xi2(self, k: int, f: CounterFn, n: int) -> BoundValue:
        return self.evaluate("Xi2", lambda ev: self._Xi2(ev, k, f, n))

    def Xi(self, k: int, f: CounterFn, n: int) -> BoundValue:
        return self.evaluate("Xi", lambda ev: self._Xi(ev, k, f, n))

    def w_orbit(self, f: CounterFn, count: int) -> BoundValue:
        """w_f applied count times to 0."""
        return self.evaluate("w_orbit", lambda ev: self._w_orbit(ev, f, count))

    def beta(self, k: int, f: CounterFn) -> BoundValue:
        """24D (w_f^(R)(0) + 1)^2 with R = 4 D^4 (k+1)^2."""
        return self.evaluate("beta", lambda ev: self._beta(ev, k, f))

    def mu(self, k: int, f: CounterFn) -> BoundValue:
        return self.evaluate("mu", lambda ev: self._mu(ev, k, f))

    def mu_tilde(self, k: int, f: CounterFn) -> BoundValue:
        return self.evaluate("mu_tilde", lambda ev: self._mu_tilde(ev, k, f))

    def nu(self, k: int, f: CounterFn) -> BoundValue:
        return self.evaluate("nu", lambda ev: self._nu(ev, k, f))

    def nu_tilde(self, k: int, f: CounterFn) -> BoundValue:
        return self.evaluate("nu_tilde", lambda ev: self._nu_tilde(ev, k, f))

    def rho(self, k: int, f: Fn) -> BoundValue:
        """nu(k, f^maj); f may be a non-monotone RawTable."""
        g = majorant(f)
        return self.evaluate("rho", lambda ev: self._nu(ev, k, g))

    def rho_tilde(self, k: int, f: Fn) -> BoundValue:
        """nu_tilde(k, f^maj)."""
        g = majorant(f)
        return self.evaluate("rho_tilde", lambda ev: self._nu_tilde(ev, k, g))

    def Theta(self, k: int) -> BoundValue:
        """L(E(3k+2) + ceil(ln(3d(k+1)))) + 1."""
        return self.evaluate("Theta", lambda ev: self._Theta(ev, k))

    def theta_llpp(self, A: CounterFn, R: CounterFn, G: CounterFn, d: int, k: int) -> BoundValue:
        """A(N - 1 + ceil(ln(3d(k+1)))) + 1 with N = max{R(3k+2), G(3k+2) + 1}."""
        return self.evaluate("theta_llpp", lambda ev: theta_llpp(ev, A, R, G, d, k))


def theta_llpp(ev: Evaluator, A: CounterFn, R: CounterFn, G: CounterFn, d: int, k: int) -> int:
    """Rate for sequences with s_{n+1} <= (1-a_n)s_n + a_n r_n + g_n (see RateCalculus)."""
    if d < 1:
        raise InvalidParameterError("d must be a positive integer")
    N = max(ev.value(R, 3 * k + 2), ev.add(ev.value(G, 3 * k + 2), 1))
    shift = ceil_ln(ev.mul(3 * d, k + 1))
    return ev.add(ev.value(A, ev.add(N - 1, shift)), 1)
