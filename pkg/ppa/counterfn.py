"""Monotone counter-functions over exact naturals.

A counter-function is a frozen expression tree. Every constructor preserves
monotonicity, so any tree denotes a monotone map N -> N. Evaluation goes
through an :class:`Evaluator`, which owns the step and bit budgets and the
memo table of one bound computation.

Once a budget is exhausted the evaluator keeps going in *floor mode*: nodes
return cheap lower bounds instead of exact values. Every node is monotone,
so a result assembled from lower bounds is itself a lower bound, and a
partial result can always be compared against a witness safely.

Expressions serialize to a small prefix grammar::

    id | (const c) | (add f g) | (mul f g) | (max f g) | (compose f g)
       | (iterate f count) | (affine a_d ... a_1 a_0) | (cln s) | (cexp s)
       | (clog2) | (table v0 v1 ...)
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from mpmath import libmp

from ppa.errors import BudgetExceededError, InvalidParameterError

logger = logging.getLogger(__name__)

DEFAULT_STEP_BUDGET = 1_000_000
DEFAULT_BIT_BUDGET = 1 << 20

_LOG2_E = 1.4426950408889634


# ----------------------------------------------------------------------------
# Exact transcendental roundings
# ----------------------------------------------------------------------------

def ceil_ln(x: int) -> int:
    """Return ceil(ln x) for a positive integer x.

    ln x is irrational for every integer x >= 2, so refining an
    outward-rounded interval always separates it from the integers.
    """
    if x < 1:
        raise InvalidParameterError(f"ceil_ln needs a positive integer, got {x}")
    if x == 1:
        return 0
    point = libmp.from_int(x)
    prec = 64 + x.bit_length().bit_length()
    while True:
        low, high = libmp.mpi_log((point, point), prec)
        low_ceil = libmp.to_int(low, libmp.round_ceiling)
        if low_ceil == libmp.to_int(high, libmp.round_ceiling):
            return int(low_ceil)
        prec *= 2


def ceil_exp(scale: int, n: int) -> int:
    """Return ceil(scale * e**n) for naturals scale and n."""
    if scale < 0 or n < 0:
        raise InvalidParameterError("ceil_exp needs natural arguments")
    if scale == 0 or n == 0:
        return scale
    point = libmp.from_int(n)
    factor = libmp.from_int(scale)
    prec = int(n * _LOG2_E) + scale.bit_length() + 64
    while True:
        low, high = libmp.mpi_exp((point, point), prec)
        low, high = libmp.mpi_mul((low, high), (factor, factor), prec)
        low_ceil = libmp.to_int(low, libmp.round_ceiling)
        if low_ceil == libmp.to_int(high, libmp.round_ceiling):
            return int(low_ceil)
        prec *= 2


# ----------------------------------------------------------------------------
# Evaluator
# ----------------------------------------------------------------------------

class Evaluator:
    """Budgeted evaluator for a single bound computation.

    Args:
        max_steps: Node evaluations allowed before switching to floor mode.
        max_bits: Largest bit length an intermediate value may reach.
        memo: Whether exact sub-results are memoized (keyed by node and
            argument). The memo lives and dies with the evaluator.
    """

    def __init__(self, max_steps: int = DEFAULT_STEP_BUDGET,
                 max_bits: int = DEFAULT_BIT_BUDGET, memo: bool = True):
        if max_steps < 1:
            raise InvalidParameterError("step budget must be positive")
        if max_bits < 16:
            raise InvalidParameterError("bit budget must be at least 16")
        self.max_steps = max_steps
        self.max_bits = max_bits
        self.steps = 0
        self.exhausted_in: Optional[str] = None
        self._memo: Optional[dict] = {} if memo else None
        self.functionals: dict = {}
        self.trace: dict = {}

    @property
    def exhausted(self) -> bool:
        """True once any budget ran out; values are lower bounds from then on."""
        return self.exhausted_in is not None

    def exhaust(self, term: str) -> None:
        """Switch to floor mode, remembering the first sub-term that overflowed."""
        if self.exhausted_in is None:
            self.exhausted_in = term
            logger.debug("budget exhausted in %s after %d steps", term, self.steps)

    def record(self, name: str, value: int) -> int:
        """Add a named sub-term to the derivation trace and return it."""
        self.trace[name] = value
        return value

    def charge(self, term: str, cost: int = 1) -> None:
        """Consume evaluation steps."""
        self.steps += cost
        if self.steps > self.max_steps:
            self.exhaust(term)

    def clamp(self, value: int, term: str) -> int:
        """Return value, or a smaller power of two if it breaks the bit budget."""
        if value.bit_length() > self.max_bits:
            self.exhaust(term)
            return 1 << (self.max_bits - 1)
        return value

    def add(self, a: int, b: int, term: str = "add") -> int:
        """Budgeted addition."""
        return self.clamp(a + b, term)

    def mul(self, a: int, b: int, term: str = "mul") -> int:
        """Budgeted multiplication; never materializes an oversized product."""
        if a == 0 or b == 0:
            return 0
        if a.bit_length() + b.bit_length() - 1 > self.max_bits:
            # a*b >= 2**(bits(a)+bits(b)-2) >= 2**(max_bits-1)
            self.exhaust(term)
            return 1 << (self.max_bits - 1)
        return a * b

    def value(self, fn: "CounterFn", n: int) -> int:
        """Evaluate fn at n (exactly, or as a lower bound in floor mode)."""
        if self.exhausted:
            return fn.evaluate(self, n)
        key = (fn, n)
        if self._memo is not None:
            cached = self._memo.get(key)
            if cached is not None:
                return cached
        self.charge(fn.label)
        result = fn.evaluate(self, n)
        if self._memo is not None and not self.exhausted:
            self._memo[key] = result
        return result

    def iterate(self, fn: "CounterFn", count: int, n: int,
                term: Optional[str] = None) -> int:
        """Apply fn count times to n, stopping early at a fixed point.

        Orbits of a monotone map are monotone, so a repeated value means the
        orbit has stabilised for good.
        """
        if count <= 0:
            return n
        if self.exhausted:
            first = self.value(fn, n)
            return first if first >= n else 0
        label = term or f"iterate[{fn.label}]"
        current = n
        rising = True
        done = 0
        while done < count:
            following = self.value(fn, current)
            if self.exhausted:
                self.exhaust(label)
                if done == 0:
                    return following if following >= n else 0
                return max(current, following) if rising else 0
            if following == current:
                return current
            if done == 0:
                rising = following > current
            current = following
            done += 1
        return current


# ----------------------------------------------------------------------------
# Expression nodes
# ----------------------------------------------------------------------------

class CounterFn:
    """A monotone function N -> N given as an expression tree."""

    __slots__ = ()
    label = "fn"

    def evaluate(self, ev: Evaluator, n: int) -> int:
        """Compute the value at n through ev (use :meth:`Evaluator.value`)."""
        raise NotImplementedError

    def to_expr(self) -> str:
        """Canonical prefix expression."""
        raise NotImplementedError

    def __call__(self, n: int) -> int:
        return evaluate(self, n)

    def __add__(self, other: Union["CounterFn", int]) -> "CounterFn":
        return Add(self, _lift(other))

    def __str__(self) -> str:
        return self.to_expr()

    def after(self, inner: "CounterFn") -> "CounterFn":
        """Return the composition self o inner."""
        return Compose(self, inner)


def _lift(value: Union[CounterFn, int]) -> CounterFn:
    return value if isinstance(value, CounterFn) else Const(value)


def _natural(value: int, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise InvalidParameterError(f"{what} must be a natural number, got {value!r}")
    return value


@dataclass(frozen=True)
class Const(CounterFn):
    """n -> value."""

    value: int
    label = "const"

    def __post_init__(self):
        _natural(self.value, "constant")

    def evaluate(self, ev, n):
        return self.value

    def to_expr(self):
        return f"(const {self.value})"


@dataclass(frozen=True)
class Identity(CounterFn):
    """n -> n."""

    label = "id"

    def evaluate(self, ev, n):
        return n

    def to_expr(self):
        return "id"


ID = Identity()


@dataclass(frozen=True)
class Add(CounterFn):
    """n -> left(n) + right(n)."""

    left: CounterFn
    right: CounterFn
    label = "add"

    def evaluate(self, ev, n):
        return ev.add(ev.value(self.left, n), ev.value(self.right, n), self.label)

    def to_expr(self):
        return f"(add {self.left.to_expr()} {self.right.to_expr()})"


@dataclass(frozen=True)
class Mul(CounterFn):
    """n -> left(n) * right(n)."""

    left: CounterFn
    right: CounterFn
    label = "mul"

    def evaluate(self, ev, n):
        return ev.mul(ev.value(self.left, n), ev.value(self.right, n), self.label)

    def to_expr(self):
        return f"(mul {self.left.to_expr()} {self.right.to_expr()})"


@dataclass(frozen=True)
class Max(CounterFn):
    """n -> max(left(n), right(n))."""

    left: CounterFn
    right: CounterFn
    label = "max"

    def evaluate(self, ev, n):
        return max(ev.value(self.left, n), ev.value(self.right, n))

    def to_expr(self):
        return f"(max {self.left.to_expr()} {self.right.to_expr()})"


@dataclass(frozen=True)
class Compose(CounterFn):
    """n -> outer(inner(n))."""

    outer: CounterFn
    inner: CounterFn
    label = "compose"

    def evaluate(self, ev, n):
        return ev.value(self.outer, ev.value(self.inner, n))

    def to_expr(self):
        return f"(compose {self.outer.to_expr()} {self.inner.to_expr()})"


@dataclass(frozen=True)
class Iterate(CounterFn):
    """n -> fn applied ``count`` times to n."""

    fn: CounterFn
    count: int
    label = "iterate"

    def __post_init__(self):
        _natural(self.count, "iteration count")

    def evaluate(self, ev, n):
        return ev.iterate(self.fn, self.count, n)

    def to_expr(self):
        return f"(iterate {self.fn.to_expr()} {self.count})"


@dataclass(frozen=True)
class AffinePoly(CounterFn):
    """Polynomial with natural coefficients, highest degree first."""

    coefficients: tuple
    label = "affine"

    def __post_init__(self):
        if not self.coefficients:
            raise InvalidParameterError("a polynomial needs at least one coefficient")
        for coefficient in self.coefficients:
            _natural(coefficient, "polynomial coefficient")

    def evaluate(self, ev, n):
        acc = 0
        for coefficient in self.coefficients:
            acc = ev.add(ev.mul(acc, n, self.label), coefficient, self.label)
        return acc

    def to_expr(self):
        return "(affine " + " ".join(str(c) for c in self.coefficients) + ")"


@dataclass(frozen=True)
class CeilLn(CounterFn):
    """n -> ceil(ln(scale * (n + 1)))."""

    scale: int
    label = "cln"

    def __post_init__(self):
        if _natural(self.scale, "logarithm scale") < 1:
            raise InvalidParameterError("logarithm scale must be positive")

    def evaluate(self, ev, n):
        return ceil_ln(ev.mul(self.scale, n + 1, self.label))

    def to_expr(self):
        return f"(cln {self.scale})"


@dataclass(frozen=True)
class CeilExp(CounterFn):
    """n -> ceil(scale * e**n)."""

    scale: int
    label = "cexp"

    def __post_init__(self):
        if _natural(self.scale, "exponential scale") < 1:
            raise InvalidParameterError("exponential scale must be positive")

    def evaluate(self, ev, n):
        if ev.exhausted or n * _LOG2_E + self.scale.bit_length() > ev.max_bits:
            ev.exhaust(self.label)
            # scale * e**n >= scale * (n + 1)
            return ev.mul(self.scale, n + 1, self.label)
        return ceil_exp(self.scale, n)

    def to_expr(self):
        return f"(cexp {self.scale})"


@dataclass(frozen=True)
class CeilLog2(CounterFn):
    """n -> ceil(log2(n + 1))."""

    label = "clog2"

    def evaluate(self, ev, n):
        return n.bit_length()

    def to_expr(self):
        return "(clog2)"


@dataclass(frozen=True)
class Table(CounterFn):
    """Finite monotone table, extended by its last value."""

    values: tuple
    label = "table"

    def __post_init__(self):
        if not self.values:
            raise InvalidParameterError("a table needs at least one value")
        for value in self.values:
            _natural(value, "table value")
        for i in range(1, len(self.values)):
            if self.values[i] < self.values[i - 1]:
                raise InvalidParameterError(
                    f"table is not monotone at index {i}; use majorant(RawTable(...))"
                )

    def evaluate(self, ev, n):
        return self.values[min(n, len(self.values) - 1)]

    def to_expr(self):
        return "(table " + " ".join(str(v) for v in self.values) + ")"


@dataclass(frozen=True)
class Lifted(CounterFn):
    """A derived functional computed by Python code on the same evaluator.

    Used for the bound calculus' own counter-functions (Xi and friends), whose
    monotonicity follows from the monotonicity of their ingredients.
    """

    name: str
    func: Callable[[Evaluator, int], int]
    label = "lifted"

    def evaluate(self, ev, n):
        return self.func(ev, n)

    def to_expr(self):
        return f"<{self.name}>"


# ----------------------------------------------------------------------------
# Non-monotone inputs and the majorant
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RawTable:
    """Finite, possibly non-monotone function, extended by its last value.

    Not a counter-function: it only enters the bound calculus through
    :func:`majorant`.
    """

    values: tuple

    def __post_init__(self):
        if not self.values:
            raise InvalidParameterError("a table needs at least one value")
        for value in self.values:
            _natural(value, "table value")

    def __call__(self, n: int) -> int:
        return self.values[min(n, len(self.values) - 1)]


def majorant(fn: Union[CounterFn, RawTable]) -> CounterFn:
    """Return n -> max{fn(i) : i <= n}.

    Tables get their running maximum; every other counter-function is
    monotone by construction and is returned unchanged.
    """
    if isinstance(fn, (Table, RawTable)):
        running, best = [], 0
        for value in fn.values:
            best = max(best, value)
            running.append(best)
        return Table(tuple(running))
    if isinstance(fn, CounterFn):
        return fn
    raise InvalidParameterError(f"cannot take the majorant of {fn!r}")


# ----------------------------------------------------------------------------
# Convenience entry points
# ----------------------------------------------------------------------------

def evaluate(fn: CounterFn, n: int, max_steps: int = DEFAULT_STEP_BUDGET,
             max_bits: int = DEFAULT_BIT_BUDGET) -> int:
    """Exact value fn(n).

    Raises:
        BudgetExceededError: carrying a proven lower bound on fn(n).
    """
    ev = Evaluator(max_steps, max_bits)
    result = ev.value(fn, _natural(n, "argument"))
    if ev.exhausted:
        raise BudgetExceededError(result, ev.exhausted_in)
    return result


def iterate(fn: CounterFn, count: int, n: int, max_steps: int = DEFAULT_STEP_BUDGET,
            max_bits: int = DEFAULT_BIT_BUDGET) -> int:
    """Exact value of fn applied count times to n.

    Raises:
        BudgetExceededError: carrying a proven lower bound on the result.
    """
    ev = Evaluator(max_steps, max_bits)
    result = ev.iterate(fn, _natural(count, "count"), _natural(n, "argument"))
    if ev.exhausted:
        raise BudgetExceededError(result, ev.exhausted_in)
    return result


def affine(*coefficients: int) -> AffinePoly:
    """Shorthand: ``affine(2, 1)`` is n -> 2n + 1."""
    return AffinePoly(tuple(coefficients))


# ----------------------------------------------------------------------------
# Prefix grammar
# ----------------------------------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_BINARY = {"add": Add, "mul": Mul, "max": Max, "compose": Compose}


def parse_counterfn(text: str) -> CounterFn:
    """Parse a prefix expression such as ``(max (affine 2 1) (const 5))``.

    Raises:
        InvalidParameterError: with a message naming the offending token.
    """
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise InvalidParameterError("empty counter-function expression")
    fn, position = _parse(tokens, 0)
    if position != len(tokens):
        raise InvalidParameterError(f"trailing tokens after expression: {tokens[position:]}")
    return fn


def _parse(tokens: Sequence[str], pos: int):
    if pos >= len(tokens):
        raise InvalidParameterError("unexpected end of expression")
    token = tokens[pos]
    if token == "id":
        return ID, pos + 1
    if token != "(":
        raise InvalidParameterError(f"unexpected token {token!r}")
    if pos + 1 >= len(tokens):
        raise InvalidParameterError("unexpected end of expression")
    head = tokens[pos + 1]
    pos += 2
    if head == "id":
        node = ID
    elif head == "clog2":
        node = CeilLog2()
    elif head in _BINARY:
        left, pos = _parse(tokens, pos)
        right, pos = _parse(tokens, pos)
        node = _BINARY[head](left, right)
    elif head == "iterate":
        inner, pos = _parse(tokens, pos)
        count, pos = _integers(tokens, pos)
        if len(count) != 1:
            raise InvalidParameterError("iterate takes exactly one count")
        node = Iterate(inner, count[0])
    elif head in ("const", "cln", "cexp"):
        values, pos = _integers(tokens, pos)
        if len(values) != 1:
            raise InvalidParameterError(f"{head} takes exactly one integer")
        node = {"const": Const, "cln": CeilLn, "cexp": CeilExp}[head](values[0])
    elif head in ("affine", "table"):
        values, pos = _integers(tokens, pos)
        node = AffinePoly(tuple(values)) if head == "affine" else Table(tuple(values))
    else:
        raise InvalidParameterError(f"unknown constructor {head!r}")
    if pos >= len(tokens) or tokens[pos] != ")":
        raise InvalidParameterError(f"missing ')' after {head}")
    return node, pos + 1


def _integers(tokens: Sequence[str], pos: int):
    values = []
    while pos < len(tokens) and tokens[pos] not in ("(", ")"):
        if not tokens[pos].isdigit():
            raise InvalidParameterError(f"expected a natural number, got {tokens[pos]!r}")
        values.append(int(tokens[pos]))
        pos += 1
    return values, pos
