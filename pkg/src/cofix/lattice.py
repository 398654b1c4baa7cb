"""Predicate lattices over finite state sets and the Kleene fixpoint engines.

Two lattices are supported: subsets of ``range(n)`` stored as an integer bit
vector, and ``[0,1]``-valued vectors stored as float tuples.  Both are
index-aligned with a model's declared state order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator, Mapping, NamedTuple

SET = "set"
QUANT = "quant"

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10**6
COEFF_SLACK = 1e-12


class LatticeError(ValueError):
    pass


class NonMonotoneError(LatticeError):
    """A Kleene iterate fell below its predecessor."""

    def __init__(self, key, iteration):
        super().__init__(f"operator is not monotone: iterate {iteration} decreased at {key!r}")
        self.key = key
        self.iteration = iteration


class IterationBoundError(RuntimeError):
    pass


class ConvergenceError(LatticeError):
    def __init__(self, last, residual, iterations):
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )
        self.last = last
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SetPredicate:
    bits: int
    width: int

    @classmethod
    def from_members(cls, members: Iterable[int], width: int) -> "SetPredicate":
        bits = 0
        for i in members:
            if not 0 <= i < width:
                raise LatticeError(f"state index {i} outside range({width})")
            bits |= 1 << i
        return cls(bits, width)

    @classmethod
    def empty(cls, width: int) -> "SetPredicate":
        return cls(0, width)

    @classmethod
    def full(cls, width: int) -> "SetPredicate":
        return cls((1 << width) - 1, width)

    def __contains__(self, i: int) -> bool:
        return bool(self.bits >> i & 1)

    def __iter__(self) -> Iterator[int]:
        return (i for i in range(self.width) if self.bits >> i & 1)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def members(self) -> frozenset:
        return frozenset(self)

    def _check(self, other):
        if not isinstance(other, SetPredicate) or other.width != self.width:
            raise LatticeError(f"incomparable predicates: {self!r} vs {other!r}")

    def __or__(self, other: "SetPredicate") -> "SetPredicate":
        self._check(other)
        return SetPredicate(self.bits | other.bits, self.width)

    def __and__(self, other: "SetPredicate") -> "SetPredicate":
        self._check(other)
        return SetPredicate(self.bits & other.bits, self.width)

    def complement(self) -> "SetPredicate":
        return SetPredicate(~self.bits & ((1 << self.width) - 1), self.width)

    def le(self, other: "SetPredicate") -> bool:
        self._check(other)
        return self.bits & ~other.bits == 0

    def __repr__(self):
        return f"SetPredicate({sorted(self)}, width={self.width})"


@dataclass(frozen=True)
class ValuePredicate:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        for v in vals:
            if not 0.0 <= v <= 1.0:
                raise LatticeError(f"value {v} outside [0,1]")
        object.__setattr__(self, "values", vals)

    @property
    def width(self) -> int:
        return len(self.values)

    @classmethod
    def constant(cls, c: float, width: int) -> "ValuePredicate":
        return cls((c,) * width)

    def __getitem__(self, i):
        return self.values[i]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def _check(self, other):
        if not isinstance(other, ValuePredicate) or other.width != self.width:
            raise LatticeError(f"incomparable predicates: {self!r} vs {other!r}")

    def __or__(self, other: "ValuePredicate") -> "ValuePredicate":
        self._check(other)
        return ValuePredicate(tuple(map(max, self.values, other.values)))

    def __and__(self, other: "ValuePredicate") -> "ValuePredicate":
        self._check(other)
        return ValuePredicate(tuple(map(min, self.values, other.values)))

    def le(self, other: "ValuePredicate") -> bool:
        self._check(other)
        return all(a <= b for a, b in zip(self.values, other.values))

    def distance(self, other: "ValuePredicate") -> float:
        self._check(other)
        return max((abs(a - b) for a, b in zip(self.values, other.values)), default=0.0)


Predicate = SetPredicate | ValuePredicate


@dataclass(frozen=True)
class LatticeContext:
    kind: str
    size: int
    tol: float = 0.0

    def __post_init__(self):
        if self.kind not in (SET, QUANT):
            raise LatticeError(f"unknown lattice kind {self.kind!r}")

    def bottom(self) -> Predicate:
        if self.kind == SET:
            return SetPredicate.empty(self.size)
        return ValuePredicate.constant(0.0, self.size)

    def top(self) -> Predicate:
        if self.kind == SET:
            return SetPredicate.full(self.size)
        return ValuePredicate.constant(1.0, self.size)

    def check(self, p) -> Predicate:
        want = SetPredicate if self.kind == SET else ValuePredicate
        if not isinstance(p, want) or p.width != self.size:
            raise LatticeError(f"predicate {p!r} does not belong to {self}")
        return p

    def join(self, items: Iterable[Predicate]) -> Predicate:
        out = self.bottom()
        for p in items:
            out = out | self.check(p)
        return out

    def meet(self, items: Iterable[Predicate]) -> Predicate:
        out = self.top()
        for p in items:
            out = out & self.check(p)
        return out

    def complement(self, p: Predicate) -> Predicate:
        if self.kind != SET:
            raise LatticeError("negation is only defined on set predicates")
        return self.check(p).complement()

    def combo(self, terms: Iterable[tuple[float, Predicate]]) -> Predicate:
        if self.kind != QUANT:
            raise LatticeError("subconvex combinations need a quantitative lattice")
        terms = list(terms)
        check_coefficients(c for c, _ in terms)
        acc = [0.0] * self.size
        for c, p in terms:
            for i, v in enumerate(self.check(p).values):
                acc[i] += c * v
        # rounding can push a sum with total weight 1 a hair above 1
        return ValuePredicate(tuple(min(v, 1.0) for v in acc))


def check_coefficients(coeffs: Iterable[float]) -> None:
    total = 0.0
    for c in coeffs:
        if not 0.0 <= c <= 1.0:
            raise LatticeError(f"coefficient {c} outside [0,1]")
        total += c
    if total > 1.0 + COEFF_SLACK:
        raise LatticeError(f"coefficients sum to {total} > 1")


# -- lattice expressions ---------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    key: Hashable


@dataclass(frozen=True)
class TopTerm:
    pass


@dataclass(frozen=True)
class BottomTerm:
    pass


@dataclass(frozen=True)
class JoinTerm:
    items: tuple


@dataclass(frozen=True)
class MeetTerm:
    items: tuple


@dataclass(frozen=True)
class NotTerm:
    item: object


@dataclass(frozen=True)
class ComboTerm:
    terms: tuple  # ((coefficient, term), ...)


def eval_lattice_term(term, env, ctx: LatticeContext, other: Callable | None = None) -> Predicate:
    """Evaluate a lattice expression pointwise.

    ``env`` maps leaf keys to predicates (a mapping or a callable).  Node
    types not known here are handed to ``other(node, recurse)``.
    """
    lookup = env if callable(env) else env.__getitem__

    def ev(t):
        if isinstance(t, Leaf):
            try:
                return ctx.check(lookup(t.key))
            except KeyError:
                raise LatticeError(f"unbound leaf {t.key!r}") from None
        if isinstance(t, TopTerm):
            return ctx.top()
        if isinstance(t, BottomTerm):
            return ctx.bottom()
        if isinstance(t, JoinTerm):
            return ctx.join(ev(x) for x in t.items)
        if isinstance(t, MeetTerm):
            return ctx.meet(ev(x) for x in t.items)
        if isinstance(t, NotTerm):
            return ctx.complement(ev(t.item))
        if isinstance(t, ComboTerm):
            return ctx.combo((c, ev(x)) for c, x in t.terms)
        if other is not None:
            return ctx.check(other(t, ev))
        raise LatticeError(f"unknown lattice term {t!r}")

    return ev(term)


# -- tables ----------------------------------------------------------------


class Table(Mapping):
    """An immutable, ordered map from keys to predicates of one context."""

    __slots__ = ("ctx", "_entries")

    def __init__(self, ctx: LatticeContext, entries: Mapping | Iterable = ()):
        self.ctx = ctx
        self._entries = dict(entries)
        for p in self._entries.values():
            ctx.check(p)

    @classmethod
    def bottom(cls, ctx, keys) -> "Table":
        b = ctx.bottom()
        return cls(ctx, ((k, b) for k in keys))

    @classmethod
    def top(cls, ctx, keys) -> "Table":
        t = ctx.top()
        return cls(ctx, ((k, t) for k in keys))

    def __getitem__(self, key):
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        if not isinstance(other, Table):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self):
        return f"Table({self._entries!r})"

    def _same_keys(self, other):
        if self._entries.keys() != other._entries.keys():
            raise LatticeError("tables have different keys")

    def le(self, other: "Table") -> bool:
        self._same_keys(other)
        return all(p.le(other[k]) for k, p in self._entries.items())

    def first_decrease(self, other: "Table"):
        """First key where ``other`` is not above ``self``, or None."""
        self._same_keys(other)
        for k, p in self._entries.items():
            if not p.le(other[k]):
                return k
        return None

    def first_increase(self, other: "Table"):
        self._same_keys(other)
        for k, p in self._entries.items():
            if not other[k].le(p):
                return k
        return None

    def distance(self, other: "Table") -> float:
        self._same_keys(other)
        if self.ctx.kind == SET:
            return 0.0 if self == other else 1.0
        return max((p.distance(other[k]) for k, p in self._entries.items()), default=0.0)


# -- Kleene iteration ------------------------------------------------------


class FixpointRun(NamedTuple):
    table: Table
    iterations: int
    residual: float = 0.0


@dataclass
class KleeneChain:
    ctx: LatticeContext
    bound: int | None
    descending: bool = False
    iterates: list = field(default_factory=list)


class ChainLog:
    """Collects every Kleene chain run while it is attached to an evaluation."""

    def __init__(self):
        self.chains: list[KleeneChain] = []

    def start(self, ctx, bound, descending=False) -> KleeneChain:
        chain = KleeneChain(ctx, bound, descending)
        self.chains.append(chain)
        return chain


def finite_bound(ctx: LatticeContext, keys) -> int:
    return ctx.size * len(keys) + 1


def lfp_finite(op: Callable[[Table], Table], ctx: LatticeContext, keys, start: Table | None = None,
               log: ChainLog | None = None) -> FixpointRun:
    """Least fixpoint of a monotone table operator on a powerset lattice.

    Iterates from the bottom table (or from ``start``, which must be a
    post-fixpoint) and raises if an iterate decreases.
    """
    if ctx.kind != SET:
        raise LatticeError("lfp_finite needs a set lattice; use lfp_approx")
    keys = list(keys)
    bound = finite_bound(ctx, keys)
    cur = Table.bottom(ctx, keys) if start is None else start
    chain = log.start(ctx, bound) if log is not None else None
    if chain is not None:
        chain.iterates.append(cur)
    for i in range(1, bound + 1):
        nxt = op(cur)
        if chain is not None:
            chain.iterates.append(nxt)
        bad = cur.first_decrease(nxt)
        if bad is not None:
            raise NonMonotoneError(bad, i)
        if nxt == cur:
            return FixpointRun(cur, i)
        cur = nxt
    raise IterationBoundError(f"Kleene chain exceeded {bound} iterations")


def lfp_approx(op: Callable[[Table], Table], ctx: LatticeContext, keys, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER, log: ChainLog | None = None) -> FixpointRun:
    """Ascending Kleene iteration on ``[0,1]``-valued tables.

    Stops at the first iterate whose sup-norm step to its successor is below
    ``tol`` and returns that successor.
    """
    if ctx.kind != QUANT:
        raise LatticeError("lfp_approx needs a quantitative lattice")
    if not tol > 0:
        raise LatticeError("tolerance must be positive")
    keys = list(keys)
    cur = Table.bottom(ctx, keys)
    chain = log.start(ctx, None) if log is not None else None
    if chain is not None:
        chain.iterates.append(cur)
    residual = float("inf")
    for i in range(1, max_iter + 1):
        nxt = op(cur)
        if chain is not None:
            chain.iterates.append(nxt)
        bad = cur.first_decrease(nxt)
        if bad is not None:
            raise NonMonotoneError(bad, i)
        residual = cur.distance(nxt)
        if residual < tol:
            return FixpointRun(nxt, i, residual)
        cur = nxt
    raise ConvergenceError(cur, residual, max_iter)


def gfp_descend(op: Callable[[Table], Table], ctx: LatticeContext, keys, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER, log: ChainLog | None = None) -> FixpointRun:
    """Greatest fixpoint by descending iteration from the top table."""
    keys = list(keys)
    bound = finite_bound(ctx, keys) if ctx.kind == SET else max_iter
    cur = Table.top(ctx, keys)
    chain = log.start(ctx, bound if ctx.kind == SET else None, descending=True) if log is not None else None
    if chain is not None:
        chain.iterates.append(cur)
    residual = float("inf")
    for i in range(1, bound + 1):
        nxt = op(cur)
        if chain is not None:
            chain.iterates.append(nxt)
        bad = cur.first_increase(nxt)
        if bad is not None:
            raise NonMonotoneError(bad, i)
        if ctx.kind == SET:
            if nxt == cur:
                return FixpointRun(cur, i)
        else:
            residual = cur.distance(nxt)
            if residual < tol:
                return FixpointRun(nxt, i, residual)
        cur = nxt
    if ctx.kind == SET:
        raise IterationBoundError(f"descending chain exceeded {bound} iterations")
    raise ConvergenceError(cur, residual, max_iter)
