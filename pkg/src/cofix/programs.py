"""Test-free PDL programs: canonical forms, Brzozowski derivatives, normal form.

Surface syntax: ``a``, ``eps``, ``p + q`` (choice), ``p;q`` (sequence),
``p*`` (iteration); ``*`` binds tighter than ``;`` which binds tighter than
``+``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .lexer import ParseError, TokenStream, describe, tokenize


@dataclass(frozen=True)
class Atomic:
    name: str


@dataclass(frozen=True)
class Eps:
    pass


@dataclass(frozen=True)
class Empty:
    """The program with no runs; only produced by derivatives."""


@dataclass(frozen=True)
class Union:
    items: tuple


@dataclass(frozen=True)
class Seq:
    items: tuple


@dataclass(frozen=True)
class Star:
    child: object


Program = Atomic | Eps | Empty | Union | Seq | Star

EPS = Eps()
EMPTY = Empty()


# -- printing / parsing ----------------------------------------------------


def show(p) -> str:
    if isinstance(p, Atomic):
        return p.name
    if isinstance(p, Eps):
        return "eps"
    if isinstance(p, Empty):
        return "0"
    if isinstance(p, Union):
        return " + ".join(f"({show(x)})" if isinstance(x, Union) else show(x) for x in p.items)
    if isinstance(p, Seq):
        return ";".join(f"({show(x)})" if isinstance(x, (Union, Seq)) else show(x) for x in p.items)
    if isinstance(p, Star):
        c = p.child
        inner = show(c) if isinstance(c, (Atomic, Eps, Empty, Star)) else f"({show(c)})"
        return inner + "*"
    raise TypeError(f"not a program: {p!r}")


KEYWORD_EPS = "eps"


def parse_program_tokens(ts: TokenStream):
    """Parse a program from a token stream, leaving the stream after it."""

    def union():
        items = [seq()]
        while ts.accept("+"):
            items.append(seq())
        return items[0] if len(items) == 1 else Union(tuple(items))

    def seq():
        items = [postfix()]
        while ts.accept(";"):
            items.append(postfix())
        return items[0] if len(items) == 1 else Seq(tuple(items))

    def postfix():
        p = primary()
        while ts.accept("*"):
            p = Star(p)
        return p

    def primary():
        tok = ts.peek()
        if ts.accept("("):
            p = union()
            ts.expect(")")
            return p
        if tok.kind == "ident":
            ts.take()
            return EPS if tok.text == KEYWORD_EPS else Atomic(tok.text)
        raise ParseError(f"unexpected {describe(tok)}", tok.pos, ["program"])

    return union()


def parse_program(text: str):
    ts = TokenStream(tokenize(text))
    p = parse_program_tokens(ts)
    if ts.peek().kind != "end":
        tok = ts.peek()
        raise ParseError(f"unexpected {describe(tok)}", tok.pos, ["end of input"])
    return p


# -- algebra ---------------------------------------------------------------


def atoms(p) -> frozenset:
    if isinstance(p, Atomic):
        return frozenset([p.name])
    if isinstance(p, (Union, Seq)):
        return frozenset().union(*(atoms(x) for x in p.items))
    if isinstance(p, Star):
        return atoms(p.child)
    return frozenset()


def size(p) -> int:
    """Number of nodes."""
    if isinstance(p, (Union, Seq)):
        return 1 + sum(size(x) for x in p.items)
    if isinstance(p, Star):
        return 1 + size(p.child)
    return 1


def _sort_key(p):
    return show(p)


def _union(items):
    flat = []
    for x in items:
        if isinstance(x, Union):
            flat.extend(x.items)
        elif not isinstance(x, Empty):
            flat.append(x)
    uniq = sorted(set(flat), key=_sort_key)
    if not uniq:
        return EMPTY
    if len(uniq) == 1:
        return uniq[0]
    return Union(tuple(uniq))


def _seq(items):
    flat = []
    for x in items:
        if isinstance(x, Empty):
            return EMPTY
        if isinstance(x, Seq):
            flat.extend(x.items)
        elif not isinstance(x, Eps):
            flat.append(x)
    if not flat:
        return EPS
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def _star(c):
    if isinstance(c, (Empty, Eps)):
        return EPS
    if isinstance(c, Star):
        return c
    return Star(c)


def canonicalize(p):
    """ACI for choice, flattening, units and annihilators, star collapse."""
    if isinstance(p, (Atomic, Eps, Empty)):
        return p
    if isinstance(p, Union):
        return _union(canonicalize(x) for x in p.items)
    if isinstance(p, Seq):
        return _seq([canonicalize(x) for x in p.items])
    if isinstance(p, Star):
        return _star(canonicalize(p.child))
    raise TypeError(f"not a program: {p!r}")


def nullable(p) -> bool:
    if isinstance(p, (Eps, Star)):
        return True
    if isinstance(p, (Atomic, Empty)):
        return False
    if isinstance(p, Union):
        return any(nullable(x) for x in p.items)
    if isinstance(p, Seq):
        return all(nullable(x) for x in p.items)
    raise TypeError(f"not a program: {p!r}")


def _deriv(a, p):
    if isinstance(p, Atomic):
        return EPS if p.name == a else EMPTY
    if isinstance(p, (Eps, Empty)):
        return EMPTY
    if isinstance(p, Union):
        return _union(_deriv(a, x) for x in p.items)
    if isinstance(p, Seq):
        head, rest = p.items[0], _seq(p.items[1:])
        first = _seq([_deriv(a, head), rest])
        if nullable(head):
            return _union([first, _deriv(a, rest)])
        return first
    if isinstance(p, Star):
        return _seq([_deriv(a, p.child), p])
    raise TypeError(f"not a program: {p!r}")


def derivative(a: str, p):
    """Residual of ``p`` after one ``a``-step, canonicalized."""
    return canonicalize(_deriv(a, canonicalize(p)))


class NormalForm(NamedTuple):
    summands: tuple  # ((atomic name, tail program), ...)
    eps: bool

    def show(self) -> str:
        parts = []
        for a, tail in self.summands:
            t = show(tail)
            if isinstance(tail, (Seq, Union)):
                t = f"({t})"
            parts.append(f"{a};{t}")
        if self.eps:
            parts.append("eps")
        return " + ".join(parts) if parts else "0"

    def expand(self):
        """The normal form as a program in its own right."""
        items = [Seq((Atomic(a), tail)) for a, tail in self.summands]
        if self.eps:
            items.append(EPS)
        if not items:
            return EMPTY
        return items[0] if len(items) == 1 else Union(tuple(items))


def normal_form(p) -> NormalForm:
    summands = []
    for a in sorted(atoms(p)):
        d = derivative(a, p)
        if not isinstance(d, Empty):
            summands.append((a, d))
    return NormalForm(tuple(summands), nullable(p))


def derivative_closure(p, limit: int = 100_000) -> list:
    """All canonical programs reachable from ``p`` by derivatives (Empty excluded)."""
    start = canonicalize(p)
    alphabet = sorted(atoms(start))
    seen = {start: None}
    work = [start]
    while work:
        q = work.pop()
        for a in alphabet:
            d = derivative(a, q)
            if not isinstance(d, Empty) and d not in seen:
                if len(seen) >= limit:
                    raise RuntimeError(f"derivative closure of {show(p)} exceeds {limit} programs")
                seen[d] = None
                work.append(d)
    return list(seen)
