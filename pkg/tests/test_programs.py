import itertools

import numpy as np
import pytest

from cofix.generators import random_labeled, random_program, rng_for
from cofix.lexer import ParseError
from cofix.models import load_model
from cofix.oracles import pdl_relation
from cofix.programs import (
    EMPTY, EPS, Atomic, Empty, Seq, Star, Union, atoms, canonicalize, derivative, derivative_closure,
    normal_form, nullable, parse_program, show, size,
)

from .conftest import M2

P = parse_program
ALPHABET = ("a", "b", "c")


def matches(p, w):
    """Bounded word membership by brute-force splitting."""
    if isinstance(p, Atomic):
        return w == (p.name,)
    if isinstance(p, type(EPS)):
        return w == ()
    if isinstance(p, Empty):
        return False
    if isinstance(p, Union):
        return any(matches(x, w) for x in p.items)
    if isinstance(p, Seq):
        head, rest = p.items[0], p.items[1:]
        tail = rest[0] if len(rest) == 1 else Seq(rest)
        return any(matches(head, w[:i]) and matches(tail, w[i:]) for i in range(len(w) + 1))
    if isinstance(p, Star):
        if w == ():
            return True
        return any(matches(p.child, w[:i]) and matches(p, w[i:]) for i in range(1, len(w) + 1))
    raise TypeError(p)


def words(alphabet, n):
    for k in range(n + 1):
        yield from itertools.product(alphabet, repeat=k)


def test_parse_and_show():
    assert P("a;b*") == Seq((Atomic("a"), Star(Atomic("b"))))
    assert P("a + b;c") == Union((Atomic("a"), Seq((Atomic("b"), Atomic("c")))))
    assert show(P("(a;b)*")) == "(a;b)*"
    assert show(P("a;(b + c)")) == "a;(b + c)"
    for text in ["", "a +", "(a", "a b", "*"]:
        with pytest.raises(ParseError):
            P(text)


@pytest.mark.parametrize("src, out", [
    ("a+a", "a"),
    ("(a+b)+a", "a + b"),
    ("eps;a", "a"),
    ("a;eps", "a"),
    ("eps*", "eps"),
    ("(a*)*", "a*"),
    ("b+a", "a + b"),
])
def test_canonicalize_examples(src, out):
    assert show(canonicalize(P(src))) == out


def test_canonicalize_annihilator():
    assert canonicalize(Seq((Atomic("a"), EMPTY))) == EMPTY
    assert canonicalize(Union((EMPTY, Atomic("a")))) == Atomic("a")
    assert canonicalize(Star(EMPTY)) == EPS


def test_nullable_examples():
    assert nullable(EPS)
    assert not nullable(Atomic("a"))
    assert nullable(P("(a;b*)*"))
    assert not nullable(EMPTY)


def test_derivative_examples():
    assert derivative("a", P("a;b")) == Atomic("b")
    assert derivative("a", P("a*")) == P("a*")
    assert derivative("b", Atomic("a")) == EMPTY


def test_normal_form_examples():
    nf = normal_form(P("a*"))
    assert nf.summands == (("a", P("a*")),) and nf.eps
    assert nf.show() == "a;a* + eps"
    nf = normal_form(P("a+b"))
    assert nf.summands == (("a", EPS), ("b", EPS)) and not nf.eps
    nf = normal_form(EPS)
    assert nf.summands == () and nf.eps and nf.show() == "eps"
    assert normal_form(P("(a;b)*")).show() == "a;(b;(a;b)*) + eps"


def test_derivative_word_property():
    rng = rng_for(5)
    for _ in range(300):
        p = random_program(rng, ALPHABET, max_ops=8)
        for w in words(ALPHABET, 4):
            d = p
            for a in w:
                d = derivative(a, d)
            assert matches(canonicalize(p), w) == nullable(d), (show(p), w)


def test_canonicalize_idempotent_and_same_language():
    rng = rng_for(6)
    for _ in range(300):
        p = random_program(rng, ALPHABET)
        c = canonicalize(p)
        assert canonicalize(c) == c
        for w in words(ALPHABET, 3):
            assert matches(p, w) == matches(c, w)


def test_derivative_closure_is_finite():
    rng = rng_for(8)
    for _ in range(300):
        p = random_program(rng, ALPHABET, max_ops=8)
        closure = derivative_closure(p)
        assert len(closure) <= 2 ** size(p)
        assert all(not isinstance(q, Empty) for q in closure)


def test_normal_form_relationally_equivalent():
    rng = rng_for(9)
    for _ in range(200):
        m = random_labeled(rng, labels=ALPHABET)
        p = random_program(rng, ALPHABET)
        nf = normal_form(p)
        assert nf.eps == nullable(p)
        assert all(not isinstance(t, Empty) for _, t in nf.summands)
        assert np.array_equal(pdl_relation(m, nf.expand()), pdl_relation(m, p)), show(p)
        assert np.array_equal(pdl_relation(m, canonicalize(p)), pdl_relation(m, p))


def test_fixture_relation():
    m2 = load_model(M2)
    rel = pdl_relation(m2, P("a;b"))
    assert {tuple(x) for x in np.argwhere(rel)} == {(0, 2)}


def test_atoms_and_size():
    p = P("a;(b + a)*")
    assert atoms(p) == {"a", "b"}
    assert size(p) >= 3
