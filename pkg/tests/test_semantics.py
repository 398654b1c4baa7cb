import random

import pytest

from cofix.generators import (
    LABELS, PROPS, random_congruent_pair, random_formula, random_kripke, random_labeled, random_prob,
    random_scheme, rng_for,
)
from cofix.lattice import ChainLog, ComboTerm, JoinTerm, Leaf, SetPredicate, Table, ValuePredicate
from cofix.models import KRIPKE, LABELED, PROB, SignatureMismatch, StateMap, identity_map, load_model
from cofix.oracles import cfl_oracle, reach_oracle
from cofix.programs import parse_program
from cofix.schemes import Step, dualize
from cofix.semantics import (
    ClosureCapError, NotAMorphism, LeastSystem, SemanticsError, check_invariance, compute_closure, eval_initial,
    eval_least, interpret_modal, random_fixpoint_above, unfold,
)
from cofix.syntax import (
    DSTAR, Atom, Fix, FixpointScheme, Flat, Neg, ProgramDiamond, Sharp, SigmaQ, cfl_logic, diamondstar_logic,
    parse_formula, pdl_logic, quant_logic, show,
)

from .conftest import M1, M2

DS = diamondstar_logic(PROPS)
PD = pdl_logic(LABELS, PROPS)
QU = quant_logic(PROPS)
CF = cfl_logic(PROPS)
p = Atom("p")


def names(model, pred):
    return {model.states[i] for i in pred.members()}


def test_unfold_examples():
    ds = Fix(DSTAR, (p,))
    assert unfold(ds) == JoinTerm((Leaf(p), Step("dia", (Leaf(ds),))))
    star = Fix(ProgramDiamond(parse_program("a*")), (p,))
    assert unfold(star) == JoinTerm((Step("dia", (Leaf(star),), label="a"), Leaf(p)))
    sq = Fix(SigmaQ(0.5), (p,))
    assert unfold(sq) == ComboTerm(((0.5, Leaf(p)), (0.5, Step("dia", (Leaf(sq),)))))
    with pytest.raises(SemanticsError):
        unfold(p)


def test_closure_examples():
    ds = Fix(DSTAR, (p,))
    assert set(compute_closure(ds).keys) == {ds, p}
    loop = parse_formula("<(a;b)*>p", PD)
    tail = parse_formula("<b;(a;b)*>p", PD)
    assert set(compute_closure(loop).keys) == {loop, tail, p}
    assert compute_closure(p).keys == (p,)


def test_closure_is_deterministic():
    f = parse_formula(r"<(a + b)*;c>(dia* p) /\ <a>q", pdl_logic(LABELS, PROPS), check=False)
    assert compute_closure(f).keys == compute_closure(f).keys


def test_closure_cap_names_family():
    f = parse_formula("<(a;b)*;(a + c)*>p", PD)
    with pytest.raises(ClosureCapError, match="program"):
        compute_closure(f, cap=3)


def test_interpret_modal_examples(m1, mq):
    two = SetPredicate.from_members([2], 3)
    assert names(m1, interpret_modal(m1, "dia", [two])) == {"s1", "s2"}
    assert interpret_modal(m1, "dia", [SetPredicate.empty(3)]) == SetPredicate.empty(3)
    assert interpret_modal(m1, "box", [SetPredicate.empty(3)]) == SetPredicate.empty(3)
    assert interpret_modal(mq, "dia", [ValuePredicate((0.0, 1.0))]).values == (1.0, 0.0)
    with pytest.raises(SemanticsError):
        interpret_modal(mq, "box", [ValuePredicate((0.0, 1.0))])


def test_interpret_modal_labeled_and_custom(m2):
    one = SetPredicate.from_members([1], 3)
    assert interpret_modal(m2, "dia", [one], label="a").members() == {0}
    with pytest.raises(SemanticsError):
        interpret_modal(m2, "dia", [one])
    # a custom monotone lifting: at least two successors in the argument
    inst = cfl_logic(PROPS, {"two": 1}, liftings={"two": lambda succ, u: len(succ & u) >= 2})
    m = load_model({"kind": "kripke", "states": ["a", "b", "c"], "succ": {"a": ["b", "c"], "b": ["c"]}})
    out = interpret_modal(m, "two", [SetPredicate.full(3)], instance=inst)
    assert out.members() == {0}


def test_fixture_values(m1, m2, mq, mq2):
    for ev in (eval_least, eval_initial):
        assert names(m1, ev(m1, parse_formula("dia* p", DS), DS).value) == {"s0", "s1", "s2"}
        assert ev(m1, parse_formula("dia* F", DS), DS).value.members() == frozenset()
        assert names(m2, ev(m2, parse_formula("<a;b>p", PD), PD).value) == {"t0"}
        assert ev(mq, parse_formula("sigma[0.5] p", QU), QU, tol=1e-12).value.values == pytest.approx(
            (0.25, 0.5), abs=1e-9)
        assert ev(mq2, parse_formula("dia* p", QU), QU, tol=1e-12).value.values == pytest.approx(
            (0.4, 0.8), abs=1e-6)
        assert ev(mq, parse_formula("dia* p", QU), QU).value.values == pytest.approx((1.0, 1.0))
    assert eval_initial(m1, parse_formula("~dia* p", DS), DS).value.members() == frozenset()
    assert eval_least(m1, parse_formula("~dia* p", DS), DS).value.members() == frozenset()


def test_flat_nodes(m1):
    f = parse_formula("gfp{dia X}()", CF)
    for mode in ("dual", "descend"):
        assert eval_initial(m1, f, CF, flat_mode=mode).value.members() == {0, 1, 2}
    assert eval_least(m1, f, CF).value.members() == {0, 1, 2}
    # always p along some path: only the s2 loop qualifies
    g = parse_formula(r"gfp{p /\ dia X}()", CF)
    assert eval_initial(m1, g, CF, flat_mode="descend").value.members() == {2}


def test_wrong_model_kind(m1):
    with pytest.raises(SignatureMismatch):
        eval_least(m1, parse_formula("sigma[0.5] p", QU), QU)


def _model(rng, kind):
    if kind == LABELED:
        return random_labeled(rng, labels=LABELS)
    if kind == PROB:
        return random_prob(rng)
    return random_kripke(rng)


CASES = [(DS, KRIPKE), (PD, LABELED), (CF, KRIPKE), (QU, PROB)]


@pytest.mark.parametrize("inst, kind", CASES, ids=[c[0].id for c in CASES])
def test_least_equals_initial(inst, kind):
    rng = rng_for(31)
    for _ in range(120):
        m = _model(rng, kind)
        f = random_formula(rng, inst, depth=3)
        a = eval_least(m, f, inst, tol=1e-10).value
        b = eval_initial(m, f, inst, tol=1e-10).value
        if kind == PROB:
            assert a.distance(b) <= 2e-6, show(f)
        else:
            assert a == b, show(f)


@pytest.mark.parametrize("inst, kind", CASES[:3], ids=[c[0].id for c in CASES[:3]])
def test_fixpoint_property_and_minimality(inst, kind):
    rng = rng_for(32)
    for _ in range(80):
        m = _model(rng, kind)
        f = random_formula(rng, inst, depth=3)
        system = LeastSystem(m, f, inst)
        least = system.solve().table
        assert system.op(least) == least
        assert least.le(random_fixpoint_above(system, rng))
        # any pre-fixpoint reached by climbing from a random table also dominates
        n = m.size
        cur = Table(system.ctx, {k: SetPredicate(rng.getrandbits(n), n) for k in system.keys})
        while True:
            nxt = Table(system.ctx, {k: cur[k] | v for k, v in system.op(cur).items()})
            if nxt == cur:
                break
            cur = nxt
        assert system.op(cur).le(cur) and least.le(cur)


def test_quant_fixpoint_residual():
    rng = rng_for(33)
    for _ in range(50):
        m = random_prob(rng)
        f = random_formula(rng, QU, depth=3)
        system = LeastSystem(m, f, QU, tol=1e-10)
        res = system.solve()
        assert system.op(res.table).distance(res.table) < 1e-9


@pytest.mark.parametrize("inst, kind", CASES, ids=[c[0].id for c in CASES])
def test_operator_is_monotone(inst, kind):
    rng = rng_for(34)
    for _ in range(60):
        m = _model(rng, kind)
        f = random_formula(rng, inst, depth=3)
        system = LeastSystem(m, f, inst)
        n = m.size
        if kind == PROB:
            lo = {k: ValuePredicate(tuple(rng.random() for _ in range(n))) for k in system.keys}
            hi = {k: ValuePredicate(tuple(min(1.0, x + rng.random() * 0.3) for x in v)) for k, v in lo.items()}
        else:
            lo = {k: SetPredicate(rng.getrandbits(n), n) for k in system.keys}
            hi = {k: SetPredicate(v.bits | rng.getrandbits(n), n) for k, v in lo.items()}
        a, b = Table(system.ctx, lo), Table(system.ctx, hi)
        assert system.op(a).le(system.op(b))


def test_liftings_are_monotone():
    rng = random.Random(35)
    for _ in range(200):
        k = random_kripke(rng)
        lab = random_labeled(rng, labels=LABELS)
        pr = random_prob(rng)
        for m, label in ((k, None), (lab, rng.choice(LABELS))):
            n = m.size
            lo = SetPredicate(rng.getrandbits(n), n)
            hi = SetPredicate(lo.bits | rng.getrandbits(n), n)
            for mod in ("dia", "box"):
                assert interpret_modal(m, mod, [lo], label).le(interpret_modal(m, mod, [hi], label))
        lo = ValuePredicate(tuple(rng.random() * 0.5 for _ in range(pr.size)))
        hi = ValuePredicate(tuple(x + rng.random() * 0.5 for x in lo))
        assert interpret_modal(pr, "dia", [lo]).le(interpret_modal(pr, "dia", [hi]))


def test_ascending_chains_logged(m1):
    log = ChainLog()
    eval_least(m1, parse_formula(r"dia* p /\ ~dia* q", DS), DS, log=log)
    assert len(log.chains) >= 2
    for chain in log.chains:
        assert all(a.le(b) for a, b in zip(chain.iterates, chain.iterates[1:]))


def test_invariance_examples(m1, loops):
    assert check_invariance(identity_map(m1), parse_formula("dia* p", DS), DS)
    proj = StateMap(loops, load_model({"kind": "kripke", "states": ["a"], "succ": {"a": ["a"]},
                                       "props": {"p": ["a"]}}), (0, 0))
    v = check_invariance(proj, parse_formula("dia* p", DS), DS)
    assert v.ok and v.checked == 2
    with pytest.raises(NotAMorphism) as info:
        check_invariance(StateMap(m1, m1, (0, 2, 2)), parse_formula("dia* p", DS), DS)
    assert info.value.verdict.state == "s1"


@pytest.mark.parametrize("inst, kind", CASES, ids=[c[0].id for c in CASES])
def test_invariance_on_quotients(inst, kind):
    rng = rng_for(36)
    for _ in range(40):
        big, small, proj = random_congruent_pair(rng, kind)
        if kind == LABELED:
            inst = pdl_logic(big.labels, PROPS)
        f = random_formula(rng, inst, depth=3, negation=kind != PROB)
        v = check_invariance(proj, f, inst)
        assert v.ok, (show(f), v.state)


def test_flat_modes_agree():
    rng = rng_for(37)
    count = 0
    for _ in range(200):
        m = random_kripke(rng)
        f = random_formula(rng, CF, depth=3, negation=True)
        a = eval_initial(m, f, CF, flat_mode="dual").value
        b = eval_initial(m, f, CF, flat_mode="descend").value
        assert a == b, show(f)
        assert a.members() == cfl_oracle(m, f, CF)
        count += "gfp" in show(f)
    assert count > 20


def test_flat_is_complement_of_dual_sharp():
    rng = rng_for(38)
    for _ in range(100):
        m = random_kripke(rng)
        head, s = random_scheme(rng, rng.randint(0, 2), 3, flat=True)
        args = tuple(Atom(rng.choice(PROPS)) for _ in s.params)
        flat = eval_initial(m, Fix(Flat(s), args), CF, flat_mode="descend").value
        dual = Fix(Sharp(dualize(s, CF)), tuple(Neg(a) for a in args))
        assert flat == eval_initial(m, dual, CF).value.complement()


def test_reach_matches_diamondstar():
    rng = rng_for(39)
    for _ in range(100):
        m = random_kripke(rng)
        phi = random_formula(rng, DS, depth=2)
        target = eval_least(m, phi, DS).value.members()
        assert eval_least(m, Fix(DSTAR, (phi,)), DS).value.members() == reach_oracle(m, target)
