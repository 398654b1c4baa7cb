"""Seeded random models, formulas, programs and schemes for property tests."""

from __future__ import annotations

import random

from . import programs as prg
from .models import KRIPKE, LABELED, PROB, KripkeModel, LabeledModel, ProbModel, quotient_by_kernel
from .syntax import (
    BOT, DSTAR, FIXVAR, TOP, And, Atom, Fix, FixpointScheme, Flat, LogicInstance, Mu, Neg, Nu, OneStep,
    Or, Param, ProgramDiamond, Sharp, SigmaQ, SubconvexSum, Var,
)

PROPS = ("p", "q", "r")
LABELS = ("a", "b", "c")


def rng_for(seed) -> random.Random:
    return random.Random(seed)


# -- models ----------------------------------------------------------------


def _names(prefix, n):
    return tuple(f"{prefix}{i}" for i in range(n))


def random_kripke(rng, n=None, props=PROPS, density=0.3) -> KripkeModel:
    n = n or rng.randint(1, 8)
    succ = tuple(frozenset(y for y in range(n) if rng.random() < density) for _ in range(n))
    valuation = {p: frozenset(x for x in range(n) if rng.random() < 0.4) for p in props}
    return KripkeModel(_names("s", n), valuation, succ)


def random_labeled(rng, n=None, labels=None, props=PROPS, density=0.3) -> LabeledModel:
    n = n or rng.randint(1, 8)
    labels = tuple(labels or LABELS[: rng.randint(1, 3)])
    succ = {a: tuple(frozenset(y for y in range(n) if rng.random() < density) for _ in range(n))
            for a in labels}
    valuation = {p: frozenset(x for x in range(n) if rng.random() < 0.4) for p in props}
    return LabeledModel(_names("t", n), valuation, labels, succ)


def _subdistribution(rng, n, max_mass):
    support = [y for y in range(n) if rng.random() < 0.4]
    if not support:
        return {}
    mass = rng.choice([max_mass, rng.uniform(0.0, max_mass)])
    raw = [rng.random() + 1e-3 for _ in support]
    total = sum(raw)
    return {y: mass * w / total for y, w in zip(support, raw)}


def random_prob(rng, n=None, payout_labels=("p",), max_mass=0.9) -> ProbModel:
    n = n or rng.randint(1, 10)
    step = tuple(_subdistribution(rng, n, max_mass) for _ in range(n))
    payout = {a: tuple(round(rng.random(), 3) if rng.random() < 0.6 else 0.0 for _ in range(n))
              for a in payout_labels}
    return ProbModel(_names("x", n), tuple(payout_labels), payout, step)


def random_model(rng, kind, **kw):
    return {KRIPKE: random_kripke, LABELED: random_labeled, PROB: random_prob}[kind](rng, **kw)


# -- congruent quotients ---------------------------------------------------


def random_congruent_pair(rng, kind, n=None):
    """A model with duplicated states, its kernel quotient and the projection.

    Each state of a random small model gets one to three copies; every copy
    reaches some copies of each original successor, so the kernel of the
    copy-to-original map is a congruence.
    """
    small = random_model(rng, kind, n=n or rng.randint(1, 4))
    copies = [list(range(rng.randint(1, 3))) for _ in range(small.size)]
    index = {}
    names = []
    for q, cs in enumerate(copies):
        for c in cs:
            index[(q, c)] = len(names)
            names.append(f"{small.states[q]}_{c}")
    big_n = len(names)
    owner = [None] * big_n
    for (q, c), i in index.items():
        owner[i] = q

    def some_copies(q):
        cs = copies[q]
        k = rng.randint(1, len(cs))
        return [index[(q, c)] for c in rng.sample(cs, k)]

    def lift_rows(rows):
        out = []
        for i in range(big_n):
            ys = set()
            for q2 in rows[owner[i]]:
                ys.update(some_copies(q2))
            out.append(frozenset(ys))
        return tuple(out)

    if kind == PROB:
        step = []
        for i in range(big_n):
            d = {}
            for q2, w in small.step[owner[i]].items():
                targets = some_copies(q2)
                cut = sorted(rng.random() for _ in range(len(targets) - 1))
                parts = [b - a for a, b in zip([0.0] + cut, cut + [1.0])]
                for t, share in zip(targets, parts):
                    d[t] = d.get(t, 0.0) + w * share
            step.append(d)
        payout = {a: tuple(small.payout[a][owner[i]] for i in range(big_n)) for a in small.payout_labels}
        big = ProbModel(tuple(names), small.payout_labels, payout, tuple(step))
    else:
        props = {p: frozenset(i for i in range(big_n) if owner[i] in xs) for p, xs in small.props.items()}
        if kind == KRIPKE:
            big = KripkeModel(tuple(names), props, lift_rows(small.succ))
        else:
            big = LabeledModel(tuple(names), props, small.labels,
                               {a: lift_rows(small.succ[a]) for a in small.labels})
    partition = [[names[index[(q, c)]] for c in cs] for q, cs in enumerate(copies)]
    quotient, proj = quotient_by_kernel(big, partition)
    return big, quotient, proj


# -- programs --------------------------------------------------------------


def random_program(rng, alphabet=LABELS, max_ops=8):
    """A program with at most ``max_ops`` operators (+, ;, *)."""
    ops = rng.randint(0, max_ops)

    def gen(budget):
        if budget == 0:
            return prg.EPS if rng.random() < 0.1 else prg.Atomic(rng.choice(alphabet))
        op = rng.choice("+;*")
        if op == "*":
            return prg.Star(gen(budget - 1))
        left = rng.randint(0, budget - 1)
        a, b = gen(left), gen(budget - 1 - left)
        return prg.Union((a, b)) if op == "+" else prg.Seq((a, b))

    return gen(ops)


# -- formulas --------------------------------------------------------------


class _Budget:
    def __init__(self, n):
        self.left = n

    def take(self):
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def _coefficients(rng, k):
    raw = [rng.random() for _ in range(k)]
    scale = rng.uniform(0.3, 1.0) / sum(raw)
    return [round(w * scale, 3) for w in raw]


def random_formula(rng, instance: LogicInstance, depth=3, max_fix=4, negation=False, props=PROPS,
                   alphabet=None, scheme_depth=2):
    """A valid formula of ``instance`` with at most ``max_fix`` fixpoint nodes."""
    budget = _Budget(max_fix)
    kind = instance.id
    alphabet = tuple(sorted(instance.programs)) if instance.programs else (alphabet or LABELS)

    def leaf():
        r = rng.random()
        if r < 0.08:
            return TOP
        if r < 0.14:
            return BOT
        return Atom(rng.choice(props))

    def gen(d):
        if d <= 0:
            return leaf()
        opts = ["leaf", "and", "or"]
        if kind in ("diamondstar", "cfl"):
            opts += ["dia", "box"]
        if kind == "quant":
            opts += ["dia", "sum"]
        if negation and kind != "quant":
            opts.append("neg")
        if budget.left > 0:
            opts += ["fix"] * 4
        op = rng.choice(opts)
        if op == "leaf":
            return leaf()
        if op == "and":
            return And(gen(d - 1), gen(d - 1))
        if op == "or":
            return Or(gen(d - 1), gen(d - 1))
        if op in ("dia", "box"):
            return OneStep(op, (gen(d - 1),))
        if op == "neg":
            return Neg(gen(d - 1))
        if op == "sum":
            k = rng.randint(1, 3)
            return SubconvexSum(tuple(zip(_coefficients(rng, k), (gen(d - 1) for _ in range(k)))))
        budget.take()
        if kind == "diamondstar":
            return Fix(DSTAR, (gen(d - 1),))
        if kind == "pdl":
            return Fix(ProgramDiamond(random_program(rng, alphabet, rng.randint(0, 4))), (gen(d - 1),))
        if kind == "quant":
            if rng.random() < 0.5:
                return Fix(DSTAR, (gen(d - 1),))
            return Fix(SigmaQ(rng.choice([0.0, 0.1, 0.5, 0.9, 1.0, round(rng.random(), 3)])), (gen(d - 1),))
        scheme = random_scheme(rng, rng.randint(0, 2), scheme_depth, props=props,
                               flat=negation and rng.random() < 0.4, budget=budget)
        return Fix(scheme[0], tuple(gen(d - 1) for _ in scheme[1].params))

    return gen(depth)


def random_scheme(rng, n_params, depth=2, props=PROPS, flat=False, budget=None, nested=True):
    """``(head, scheme)`` for a random guarded scheme; ``head`` is Sharp or Flat."""
    params = tuple(f"v{i}" for i in range(n_params))
    budget = budget or _Budget(2)

    def closed():
        r = rng.random()
        if r < 0.1:
            return TOP if rng.random() < 0.5 else BOT
        return Atom(rng.choice(props))

    def gen(d, guarded):
        opts = ["closed", "and", "or", "step", "step"]
        if params:
            opts += ["param", "param"]
        if guarded:
            opts += ["x", "x", "x"]
            if nested and budget.left > 0:
                opts.append("nested")
        if d <= 0:
            opts = [o for o in opts if o in ("closed", "param", "x")]
        op = rng.choice(opts)
        if op == "closed":
            return closed()
        if op == "param":
            return Param(rng.choice(params))
        if op == "x":
            return FIXVAR
        if op == "and":
            return And(gen(d - 1, guarded), gen(d - 1, guarded))
        if op == "or":
            return Or(gen(d - 1, guarded), gen(d - 1, guarded))
        if op == "step":
            return OneStep(rng.choice(("dia", "box")), (gen(d - 1, True),))
        budget.take()
        # a nested scheme of the same kind may depend on X; the other kind only on closed data
        same = rng.random() < 0.7
        inner_flat = flat if same else not flat
        head, sub = random_scheme(rng, rng.randint(0, 2), max(1, d - 1), props, inner_flat, budget, nested)
        if same:
            args = tuple(gen(d - 1, True) for _ in sub.params)
        else:
            args = tuple(closed() for _ in sub.params)
        return Fix(head, args)

    body = gen(depth, False)
    scheme = FixpointScheme(params, body)
    return (Flat(scheme) if flat else Sharp(scheme)), scheme


# -- mu-calculus -----------------------------------------------------------


def random_mu(rng, depth=5, props=PROPS, max_binders=3):
    """A guarded, alternation-free mu-calculus formula (negations on atoms only)."""
    budget = _Budget(max_binders)
    counter = iter(range(1000))

    def gen(d, env, kind):
        # env: var -> guarded?  kind: Mu/Nu of the innermost binder, or None
        opts = ["atom", "and", "or", "dia", "box", "neg"]
        usable = [v for v, g in env.items() if g]
        if usable:
            opts += ["var"] * 3
        if budget.left > 0 and d > 1:
            opts += ["bind"] * 3
        if d <= 0:
            opts = ["atom", "atom", "neg"] + (["var"] * 4 if usable else [])
        op = "bind" if kind is None and budget.left == max_binders else rng.choice(opts)
        if op == "atom":
            return Atom(rng.choice(props))
        if op == "neg":
            return Neg(Atom(rng.choice(props)))
        if op == "var":
            return Var(rng.choice(usable))
        if op == "and":
            return And(gen(d - 1, env, kind), gen(d - 1, env, kind))
        if op == "or":
            return Or(gen(d - 1, env, kind), gen(d - 1, env, kind))
        if op in ("dia", "box"):
            return OneStep(op, (gen(d - 1, {v: True for v in env}, kind),))
        budget.take()
        new_kind = rng.choice((Mu, Nu)) if kind is None or rng.random() < 0.3 else kind
        var = f"X{next(counter)}"
        # switching fixpoint kind: the inner binder may not see outer variables
        inner_env = dict(env) if new_kind is kind else {}
        inner_env[var] = False
        return new_kind(var, gen(d - 1, inner_env, new_kind))

    return gen(depth, {}, None)
