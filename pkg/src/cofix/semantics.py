"""Evaluation of formulas over finite models.

Two independent routes:

* ``eval_least`` computes one simultaneous least fixpoint over the closure
  table, every fixpoint formula read through its unfolding.
* ``eval_initial`` folds over the formula tree; each fixpoint node first
  evaluates its arguments and then runs its own inner fixpoint.

Negation and greatest-fixpoint schemes sit outside the equations: they are
evaluated in their own run and enter the table as constants.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from typing import NamedTuple

from . import programs as prg
from .lattice import (
    DEFAULT_TOL, SET, BottomTerm, ChainLog, ComboTerm, JoinTerm, LatticeContext, LatticeError, Leaf,
    MeetTerm, NotTerm, SetPredicate, Table, ValuePredicate, eval_lattice_term, gfp_descend, lfp_approx,
    lfp_finite,
)
from .models import KRIPKE, LABELED, PROB, ModelError, SignatureMismatch, StateMap, check_morphism
from .schemes import Step, dualize, substitute
from .syntax import (
    CFL, DIAMONDSTAR, PDL, QUANT as QUANT_ID, And, Atom, Bot, DiamondStar, Fix, FixpointScheme, Flat,
    LogicInstance, Neg, OneStep, Or, ProgramDiamond, Sharp, SigmaQ, SubconvexSum, Top, cfl_logic,
    children, is_least, map_programs, pdl_logic, quant_logic, show,
)

DEFAULT_CAP = 10_000


class SemanticsError(ValueError):
    pass


class ClosureCapError(SemanticsError):
    pass


class NegationError(SemanticsError):
    pass


class NotAMorphism(SemanticsError):
    def __init__(self, verdict):
        super().__init__(f"not a morphism at state {verdict.state!r}: {verdict.reason} ({verdict.detail})")
        self.verdict = verdict


@dataclass(frozen=True)
class Const:
    """A predicate standing in for an already evaluated argument."""

    value: object


# -- instances and models --------------------------------------------------

_MODEL_KIND = {DIAMONDSTAR: KRIPKE, CFL: KRIPKE, PDL: LABELED, QUANT_ID: PROB}


def default_instance(model) -> LogicInstance:
    if model.kind == KRIPKE:
        return cfl_logic()
    if model.kind == LABELED:
        return pdl_logic(model.labels)
    return quant_logic()


def check_compatible(model, instance: LogicInstance):
    want = _MODEL_KIND[instance.id]
    if model.kind != want:
        raise SignatureMismatch(f"the {instance.id} logic is interpreted over {want} models, not {model.kind}")


def context_for(model, tol=DEFAULT_TOL) -> LatticeContext:
    return model.context(tol) if model.kind == PROB else model.context()


# -- one-step layer --------------------------------------------------------


def interpret_modal(model, modality: str, args, label=None, instance: LogicInstance | None = None):
    """Pull a one-step modality back along the model's transition structure."""
    ctx = context_for(model)
    args = [ctx.check(a) for a in args]
    n = model.size
    if model.kind == PROB:
        if modality != "dia" or len(args) != 1:
            raise SemanticsError(f"probabilistic models interpret only unary dia, not {modality!r}")
        u = args[0]
        return ValuePredicate(tuple(min(1.0, sum(w * u[y] for y, w in model.step[x].items())) for x in range(n)))
    if model.kind == LABELED:
        if label is None:
            raise SemanticsError("labeled models need an action label for one-step modalities")
        rows = model.succ_bits.get(label)
        if rows is None:
            raise ModelError(f"unknown label {label!r}")
    else:
        if label is not None:
            raise SemanticsError("Kripke models have no action labels")
        rows = model.succ_bits
    if modality in ("dia", "box") and len(args) == 1:
        bits = args[0].bits
        if modality == "dia":
            out = [x for x in range(n) if rows[x] & bits]
        else:
            out = [x for x in range(n) if rows[x] & ~bits == 0]
        return SetPredicate.from_members(out, n)
    lift = instance.liftings.get(modality) if instance is not None else None
    if lift is None:
        raise SemanticsError(f"no lifting for modality {modality!r}")
    sets = [a.members() for a in args]
    succ = model.succ if model.kind == KRIPKE else model.succ[label]
    return SetPredicate.from_members([x for x in range(n) if lift(succ[x], *sets)], n)


def atom_value(model, name):
    ctx = context_for(model)
    if model.kind == PROB:
        vals = model.payout.get(name)
        return ctx.bottom() if vals is None else ValuePredicate(tuple(vals))
    return SetPredicate.from_members(model.props.get(name, ()), model.size)


# -- unfolding -------------------------------------------------------------


def canonical(f):
    """Identify PDL formulas up to program canonicalization."""
    return map_programs(f, prg.canonicalize)


def unfold(f):
    """The guarded term a fixpoint formula rewrites to in one step."""
    if not isinstance(f, Fix):
        raise SemanticsError(f"only fixpoint formulas unfold, not {type(f).__name__}")
    h = f.head
    if isinstance(h, DiamondStar):
        (a,) = f.args
        return JoinTerm((Leaf(a), Step("dia", (Leaf(f),))))
    if isinstance(h, SigmaQ):
        (a,) = f.args
        return ComboTerm(((h.q, Leaf(a)), (1.0 - h.q, Step("dia", (Leaf(f),)))))
    if isinstance(h, ProgramDiamond):
        (a,) = f.args
        nf = prg.normal_form(prg.canonicalize(h.program))
        items = [Step("dia", (Leaf(Fix(ProgramDiamond(tail), (a,))),), label=pi) for pi, tail in nf.summands]
        if nf.eps:
            items.append(Leaf(a))
        if not items:
            return BottomTerm()
        return items[0] if len(items) == 1 else JoinTerm(tuple(items))
    if isinstance(h, (Sharp, Flat)):
        return substitute(h.scheme, f.args, f)
    raise SemanticsError(f"unknown fixpoint head {h!r}")


def term_leaves(t):
    if isinstance(t, Leaf):
        yield t.key
    elif isinstance(t, Step):
        for a in t.args:
            yield from term_leaves(a)
    elif isinstance(t, (JoinTerm, MeetTerm)):
        for a in t.items:
            yield from term_leaves(a)
    elif isinstance(t, NotTerm):
        yield from term_leaves(t.item)
    elif isinstance(t, ComboTerm):
        for _, a in t.terms:
            yield from term_leaves(a)


def _is_constant_key(f) -> bool:
    return isinstance(f, Neg) or (isinstance(f, Fix) and isinstance(f.head, Flat))


# -- closure ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Closure:
    root: object
    keys: tuple
    unfoldings: dict  # fixpoint key -> guarded term

    def __contains__(self, f):
        return f in self.unfoldings or f in self.keys

    def __len__(self):
        return len(self.keys)


def _family(f) -> str:
    if isinstance(f, Fix):
        h = f.head
        if isinstance(h, ProgramDiamond):
            return "<program>-diamonds"
        if isinstance(h, (Sharp, Flat)):
            return "scheme " + show(Fix(h, tuple(Atom("_") for _ in f.args)))
        return type(h).__name__
    return type(f).__name__


def compute_closure(root, cap: int = DEFAULT_CAP) -> Closure:
    """The root's subformulas closed under unfolding leaves, in BFS order.

    Negations and greatest-fixpoint applications are evaluated in runs of
    their own, so the closure stops at them.
    """
    root = canonical(root)
    seen = {root: None}
    unfoldings = {}
    queue = deque([root])

    def add(g):
        if g not in seen:
            if len(seen) >= cap:
                fam, n = Counter(_family(k) for k in seen).most_common(1)[0]
                raise ClosureCapError(f"closure exceeded {cap} formulas; growing family: {fam} ({n} members)")
            seen[g] = None
            queue.append(g)

    while queue:
        f = queue.popleft()
        if _is_constant_key(f):
            continue
        for c in children(f):
            add(c)
        if isinstance(f, Fix):
            t = unfold(f)
            unfoldings[f] = t
            for leaf in term_leaves(t):
                add(leaf)
    return Closure(root, tuple(seen), unfoldings)


# -- least-solution evaluation ---------------------------------------------


class SemanticResult(NamedTuple):
    root: object
    table: Table
    iterations: int
    residual: float = 0.0

    @property
    def value(self):
        return self.table[self.root]


class LeastSystem:
    """The evaluation operator on a closure table, with negation and ``gfp`` keys fixed."""

    def __init__(self, model, root, instance=None, tol=DEFAULT_TOL, cap=DEFAULT_CAP, log=None, _stack=()):
        self.model = model
        self.instance = instance or default_instance(model)
        check_compatible(model, self.instance)
        self.tol = tol
        self.cap = cap
        self.log = log
        self.ctx = context_for(model, tol)
        self.closure = compute_closure(root, cap)
        self.keys = self.closure.keys
        self.root = self.closure.root
        self._stack = _stack + (self.root,)
        self.constants = {}
        for k in self.keys:
            v = self._constant(k)
            if v is not None:
                self.constants[k] = v

    def _sub(self, f):
        f = canonical(f)
        if f in self._stack:
            raise NegationError(f"negation or gfp inside its own unfolding cycle: {show(f)}")
        return LeastSystem(self.model, f, self.instance, self.tol, self.cap, self.log, self._stack).solve()

    def _constant(self, k):
        ctx, m = self.ctx, self.model
        if isinstance(k, Top):
            return ctx.top()
        if isinstance(k, Bot):
            return ctx.bottom()
        if isinstance(k, Atom):
            return atom_value(m, k.name)
        if isinstance(k, Neg):
            if ctx.kind != SET:
                raise SemanticsError("negation needs a set lattice")
            return ctx.complement(self._sub(k.child).value)
        if isinstance(k, Fix) and isinstance(k.head, Flat):
            dual = Fix(Sharp(dualize(k.head.scheme, self.instance)), tuple(Neg(a) for a in k.args))
            return ctx.complement(self._sub(dual).value)
        return None

    def _step(self, node, ev):
        return interpret_modal(self.model, node.modality, [ev(a) for a in node.args], node.label, self.instance)

    def value_of(self, k, table):
        if k in self.constants:
            return self.constants[k]
        ctx = self.ctx
        if isinstance(k, And):
            return ctx.meet((table[k.left], table[k.right]))
        if isinstance(k, Or):
            return ctx.join((table[k.left], table[k.right]))
        if isinstance(k, SubconvexSum):
            return ctx.combo((c, table[x]) for c, x in k.terms)
        if isinstance(k, OneStep):
            return interpret_modal(self.model, k.modality, [table[a] for a in k.args], None, self.instance)
        if isinstance(k, Fix):
            return eval_lattice_term(self.closure.unfoldings[k], table, ctx, self._step)
        raise SemanticsError(f"cannot evaluate {type(k).__name__} here")

    def op(self, table: Table) -> Table:
        return Table(self.ctx, {k: self.value_of(k, table) for k in self.keys})

    def solve(self) -> SemanticResult:
        if self.ctx.kind == SET:
            run = lfp_finite(self.op, self.ctx, self.keys, log=self.log)
        else:
            run = lfp_approx(self.op, self.ctx, self.keys, self.tol, log=self.log)
        return SemanticResult(self.root, run.table, run.iterations, run.residual)


def eval_least(model, root, instance: LogicInstance | None = None, tol: float = DEFAULT_TOL,
               cap: int = DEFAULT_CAP, log: ChainLog | None = None) -> SemanticResult:
    """Least solution of the unfolding equations over the root's closure."""
    return LeastSystem(model, root, instance, tol, cap, log).solve()


# -- initial-algebra evaluation ----------------------------------------------


class _Fold:
    def __init__(self, model, instance, tol, flat_mode, log):
        if flat_mode not in ("dual", "descend"):
            raise ValueError("flat_mode is 'dual' or 'descend'")
        self.model = model
        self.instance = instance
        self.tol = tol
        self.flat_mode = flat_mode
        self.log = log
        self.ctx = context_for(model, tol)
        self.memo = {}
        self.iterations = 0
        self.residual = 0.0

    def value(self, f, env=None):
        """Compositional value; ``env`` holds the unknowns of an enclosing inner fixpoint."""
        ctx = self.ctx
        if env is not None and f in env:
            return env[f]
        if isinstance(f, Const):
            return f.value
        if isinstance(f, Top):
            return ctx.top()
        if isinstance(f, Bot):
            return ctx.bottom()
        if isinstance(f, Atom):
            return atom_value(self.model, f.name)
        if isinstance(f, And):
            return ctx.meet((self.value(f.left, env), self.value(f.right, env)))
        if isinstance(f, Or):
            return ctx.join((self.value(f.left, env), self.value(f.right, env)))
        if isinstance(f, Neg):
            return ctx.complement(self.value(f.child, env))
        if isinstance(f, SubconvexSum):
            return ctx.combo((c, self.value(x, env)) for c, x in f.terms)
        if isinstance(f, OneStep):
            return interpret_modal(self.model, f.modality, [self.value(a, env) for a in f.args], None,
                                   self.instance)
        if isinstance(f, Fix):
            vals = tuple(self.value(a, env) for a in f.args)
            key = canonical(Fix(f.head, tuple(Const(v) for v in vals)))
            if env is not None and key in env:
                return env[key]
            return self.fixpoint(key)
        raise SemanticsError(f"cannot evaluate {type(f).__name__}")

    def fixpoint(self, key):
        if key in self.memo:
            return self.memo[key]
        head = key.head
        if isinstance(head, Flat) and self.flat_mode == "dual":
            dual = Fix(Sharp(dualize(head.scheme, self.instance)),
                       tuple(Const(self.ctx.complement(a.value)) for a in key.args))
            out = self.ctx.complement(self.fixpoint(dual))
            self.memo[key] = out
            return out
        least = is_least(head)

        def unknown(g):
            return (isinstance(g, Fix) and is_least(g.head) == least
                    and all(isinstance(a, Const) for a in g.args))

        terms = {}
        queue = deque([key])
        while queue:
            k = queue.popleft()
            if k in terms:
                continue
            terms[k] = unfold(k)
            for leaf in term_leaves(terms[k]):
                leaf = canonical(leaf)
                if unknown(leaf) and leaf not in terms:
                    queue.append(leaf)
        keys = list(terms)

        def step(node, ev):
            return interpret_modal(self.model, node.modality, [ev(a) for a in node.args], node.label,
                                   self.instance)

        def op(table):
            env = table
            lookup = lambda leaf: self.value(leaf, env)
            return Table(self.ctx, {k: eval_lattice_term(terms[k], lookup, self.ctx, step) for k in keys})

        if least:
            if self.ctx.kind == SET:
                run = lfp_finite(op, self.ctx, keys, log=self.log)
            else:
                run = lfp_approx(op, self.ctx, keys, self.tol, log=self.log)
        else:
            run = gfp_descend(op, self.ctx, keys, self.tol, log=self.log)
        self.iterations += run.iterations
        self.residual = max(self.residual, run.residual)
        for k in keys:
            # every inner unknown was solved jointly, so its value is final too
            self.memo.setdefault(k, run.table[k])
        return self.memo[key]


def eval_initial(model, root, instance: LogicInstance | None = None, tol: float = DEFAULT_TOL,
                 flat_mode: str = "dual", log: ChainLog | None = None) -> SemanticResult:
    """Compositional evaluation; ``flat_mode`` picks how greatest fixpoints are computed."""
    instance = instance or default_instance(model)
    check_compatible(model, instance)
    fold = _Fold(model, instance, tol, flat_mode, log)
    root = canonical(root)
    entries = {}
    stack = [root]
    while stack:
        f = stack.pop()
        if f in entries:
            continue
        entries[f] = fold.value(f)
        stack.extend(reversed(children(f)))
    order = {}
    for f in _preorder(root):
        order.setdefault(f, entries[f])
    return SemanticResult(root, Table(fold.ctx, order), fold.iterations, fold.residual)


def _preorder(f):
    yield f
    for c in children(f):
        yield from _preorder(c)


# -- invariance under morphisms --------------------------------------------


class InvarianceVerdict(NamedTuple):
    ok: bool
    formula: object = None
    state: str | None = None
    checked: int = 0
    rows: tuple = ()  # (formula, agrees) per closure member

    def __bool__(self):
        return self.ok


def check_invariance(f: StateMap, root, instance: LogicInstance | None = None, tol: float = 1e-6,
                     eval_tol: float = 1e-10) -> InvarianceVerdict:
    """Compare each closure formula on the source with its pullback from the target."""
    verdict = check_morphism(f)
    if not verdict:
        raise NotAMorphism(verdict)
    src = eval_least(f.source, root, instance, eval_tol)
    tgt = eval_least(f.target, root, instance, eval_tol)
    rows = []
    first = None
    for k, v in src.table.items():
        w = tgt.table[k]
        bad = None
        for x in range(f.source.size):
            if f.source.kind == PROB:
                if abs(v[x] - w[f(x)]) > tol:
                    bad = x
                    break
            elif (x in v) != (f(x) in w):
                bad = x
                break
        rows.append((k, bad is None))
        if bad is not None and first is None:
            first = (k, f.source.states[bad])
    if first is None:
        return InvarianceVerdict(True, checked=len(rows), rows=tuple(rows))
    return InvarianceVerdict(False, first[0], first[1], len(rows), tuple(rows))


# -- property helpers ------------------------------------------------------


def random_fixpoint_above(system: LeastSystem, rng) -> Table:
    """A fixpoint reached from a random post-fixpoint; the least one lies below it."""
    ctx = system.ctx
    if ctx.kind != SET:
        raise LatticeError("only for set lattices")
    n = ctx.size
    cur = Table(ctx, {k: SetPredicate(rng.getrandbits(n) if n else 0, n) for k in system.keys})
    while True:
        nxt = Table(ctx, {k: cur[k] & v for k, v in system.op(cur).items()})
        if nxt == cur:
            break
        cur = nxt
    return lfp_finite(system.op, ctx, system.keys, start=cur).table
