"""Fixpoint schemes: guardedness, unfolding into guarded terms, duals, and
translation of alternation-free mu-calculus formulas into scheme applications.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lattice import BottomTerm, ComboTerm, JoinTerm, Leaf, MeetTerm, NotTerm, TopTerm
from .syntax import (
    BOT, FIXVAR, TOP, And, Atom, Bot, Fix, FixpointScheme, FixVar, Flat, LogicInstance, Mu, Neg,
    Nu, OneStep, Or, Param, Sharp, Top, Var, is_closed,
)


class SchemeError(ValueError):
    pass


class TranslationError(SchemeError):
    pass


@dataclass(frozen=True)
class Step:
    """A one-step modality applied to guarded terms; ``label`` picks a PDL action."""

    modality: str
    args: tuple
    label: str | None = None


# -- guardedness -----------------------------------------------------------


def check_guarded(scheme: FixpointScheme):
    """``(True, ())`` or ``(False, path)`` to the first unguarded X or nested application.

    Parametric variables and closed formulas may appear unguarded.
    """

    def walk(f, path, guarded):
        if isinstance(f, FixVar):
            return None if guarded else path
        if isinstance(f, Fix) and isinstance(f.head, (Sharp, Flat)) and not guarded:
            return path
        if isinstance(f, OneStep):
            guarded = True
        for name, c in _child_paths(f):
            bad = walk(c, path + (name,), guarded)
            if bad is not None:
                return bad
        return None

    bad = walk(scheme.body, (), False)
    return (True, ()) if bad is None else (False, bad)


def _child_paths(f):
    if isinstance(f, (And, Or)):
        return (("left", f.left), ("right", f.right))
    if isinstance(f, Neg):
        return (("child", f.child),)
    if isinstance(f, (OneStep, Fix)):
        return tuple((f"args[{i}]", a) for i, a in enumerate(f.args))
    return ()


# -- substitution ----------------------------------------------------------


def close_formula(f, args: dict, self_formula):
    """Replace parameters by ``args`` and X by ``self_formula`` at formula level."""
    if isinstance(f, Param):
        try:
            return args[f.name]
        except KeyError:
            raise SchemeError(f"missing argument for parameter {f.name!r}") from None
    if isinstance(f, FixVar):
        return self_formula
    if isinstance(f, (And, Or)):
        return type(f)(close_formula(f.left, args, self_formula), close_formula(f.right, args, self_formula))
    if isinstance(f, Neg):
        return Neg(close_formula(f.child, args, self_formula))
    if isinstance(f, (OneStep, Fix)):
        new = tuple(close_formula(a, args, self_formula) for a in f.args)
        return OneStep(f.modality, new) if isinstance(f, OneStep) else Fix(f.head, new)
    return f


def substitute(scheme: FixpointScheme, args, self_formula):
    """The guarded term ``gamma(args/v, self/x)``.

    ``args`` is a sequence aligned with the scheme's parameters or a mapping
    from parameter names.  Closed subtrees and nested applications become
    formula leaves.
    """
    if not isinstance(args, dict):
        args = tuple(args)
        if len(args) != len(scheme.params):
            raise SchemeError(f"scheme takes {len(scheme.params)} argument(s), got {len(args)}")
        args = dict(zip(scheme.params, args))
    missing = [v for v in scheme.params if v not in args]
    if missing:
        raise SchemeError(f"missing argument for parameter(s) {missing}")
    ok, path = check_guarded(scheme)
    if not ok:
        raise SchemeError(f"unguarded scheme at {'/'.join(path) or '<root>'}")

    def term(f):
        if isinstance(f, Param):
            return Leaf(args[f.name])
        if isinstance(f, FixVar):
            return Leaf(self_formula)
        if isinstance(f, Top):
            return TopTerm()
        if isinstance(f, Bot):
            return BottomTerm()
        if isinstance(f, Fix):
            return Leaf(close_formula(f, args, self_formula))
        if is_closed(f):
            return Leaf(f)
        if isinstance(f, And):
            return MeetTerm((term(f.left), term(f.right)))
        if isinstance(f, Or):
            return JoinTerm((term(f.left), term(f.right)))
        if isinstance(f, OneStep):
            return Step(f.modality, tuple(term(a) for a in f.args))
        raise SchemeError(f"{type(f).__name__} cannot occur in a scheme body")

    return term(scheme.body)


def guarded_term_ok(term, exits=()) -> bool:
    """Every fixpoint-headed leaf outside ``exits`` sits below a ``Step``."""
    exits = set(exits)

    def walk(t, guarded):
        if isinstance(t, Leaf):
            return guarded or not isinstance(t.key, Fix) or t.key in exits
        if isinstance(t, Step):
            return all(walk(a, True) for a in t.args)
        if isinstance(t, (JoinTerm, MeetTerm)):
            return all(walk(a, guarded) for a in t.items)
        if isinstance(t, NotTerm):
            return walk(t.item, guarded)
        if isinstance(t, ComboTerm):
            return all(walk(a, guarded) for _, a in t.terms)
        return True

    return walk(term, False)


# -- duality ---------------------------------------------------------------

DEFAULT_DUALS = {"dia": "box", "box": "dia"}


def dualize(scheme: FixpointScheme, instance: LogicInstance | None = None) -> FixpointScheme:
    """The De Morgan dual: ``dual(x) = ~gamma(~v, ~x)`` written without negating v or x."""
    duals = dict(instance.duals) if instance is not None else DEFAULT_DUALS

    def d(f):
        if isinstance(f, (Param, FixVar)):
            return f
        if isinstance(f, Top):
            return BOT
        if isinstance(f, Bot):
            return TOP
        if isinstance(f, Neg):
            return f.child
        if is_closed(f):
            return Neg(f)
        if isinstance(f, And):
            return Or(d(f.left), d(f.right))
        if isinstance(f, Or):
            return And(d(f.left), d(f.right))
        if isinstance(f, OneStep):
            if f.modality not in duals:
                raise SchemeError(f"modality {f.modality!r} has no declared dual")
            return OneStep(duals[f.modality], tuple(d(a) for a in f.args))
        if isinstance(f, Fix) and isinstance(f.head, (Sharp, Flat)):
            inner = dualize(f.head.scheme, instance)
            head = Flat(inner) if isinstance(f.head, Sharp) else Sharp(inner)
            return Fix(head, tuple(d(a) for a in f.args))
        raise SchemeError(f"{type(f).__name__} cannot occur in a scheme body")

    return FixpointScheme(scheme.params, d(scheme.body))


# -- mu-calculus translation -----------------------------------------------


def free_vars(f) -> frozenset:
    if isinstance(f, Var):
        return frozenset([f.name])
    if isinstance(f, (Mu, Nu)):
        return free_vars(f.body) - {f.var}
    if isinstance(f, (And, Or)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, Neg):
        return free_vars(f.child)
    if isinstance(f, OneStep):
        return frozenset().union(*(free_vars(a) for a in f.args))
    if isinstance(f, (Top, Bot, Atom)):
        return frozenset()
    raise TranslationError(f"{type(f).__name__} is not mu-calculus syntax")


def _atoms(f) -> set:
    if isinstance(f, Atom):
        return {f.name}
    if isinstance(f, (Mu, Nu)):
        return _atoms(f.body)
    if isinstance(f, (And, Or)):
        return _atoms(f.left) | _atoms(f.right)
    if isinstance(f, Neg):
        return _atoms(f.child)
    if isinstance(f, OneStep):
        return set().union(*(_atoms(a) for a in f.args))
    return set()


def _check_mu_guarded(f, bound_unguarded=frozenset()):
    """Each bound variable must sit under a modality inside its own binder."""
    if isinstance(f, Var):
        if f.name in bound_unguarded:
            raise TranslationError(f"variable {f.name} is not guarded by a modality")
        return
    if isinstance(f, (Mu, Nu)):
        _check_mu_guarded(f.body, bound_unguarded | {f.var})
        return
    if isinstance(f, OneStep):
        for a in f.args:
            _check_mu_guarded(a, frozenset())
        return
    if isinstance(f, (And, Or)):
        _check_mu_guarded(f.left, bound_unguarded)
        _check_mu_guarded(f.right, bound_unguarded)
    elif isinstance(f, Neg):
        if free_vars(f.child):
            raise TranslationError("negation over a formula with free variables")
        _check_mu_guarded(f.child, frozenset())


_HOLE = "#neg"


def _hoist_negations(f, inside, holes):
    """Replace negations under a binder by placeholder variables."""
    if isinstance(f, Neg) and inside:
        name = f"{_HOLE}{len(holes)}"
        holes[name] = f
        return Var(name)
    if isinstance(f, (Mu, Nu)):
        return type(f)(f.var, _hoist_negations(f.body, True, holes))
    if isinstance(f, (And, Or)):
        return type(f)(_hoist_negations(f.left, inside, holes), _hoist_negations(f.right, inside, holes))
    if isinstance(f, Neg):
        return Neg(_hoist_negations(f.child, inside, holes))
    if isinstance(f, OneStep):
        return OneStep(f.modality, tuple(_hoist_negations(a, inside, holes) for a in f.args))
    return f


def translate_mu(f, instance: LogicInstance | None = None):
    """Rewrite a guarded alternation-free mu-calculus formula into scheme applications.

    Each binder becomes one scheme whose parameters are the binder's free
    variables.  A binder sitting unguarded inside another is unfolded once
    at that position, so the emitted schemes are guarded.
    """
    free = free_vars(f)
    if free:
        raise TranslationError(f"free variable(s) {sorted(free)}")
    _check_mu_guarded(f)
    holes: dict = {}
    g = _hoist_negations(f, False, holes)
    taken = _atoms(f)

    def param_names(k):
        if k == 1 and "v" not in taken:
            return ["v"]
        out, i = [], 1
        while len(out) < k:
            if f"v{i}" not in taken:
                out.append(f"v{i}")
            i += 1
        return out

    def order(names):
        return sorted(names, key=lambda n: (n.startswith(_HOLE), n))

    def tr(h, ctx):
        fixvar, kind, params, subst, guarded = ctx
        if isinstance(h, Var):
            if h.name == fixvar:
                return FIXVAR
            if h.name in params:
                return Param(params[h.name])
            if h.name in subst:
                return subst[h.name]
            raise TranslationError(f"unbound variable {h.name}")
        if isinstance(h, (Top, Bot, Atom)):
            return h
        if isinstance(h, (And, Or)):
            return type(h)(tr(h.left, ctx), tr(h.right, ctx))
        if isinstance(h, Neg):
            return Neg(tr(h.child, ctx))
        if isinstance(h, OneStep):
            inner = (fixvar, kind, params, subst, True)
            return OneStep(h.modality, tuple(tr(a, inner) for a in h.args))
        if isinstance(h, (Mu, Nu)):
            fv = free_vars(h)
            if fixvar is not None and fixvar in fv and type(h) is not kind:
                raise TranslationError(f"alternation: {h.var} depends on {fixvar} across mu/nu")
            names = order(fv)
            pnames = param_names(len(names))
            body = tr(h.body, (h.var, type(h), dict(zip(names, pnames)), {}, False))
            scheme = FixpointScheme(tuple(pnames), body)
            head = Sharp(scheme) if isinstance(h, Mu) else Flat(scheme)
            app = Fix(head, tuple(tr(Var(n), ctx) for n in names))
            if fixvar is None or guarded:
                return app
            # unguarded inside another binder: unfold once in place
            return tr(h.body, (fixvar, kind, params, {**subst, h.var: app}, guarded))
        raise TranslationError(f"{type(h).__name__} is not mu-calculus syntax")

    top_subst = {name: Neg(translate_mu(neg.child, instance)) for name, neg in holes.items()}
    return tr(g, (None, None, {}, top_subst, False))
