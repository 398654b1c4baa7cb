"""Formula trees for the four logic instances, with a parser and printer.

One tree type serves every instance; ``validate`` decides which node kinds
an instance admits.  Scheme bodies reuse the same nodes plus ``Param`` and
``FixVar``; mu-calculus input adds ``Var``, ``Mu`` and ``Nu``.

Concrete syntax (whitespace insensitive)::

    T  F  p  ~f  f /\\ g  f \\/ g  dia f  box f  dia* f  sigma[0.5] f
    <a;b*>f  0.5*f + 0.25*g  lfp{v \\/ dia X}(p/v)  gfp{...}(...)
    mu X. f  nu X. f                      (translate_mu input only)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple

from . import programs as prg
from .lattice import LatticeError, check_coefficients
from .lexer import ParseError, TokenStream, describe, tokenize

# -- nodes -----------------------------------------------------------------


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bot:
    pass


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    child: object


@dataclass(frozen=True)
class SubconvexSum:
    terms: tuple  # ((coefficient, formula), ...)


@dataclass(frozen=True)
class OneStep:
    modality: str
    args: tuple


@dataclass(frozen=True)
class Fix:
    head: object
    args: tuple


@dataclass(frozen=True)
class DiamondStar:
    pass


@dataclass(frozen=True)
class ProgramDiamond:
    program: object


@dataclass(frozen=True)
class SigmaQ:
    q: float


@dataclass(frozen=True)
class FixpointScheme:
    params: tuple
    body: object


@dataclass(frozen=True)
class Sharp:
    scheme: FixpointScheme


@dataclass(frozen=True)
class Flat:
    scheme: FixpointScheme


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class FixVar:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Mu:
    var: str
    body: object


@dataclass(frozen=True)
class Nu:
    var: str
    body: object


TOP, BOT, FIXVAR = Top(), Bot(), FixVar()
DSTAR = DiamondStar()

LEAST_HEADS = (DiamondStar, ProgramDiamond, SigmaQ, Sharp)


def is_least(head) -> bool:
    return isinstance(head, LEAST_HEADS)


def children(f) -> tuple:
    if isinstance(f, (And, Or)):
        return (f.left, f.right)
    if isinstance(f, Neg):
        return (f.child,)
    if isinstance(f, SubconvexSum):
        return tuple(x for _, x in f.terms)
    if isinstance(f, (OneStep, Fix)):
        return f.args
    if isinstance(f, (Mu, Nu)):
        return (f.body,)
    return ()


def subformulas(f):
    """Pre-order walk; does not enter scheme bodies."""
    yield f
    for c in children(f):
        yield from subformulas(c)


def is_closed(f) -> bool:
    """No free parametric or fixpoint variable (scheme bodies are their own scope)."""
    if isinstance(f, (Param, FixVar, Var)):
        return False
    return all(is_closed(c) for c in children(f))


def count_fix(f) -> int:
    n = 1 if isinstance(f, (Fix, Mu, Nu)) else 0
    if isinstance(f, Fix) and isinstance(f.head, (Sharp, Flat)):
        n += count_fix(f.head.scheme.body)
    return n + sum(count_fix(c) for c in children(f))


def map_programs(f, fn):
    """Rebuild ``f`` with ``fn`` applied to every PDL program."""
    if isinstance(f, Fix):
        head = f.head
        if isinstance(head, ProgramDiamond):
            head = ProgramDiamond(fn(head.program))
        return Fix(head, tuple(map_programs(a, fn) for a in f.args))
    if isinstance(f, (And, Or)):
        return type(f)(map_programs(f.left, fn), map_programs(f.right, fn))
    if isinstance(f, Neg):
        return Neg(map_programs(f.child, fn))
    if isinstance(f, SubconvexSum):
        return SubconvexSum(tuple((c, map_programs(x, fn)) for c, x in f.terms))
    if isinstance(f, OneStep):
        return OneStep(f.modality, tuple(map_programs(a, fn) for a in f.args))
    return f


# -- logic instances -------------------------------------------------------

DIAMONDSTAR = "diamondstar"
PDL = "pdl"
QUANT = "quant"
CFL = "cfl"
INSTANCE_IDS = (DIAMONDSTAR, PDL, QUANT, CFL)


@dataclass(frozen=True)
class LogicInstance:
    id: str
    modalities: Mapping = field(default_factory=dict)  # name -> arity
    duals: Mapping = field(default_factory=dict)
    programs: frozenset | None = None
    props: frozenset | None = None
    # extra Kripke liftings for cfl: name -> fn(props_at_x, successors, *arg_sets) -> bool
    liftings: Mapping[str, Callable] = field(default_factory=dict)

    @property
    def set_based(self) -> bool:
        return self.id != QUANT


def diamondstar_logic(props=None) -> LogicInstance:
    return LogicInstance(DIAMONDSTAR, {"dia": 1, "box": 1}, {"dia": "box", "box": "dia"},
                         props=_fs(props))


def pdl_logic(alphabet, props=None) -> LogicInstance:
    return LogicInstance(PDL, {}, {}, programs=frozenset(alphabet), props=_fs(props))


def quant_logic(props=None) -> LogicInstance:
    return LogicInstance(QUANT, {"dia": 1}, {}, props=_fs(props))


def cfl_logic(props=None, modalities=None, duals=None, liftings=None) -> LogicInstance:
    mods = {"dia": 1, "box": 1}
    mods.update(modalities or {})
    dl = {"dia": "box", "box": "dia"}
    for a, b in (duals or {}).items():
        dl[a] = b
        dl[b] = a
    return LogicInstance(CFL, mods, dl, props=_fs(props), liftings=dict(liftings or {}))


def _fs(xs):
    return None if xs is None else frozenset(xs)


# -- printing --------------------------------------------------------------

_P_TOP, _P_OR, _P_AND, _P_UNARY = 0, 1, 2, 3


def show(f, prec: int = _P_TOP) -> str:
    def paren(s, level):
        return f"({s})" if prec > level else s

    if isinstance(f, Top):
        return "T"
    if isinstance(f, Bot):
        return "F"
    if isinstance(f, (Atom, Param, Var)):
        return f.name
    if isinstance(f, FixVar):
        return "X"
    if isinstance(f, Or):
        return paren(f"{show(f.left, _P_OR)} \\/ {show(f.right, _P_AND)}", _P_OR)
    if isinstance(f, And):
        return paren(f"{show(f.left, _P_AND)} /\\ {show(f.right, _P_UNARY)}", _P_AND)
    if isinstance(f, Neg):
        return "~" + show(f.child, _P_UNARY)
    if isinstance(f, SubconvexSum):
        s = " + ".join(f"{c!r}*{show(x, _P_UNARY)}" for c, x in f.terms)
        return paren(s, _P_TOP)
    if isinstance(f, OneStep):
        if len(f.args) == 1:
            return f"{f.modality} {show(f.args[0], _P_UNARY)}"
        return f"{f.modality}({', '.join(show(a) for a in f.args)})"
    if isinstance(f, Fix):
        h = f.head
        if isinstance(h, DiamondStar):
            return "dia* " + show(f.args[0], _P_UNARY)
        if isinstance(h, SigmaQ):
            return f"sigma[{h.q!r}] " + show(f.args[0], _P_UNARY)
        if isinstance(h, ProgramDiamond):
            return f"<{prg.show(h.program)}>" + show(f.args[0], _P_UNARY)
        if isinstance(h, (Sharp, Flat)):
            kw = "lfp" if isinstance(h, Sharp) else "gfp"
            sc = h.scheme
            args = ", ".join(f"{show(a)}/{v}" for a, v in zip(f.args, sc.params))
            return f"{kw}{{{show(sc.body)}}}({args})"
    if isinstance(f, (Mu, Nu)):
        kw = "mu" if isinstance(f, Mu) else "nu"
        return paren(f"{kw} {f.var}. {show(f.body)}", _P_TOP)
    raise TypeError(f"not a formula: {f!r}")


def show_scheme(s: FixpointScheme, name: str = "gamma") -> str:
    sig = ", ".join(s.params)
    return f"{name}({sig + '; ' if sig else ''}X) := {show(s.body)}"


# -- parsing ---------------------------------------------------------------

KEYWORDS = {"T", "F", "dia", "box", "sigma", "lfp", "gfp", "mu", "nu"}
FIX_VARIABLE = "X"


class _Scope(NamedTuple):
    params: frozenset = frozenset()
    in_body: bool = False
    bound: frozenset = frozenset()  # mu-calculus variables


class _Parser:
    def __init__(self, text, instance: LogicInstance | None, allow_mu: bool):
        self.ts = TokenStream(tokenize(text))
        self.instance = instance
        self.allow_mu = allow_mu
        self.mods = dict(instance.modalities) if instance is not None else {"dia": 1, "box": 1}

    def error(self, expected):
        tok = self.ts.peek()
        raise ParseError(f"unexpected {describe(tok)}", tok.pos, expected)

    def formula(self, sc):
        left = self.conj(sc)
        while self.ts.accept("\\/"):
            left = Or(left, self.conj(sc))
        return left

    def conj(self, sc):
        left = self.unary(sc)
        while self.ts.accept("/\\"):
            left = And(left, self.unary(sc))
        return left

    def unary(self, sc):
        ts = self.ts
        tok = ts.peek()
        if ts.accept("~"):
            return Neg(self.unary(sc))
        if tok.kind == "ident":
            t = tok.text
            if t == "dia" and ts.peek(1).text == "*" and ts.peek(1).kind == "sym":
                ts.take()
                ts.take()
                return Fix(DSTAR, (self.unary(sc),))
            if t == "sigma":
                ts.take()
                ts.expect("[")
                num = ts.peek()
                if num.kind != "number":
                    self.error(["probability"])
                ts.take()
                ts.expect("]")
                return Fix(SigmaQ(float(num.text)), (self.unary(sc),))
            if t in ("mu", "nu") and self.allow_mu:
                ts.take()
                var = ts.peek()
                if var.kind != "ident" or var.text in KEYWORDS:
                    self.error(["variable"])
                ts.take()
                ts.expect(".")
                body = self.formula(sc._replace(bound=sc.bound | {var.text}))
                return (Mu if t == "mu" else Nu)(var.text, body)
            if t in self.mods and t not in sc.params:
                ts.take()
                arity = self.mods[t]
                if arity == 1:
                    return OneStep(t, (self.unary(sc),))
                ts.expect("(")
                args = []
                if not ts.at(")"):
                    args.append(self.formula(sc))
                    while ts.accept(","):
                        args.append(self.formula(sc))
                ts.expect(")")
                return OneStep(t, tuple(args))
        if ts.accept("<"):
            prog = prg.parse_program_tokens(ts)
            ts.expect(">")
            return Fix(ProgramDiamond(prog), (self.unary(sc),))
        return self.primary(sc)

    def primary(self, sc):
        ts = self.ts
        tok = ts.peek()
        if ts.accept("("):
            f = self.formula(sc)
            ts.expect(")")
            return f
        if tok.kind == "number":
            return self.sum(sc)
        if tok.kind == "ident":
            t = tok.text
            if t in ("lfp", "gfp"):
                return self.scheme_app(sc)
            if t in ("T", "F"):
                ts.take()
                return TOP if t == "T" else BOT
            if t in KEYWORDS:
                self.error(["formula"])
            ts.take()
            if sc.in_body and t == FIX_VARIABLE:
                return FIXVAR
            if t in sc.params:
                return Param(t)
            if t in sc.bound:
                return Var(t)
            return Atom(t)
        self.error(["formula"])

    def sum(self, sc):
        ts = self.ts
        terms = []
        while True:
            num = ts.peek()
            if num.kind != "number":
                self.error(["coefficient"])
            ts.take()
            ts.expect("*")
            terms.append((float(num.text), self.unary(sc)))
            if not (ts.at("+") and ts.peek(1).kind == "number"):
                return SubconvexSum(tuple(terms))
            ts.take()

    def scheme_app(self, sc):
        ts = self.ts
        kw = ts.take().text
        ts.expect("{")
        body_start = ts.pos
        depth = 1
        while depth:
            tok = ts.take()
            if tok.kind == "end":
                raise ParseError("unterminated scheme body", tok.pos, ["'}'"])
            if tok.text == "{" and tok.kind == "sym":
                depth += 1
            elif tok.text == "}" and tok.kind == "sym":
                depth -= 1
        ts.expect("(")
        args, names = [], []
        if not ts.at(")"):
            while True:
                args.append(self.formula(sc))
                ts.expect("/")
                var = ts.peek()
                if var.kind != "ident" or var.text in KEYWORDS or var.text == FIX_VARIABLE:
                    self.error(["parameter name"])
                ts.take()
                if var.text in names:
                    raise ParseError(f"duplicate parameter {var.text!r}", var.pos)
                names.append(var.text)
                if not ts.accept(","):
                    break
        ts.expect(")")
        resume = ts.pos
        ts.pos = body_start
        body = self.formula(_Scope(frozenset(names), True, frozenset()))
        ts.expect("}")
        ts.pos = resume
        scheme = FixpointScheme(tuple(names), body)
        head = Sharp(scheme) if kw == "lfp" else Flat(scheme)
        return Fix(head, tuple(args))


def _parse(text, instance, allow_mu):
    p = _Parser(text, instance, allow_mu)
    f = p.formula(_Scope())
    if p.ts.peek().kind != "end":
        p.error(["end of input", "'/\\'", "'\\/'"])
    return f


def parse_formula(text: str, instance: LogicInstance | None = None, check: bool = True):
    """Parse and (unless ``check`` is false) validate a formula."""
    f = _parse(text, instance, allow_mu=False)
    if check and instance is not None:
        diags = validate(f, instance)
        if diags:
            raise FormulaError(diags)
    return f


def parse_mu(text: str, instance: LogicInstance | None = None):
    """Parse a mu-calculus formula (capitalised variables bound by ``mu``/``nu``)."""
    return _parse(text, instance, allow_mu=True)


# -- validation ------------------------------------------------------------


class Diagnostic(NamedTuple):
    path: tuple
    code: str
    message: str

    def __str__(self):
        where = "/".join(self.path) or "<root>"
        return f"{where}: {self.message} [{self.code}]"


class FormulaError(ValueError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)


_ALLOWED = {
    DIAMONDSTAR: {Neg, OneStep, DiamondStar},
    PDL: {Neg, ProgramDiamond},
    QUANT: {SubconvexSum, OneStep, DiamondStar, SigmaQ},
    CFL: {Neg, OneStep, Sharp, Flat},
}


def validate(f, instance: LogicInstance) -> list[Diagnostic]:
    """All legality problems of ``f`` in ``instance``; empty means valid."""
    from .schemes import SchemeError, check_guarded, dualize

    out: list[Diagnostic] = []
    allowed = _ALLOWED[instance.id]

    def bad(path, code, msg):
        out.append(Diagnostic(tuple(path), code, msg))

    def walk(f, path, scope):
        # scope: None outside scheme bodies, else the set of parameter names
        kind = type(f)
        if isinstance(f, (Top, Bot)):
            return
        if isinstance(f, Atom):
            if instance.props is not None and f.name not in instance.props:
                bad(path, "unknown-prop", f"unknown proposition {f.name!r}")
            if scope is not None and f.name in scope:
                bad(path, "shadowed-param", f"atom {f.name!r} shadows a parameter")
            return
        if isinstance(f, (And, Or)):
            walk(f.left, path + ["left"], scope)
            walk(f.right, path + ["right"], scope)
            return
        if isinstance(f, (Param, FixVar)):
            if scope is None:
                bad(path, "free-variable", "scheme variable outside a scheme body")
            elif isinstance(f, Param) and f.name not in scope:
                bad(path, "unknown-param", f"undeclared parameter {f.name!r}")
            return
        if isinstance(f, (Var, Mu, Nu)):
            bad(path, "mu-binder", "mu-calculus syntax; translate it first")
            return
        if kind not in allowed and kind is not Fix:
            bad(path, "illegal-node", f"{kind.__name__} is not part of the {instance.id} logic")
            return
        if isinstance(f, Neg):
            if not instance.set_based:
                bad(path, "illegal-node", "negation needs a set-based logic")
            if scope is not None:
                bad(path, "negation-in-scheme", "negation inside a scheme body")
            walk(f.child, path + ["child"], scope)
            return
        if isinstance(f, SubconvexSum):
            try:
                check_coefficients(c for c, _ in f.terms)
            except LatticeError as e:
                bad(path, "bad-coefficient", str(e))
            if not f.terms:
                bad(path, "bad-coefficient", "empty subconvex sum")
            for i, (_, x) in enumerate(f.terms):
                walk(x, path + [f"terms[{i}]"], scope)
            return
        if isinstance(f, OneStep):
            arity = instance.modalities.get(f.modality)
            if arity is None:
                bad(path, "unknown-modality", f"undeclared modality {f.modality!r}")
            elif arity != len(f.args):
                bad(path, "arity", f"{f.modality} takes {arity} argument(s), got {len(f.args)}")
            for i, a in enumerate(f.args):
                walk(a, path + [f"args[{i}]"], scope)
            return
        if isinstance(f, Fix):
            h = f.head
            if type(h) not in allowed:
                bad(path, "illegal-node", f"{type(h).__name__} is not part of the {instance.id} logic")
                return
            if isinstance(h, (Sharp, Flat)):
                want = len(h.scheme.params)
                if len(f.args) != want:
                    bad(path, "arity", f"scheme takes {want} argument(s), got {len(f.args)}")
                check_scheme(h, path + ["head"])
            else:
                if len(f.args) != 1:
                    bad(path, "arity", "fixpoint modality takes one argument")
            if isinstance(h, SigmaQ) and not 0.0 <= h.q <= 1.0:
                bad(path, "bad-coefficient", f"sigma probability {h.q} outside [0,1]")
            if isinstance(h, ProgramDiamond):
                check_program(h.program, path + ["program"])
            for i, a in enumerate(f.args):
                walk(a, path + [f"args[{i}]"], scope)
            return
        bad(path, "illegal-node", f"unknown node {f!r}")

    def check_program(p, path):
        if isinstance(p, prg.Empty):
            bad(path, "empty-program", "the empty program is internal only")
        if instance.programs is not None:
            extra = prg.atoms(p) - instance.programs
            if extra:
                bad(path, "unknown-program", f"undeclared atomic program(s) {sorted(extra)}")
        for sub in _program_nodes(p):
            if isinstance(sub, prg.Empty):
                bad(path, "empty-program", "the empty program is internal only")
                break

    def check_scheme(head, path):
        sc = head.scheme
        if len(set(sc.params)) != len(sc.params):
            bad(path, "duplicate-param", "duplicate parameter names")
        walk(sc.body, path + ["body"], frozenset(sc.params))
        ok, where = check_guarded(sc)
        if not ok:
            bad(path + ["body"] + list(where), "unguarded", "fixpoint variable or nested scheme not under a modality")
        for sub_path, sub in _nested_apps(sc.body, []):
            if any(isinstance(n, FixVar) for a in sub.args for n in _scheme_nodes(a)):
                if type(sub.head) is not type(head):
                    bad(path + ["body"] + sub_path, "alternation",
                        "nested scheme of the other fixpoint kind depends on X")
        if isinstance(head, Flat):
            try:
                dualize(sc, instance)
            except SchemeError as e:
                bad(path, "no-dual", str(e))

    walk(f, [], None)
    return out


def _program_nodes(p):
    yield p
    if isinstance(p, (prg.Union, prg.Seq)):
        for x in p.items:
            yield from _program_nodes(x)
    elif isinstance(p, prg.Star):
        yield from _program_nodes(p.child)


def _scheme_nodes(f):
    """Nodes of a scheme-body term in the current scope (nested bodies excluded)."""
    yield f
    for c in children(f):
        yield from _scheme_nodes(c)


def _nested_apps(f, path):
    if isinstance(f, Fix) and isinstance(f.head, (Sharp, Flat)):
        yield path, f
    if isinstance(f, (And, Or)):
        yield from _nested_apps(f.left, path + ["left"])
        yield from _nested_apps(f.right, path + ["right"])
    elif isinstance(f, Neg):
        yield from _nested_apps(f.child, path + ["child"])
    elif isinstance(f, (OneStep, Fix)):
        for i, a in enumerate(f.args):
            yield from _nested_apps(a, path + [f"args[{i}]"])
