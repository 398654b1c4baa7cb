"""Finite coalgebras: Kripke, labeled (multi-relational) and probabilistic models.

State identity is positional: the order of ``states`` in the source document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

from .lattice import QUANT, SET, LatticeContext

KRIPKE = "kripke"
LABELED = "labeled"
PROB = "prob"

WEIGHT_TOL = 1e-12


class ModelError(ValueError):
    pass


class SignatureMismatch(ModelError):
    pass


class QuotientError(ModelError):
    def __init__(self, block, reason):
        super().__init__(f"partition is not a congruence: block {list(block)} ({reason})")
        self.block = block
        self.reason = reason


@dataclass(frozen=True, eq=False)
class _Base:
    states: tuple

    @cached_property
    def index(self) -> dict:
        return {s: i for i, s in enumerate(self.states)}

    @property
    def size(self) -> int:
        return len(self.states)

    def state_index(self, name) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise ModelError(f"unknown state {name!r}") from None


@dataclass(frozen=True, eq=False)
class KripkeModel(_Base):
    props: dict  # name -> frozenset of state indices
    succ: tuple  # per state: frozenset of successor indices

    kind = KRIPKE

    def context(self) -> LatticeContext:
        return LatticeContext(SET, self.size)

    def props_at(self, i) -> frozenset:
        return frozenset(p for p, xs in self.props.items() if i in xs)

    @cached_property
    def succ_bits(self) -> tuple:
        return tuple(sum(1 << j for j in s) for s in self.succ)


@dataclass(frozen=True, eq=False)
class LabeledModel(_Base):
    props: dict
    labels: tuple
    succ: dict  # label -> tuple of per-state successor frozensets

    kind = LABELED

    def context(self) -> LatticeContext:
        return LatticeContext(SET, self.size)

    def props_at(self, i) -> frozenset:
        return frozenset(p for p, xs in self.props.items() if i in xs)

    def successors(self, label, i) -> frozenset:
        if label not in self.succ:
            raise ModelError(f"unknown label {label!r}")
        return self.succ[label][i]

    @cached_property
    def succ_bits(self) -> dict:
        return {a: tuple(sum(1 << j for j in s) for s in rows) for a, rows in self.succ.items()}


@dataclass(frozen=True, eq=False)
class ProbModel(_Base):
    payout_labels: tuple
    payout: dict  # label -> tuple of per-state values
    step: tuple  # per state: dict successor index -> weight

    kind = PROB

    def context(self, tol=0.0) -> LatticeContext:
        return LatticeContext(QUANT, self.size, tol)

    def mass(self, i) -> float:
        return sum(self.step[i].values())


Model = KripkeModel | LabeledModel | ProbModel


class StateMap(NamedTuple):
    source: Model
    target: Model
    mapping: tuple  # source index -> target index

    def __call__(self, i) -> int:
        return self.mapping[i]


class MorphismVerdict(NamedTuple):
    ok: bool
    state: str | None = None
    reason: str | None = None  # "prop" | "step"
    detail: str = ""

    def __bool__(self):
        return self.ok


# -- loading ---------------------------------------------------------------


def _names(doc, key):
    xs = doc.get(key, [])
    if not isinstance(xs, list) or not all(isinstance(x, str) for x in xs):
        raise ModelError(f"{key!r} must be a list of names")
    if len(set(xs)) != len(xs):
        raise ModelError(f"duplicate entries in {key!r}")
    return tuple(xs)


def _mapping(doc, key):
    m = doc.get(key, {})
    if not isinstance(m, dict):
        raise ModelError(f"{key!r} must be an object")
    return m


def _state_set(index, names, where):
    if not isinstance(names, list):
        raise ModelError(f"{where}: expected a list of states")
    out = set()
    for s in names:
        if s not in index:
            raise ModelError(f"{where}: dangling state reference {s!r}")
        out.add(index[s])
    return frozenset(out)


def _unit(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ModelError(f"{where}: expected a number, got {x!r}")
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ModelError(f"{where}: value {x} outside [0,1]")
    return x


def load_model(doc: dict) -> Model:
    """Build a validated model from its JSON document."""
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    kind = doc.get("kind")
    states = _names(doc, "states")
    index = {s: i for i, s in enumerate(states)}
    n = len(states)

    def check_keys(m, where):
        for s in m:
            if s not in index:
                raise ModelError(f"{where}: dangling state reference {s!r}")

    if kind in (KRIPKE, LABELED):
        props = {p: _state_set(index, xs, f"props.{p}") for p, xs in _mapping(doc, "props").items()}
        if kind == KRIPKE:
            raw = _mapping(doc, "succ")
            check_keys(raw, "succ")
            succ = tuple(_state_set(index, raw.get(s, []), f"succ.{s}") for s in states)
            return KripkeModel(states, props, succ)
        labels = _names(doc, "labels")
        raw = _mapping(doc, "succ")
        succ = {}
        for a in raw:
            if a not in labels:
                raise ModelError(f"succ: undeclared label {a!r}")
        for a in labels:
            rows = raw.get(a, {})
            if not isinstance(rows, dict):
                raise ModelError(f"succ.{a} must be an object")
            check_keys(rows, f"succ.{a}")
            succ[a] = tuple(_state_set(index, rows.get(s, []), f"succ.{a}.{s}") for s in states)
        return LabeledModel(states, props, labels, succ)

    if kind == PROB:
        if doc.get("props"):
            raise ModelError("probabilistic models carry payouts, not props")
        labels = _names(doc, "payoutLabels")
        raw_pay = _mapping(doc, "payout")
        payout = {}
        for a in raw_pay:
            if a not in labels:
                raise ModelError(f"payout: undeclared label {a!r}")
        for a in labels:
            row = raw_pay.get(a, {})
            if not isinstance(row, dict):
                raise ModelError(f"payout.{a} must be an object")
            check_keys(row, f"payout.{a}")
            payout[a] = tuple(_unit(row.get(s, 0.0), f"payout.{a}.{s}") for s in states)
        raw_step = _mapping(doc, "step")
        check_keys(raw_step, "step")
        step = []
        for s in states:
            row = raw_step.get(s, {})
            if not isinstance(row, dict):
                raise ModelError(f"step.{s} must be an object")
            check_keys(row, f"step.{s}")
            dist = {index[t]: _unit(w, f"step.{s}.{t}") for t, w in row.items()}
            mass = sum(dist.values())
            if mass > 1.0 + WEIGHT_TOL:
                raise ModelError(f"step.{s}: subdistribution mass {mass} > 1")
            step.append({t: w for t, w in dist.items() if w > 0.0})
        return ProbModel(states, labels, payout, tuple(step))

    raise ModelError(f"unknown model kind {kind!r}")


def read_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelError(f"{path}: invalid JSON ({e})") from None
    return load_model(doc)


def serialize_model(model: Model) -> dict:
    names = model.states

    def subset(xs):
        return [names[i] for i in sorted(xs)]

    if model.kind == KRIPKE:
        return {
            "kind": KRIPKE,
            "states": list(names),
            "props": {p: subset(xs) for p, xs in model.props.items()},
            "succ": {names[i]: subset(s) for i, s in enumerate(model.succ)},
        }
    if model.kind == LABELED:
        return {
            "kind": LABELED,
            "states": list(names),
            "props": {p: subset(xs) for p, xs in model.props.items()},
            "labels": list(model.labels),
            "succ": {a: {names[i]: subset(s) for i, s in enumerate(rows)} for a, rows in model.succ.items()},
        }
    return {
        "kind": PROB,
        "states": list(names),
        "payoutLabels": list(model.payout_labels),
        "payout": {a: {names[i]: v for i, v in enumerate(row)} for a, row in model.payout.items()},
        "step": {names[i]: {names[j]: w for j, w in sorted(d.items())} for i, d in enumerate(model.step)},
    }


def load_state_map(doc: dict, source: Model, target: Model) -> StateMap:
    raw = doc.get("map") if isinstance(doc, dict) else None
    if not isinstance(raw, dict):
        raise ModelError('map document must look like {"map": {src: tgt}}')
    mapping = []
    for s in source.states:
        if s not in raw:
            raise ModelError(f"map is not total: no image for {s!r}")
        mapping.append(target.state_index(raw[s]))
    for s in raw:
        source.state_index(s)
    return StateMap(source, target, tuple(mapping))


def identity_map(model: Model) -> StateMap:
    return StateMap(model, model, tuple(range(model.size)))


# -- morphisms -------------------------------------------------------------


def pushforward(dist: dict, f) -> dict:
    out: dict = {}
    for x, w in dist.items():
        y = f(x)
        out[y] = out.get(y, 0.0) + w
    return out


def _dist_close(d1: dict, d2: dict) -> bool:
    return all(abs(d1.get(k, 0.0) - d2.get(k, 0.0)) <= WEIGHT_TOL for k in set(d1) | set(d2))


def check_morphism(f: StateMap) -> MorphismVerdict:
    """Check that ``f`` commutes with the two coalgebra structures.

    Propositions (or payouts) are checked for all states before transition
    structure, so a valuation mismatch is always the reported witness when
    there is one.
    """
    src, tgt = f.source, f.target
    if src.kind != tgt.kind:
        raise SignatureMismatch(f"cannot map a {src.kind} model into a {tgt.kind} model")
    if len(f.mapping) != src.size or not all(0 <= y < tgt.size for y in f.mapping):
        raise ModelError("state map is not a total function into the target")
    name = src.states

    if src.kind == PROB:
        labels = set(src.payout_labels) | set(tgt.payout_labels)
        for x in range(src.size):
            y = f(x)
            for a in sorted(labels):
                u = src.payout.get(a, (0.0,) * src.size)[x]
                v = tgt.payout.get(a, (0.0,) * tgt.size)[y]
                if abs(u - v) > WEIGHT_TOL:
                    return MorphismVerdict(False, name[x], "prop", f"payout {a}: {u} vs {v}")
        for x in range(src.size):
            pushed = pushforward(src.step[x], f)
            if not _dist_close(pushed, tgt.step[f(x)]):
                return MorphismVerdict(False, name[x], "step", "pushforward differs from target step")
        return MorphismVerdict(True)

    for x in range(src.size):
        if src.props_at(x) != tgt.props_at(f(x)):
            diff = sorted(src.props_at(x) ^ tgt.props_at(f(x)))
            return MorphismVerdict(False, name[x], "prop", f"valuation differs on {diff}")
    if src.kind == KRIPKE:
        rels = [(None, src.succ, tgt.succ)]
    else:
        labels = sorted(set(src.labels) | set(tgt.labels))
        empty_s = (frozenset(),) * src.size
        empty_t = (frozenset(),) * tgt.size
        rels = [(a, src.succ.get(a, empty_s), tgt.succ.get(a, empty_t)) for a in labels]
    for x in range(src.size):
        for a, s_rows, t_rows in rels:
            image = frozenset(f(z) for z in s_rows[x])
            if image != t_rows[f(x)]:
                where = "successors" if a is None else f"{a}-successors"
                return MorphismVerdict(False, name[x], "step", f"image of {where} differs")
    return MorphismVerdict(True)


def quotient_by_kernel(model: Model, partition) -> tuple[Model, StateMap]:
    """Collapse the blocks of ``partition`` (lists of state names).

    States not mentioned form singleton blocks.  Blocks are ordered by their
    first state and named after it.
    """
    block_of = [None] * model.size
    blocks = []
    for raw in partition:
        idx = sorted(model.state_index(s) for s in raw)
        if not idx:
            continue
        for i in idx:
            if block_of[i] is not None:
                raise ModelError(f"state {model.states[i]!r} occurs in two blocks")
        for i in idx:
            block_of[i] = idx
        blocks.append(idx)
    for i in range(model.size):
        if block_of[i] is None:
            block_of[i] = [i]
            blocks.append(block_of[i])
    blocks.sort(key=lambda b: b[0])
    number = {}
    for k, b in enumerate(blocks):
        for i in b:
            number[i] = k
    proj = tuple(number[i] for i in range(model.size))
    names = tuple(model.states[b[0]] for b in blocks)

    def fail(b, reason):
        raise QuotientError([model.states[i] for i in b], reason)

    if model.kind == PROB:
        rep_step = []
        for b in blocks:
            pushed = [pushforward(model.step[i], proj.__getitem__) for i in b]
            for a in model.payout_labels:
                if any(abs(model.payout[a][i] - model.payout[a][b[0]]) > WEIGHT_TOL for i in b):
                    fail(b, f"payout {a} differs")
            if not all(_dist_close(pushed[0], d) for d in pushed[1:]):
                fail(b, "step distributions differ")
            rep_step.append({k: w for k, w in pushed[0].items() if w > 0.0})
        payout = {a: tuple(model.payout[a][b[0]] for b in blocks) for a in model.payout_labels}
        q = ProbModel(names, model.payout_labels, payout, tuple(rep_step))
        return q, StateMap(model, q, proj)

    for b in blocks:
        if any(model.props_at(i) != model.props_at(b[0]) for i in b):
            fail(b, "propositions differ")
    props = {p: frozenset(proj[i] for i in xs) for p, xs in model.props.items()}

    def lift(rows, b):
        images = [frozenset(proj[j] for j in rows[i]) for i in b]
        if any(im != images[0] for im in images[1:]):
            return None
        return images[0]

    if model.kind == KRIPKE:
        succ = []
        for b in blocks:
            im = lift(model.succ, b)
            if im is None:
                fail(b, "successor blocks differ")
            succ.append(im)
        q = KripkeModel(names, props, tuple(succ))
        return q, StateMap(model, q, proj)

    succ = {}
    for a in model.labels:
        rows = []
        for b in blocks:
            im = lift(model.succ[a], b)
            if im is None:
                fail(b, f"{a}-successor blocks differ")
            rows.append(im)
        succ[a] = tuple(rows)
    q = LabeledModel(names, props, model.labels, succ)
    return q, StateMap(model, q, proj)


def kripke_reduct(model: LabeledModel) -> KripkeModel:
    """Forget labels: the successor relation becomes the union over all labels."""
    succ = tuple(frozenset().union(*(model.succ[a][i] for a in model.labels)) for i in range(model.size))
    return KripkeModel(model.states, dict(model.props), succ)
