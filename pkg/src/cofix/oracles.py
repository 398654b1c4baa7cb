"""Brute-force reference semantics.

Nothing here touches the evaluators, the lattice engine or the program
algebra: sets are plain frozensets, relations and linear systems are dense
numpy arrays, fixpoints are naive Knaster-Tarski iterations.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from . import programs as prg
from .models import KRIPKE, LABELED, PROB, KripkeModel, LabeledModel, ProbModel
from .syntax import (
    And, Atom, Bot, DiamondStar, Fix, FixVar, Flat, LogicInstance, Mu, Neg, Nu, OneStep, Or, Param,
    ProgramDiamond, Sharp, SigmaQ, SubconvexSum, Top, Var,
)

LINEAR_RESIDUAL = 1e-12


class OracleError(ValueError):
    pass


# -- reachability ----------------------------------------------------------


def reach_oracle(model: KripkeModel, target) -> frozenset:
    """States with a path of length >= 0 into ``target``, by backward BFS."""
    pred = [[] for _ in range(model.size)]
    for x, ys in enumerate(model.succ):
        for y in ys:
            pred[y].append(x)
    seen = set(target)
    queue = deque(seen)
    while queue:
        y = queue.popleft()
        for x in pred[y]:
            if x not in seen:
                seen.add(x)
                queue.append(x)
    return frozenset(seen)


# -- PDL relations ---------------------------------------------------------


def pdl_relation(model: LabeledModel, program) -> np.ndarray:
    """Boolean matrix of the program's input/output relation."""
    n = model.size
    if isinstance(program, prg.Atomic):
        if program.name not in model.succ:
            raise OracleError(f"unknown label {program.name!r}")
        r = np.zeros((n, n), dtype=bool)
        for x, ys in enumerate(model.succ[program.name]):
            for y in ys:
                r[x, y] = True
        return r
    if isinstance(program, prg.Eps):
        return np.eye(n, dtype=bool)
    if isinstance(program, prg.Empty):
        return np.zeros((n, n), dtype=bool)
    if isinstance(program, prg.Union):
        r = np.zeros((n, n), dtype=bool)
        for p in program.items:
            r |= pdl_relation(model, p)
        return r
    if isinstance(program, prg.Seq):
        r = np.eye(n, dtype=bool)
        for p in program.items:
            r = (r.astype(np.int64) @ pdl_relation(model, p).astype(np.int64)) > 0
        return r
    if isinstance(program, prg.Star):
        r = pdl_relation(model, program.child) | np.eye(n, dtype=bool)
        for k in range(n):  # Warshall
            r |= np.outer(r[:, k], r[k, :])
        return r
    raise OracleError(f"not a program: {program!r}")


def diamond_from_relation(rel: np.ndarray, target) -> frozenset:
    t = np.zeros(rel.shape[0], dtype=bool)
    t[list(target)] = True
    return frozenset(int(x) for x in np.flatnonzero((rel & t[None, :]).any(axis=1)))


# -- set-valued modal clauses ----------------------------------------------


def _modal(model, modality, args, instance, label=None):
    n = model.size
    if model.kind == LABELED:
        if label is None:
            raise OracleError("labeled models need an action label")
        succ = model.succ[label]
    else:
        succ = model.succ
    if modality == "dia" and len(args) == 1:
        return frozenset(x for x in range(n) if succ[x] & args[0])
    if modality == "box" and len(args) == 1:
        return frozenset(x for x in range(n) if succ[x] <= args[0])
    lift = instance.liftings.get(modality) if instance is not None else None
    if lift is None:
        raise OracleError(f"no lifting for modality {modality!r}")
    return frozenset(x for x in range(n) if lift(succ[x], *args))


def _props(model, name):
    return frozenset(model.props.get(name, ()))


def _lfp(fn, start=frozenset()):
    cur = start
    while True:
        nxt = fn(cur)
        if nxt == cur:
            return cur
        cur = nxt


def _gfp(fn, everything):
    return _lfp(fn, everything)


# -- mu-calculus -----------------------------------------------------------


def mu_oracle(model: KripkeModel, f, valuation=None, instance: LogicInstance | None = None) -> frozenset:
    """Nested Knaster-Tarski iteration; any nesting of mu and nu is fine."""
    everything = frozenset(range(model.size))
    valuation = dict(valuation or {})

    def ev(g, env):
        if isinstance(g, Top):
            return everything
        if isinstance(g, Bot):
            return frozenset()
        if isinstance(g, Atom):
            return _props(model, g.name)
        if isinstance(g, Var):
            if g.name not in env:
                raise OracleError(f"free variable {g.name}")
            return env[g.name]
        if isinstance(g, And):
            return ev(g.left, env) & ev(g.right, env)
        if isinstance(g, Or):
            return ev(g.left, env) | ev(g.right, env)
        if isinstance(g, Neg):
            return everything - ev(g.child, env)
        if isinstance(g, OneStep):
            return _modal(model, g.modality, [ev(a, env) for a in g.args], instance)
        if isinstance(g, Mu):
            return _lfp(lambda u: ev(g.body, {**env, g.var: u}))
        if isinstance(g, Nu):
            return _gfp(lambda u: ev(g.body, {**env, g.var: u}), everything)
        raise OracleError(f"{type(g).__name__} is not mu-calculus syntax")

    return ev(f, valuation)


# -- coalgebraic fixpoint logic --------------------------------------------


def cfl_oracle(model: KripkeModel, f, instance: LogicInstance | None = None) -> frozenset:
    """Clause-by-clause semantics of formulas and schemes; mu for lfp, nu for gfp."""
    everything = frozenset(range(model.size))

    def ev(g, rho, u):
        # rho: parameter values of the innermost scheme, u: value of its X
        if isinstance(g, Top):
            return everything
        if isinstance(g, Bot):
            return frozenset()
        if isinstance(g, Atom):
            return _props(model, g.name)
        if isinstance(g, Param):
            return rho[g.name]
        if isinstance(g, FixVar):
            if u is None:
                raise OracleError("X outside a scheme body")
            return u
        if isinstance(g, And):
            return ev(g.left, rho, u) & ev(g.right, rho, u)
        if isinstance(g, Or):
            return ev(g.left, rho, u) | ev(g.right, rho, u)
        if isinstance(g, Neg):
            return everything - ev(g.child, rho, u)
        if isinstance(g, OneStep):
            return _modal(model, g.modality, [ev(a, rho, u) for a in g.args], instance)
        if isinstance(g, Fix) and isinstance(g.head, (Sharp, Flat)):
            scheme = g.head.scheme
            inner = dict(zip(scheme.params, (ev(a, rho, u) for a in g.args)))
            body = lambda w: ev(scheme.body, inner, w)
            return _lfp(body) if isinstance(g.head, Sharp) else _gfp(body, everything)
        raise OracleError(f"{type(g).__name__} is not part of the fixpoint logic")

    return ev(f, {}, None)


# -- quantitative ----------------------------------------------------------


def step_matrix(model: ProbModel) -> np.ndarray:
    m = np.zeros((model.size, model.size))
    for x, row in enumerate(model.step):
        for y, w in row.items():
            m[x, y] += w
    return m


def _payout(model: ProbModel, payout) -> np.ndarray:
    if isinstance(payout, str):
        if payout not in model.payout:
            return np.zeros(model.size)
        payout = model.payout[payout]
    return np.asarray(tuple(payout), dtype=float)


def sigma_linear_oracle(model: ProbModel, q: float, payout) -> tuple:
    """Least solution of ``v = q*a + (1-q)*M v`` by one linear solve."""
    if not 0.0 <= q <= 1.0:
        raise OracleError(f"q = {q} outside [0,1]")
    a = _payout(model, payout)
    m = step_matrix(model)
    n = model.size
    if q == 0.0:
        # v = M v from v = 0 never leaves 0
        v = np.zeros(n)
        while True:
            nxt = m @ v
            if np.max(np.abs(nxt - v), initial=0.0) == 0.0:
                break
            v = nxt
        return tuple(float(x) for x in v)
    v = np.linalg.solve(np.eye(n) - (1.0 - q) * m, q * a)
    residual = np.max(np.abs(q * a + (1.0 - q) * (m @ v) - v), initial=0.0)
    if residual >= LINEAR_RESIDUAL:
        raise OracleError(f"linear solve residual {residual}")
    return tuple(float(x) for x in v)


def _policy_value(m, a, stop):
    """Least solution for a fixed stop set: stop states pay out, the rest continue."""
    n = len(a)
    v = np.where(stop, a, 0.0)
    cont = [x for x in range(n) if not stop[x]]
    # continue states that can reach a stop state through continue states
    good = set()
    changed = True
    while changed:
        changed = False
        for x in cont:
            if x in good:
                continue
            if any(m[x, y] > 0 and (stop[y] or y in good) for y in range(n)):
                good.add(x)
                changed = True
    r = sorted(good)
    if r:
        s = [y for y in range(n) if stop[y]]
        mrr = m[np.ix_(r, r)]
        rhs = m[np.ix_(r, s)] @ a[s] if s else np.zeros(len(r))
        v[r] = np.linalg.solve(np.eye(len(r)) - mrr, rhs)
    return v


def opt_stop_oracle(model: ProbModel, payout) -> tuple:
    """Least solution of ``v = max(a, M v)`` by policy iteration."""
    a = _payout(model, payout)
    m = step_matrix(model)
    stop = np.ones(model.size, dtype=bool)
    seen = set()
    while True:
        v = _policy_value(m, a, stop)
        better = (m @ v) > v + LINEAR_RESIDUAL
        if not better.any():
            break
        stop = stop & ~better
        if stop.tobytes() in seen:
            raise OracleError("policy iteration cycled")
        seen.add(stop.tobytes())
    residual = np.max(np.abs(np.maximum(a, m @ v) - v), initial=0.0)
    if residual >= 1e-9:
        raise OracleError(f"policy iteration ended off the fixpoint (residual {residual})")
    return tuple(float(x) for x in v)


# -- whole formulas --------------------------------------------------------


def oracle_eval(model, f, instance: LogicInstance | None = None):
    """Reference semantics for any valid formula: a frozenset or a value tuple."""
    if model.kind == PROB:
        return _quant(model, f)
    everything = frozenset(range(model.size))

    def ev(g):
        if isinstance(g, Top):
            return everything
        if isinstance(g, Bot):
            return frozenset()
        if isinstance(g, Atom):
            return _props(model, g.name)
        if isinstance(g, And):
            return ev(g.left) & ev(g.right)
        if isinstance(g, Or):
            return ev(g.left) | ev(g.right)
        if isinstance(g, Neg):
            return everything - ev(g.child)
        if isinstance(g, OneStep):
            return _modal(model, g.modality, [ev(a) for a in g.args], instance)
        if isinstance(g, Fix):
            h = g.head
            if isinstance(h, DiamondStar) and model.kind == KRIPKE:
                return reach_oracle(model, ev(g.args[0]))
            if isinstance(h, ProgramDiamond) and model.kind == LABELED:
                return diamond_from_relation(pdl_relation(model, h.program), ev(g.args[0]))
            if isinstance(h, (Sharp, Flat)) and model.kind == KRIPKE:
                return cfl_oracle(model, g, instance)
        raise OracleError(f"no oracle for {type(g).__name__} on {model.kind} models")

    return ev(f)


def _quant(model, f):
    n = model.size
    m = step_matrix(model)

    def ev(g):
        if isinstance(g, Top):
            return np.ones(n)
        if isinstance(g, Bot):
            return np.zeros(n)
        if isinstance(g, Atom):
            return _payout(model, g.name)
        if isinstance(g, And):
            return np.minimum(ev(g.left), ev(g.right))
        if isinstance(g, Or):
            return np.maximum(ev(g.left), ev(g.right))
        if isinstance(g, SubconvexSum):
            return np.minimum(1.0, sum(c * ev(x) for c, x in g.terms))
        if isinstance(g, OneStep) and g.modality == "dia":
            return m @ ev(g.args[0])
        if isinstance(g, Fix) and isinstance(g.head, SigmaQ):
            return np.asarray(sigma_linear_oracle(model, g.head.q, ev(g.args[0])))
        if isinstance(g, Fix) and isinstance(g.head, DiamondStar):
            return np.asarray(opt_stop_oracle(model, ev(g.args[0])))
        raise OracleError(f"no oracle for {type(g).__name__} on probabilistic models")

    return tuple(float(x) for x in ev(f))
