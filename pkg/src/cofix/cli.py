"""Command-line front end: ``check``, ``normalize``, ``invariance``, ``oracle-compare``.

Every command prints one JSON report (``--pretty`` gives a short text view).
Exit status: 0 success, 1 user error, 2 disagreement or internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import programs as prg
from .generators import LABELS, random_model, rng_for
from .lattice import DEFAULT_TOL, LatticeError
from .lexer import ParseError
from .models import KRIPKE, LABELED, PROB, ModelError, load_state_map, read_model
from .oracles import OracleError, oracle_eval
from .schemes import SchemeError
from .semantics import NotAMorphism, SemanticsError, check_invariance, eval_initial, eval_least
from .syntax import (
    CFL, DIAMONDSTAR, INSTANCE_IDS, PDL, QUANT, FormulaError, cfl_logic, diamondstar_logic,
    parse_formula, pdl_logic, quant_logic, show,
)

EXIT_OK, EXIT_USER, EXIT_FAIL = 0, 1, 2
_KIND = {DIAMONDSTAR: KRIPKE, CFL: KRIPKE, PDL: LABELED, QUANT: PROB}


class UserError(Exception):
    pass


class Disagreement(Exception):
    def __init__(self, report):
        super().__init__("evaluations disagree")
        self.report = report


def instance_for(logic, model):
    props = model.payout_labels if model.kind == PROB else tuple(model.props)
    if logic == DIAMONDSTAR:
        return diamondstar_logic(props)
    if logic == PDL:
        return pdl_logic(model.labels, props)
    if logic == QUANT:
        return quant_logic(props)
    return cfl_logic(props)


def _model(args):
    if args.model:
        return read_model(args.model)
    if args.seed is None:
        raise UserError("give --model or --seed")
    rng = rng_for(args.seed)
    kind = _KIND[args.logic]
    extra = {"labels": LABELS} if kind == LABELED else {}
    return random_model(rng, kind, n=args.states, **extra)


def encode(model, value):
    if model.kind == PROB:
        return {"values": {s: float(value[i]) for i, s in enumerate(model.states)}}
    members = value.members() if hasattr(value, "members") else value
    return {"states": [s for i, s in enumerate(model.states) if i in members]}


def _distance(model, a, b):
    if model.kind == PROB:
        return max((abs(float(x) - float(y)) for x, y in zip(a, b)), default=0.0)
    ma = a.members() if hasattr(a, "members") else frozenset(a)
    mb = b.members() if hasattr(b, "members") else frozenset(b)
    return 0.0 if ma == mb else 1.0


def _agree_tol(model, tol):
    return 2 * tol if model.kind == PROB else 0.0


# -- commands --------------------------------------------------------------


def cmd_check(args):
    model = _model(args)
    inst = instance_for(args.logic, model)
    check_kind(model, args.logic)
    f = parse_formula(args.formula, inst)
    report = {"command": "check", "logic": args.logic, "formula": show(f), "semantics": args.semantics,
              "tol": args.tol}
    results, values = {}, {}
    runs = {"least": eval_least, "initial": eval_initial}
    for mode in ("least", "initial"):
        if args.semantics in (mode, "both"):
            r = runs[mode](model, f, inst, args.tol)
            values[mode] = r.value
            results[mode] = {**encode(model, r.value), "iterations": r.iterations, "residual": r.residual}
    report["results"] = results
    if args.semantics == "both":
        gap = _distance(model, values["least"], values["initial"])
        report["discrepancy"] = gap
        report["agreement"] = gap <= _agree_tol(model, args.tol)
        if not report["agreement"]:
            raise Disagreement(report)
    return report


def cmd_normalize(args):
    p = prg.parse_program(args.program)
    nf = prg.normal_form(p)
    return {"command": "normalize", "program": prg.show(p), "normalForm": nf.show(),
            "closureSize": len(prg.derivative_closure(p))}


def cmd_invariance(args):
    m1, m2 = read_model(args.model1), read_model(args.model2)
    with open(args.map, encoding="utf-8") as fh:
        fmap = load_state_map(json.load(fh), m1, m2)
    logic = args.logic or {KRIPKE: CFL, LABELED: PDL, PROB: QUANT}[m1.kind]
    check_kind(m1, logic)
    inst = instance_for(logic, m1)
    f = parse_formula(args.formula, inst)
    verdict = check_invariance(fmap, f, inst, tol=1e-6)
    report = {"command": "invariance", "logic": logic, "formula": show(f), "invariant": verdict.ok,
              "rows": [{"formula": show(k), "agrees": ok} for k, ok in verdict.rows]}
    if not verdict.ok:
        report["witness"] = {"formula": show(verdict.formula), "state": verdict.state}
        raise Disagreement(report)
    return report


def cmd_oracle_compare(args):
    model = _model(args)
    check_kind(model, args.logic)
    inst = instance_for(args.logic, model)
    f = parse_formula(args.formula, inst)
    least = eval_least(model, f, inst, args.tol).value
    initial = eval_initial(model, f, inst, args.tol).value
    oracle = oracle_eval(model, f, inst)
    gaps = {"least": _distance(model, least, oracle), "initial": _distance(model, initial, oracle)}
    worst = max(gaps.values())
    report = {"command": "oracle-compare", "logic": args.logic, "formula": show(f),
              "model": list(model.states), "least": encode(model, least), "initial": encode(model, initial),
              "oracle": encode(model, oracle), "discrepancy": worst,
              "agreement": worst <= (1e-6 if model.kind == PROB else 0.0)}
    if not report["agreement"]:
        raise Disagreement(report)
    return report


def check_kind(model, logic):
    if model.kind != _KIND[logic]:
        raise UserError(f"the {logic} logic needs a {_KIND[logic]} model, got {model.kind}")


# -- plumbing --------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="cofix", description=__doc__.splitlines()[0])
    ap.add_argument("--pretty", action="store_true", help="human-readable output")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_opts(p):
        p.add_argument("--model", help="model JSON file")
        p.add_argument("--seed", type=int, help="generate a random model from this seed")
        p.add_argument("--states", type=int, default=5, help="size of a generated model")
        p.add_argument("--logic", required=True, choices=INSTANCE_IDS)
        p.add_argument("--formula", required=True)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)

    p = sub.add_parser("check", help="evaluate a formula")
    model_opts(p)
    p.add_argument("--semantics", choices=("least", "initial", "both"), default="both")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("normalize", help="normal form of a PDL program")
    p.add_argument("--program", required=True)
    p.set_defaults(fn=cmd_normalize)

    p = sub.add_parser("invariance", help="compare a formula across a morphism")
    p.add_argument("--model1", required=True)
    p.add_argument("--model2", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--logic", choices=INSTANCE_IDS)
    p.set_defaults(fn=cmd_invariance)

    p = sub.add_parser("oracle-compare", help="evaluators against the reference oracles")
    model_opts(p)
    p.set_defaults(fn=cmd_oracle_compare)
    return ap


def render(report, pretty):
    if not pretty:
        return json.dumps(report, sort_keys=True)
    lines = []
    for k in sorted(report):
        v = report[k]
        lines.append(f"{k}: {json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v}")
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        report = args.fn(args)
        code = EXIT_OK
    except Disagreement as e:
        report, code = e.report, EXIT_FAIL
    except (UserError, ParseError, FormulaError, ModelError, NotAMorphism, OSError,
            json.JSONDecodeError) as e:
        report, code = {"command": args.command, "error": str(e)}, EXIT_USER
        if isinstance(e, NotAMorphism):
            report["witness"] = {"state": e.verdict.state, "reason": e.verdict.reason}
    except (SemanticsError, SchemeError, OracleError, LatticeError, RuntimeError) as e:
        report, code = {"command": args.command, "error": f"{type(e).__name__}: {e}"}, EXIT_FAIL
    print(render(report, args.pretty))
    return code


if __name__ == "__main__":
    sys.exit(main())
