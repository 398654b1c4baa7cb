import json
import subprocess
import sys

import pytest

from cofix.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def report(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


def test_check_examples(capsys, model_files):
    code, r = report(capsys, "check", "--model", model_files["m1"], "--logic", "diamondstar",
                     "--formula", "dia* p")
    assert code == 0 and r["agreement"] is True
    assert r["results"]["least"]["states"] == ["s0", "s1", "s2"]
    assert r["results"]["initial"]["states"] == ["s0", "s1", "s2"]
    code, r = report(capsys, "check", "--model", model_files["m2"], "--logic", "pdl", "--formula", "<a;b>p",
                     "--semantics", "initial")
    assert code == 0 and r["results"]["initial"]["states"] == ["t0"] and "least" not in r["results"]
    code, r = report(capsys, "check", "--model", model_files["mq"], "--logic", "quant",
                     "--formula", "sigma[0.5] p", "--semantics", "least", "--tol", "1e-12")
    vals = r["results"]["least"]["values"]
    assert code == 0 and vals["x"] == pytest.approx(0.25) and vals["y"] == pytest.approx(0.5)


def test_normalize_examples(capsys):
    for prog, nf in [("a*", "a;a* + eps"), ("eps", "eps"), ("(a;b)*", "a;(b;(a;b)*) + eps")]:
        code, r = report(capsys, "normalize", "--program", prog)
        assert code == 0 and r["normalForm"] == nf
    code, r = report(capsys, "normalize", "--program", "(a;b)*")
    assert r["closureSize"] == 2


def test_invariance_examples(capsys, model_files, tmp_path):
    ident = tmp_path / "id.json"
    ident.write_text(json.dumps({"map": {"s0": "s0", "s1": "s1", "s2": "s2"}}))
    code, r = report(capsys, "invariance", "--model1", model_files["m1"], "--model2", model_files["m1"],
                     "--map", str(ident), "--formula", "dia* p", "--logic", "diamondstar")
    assert code == 0 and r["invariant"] and all(row["agrees"] for row in r["rows"])

    one = tmp_path / "one.json"
    one.write_text(json.dumps({"kind": "kripke", "states": ["a"], "succ": {"a": ["a"]}, "props": {"p": ["a"]}}))
    collapse = tmp_path / "collapse.json"
    collapse.write_text(json.dumps({"map": {"a": "a", "b": "a"}}))
    code, r = report(capsys, "invariance", "--model1", model_files["loops"], "--model2", str(one),
                     "--map", str(collapse), "--formula", "dia* p", "--logic", "diamondstar")
    assert code == 0 and r["invariant"]

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"map": {"s0": "s0", "s1": "s2", "s2": "s2"}}))
    code, r = report(capsys, "invariance", "--model1", model_files["m1"], "--model2", model_files["m1"],
                     "--map", str(bad), "--formula", "dia* p", "--logic", "diamondstar")
    assert code == 1 and r["witness"] == {"state": "s1", "reason": "prop"}


def test_invariance_default_logic(capsys, model_files, tmp_path):
    ident = tmp_path / "id.json"
    ident.write_text(json.dumps({"map": {"x": "x", "y": "y"}}))
    code, r = report(capsys, "invariance", "--model1", model_files["mq"], "--model2", model_files["mq"],
                     "--map", str(ident), "--formula", "sigma[0.3] p")
    assert code == 0 and r["logic"] == "quant"


def test_oracle_compare_examples(capsys, model_files):
    code, r = report(capsys, "oracle-compare", "--model", model_files["m1"], "--logic", "diamondstar",
                     "--formula", "dia* p")
    assert code == 0 and r["discrepancy"] == 0.0
    code, r = report(capsys, "oracle-compare", "--model", model_files["mq"], "--logic", "quant",
                     "--formula", "sigma[1] p")
    assert code == 0 and r["discrepancy"] == 0.0 and r["least"]["values"] == {"x": 0.0, "y": 1.0}
    nested = r"lfp{p /\ (q /\ dia lfp{q /\ dia X \/ r /\ box v}(X/v) \/ r /\ box X)}()"
    code, r = report(capsys, "oracle-compare", "--seed", "5", "--logic", "cfl", "--formula", nested)
    assert code == 0 and r["discrepancy"] == 0.0 and len(r["model"]) == 5


@pytest.mark.parametrize("argv", [
    ["check", "--model", "{m1}", "--logic", "diamondstar", "--formula", "dia* ("],
    ["check", "--model", "{m1}", "--logic", "diamondstar", "--formula", "dia* zz"],
    ["check", "--model", "{m1}", "--logic", "quant", "--formula", "dia* p"],
    ["check", "--model", "/nonexistent.json", "--logic", "diamondstar", "--formula", "p"],
    ["check", "--logic", "diamondstar", "--formula", "p"],
    ["normalize", "--program", "a +"],
])
def test_user_errors_exit_1(capsys, model_files, argv):
    argv = [a.format(**model_files) for a in argv]
    code, r = report(capsys, *argv)
    assert code == 1 and "error" in r


def test_parse_error_mentions_position(capsys, model_files):
    code, r = report(capsys, "check", "--model", model_files["m1"], "--logic", "diamondstar",
                     "--formula", r"p /\ ")
    assert code == 1 and "position" in r["error"]


def test_pretty_output(capsys):
    code, out = run(capsys, "--pretty", "normalize", "--program", "a*")
    assert code == 0 and "normalForm: a;a* + eps" in out.splitlines()


def test_reports_are_deterministic(capsys, model_files):
    argv = ["check", "--seed", "3", "--logic", "pdl", "--formula", "<(a + b)*>p"]
    first = run(capsys, *argv)
    second = run(capsys, *argv)
    assert first == second and first[0] == 0


def test_module_entry_point(model_files):
    proc = subprocess.run([sys.executable, "-m", "cofix", "check", "--model", model_files["m1"], "--logic",
                           "cfl", "--formula", r"lfp{p \/ dia X}()"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["least"]["states"] == ["s0", "s1", "s2"]
