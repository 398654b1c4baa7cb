import json

import pytest

from cofix.models import load_model

M1 = {
    "kind": "kripke",
    "states": ["s0", "s1", "s2"],
    "succ": {"s0": ["s1"], "s1": ["s2"], "s2": ["s2"]},
    "props": {"p": ["s2"], "q": ["s1"]},
}
M2 = {
    "kind": "labeled",
    "states": ["t0", "t1", "t2"],
    "labels": ["a", "b"],
    "succ": {"a": {"t0": ["t1"]}, "b": {"t1": ["t2"]}},
    "props": {"p": ["t2"]},
}
MQ = {
    "kind": "prob",
    "states": ["x", "y"],
    "payoutLabels": ["p"],
    "step": {"x": {"y": 1.0}, "y": {}},
    "payout": {"p": {"x": 0, "y": 1}},
}
MQ2 = {
    "kind": "prob",
    "states": ["u", "w"],
    "payoutLabels": ["p"],
    "step": {"u": {"u": 0.5, "w": 0.25}, "w": {}},
    "payout": {"p": {"u": 0, "w": 0.8}},
}
# two self-looping states with the same valuation
LOOPS = {
    "kind": "kripke",
    "states": ["a", "b"],
    "succ": {"a": ["a"], "b": ["b"]},
    "props": {"p": ["a", "b"]},
}
DOCS = {"m1": M1, "m2": M2, "mq": MQ, "mq2": MQ2, "loops": LOOPS}


@pytest.fixture
def m1():
    return load_model(M1)


@pytest.fixture
def m2():
    return load_model(M2)


@pytest.fixture
def mq():
    return load_model(MQ)


@pytest.fixture
def mq2():
    return load_model(MQ2)


@pytest.fixture
def loops():
    return load_model(LOOPS)


@pytest.fixture
def model_files(tmp_path):
    paths = {}
    for name, doc in DOCS.items():
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(doc))
        paths[name] = str(p)
    return paths


# -- acceptance summary ----------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line, then fail the test if needed."""

    def report(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
