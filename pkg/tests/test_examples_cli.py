import json

import pytest

from w1lift.cli import main
from w1lift.examples import EXAMPLES, ExampleError, ExampleSpec, run_example
from w1lift.space import line_space
from w1lift.wcurves import gen_linear

SMALL = {
    "nonunique_lifts": {},
    "ac_not_enough": {"segments": 6},
    "slice2d": {"grid": 16},
    "cantor_cs": {"depth": 6, "grid": 16},
    "periodic_sigma": {"cells": 16},
}


@pytest.mark.parametrize("name", EXAMPLES)
def test_examples_pass(name):
    rep = run_example(ExampleSpec(name, SMALL[name]))
    failed = [c for c in rep.checks if not c["ok"]]
    assert rep.ok, failed


@pytest.mark.parametrize("kind, cells", [("uniform", 16), ("cantor", 81)])
def test_periodic_variants(kind, cells):
    rep = run_example(ExampleSpec("periodic_sigma", {"sigma0": kind, "cells": cells, "depth": 4}))
    assert rep.ok, [c for c in rep.checks if not c["ok"]]


def test_example_spec_errors():
    with pytest.raises(ExampleError):
        ExampleSpec("nope")
    with pytest.raises(ExampleError):
        ExampleSpec("slice2d", {"colour": 1})


@pytest.fixture
def files(tmp_path):
    space = line_space([0.0, 1.0, 3.0])
    mc = gen_linear(space, [1, 0, 0], [0, 0.5, 0.5], 8)
    curve = tmp_path / "curve.json"
    curve.write_text(json.dumps(mc.to_json()))
    transport = tmp_path / "w1.json"
    transport.write_text(json.dumps({"space": {"coords": [[0], [1], [3]]}, "mu": [1, 0, 0],
                                     "nu": [0, 0.5, 0.5]}))
    bad_space = tmp_path / "bad.json"
    bad_space.write_text(json.dumps({"dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}))
    return tmp_path, curve, transport, bad_space


def test_cli_exit_codes(files, capsys):
    tmp, curve, transport, bad_space = files
    assert main(["space", "validate", str(bad_space)]) == 1
    assert main(["w1", "dist", str(tmp / "missing.json")]) == 2
    assert main(["example", "run", "nope"]) == 2
    assert main(["example", "run", "slice2d", "--param", "colour=1"]) == 2
    assert main(["lift", "build"]) == 2
    capsys.readouterr()


def test_cli_w1_value(files, capsys):
    _, _, transport, _ = files
    assert main(["w1", "dist", str(transport), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["distance"] == pytest.approx(2.0)
    assert out["dual_gap"] <= 1e-9


def test_cli_lift_round_trip(files, capsys):
    tmp, curve, _, _ = files
    out = tmp / "out"
    assert main(["lift", "build", "--curve", str(curve), "--level", "3", "--out", str(out)]) == 0
    lift = out / "lift.json"
    assert lift.exists()
    assert main(["lift", "verify", "--curve", str(curve), "--lift", str(lift)]) == 0
    assert main(["current", "verify", "--curve", str(curve), "--lift", str(lift)]) == 0
    assert main(["current", "extract", "--curve", str(curve), "--lift", str(lift), "--out", str(out)]) == 0
    assert (out / "velocity.csv").read_text().startswith("t,x,y,v,contribution\n")
    assert main(["curve", "decompose", "--curve", str(curve), "--out", str(out)]) == 0
    assert (out / "decomposition.csv").exists()
    assert main(["curve", "geodesic", "--curve", str(curve)]) == 0
    capsys.readouterr()


def test_cli_tampered_lift_fails(files, capsys):
    tmp, curve, _, _ = files
    out = tmp / "out"
    main(["lift", "build", "--curve", str(curve), "--level", "2", "--out", str(out)])
    data = json.loads((out / "lift.json").read_text())
    data["atoms"][0]["curve"]["jumps"] = []
    data["atoms"][0]["curve"].update(values=[2], lc1=True)
    bad = tmp / "bad_lift.json"
    bad.write_text(json.dumps(data))
    assert main(["lift", "verify", "--curve", str(curve), "--lift", str(bad)]) == 1
    capsys.readouterr()


def test_cli_json_is_deterministic(capsys):
    runs = []
    for _ in range(2):
        assert main(["example", "run", "nonunique_lifts", "--json"]) == 0
        runs.append(capsys.readouterr().out)
    assert runs[0] == runs[1]
    assert "runtime_s" not in runs[0]
