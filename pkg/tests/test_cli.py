from __future__ import annotations

import json
from fractions import Fraction

import pytest

from atinv.cli import EXIT_CONFIG, EXIT_OK, EXIT_PRECISION, EXIT_VERIFY, main
from atinv.families import Divisible, Explicit, GeneratorRule, ScaleRule, pair_rational
from atinv.laurent import LaurentPoly

X = LaurentPoly({1: 1})
DIV2 = Divisible(GeneratorRule.constant(X), ScaleRule.constant(2), 1)


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def run(tmp_path, command, cfg, *extra):
    out = tmp_path / f"{command}.out"
    code = main([command, "--config", write(tmp_path, "cfg.json", cfg), "--out", str(out), *extra])
    return code, out


def test_invariant_divisible(tmp_path):
    code, out = run(tmp_path, "invariant", {"spec": DIV2.to_dict(), "tolerance": 1e-8})
    assert code == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["result"]["value"] == pytest.approx(0.0335523, rel=1e-6)


def test_invariant_odometer(tmp_path):
    code, out = run(tmp_path, "invariant", {"spec": pair_rational(1, 2).to_dict()})
    rep = json.loads(out.read_text())
    assert code == EXIT_OK and rep["result"]["value"] == 0.0 and rep["result"]["meta"]["exact_zero"]


def test_invariant_trivial(tmp_path):
    cfg = {"spec": Explicit((LaurentPoly.one(),), ScaleRule.constant(2)).to_dict()}
    code, out = run(tmp_path, "invariant", cfg)
    assert json.loads(out.read_text())["result"]["value"] == 1.0


def test_precision_not_met(tmp_path):
    cfg = {"spec": Divisible(GeneratorRule.constant(X), ScaleRule(1, 2), 1).to_dict(),
           "witness": {"kind": "next_scale"}, "tolerance": 1e-6, "l_max": 4, "k_max": 8, "d_max": 16}
    code, out = run(tmp_path, "invariant", cfg)
    assert code == EXIT_PRECISION and out.exists()


def test_config_errors(tmp_path):
    assert run(tmp_path, "invariant", {"spec": {"kind": "bogus"}})[0] == EXIT_CONFIG
    assert run(tmp_path, "invariant", {})[0] == EXIT_CONFIG
    assert run(tmp_path, "sweep", {"spec": DIV2.to_dict(), "r_grid": []})[0] == EXIT_CONFIG
    assert main(["invariant"]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["invariant", "--config", str(bad)]) == EXIT_CONFIG


def test_sweep_power_law_and_svg(tmp_path):
    cfg = {"spec": DIV2.to_dict(), "r_grid": ["1/2", 1, 2]}
    code, out = run(tmp_path, "sweep", cfg, "--svg")
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "r,value,lower,upper,status"
    vals = [float(line.split(",")[1]) for line in lines[1:]]
    assert vals[0] == pytest.approx(vals[1] ** 0.5, rel=1e-10)
    assert vals[2] == pytest.approx(vals[1] ** 2, rel=1e-10)
    svg = out.with_suffix(".svg")
    first = svg.read_bytes()
    run(tmp_path, "sweep", cfg, "--svg")
    assert svg.read_bytes() == first


def test_sweep_rational_decreasing(tmp_path):
    cfg = {"spec": pair_rational(1, 3).to_dict(), "r_grid": [0.2, 0.4, 0.6, 0.8, 1.0]}
    code, out = run(tmp_path, "sweep", cfg, "--workers", "2")
    vals = [float(line.split(",")[1]) for line in out.read_text().splitlines()[1:]]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_distinguish(tmp_path):
    cfg = {"spec_a": pair_rational(Fraction(1, 2), 2).to_dict(), "spec_b": pair_rational(2, 2).to_dict()}
    code, out = run(tmp_path, "distinguish", cfg)
    rep = json.loads(out.read_text())
    assert not rep["evaluation"]["disjoint"] and rep["massloss"]["disjoint"]
    assert rep["verdict"] == "distinguished"

    cfg = {"spec_a": DIV2.to_dict(), "spec_b": DIV2.with_r(2).to_dict()}
    rep = json.loads(run(tmp_path, "distinguish", cfg)[1].read_text())
    assert rep["verdict"] == "distinguished"
    assert rep["evaluation"]["b"]["value"] == pytest.approx(0.0011258, rel=1e-4)

    cfg = {"spec_a": DIV2.to_dict(), "spec_b": DIV2.to_dict()}
    assert json.loads(run(tmp_path, "distinguish", cfg)[1].read_text())["verdict"] == "inconclusive"


def test_verify(tmp_path):
    out = tmp_path / "v.json"
    assert main(["verify", "dyadic-slices", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["suites"]["dyadic-slices"]["pass"]
    assert main(["verify", "nope"]) == EXIT_CONFIG


def test_verify_failure_exit(tmp_path, monkeypatch):
    import atinv.cli as cli

    monkeypatch.setitem(cli.SUITES, "dyadic-slices", lambda **kw: {"pass": False, "first_violations": ["x"]})
    assert main(["verify", "dyadic-slices", "--out", str(tmp_path / "v.json")]) == EXIT_VERIFY
