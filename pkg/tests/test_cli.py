import json
import math

import numpy as np
import pytest

from fraceig.cli import (
    EXIT_INVALID,
    EXIT_OK,
    EXIT_SOLVER,
    THREADS_ENV,
    config_hash,
    main,
    mask_path,
    parse_config,
    preset_weight,
    run,
)
from fraceig.environment import eval_weight
from fraceig.errors import UnknownPreset, ValidationError
from fraceig.pencil import solve

from conftest import preset_system


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


SWEEP = {"weight": {"preset": "m1"}, "cutoff": 6, "task": "sweep-s",
         "params": {"d": [0.2, 1.0], "s_grid": [0.25, 0.5, 0.75, 1.0]}}


def test_presets():
    assert eval_weight(preset_weight("m1"), (0.1, 0.1)) == 8
    assert eval_weight(preset_weight("m2"), (3.0, 3.0)) == -1
    assert eval_weight(preset_weight("m2"), (0.1, 0.1)) == 1
    with pytest.raises(UnknownPreset):
        preset_weight("m3")


def test_sweep_output_and_determinism(tmp_path):
    cfg = write(tmp_path, SWEEP)
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert main([cfg, "--output", a, "--quiet"]) == EXIT_OK
    assert main([cfg, "--output", b, "--quiet", "--threads", "3"]) == EXIT_OK
    text = open(a).read()
    assert text == open(b).read()
    lines = text.splitlines()
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if not l.startswith("#")]
    assert any(l.startswith("# config_hash: ") for l in meta)
    assert any(l.startswith("# classification[d=1.0]: Increasing") for l in meta)
    assert body[0] == "s,lambda1,neg_lambda_minus1,d_s_lambda1[d=0.2],d_s_lambda1[d=1.0]"
    rows = np.array([[float(x) for x in l.split(",")] for l in body[1:]])
    assert rows.shape == (4, 5)
    np.testing.assert_array_equal(rows[:, 4], rows[:, 1])
    np.testing.assert_allclose(rows[:, 3], 0.2 ** rows[:, 0] * rows[:, 1], rtol=1e-15)


def test_seventeen_digit_round_trip(tmp_path):
    cfg = parse_config({"weight": {"preset": "m1"}, "cutoff": 4, "task": "solve", "params": {"d": 0.3, "s": 0.7}})
    table, _ = run(cfg)
    lam = solve(preset_system("m1", 4), 0.3, 0.7, vectors=False, require_minus1=False).lambda1
    row = table.to_csv().splitlines()[-1].split(",")
    assert float(row[2]) == lam


def test_hash_tracks_semantic_fields():
    base = parse_config(SWEEP)
    assert config_hash(base) == config_hash(parse_config(dict(SWEEP, output="x.csv")))
    # explicit defaults hash the same as omitted ones
    same = dict(SWEEP, domain={"lengths": [math.pi, math.pi], "boundary": "neumann"})
    assert config_hash(base) == config_hash(parse_config(same))
    for change in ({"cutoff": 7}, {"seed": 3}, {"params": dict(SWEEP["params"], d=[0.3, 1.0])}):
        assert config_hash(base) != config_hash(parse_config(dict(SWEEP, **change)))


@pytest.mark.parametrize("raw", [
    dict(SWEEP, colour="red"),
    dict(SWEEP, params=dict(SWEEP["params"], tolerance=1)),
    dict(SWEEP, task="plot"),
    dict(SWEEP, cutoff=2.5),
    dict(SWEEP, weight={"preset": "m1", "background": 0}),
    dict(SWEEP, domain={"lengths": [1.0, 1.0]}),
    {"weight": {"background": -1, "shapes": [{"type": "disk", "center": [0], "radius": 1, "value": 1}]},
     "domain": {"lengths": [1.0]}, "task": "solve"},
    {"weight": {"background": -1}, "task": "solve"},
    {"weight": {"preset": "m1"}, "task": "conditions"},
    {"weight": {"preset": "m1"}, "task": "optimize-weight", "params": {"m_bar": 8}},
    {"weight": {"preset": "m1"}, "task": "simulate", "params": {"sample_every": 0}},
])
def test_strict_parsing(raw):
    with pytest.raises(ValidationError):
        parse_config(raw)


def test_unknown_preset_rejected():
    with pytest.raises(UnknownPreset):
        parse_config({"weight": {"preset": "m3"}, "task": "solve"})


def test_negative_length_exit_code(tmp_path):
    cfg = write(tmp_path, {"domain": {"lengths": [-1.0, 1.0]}, "weight": {"background": -1}, "task": "solve"})
    out = tmp_path / "o.csv"
    assert main([cfg, "--output", str(out)]) == EXIT_INVALID
    assert not out.exists()


@pytest.mark.parametrize("raw", [
    {"weight": {"preset": "m3"}, "task": "solve"},
    {"domain": {"lengths": [1.0]}, "weight": {"background": -1}, "task": "solve"},
    {"weight": {"preset": "m1"}, "cutoff": 4, "task": "conditions",
     "params": {"certificate": {"x0": [0.5, 0.5], "rho": 0.6, "delta": 8, "M": 1}}},
])
def test_invalid_input_exit_code(tmp_path, raw):
    out = tmp_path / "o.csv"
    assert main([write(tmp_path, raw), "--output", str(out)]) == EXIT_INVALID
    assert not out.exists()


def test_malformed_json_and_missing_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main([str(p)]) == EXIT_INVALID
    assert main([str(tmp_path / "nope.json")]) == EXIT_INVALID


def test_solver_error_exit_code(tmp_path):
    raw = {"domain": {"lengths": [1.0]}, "cutoff": 1, "task": "solve",
           "weight": {"background": -1, "shapes": [{"type": "box", "lower": [0], "upper": [0.01], "value": 1}]}}
    out = tmp_path / "o.csv"
    assert main([write(tmp_path, raw), "--output", str(out)]) == EXIT_SOLVER
    assert not out.exists()


def test_failed_run_keeps_previous_output(tmp_path):
    out = tmp_path / "o.csv"
    out.write_text("previous\n")
    assert main([write(tmp_path, {"weight": {"preset": "m3"}, "task": "solve"}), "--output", str(out)]) == EXIT_INVALID
    assert out.read_text() == "previous\n"
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".fraceig-")] == []


def test_conditions_json(tmp_path):
    raw = {"weight": {"preset": "m1"}, "cutoff": 6, "task": "conditions",
           "params": {"certificate": {"x0": [0.35, 0.35], "rho": 0.29, "delta": 8, "M": 1},
                      "s_grid": [0.5, 1.0]}}
    out = tmp_path / "c.json"
    assert main([write(tmp_path, raw), "--output", str(out), "--quiet"]) == EXIT_OK
    doc = json.loads(out.read_text())
    frag = doc["report"]["fragmentation_condition"]
    assert frag["lhs"] == pytest.approx(0.6728, abs=1e-4) and frag["holds"] is False
    assert doc["report"]["abstract_holds_everywhere"] is True


def test_sweep_d(tmp_path):
    raw = {"weight": {"preset": "m1"}, "cutoff": 6, "task": "sweep-d", "params": {"d": [0.1, 2.0]}}
    table, summary = run(parse_config(raw))
    assert table.header[:2] == ["d", "classification"]
    assert summary.startswith("d* = ")
    assert table.rows[0][-1] == 1.0 and table.rows[1][-1] == 0.0


def test_optimize_writes_mask(tmp_path):
    raw = {"weight": {"preset": "m1"}, "cutoff": 4, "task": "optimize-weight",
           "params": {"m_bar": 8, "m_under": 1}}
    out = tmp_path / "opt.csv"
    assert main([write(tmp_path, raw), "--output", str(out), "--quiet"]) == EXIT_OK
    assert mask_path(str(out)) == str(tmp_path / "opt.mask.csv")
    mask = [l for l in open(mask_path(str(out))).read().splitlines() if not l.startswith("#")]
    assert mask[0] == "x0,x1,m"
    assert {float(l.split(",")[2]) for l in mask[1:]} == {8.0, -1.0}
    trace = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert trace[0] == "iteration,lambda1,D_mass"


def test_simulate(tmp_path):
    raw = {"weight": {"preset": "m1"}, "cutoff": 4, "task": "simulate", "params": {"T": 50}}
    table, summary = run(parse_config(raw))
    assert summary == "verdict: Survived"
    assert table.header == ["t", "mass"] and table.rows[-1][0] == pytest.approx(50.0)


def test_stdout_when_no_output(tmp_path, capsys):
    raw = {"weight": {"preset": "m2"}, "cutoff": 3, "task": "solve"}
    assert main([write(tmp_path, raw)]) == EXIT_OK
    out, err = capsys.readouterr()
    assert "d,s,lambda1,lambda_minus1" in out
    assert err.startswith("lambda1 = ")


def test_threads_env(tmp_path, monkeypatch):
    cfg = write(tmp_path, SWEEP)
    monkeypatch.setenv(THREADS_ENV, "nope")
    assert main([cfg, "--quiet"]) == EXIT_INVALID
    assert main([cfg, "--quiet", "--threads", "2"]) == EXIT_OK
    monkeypatch.setenv(THREADS_ENV, "2")
    assert main([cfg, "--quiet"]) == EXIT_OK
