import json

import pytest
from hypothesis import given, strategies as st

from gradcode.cli import main
from gradcode.config import ConfigError, ExperimentConfig, apply_override
from gradcode.delay import DelayParams, TimeModel, optimal_f
from gradcode.encoding import EncodingMatrix
from gradcode.construction import MaskMatrix


def test_defaults_round_trip():
    cfg = ExperimentConfig()
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


@given(
    st.integers(2, 50),
    st.sampled_from(["coded-rs", "uncoded-wait-all", "uncoded-fastest-f"]),
    st.lists(st.integers(0, 10**6), min_size=1, max_size=4),
    st.floats(0.0, 100.0),
    st.one_of(st.none(), st.floats(1e-9, 1e-3)),
)
def test_round_trip(n, scheme, seeds, budget, c_g):
    cfg = ExperimentConfig.from_dict({"code": {"n": n}, "schemes": [scheme], "seeds": seeds,
                                      "train": {"time_budget": budget}, "delay": {"c_g": c_g}})
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg and again.to_json() == cfg.to_json()


def test_save_load(tmp_path):
    cfg = ExperimentConfig.from_dict({"code": {"n": 8, "k": 4, "w": 3}})
    cfg.save(tmp_path / "c.json")
    assert ExperimentConfig.load(tmp_path / "c.json") == cfg


@pytest.mark.parametrize("raw,match", [
    ({"cod": {}}, "unknown config key"),
    ({"code": {"nn": 3}}, r"code\.nn"),
    ({"schemes": []}, "no schemes"),
    ({"schemes": ["coded-mds"]}, "unknown scheme"),
    ({"seeds": []}, "no seeds"),
    ({"code": {"n": 8, "k": 4}}, "together"),
    ({"code": {"n": 5, "k": 4, "w": 1}}, "infeasible"),
    ({"code": {"n": "8"}}, "number"),
    ({"code": {"alpha": 1.5}}, "alpha"),
    ({"data": {"kind": "csv"}}, "path"),
    ({"train": {"loss": "squared"}}, "does not fit"),
    ({"delay": {"model": "hybrid"}}, "delay.model"),
    ({"delay": {"xi": None}}, "null"),
    ({"rescale_fastest_f": 1}, "true or false"),
])
def test_invalid_configs(raw, match):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_dict(raw)


def test_invalid_json(tmp_path):
    with pytest.raises(ConfigError, match="JSON"):
        ExperimentConfig.from_json("{")
    with pytest.raises(ConfigError, match="cannot read"):
        ExperimentConfig.load(tmp_path / "missing.json")


def test_apply_override():
    raw = apply_override({}, "train.step_size=1e-3")
    apply_override(raw, "schemes=[\"coded-rs\"]")
    apply_override(raw, "data.path=some/file.csv")
    assert raw == {"train": {"step_size": 1e-3}, "schemes": ["coded-rs"],
                   "data": {"path": "some/file.csv"}}
    with pytest.raises(ConfigError):
        apply_override({}, "nothing")
    with pytest.raises(ConfigError):
        apply_override({"a": 1}, "a.b=2")


@pytest.mark.parametrize("nkw,summary", [((8, 4, 3), "8 4 3 5 3"), ((4, 4, 4), "4 4 4 3 1"),
                                         ((8, 4, 1), "8 4 1 1 7"), ((9, 4, 1), "9 4 1 1 8")])
def test_gen_code(tmp_path, capsys, nkw, summary):
    n, k, w = nkw
    out = tmp_path / "code"
    assert main(["gen-code", "--n", str(n), "--k", str(k), "--w", str(w), "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == summary
    assert (out / "summary.txt").read_text().strip() == summary
    mask = MaskMatrix.load(out / "mask.txt")
    code = EncodingMatrix.load(out / "encoding.txt")
    assert mask == code.mask
    assert mask.entries.shape == (n, k)


def test_gen_code_all_ones(tmp_path):
    main(["gen-code", "--n", "4", "--k", "4", "--w", "4", "--out", str(tmp_path)])
    code = EncodingMatrix.load(tmp_path / "encoding.txt")
    assert (abs(code.entries - 1) < 1e-12).all()


@pytest.mark.parametrize("args", [["--n", "5", "--k", "4", "--w", "1"], ["--n", "4", "--k", "5", "--w", "2"]])
def test_gen_code_rejects(tmp_path, capsys, args):
    assert main(["gen-code", *args, "--out", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert "error" in err
    if args[1] == "5":
        assert "floor(n*w/k)" in err


def test_optimize_report(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["optimize", "--cm", "1e-7", "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    alpha = float(lines[0].split("=")[1])
    assert abs(alpha - 0.1477) <= 0.0005
    params = DelayParams(0.001, 1.1, 0.035 / 12000, 1e-7, 12000, 80)
    for mode, line in zip(("offline", "online"), lines[1:3]):
        assert line == f"f* ({mode}) = {optimal_f(TimeModel(mode, params))}"
    rows = out.read_text().splitlines()
    assert rows[0] == "alpha,T_offline,T_online" and len(rows) == 1001


def test_optimize_invalid_regime(capsys):
    assert main(["optimize", "--cg", "1e-9", "--N", "10"]) == 0
    assert "INVALID" in capsys.readouterr().out


def test_optimize_bad_params(capsys):
    assert main(["optimize", "--t0", "-1"]) == 1


def sim_config(tmp_path, **extra):
    raw = {"code": {"n": 8}, "data": {"N": 240, "p": 4}, "delay": {"c_g": 1e-6},
           "train": {"time_budget": 0.3, "step_size": 1e-3}, "seeds": [1, 2]}
    raw.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    return path


def test_simulate_outputs_are_deterministic(tmp_path, capsys):
    cfg = sim_config(tmp_path)
    outputs = []
    out = tmp_path / "out"
    for _ in range(2):
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outputs[0] == outputs[1]
    assert set(outputs[0]) == {"summary.csv", "coded-rs_seed1.csv", "coded-rs_seed1.json",
                               "coded-rs_seed2.csv", "coded-rs_seed2.json",
                               "uncoded-wait-all_seed1.csv", "uncoded-wait-all_seed1.json",
                               "uncoded-wait-all_seed2.csv", "uncoded-wait-all_seed2.json"}
    header = outputs[0]["coded-rs_seed1.csv"].decode().splitlines()[0]
    assert header == "iter,wall_clock,train_loss,test_error,scheme,seed"
    snapshot = json.loads(outputs[0]["coded-rs_seed1.json"])
    assert snapshot["seeds"] == [1, 2] and "resolved" in snapshot


def test_simulate_summary_round_times(tmp_path, capsys):
    cfg = sim_config(tmp_path, code={"n": 20}, seeds=[0], train={"time_budget": 2.0})
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = [line.split(",") for line in (out / "summary.csv").read_text().splitlines()[1:]]
    times = {r[0]: float(r[5]) for r in rows}
    assert times["coded-rs"] < times["uncoded-wait-all"]


def test_simulate_overrides_and_seed(tmp_path, capsys):
    cfg = sim_config(tmp_path)
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--set", "schemes=[\"uncoded-fastest-f\"]",
                 "--seed", "5", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == [
        "summary.csv", "uncoded-fastest-f_seed5.csv", "uncoded-fastest-f_seed5.json"]


@pytest.mark.parametrize("override,match", [("schemes=[]", "no schemes"),
                                            ("schemes=[\"mds\"]", "unknown scheme"),
                                            ("code.bogus=1", "unknown config key")])
def test_simulate_config_errors(tmp_path, capsys, override, match):
    cfg = sim_config(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--set", override, "--out", str(tmp_path / "o")]) == 1
    assert match in capsys.readouterr().err


def test_simulate_missing_dataset_cleans_up(tmp_path, capsys):
    cfg = sim_config(tmp_path, data={"kind": "csv", "path": str(tmp_path / "none.csv")})
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 1
    assert list(out.iterdir()) == []


def test_calibrate_command(tmp_path, capsys):
    assert main(["calibrate", "--set", "data.N=600", "--repeats", "5"]) == 0
    assert capsys.readouterr().out.startswith("c_g = ")
