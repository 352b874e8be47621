"""End-to-end command tests: every command runs in-process against tiny
configurations, and outputs are checked for schema, determinism and exit
codes rather than for simulation quality (the engine tests own that)."""

import csv
import json
from pathlib import Path

from conftest import REF_PARAMS
from subnetsim.cli import main


def _write_cfg(path: Path, **top) -> str:
    base = {
        "deployment": {"n_subnetworks": 3},
        "horizon_frames": 120,
        "episodes": 2,
        "seed": 31,
        "policy": {"id": "cadic", "params": dict(REF_PARAMS)},
    }
    for key, val in top.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict):
            base[key].update(val)
        else:
            base[key] = val
    path.write_text(json.dumps(base))
    return str(path)


def _read_csv(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _snapshot(out_dir: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}


def test_simulate_outputs_and_determinism(tmp_path):
    cfg = _write_cfg(tmp_path / "cfg.json")
    out_a = tmp_path / "a"
    assert main(["simulate", "--config", cfg, "--out", str(out_a)]) == 0

    header, rows = _read_csv(out_a / "metrics.csv")
    assert header == [
        "episode", "subnetwork", "plant_type", "cost", "ul_bler", "dl_bler",
        "tx_fraction", "sb1_use", "sb2_use", "sb3_use", "sensing", "messages",
        "diverged",
    ]
    assert len(rows) == 2 * 3  # episodes x subnetworks
    assert {r[2] for r in rows} <= {"1", "2"}

    header, rows = _read_csv(out_a / "ccdf_cost.csv")
    assert header == ["value", "ccdf"]
    assert len(rows) == 6 and float(rows[0][1]) == 1.0

    resolved = json.loads((out_a / "config_resolved.json").read_text())
    assert resolved["seed"] == 31
    assert resolved["policy"]["params"]["k1"] == 16.0
    assert "tool_version" in resolved

    # rerun and a different worker count must reproduce every byte
    out_b = tmp_path / "b"
    out_c = tmp_path / "c"
    assert main(["simulate", "--config", cfg, "--out", str(out_b)]) == 0
    assert (
        main(["simulate", "--config", cfg, "--out", str(out_c), "--threads", "2"])
        == 0
    )
    assert _snapshot(out_a) == _snapshot(out_b) == _snapshot(out_c)


def test_simulate_policy_and_seed_flags(tmp_path):
    cfg = _write_cfg(tmp_path / "cfg.json", horizon_frames=80, episodes=1)
    out = tmp_path / "out"
    code = main(
        ["simulate", "--config", cfg, "--out", str(out), "--policy", "random",
         "--seed", "5"]
    )
    assert code == 0
    resolved = json.loads((out / "config_resolved.json").read_text())
    assert resolved["policy"]["id"] == "random"
    assert resolved["seed"] == 5


def test_compare_output_schema(tmp_path):
    cfg = _write_cfg(tmp_path / "cfg.json", horizon_frames=100)
    out = tmp_path / "out"
    code = main(
        ["compare", "--config", cfg, "--out", str(out),
         "--policy", "cadic,fp", "--densities", "2,3"]
    )
    assert code == 0
    header, rows = _read_csv(out / "comparison.csv")
    assert header == ["policy", "n_subnetworks", "metric", "value", "low_samples"]
    # 2 policies x 2 densities x 6 metrics
    assert len(rows) == 24
    assert {r[0] for r in rows} == {"cadic", "fp"}
    assert {r[1] for r in rows} == {"2", "3"}
    metrics = {r[2] for r in rows}
    assert "cost_mean" in metrics and "cost_p99.9" in metrics


def test_compare_needs_two_policies(tmp_path):
    cfg = _write_cfg(tmp_path / "cfg.json")
    assert main(["compare", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--policy", "cadic"]) == 2


def test_tune_writes_trail_front_and_selection(tmp_path):
    cfg = _write_cfg(
        tmp_path / "cfg.json",
        horizon_frames=80,
        tuning={"trials": 6, "startup": 3, "episodes_per_trial": 1,
                "horizon_frames": 80},
    )
    out = tmp_path / "out"
    assert main(["tune", "--config", cfg, "--out", str(out)]) == 0

    header, rows = _read_csv(out / "observations.csv")
    assert header == ["trial", "k0", "k1", "z1", "z2", "f_mu", "f_max"]
    assert len(rows) == 6
    assert [r[0] for r in rows] == [str(i) for i in range(6)]

    params = json.loads((out / "params.json").read_text())
    assert set(params) >= {"k0", "k1", "z1", "z2", "selection", "f_mu", "f_max"}
    assert params["k1"] < params["z1"] < params["z2"]

    front = json.loads((out / "pareto.json").read_text())
    assert front and all({"trial", "k0", "f_mu", "f_max"} <= set(e) for e in front)
    # the selected point is one of the front entries
    assert any(e["k0"] == params["k0"] and e["f_mu"] == params["f_mu"]
               for e in front)


def test_plant_response_sweep_csv(tmp_path):
    cfg = _write_cfg(tmp_path / "cfg.json", horizon_frames=300)
    out_a = tmp_path / "a"
    code = main(
        ["plant-response", "--config", cfg, "--out", str(out_a), "--seeds", "3"]
    )
    assert code == 0
    header, rows = _read_csv(out_a / "response.csv")
    assert header == ["plant", "interarrival_ms", "mean_cost", "diverged_fraction"]
    assert len(rows) == 20  # both plants x inter-arrivals 1..10
    assert [r[0] for r in rows[:10]] == ["plant1"] * 10
    assert [int(r[1]) for r in rows[:10]] == list(range(1, 11))

    out_b = tmp_path / "b"
    assert main(
        ["plant-response", "--config", cfg, "--out", str(out_b), "--seeds", "3"]
    ) == 0
    assert _snapshot(out_a) == _snapshot(out_b)


def test_exit_codes(tmp_path):
    ok = _write_cfg(tmp_path / "ok.json")
    # unknown policy id through the config file
    bad_policy = _write_cfg(tmp_path / "p.json", policy={"id": "nope"})
    assert main(["simulate", "--config", bad_policy,
                 "--out", str(tmp_path / "o1")]) == 2
    # cadic without parameters
    no_params = _write_cfg(tmp_path / "np.json", policy={"id": "cadic",
                                                         "params": None})
    assert main(["simulate", "--config", no_params,
                 "--out", str(tmp_path / "o2")]) == 2
    # malformed params file
    bad_params = tmp_path / "params.json"
    bad_params.write_text(json.dumps({"k0": 0.5}))  # missing keys
    assert main(["simulate", "--config", ok, "--params", str(bad_params),
                 "--out", str(tmp_path / "o3")]) == 2
    # unknown config key
    unknown = tmp_path / "u.json"
    unknown.write_text(json.dumps({"deployment": {"n_subnets": 4}}))
    assert main(["simulate", "--config", str(unknown),
                 "--out", str(tmp_path / "o4")]) == 2
    # missing config file
    assert main(["simulate", "--config", str(tmp_path / "absent.json"),
                 "--out", str(tmp_path / "o5")]) == 2
    # unknown policy in a compare list
    assert main(["compare", "--config", ok, "--out", str(tmp_path / "o6"),
                 "--policy", "cadic,bogus"]) == 2
    # internal failures map to 3, not a traceback
    broken = _write_cfg(tmp_path / "h.json", horizon_frames=-5)
    assert main(["simulate", "--config", broken,
                 "--out", str(tmp_path / "o7")]) == 3
