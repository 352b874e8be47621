"""Command-line front end: tune, simulate, compare, plant-response.

Every command resolves its configuration (defaults, optional JSON file,
flag overrides), echoes it as config_resolved.json into the output
directory, and writes CSV/JSON artifacts whose bytes depend only on
(config, seed) - floats are serialized with repr so reruns and different
worker counts produce identical files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import motpe
from .config import ConfigError, SimConfig, load_config, resolved_dict
from .engine import (
    POLICY_IDS,
    CcdfTable,
    evaluate_params,
    make_policy,
    nearest_rank_percentile,
    plant_setup,
    pooled_costs,
    run_compare,
    run_montecarlo,
)
from .plant import plant_response_sweep
from .rng import substream

PARAM_KEYS = ("k0", "k1", "z1", "z2")


def _fmt(x) -> str:
    """Deterministic cell formatting: repr for floats (shortest roundtrip),
    plain digits for ints and bools."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(c) for c in row])


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _prepare_out(cfg: SimConfig, out: str) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "config_resolved.json", resolved_dict(cfg))
    return out_dir


def _load_params_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load params file {path}: {exc}") from exc
    missing = [k for k in PARAM_KEYS if k not in data]
    if missing:
        raise ConfigError(
            f"params file {path} is missing keys: {', '.join(missing)}"
        )
    return {k: float(data[k]) for k in PARAM_KEYS}


def _resolve(args) -> SimConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if getattr(args, "episodes", None) is not None:
        cfg.episodes = args.episodes
    if getattr(args, "policy", None):
        cfg.policy.id = args.policy[0] if isinstance(args.policy, list) else args.policy
    if getattr(args, "params", None):
        cfg.policy.params = _load_params_file(args.params)
    return cfg


def _policy_list(args) -> list[str]:
    ids = []
    for chunk in args.policy or []:
        ids.extend(p.strip() for p in chunk.split(",") if p.strip())
    for pid in ids:
        if pid not in POLICY_IDS:
            raise ConfigError(
                f"unknown policy id {pid!r}; valid ids: {', '.join(POLICY_IDS)}"
            )
    return ids


def _metrics_rows(results, n_subbands: int):
    for r in results:
        ul, dl, txf = r.ul_bler, r.dl_bler, r.tx_fraction
        for i in range(r.cost.size):
            yield (
                r.episode,
                i,
                int(r.plant_type[i]),
                float(r.cost[i]),
                float(ul[i]),
                float(dl[i]),
                float(txf[i]),
                *(int(r.subband_use[i, b]) for b in range(n_subbands)),
                int(r.sensing_ops[i]),
                int(r.signaling_msgs[i]),
                bool(r.diverged[i]),
            )


def _write_metrics(out_dir: Path, results, n_subbands: int) -> None:
    header = (
        ["episode", "subnetwork", "plant_type", "cost", "ul_bler", "dl_bler",
         "tx_fraction"]
        + [f"sb{b + 1}_use" for b in range(n_subbands)]
        + ["sensing", "messages", "diverged"]
    )
    _write_csv(out_dir / "metrics.csv", header, _metrics_rows(results, n_subbands))


def _write_ccdf(path: Path, samples) -> None:
    table = CcdfTable.from_samples(samples)
    _write_csv(
        path,
        ["value", "ccdf"],
        zip(table.values.tolist(), table.probs.tolist()),
    )


def _bler_samples(results) -> np.ndarray:
    ul = np.concatenate([r.ul_bler for r in results])
    dl = np.concatenate([r.dl_bler for r in results])
    return np.concatenate([ul, dl])


def _summary_lines(cfg, results) -> list[str]:
    costs = pooled_costs(results)
    p99, f99 = nearest_rank_percentile(costs, 99.0)
    p999, f999 = nearest_rank_percentile(costs, 99.9)
    ul = float(np.concatenate([r.ul_bler for r in results]).mean())
    dl = float(np.concatenate([r.dl_bler for r in results]).mean())
    txf = float(np.concatenate([r.tx_fraction for r in results]).mean())
    div = float(np.concatenate([r.diverged for r in results]).mean())
    rows = [
        ("policy", cfg.policy.id),
        ("episodes", str(len(results))),
        ("subnetworks", str(cfg.deployment.n_subnetworks)),
        ("samples", str(costs.size)),
        ("cost mean", f"{costs.mean():.6g}"),
        ("cost p99", f"{p99:.6g}" + (" (low samples)" if f99 else "")),
        ("cost p99.9", f"{p999:.6g}" + (" (low samples)" if f999 else "")),
        ("UL BLER mean", f"{ul:.6g}"),
        ("DL BLER mean", f"{dl:.6g}"),
        ("tx fraction", f"{txf:.6g}"),
        ("diverged", f"{div:.6g}"),
    ]
    return [f"{k:<14} {v}" for k, v in rows]


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    make_policy(cfg)  # fail fast on bad policy/params before running
    out_dir = _prepare_out(cfg, args.out)
    results = run_montecarlo(cfg)
    _write_metrics(out_dir, results, cfg.radio.n_subbands)
    _write_ccdf(out_dir / "ccdf_cost.csv", pooled_costs(results))
    _write_ccdf(out_dir / "ccdf_bler.csv", _bler_samples(results))
    for line in _summary_lines(cfg, results):
        print(line)
    return 0


def cmd_compare(args) -> int:
    cfg = _resolve(args)
    policies = _policy_list(args)
    if len(policies) < 2:
        raise ConfigError("compare needs at least 2 policies (repeat --policy)")
    densities = args.densities or [cfg.deployment.n_subnetworks]
    # validate every policy up front so nothing runs on a bad list
    for pid in policies:
        probe = dataclasses.replace(cfg)
        probe.policy = dataclasses.replace(cfg.policy, id=pid)
        make_policy(probe)
    out_dir = _prepare_out(cfg, args.out)

    rows = []
    for n in densities:
        run = dataclasses.replace(cfg)
        run.deployment = dataclasses.replace(cfg.deployment, n_subnetworks=int(n))
        by_policy = run_compare(run, policies)
        for pid in policies:
            results = by_policy[pid]
            costs = pooled_costs(results)
            p99, f99 = nearest_rank_percentile(costs, 99.0)
            p999, f999 = nearest_rank_percentile(costs, 99.9)
            ul = float(np.concatenate([r.ul_bler for r in results]).mean())
            dl = float(np.concatenate([r.dl_bler for r in results]).mean())
            txf = float(np.concatenate([r.tx_fraction for r in results]).mean())
            rows += [
                (pid, n, "cost_mean", float(costs.mean()), False),
                (pid, n, "cost_p99", p99, f99),
                (pid, n, "cost_p99.9", p999, f999),
                (pid, n, "ul_bler_mean", ul, False),
                (pid, n, "dl_bler_mean", dl, False),
                (pid, n, "tx_fraction_mean", txf, False),
            ]
            print(
                f"{pid:<14} N={n:<3} mean={costs.mean():<12.6g} "
                f"p99={p99:<12.6g} p99.9={p999:<12.6g}"
            )
    _write_csv(
        out_dir / "comparison.csv",
        ["policy", "n_subnetworks", "metric", "value", "low_samples"],
        rows,
    )
    return 0


def cmd_tune(args) -> int:
    cfg = _resolve(args)
    tc = cfg.tuning
    if args.trials is not None:
        tc.trials = args.trials
    if args.startup is not None:
        tc.startup = args.startup
    if getattr(args, "episodes", None) is not None:
        tc.episodes_per_trial = args.episodes
    if tc.trials < 1:
        raise ConfigError("tuning.trials must be >= 1")
    out_dir = _prepare_out(cfg, args.out)

    trail = []

    def objective(y: np.ndarray):
        params = dict(zip(PARAM_KEYS, (float(v) for v in y)))
        f = evaluate_params(
            cfg, params, tc.episodes_per_trial, tc.horizon_frames,
            threads=cfg.threads,
        )
        trail.append((*y.tolist(), *f))
        return f

    result = motpe.tune(
        objective,
        trials=tc.trials,
        startup=tc.startup,
        gamma=tc.gamma,
        n_candidates=tc.candidates,
        rng=substream(cfg.seed, "motpe", 0),
    )

    _write_csv(
        out_dir / "observations.csv",
        ["trial", *PARAM_KEYS, "f_mu", "f_max"],
        [(i, *row) for i, row in enumerate(trail)],
    )
    front = [
        {
            "trial": int(i),
            **dict(zip(PARAM_KEYS, result.params[i].tolist())),
            "f_mu": float(result.ys[i, 0]),
            "f_max": float(result.ys[i, 1]),
        }
        for i in sorted(result.pareto_idx.tolist())
    ]
    _write_json(out_dir / "pareto.json", front)
    params_out = {k: float(v) for k, v in result.selected.items()}
    params_out["selection"] = result.selection_rule
    params_out["f_mu"] = float(result.ys[result.selected_idx, 0])
    params_out["f_max"] = float(result.ys[result.selected_idx, 1])
    _write_json(out_dir / "params.json", params_out)

    sel = result.selected
    print(f"trials         {tc.trials}")
    print(f"pareto size    {len(front)}")
    print(
        "selected       "
        f"k0={sel['k0']:.6g} k1={sel['k1']:.6g} "
        f"z1={sel['z1']:.6g} z2={sel['z2']:.6g}"
    )
    print(
        f"objectives     f_mu={result.ys[result.selected_idx, 0]:.6g} "
        f"f_max={result.ys[result.selected_idx, 1]:.6g}"
    )
    return 0


def cmd_plant_response(args) -> int:
    cfg = _resolve(args)
    seeds = args.seeds
    sigma = cfg.plants.noise_scale * np.eye(4)
    interarrivals = list(range(1, 11))
    out_dir = _prepare_out(cfg, args.out)
    rows = []
    for label, (model, gain) in zip(
        ("plant1", "plant2"), plant_setup(cfg.plants)
    ):
        costs, diverged = plant_response_sweep(
            model,
            gain,
            interarrivals,
            horizon=cfg.horizon_frames,
            n_seeds=seeds,
            master_seed=cfg.seed,
            dt=cfg.plants.dt_s,
            sigma=sigma,
            clamp=cfg.plants.divergence_clamp,
            init_range=cfg.plants.init_range,
            semantics=cfg.plants.open_loop_semantics,
        )
        for i, m in enumerate(interarrivals):
            rows.append(
                (label, m, float(costs[i].mean()), float(diverged[i].mean()))
            )
            print(
                f"{label:<8} interarrival={m:<3}ms "
                f"mean_cost={costs[i].mean():<12.6g} "
                f"diverged={diverged[i].mean():.2f}"
            )
    _write_csv(
        out_dir / "response.csv",
        ["plant", "interarrival_ms", "mean_cost", "diverged_fraction"],
        rows,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subnetsim",
        description=(
            "Monte Carlo co-simulation of in-factory wireless subnetworks "
            "closing control loops under interference"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, episodes=True):
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--seed", type=int, metavar="S", help="master seed")
        p.add_argument(
            "--threads", type=int, metavar="T",
            help="worker processes (results are thread-count independent)",
        )
        p.add_argument("--out", metavar="DIR", default=None, help="output directory")
        if episodes:
            p.add_argument("--episodes", type=int, metavar="E")

    p_sim = sub.add_parser("simulate", help="run one policy, write metrics + CCDFs")
    common(p_sim)
    p_sim.add_argument("--policy", metavar="ID", choices=POLICY_IDS)
    p_sim.add_argument("--params", metavar="PATH", help="params.json for cadic")
    p_sim.set_defaults(fn=cmd_simulate, default_out="out_simulate")

    p_cmp = sub.add_parser(
        "compare", help="run several policies on common random numbers"
    )
    common(p_cmp)
    p_cmp.add_argument(
        "--policy", metavar="ID", action="append",
        help="policy id (repeat or comma-separate; at least 2)",
    )
    p_cmp.add_argument("--params", metavar="PATH", help="params.json for cadic")
    p_cmp.add_argument(
        "--densities", metavar="N,N,...",
        type=lambda s: [int(v) for v in s.split(",") if v],
        help="subnetwork counts to sweep (default: config value)",
    )
    p_cmp.set_defaults(fn=cmd_compare, default_out="out_compare")

    p_tune = sub.add_parser("tune", help="optimize allocator parameters")
    common(p_tune)
    p_tune.add_argument("--trials", type=int, metavar="T")
    p_tune.add_argument("--startup", type=int, metavar="S")
    p_tune.set_defaults(fn=cmd_tune, default_out="out_tune")

    p_resp = sub.add_parser(
        "plant-response",
        help="finite-horizon cost vs update inter-arrival on a perfect channel",
    )
    common(p_resp, episodes=False)
    p_resp.add_argument(
        "--seeds", type=int, default=20, metavar="K",
        help="independent runs per inter-arrival (default 20)",
    )
    p_resp.set_defaults(fn=cmd_plant_response, default_out="out_plant_response")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None:
        args.out = args.default_out
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
