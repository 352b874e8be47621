"""Episode engine: plants, mobility, channel, PHY and one allocator wired
into the synchronized frame loop, plus Monte Carlo aggregation.

Frame order is a hard two-phase barrier: mobility and channel advance
first, then every due subnetwork computes its decision cost and the
allocator picks sub-bands and power, then the TDD round resolves uplink
and downlink, then the plants integrate one step, and finally the
interference averagers fold in the uplink RSSI of this frame (so no
decision at frame t ever sees frame-t measurements).
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import (
    FpPolicy,
    IdealPolicy,
    RandomPolicy,
    SeqGreedyPolicy,
    SisaPcPolicy,
    SisaPolicy,
)
from .cadic import CadicParams, CadicPolicy
from .channel import EpisodeChannel
from .config import ConfigError, PlantConfig, RadioConfig, SimConfig
from .geometry import init_deployment, simulate_trajectory
from .phy import PhyParams, channel_uses, noise_power_w, tdd_round, tdd_rounds_batch
from .plant import PlantBatch, PlantModel, lqr_gain
from .rng import substream

POLICY_IDS = (
    "ideal",
    "random",
    "fp",
    "seq_greedy",
    "sisa",
    "sisa_pc",
    "cadic",
    "cadic_modified",
)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def phy_params(rc: RadioConfig) -> PhyParams:
    block_bw = rc.subcarriers_per_block * rc.subcarrier_spacing_khz * 1e3
    return PhyParams(
        n_subbands=rc.n_subbands,
        blocks_per_subband=rc.blocks_per_subband,
        noise_block_w=noise_power_w(block_bw, rc.noise_figure_db),
        uses=channel_uses(block_bw, rc.phase_duration_s),
        ul_payload_bits=rc.ul_payload_bits,
        dl_payload_bits=rc.dl_payload_bits,
    )


_PLANT_CACHE: dict = {}


def plant_setup(pc: PlantConfig):
    """(model, lqr gain) pairs for both plant types; gains are cached since
    the Riccati solve depends only on the matrices."""
    key = json.dumps(dataclasses.asdict(pc), sort_keys=True)
    if key not in _PLANT_CACHE:
        out = []
        for label, sub in (("plant1", pc.plant1), ("plant2", pc.plant2)):
            model = PlantModel(
                np.asarray(sub.a, dtype=float),
                np.asarray(sub.b, dtype=float),
                np.asarray(pc.q, dtype=float),
                np.asarray(pc.r, dtype=float),
                interarrival_frames=sub.interarrival_frames,
                label=label,
            )
            gain, _ = lqr_gain(model.a, model.b, model.q, model.r)
            out.append((model, gain))
        _PLANT_CACHE[key] = tuple(out)
    return _PLANT_CACHE[key]


def make_policy(cfg: SimConfig):
    rc, pc = cfg.radio, cfg.policy
    p_max = dbm_to_watts(rc.p_max_dbm)
    nsb = rc.n_subbands
    pid = pc.id
    if pid == "ideal":
        return IdealPolicy(nsb, p_max)
    if pid == "random":
        return RandomPolicy(nsb, p_max)
    if pid == "fp":
        return FpPolicy(nsb, p_max)
    if pid == "seq_greedy":
        return SeqGreedyPolicy(
            nsb, p_max, rc.blocks_per_subband, period=pc.realloc_period_frames
        )
    if pid == "sisa":
        return SisaPolicy(
            nsb,
            p_max,
            rc.blocks_per_subband,
            period=pc.realloc_period_frames,
            sweeps=pc.sisa_sweeps,
        )
    if pid == "sisa_pc":
        return SisaPcPolicy(
            nsb,
            p_max,
            rc.blocks_per_subband,
            period=pc.realloc_period_frames,
            sweeps=pc.sisa_sweeps,
        )
    if pid in ("cadic", "cadic_modified"):
        if pc.params is None:
            raise ConfigError(
                f"policy {pid!r} needs parameters k0, k1, z1, z2: pass them via "
                "--params params.json or the policy.params config key"
            )
        params = CadicParams.from_dict(pc.params)
        gate = dbm_to_watts(pc.gate_dbm) if pid == "cadic_modified" else None
        return CadicPolicy(params, nsb, p_max, gate_w=gate)
    raise ConfigError(f"unknown policy id {pid!r}; valid ids: {', '.join(POLICY_IDS)}")


@dataclass
class EpisodeResult:
    """Per-subnetwork outcomes of one episode; counters are exact integers
    so that success/attempt bookkeeping balances without rounding."""

    episode: int
    plant_type: np.ndarray
    cost: np.ndarray
    diverged: np.ndarray
    due_frames: np.ndarray
    tx_frames: np.ndarray
    ul_attempts: np.ndarray
    ul_successes: np.ndarray
    dl_attempts: np.ndarray
    dl_successes: np.ndarray
    subband_use: np.ndarray
    sensing_ops: np.ndarray
    signaling_msgs: np.ndarray
    decision_rounds: int

    @staticmethod
    def _ratio(fail, total) -> np.ndarray:
        out = np.zeros(total.shape)
        nz = total > 0
        out[nz] = fail[nz] / total[nz]
        return out

    @property
    def ul_bler(self) -> np.ndarray:
        return self._ratio(self.ul_attempts - self.ul_successes, self.ul_attempts)

    @property
    def dl_bler(self) -> np.ndarray:
        return self._ratio(self.dl_attempts - self.dl_successes, self.dl_attempts)

    @property
    def tx_fraction(self) -> np.ndarray:
        return self._ratio(self.tx_frames, self.due_frames)


class EpisodeContext:
    """Allocator-independent realization of one episode: plant mix, initial
    states, disturbance draws, the traffic schedule, and (built on first
    use) the full channel realization. Sharing one context across
    allocators is what makes common-random-number comparisons cheap."""

    def __init__(self, cfg: SimConfig, episode: int):
        self.cfg = cfg
        self.episode = episode
        n = cfg.deployment.n_subnetworks
        horizon = cfg.horizon_frames
        seed = cfg.seed
        pcfg = cfg.plants
        (m1, g1), (m2, g2) = plant_setup(pcfg)
        nq = m1.n_states
        self.is_p1 = substream(seed, "plant-mix", episode).random(n) < pcfg.mix_plant1
        self.x0 = substream(seed, "plant-init", episode).uniform(
            -pcfg.init_range, pcfg.init_range, (n, nq)
        )
        chol = np.linalg.cholesky(pcfg.noise_scale * np.eye(nq))
        noise = (
            substream(seed, "plant-noise", episode).standard_normal((horizon, n, nq))
            @ chol.T
        )
        interarrival = np.where(
            self.is_p1, m1.interarrival_frames, m2.interarrival_frames
        )
        # per plant type: instance indices and their contiguous noise track
        self.groups = []
        for model, gain, idx in (
            (m1, g1, np.nonzero(self.is_p1)[0]),
            (m2, g2, np.nonzero(~self.is_p1)[0]),
        ):
            if idx.size:
                self.groups.append(
                    (idx, model, gain, np.ascontiguousarray(noise[:, idx]))
                )
        self.due_all = (np.arange(horizon)[:, None] % interarrival) == 0
        self.due_frames = self.due_all.sum(axis=0)
        self.phy = phy_params(cfg.radio)
        self.noise_subband_w = self.phy.noise_block_w * cfg.radio.blocks_per_subband
        self._channel = None

    def channel(self) -> EpisodeChannel:
        """The episode's channel, realized lazily so that runs without a
        radio never pay for it."""
        if self._channel is None:
            cfg, episode = self.cfg, self.episode
            dc, cc, rc = cfg.deployment, cfg.channel, cfg.radio
            seed = cfg.seed
            dep = init_deployment(
                dc.n_subnetworks,
                substream(seed, "deployment", episode),
                area_side=dc.area_side_m,
                radius=dc.cell_radius_m,
                sensor_min_dist=dc.sensor_min_dist_m,
                speed=dc.speed_mps,
            )
            traj = simulate_trajectory(
                dep,
                cfg.horizon_frames,
                rc.frame_s,
                substream(seed, "mobility", episode),
            )
            ch = EpisodeChannel(
                n=dc.n_subnetworks,
                n_subbands=rc.n_subbands,
                blocks_per_subband=rc.blocks_per_subband,
                fc_ghz=cc.fc_ghz,
                clutter_size_m=cc.clutter_size_m,
                clutter_density=cc.clutter_density,
                shadow_std_los_db=cc.shadow_sigma_los_db,
                shadow_std_nlos_db=cc.shadow_sigma_nlos_db,
                corr_dist_m=cc.shadow_corr_dist_m,
                shadow_grid_m=1.0,
                area_side=dc.area_side_m,
                speed=dc.speed_mps,
                frame_dt=rc.frame_s,
                los_reeval_m=cc.los_reeval_dist_m,
                rng_shadow=substream(seed, "shadow", episode),
                rng_fading=substream(seed, "fading", episode),
                rng_los=substream(seed, "los", episode),
            )
            ch.precompute(
                traj,
                traj + dep.sensor_offsets[None, :, :],
                traj + dep.actuator_offsets[None, :, :],
            )
            self._channel = ch
        return self._channel


def run_episode(
    cfg: SimConfig, episode: int, policy=None, context: EpisodeContext | None = None
) -> EpisodeResult:
    if policy is None:
        policy = make_policy(cfg)
    ctx = context if context is not None else EpisodeContext(cfg, episode)
    n = cfg.deployment.n_subnetworks
    horizon = cfg.horizon_frames
    seed = cfg.seed
    pcfg = cfg.plants
    nsb = cfg.radio.n_subbands

    batches = [
        (
            idx,
            PlantBatch(
                model,
                gain,
                ctx.x0[idx],
                pcfg.dt_s,
                clamp=pcfg.divergence_clamp,
                semantics=pcfg.open_loop_semantics,
            ),
            noise_g,
            np.zeros(idx.size),
        )
        for idx, model, gain, noise_g in ctx.groups
    ]
    policy.start_episode(n, substream(seed, "policy", episode))
    due_all = ctx.due_all

    ul_tx_sum = np.zeros(n, dtype=np.int64)
    ul_ok_sum = np.zeros(n, dtype=np.int64)
    dl_ok_sum = np.zeros(n, dtype=np.int64)
    subband_use = np.zeros((n, nsb), dtype=np.int64)

    if policy.force_success:
        # no frame round: every due loop closes and nothing is transmitted
        for t in range(horizon):
            closed = due_all[t]
            for idx, batch, noise_g, cost_sum in batches:
                cost_sum += batch.step(closed[idx], noise_g[t])
        tx_frames = ctx.due_frames.astype(np.int64)
    elif policy.uses_cost or policy.uses_rssi:
        # the allocator reads plant state or radio feedback, so frames must
        # resolve one at a time
        ch = ctx.channel()
        phy = ctx.phy
        rng_bler = substream(seed, "bler", episode)
        noise_subband_w = ctx.noise_subband_w
        period = getattr(policy, "period", 0)
        uses_cost = policy.uses_cost
        uses_rssi = policy.uses_rssi
        uses_crossgains = policy.uses_crossgains
        decide = policy.decide
        channel_step = ch.step
        chi = np.empty(n)
        for t in range(horizon):
            due = due_all[t]
            channel_step(t)
            if uses_cost:
                for idx, batch, _, _ in batches:
                    chi[idx] = batch.decision_cost()
            if uses_crossgains and t % period == 0:
                policy.realloc(t, ch.crossgain_ul(), noise_subband_w)
            mask, power = decide(t, due, chi)
            out = tdd_round(ch.gains[0], ch.gains[1], mask, power, due, phy, rng_bler)
            closed = out.loop_closed
            ul_tx = out.ul_tx
            ul_tx_sum += ul_tx
            ul_ok_sum += out.ul_ok
            dl_ok_sum += out.dl_ok
            subband_use += mask & ul_tx[:, None]
            for idx, batch, noise_g, cost_sum in batches:
                cost_sum += batch.step(closed[idx], noise_g[t])
            if uses_rssi and ul_tx.any():
                policy.sense(out.rssi)
        tx_frames = ul_tx_sum
    else:
        # feedback-free allocator: its whole mask/power schedule is fixed by
        # the channel and the policy stream, so the TDD rounds batch over
        # the episode
        ch = ctx.channel()
        rng_bler = substream(seed, "bler", episode)
        period = getattr(policy, "period", 0)
        uses_crossgains = policy.uses_crossgains
        decide = policy.decide
        masks = np.empty((horizon, n, nsb), dtype=bool)
        powers = np.empty((horizon, n))
        for t in range(horizon):
            if uses_crossgains and t % period == 0:
                ch.step(t)
                policy.realloc(t, ch.crossgain_ul(), ctx.noise_subband_w)
            masks[t], powers[t] = decide(t, due_all[t], None)
        ul_tx_all, ul_ok_all, dl_ok_all = tdd_rounds_batch(
            ch.gains_ul_all, ch.gains_dl_all, masks, powers, due_all, ctx.phy, rng_bler
        )
        ul_tx_sum = ul_tx_all.sum(axis=0, dtype=np.int64)
        ul_ok_sum = ul_ok_all.sum(axis=0, dtype=np.int64)
        dl_ok_sum = dl_ok_all.sum(axis=0, dtype=np.int64)
        subband_use = (masks & ul_tx_all[:, :, None]).sum(axis=0, dtype=np.int64)
        for t in range(horizon):
            closed = dl_ok_all[t]
            for idx, batch, noise_g, cost_sum in batches:
                cost_sum += batch.step(closed[idx], noise_g[t])
        tx_frames = ul_tx_sum

    chi_sum = np.zeros(n)
    diverged = np.zeros(n, dtype=bool)
    for idx, batch, _, cost_sum in batches:
        chi_sum[idx] = cost_sum
        diverged[idx] = batch.diverged
    return EpisodeResult(
        episode=episode,
        plant_type=np.where(ctx.is_p1, 1, 2).astype(np.int8),
        cost=chi_sum / horizon,
        diverged=diverged,
        due_frames=ctx.due_frames.astype(np.int64),
        tx_frames=tx_frames.copy(),
        ul_attempts=ul_tx_sum,
        ul_successes=ul_ok_sum,
        dl_attempts=ul_ok_sum.copy(),
        dl_successes=dl_ok_sum,
        subband_use=subband_use,
        sensing_ops=policy.sensing_ops.copy(),
        signaling_msgs=policy.signaling_msgs.copy(),
        decision_rounds=policy.decision_rounds,
    )


def _with_policy_id(cfg: SimConfig, policy_id: str) -> SimConfig:
    run = dataclasses.replace(cfg)
    run.policy = dataclasses.replace(cfg.policy, id=policy_id)
    return run


def _episode_worker(args):
    cfg, episode = args
    return run_episode(cfg, episode)


def _compare_worker(args):
    cfg, episode, policy_ids = args
    ctx = EpisodeContext(cfg, episode)
    return episode, [
        run_episode(cfg, episode, make_policy(_with_policy_id(cfg, pid)), context=ctx)
        for pid in policy_ids
    ]


def run_montecarlo(
    cfg: SimConfig, episodes: int | None = None, threads: int | None = None
) -> list[EpisodeResult]:
    """Independent episodes, merged in episode order (so results do not
    depend on worker count or scheduling)."""
    n_ep = cfg.episodes if episodes is None else episodes
    if n_ep < 1:
        raise ConfigError("episodes must be >= 1")
    workers = threads if threads is not None else cfg.threads
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or n_ep == 1:
        policy = make_policy(cfg)
        return [run_episode(cfg, e, policy) for e in range(n_ep)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(
                _episode_worker,
                ((cfg, e) for e in range(n_ep)),
                chunksize=max(1, n_ep // (8 * workers)),
            )
        )
    results.sort(key=lambda r: r.episode)
    return results


def run_compare(
    cfg: SimConfig,
    policy_ids,
    episodes: int | None = None,
    threads: int | None = None,
) -> dict:
    """Run several allocators over the same episodes under common random
    numbers, sharing each episode's channel realization across them.
    Results are identical to per-policy run_montecarlo calls."""
    policy_ids = list(policy_ids)
    n_ep = cfg.episodes if episodes is None else episodes
    if n_ep < 1:
        raise ConfigError("episodes must be >= 1")
    workers = threads if threads is not None else cfg.threads
    if workers is None:
        workers = os.cpu_count() or 1
    results: dict = {pid: [] for pid in policy_ids}
    if workers <= 1 or n_ep == 1:
        policies = {pid: make_policy(_with_policy_id(cfg, pid)) for pid in policy_ids}
        for e in range(n_ep):
            ctx = EpisodeContext(cfg, e)
            for pid in policy_ids:
                results[pid].append(run_episode(cfg, e, policies[pid], context=ctx))
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        rows = list(
            pool.map(
                _compare_worker,
                ((cfg, e, policy_ids) for e in range(n_ep)),
                chunksize=max(1, n_ep // (8 * workers)),
            )
        )
    rows.sort(key=lambda r: r[0])
    for _, per_ep in rows:
        for pid, res in zip(policy_ids, per_ep):
            results[pid].append(res)
    return results


def pooled_costs(results) -> np.ndarray:
    return np.concatenate([r.cost for r in results])


def objectives(results) -> tuple[float, float]:
    """Mean and max finite-horizon cost pooled over episodes and
    subnetworks; the two tuning objectives."""
    costs = pooled_costs(results)
    return float(costs.mean()), float(costs.max())


def nearest_rank_percentile(samples, p: float):
    """(value, low_sample_warning) at percentile p by the nearest-rank rule;
    the warning trips when fewer than 10 samples lie above the rank."""
    samples = np.sort(np.asarray(samples, dtype=float).ravel())
    n = samples.size
    if n == 0:
        raise ValueError("no samples")
    if not 0.0 < p <= 100.0:
        raise ValueError("percentile must be in (0, 100]")
    rank = max(1, math.ceil(p / 100.0 * n))
    if p == 100.0:
        flagged = False
    else:
        flagged = n < 10.0 / (1.0 - p / 100.0)
    return float(samples[rank - 1]), bool(flagged)


@dataclass
class CcdfTable:
    """Empirical complementary CDF: row i is the probability that a sample
    is >= values[i]; probabilities fall from 1 toward 1/n."""

    values: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_samples(cls, samples) -> "CcdfTable":
        v = np.sort(np.asarray(samples, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("no samples")
        probs = 1.0 - np.arange(v.size) / v.size
        return cls(values=v, probs=probs)

    def percentile(self, p: float):
        return nearest_rank_percentile(self.values, p)


def count_execution_costs(policy_id: str, n: int, n_subbands: int = 3) -> dict:
    """Closed-form per-decision-round execution cost of each allocator:
    sensing operations per subnetwork and signaling messages in total."""
    nsb = n_subbands
    if policy_id in ("cadic", "cadic_modified"):
        return {"sensing_per_subnetwork": nsb, "messages_total": 0}
    if policy_id in ("sisa", "sisa_pc"):
        return {
            "sensing_per_subnetwork": nsb * (n - 1),
            "messages_total": nsb * n * n + n,
        }
    if policy_id == "seq_greedy":
        return {"sensing_per_subnetwork": nsb, "messages_total": n}
    return {"sensing_per_subnetwork": 0, "messages_total": 0}


def evaluate_params(
    cfg: SimConfig,
    params: dict,
    episodes: int,
    horizon: int,
    threads: int | None = None,
) -> tuple[float, float]:
    """Tuning objective: run the proposed allocator parameters on a fixed
    set of episode seeds and return (mean, max) pooled cost. The episode
    seeds are shared across calls, so competing parameter vectors are
    compared on common random numbers."""
    pid = cfg.policy.id if cfg.policy.id in ("cadic", "cadic_modified") else "cadic"
    run = dataclasses.replace(cfg)
    run.policy = dataclasses.replace(cfg.policy, id=pid, params=dict(params))
    run.horizon_frames = horizon
    results = run_montecarlo(run, episodes=episodes, threads=threads)
    return objectives(results)
