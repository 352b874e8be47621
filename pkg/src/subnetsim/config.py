"""Hierarchical experiment configuration with JSON overrides.

Defaults reproduce the reference scenario: a 30 m x 30 m factory hall,
15 mobile subnetworks, 3 sub-bands of 3 channel blocks at 10 GHz, and the
two fourth-order plants with 1 ms / 3 ms update inter-arrivals. Every key
can be overridden from a JSON file; unknown keys fail loudly with their
full path so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

VERSION = "0.1.0"


class ConfigError(Exception):
    """Invalid configuration file or override (CLI exit code 2)."""


@dataclass
class DeploymentConfig:
    area_side_m: float = 30.0
    n_subnetworks: int = 15
    cell_radius_m: float = 2.0
    sensor_min_dist_m: float = 1.0
    speed_mps: float = 3.0


@dataclass
class ChannelConfig:
    fc_ghz: float = 10.0
    shadow_sigma_los_db: float = 4.0
    shadow_sigma_nlos_db: float = 5.7
    shadow_corr_dist_m: float = 10.0
    clutter_density: float = 0.35
    clutter_size_m: float = 10.0
    los_reeval_dist_m: float = 1.0


@dataclass
class RadioConfig:
    p_max_dbm: float = 0.0
    n_subbands: int = 3
    blocks_per_subband: int = 3
    subcarriers_per_block: int = 12
    subcarrier_spacing_khz: float = 480.0
    noise_figure_db: float = 10.0
    frame_s: float = 1e-3
    # UL and DL each occupy 0.1 ms of the 1 ms frame
    phase_duration_s: float = 1e-4
    ul_payload_bits: int = 512
    dl_payload_bits: int = 256


@dataclass
class PlantTypeConfig:
    a: list = field(default_factory=list)
    b: list = field(default_factory=list)
    interarrival_frames: int = 1


def _plant1() -> PlantTypeConfig:
    return PlantTypeConfig(
        a=[[0.0, 1.0, 0.0, 0.0],
           [0.0, 0.0, -1.4, 0.0],
           [0.0, 0.0, 0.0, 1.0],
           [0.0, 0.0, 168.0, 0.0]],
        b=[0.0, 1.90, 0.0, -28.57],
        interarrival_frames=1,
    )


def _plant2() -> PlantTypeConfig:
    return PlantTypeConfig(
        a=[[0.0, 1.0, 0.0, 0.0],
           [0.0, 0.0, -1.4, 0.0],
           [0.0, 0.0, 0.0, 1.0],
           [0.0, 0.0, 84.0, 0.0]],
        b=[0.0, 1.90, 0.0, -14.29],
        interarrival_frames=3,
    )


@dataclass
class PlantConfig:
    q: list = field(default_factory=lambda: [[1.0, 0.0, 0.0, 0.0],
                                             [0.0, 10.0, 0.0, 0.0],
                                             [0.0, 0.0, 10.0, 0.0],
                                             [0.0, 0.0, 0.0, 100.0]])
    r: list = field(default_factory=lambda: [[0.1]])
    plant1: PlantTypeConfig = field(default_factory=_plant1)
    plant2: PlantTypeConfig = field(default_factory=_plant2)
    # per-episode probability a subnetwork hosts plant 1 (rest host plant 2)
    mix_plant1: float = 0.5
    dt_s: float = 1e-3
    noise_scale: float = 0.01
    init_range: float = 0.2
    divergence_clamp: float = 1e6
    open_loop_semantics: str = "stale-closed-loop"


@dataclass
class PolicyConfig:
    id: str = "cadic"
    # cadic parameters; None means "must be supplied" for cadic policies
    params: dict | None = None
    gate_dbm: float = -25.0
    realloc_period_frames: int = 10
    sisa_sweeps: int = 10


@dataclass
class TuningConfig:
    trials: int = 400
    startup: int = 100
    candidates: int = 24
    gamma: float = 0.1
    episodes_per_trial: int = 20
    horizon_frames: int = 1000


@dataclass
class SimConfig:
    deployment: DeploymentConfig = field(default_factory=DeploymentConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    plants: PlantConfig = field(default_factory=PlantConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    tuning: TuningConfig = field(default_factory=TuningConfig)
    horizon_frames: int = 1000
    episodes: int = 500
    seed: int = 1
    threads: int | None = None


def default_config() -> SimConfig:
    return SimConfig()


def _merge(section, data: dict, path: str) -> None:
    names = {f.name for f in dataclasses.fields(section)}
    for key, val in data.items():
        here = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"unknown config key: {here}")
        cur = getattr(section, key)
        if dataclasses.is_dataclass(cur) and isinstance(val, dict):
            _merge(cur, val, here)
        else:
            setattr(section, key, val)


def load_config(path: str | None = None, overrides: dict | None = None) -> SimConfig:
    """Defaults, optionally deep-merged with a JSON file and a dict."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        _merge(cfg, data, "")
    if overrides:
        _merge(cfg, overrides, "")
    return cfg


def resolved_dict(cfg: SimConfig) -> dict:
    """Plain-dict snapshot of the fully resolved config, for echoing into
    output directories; reloading it reproduces the run."""
    out = dataclasses.asdict(cfg)
    # worker-pool width changes neither results nor outputs, so it is not
    # part of the run's identity
    out["threads"] = None
    out["tool_version"] = VERSION
    return out
