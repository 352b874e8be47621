"""Shared helpers and test doubles."""

import numpy as np

from subnetsim.config import SimConfig

# allocator parameters used as the fixed reference point across the suite
REF_PARAMS = {"k0": 0.49, "k1": 16.0, "z1": 100.0, "z2": 186.0}


def small_config(n=4, horizon=150, episodes=3, seed=11, policy="cadic"):
    """A config small enough for unit tests but exercising every path."""
    cfg = SimConfig()
    cfg.deployment.n_subnetworks = n
    cfg.horizon_frames = horizon
    cfg.episodes = episodes
    cfg.seed = seed
    cfg.policy.id = policy
    if policy in ("cadic", "cadic_modified"):
        cfg.policy.params = dict(REF_PARAMS)
    return cfg


class ThresholdRng:
    """Generator stand-in whose uniforms all equal one constant, so packet
    outcomes become a deterministic function of the error probabilities."""

    def __init__(self, u):
        self.u = float(u)
        self.calls = 0

    def random(self, size=None):
        self.calls += 1
        if size is None:
            return self.u
        return np.full(size, self.u)
