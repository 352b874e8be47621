"""Control-aware decentralized interference coordination.

Each subnetwork maps its plant's instantaneous control cost to a transmit
power through a logistic curve and to a number of sub-bands through a
piecewise-constant step function, then picks the least-interfered sub-bands
according to its own long-term RSSI average. Decisions use purely local
state: the plant cost, the subnetwork's RSSI history, and the shared tuned
parameters. The modified variant additionally refuses to transmit at all
when the logistic power falls below a fixed gate, trading uplink
opportunities of already-stable plants for less interference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "CadicParams",
    "transmit_power",
    "num_subbands",
    "rank_subbands",
    "select_subbands",
    "InterferenceAverager",
    "CadicPolicy",
]


@dataclass(frozen=True)
class CadicParams:
    """Tunable knobs: logistic growth k0 and midpoint k1 (cost units), and
    the strictly increasing sub-band-count thresholds z (length L-1)."""

    k0: float
    k1: float
    z: tuple

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(float(v) for v in self.z))
        if self.k1 <= 0:
            raise ValueError("k1 must be positive")
        prev = self.k1
        for v in self.z:
            if v <= prev:
                raise ValueError("thresholds must satisfy k1 < z_1 < z_2 < ...")
            prev = v

    def as_dict(self) -> dict:
        d = {"k0": self.k0, "k1": self.k1}
        for i, v in enumerate(self.z, start=1):
            d[f"z{i}"] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CadicParams":
        z = [d[k] for k in sorted(d) if k.startswith("z") and k[1:].isdigit()]
        return cls(k0=float(d["k0"]), k1=float(d["k1"]), z=tuple(z))


def transmit_power(chi, k0: float, k1: float, p_max: float):
    """Logistic power map p = p_max / (1 + exp(-k0 (chi - k1)))."""
    chi = np.asarray(chi, dtype=float)
    # expit stays exact at both saturation ends, no overflow in between
    return p_max * expit(k0 * (chi - k1))


def num_subbands(chi, z) -> np.ndarray:
    """Step function of the cost: 1 below z_1, j on [z_{j-1}, z_j), L at
    and above z_{L-1}."""
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    z = np.asarray(z, dtype=float)
    return 1 + (chi[:, None] >= z[None, :]).sum(axis=1)


def rank_subbands(avg_interference: np.ndarray) -> np.ndarray:
    """Sub-band indices by ascending average interference, ties to the
    lower index."""
    return np.argsort(avg_interference, axis=-1, kind="stable")


def select_subbands(chi, avg_interference, z) -> np.ndarray:
    """Boolean mask picking the num_subbands(chi) least-interfered
    sub-bands. Batched: chi (n,), avg (n, L) -> (n, L)."""
    avg = np.atleast_2d(np.asarray(avg_interference, dtype=float))
    nsb = num_subbands(chi, z)
    ranks = rank_subbands(avg)
    # position of each sub-band within the ranking
    pos = np.argsort(ranks, axis=1, kind="stable")
    return pos < nsb[:, None]


class InterferenceAverager:
    """Per sub-band cumulative mean of RSSI samples, one row per
    subnetwork; the mean after t samples equals the arithmetic mean of all
    t samples."""

    def __init__(self, n: int, n_subbands: int):
        self.mean = np.zeros((n, n_subbands))
        self.count = np.zeros(n, dtype=np.int64)

    def update(self, rssi: np.ndarray) -> None:
        self.count += 1
        self.mean += (rssi - self.mean) / self.count[:, None]


class CadicPolicy:
    """Decentralized allocator; one instance drives all subnetworks of an
    episode but keeps strictly per-subnetwork state."""

    force_success = False
    uses_rssi = True
    uses_crossgains = False
    uses_cost = True

    def __init__(
        self,
        params: CadicParams,
        n_subbands: int,
        p_max_w: float,
        gate_w: float | None = None,
    ):
        self.params = params
        self.n_subbands = n_subbands
        self.p_max_w = p_max_w
        self.gate_w = gate_w
        self.policy_id = "cadic" if gate_w is None else "cadic_modified"

    def start_episode(self, n: int, rng: np.random.Generator) -> None:
        self.n = n
        self.averager = InterferenceAverager(n, self.n_subbands)
        self.initial_band = rng.integers(0, self.n_subbands, n)
        self.sensing_ops = np.zeros(n, dtype=np.int64)
        self.signaling_msgs = np.zeros(n, dtype=np.int64)
        self.decision_rounds = 0
        self._all_seeded = False

    def sense(self, rssi: np.ndarray) -> None:
        """Fold one uplink frame's RSSI into every subnetwork's average;
        one radio-sensing operation per sub-band."""
        self.averager.update(rssi)
        self.sensing_ops += self.n_subbands
        self.decision_rounds += 1

    def realloc(self, t: int, crossgain, noise_subband_w: float) -> None:
        pass

    def decide(self, t: int, due: np.ndarray, chi: np.ndarray):
        p = self.p_max_w / (1.0 + np.exp(-self.params.k0 * (chi - self.params.k1)))
        mask = select_subbands(chi, self.averager.mean, self.params.z)
        if not self._all_seeded:
            # until the first RSSI sample arrives a subnetwork has no
            # ranking and uses its randomly drawn initial sub-band
            seeded = self.averager.count > 0
            if seeded.all():
                self._all_seeded = True
            else:
                fresh = ~seeded
                mask[fresh] = False
                mask[np.nonzero(fresh)[0], self.initial_band[fresh]] = True
        mask &= due[:, None]
        if self.gate_w is not None:
            mask[p < self.gate_w] = False
        return mask, p
