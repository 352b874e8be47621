"""Reference allocators the adaptive policy is measured against.

Ideal closes every due loop outright; Random and FP are blind decentralized
rules; Sequential Greedy and SISA are centralized single-sub-band assigners
rerun every few frames from an uplink cross-gain snapshot, with SISA+PC
adding per-group transmit power optimization. All of them transmit on every
due frame (no stability gating) -- they are control-agnostic by design.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "BasePolicy",
    "IdealPolicy",
    "RandomPolicy",
    "FpPolicy",
    "SeqGreedyPolicy",
    "SisaPolicy",
    "SisaPcPolicy",
]


class BasePolicy:
    force_success = False
    uses_rssi = False
    uses_crossgains = False
    uses_cost = False
    policy_id = "base"

    def __init__(self, n_subbands: int, p_max_w: float):
        self.n_subbands = n_subbands
        self.p_max_w = p_max_w

    def start_episode(self, n: int, rng: np.random.Generator) -> None:
        self.n = n
        self.rng = rng
        self.sensing_ops = np.zeros(n, dtype=np.int64)
        self.signaling_msgs = np.zeros(n, dtype=np.int64)
        self.decision_rounds = 0

    def sense(self, rssi: np.ndarray) -> None:
        pass

    def realloc(self, t: int, crossgain: np.ndarray, noise_subband_w: float) -> None:
        pass

    def decide(self, t: int, due: np.ndarray, chi: np.ndarray):
        raise NotImplementedError

    def _onehot(self, bands: np.ndarray, due: np.ndarray):
        mask = np.zeros((self.n, self.n_subbands), dtype=bool)
        idx = np.nonzero(due)[0]
        mask[idx, bands[idx]] = True
        return mask, np.full(self.n, self.p_max_w)


class IdealPolicy(BasePolicy):
    """Error-free reference: the frame round is bypassed entirely and every
    due loop closes."""

    force_success = True
    policy_id = "ideal"

    def decide(self, t, due, chi):
        return np.zeros((self.n, self.n_subbands), dtype=bool), np.zeros(self.n)


class RandomPolicy(BasePolicy):
    """Fresh uniform single sub-band every frame at maximum power."""

    policy_id = "random"

    def decide(self, t, due, chi):
        bands = self.rng.integers(0, self.n_subbands, self.n)
        return self._onehot(bands, due)


class FpPolicy(BasePolicy):
    """All sub-bands at maximum power, every due frame."""

    policy_id = "fp"

    def decide(self, t, due, chi):
        mask = np.zeros((self.n, self.n_subbands), dtype=bool)
        mask[due] = True
        return mask, np.full(self.n, self.p_max_w)


class _CentralizedPolicy(BasePolicy):
    uses_crossgains = True

    def __init__(self, n_subbands, p_max_w, blocks_per_subband, period: int = 10):
        super().__init__(n_subbands, p_max_w)
        self.blocks_per_subband = blocks_per_subband
        self.period = period

    def start_episode(self, n, rng):
        super().start_episode(n, rng)
        self.assigned = np.zeros(n, dtype=np.intp)

    def decide(self, t, due, chi):
        return self._onehot(self.assigned, due)


class SeqGreedyPolicy(_CentralizedPolicy):
    """Subnetworks pick sub-bands one after another in index order; each
    senses the reference signals of the already-assigned ones (transmitting
    at maximum power) plus noise on every sub-band and takes the quietest,
    lowest index first on ties."""

    policy_id = "seq_greedy"

    def realloc(self, t, crossgain, noise_subband_w):
        if t % self.period:
            return
        k = self.blocks_per_subband
        sensed = np.full((self.n, self.n_subbands), noise_subband_w)
        for i in range(self.n):
            self.assigned[i] = int(np.argmin(sensed[i]))
            # i's reference signal now contributes to everyone downstream
            sensed[:, self.assigned[i]] += self.p_max_w / k * crossgain[i, :, self.assigned[i]]
        self.sensing_ops += self.n_subbands
        self.signaling_msgs += 1
        self.decision_rounds += 1


class SisaPolicy(_CentralizedPolicy):
    """Centralized coordinate descent on the total interference-to-signal
    ratio: cycling over subnetworks in index order, each is moved to the
    sub-band minimizing the global ISR sum given the others, until a full
    sweep changes nothing or the sweep budget is spent."""

    policy_id = "sisa"

    def __init__(self, n_subbands, p_max_w, blocks_per_subband, period=10, sweeps: int = 10):
        super().__init__(n_subbands, p_max_w, blocks_per_subband, period)
        self.sweeps = sweeps

    def start_episode(self, n, rng):
        super().start_episode(n, rng)
        self.assigned = rng.integers(0, self.n_subbands, n).astype(np.intp)

    @staticmethod
    def isr_objective(crossgain: np.ndarray, assigned: np.ndarray) -> float:
        """Sum over receivers of co-channel interference-to-signal ratios."""
        n = crossgain.shape[0]
        total = 0.0
        for i in range(n):
            li = assigned[i]
            co = (assigned == li) & (np.arange(n) != i)
            total += float(crossgain[co, i, li].sum() / crossgain[i, i, li])
        return total

    def realloc(self, t, crossgain, noise_subband_w):
        if t % self.period:
            return
        n, l = self.n, self.n_subbands
        own = crossgain[np.arange(n), np.arange(n), :]  # (n, L) desired gains
        # pair[i, j, l]: ISR added by i and j sharing band l (both directions)
        pair = crossgain.transpose(1, 0, 2) / own[:, None, :] + crossgain / own[None, :, :]
        pair[np.arange(n), np.arange(n), :] = 0.0
        onehot = np.zeros((n, l))
        onehot[np.arange(n), self.assigned] = 1.0
        for _ in range(self.sweeps):
            changed = False
            for i in range(n):
                scores = np.einsum("jl,jl->l", pair[i], onehot)
                best = int(np.argmin(scores))
                if best != self.assigned[i]:
                    onehot[i, self.assigned[i]] = 0.0
                    onehot[i, best] = 1.0
                    self.assigned[i] = best
                    changed = True
            if not changed:
                break
        self.sensing_ops += self.n_subbands * (n - 1)
        self.signaling_msgs += self.n_subbands * n + 1
        self.decision_rounds += 1


class SisaPcPolicy(SisaPolicy):
    """SISA assignment followed by per-group power control maximizing the
    rate product (as sum of log rates) with a constrained optimizer started
    from maximum power; a group whose optimization does not improve the
    objective keeps maximum power."""

    policy_id = "sisa_pc"

    def start_episode(self, n, rng):
        super().start_episode(n, rng)
        self.powers = np.full(n, self.p_max_w)
        self.pc_fallbacks = 0

    @staticmethod
    def group_objective(p, gains, noise_w):
        """Sum of log(log2(1 + sinr)) over one co-channel group; gains is
        the (tx, rx) matrix of the group on its band."""
        received = p @ gains
        own = p * np.diagonal(gains)
        sinr = own / (noise_w + received - own)
        rate = np.log2(1.0 + sinr)
        return float(np.log(np.maximum(rate, 1e-300)).sum())

    @staticmethod
    def _neg_objective_grad(p, gains, noise_w):
        """(-objective, -gradient) for the optimizer; the gradient follows
        from d sinr_i / d p_k = g_ii / d_i for k = i and -sinr_i g_ki / d_i
        otherwise, with d_i the interference-plus-noise at receiver i."""
        g_own = np.diagonal(gains)
        received = p @ gains
        own = p * g_own
        denom = noise_w + received - own
        sinr = own / denom
        rate = np.maximum(np.log2(1.0 + sinr), 1e-300)
        c = 1.0 / (rate * (1.0 + sinr) * np.log(2.0))
        w = c * sinr / denom
        grad = c * g_own * (1.0 + sinr) / denom - gains @ w
        return -float(np.log(rate).sum()), -grad

    def realloc(self, t, crossgain, noise_subband_w):
        if t % self.period:
            return
        super().realloc(t, crossgain, noise_subband_w)
        self.powers.fill(self.p_max_w)
        for band in range(self.n_subbands):
            members = np.nonzero(self.assigned == band)[0]
            if members.size <= 1:
                continue
            gains = crossgain[np.ix_(members, members)][:, :, band]
            start = np.full(members.size, self.p_max_w)
            base = self.group_objective(start, gains, noise_subband_w)
            res = minimize(
                self._neg_objective_grad,
                start,
                args=(gains, noise_subband_w),
                method="L-BFGS-B",
                jac=True,
                bounds=[(self.p_max_w * 1e-9, self.p_max_w)] * members.size,
                options={"maxiter": 40},
            )
            if res.success and -res.fun > base + 1e-12:
                self.powers[members] = res.x
            else:
                self.pc_fallbacks += 1

    def decide(self, t, due, chi):
        mask, _ = self._onehot(self.assigned, due)
        return mask, self.powers.copy()
