"""Unstable linear plants under switched closed/open-loop control.

A plant evolves as x' = Ax + Bu + w and is regulated by u = -Kx with an LQR
gain. The control loop runs over a radio link, so in any frame the loop is
either closed (fresh state delivered, u = -Kx) or open (actuator holds the
last delivered state x_bar). The open-loop drift intentionally applies the
closed-loop matrix to the stale state, x' = (A - BK) x_bar + w, matching the
switched-system abstraction this simulator targets; the physically standard
zero-order-hold variant x' = Ax - BK x_bar + w is available as an option.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .rng import substream

__all__ = [
    "PlantModel",
    "stabilizing_gain",
    "lqr_gain",
    "care_residual",
    "instantaneous_cost",
    "finite_horizon_cost",
    "PlantBatch",
    "plant_response_sweep",
]

OPEN_LOOP_SEMANTICS = ("stale-closed-loop", "zero-order-hold")


@dataclass
class PlantModel:
    """Continuous-time LTI plant with LQR weights and traffic period."""

    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray
    interarrival_frames: int = 1
    label: str = "plant"

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        if self.b.ndim == 1:
            self.b = self.b[:, None]
        if self.interarrival_frames < 1:
            raise ValueError("interarrival_frames must be >= 1")

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.b.shape[1]


def stabilizing_gain(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return some K with A - BK Hurwitz (not optimal in any sense).

    Eigenvalue-shift construction: for beta > max Re eig(A), the Lyapunov
    equation (A + beta*I) Z + Z (A + beta*I)' = 2 B B' has a positive
    definite solution Z when (A, B) is controllable, and K = B' Z^{-1}
    stabilizes A.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    beta = 1.0 + max(0.0, float(np.linalg.eigvals(a).real.max()))
    shifted = a + beta * np.eye(a.shape[0])
    z = solve_continuous_lyapunov(shifted, 2.0 * b @ b.T)
    z = (z + z.T) / 2.0
    k = np.linalg.solve(z, b).T
    closed = np.linalg.eigvals(a - b @ k)
    if closed.real.max() >= 0:
        raise np.linalg.LinAlgError(
            "stabilizing gain construction failed; (A, B) may be uncontrollable"
        )
    return k


def lqr_gain(
    a: np.ndarray,
    b: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the continuous-time algebraic Riccati equation, return (K, P).

    Newton iteration: with a stabilizing K_i, solve the Lyapunov equation
    (A - B K_i)' P + P (A - B K_i) = -(Q + K_i' R K_i) and update
    K_{i+1} = R^{-1} B' P. Quadratically convergent from any stabilizing
    seed; the seed comes from stabilizing_gain.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    k = stabilizing_gain(a, b)
    p_prev = None
    for _ in range(max_iter):
        acl = a - b @ k
        p = solve_continuous_lyapunov(acl.T, -(q + k.T @ r @ k))
        p = (p + p.T) / 2.0
        k = np.linalg.solve(r, b.T @ p)
        if p_prev is not None:
            delta = np.linalg.norm(p - p_prev, "fro")
            if delta <= tol * max(1.0, np.linalg.norm(p, "fro")):
                return k, p
        p_prev = p
    raise RuntimeError(f"Riccati iteration did not converge in {max_iter} steps")


def care_residual(a, b, q, r, p) -> float:
    """Frobenius norm of A'P + PA - P B R^{-1} B' P + Q."""
    res = a.T @ p + p @ a - p @ b @ np.linalg.solve(r, b.T @ p) + q
    return float(np.linalg.norm(res, "fro"))


def instantaneous_cost(x, u, q, r):
    """x'Qx + u'Ru, batched over leading axes."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return np.einsum("...i,ij,...j->...", x, q, x) + np.einsum(
        "...i,ij,...j->...", u, r, u
    )


def finite_horizon_cost(costs) -> float:
    """Time average of instantaneous costs over an episode."""
    costs = np.asarray(costs, dtype=float)
    if costs.size == 0:
        raise ValueError("empty cost sequence")
    return float(costs.mean())


@dataclass
class PlantBatch:
    """n independent instances of one plant type, stepped together.

    State updates are vectorized over instances; each row carries its own
    loop-closure outcome per frame. Once the instantaneous cost of an
    instance exceeds the divergence bound, that instance is dead: its state
    stops integrating and every remaining frame reports the cost recorded
    at the crossing, so episode aggregates stay finite and comparable.
    """

    model: PlantModel
    gain: np.ndarray
    x0: np.ndarray
    dt: float
    clamp: float = 1e6
    semantics: str = "stale-closed-loop"

    x: np.ndarray = field(init=False)
    x_bar: np.ndarray = field(init=False)
    diverged: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.semantics not in OPEN_LOOP_SEMANTICS:
            raise ValueError(f"unknown open-loop semantics {self.semantics!r}")
        self.x = np.array(self.x0, dtype=float, copy=True)
        if self.x.ndim == 1:
            self.x = self.x[None, :]
        self.x_bar = self.x.copy()
        n = self.x.shape[0]
        self.diverged = np.zeros(n, dtype=bool)
        self._any_diverged = False
        self._clamp_cost = np.zeros(n)
        self._stale = self.semantics == "stale-closed-loop"
        self._acl_t = (self.model.a - self.model.b @ self.gain).T.copy()
        self._a_t = self.model.a.T.copy()
        self._bk_t = (self.model.b @ self.gain).T.copy()
        # x'Qx + u'Ru with u = -K x_bar, folded into one quadratic form over
        # the stacked state [x, x_bar]
        nq = self.model.n_states
        self._m2 = np.zeros((2 * nq, 2 * nq))
        self._m2[:nq, :nq] = self.model.q
        self._m2[nq:, nq:] = self.gain.T @ self.model.r @ self.gain

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def _cost(self, x, x_bar):
        z = np.concatenate((x, x_bar), axis=1)
        return ((z @ self._m2) * z).sum(axis=1)

    def decision_cost(self) -> np.ndarray:
        """Cost visible to the allocator at frame start: current state with
        the input implied by the last delivered state."""
        chi = self._cost(self.x, self.x_bar)
        if self._any_diverged:
            chi[self.diverged] = self._clamp_cost[self.diverged]
        return chi

    def step(self, closed: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Advance one frame; returns the recorded cost of this frame.

        closed: per-instance loop outcome; w: disturbance draw ~ N(0, Sigma),
        shape (n, n_states). The recorded cost uses the input actually
        applied, u = -K x_bar after any state delivery of this frame.
        """
        if self._any_diverged:
            live = ~self.diverged
            upd = closed & live
        else:
            live = None
            upd = closed
        np.copyto(self.x_bar, self.x, where=upd[:, None])
        chi = self._cost(self.x, self.x_bar)
        if live is not None:
            chi[self.diverged] = self._clamp_cost[self.diverged]

        # the crossing frame itself records the over-bound value, then the
        # instance freezes; the cheap max() guard keeps the hot path branchless
        if chi.max() > self.clamp:
            blown = chi > self.clamp
            if live is not None:
                blown &= live
            if blown.any():
                self._clamp_cost[blown] = chi[blown]
                self.diverged |= blown
                self._any_diverged = True
                live = ~self.diverged

        if self._stale:
            dx = self.x_bar @ self._acl_t
        else:
            dx = self.x @ self._a_t - self.x_bar @ self._bk_t
        dx += w
        dx *= self.dt
        dx += self.x
        if live is None:
            self.x = dx
        else:
            self.x[live] = dx[live]
        return chi


def plant_response_sweep(
    model: PlantModel,
    gain: np.ndarray,
    interarrival_frames,
    horizon: int,
    n_seeds: int,
    master_seed: int,
    dt: float,
    sigma: np.ndarray,
    clamp: float = 1e6,
    init_range: float = 0.2,
    semantics: str = "stale-closed-loop",
):
    """Finite-horizon cost vs control inter-arrival on an ideal channel.

    The loop closes exactly every m frames and stays open in between. Uses
    the same named noise streams as a single-subnetwork episode, so an
    episode run with the ideal policy reproduces these trajectories to
    float rounding (the seeds integrate as one batch here).
    Returns (costs, diverged) with shape (len(interarrival_frames), n_seeds).
    """
    nq = model.n_states
    chol = np.linalg.cholesky(np.asarray(sigma, dtype=float))
    x0 = np.empty((n_seeds, nq))
    noise = np.empty((horizon, n_seeds, nq))
    for s in range(n_seeds):
        x0[s] = substream(master_seed, "plant-init", s).uniform(
            -init_range, init_range, (1, nq)
        )
        z = substream(master_seed, "plant-noise", s).standard_normal((horizon, 1, nq))
        noise[:, s, :] = z[:, 0, :] @ chol.T

    interarrival_frames = list(interarrival_frames)
    costs = np.empty((len(interarrival_frames), n_seeds))
    diverged = np.empty((len(interarrival_frames), n_seeds), dtype=bool)
    for i, m in enumerate(interarrival_frames):
        batch = PlantBatch(model, gain, x0, dt, clamp=clamp, semantics=semantics)
        total = np.zeros(n_seeds)
        for t in range(horizon):
            closed = np.full(n_seeds, t % m == 0)
            total += batch.step(closed, noise[t])
        costs[i] = total / horizon
        diverged[i] = batch.diverged
    return costs, diverged
