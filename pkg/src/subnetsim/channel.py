"""Radio propagation for in-factory links.

Large-scale: 3GPP TR 38.901 indoor-factory InF-SL path loss (ABG form),
distance-dependent LOS probability, and log-normal shadowing drawn from a
spatially correlated Gaussian field shared by all links of an episode.
Small-scale: per-block Rayleigh fading with Jakes-model time correlation,
independent across links and channel blocks.

Link direction convention everywhere: axis 0 indexes the transmitting
subnetwork, axis 1 the receiving subnetwork. Uplink links run sensor -> AP,
downlink links AP -> actuator.
"""

from __future__ import annotations

import numpy as np
from scipy.special import j0

__all__ = [
    "los_scale",
    "los_probability",
    "path_loss_db",
    "jakes_correlation",
    "ShadowField",
    "EpisodeChannel",
]

# TR 38.901 Table 7.4.1-1, InF-SL row (ABG coefficients, fc in GHz, d in m).
PL_LOS_CONST = 31.84
PL_LOS_DIST = 21.5
PL_LOS_FREQ = 19.0
PL_NLOS_CONST = 33.0
PL_NLOS_DIST = 25.5
PL_NLOS_FREQ = 20.0

MIN_LINK_DIST_M = 1.0  # ABG model invalid below; sensor minimum distance anyway

LIGHT_SPEED = 3e8  # m/s, nominal


def los_scale(clutter_size_m: float, clutter_density: float) -> float:
    """Subsurface clutter decay distance k = -d_clutter / ln(1 - r)."""
    return -clutter_size_m / np.log(1.0 - clutter_density)


def los_probability(d, k_sc: float):
    """P_LOS(d) = exp(-d / k_sc) for the sparse-clutter low-antenna case."""
    return np.exp(-np.asarray(d, dtype=float) / k_sc)


def path_loss_db(d, fc_ghz: float, los):
    """ABG path loss in dB; NLOS is floored at the LOS value."""
    d = np.maximum(np.asarray(d, dtype=float), MIN_LINK_DIST_M)
    logd = np.log10(d)
    logf = np.log10(fc_ghz)
    pl_los = PL_LOS_CONST + PL_LOS_DIST * logd + PL_LOS_FREQ * logf
    pl_nlos = np.maximum(pl_los, PL_NLOS_CONST + PL_NLOS_DIST * logd + PL_NLOS_FREQ * logf)
    return np.where(los, pl_los, pl_nlos)


def jakes_correlation(speed: float, fc_ghz: float, dt: float) -> float:
    """Lag-dt fading correlation J0(2 pi f_D dt) at Doppler f_D = v fc / c."""
    f_doppler = speed * fc_ghz * 1e9 / LIGHT_SPEED
    return float(j0(2.0 * np.pi * f_doppler * dt))


_CHOL_CACHE: dict = {}


def _grid_cholesky(side: float, spacing: float, corr_dist: float):
    key = (float(side), float(spacing), float(corr_dist))
    hit = _CHOL_CACHE.get(key)
    if hit is not None:
        return hit
    n_axis = int(round(side / spacing)) + 1
    axis = np.arange(n_axis) * spacing
    pts = np.column_stack(
        [np.repeat(axis, n_axis), np.tile(axis, n_axis)]
    )
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    cov = np.exp(-dist / corr_dist)
    cov[np.diag_indices_from(cov)] += 1e-12
    chol = np.linalg.cholesky(cov)
    _CHOL_CACHE[key] = (n_axis, axis, chol)
    return n_axis, axis, chol


class ShadowField:
    """Unit-variance Gaussian field with exponential spatial correlation,
    realized once per episode on a regular grid and read off by bilinear
    interpolation. Per-link shadowing combines the two endpoint values as
    (f(a) + f(b)) / sqrt(2), preserving the marginal variance, and is then
    scaled by the LOS- or NLOS-specific standard deviation."""

    def __init__(self, side: float, spacing: float, corr_dist: float,
                 rng: np.random.Generator):
        n_axis, axis, chol = _grid_cholesky(side, spacing, corr_dist)
        self.spacing = spacing
        self.n_axis = n_axis
        self.values_grid = (chol @ rng.standard_normal(n_axis * n_axis)).reshape(
            n_axis, n_axis
        )

    def values(self, xy: np.ndarray) -> np.ndarray:
        g = np.asarray(xy, dtype=float) / self.spacing
        i0 = np.clip(np.floor(g[:, 0]).astype(np.intp), 0, self.n_axis - 2)
        j0_ = np.clip(np.floor(g[:, 1]).astype(np.intp), 0, self.n_axis - 2)
        fx = np.clip(g[:, 0] - i0, 0.0, 1.0)
        fy = np.clip(g[:, 1] - j0_, 0.0, 1.0)
        f = self.values_grid
        return (
            f[i0, j0_] * (1 - fx) * (1 - fy)
            + f[i0 + 1, j0_] * fx * (1 - fy)
            + f[i0, j0_ + 1] * (1 - fx) * fy
            + f[i0 + 1, j0_ + 1] * fx * fy
        )


class EpisodeChannel:
    """All link gains of one episode.

    precompute() consumes the per-frame device trajectories and realizes the
    whole episode in batched form: distances, LOS states (redrawn only once
    a link has moved more than los_reeval_m since its last draw), path loss,
    correlated shadowing, and the Jakes-correlated Rayleigh fading run as a
    first-order filter over the full horizon. step(t) then just publishes
    the frame-t views, so replaying the frame loop for several allocators
    reuses one channel realization at no extra cost.

    Per phase (0 = uplink, 1 = downlink) a frame exposes the large-scale
    gain matrix rho (n, n) and the per-block power gains (n, n, L, K).
    """

    def __init__(
        self,
        n: int,
        n_subbands: int,
        blocks_per_subband: int,
        fc_ghz: float,
        clutter_size_m: float,
        clutter_density: float,
        shadow_std_los_db: float,
        shadow_std_nlos_db: float,
        corr_dist_m: float,
        shadow_grid_m: float,
        area_side: float,
        speed: float,
        frame_dt: float,
        los_reeval_m: float,
        rng_shadow: np.random.Generator,
        rng_fading: np.random.Generator,
        rng_los: np.random.Generator,
    ):
        self.n = n
        self.shape = (2, n, n, n_subbands, blocks_per_subband)
        self.fc_ghz = fc_ghz
        self.k_sc = los_scale(clutter_size_m, clutter_density)
        self.sigma_los = shadow_std_los_db
        self.sigma_nlos = shadow_std_nlos_db
        self.los_reeval_m = los_reeval_m
        self.rho_jakes = jakes_correlation(speed, fc_ghz, frame_dt)
        self.field = ShadowField(area_side, shadow_grid_m, corr_dist_m, rng_shadow)
        self._rng_fading = rng_fading
        self._rng_los = rng_los
        self.los = None
        self.rho = None
        self.gains = None
        self._rho_all = None
        self._los_all = None
        self._gains_all = None
        # innovations are drawn in chunks purely for speed; the generator
        # fills arrays in C order, so any chunking yields the same sequence
        self.fading_chunk = 128

    def precompute(self, ap_xy: np.ndarray, sensor_xy: np.ndarray,
                   actuator_xy: np.ndarray) -> None:
        """Realize the episode from (frames, n, 2) device position tracks."""
        frames = ap_xy.shape[0]
        d = np.empty((frames, 2, self.n, self.n))
        diff = sensor_xy[:, :, None, :] - ap_xy[:, None, :, :]
        np.hypot(diff[..., 0], diff[..., 1], out=d[:, 0])
        diff = ap_xy[:, :, None, :] - actuator_xy[:, None, :, :]
        np.hypot(diff[..., 0], diff[..., 1], out=d[:, 1])
        np.maximum(d, MIN_LINK_DIST_M, out=d)

        # sequential LOS scan: a link keeps its state until it has moved
        # more than los_reeval_m from where the state was last drawn
        los = np.empty(d.shape, dtype=bool)
        cur = self._rng_los.random(d[0].shape) < los_probability(d[0], self.k_sc)
        d_eval = d[0].copy()
        los[0] = cur
        for t in range(1, frames):
            stale = np.abs(d[t] - d_eval) > self.los_reeval_m
            if stale.any():
                d_new = d[t][stale]
                cur[stale] = (
                    self._rng_los.random(d_new.shape)
                    < los_probability(d_new, self.k_sc)
                )
                d_eval[stale] = d_new
            los[t] = cur

        pl = path_loss_db(d, self.fc_ghz, los)
        flat = frames * self.n
        f_ap = self.field.values(ap_xy.reshape(flat, 2)).reshape(frames, self.n)
        f_sen = self.field.values(sensor_xy.reshape(flat, 2)).reshape(frames, self.n)
        f_act = self.field.values(actuator_xy.reshape(flat, 2)).reshape(frames, self.n)
        s_unit = np.empty_like(pl)
        s_unit[:, 0] = (f_sen[:, :, None] + f_ap[:, None, :]) * np.sqrt(0.5)
        s_unit[:, 1] = (f_ap[:, :, None] + f_act[:, None, :]) * np.sqrt(0.5)
        shadow_db = np.where(los, self.sigma_los, self.sigma_nlos) * s_unit
        self._rho_all = 10.0 ** (-(pl + shadow_db) / 10.0)
        self._los_all = los
        self._gains_all = self._fading_gains(frames, self._rho_all)

    def _fading_gains(self, frames: int, rho: np.ndarray) -> np.ndarray:
        """Per-block power gains |h|^2 * rho for the whole episode.

        The Jakes recursion h[t] = rho_j h[t-1] + sqrt((1 - rho_j^2)/2) z[t]
        (stationary start h[0] = sqrt(1/2) z[0], unit mean power) runs on
        the real and imaginary parts together.
        """
        rho_j = self.rho_jakes
        scale = np.sqrt((1.0 - rho_j * rho_j) * 0.5)
        out = np.empty((frames,) + self.shape)
        h = None
        t0 = 0
        while t0 < frames:
            c = min(self.fading_chunk, frames - t0)
            z = self._rng_fading.standard_normal((c, 2) + self.shape)
            for i in range(c):
                if h is None:
                    h = np.sqrt(0.5) * z[0]
                else:
                    h *= rho_j
                    h += scale * z[i]
                blk = out[t0 + i]
                np.square(h[0], out=blk)
                blk += h[1] * h[1]
                blk *= rho[t0 + i][..., None, None]
            t0 += c
        return out

    def step(self, t: int) -> None:
        """Publish frame t (views into the precomputed episode)."""
        self.rho = self._rho_all[t]
        self.los = self._los_all[t]
        self.gains = self._gains_all[t]

    @property
    def gain_ul(self) -> np.ndarray:
        return self.gains[0]

    @property
    def gain_dl(self) -> np.ndarray:
        return self.gains[1]

    @property
    def gains_ul_all(self) -> np.ndarray:
        """(frames, tx, rx, subband, block) uplink gains, whole episode."""
        return self._gains_all[:, 0]

    @property
    def gains_dl_all(self) -> np.ndarray:
        return self._gains_all[:, 1]

    def crossgain_ul(self) -> np.ndarray:
        """Per sub-band uplink gain matrix summed over the K blocks,
        (tx, rx, subband); the snapshot centralized allocators consume."""
        return self.gains[0].sum(axis=3)
