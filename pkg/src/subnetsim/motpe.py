"""Multi-objective tree-structured Parzen estimator (minimization).

Sequential model-based optimizer over the allocator's dependent box space
k0 in [0,1], k1 in (0,100], z1 in (k1, 200], z2 in (z1, 300]. Observations
are split into good/bad sets by non-dominated sorting with a hypervolume-
contribution tie-break; per-dimension truncated-Gaussian kernel densities
l (good) and g (bad) are fitted on the static bounds, candidates are drawn
from l dimension by dimension honoring the chain constraints, and the
candidate maximizing l/g (in log space) is evaluated next.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "Dimension",
    "DEFAULT_SPACE",
    "dominates",
    "pareto_front",
    "nondominated_rank",
    "hypervolume",
    "split_observations",
    "KernelDensity1d",
    "propose",
    "sample_dependent",
    "tune",
    "TuneResult",
]


@dataclass(frozen=True)
class Dimension:
    name: str
    lo: float
    hi: float
    # index of the dimension whose sampled value tightens this one's lower
    # bound (tree structure), or None
    parent: int | None = None


DEFAULT_SPACE = (
    Dimension("k0", 0.0, 1.0),
    Dimension("k1", 0.0, 100.0),
    Dimension("z1", 0.0, 200.0, parent=1),
    Dimension("z2", 0.0, 300.0, parent=2),
)


def dominates(fa, fb) -> bool:
    """True iff fa is no worse in every objective and better in at least one."""
    fa = np.asarray(fa, dtype=float)
    fb = np.asarray(fb, dtype=float)
    return bool((fa <= fb).all() and (fa < fb).any())


def _dominance_matrix(ys: np.ndarray) -> np.ndarray:
    """dom[i, j] = True iff observation i dominates observation j."""
    le = (ys[:, None, :] <= ys[None, :, :]).all(axis=2)
    lt = (ys[:, None, :] < ys[None, :, :]).any(axis=2)
    return le & lt


def pareto_front(ys: np.ndarray) -> np.ndarray:
    """Indices of observations not dominated by any other."""
    ys = np.asarray(ys, dtype=float)
    if ys.ndim == 1:
        ys = ys.reshape(-1, 1)
    dom = _dominance_matrix(ys)
    return np.nonzero(~dom.any(axis=0))[0]


def nondominated_rank(ys: np.ndarray) -> np.ndarray:
    """Front index per observation (0 = Pareto front), by repeated peeling."""
    ys = np.asarray(ys, dtype=float)
    dom = _dominance_matrix(ys)
    rank = np.full(ys.shape[0], -1, dtype=np.int64)
    alive = np.ones(ys.shape[0], dtype=bool)
    level = 0
    while alive.any():
        front = alive & ~dom[alive].any(axis=0)
        rank[front] = level
        alive &= ~front
        level += 1
    return rank


def hypervolume(ys: np.ndarray, ref: np.ndarray) -> float:
    """Dominated hypervolume of a 2-objective minimization set w.r.t. ref."""
    ys = np.asarray(ys, dtype=float).reshape(-1, 2)
    ref = np.asarray(ref, dtype=float)
    inside = (ys < ref).all(axis=1)
    if not inside.any():
        return 0.0
    pts = ys[inside]
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    # sweep in f1 order: each staircase point adds the horizontal slab
    # between its f2 and the best f2 seen so far, out to the reference
    hv = 0.0
    best_f2 = ref[1]
    for f1, f2 in pts:
        if f2 >= best_f2:
            continue
        hv += (ref[0] - f1) * (best_f2 - f2)
        best_f2 = f2
    return hv


def split_observations(ys: np.ndarray, gamma: float):
    """Rank observations by (front index, hypervolume contribution, insertion
    order) and split off the best ceil(gamma * n) as the good set.

    The contribution of a point is the loss of its front's dominated
    hypervolume when the point is removed, measured against the reference
    point 1.1 * (component-wise max over all observations).
    """
    ys = np.asarray(ys, dtype=float)
    n = ys.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations to split")
    ranks = nondominated_rank(ys)
    ref = ys.max(axis=0) * 1.1
    contrib = np.zeros(n)
    for level in np.unique(ranks):
        idx = np.nonzero(ranks == level)[0]
        total = hypervolume(ys[idx], ref)
        for pos, i in enumerate(idx):
            rest = np.delete(idx, pos)
            contrib[i] = total - hypervolume(ys[rest], ref)
    order = np.lexsort((np.arange(n), -contrib, ranks))
    n_good = int(np.ceil(gamma * n))
    return order[:n_good], order[n_good:]


class KernelDensity1d:
    """Equal-weight mixture of Gaussians truncated to [lo, hi]: one kernel
    per observed value plus a flat prior kernel at the interval midpoint.

    Bandwidths follow the spacing heuristic: for each value, the larger of
    the gaps to its sorted neighbors (with lo and hi as sentinels), clamped
    to [1%, 100%] of the interval length; the prior kernel uses the full
    interval length.
    """

    def __init__(self, values, lo: float, hi: float):
        values = np.sort(np.asarray(values, dtype=float))
        width = hi - lo
        grid = np.concatenate(([lo], values, [hi]))
        gaps = np.maximum(grid[1:-1] - grid[:-2], grid[2:] - grid[1:-1])
        bw = np.clip(gaps, 0.01 * width, width)
        self.lo = lo
        self.hi = hi
        self.mu = np.concatenate((values, [(lo + hi) / 2.0]))
        self.bw = np.concatenate((bw, [width]))
        # per-kernel truncated normalization mass
        self._mass = ndtr((hi - self.mu) / self.bw) - ndtr((lo - self.mu) / self.bw)

    def pdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = (x[:, None] - self.mu[None, :]) / self.bw[None, :]
        dens = np.exp(-0.5 * z * z) / (np.sqrt(2 * np.pi) * self.bw[None, :])
        dens /= self._mass[None, :]
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, dens.mean(axis=1), 0.0)

    def log_pdf(self, x):
        return np.log(np.maximum(self.pdf(x), 1e-300))

    def sample(self, rng: np.random.Generator, size: int, lo_dyn=None) -> np.ndarray:
        """Draw from the mixture truncated below at lo_dyn (scalar or per
        sample); inverse-CDF within the uniformly chosen kernel. With a
        dynamic lower bound the draw is strictly above it, so chained
        dimensions never collide with their parent."""
        if lo_dyn is None:
            lo = np.full(size, self.lo)
        else:
            lo = np.maximum(self.lo, np.nextafter(lo_dyn, np.inf))
        ki = rng.integers(0, self.mu.size, size)
        mu, bw = self.mu[ki], self.bw[ki]
        a = ndtr((lo - mu) / bw)
        b = ndtr((self.hi - mu) / bw)
        u = a + (b - a) * rng.random(size)
        x = mu + bw * ndtri(np.clip(u, 1e-15, 1.0 - 1e-15))
        return np.clip(x, lo, self.hi)


def sample_dependent(rng: np.random.Generator, space=DEFAULT_SPACE) -> np.ndarray:
    """One uniform draw from the dependent space (strict chain lower
    bounds: a child always exceeds its parent)."""
    y = np.empty(len(space))
    for d, dim in enumerate(space):
        if dim.parent is None:
            lo = dim.lo
        else:
            lo = max(dim.lo, np.nextafter(y[dim.parent], np.inf))
        y[d] = max(rng.uniform(lo, dim.hi), lo)
    return y


def propose(
    params: np.ndarray,
    ys: np.ndarray,
    gamma: float,
    n_candidates: int,
    rng: np.random.Generator,
    space=DEFAULT_SPACE,
) -> np.ndarray:
    """Acquisition step: fit l on the good split and g on the bad split per
    dimension over the static bounds, draw candidates from l respecting the
    chain constraints, return the candidate maximizing sum(log l - log g)."""
    good, bad = split_observations(ys, gamma)
    cand = np.empty((n_candidates, len(space)))
    score = np.zeros(n_candidates)
    for d, dim in enumerate(space):
        l_kde = KernelDensity1d(params[good, d], dim.lo, dim.hi)
        g_kde = KernelDensity1d(params[bad, d], dim.lo, dim.hi)
        lo_dyn = None if dim.parent is None else cand[:, dim.parent]
        cand[:, d] = l_kde.sample(rng, n_candidates, lo_dyn=lo_dyn)
        score += l_kde.log_pdf(cand[:, d]) - g_kde.log_pdf(cand[:, d])
    return cand[int(np.argmax(score))]


@dataclass
class TuneResult:
    params: np.ndarray  # (trials, dims) in evaluation order
    ys: np.ndarray  # (trials, 2)
    pareto_idx: np.ndarray
    selected_idx: int
    selected: dict
    selection_rule: dict = field(default_factory=dict)

    @property
    def incumbent_best(self) -> np.ndarray:
        return np.minimum.accumulate(self.ys, axis=0)


def tune(
    objective,
    trials: int,
    startup: int,
    gamma: float = 0.1,
    n_candidates: int = 24,
    rng: np.random.Generator | None = None,
    space=DEFAULT_SPACE,
    callback=None,
) -> TuneResult:
    """Run the optimizer: `startup` uniform trials over the dependent space,
    then acquisition proposals; returns all observations, the Pareto front,
    and the selected point (the front member minimizing the sum of min-max
    normalized objectives, earliest trial on ties)."""
    if rng is None:
        rng = np.random.default_rng()
    params = np.empty((trials, len(space)))
    ys = np.empty((trials, 2))
    for t in range(trials):
        if t < startup or t < 2:
            y = sample_dependent(rng, space)
        else:
            y = propose(params[:t], ys[:t], gamma, n_candidates, rng, space)
        params[t] = y
        ys[t] = objective(y)
        if callback is not None:
            callback(t, y, ys[t])

    front = pareto_front(ys)
    fvals = ys[front]
    span = fvals.max(axis=0) - fvals.min(axis=0)
    span[span == 0.0] = 1.0
    norm = (fvals - fvals.min(axis=0)) / span
    sel_local = int(np.argmin(norm.sum(axis=1)))
    selected_idx = int(front[sel_local])
    names = [d.name for d in space]
    selected = dict(zip(names, params[selected_idx].tolist()))
    rule = {
        "rule": "pareto point minimizing the sum of min-max normalized objectives",
        "tie_break": "earliest trial",
        "objectives": ["f_mu", "f_max"],
        "trial": selected_idx,
    }
    return TuneResult(params, ys, front, selected_idx, selected, rule)
