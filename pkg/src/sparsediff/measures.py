"""Empirical measures of trajectories and the distances used to compare them.

Path-space distances are bracketed: the coupling distance (mean running sup of
|theta_i - thetabar_i|, optionally capped at 1) bounds d_W and d_BL from
above, and a dictionary of explicit test functions with ||h||_BL <= 1 bounds
d_BL from below.  Test functions use the metric
``max(sup_t |theta(t) - theta'(t)|, |w - w'|_inf)`` on path x media.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import rng as _rng
from .model import TWO_PI


@dataclass
class EmpiricalMeasure:
    """Equal-weight atoms ``(theta_i, w_i)``; ``trajectories`` is ``(n, steps+1)``."""

    trajectories: np.ndarray
    media: np.ndarray
    dt: float

    @property
    def n(self):
        return self.trajectories.shape[0]

    @property
    def steps(self):
        return self.trajectories.shape[1] - 1

    @property
    def T(self):
        return self.steps * self.dt

    @classmethod
    def from_pair(cls, pair, which="sparse"):
        paths = pair.theta_sparse if which == "sparse" else pair.theta_dense
        return cls(paths, pair.media, pair.dt)

    def step_index(self, t):
        k = t / self.dt
        idx = int(round(k))
        if abs(idx - k) > 1e-9 * max(1.0, k) or not 0 <= idx <= self.steps:
            raise ValueError(f"t={t} is not on the time grid (dt={self.dt}, T={self.T})")
        return idx


@dataclass
class CouplingDistanceReport:
    delta_T: float
    delta_T_capped: float
    per_time_delta: np.ndarray
    w1_marginals: np.ndarray

    def as_row(self):
        return {
            "delta_T": self.delta_T,
            "delta_T_capped": self.delta_T_capped,
            "w1_at_T": float(self.w1_marginals[-1]),
        }


def running_sup_gap(a, b):
    """Per-particle running sup of |a - b| over the time grid."""
    if a.shape != b.shape:
        raise ValueError(f"trajectory arrays differ in shape: {a.shape} vs {b.shape}")
    return np.maximum.accumulate(np.abs(a - b), axis=1)


def capped_delta(a, b):
    """(1/n) sum_i min(sup_t |a_i - b_i|, 1)."""
    return float(np.mean(np.minimum(running_sup_gap(a, b)[:, -1], 1.0)))


def coupling_delta(pair):
    sup = running_sup_gap(pair.theta_sparse, pair.theta_dense)
    per_time = sup.mean(axis=0)
    w1 = np.array([
        _w1_equal(pair.theta_sparse[:, k], pair.theta_dense[:, k])
        for k in range(pair.theta_sparse.shape[1])
    ])
    return CouplingDistanceReport(
        delta_T=float(per_time[-1]),
        delta_T_capped=float(np.mean(np.minimum(sup[:, -1], 1.0))),
        per_time_delta=per_time,
        w1_marginals=w1,
    )


def _w1_equal(a, b):
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


def wasserstein_1d(a, b, a_weights=None, b_weights=None):
    """Exact W1 between two weighted samples on the line (weights normalized)."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    if a_weights is None and b_weights is None and a.size == b.size:
        return _w1_equal(a, b)
    wa = np.full(a.size, 1.0 / a.size) if a_weights is None else np.asarray(a_weights, float) / np.sum(a_weights)
    wb = np.full(b.size, 1.0 / b.size) if b_weights is None else np.asarray(b_weights, float) / np.sum(b_weights)
    values = np.concatenate([a, b])
    order = np.argsort(values, kind="mergesort")
    values = values[order]
    signed = np.concatenate([wa, -wb])[order]
    cdf_gap = np.cumsum(signed)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(values)))


def _abs_linear_integral(length, h0, h1):
    """Exact integral of |h| over a segment where h is linear from h0 to h1."""
    same = h0 * h1 >= 0
    total = np.empty_like(h0)
    total[same] = 0.5 * length[same] * (np.abs(h0[same]) + np.abs(h1[same]))
    cross = ~same
    s = np.abs(h0[cross]) + np.abs(h1[cross])
    total[cross] = length[cross] * (h0[cross] ** 2 + h1[cross] ** 2) / (2.0 * s)
    return total


def _cdf_gap_segments(sample, edges, density):
    """Segments on which F_sample - F_density is linear.

    ``density`` is piecewise constant on the cells given by ``edges``.
    Returns breakpoints and the gap values at both ends of every segment.
    """
    sample = np.sort(np.asarray(sample, dtype=float))
    n = sample.size
    mass = density * np.diff(edges)
    cdf_edges = np.concatenate([[0.0], np.cumsum(mass)])
    cdf_edges /= cdf_edges[-1]
    pts = np.unique(np.concatenate([edges, np.clip(sample, edges[0], edges[-1])]))
    G = np.interp(pts, edges, cdf_edges)
    # empirical CDF just right of each left endpoint and just left of each right endpoint
    F_left = np.searchsorted(sample, pts[:-1], side="right") / n
    h0 = F_left - G[:-1]
    h1 = F_left - G[1:]
    return np.diff(pts), h0, h1


def wasserstein_sample_density(sample, edges, density):
    """W1 between an equal-weight sample and a piecewise-constant density on an interval."""
    length, h0, h1 = _cdf_gap_segments(sample, edges, density)
    return float(np.sum(_abs_linear_integral(length, h0, h1)))


def circular_wasserstein_sample_density(sample, edges, density):
    """W1 on the circle ``[edges[0], edges[-1])`` with arc-length ground metric.

    Uses W1 = min_alpha int |F - G - alpha|; the objective is convex in alpha.
    """
    period = edges[-1] - edges[0]
    wrapped = edges[0] + np.mod(np.asarray(sample, float) - edges[0], period)
    length, h0, h1 = _cdf_gap_segments(wrapped, edges, density)

    def cost(alpha):
        return float(np.sum(_abs_linear_integral(length, h0 - alpha, h1 - alpha)))

    lo = float(min(h0.min(), h1.min()))
    hi = float(max(h0.max(), h1.max()))
    if hi - lo < 1e-15:
        return cost(lo)
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, cost(lo), cost(hi)))


def circular_wasserstein_samples(a, b, period=TWO_PI):
    """W1 on the circle between two equal-weight samples of equal size."""
    a = np.sort(np.mod(np.asarray(a, float), period))
    b = np.sort(np.mod(np.asarray(b, float), period))
    values = np.concatenate([a, b])
    order = np.argsort(values, kind="mergesort")
    pts = np.concatenate([[0.0], values[order], [period]])
    signed = np.concatenate([np.full(a.size, 1.0 / a.size), np.full(b.size, -1.0 / b.size)])[order]
    gap = np.concatenate([[0.0], np.cumsum(signed)])
    seg = np.diff(pts)
    # int |gap - alpha| over segments is minimized at the seg-weighted median of gap
    order2 = np.argsort(gap)
    cw = np.cumsum(seg[order2])
    alpha = gap[order2][np.searchsorted(cw, 0.5 * cw[-1])]
    return float(np.sum(np.abs(gap - alpha) * seg))


def marginal(measure, t):
    """Time-``t`` projection: positions and their media (weights 1/n each)."""
    k = measure.step_index(t)
    return measure.trajectories[:, k].copy(), measure.media.copy()


def dbl_lower_bound(a, b, dictionary_size=1000, seed=0, time_points=8, return_best=False):
    """Certified lower bound on d_BL(a, b) over a randomized test-function dictionary.

    Each test function is ``h(theta, w) = g(<u, v>)`` with ``v`` the path sampled at
    ``time_points`` grid times (always including 0 and T) concatenated with the
    media, ``|u|_1 = 1`` and ``g`` either a cosine feature or a clipped ramp,
    rescaled so that ``2 (|h|_inf + Lip(h)) <= 1``.
    """
    if a.trajectories.shape[1] != b.trajectories.shape[1] or a.dt != b.dt:
        raise ValueError("measures must share the time grid")
    steps = a.steps
    idx = np.unique(np.linspace(0, steps, min(time_points, steps + 1)).round().astype(int))
    Va = np.column_stack([a.trajectories[:, idx], a.media])
    Vb = np.column_stack([b.trajectories[:, idx], b.media])
    dim = Va.shape[1]
    g = _rng.stream(seed, _rng.DICTIONARY)
    best = 0.0
    best_desc = None
    for j in range(dictionary_size):
        kind = j % 3
        if kind == 2:
            u = np.zeros(dim)
            u[g.integers(dim)] = 1.0
        else:
            u = g.standard_normal(dim)
            u /= np.abs(u).sum()
        sa, sb = Va @ u, Vb @ u
        if j % 2 == 0:
            spread = max(np.std(np.concatenate([sa, sb])), 1e-12)
            freq = abs(g.standard_normal()) * np.pi / spread
            shift = g.uniform(0, TWO_PI)
            scale = 1.0 / (2.0 * (1.0 + freq))
            ha = scale * np.cos(freq * sa + shift)
            hb = scale * np.cos(freq * sb + shift)
        else:
            qa = np.quantile(sa, g.random())
            qb = np.quantile(sb, g.random())
            center = 0.5 * (qa + qb)
            width = max(0.5 * abs(qa - qb) * g.uniform(0.25, 1.0), 1e-9)
            amp = width / (2.0 * (width + 1.0))
            ha = amp * np.clip((sa - center) / width, -1.0, 1.0)
            hb = amp * np.clip((sb - center) / width, -1.0, 1.0)
        value = abs(ha.mean() - hb.mean())
        if value > best:
            best, best_desc = value, j
    if return_best:
        return float(best), best_desc
    return float(best)


def gronwall_wasserstein_bound(model, norm_D, n, T):
    """T exp(|W|_inf (2 Lip(phi) + Lip(psi)) T) * 4 |m_phi|_TV |D|_{inf->1} / n."""
    from .model import tv_norm

    if model.fourier is None:
        raise ValueError(f"model {model.name!r} has no Fourier representation; the bound needs one")
    if norm_D < 0:
        raise ValueError("norm_D must be nonnegative")
    rate = model.sup_W * (2.0 * model.lip_phi + model.lip_psi)
    return float(T * np.exp(rate * T) * 4.0 * tv_norm(model.fourier) * norm_D / n)
