"""Coupled Euler-Maruyama integration of the sparse and dense systems.

Both systems share initial conditions and Brownian increments.  Drifts go
through one evaluator whatever the weight matrix is, so equal weight matrices
give bit-identical trajectories.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import NumericalFailure, check_media, check_positive, check_state, check_steps
from .model import TWO_PI
from .rng import brownian_increments

_ROW_CHUNK = 256


@dataclass
class TrajectoryPair:
    n: int
    steps: int
    dt: float
    theta_sparse: np.ndarray
    theta_dense: np.ndarray
    media: np.ndarray
    xi: np.ndarray
    seed: int
    model_id: str = ""
    graph_id: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.steps * self.dt

    @property
    def times(self):
        return np.arange(self.steps + 1) * self.dt


class InteractionEvaluator:
    """Computes ``sum_j M_ij phi(x_i, x_j, w_i, w_j)`` for all ``i``.

    With a Fourier measure the sum factorizes through one (sparse or dense)
    matrix product per step; otherwise ``phi`` is evaluated pairwise, over
    stored edges for sparse ``M`` and in row blocks for dense ``M``.
    ``pair_fn``, when given, replaces ``phi`` and receives an extra argument
    ``v`` (the stacked argument vector), for cut-off interactions.
    """

    def __init__(self, model, weights, media, fourier="auto", pair_fn=None):
        self.model = model
        self.media = check_media(media)
        self.n = self.media.shape[0]
        self.pair_fn = pair_fn
        self.weights = weights
        if sparse.issparse(weights):
            W = sparse.csr_matrix(weights)
            W.sort_indices()
            self.weights = W
            self.rows = np.repeat(np.arange(self.n), np.diff(W.indptr))
            self.cols = W.indices
            self.data = W.data
        if fourier == "auto":
            fourier = model.fourier if pair_fn is None else None
        self.fourier = fourier if fourier is not None and len(fourier) else None
        if fourier is not None and not len(fourier):
            self.zero = True
        else:
            self.zero = False
        if self.fourier is not None:
            z = self.fourier.frequencies
            d = model.d
            self.zx = z[:, 0]
            self.zy = z[:, 1]
            self.phase_a = TWO_PI * (self.media @ z[:, 2:2 + d].T)
            self.phase_b = TWO_PI * (self.media @ z[:, 2 + d:].T)
            self.coef = self.fourier.weights

    def _phi(self, xi, xj, wi, wj):
        if self.pair_fn is None:
            return self.model.phi(xi, xj, wi, wj)
        return self.pair_fn(xi, xj, wi, wj)

    def __call__(self, x):
        if self.zero:
            return np.zeros(self.n)
        if self.fourier is not None:
            return self._fourier(x)
        if sparse.issparse(self.weights):
            vals = self.data * self._phi(x[self.rows], x[self.cols], self.media[self.rows], self.media[self.cols])
            return np.bincount(self.rows, weights=vals, minlength=self.n)
        out = np.empty(self.n)
        M = np.asarray(self.weights)
        for s in range(0, self.n, _ROW_CHUNK):
            e = min(s + _ROW_CHUNK, self.n)
            vals = self._phi(x[s:e, None], x[None, :], self.media[s:e, None, :], self.media[None, :, :])
            out[s:e] = np.sum(M[s:e] * vals, axis=1)
        return out

    def _fourier(self, x):
        K = self.coef.shape[0]
        b = np.exp(1j * (TWO_PI * np.outer(x, self.zy) + self.phase_b))
        stacked = np.concatenate([b.real, b.imag], axis=1)
        Mb = np.asarray(self.weights @ stacked)
        Mb = Mb[:, :K] + 1j * Mb[:, K:]
        a = np.exp(1j * (TWO_PI * np.outer(x, self.zx) + self.phase_a))
        return np.real((a * Mb) @ self.coef)


def drift_sparse(model, sample, state, i):
    """Drift of particle ``i`` in the sparse system, summed over its edges."""
    x = check_state(state, sample.n)
    media = sample.media
    if sparse.issparse(sample.P):
        P = sample.P
        lo, hi = P.indptr[i], P.indptr[i + 1]
        cols, w = P.indices[lo:hi], P.data[lo:hi]
    else:
        cols = np.flatnonzero(np.asarray(sample.adjacency)[i])
        w = sample.P[i, cols]
    inter = np.sum(w * model.phi(x[i], x[cols], media[i], media[cols]))
    return float(inter + model.psi(x[i], media[i]))


def drift_dense(model, media, state, i):
    """Drift of particle ``i`` in the dense system (weights ``W(w_i, w_j) / n``)."""
    media = check_media(media)
    x = check_state(state, media.shape[0])
    n = x.shape[0]
    w = model.W(media[i], media) / n
    inter = np.sum(w * model.phi(x[i], x, media[i], media))
    return float(inter + model.psi(x[i], media[i]))


def _euler(model, evaluators, media, xi, increments, dt, noise_scale):
    n, steps = increments.shape
    paths = [np.empty((n, steps + 1)) for _ in evaluators]
    states = [xi.copy() for _ in evaluators]
    for path in paths:
        path[:, 0] = xi
    for k in range(steps):
        dB = noise_scale * increments[:, k]
        for s, (ev, x) in enumerate(zip(evaluators, states)):
            drift = ev(x) + model.psi(x, media)
            x = x + drift * dt + dB
            if not np.all(np.isfinite(x)):
                bad = int(np.flatnonzero(~np.isfinite(x))[0])
                raise NumericalFailure(f"non-finite state at step {k + 1}, particle {bad}")
            states[s] = x
            paths[s][:, k + 1] = x
    return paths


def _prepare(model, media, T, dt, seed, noise_scale, xi, aggregate, increments):
    steps = check_steps(T, dt)
    check_positive(noise_scale, "noise_scale", strict=False)
    n = media.shape[0]
    if xi is None:
        xi = model.sample_initial(seed, n)
    xi = check_state(xi, n, "xi")
    if increments is None:
        increments = brownian_increments(seed, n, steps, dt, aggregate=aggregate)
    elif increments.shape != (n, steps):
        raise ValueError(f"increments must have shape {(n, steps)}")
    return steps, xi, increments


def integrate_coupled(model, sample, T, dt, seed, noise_scale=1.0, xi=None, aggregate=1,
                      increments=None):
    """Advance the sparse (weights P) and dense (weights Pbar) systems in lockstep."""
    media = check_media(sample.media, sample.n)
    steps, xi, increments = _prepare(model, media, T, dt, seed, noise_scale, xi, aggregate, increments)
    evs = [InteractionEvaluator(model, sample.P, media), InteractionEvaluator(model, sample.Pbar, media)]
    sparse_path, dense_path = _euler(model, evs, media, xi, increments, dt, noise_scale)
    return TrajectoryPair(
        n=sample.n, steps=steps, dt=float(dt), theta_sparse=sparse_path, theta_dense=dense_path,
        media=media, xi=xi, seed=int(seed), model_id=model.name,
        graph_id=f"{sample.kernel_id}:n={sample.n}:p={sample.p:.17g}:seed={sample.seed}",
    )


def integrate_single(model, weights, media, T, dt, seed, noise_scale=1.0, xi=None, aggregate=1,
                     increments=None, pair_fn=None, fourier="auto"):
    """One system with an arbitrary weight matrix; returns positions ``(n, steps+1)``."""
    media = check_media(media)
    steps, xi, increments = _prepare(model, media, T, dt, seed, noise_scale, xi, aggregate, increments)
    ev = InteractionEvaluator(model, weights, media, fourier=fourier, pair_fn=pair_fn)
    return _euler(model, [ev], media, xi, increments, dt, noise_scale)[0]


def interaction_bound_ok(model, state, media, tol=1e-12):
    """Dense interaction terms must stay within ``sup_W * sup_phi``."""
    media = check_media(media)
    n = media.shape[0]
    Pbar = np.asarray(model.W(media[:, None, :], media[None, :, :])) / n
    inter = InteractionEvaluator(model, Pbar, media)(np.asarray(state, float))
    return bool(np.max(np.abs(inter)) <= model.sup_W * model.sup_phi + tol)


class CoupledDiffusion(BaseEstimator):
    """Estimator wrapper: ``fit(graph)`` integrates the coupled pair.

    Parameters
    ----------
    model : InteractionModel
    T, dt : float
        Horizon and Euler step.
    seed : int
        Stream seed for initial conditions and Brownian increments.
    noise_scale : float
        Multiplier of the Brownian increments (1 for the systems studied).
    """

    def __init__(self, model=None, T=1.0, dt=1e-3, seed=0, noise_scale=1.0):
        self.model = model
        self.T = T
        self.dt = dt
        self.seed = seed
        self.noise_scale = noise_scale

    def fit(self, X, y=None, xi=None):
        if self.model is None:
            raise ValueError("an InteractionModel is required")
        self.pair_ = integrate_coupled(self.model, X, self.T, self.dt, self.seed,
                                       noise_scale=self.noise_scale, xi=xi)
        return self

    def transform(self, X=None):
        """Final positions of the sparse and dense systems, shape ``(n, 2)``."""
        check_is_fitted(self, "pair_")
        return np.column_stack([self.pair_.theta_sparse[:, -1], self.pair_.theta_dense[:, -1]])

    def coupling_report(self):
        from .measures import coupling_delta

        check_is_fitted(self, "pair_")
        return coupling_delta(self.pair_)
