"""Smooth compactly supported approximations of the interaction function.

phi_eps(v) = E phi(v + eps N) (Gaussian mollification, Gauss-Hermite quadrature)
phi_{eps,R}(v) = phi_eps(v) * bump(|v|_2^2 / R^2)

The good approximation used by the approximated system runs at mollification
scale eps / M, where M is the uniform C^1 constant below.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import gammaln
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import rng as _rng
from .dynamics import integrate_single
from .measures import running_sup_gap

TENSOR_DIM_CAP = 4
MC_SAMPLES = 100_000
# sup |bump'| for the smooth-step profile below (attained at |u| = 3/2)
BUMP_DERIVATIVE_SUP = 2.0


def expected_gaussian_norm(k):
    """E|N_k| for a standard Gaussian vector in R^k."""
    return float(np.sqrt(2.0) * np.exp(gammaln((k + 1) / 2.0) - gammaln(k / 2.0)))


def _h(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def bump(u):
    """C-infinity cutoff: 1 on [-1, 1], 0 outside (-2, 2), monotone in |u| between."""
    s = np.abs(np.asarray(u, dtype=float))
    a, b = _h(2.0 - s), _h(s - 1.0)
    return a / (a + b)


def bump_derivative(u):
    u = np.asarray(u, dtype=float)
    s = np.abs(u)
    a, b = _h(2.0 - s), _h(s - 1.0)
    mid = (s > 1.0) & (s < 2.0)
    out = np.zeros_like(s)
    t1, t2 = 2.0 - s[mid], s[mid] - 1.0
    da = a[mid] / t1**2 * -1.0  # d/ds h(2 - s)
    db = b[mid] / t2**2
    out[mid] = (da * (a[mid] + b[mid]) - a[mid] * (da + db)) / (a[mid] + b[mid]) ** 2
    return out * np.sign(u)


@lru_cache(maxsize=16)
def _gauss_hermite(order, dim):
    x, w = hermegauss(order)
    w = w / np.sqrt(2.0 * np.pi)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrid = np.meshgrid(*([w] * dim), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return nodes, weights


def _rule(dim, order, allow_mc, seed):
    if dim <= TENSOR_DIM_CAP:
        return _gauss_hermite(order, dim)
    if not allow_mc:
        raise ValueError(f"dimension {dim} exceeds the tensor quadrature cap {TENSOR_DIM_CAP}")
    nodes = _rng.stream(seed, _rng.MC, 3).standard_normal((MC_SAMPLES, dim))
    return nodes, np.full(MC_SAMPLES, 1.0 / MC_SAMPLES)


def mollify(phi, epsilon, point, order=16, allow_mc=False, seed=0, chunk=None):
    """Gauss-Hermite approximation of E phi(point + epsilon N).

    ``phi`` maps an array of shape ``(m, k)`` to ``(m,)``.  ``point`` is a
    vector of length ``k`` (scalar result) or an array ``(m, k)``.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    pts = np.asarray(point, dtype=float)
    single = pts.ndim <= 1
    pts = np.atleast_2d(pts.reshape(1, -1) if single else pts)
    k = pts.shape[1]
    nodes, weights = _rule(k, order, allow_mc, seed)
    chunk = chunk or max(1, 2_000_000 // nodes.shape[0])
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], chunk):
        block = pts[s:s + chunk]
        shifted = block[:, None, :] + epsilon * nodes[None, :, :]
        vals = np.asarray(phi(shifted.reshape(-1, k)), dtype=float).reshape(block.shape[0], -1)
        out[s:s + chunk] = vals @ weights
    return float(out[0]) if single else out


def good_approximation_constant(sup_phi, grad_phi, dim):
    """M = max(|phi|, |grad phi| + C1 |phi|, |grad phi| E|N_k|)."""
    return max(sup_phi, grad_phi + BUMP_DERIVATIVE_SUP * sup_phi, grad_phi * expected_gaussian_norm(dim))


class MollifiedInteraction(BaseEstimator, TransformerMixin):
    """Transformer computing phi_{eps,R} at the rows of ``X``.

    Parameters
    ----------
    phi : callable
        Base function on R^k taking ``(m, k)`` arrays.
    epsilon : float
        Mollification scale.
    R : float
        Cut-off radius; the result vanishes for |v|_2 >= sqrt(2) R.
    order : int
        Gauss-Hermite nodes per dimension.
    fourier : FourierMeasure, optional
        If given, phi_eps is evaluated in closed form from the damped atoms
        instead of by quadrature.
    """

    def __init__(self, phi=None, epsilon=0.1, R=1.0, order=16, fourier=None, allow_mc=False, seed=0):
        self.phi = phi
        self.epsilon = epsilon
        self.R = R
        self.order = order
        self.fourier = fourier
        self.allow_mc = allow_mc
        self.seed = seed

    def fit(self, X=None, y=None):
        if self.R <= 0:
            raise ValueError("R must be positive")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.fourier is not None:
            self.smoothed_ = self.fourier.smoothed(self.epsilon)
        elif X is not None:
            k = check_array(X).shape[1]
            self.quadrature_ = _rule(k, self.order, self.allow_mc, self.seed)
        return self

    def mollified(self, X):
        """phi_eps at the rows of ``X`` (no cut-off)."""
        check_is_fitted(self)
        X = np.asarray(X, dtype=float)
        if self.fourier is not None:
            return self.smoothed_.evaluate(X).real
        return mollify(self.phi, self.epsilon, X, order=self.order, allow_mc=self.allow_mc, seed=self.seed)

    def transform(self, X):
        X = check_array(X, dtype=float)
        return cutoff_apply(self, X)


def cutoff_apply(m, point):
    """phi_eps(v) * bump(|v|^2 / R^2); exact zeros outside the support."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim <= 1
    pts = np.atleast_2d(pts.reshape(1, -1) if single else pts)
    cut = bump(np.sum(pts**2, axis=1) / m.R**2)
    out = np.zeros(pts.shape[0])
    live = cut > 0
    if live.any():
        out[live] = m.mollified(pts[live]) * cut[live]
    return float(out[0]) if single else out


def good_approximation(model, epsilon, R, order=16):
    """phi^{eps,R} for an interaction model: scale eps / M with M from the C^1 bounds."""
    dim = 2 * model.d + 2
    M = good_approximation_constant(model.sup_phi, model.grad_phi, dim)
    scale = epsilon / M if M > 0 else epsilon

    def flat_phi(v):
        d = model.d
        return model.phi(v[:, 0], v[:, 1], v[:, 2:2 + d], v[:, 2 + d:])

    m = MollifiedInteraction(phi=flat_phi, epsilon=scale, R=R, order=order, fourier=model.fourier,
                             allow_mc=True)
    m.fit(np.zeros((1, dim)))
    return m, M


def mollifier_checks(phi, sup_phi, grad_phi, dim, epsilon, R, grid, tol=1e-6, fd_step=1e-5, order=16,
                     fourier=None):
    """Grid assertions for the mollifier and cut-off bounds.

    Checks, each as ``value <= limit``:

    - mollified_sup: sup|phi_eps| <= sup|phi|
    - mollified_error: sup|phi_eps - phi| <= eps |grad phi| E|N_k|
    - mollified_gradient: |grad phi_eps| <= |grad phi|
    - cutoff_support: phi_eps,R vanishes for |v| >= 2R
    - cutoff_sup: sup|phi_eps,R| <= sup|phi|
    - cutoff_gradient: |grad phi_eps,R| <= |grad phi| + C1 sup|phi| (needs R >= 2 sqrt 2)
    - cutoff_error_inside: sup over |v| <= R of |phi_eps,R - phi| <= eps |grad phi| E|N_k|

    ``grid`` is an array ``(m, dim)`` of evaluation points; gradient bounds use
    central differences with step ``fd_step`` and the Euclidean norm.
    """
    grid = np.asarray(grid, dtype=float)
    mol = MollifiedInteraction(phi=phi, epsilon=epsilon, R=R, order=order, fourier=fourier).fit(grid)
    base = np.asarray(phi(grid), dtype=float)
    smooth = mol.mollified(grid)
    cut = cutoff_apply(mol, grid)
    eN = expected_gaussian_norm(dim)

    def fd_grad_norm(f):
        g2 = np.zeros(grid.shape[0])
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = fd_step
            g2 += ((f(grid + e) - f(grid - e)) / (2 * fd_step)) ** 2
        return np.sqrt(g2)

    grad_smooth = fd_grad_norm(mol.mollified)
    grad_cut = fd_grad_norm(lambda X: cutoff_apply(mol, X))
    norms = np.linalg.norm(grid, axis=1)
    inside = norms <= R
    outside = norms >= 2 * R + 1e-6
    err_inside = float(np.max(np.abs(cut[inside] - base[inside]))) if inside.any() else 0.0
    checks = {
        "mollified_sup": (float(np.max(np.abs(smooth))), sup_phi + tol),
        "mollified_error": (
            float(np.max(np.abs(smooth - base))), epsilon * grad_phi * eN + tol),
        "mollified_gradient": (float(np.max(grad_smooth)), grad_phi + tol),
        "cutoff_support": (float(np.max(np.abs(cut[outside]))) if outside.any() else 0.0, 0.0),
        "cutoff_sup": (float(np.max(np.abs(cut))), sup_phi + tol),
        "cutoff_gradient": (
            float(np.max(grad_cut)), grad_phi + BUMP_DERIVATIVE_SUP * sup_phi + tol),
        "cutoff_error_inside": (err_inside, epsilon * grad_phi * eN + tol),
    }
    return {name: {"value": float(v), "limit": float(lim), "pass": bool(v <= lim)}
            for name, (v, lim) in checks.items()}


@dataclass
class ApproxRun:
    epsilon: float
    R: float
    M: float
    reference: np.ndarray
    approximated: np.ndarray
    exit_flags: np.ndarray
    capped_delta: float

    @property
    def exit_fraction(self):
        return float(np.mean(self.exit_flags))


def exit_events(paths, media, R):
    """Indicators of sup_s |theta_i(s)| > R/4 or |w_i| > R/4."""
    sup = np.max(np.abs(paths), axis=1)
    media = np.asarray(media, dtype=float).reshape(paths.shape[0], -1)
    return (sup > R / 4.0) | (np.linalg.norm(media, axis=1) > R / 4.0)


def run_approx_system(model, sample, epsilon, R, T, dt, seed, noise_scale=1.0, xi=None, reference=None):
    """Sparse system with phi replaced by phi^{eps,R}, driven by the reference noise.

    ``reference`` (the sparse run with the true phi, same seed) may be passed to
    share it across a ladder of (eps, R) values.
    """
    if xi is None:
        xi = model.sample_initial(seed, sample.n)
    if reference is None:
        reference = integrate_single(model, sample.P, sample.media, T, dt, seed, noise_scale, xi=xi)
    mol, M = good_approximation(model, epsilon, R)
    d = model.d

    def pair_fn(x, y, w, p):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        shape = x.shape
        v = np.concatenate([
            x.reshape(-1, 1), y.reshape(-1, 1),
            np.broadcast_to(w, shape + (d,)).reshape(-1, d),
            np.broadcast_to(p, shape + (d,)).reshape(-1, d),
        ], axis=1)
        return cutoff_apply(mol, v).reshape(shape)

    approx = integrate_single(model, sample.P, sample.media, T, dt, seed, noise_scale, xi=xi, pair_fn=pair_fn)
    flags = exit_events(reference, sample.media, R)
    capped = float(np.mean(np.minimum(running_sup_gap(reference, approx)[:, -1], 1.0)))
    return ApproxRun(float(epsilon), float(R), float(M), reference, approx, flags, capped)


def rapp_constant(model):
    """C = 6 max(M, |psi|_inf + Lip(psi))."""
    M = good_approximation_constant(model.sup_phi, model.grad_phi, 2 * model.d + 2)
    return 6.0 * max(M, model.sup_psi + model.lip_psi)


def rapp_bound(model, epsilon, exit_fraction, norm_D_over_n, T):
    """C T exp(C |W|_inf T) (eps + |D|/n + exit fraction)."""
    C = rapp_constant(model)
    return float(C * T * np.exp(C * model.sup_W * T) * (epsilon + norm_D_over_n + exit_fraction))


def exit_tail_bound(P_tail, a, m):
    """log of (e P_tail / a)^ceil(a m); -inf when P_tail = 0."""
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    if not 0 <= P_tail <= 1:
        raise ValueError("P_tail must lie in [0, 1]")
    k = int(np.ceil(a * m))
    if P_tail == 0:
        return -np.inf
    return k * (1.0 + np.log(P_tail) - np.log(a))
