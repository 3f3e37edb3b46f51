"""Interaction models: the ingredients (lambda, mu, phi, psi, W) of a system family.

Conventions used throughout the package:

* ``phi(x, y, w, p)`` takes positions ``x, y`` (broadcastable arrays) and media
  arrays ``w, p`` whose last axis has length ``d``.
* ``psi(x, w)`` and ``W(w, p)`` follow the same broadcasting rule.
* Lipschitz constants are taken w.r.t. the l-infinity metric on the argument
  tuple; ``grad_phi`` is the sup of the Euclidean gradient norm of ``phi``.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats
from scipy.stats import qmc

from . import rng as _rng

TWO_PI = 2.0 * np.pi


class Dirac:
    """Point mass with the subset of the frozen-distribution API we use."""

    def __init__(self, value=0.0):
        self.value = float(value)

    def ppf(self, q):
        return np.full(np.shape(q), self.value)

    def cdf(self, x):
        return (np.asarray(x, dtype=float) >= self.value).astype(float)

    def __repr__(self):
        return f"Dirac({self.value})"


class _CosinePerturbedUniform(stats.rv_continuous):
    """Density (1 + a cos x) / (2 pi) on [-pi, pi]."""

    def _argcheck(self, a):
        return np.abs(a) <= 1

    def _pdf(self, x, a):
        return (1.0 + a * np.cos(x)) / TWO_PI

    def _cdf(self, x, a):
        return (x + np.pi + a * np.sin(x)) / TWO_PI


cosine_perturbed_uniform = _CosinePerturbedUniform(a=-np.pi, b=np.pi, name="cosine_perturbed_uniform")


class ProductMedia:
    """Media law with independent coordinates, each a 1-D frozen distribution."""

    def __init__(self, marginals):
        self.marginals = list(marginals)

    @property
    def d(self):
        return len(self.marginals)

    def sample(self, generator, n):
        u = generator.random((n, self.d))
        return np.column_stack([m.ppf(u[:, k]) for k, m in enumerate(self.marginals)])

    def quantile_atoms(self, m, seed=0):
        """Deterministic ``m``-atom approximation with equal weights.

        One-dimensional laws use the midpoint quantiles ``(k + 1/2) / m``;
        higher dimensions push a scrambled Sobol set through the marginal ppfs.
        """
        if m < 1:
            raise ValueError("need at least one media atom")
        if self.d == 1:
            u = ((np.arange(m) + 0.5) / m)[:, None]
        else:
            u = qmc.Sobol(self.d, scramble=True, seed=int(seed)).random(m)
        atoms = np.column_stack([mar.ppf(u[:, k]) for k, mar in enumerate(self.marginals)])
        return atoms, np.full(m, 1.0 / m)

    def __repr__(self):
        return f"ProductMedia({self.marginals!r})"


@dataclass(frozen=True)
class FourierMeasure:
    """Finite atomic complex measure representing ``phi`` as a Fourier integral.

    ``phi(v) = sum_k weights[k] * exp(2 pi i <v, frequencies[k]>)`` with
    ``v = (x, y, w, p)`` in R^(2d+2).
    """

    frequencies: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.frequencies, dtype=float))
        w = np.asarray(self.weights, dtype=complex).reshape(-1)
        if z.shape[0] != w.shape[0]:
            raise ValueError("one weight per frequency vector is required")
        object.__setattr__(self, "frequencies", z)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.frequencies.shape[1]

    def __len__(self):
        return self.weights.shape[0]

    def evaluate(self, v):
        """Complex reconstruction at points ``v`` of shape ``(..., 2d+2)``."""
        v = np.asarray(v, dtype=float)
        phase = TWO_PI * np.tensordot(v, self.frequencies, axes=([-1], [1]))
        return np.exp(1j * phase) @ self.weights

    def smoothed(self, scale):
        """Measure of ``v -> E phi(v + scale * N)`` (Gaussian damping per atom)."""
        damp = np.exp(-2.0 * np.pi**2 * scale**2 * np.sum(self.frequencies**2, axis=1))
        return FourierMeasure(self.frequencies.copy(), self.weights * damp)

    def to_json(self):
        return [
            {"frequency": list(map(float, z)), "weight": [float(w.real), float(w.imag)]}
            for z, w in zip(self.frequencies, self.weights)
        ]

    @classmethod
    def from_json(cls, atoms):
        if isinstance(atoms, (str, bytes)):
            atoms = json.loads(atoms)
        if not atoms:
            return cls(np.zeros((0, 0)), np.zeros(0, dtype=complex))
        z = np.array([a["frequency"] for a in atoms], dtype=float)
        w = np.array([complex(*a["weight"]) for a in atoms])
        return cls(z, w)


def tv_norm(m):
    """Total mass of the four-part Jordan decomposition of an atomic measure."""
    w = np.asarray(m.weights, dtype=complex)
    return float(np.sum(np.abs(w.real) + np.abs(w.imag)))


def reconstruction_error(model, points=1000, seed=0):
    """Max |imag| and max |real - phi| of the Fourier reconstruction on random points."""
    if model.fourier is None:
        raise ValueError(f"model {model.name!r} carries no Fourier representation")
    g = _rng.stream(seed, _rng.MC)
    d = model.d
    x = g.uniform(-10, 10, points)
    y = g.uniform(-10, 10, points)
    w = g.uniform(-2, 2, (points, d))
    p = g.uniform(-2, 2, (points, d))
    v = np.column_stack([x, y, w, p])
    rec = model.fourier.evaluate(v)
    direct = model.phi(x, y, w, p)
    return float(np.max(np.abs(rec.imag))), float(np.max(np.abs(rec.real - direct)))


@dataclass(frozen=True)
class InteractionModel:
    name: str
    d: int
    phi: Callable
    psi: Callable
    W: Callable
    initial: object
    media: ProductMedia
    lip_phi: float
    lip_psi: float
    sup_W: float
    sup_phi: float
    sup_psi: float
    grad_phi: float
    fourier: Optional[FourierMeasure] = None
    hamiltonian: Optional[tuple] = None
    periodic: bool = False
    params: dict = field(default_factory=dict)

    def phi_bar(self, x, y, w, p):
        return self.W(w, p) * self.phi(x, y, w, p)

    def sample_media(self, seed, n):
        return self.media.sample(_rng.stream(seed, _rng.MEDIA), n)

    def sample_initial(self, seed, n):
        u = _rng.stream(seed, _rng.INITIAL).random(n)
        return np.asarray(self.initial.ppf(u), dtype=float)


def _sin_interaction(kappa):
    def phi(x, y, w, p):
        return kappa * np.sin(np.asarray(y) - np.asarray(x))

    return phi


def _kuramoto_fourier(kappa, d):
    z = np.zeros((2, 2 * d + 2))
    z[0, :2] = (-1.0, 1.0)
    z[1, :2] = (1.0, -1.0)
    z /= TWO_PI
    w = np.array([kappa / 2j, -kappa / 2j])
    return FourierMeasure(z, w)


def _frequency_marginal(frequencies):
    lo, hi = frequencies
    if hi < lo:
        raise ValueError("frequency range must satisfy low <= high")
    if hi == lo:
        return Dirac(lo)
    return stats.uniform(loc=lo, scale=hi - lo)


def _initial_law(initial):
    if initial is None:
        return stats.uniform(loc=-np.pi, scale=TWO_PI)
    if isinstance(initial, (int, float)):
        return cosine_perturbed_uniform(float(initial))
    return initial


def kuramoto(kappa, frequencies=(-0.5, 0.5), initial=None):
    """Stochastic Kuramoto model on a homogeneous graph.

    ``frequencies`` is the support of the uniform natural-frequency law
    (a degenerate range gives a point mass).  ``initial`` is a frozen law for
    the starting phases; a float ``a`` selects the density (1 + a cos x)/(2 pi);
    the default is uniform on [-pi, pi].
    """
    kappa = float(kappa)
    if not np.isfinite(kappa):
        raise ValueError("kappa must be finite")
    freq = _frequency_marginal(frequencies)
    fmax = float(max(abs(frequencies[0]), abs(frequencies[1])))

    def psi(x, w):
        return np.broadcast_to(np.asarray(w)[..., 0], np.shape(x)).astype(float)

    def W(w, p):
        return np.ones(np.broadcast_shapes(np.shape(w)[:-1], np.shape(p)[:-1]))

    def fbar(u, w, p):
        return -kappa * np.cos(u) * W(w, p)

    def g(x, w):
        return -np.asarray(w)[..., 0] * x

    return InteractionModel(
        name="kuramoto",
        d=1,
        phi=_sin_interaction(kappa),
        psi=psi,
        W=W,
        initial=_initial_law(initial),
        media=ProductMedia([freq]),
        lip_phi=2.0 * abs(kappa),
        lip_psi=1.0,
        sup_W=1.0,
        sup_phi=abs(kappa),
        sup_psi=fmax,
        grad_phi=np.sqrt(2.0) * abs(kappa),
        fourier=_kuramoto_fourier(kappa, 1),
        hamiltonian=(fbar, g),
        periodic=True,
        params={"kappa": kappa, "frequencies": list(map(float, frequencies))},
    )


def spatial_kuramoto(kappa, C, alpha, initial=None):
    """Kuramoto with media (space in [0,1]^3, frequency in [0,1]) and
    distance-decaying edge kernel ``1 / (1 + C |w_s - p_s|^alpha)``."""
    kappa, C, alpha = float(kappa), float(C), float(alpha)
    if C < 0 or alpha < 0:
        raise ValueError("C and alpha must be nonnegative")
    if not np.isfinite(kappa):
        raise ValueError("kappa must be finite")

    def W(w, p):
        dist = np.linalg.norm(np.asarray(w)[..., :3] - np.asarray(p)[..., :3], axis=-1)
        return 1.0 / (1.0 + C * dist**alpha)

    def psi(x, w):
        return np.broadcast_to(np.asarray(w)[..., 3], np.shape(x)).astype(float)

    def fbar(u, w, p):
        return -kappa * np.cos(u) * W(w, p)

    def g(x, w):
        return -np.asarray(w)[..., 3] * x

    return InteractionModel(
        name="spatial_kuramoto",
        d=4,
        phi=_sin_interaction(kappa),
        psi=psi,
        W=W,
        initial=_initial_law(initial),
        media=ProductMedia([stats.uniform(0, 1) for _ in range(4)]),
        lip_phi=2.0 * abs(kappa),
        lip_psi=1.0,
        sup_W=1.0,
        sup_phi=abs(kappa),
        sup_psi=1.0,
        grad_phi=np.sqrt(2.0) * abs(kappa),
        fourier=_kuramoto_fourier(kappa, 4),
        hamiltonian=(fbar, g),
        periodic=True,
        params={"kappa": kappa, "C": C, "alpha": alpha},
    )


def free_diffusion(d=1, initial=None, media=None):
    """No interaction and no drift: independent Brownian motions."""

    def zero_phi(x, y, w, p):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    def zero_psi(x, w):
        return np.zeros(np.shape(x))

    def W(w, p):
        return np.ones(np.broadcast_shapes(np.shape(w)[:-1], np.shape(p)[:-1]))

    return InteractionModel(
        name="free",
        d=d,
        phi=zero_phi,
        psi=zero_psi,
        W=W,
        initial=initial if initial is not None else stats.norm(0, 1),
        media=media if media is not None else ProductMedia([Dirac(0.0)] * d),
        lip_phi=0.0,
        lip_psi=0.0,
        sup_W=1.0,
        sup_phi=0.0,
        sup_psi=0.0,
        grad_phi=0.0,
        fourier=FourierMeasure(np.zeros((0, 2 * d + 2)), np.zeros(0, dtype=complex)),
        periodic=False,
        params={},
    )


def fourier_model(measure, psi, W, d, initial, media, lip_phi, lip_psi, sup_W, sup_psi,
                  periodic=False, name="fourier"):
    """Custom model whose interaction is given by a finite atomic Fourier measure."""
    measure = measure if isinstance(measure, FourierMeasure) else FourierMeasure.from_json(measure)
    if measure.dim != 2 * d + 2:
        raise ValueError(f"frequencies must live in R^{2 * d + 2}")

    def phi(x, y, w, p):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        w = np.broadcast_to(w, x.shape + (d,))
        p = np.broadcast_to(p, x.shape + (d,))
        v = np.concatenate([x[..., None], y[..., None], w, p], axis=-1)
        return measure.evaluate(v).real

    tv = tv_norm(measure)
    grad = TWO_PI * float(np.sum(np.abs(measure.weights) * np.linalg.norm(measure.frequencies, axis=1)))
    return InteractionModel(
        name=name, d=d, phi=phi, psi=psi, W=W, initial=initial, media=media,
        lip_phi=lip_phi, lip_psi=lip_psi, sup_W=sup_W, sup_phi=tv, sup_psi=sup_psi,
        grad_phi=grad, fourier=measure, periodic=periodic, params={},
    )


def load_fourier_atoms(path):
    with open(path) as fh:
        return FourierMeasure.from_json(json.load(fh))


def hamiltonian_energy(model, x, media):
    """(1/2n) sum_ij fbar(x_i - x_j, w_i, w_j) + sum_i g(x_i, w_i)."""
    if model.hamiltonian is None:
        raise ValueError(f"model {model.name!r} has no Hamiltonian form")
    fbar, g = model.hamiltonian
    x = np.asarray(x, dtype=float)
    media = np.asarray(media, dtype=float).reshape(x.shape[0], model.d)
    n = x.shape[0]
    pair = fbar(x[:, None] - x[None, :], media[:, None, :], media[None, :, :])
    return float(pair.sum() / (2.0 * n) + np.sum(g(x, media)))


def audit_lipschitz(model, pairs=10_000, seed=0, margin=1e-9, scale=3.0):
    """Randomized audit of the declared constants.

    Returns the largest observed ratios ``|phi(u)-phi(v)| / |u-v|_inf`` and the
    same for ``psi``.  Pairs are drawn at small and large separations.
    """
    g = _rng.stream(seed, _rng.MC, 1)
    d = model.d

    def draw(k):
        return g.uniform(-scale * np.pi, scale * np.pi, (pairs, k))

    u = draw(2 * d + 2)
    h = np.where(g.random((pairs, 1)) < 0.5, 1e-3, 1.0) * g.uniform(-1, 1, (pairs, 2 * d + 2))
    v = u + h
    sep = np.max(np.abs(h), axis=1)

    def split(a):
        return a[:, 0], a[:, 1], a[:, 2:2 + d], a[:, 2 + d:]

    dphi = np.abs(model.phi(*split(u)) - model.phi(*split(v)))
    ratio_phi = float(np.max(dphi / sep))
    up = u[:, : d + 1]
    vp = v[:, : d + 1]
    sep_psi = np.max(np.abs(up - vp), axis=1)
    dpsi = np.abs(model.psi(up[:, 0], up[:, 1:]) - model.psi(vp[:, 0], vp[:, 1:]))
    ratio_psi = float(np.max(dpsi / sep_psi))
    return {
        "phi_ratio": ratio_phi,
        "psi_ratio": ratio_psi,
        "phi_ok": ratio_phi <= model.lip_phi + margin,
        "psi_ok": ratio_psi <= model.lip_psi + margin,
    }


def get_model(model_id, **params):
    """Model registry used by the experiment configuration."""
    builders = {"kuramoto": kuramoto, "spatial_kuramoto": spatial_kuramoto, "free": free_diffusion}
    if model_id not in builders:
        raise ValueError(f"unknown model id {model_id!r}; known: {sorted(builders)}")
    return builders[model_id](**params)
