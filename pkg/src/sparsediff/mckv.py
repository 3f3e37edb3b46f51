"""Nonlinear Fokker-Planck solver for the McKean-Vlasov limit.

For each media atom w the density q^w solves

    d_t q^w = -d_x(beta^w q^w) + (1/2) d_xx q^w,
    beta^w(x) = sum_p weight(p) int W(w, p) phi(x, y, w, p) q^p(y) dy + psi(x, w),

with all atoms advanced in lockstep so the drift always uses the current
densities.  Space is discretized by finite volumes (cell averages), upwind
advective fluxes and centred diffusive fluxes; each step advects and then
diffuses.  Periodic models live on [-pi, pi); others on a truncated interval
with no-flux walls.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import rng as _rng
from .measures import (
    EmpiricalMeasure,
    circular_wasserstein_sample_density,
    wasserstein_sample_density,
)
from .model import TWO_PI

log = logging.getLogger(__name__)

_KERNEL_CACHE_LIMIT = 20_000_000


class CFLError(ValueError):
    pass


@dataclass
class DensityFlow:
    edges: np.ndarray
    periodic: bool
    atoms: np.ndarray
    atom_weights: np.ndarray
    times: np.ndarray
    q: np.ndarray  # (checkpoints, atoms, cells)
    dt_pde: float
    mass_error: np.ndarray  # (checkpoints, atoms)
    clip_mass: float = 0.0
    truncation_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def dx(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def checkpoint_index(self, t):
        hits = np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=1e-9))
        if hits.size == 0:
            raise KeyError(f"no checkpoint stored at t={t}; stored: {self.times.tolist()}")
        return int(hits[0])


@dataclass
class Mixture:
    """x-marginal of the limit at one time: sum_w weight(w) q^w."""

    edges: np.ndarray
    weights: np.ndarray
    components: np.ndarray
    periodic: bool

    @property
    def density(self):
        return self.weights @ self.components


class _Drift:
    """Assembles beta^w at the cell faces from the current densities."""

    def __init__(self, model, atoms, weights, faces, centers, dx):
        self.model = model
        self.atoms = atoms
        self.weights = weights
        self.dx = dx
        m = atoms.shape[0]
        self.coupling = model.W(atoms[:, None, :], atoms[None, :, :]) * weights[None, :]
        self.psi = np.stack([model.psi(faces, np.broadcast_to(a, faces.shape + (model.d,))) for a in atoms])
        self.fourier = model.fourier if model.fourier is not None else None
        if self.fourier is not None and len(self.fourier):
            z = self.fourier.frequencies
            d = model.d
            # e^{2 pi i (zx x_f + zw.w)} per atom/face and e^{2 pi i (zy y_k + zp.p)} per atom/cell
            self.outer = np.exp(1j * TWO_PI * (faces[None, :, None] * z[None, None, :, 0]
                                               + (atoms @ z[:, 2:2 + d].T)[:, None, :]))
            self.inner = np.exp(1j * TWO_PI * (centers[None, :, None] * z[None, None, :, 1]
                                               + (atoms @ z[:, 2 + d:].T)[:, None, :]))
            self.coef = self.fourier.weights
            self.mode = "fourier"
        elif self.fourier is not None:
            self.mode = "none"
        else:
            size = m * m * faces.size * centers.size
            if size > _KERNEL_CACHE_LIMIT:
                raise ValueError("kernel tensor too large; supply a Fourier representation")
            self.kernel = np.empty((m, m, faces.size, centers.size))
            for a in range(m):
                for b in range(m):
                    self.kernel[a, b] = model.phi(
                        faces[:, None], centers[None, :],
                        np.broadcast_to(atoms[a], (faces.size, centers.size, model.d)),
                        np.broadcast_to(atoms[b], (faces.size, centers.size, model.d)),
                    )
            self.mode = "kernel"
        self.m = m

    def __call__(self, q):
        if self.mode == "none":
            return self.psi.copy()
        if self.mode == "fourier":
            moments = np.einsum("pkj,pk->pj", self.inner, q) * self.dx
            mixed = self.coupling @ moments
            inter = np.real(np.einsum("wfj,wj,j->wf", self.outer, mixed, self.coef))
        else:
            conv = np.einsum("wpfk,pk->wpf", self.kernel, q) * self.dx
            inter = np.einsum("wp,wpf->wf", self.coupling, conv)
        return inter + self.psi


def _auto_domain(model, T):
    lo = float(model.initial.ppf(1e-9))
    hi = float(model.initial.ppf(1 - 1e-9))
    reach = (model.sup_W * model.sup_phi + model.sup_psi) * T + 8.0 * np.sqrt(T)
    return lo - reach, hi + reach


def _initial_cells(model, edges, initial=None):
    law = initial if initial is not None else model.initial
    cdf = np.asarray(law.cdf(edges), dtype=float)
    mass = np.diff(cdf)
    total = mass.sum()
    truncation = max(0.0, 1.0 - total)
    return mass / total / np.diff(edges), truncation


class _Stepper:
    def __init__(self, periodic, dx, dt):
        self.periodic = periodic
        self.dx = dx
        self.dt = dt

    def advect(self, q, beta):
        # beta holds face velocities; face f sits at the left edge of cell f
        if self.periodic:
            left = np.roll(q, 1, axis=-1)
            flux = np.maximum(beta, 0.0) * left + np.minimum(beta, 0.0) * q
            return q - self.dt / self.dx * (np.roll(flux, -1, axis=-1) - flux)
        flux = np.zeros(q.shape[:-1] + (q.shape[-1] + 1,))
        b = beta[..., 1:-1]
        flux[..., 1:-1] = np.maximum(b, 0.0) * q[..., :-1] + np.minimum(b, 0.0) * q[..., 1:]
        return q - self.dt / self.dx * np.diff(flux, axis=-1)

    def diffuse(self, q):
        if self.periodic:
            flux = -0.5 * (q - np.roll(q, 1, axis=-1)) / self.dx
            return q - self.dt / self.dx * (np.roll(flux, -1, axis=-1) - flux)
        flux = np.zeros(q.shape[:-1] + (q.shape[-1] + 1,))
        flux[..., 1:-1] = -0.5 * np.diff(q, axis=-1) / self.dx
        return q - self.dt / self.dx * np.diff(flux, axis=-1)


def _setup(model, media_atoms, grid_points, T, seed, domain):
    periodic = bool(model.periodic)
    if periodic:
        lo, hi = -np.pi, np.pi
    else:
        lo, hi = domain if domain is not None else _auto_domain(model, T)
    edges = np.linspace(lo, hi, grid_points + 1)
    dx = float(edges[1] - edges[0])
    faces = edges[:-1] if periodic else edges
    centers = 0.5 * (edges[1:] + edges[:-1])
    atoms, weights = model.media.quantile_atoms(media_atoms, seed=seed)
    return periodic, edges, dx, faces, centers, atoms, weights


def _check_cfl(dt, dx, velocity_bound):
    if dt > 0.5 * dx * dx:
        raise CFLError(f"diffusive CFL violated: dt={dt:.3g} > dx^2/2={0.5 * dx * dx:.3g}")
    if velocity_bound * dt / dx > 1.0:
        raise CFLError(f"advective CFL violated: |beta| dt/dx = {velocity_bound * dt / dx:.3g} > 1")


def solve_mckv(model, media_atoms=1, grid_points=256, T=1.0, dt_pde=None, seed=0,
               checkpoints=None, domain=None, initial=None):
    """Forward solve of the coupled Fokker-Planck system.

    ``dt_pde`` defaults to the largest step below ``min(0.4 dx^2, 0.4 dx / |beta|max)``
    that divides ``T``.  ``checkpoints`` (default: 0 and T) are rounded to the
    nearest step.
    """
    if grid_points < 4:
        raise ValueError("grid_points must be >= 4")
    periodic, edges, dx, faces, centers, atoms, weights = _setup(model, media_atoms, grid_points, T, seed, domain)
    vmax = model.sup_W * model.sup_phi + model.sup_psi
    if dt_pde is None:
        dt_max = 0.4 * dx * dx
        if vmax > 0:
            dt_max = min(dt_max, 0.4 * dx / vmax)
        steps = int(np.ceil(T / dt_max))
        dt_pde = T / steps
    else:
        steps = int(round(T / dt_pde))
        if steps < 1 or abs(steps * dt_pde - T) > 1e-9 * max(T, 1.0):
            raise ValueError(f"T={T} is not a multiple of dt_pde={dt_pde}")
    _check_cfl(dt_pde, dx, vmax)
    q0, truncation = _initial_cells(model, edges, initial)
    if truncation > 0:
        log.info("initial law truncated to the grid; lost mass %.3g renormalized", truncation)
    q = np.repeat(q0[None, :], atoms.shape[0], axis=0)
    drift = _Drift(model, atoms, weights, faces, centers, dx)
    stepper = _Stepper(periodic, dx, dt_pde)
    if checkpoints is None:
        checkpoints = [0.0, T]
    ck_steps = {int(round(t / dt_pde)): float(t) for t in checkpoints}
    stored, times, mass_err = [], [], []
    clip_mass = 0.0

    def record(k, q):
        stored.append(q.copy())
        times.append(ck_steps[k])
        mass_err.append(np.abs(q.sum(axis=1) * dx - 1.0))

    if 0 in ck_steps:
        record(0, q)
    for k in range(1, steps + 1):
        q = stepper.diffuse(stepper.advect(q, drift(q)))
        neg = q < 0
        if neg.any():
            clip_mass += float(-q[neg].sum() * dx)
            q[neg] = 0.0
        if k in ck_steps:
            record(k, q)
    if clip_mass:
        log.info("clipped negative mass %.3g", clip_mass)
    return DensityFlow(
        edges=edges, periodic=periodic, atoms=atoms, atom_weights=weights,
        times=np.array(times), q=np.array(stored), dt_pde=float(dt_pde),
        mass_error=np.array(mass_err), clip_mass=clip_mass, truncation_mass=truncation,
        meta={"model": model.name, "steps": steps, "_model": model},
    )


def mckv_marginal(flow, t):
    k = flow.checkpoint_index(t)
    return Mixture(flow.edges, flow.atom_weights.copy(), flow.q[k].copy(), flow.periodic)


def sample_marginal(flow, t, n, seed=0, quantiles=False):
    """Draw ``n`` positions from the x-marginal by inverse CDF.

    ``quantiles=True`` returns the deterministic midpoint quantiles instead.
    """
    mix = mckv_marginal(flow, t)
    cdf = np.concatenate([[0.0], np.cumsum(mix.density * np.diff(flow.edges))])
    cdf /= cdf[-1]
    if quantiles:
        u = (np.arange(n) + 0.5) / n
    else:
        u = _rng.stream(seed, _rng.MC, 2).random(n)
    # strictly increasing cdf pieces only; flat pieces carry no mass
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return np.interp(u, cdf[keep], flow.edges[keep])


@dataclass
class Comparison:
    distance: float
    per_atom: list


def compare_to_empirical(flow, emp, t):
    """W1 (circular for periodic models) between empirical and limiting x-marginals."""
    if isinstance(emp, EmpiricalMeasure):
        positions = emp.trajectories[:, emp.step_index(t)]
        media = emp.media
    else:
        positions, media = emp
        positions = np.asarray(positions, float)
    mix = mckv_marginal(flow, t)
    dist_fn = circular_wasserstein_sample_density if flow.periodic else wasserstein_sample_density
    total = dist_fn(positions, flow.edges, mix.density)
    per_atom = []
    m = flow.atoms.shape[0]
    if m <= 8 and media is not None and m > 1:
        media = np.asarray(media, float).reshape(len(positions), -1)
        nearest = np.argmin(np.linalg.norm(media[:, None, :] - flow.atoms[None, :, :], axis=2), axis=1)
        for a in range(m):
            sel = positions[nearest == a]
            per_atom.append(dist_fn(sel, flow.edges, mix.components[a]) if sel.size else float("nan"))
    return Comparison(float(total), per_atom)


def stationarity_residual(flow, model=None):
    """L1 change per unit time of one step with the drift frozen at the final densities."""
    model = model if model is not None else flow.meta.get("_model")
    if model is None:
        raise ValueError("the model is required to rebuild the drift")
    q = flow.q[-1]
    edges = flow.edges
    dx = flow.dx
    faces = edges[:-1] if flow.periodic else edges
    centers = flow.centers
    drift = _Drift(model, flow.atoms, flow.atom_weights, faces, centers, dx)
    beta = drift(q)
    stepper = _Stepper(flow.periodic, dx, flow.dt_pde)
    q_new = stepper.diffuse(stepper.advect(q, beta))
    change = np.abs(q_new - q).sum(axis=1) * dx
    return float(flow.atom_weights @ change / flow.dt_pde)


class McKeanVlasovSolver(BaseEstimator):
    """Estimator wrapper around :func:`solve_mckv`.

    ``fit()`` solves the PDE; ``predict(t)`` returns the mixture density on the
    cell centres; ``score(emp, t)`` is minus the W1 discrepancy.
    """

    def __init__(self, model=None, media_atoms=1, grid_points=256, T=1.0, dt_pde=None, seed=0,
                 checkpoints=None):
        self.model = model
        self.media_atoms = media_atoms
        self.grid_points = grid_points
        self.T = T
        self.dt_pde = dt_pde
        self.seed = seed
        self.checkpoints = checkpoints

    def fit(self, X=None, y=None):
        self.flow_ = solve_mckv(self.model, self.media_atoms, self.grid_points, self.T,
                                dt_pde=self.dt_pde, seed=self.seed, checkpoints=self.checkpoints)
        return self

    def predict(self, t):
        check_is_fitted(self, "flow_")
        return mckv_marginal(self.flow_, t).density

    def score(self, emp, t):
        check_is_fitted(self, "flow_")
        return -compare_to_empirical(self.flow_, emp, t).distance
