import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparsediff.model import (FourierMeasure, cosine_perturbed_uniform, free_diffusion, fourier_model, get_model,
                              hamiltonian_energy, audit_lipschitz, kuramoto, reconstruction_error,
                              spatial_kuramoto, tv_norm)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
def test_kuramoto_fourier_reconstructs_sine(kappa):
    m = kuramoto(kappa)
    imag, real = reconstruction_error(m)
    assert imag < 1e-12 and real < 1e-12
    assert tv_norm(m.fourier) == pytest.approx(kappa)


def test_spatial_kuramoto_reconstruction_and_kernel():
    m = spatial_kuramoto(1.0, C=2.0, alpha=1.0)
    assert max(reconstruction_error(m)) < 1e-12
    w = np.array([0.0, 0.0, 0.0, 0.3])
    p = np.array([1.0, 0.0, 0.0, 0.9])
    assert m.W(w, p) == pytest.approx(1.0 / 3.0)
    assert m.W(w, w) == 1.0
    assert m.psi(np.zeros(1), w[None, :])[0] == 0.3


def test_smoothed_measure_damps_each_atom():
    m = kuramoto(1.0).fourier
    s = m.smoothed(0.1)
    z2 = np.sum(m.frequencies**2, axis=1)
    assert np.allclose(np.abs(s.weights), np.abs(m.weights) * np.exp(-2 * np.pi**2 * 0.01 * z2))
    # sin smoothed by N(0, 0.1^2) in the difference coordinate scales by exp(-eps^2)
    v = np.array([[0.3, 1.1, 0.0, 0.0]])
    assert s.evaluate(v).real[0] == pytest.approx(np.exp(-0.01) * np.sin(0.8), rel=1e-12)


def test_fourier_json_round_trip(tmp_path):
    m = kuramoto(0.7).fourier
    back = FourierMeasure.from_json(json.dumps(m.to_json()))
    assert np.array_equal(back.frequencies, m.frequencies)
    assert np.array_equal(back.weights, m.weights)
    assert len(FourierMeasure.from_json([])) == 0


def test_fourier_model_from_atoms():
    atoms = kuramoto(1.0).fourier.to_json()

    def W(w, p):
        return np.ones(np.broadcast_shapes(np.shape(w)[:-1], np.shape(p)[:-1]))

    base = kuramoto(1.0)
    m = fourier_model(atoms, base.psi, W, 1, base.initial, base.media, 2.0, 1.0, 1.0, 0.5)
    x = np.linspace(-3, 3, 7)
    assert np.allclose(m.phi(x, 0.4, np.zeros((7, 1)), np.zeros((7, 1))), np.sin(0.4 - x))
    assert m.sup_phi == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fourier_model(atoms, base.psi, W, 2, base.initial, base.media, 2.0, 1.0, 1.0, 0.5)


@given(st.floats(-0.99, 0.99))
def test_cosine_perturbed_uniform_is_a_density(a):
    law = cosine_perturbed_uniform(a)
    assert law.cdf(-np.pi) == pytest.approx(0.0, abs=1e-12)
    assert law.cdf(np.pi) == pytest.approx(1.0, abs=1e-12)
    u = np.array([0.1, 0.5, 0.9])
    assert np.allclose(law.cdf(law.ppf(u)), u, atol=1e-8)


def test_gradient_identity_small():
    m = kuramoto(1.3)
    g = np.random.default_rng(0)
    n = 6
    x = g.uniform(-np.pi, np.pi, n)
    media = m.sample_media(0, n)
    h = 1e-6
    drift = np.array([np.mean(m.phi(x[i], x, media[i], media)) + m.psi(x[i], media[i]) for i in range(n)])
    grad = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        grad[i] = (hamiltonian_energy(m, x + e, media) - hamiltonian_energy(m, x - e, media)) / (2 * h)
    assert np.max(np.abs(drift + grad)) < 1e-6


def test_declared_lipschitz_constants_hold():
    for m in (kuramoto(1.0), spatial_kuramoto(0.5, 1.0, 2.0), free_diffusion()):
        audit = audit_lipschitz(m, pairs=2000)
        assert audit["phi_ok"] and audit["psi_ok"]


def test_registry_and_sampling_determinism():
    m = get_model("kuramoto", kappa=1.0, frequencies=(-0.5, 0.5))
    assert np.array_equal(m.sample_media(3, 50), m.sample_media(3, 50))
    assert np.array_equal(m.sample_initial(3, 50), m.sample_initial(3, 50))
    assert not np.array_equal(m.sample_initial(3, 50), m.sample_initial(4, 50))
    media = m.sample_media(1, 1000)
    assert media.min() >= -0.5 and media.max() <= 0.5
    with pytest.raises(ValueError):
        get_model("nope")


def test_degenerate_frequencies_give_point_mass():
    m = kuramoto(1.0, frequencies=(0.0, 0.0))
    assert np.all(m.sample_media(0, 20) == 0.0)
    assert m.sup_psi == 0.0
