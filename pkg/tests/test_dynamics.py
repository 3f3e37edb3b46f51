from dataclasses import replace

import numpy as np
import pytest
from scipy import sparse

from sparsediff._validation import NumericalFailure
from sparsediff.dynamics import (CoupledDiffusion, InteractionEvaluator, drift_dense, drift_sparse,
                                 integrate_coupled, integrate_single, interaction_bound_ok)
from sparsediff.graph import sample_w_graph
from sparsediff.model import free_diffusion, kuramoto, spatial_kuramoto
from sparsediff.rng import brownian_increments


def _graph(model, n, p, seed):
    return sample_w_graph(n, p, model.W, model.sample_media(seed, n), seed)


def test_identical_weights_give_identical_paths():
    m = kuramoto(1.0)
    s = _graph(m, 64, 1.0, 0)
    pair = integrate_coupled(m, s, 0.1, 1e-3, seed=0)
    assert np.array_equal(pair.theta_sparse, pair.theta_dense)


def test_free_diffusion_is_initial_plus_noise():
    m = free_diffusion()
    s = _graph(m, 10, 0.5, 1)
    pair = integrate_coupled(m, s, 0.05, 1e-3, seed=4)
    dB = brownian_increments(4, 10, 50, 1e-3)
    assert np.allclose(pair.theta_sparse[:, -1], pair.xi + dB.sum(axis=1), atol=1e-14)
    assert np.array_equal(pair.theta_sparse, pair.theta_dense)


@pytest.mark.parametrize("p", [0.05, 0.5])
def test_fourier_and_pairwise_evaluators_agree(p):
    m = spatial_kuramoto(1.0, C=3.0, alpha=1.5)
    s = _graph(m, 120, p, 2)
    x = m.sample_initial(2, 120)
    for W in (s.P, s.Pbar):
        fast = InteractionEvaluator(m, W, s.media)(x)
        slow = InteractionEvaluator(m, W, s.media, fourier=None)(x)
        assert np.allclose(fast, slow, rtol=0, atol=1e-12)


def test_single_particle_drifts_match_evaluator():
    m = kuramoto(0.8)
    s = _graph(m, 50, 0.08, 3)
    assert sparse.issparse(s.P)
    x = m.sample_initial(3, 50)
    full_sparse = InteractionEvaluator(m, s.P, s.media)(x) + m.psi(x, s.media)
    full_dense = InteractionEvaluator(m, s.Pbar, s.media)(x) + m.psi(x, s.media)
    for i in (0, 17, 49):
        assert drift_sparse(m, s, x, i) == pytest.approx(full_sparse[i], abs=1e-12)
        assert drift_dense(m, s.media, x, i) == pytest.approx(full_dense[i], abs=1e-12)


def test_brownian_refinement_consistency():
    coarse = brownian_increments(7, 5, 10, 0.02, aggregate=2)
    fine = brownian_increments(7, 5, 20, 0.01)
    assert np.allclose(coarse, fine.reshape(5, 10, 2).sum(axis=2), atol=1e-15)
    # a row depends only on its particle index
    assert np.array_equal(brownian_increments(7, 8, 10, 0.02)[:5], brownian_increments(7, 5, 10, 0.02))


def test_increment_statistics():
    dB = brownian_increments(0, 200, 500, 0.01)
    assert abs(dB.mean()) < 5 * 0.1 / np.sqrt(dB.size)
    assert dB.var() == pytest.approx(0.01, rel=0.02)


def test_strong_error_decreases_with_step():
    m = kuramoto(1.0)
    s = _graph(m, 40, 1.0, 0)
    ref = integrate_single(m, s.Pbar, s.media, 0.64, 1e-4, seed=1, aggregate=1)[:, -1]
    errs = []
    for agg, dt in ((4, 4e-4), (16, 1.6e-3)):
        end = integrate_single(m, s.Pbar, s.media, 0.64, dt, seed=1, aggregate=agg)[:, -1]
        errs.append(np.mean(np.abs(end - ref)))
    assert errs[0] < errs[1]


def test_numerical_failure_is_reported():
    m = replace(free_diffusion(), psi=lambda x, w: 1e300 * np.asarray(x) ** 2)
    s = _graph(m, 4, 1.0, 0)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NumericalFailure, match="step"):
            integrate_coupled(m, s, 0.01, 1e-3, seed=0, xi=np.ones(4))


def test_input_validation():
    m = kuramoto(1.0)
    s = _graph(m, 8, 0.5, 0)
    with pytest.raises(ValueError):
        integrate_coupled(m, s, 1.0, 0.3, seed=0)
    with pytest.raises(ValueError):
        integrate_coupled(m, s, 0.1, 0.01, seed=0, xi=np.zeros(3))
    with pytest.raises(ValueError):
        integrate_coupled(m, s, 0.1, 0.01, seed=0, increments=np.zeros((8, 2)))


def test_dense_interaction_bound():
    m = kuramoto(2.0)
    media = m.sample_media(0, 30)
    assert interaction_bound_ok(m, m.sample_initial(0, 30), media)


def test_estimator_wrapper():
    m = kuramoto(1.0)
    s = _graph(m, 32, 0.25, 0)
    est = CoupledDiffusion(model=m, T=0.05, dt=1e-3, seed=3).fit(s)
    out = est.transform()
    assert out.shape == (32, 2)
    assert est.pair_.times[-1] == pytest.approx(0.05)
    assert est.coupling_report().delta_T >= 0
