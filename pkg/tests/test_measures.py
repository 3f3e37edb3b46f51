import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import wasserstein_distance

from sparsediff.dynamics import integrate_coupled
from sparsediff.graph import sample_w_graph
from sparsediff.measures import (EmpiricalMeasure, capped_delta, circular_wasserstein_sample_density,
                                 circular_wasserstein_samples, coupling_delta, dbl_lower_bound,
                                 gronwall_wasserstein_bound, marginal, running_sup_gap, wasserstein_1d,
                                 wasserstein_sample_density)
from sparsediff.model import free_diffusion, kuramoto

samples = arrays(np.float64, st.integers(1, 30), elements=st.floats(-50, 50, allow_nan=False))


@given(samples, samples)
def test_w1_matches_scipy(a, b):
    assert wasserstein_1d(a, b) == pytest.approx(wasserstein_distance(a, b), rel=1e-9, abs=1e-9)


@given(samples)
def test_w1_weighted_matches_scipy(a):
    w = np.linspace(1.0, 2.0, a.size)
    b = a[::-1] + 1.0
    assert wasserstein_1d(a, b, a_weights=w) == pytest.approx(
        wasserstein_distance(a, b, u_weights=w), rel=1e-9, abs=1e-9)


def test_w1_equal_size_matches_assignment_brute_force():
    g = np.random.default_rng(1)
    a, b = g.normal(size=6), g.normal(size=6)
    best = min(np.mean(np.abs(a - b[list(perm)])) for perm in itertools.permutations(range(6)))
    assert wasserstein_1d(a, b) == pytest.approx(best, rel=1e-12)


def _circular_oracle(a, b, period):
    a, b = np.sort(np.mod(a, period)), np.sort(np.mod(b, period))
    best = np.inf
    for k in range(len(b)):
        d = np.abs(a - np.roll(b, k))
        best = min(best, np.mean(np.minimum(d, period - d)))
    return best


@pytest.mark.parametrize("seed", range(8))
def test_circular_w1_matches_shift_oracle(seed):
    g = np.random.default_rng(seed)
    a = g.vonmises(0.0, 2.0, 9)
    b = g.uniform(-np.pi, np.pi, 9)
    assert circular_wasserstein_samples(a, b) == pytest.approx(_circular_oracle(a, b, 2 * np.pi), rel=1e-9)


def test_circular_w1_rotation_of_uniform_grid_is_small():
    a = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    assert circular_wasserstein_samples(a, a + 0.01) == pytest.approx(0.01, rel=1e-9)
    # the linear distance would see a large shift across the cut
    b = np.mod(a + np.pi, 2 * np.pi)
    assert circular_wasserstein_samples(a, b) == pytest.approx(0.0, abs=1e-12)


def test_sample_density_distances_match_fine_quantile_samples():
    edges = np.linspace(-np.pi, np.pi, 65)
    centers = 0.5 * (edges[1:] + edges[:-1])
    density = 1.0 + 0.5 * np.cos(centers)
    density /= density.sum() * (edges[1] - edges[0])
    cdf = np.concatenate([[0.0], np.cumsum(density * np.diff(edges))])
    fine = np.interp((np.arange(200_000) + 0.5) / 200_000, cdf, edges)
    sample = np.random.default_rng(0).uniform(-1.0, 2.0, 300)
    assert wasserstein_sample_density(sample, edges, density) == pytest.approx(
        wasserstein_distance(sample, fine), abs=1e-4)
    assert circular_wasserstein_sample_density(sample, edges, density) == pytest.approx(
        _circular_oracle(sample, np.interp((np.arange(300) + 0.5) / 300, cdf, edges), 2 * np.pi), abs=0.02)
    assert circular_wasserstein_sample_density(sample, edges, density) <= \
        wasserstein_sample_density(sample, edges, density) + 1e-12


def test_uniform_density_against_its_quantiles():
    edges = np.linspace(0, 1, 11)
    q = (np.arange(1000) + 0.5) / 1000
    assert wasserstein_sample_density(q, edges, np.ones(10)) == pytest.approx(1 / 4000, rel=1e-9)


def _pair(seed=0, n=40, p=0.2, T=0.2):
    m = kuramoto(1.0)
    s = sample_w_graph(n, p, m.W, m.sample_media(seed, n), seed)
    return integrate_coupled(m, s, T, 1e-3, seed)


def test_coupling_report_consistency():
    pair = _pair()
    rep = coupling_delta(pair)
    sup = running_sup_gap(pair.theta_sparse, pair.theta_dense)
    assert np.all(np.diff(rep.per_time_delta) >= 0)
    assert rep.delta_T == pytest.approx(sup[:, -1].mean())
    assert rep.delta_T_capped == capped_delta(pair.theta_sparse, pair.theta_dense)
    assert rep.delta_T_capped <= rep.delta_T
    assert np.all(rep.w1_marginals <= rep.per_time_delta + 1e-12)
    assert rep.per_time_delta[0] == 0.0


@pytest.mark.parametrize("seed", range(3))
def test_dbl_lower_bound_below_capped_coupling(seed):
    pair = _pair(seed, p=0.1, T=0.5)
    a, b = EmpiricalMeasure.from_pair(pair, "sparse"), EmpiricalMeasure.from_pair(pair, "dense")
    lower = dbl_lower_bound(a, b, dictionary_size=300, seed=seed)
    assert 0 <= lower <= coupling_delta(pair).delta_T_capped + 1e-12


def test_dbl_separated_diracs():
    paths_a = np.zeros((1, 11))
    paths_b = np.full((1, 11), 10.0)
    media = np.zeros((1, 1))
    value = dbl_lower_bound(EmpiricalMeasure(paths_a, media, 0.1), EmpiricalMeasure(paths_b, media, 0.1))
    assert 0.8 <= value <= 10 / 12 + 1e-12


def test_dbl_identical_measures_is_zero():
    pair = _pair()
    a = EmpiricalMeasure.from_pair(pair)
    assert dbl_lower_bound(a, a, dictionary_size=50) == 0.0


def test_marginal_and_grid_checks():
    pair = _pair(T=0.1)
    emp = EmpiricalMeasure.from_pair(pair, "dense")
    x, w = marginal(emp, 0.05)
    assert np.array_equal(x, pair.theta_dense[:, 50])
    with pytest.raises(ValueError):
        emp.step_index(0.0505)
    with pytest.raises(ValueError):
        emp.step_index(0.2)


def test_gronwall_frozen_value_and_errors():
    m = kuramoto(1.0)
    # rate = sup_W (2 Lip(phi) + Lip(psi)) = 5
    assert gronwall_wasserstein_bound(m, 10.0, 16, 1.0) == pytest.approx(np.exp(5.0) * 2.5, rel=1e-12)
    assert gronwall_wasserstein_bound(free_diffusion(), 3.0, 16, 1.0) == 0.0
    with pytest.raises(ValueError):
        gronwall_wasserstein_bound(m, -1.0, 16, 1.0)
