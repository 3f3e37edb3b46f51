import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import sparse

from sparsediff.graph import (WRandomGraph, graph_from_json, graph_to_json, kernel_matrix, row_sum_stats,
                              sample_w_graph)
from sparsediff.model import kuramoto, spatial_kuramoto
from sparsediff.norms import norm_inf_to_one_exact


def ones(w, p):
    return np.ones(np.broadcast_shapes(np.shape(w)[:-1], np.shape(p)[:-1]))


def test_same_seed_same_graph_and_different_seed_differs():
    media = np.zeros((40, 1))
    a = sample_w_graph(40, 0.3, ones, media, seed=9)
    b = sample_w_graph(40, 0.3, ones, media, seed=9)
    c = sample_w_graph(40, 0.3, ones, media, seed=10)
    assert np.array_equal(a.P_dense(), b.P_dense())
    assert not np.array_equal(a.P_dense(), c.P_dense())


@given(st.integers(2, 30), st.floats(0.01, 1.0), st.integers(0, 2**32))
def test_structure(n, p, seed):
    s = sample_w_graph(n, p, ones, np.zeros((n, 1)), seed)
    A = s.adjacency.toarray() if sparse.issparse(s.adjacency) else s.adjacency
    assert np.array_equal(A, A.T)
    assert set(np.unique(A)) <= {0, 1}
    assert np.array_equal(s.P_dense(), A / (p * n))
    assert np.array_equal(s.D, s.P_dense() - s.Pbar)
    assert np.allclose(s.D + s.Pbar, s.P_dense(), rtol=0, atol=4 * np.finfo(float).eps / p)
    assert s.is_sparse == (p <= 1 / 8)


def test_full_graph_has_zero_difference():
    s = sample_w_graph(30, 1.0, ones, np.zeros((30, 1)), 0)
    assert np.all(s.adjacency == 1)
    assert np.all(s.D == 0.0)


def test_edge_frequency_matches_kernel():
    m = spatial_kuramoto(1.0, C=4.0, alpha=1.0)
    n, p = 300, 0.5
    media = m.sample_media(2, n)
    K = kernel_matrix(m.W, media)
    hits = np.zeros((n, n))
    reps = 20
    for r in range(reps):
        hits += sample_w_graph(n, p, m.W, media, r).adjacency
    iu = np.triu_indices(n)
    expected = (p * K[iu]).sum() * reps
    # binomial count of ~ 10^5 edges: 6 standard deviations
    assert abs(hits[iu].sum() - expected) < 6 * np.sqrt(expected)


def test_kernel_guards():
    media = np.zeros((5, 1))
    with pytest.raises(ValueError, match="exceeds 1"):
        sample_w_graph(5, 0.6, lambda w, p: 2 * ones(w, p), media, 0)
    with pytest.raises(ValueError, match="nonnegative"):
        sample_w_graph(5, 0.5, lambda w, p: -ones(w, p), media, 0)
    with pytest.raises(ValueError, match="symmetric"):
        sample_w_graph(3, 0.5, lambda w, p: 0.5 + 0.1 * (w[..., 0] - p[..., 0]), np.arange(3.0)[:, None], 0)
    with pytest.raises(ValueError):
        sample_w_graph(5, 0.0, ones, media, 0)


def test_row_sum_bound_exact_small():
    for seed in range(20):
        s = sample_w_graph(12, 0.4, ones, np.zeros((12, 1)), seed)
        stats = row_sum_stats(s)
        assert stats["norm_D"] == norm_inf_to_one_exact(s.D)
        assert stats["bound_holds"]
        assert stats["mean_S"] == pytest.approx(2 * stats["ones_P_ones_over_n"])


def test_json_container_round_trip():
    m = kuramoto(1.0)
    media = m.sample_media(0, 50)
    s = sample_w_graph(50, 0.1, m.W, media, 5, kernel_id="kuramoto")
    back = graph_from_json(graph_to_json(s), m.W)
    assert back.n == 50 and back.p == 0.1 and back.seed == 5 and back.kernel_id == "kuramoto"
    assert np.array_equal(back.media, s.media)
    assert np.array_equal(back.P_dense(), s.P_dense())
    with pytest.raises(ValueError):
        graph_from_json('{"format": "other"}', m.W)


def test_estimator_wrapper():
    est = WRandomGraph(p=0.2, kernel=ones, seed=1).fit(np.zeros((25, 1)))
    assert est.sample_.n == 25
    assert est.D_.shape == (25, 25)
    assert est.row_sums()["bound_holds"]
    assert est.get_params()["p"] == 0.2
