"""Sparse W-random graphs and the comparison matrices P, Pbar and D = P - Pbar."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import rng as _rng
from ._validation import check_media
from .norms import EXACT_CAP, norm_inf_to_one_exact, norm_inf_to_one_upper

_ROW_CHUNK = 256


@dataclass
class GraphSample:
    """One realization of the random graph and its derived matrices.

    ``adjacency`` and ``P`` are CSR matrices when the graph is sparse
    (``p <= 1/8``) and dense arrays otherwise.  ``Pbar`` is always dense.
    """

    n: int
    p: float
    media: np.ndarray
    adjacency: object
    P: object
    Pbar: np.ndarray
    seed: int
    kernel_id: str = "custom"
    meta: dict = field(default_factory=dict)

    @property
    def is_sparse(self):
        return sparse.issparse(self.P)

    def P_dense(self):
        return self.P.toarray() if self.is_sparse else self.P

    @property
    def D(self):
        return self.P_dense() - self.Pbar

    def edges(self):
        """Edge list ``(i, j)`` with ``i <= j``."""
        A = sparse.triu(sparse.csr_matrix(self.adjacency), format="coo")
        order = np.lexsort((A.col, A.row))
        return np.column_stack([A.row[order], A.col[order]]).astype(np.int64)


def kernel_matrix(W, media):
    """Dense matrix ``W(w_i, w_j)`` evaluated row-block by row-block."""
    n = media.shape[0]
    K = np.empty((n, n))
    for s in range(0, n, _ROW_CHUNK):
        K[s:s + _ROW_CHUNK] = W(media[s:s + _ROW_CHUNK, None, :], media[None, :, :])
    return K


def _check_kernel(K, p):
    if not np.all(np.isfinite(K)):
        raise ValueError("kernel returned non-finite values")
    if np.any(K < 0):
        raise ValueError("kernel must be nonnegative")
    if not np.allclose(K, K.T, rtol=0, atol=1e-12):
        raise ValueError("kernel must be symmetric")
    worst = float(p * K.max()) if K.size else 0.0
    if worst > 1.0:
        raise ValueError(f"p * W exceeds 1 on a sampled pair (max {worst:.6g})")


def _assemble(n, p, media, rows, cols, K, seed, kernel_id):
    use_sparse = p * n <= n / 8
    r = np.concatenate([rows, cols[rows != cols]])
    c = np.concatenate([cols, rows[rows != cols]])
    data = np.ones(r.shape[0], dtype=np.int8)
    A = sparse.csr_matrix((data, (r, c)), shape=(n, n))
    A.sort_indices()
    scale = p * n
    if use_sparse:
        P = A.astype(float) / scale
        P.sort_indices()
    else:
        A = A.toarray()
        P = A / scale
    Pbar = K / n
    return GraphSample(n=n, p=float(p), media=media, adjacency=A, P=P, Pbar=Pbar,
                       seed=int(seed), kernel_id=kernel_id)


def sample_w_graph(n, p, W, media, seed, kernel_id="custom"):
    """Sample the symmetric adjacency matrix with loops.

    Entries ``A_ij`` for ``i <= j`` are independent Bernoulli(p W(w_i, w_j));
    the uniforms are read in row-major upper-triangle order from the stream
    ``(seed, GRAPH)``.
    """
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    media = check_media(media, n)
    K = kernel_matrix(W, media)
    _check_kernel(K, p)
    iu, ju = np.triu_indices(n)
    u = _rng.stream(seed, _rng.GRAPH).random(iu.shape[0])
    hit = u < p * K[iu, ju]
    return _assemble(n, p, media, iu[hit], ju[hit], K, seed, kernel_id)


def row_sum_stats(sample, norm_D=None):
    """Row sums ``S_i`` of ``P + P^T`` and the mean-degree bound.

    ``norm_D`` defaults to the exact norm when ``n <= 20`` and the entrywise
    upper certificate otherwise, so the reported bound stays valid.
    """
    P = sample.P
    S = 2.0 * np.asarray(P.sum(axis=1)).ravel()
    ones_P_ones = float(np.asarray(P.sum()).ravel()[0]) / sample.n
    if norm_D is None:
        D = sample.D
        norm_D = norm_inf_to_one_exact(D) if sample.n <= EXACT_CAP else norm_inf_to_one_upper(D)
    sup_W = float(sample.Pbar.max() * sample.n) if sample.n else 0.0
    bound = sup_W + norm_D / sample.n
    return {
        "S": S,
        "mean_S": float(S.mean()),
        "ones_P_ones_over_n": ones_P_ones,
        "norm_D": float(norm_D),
        "bound": bound,
        "bound_holds": ones_P_ones <= bound + 1e-12,
    }


class WRandomGraph(BaseEstimator):
    """Estimator-style sampler: ``fit(media)`` draws one graph realization.

    Parameters
    ----------
    p : float
        Sparsity scalar in (0, 1].
    kernel : callable
        Symmetric edge kernel ``W(w, p)``.
    seed : int
        Stream seed; identical ``(seed, n, p, media)`` give identical graphs.
    kernel_id : str
        Label written into serialized containers.
    """

    def __init__(self, p=1.0, kernel=None, seed=0, kernel_id="custom"):
        self.p = p
        self.kernel = kernel
        self.seed = seed
        self.kernel_id = kernel_id

    def fit(self, X, y=None):
        media = check_media(X)
        kernel = self.kernel if self.kernel is not None else _unit_kernel
        self.sample_ = sample_w_graph(media.shape[0], self.p, kernel, media, self.seed, self.kernel_id)
        self.n_features_in_ = media.shape[1]
        return self

    @property
    def P_(self):
        check_is_fitted(self, "sample_")
        return self.sample_.P

    @property
    def D_(self):
        check_is_fitted(self, "sample_")
        return self.sample_.D

    def row_sums(self):
        check_is_fitted(self, "sample_")
        return row_sum_stats(self.sample_)


def _unit_kernel(w, p):
    return np.ones(np.broadcast_shapes(np.shape(w)[:-1], np.shape(p)[:-1]))


# --- JSON container -------------------------------------------------------

GRAPH_FORMAT = "sparsediff.graph/1"


def graph_to_json(sample):
    """Container: ``{"format", "header": {n, p, d, seed, kernel}, "media", "edges"}``."""
    doc = {
        "format": GRAPH_FORMAT,
        "header": {
            "n": sample.n,
            "p": sample.p,
            "d": int(sample.media.shape[1]),
            "seed": sample.seed,
            "kernel": sample.kernel_id,
        },
        "media": sample.media.tolist(),
        "edges": sample.edges().tolist(),
    }
    return json.dumps(doc)


def graph_from_json(text, W):
    doc = json.loads(text)
    if doc.get("format") != GRAPH_FORMAT:
        raise ValueError(f"not a graph container: {doc.get('format')!r}")
    h = doc["header"]
    n, p = int(h["n"]), float(h["p"])
    media = np.asarray(doc["media"], dtype=float).reshape(n, int(h["d"]))
    edges = np.asarray(doc["edges"], dtype=np.int64).reshape(-1, 2)
    K = kernel_matrix(W, media)
    return _assemble(n, p, media, edges[:, 0], edges[:, 1], K, int(h["seed"]), h["kernel"])
