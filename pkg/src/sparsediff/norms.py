"""Certificates for the infinity-to-one norm and its Bennett tail bound.

For a real n x n matrix M,

    ||M||_{inf->1} = max_{x in {-1,1}^n} ||M x||_1 = max_{x, y in [-1,1]^n} <y, M x>.

Three estimates are provided: exhaustive enumeration (exact, n <= cap),
alternating sign ascent (a lower certificate) and the entrywise l1 sum (an
upper certificate).
"""

import json
from functools import lru_cache

import numpy as np

from . import rng as _rng
from ._validation import check_square

EXACT_CAP = 20
_CHUNK = 1 << 15


def _canonical(x):
    x = np.where(np.asarray(x) >= 0, 1.0, -1.0)
    return x if x.size == 0 or x[0] > 0 else -x


def _l1_value(M, x):
    # single evaluation path shared by the exact and heuristic routines
    return float(np.abs(M @ x).sum())


@lru_cache(maxsize=4)
def _bit_table(width):
    k = np.arange(1 << width, dtype=np.int64)[:, None]
    bits = (k >> np.arange(width, dtype=np.int64)) & 1
    return 1.0 - 2.0 * bits


def norm_inf_to_one_exact(M, cap=EXACT_CAP, return_certificate=False):
    """Exact norm by enumerating sign vectors (first coordinate fixed to +1)."""
    M = check_square(M)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    n = M.shape[0]
    if n > cap:
        raise ValueError(f"n={n} exceeds the enumeration cap {cap}")
    if n == 0:
        return (0.0, np.zeros(0)) if return_certificate else 0.0
    free = n - 1
    # split free coordinates into a high part (outer loop) and low part (table)
    low = min(free, 15)
    high = free - low
    table = _bit_table(low)
    MT = M.T
    best, best_x = -np.inf, None
    for h in range(1 << high):
        hi_signs = 1.0 - 2.0 * ((h >> np.arange(high)) & 1)
        X = np.empty((table.shape[0], n))
        X[:, 0] = 1.0
        X[:, 1:1 + low] = table
        X[:, 1 + low:] = hi_signs
        for start in range(0, X.shape[0], _CHUNK):
            block = X[start:start + _CHUNK]
            vals = np.abs(block @ MT).sum(axis=1)
            k = int(np.argmax(vals))
            if vals[k] > best:
                best, best_x = vals[k], block[k].copy()
    x = _canonical(best_x)
    value = _l1_value(M, x)
    if return_certificate:
        return value, x
    return value


def norm_inf_to_one_lower(M, restarts=32, seed=0, return_certificate=False, max_iter=1000):
    """Alternating sign ascent: y = sign(Mx), x = sign(M^T y), repeat.

    Starts are drawn sequentially from one stream, so the result is
    nondecreasing in ``restarts`` for a fixed seed.  sign(0) is taken as +1.
    """
    M = check_square(M)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    n = M.shape[0]
    if n == 0 or not np.any(M):
        zero = np.ones(n)
        return (0.0, zero, zero) if return_certificate else 0.0
    g = _rng.stream(seed, _rng.HEURISTIC)
    best, best_x, best_y = -np.inf, None, None
    for _ in range(restarts):
        x = np.where(g.random(n) < 0.5, -1.0, 1.0)
        value = -np.inf
        for _ in range(max_iter):
            y = np.where(M @ x >= 0, 1.0, -1.0)
            x_new = np.where(M.T @ y >= 0, 1.0, -1.0)
            new_value = _l1_value(M, x_new)
            if new_value <= value:
                break
            x, value = x_new, new_value
        if value > best:
            best, best_x = value, x
    x = _canonical(best_x)
    value = _l1_value(M, x)
    if return_certificate:
        y = np.where(M @ x >= 0, 1.0, -1.0)
        return value, x, y
    return value


def norm_inf_to_one_upper(M, spectral=True):
    """min(sum_ij |M_ij|, sqrt(rows * cols) |M|_2).

    Both are valid since |x|_2 <= sqrt(n) on the cube.  The spectral norm uses
    ``eigvalsh`` for symmetric input.
    """
    M = np.asarray(M, dtype=float)
    entrywise = float(np.abs(M).sum())
    if not spectral or M.size == 0:
        return entrywise
    if M.shape[0] == M.shape[1] and np.array_equal(M, M.T):
        sigma = float(np.max(np.abs(np.linalg.eigvalsh(M))))
    else:
        sigma = float(np.linalg.norm(M, 2))
    # small relative margin covers the eigensolver's rounding
    return min(entrywise, np.sqrt(M.shape[0] * M.shape[1]) * sigma * (1.0 + 1e-10))


def bennett_log_tail(n, p, eta):
    """log of 4^n exp(-eta^2 n^2 p / (8 + 4 eta / (3 n)))."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if not 0 < eta <= n:
        raise ValueError("eta must satisfy 0 < eta <= n")
    return n * np.log(4.0) - eta**2 * n**2 * p / (8.0 + 4.0 * eta / (3.0 * n))


def norm_record(method, value, certificate=None):
    """JSON record ``{method, value, certificate?}`` for a norm estimate."""
    rec = {"method": method, "value": float(value)}
    if certificate is not None:
        rec["certificate"] = {k: [int(s) for s in v] for k, v in certificate.items()}
    return json.dumps(rec, sort_keys=True)


def norm_certificates(M, restarts=32, seed=0, cap=EXACT_CAP):
    """Lower, upper and (when affordable) exact norm of ``M``."""
    M = np.asarray(M, dtype=float)
    out = {
        "lower": norm_inf_to_one_lower(M, restarts=restarts, seed=seed),
        "upper": norm_inf_to_one_upper(M),
        "exact": None,
    }
    if M.shape[0] <= cap:
        out["exact"] = norm_inf_to_one_exact(M, cap=cap)
    return out
