"""Input validation helpers shared by the estimators and functional API."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array


class NumericalFailure(RuntimeError):
    """Raised when a simulation produces non-finite values."""


def check_media(media, n=None):
    """Return media as a finite float array of shape ``(n, d)``."""
    media = np.asarray(media, dtype=float)
    if media.ndim == 1:
        media = media[:, None]
    media = check_array(media, ensure_2d=True, dtype=float, ensure_min_samples=1)
    if n is not None and media.shape[0] != n:
        raise ValueError(f"expected {n} media vectors, got {media.shape[0]}")
    return media


def check_state(x, n=None, name="state"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_square(M, name="matrix"):
    M = check_array(M, dtype=float, ensure_min_samples=0, ensure_min_features=0)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise ValueError(f"{name} must be {'>' if strict else '>='} 0, got {value!r}")
    return float(value)


def check_steps(T, dt):
    """Number of Euler steps for horizon ``T`` at step ``dt``."""
    check_positive(T, "T")
    check_positive(dt, "dt")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return steps
