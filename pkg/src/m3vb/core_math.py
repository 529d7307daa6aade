"""Special functions, closed-form divergences, order statistics and RNG streams."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061

# Bernoulli-number coefficients B_{2k}/(2k) of the digamma asymptotic series.
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)
_DIGAMMA_SHIFT = 10.0


@dataclass(frozen=True)
class DiagGaussian:
    """Factorized Gaussian over a parameter vector.

    Parameters
    ----------
    mean : array of shape (p,)
    var : array of shape (p,)
        Strictly positive, finite component variances.
    """

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        var = np.atleast_1d(np.asarray(self.var, dtype=float))
        if mean.ndim != 1 or var.shape != mean.shape or mean.size < 1:
            raise ValueError(
                f"mean and var must be 1-D of equal length >= 1, got {mean.shape} and {var.shape}"
            )
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean must be finite")
        if not np.all(np.isfinite(var)) or np.any(var <= 0):
            raise ValueError("var must be strictly positive and finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self) -> int:
        return self.mean.size


def kl_diag_gaussians(p: DiagGaussian, q: DiagGaussian) -> float:
    """KL(p || q) for two factorized Gaussians of the same dimension."""
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    ratio = p.var / q.var
    terms = 0.5 * (ratio - 1.0 - np.log(ratio)) + 0.5 * (p.mean - q.mean) ** 2 / q.var
    return float(max(np.sum(terms), 0.0))


def digamma(x):
    """Digamma function for positive arguments.

    Shifts the argument above ``10`` with the recurrence
    ``psi(x) = psi(x + 1) - 1/x`` and evaluates the asymptotic series there.
    Accepts scalars or arrays; returns the same shape.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("digamma is only defined here for x > 0")
    z = arr.copy()
    acc = np.zeros_like(z)
    # at most ceil(_DIGAMMA_SHIFT) recurrence steps for any x > 0
    for _ in range(int(_DIGAMMA_SHIFT)):
        small = z < _DIGAMMA_SHIFT
        if not np.any(small):
            break
        acc = np.where(small, acc - 1.0 / z, acc)
        z = np.where(small, z + 1.0, z)
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for coef in reversed(_DIGAMMA_SERIES):
        series = (series + coef) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    if np.ndim(x) == 0:
        return float(out)
    return out


def log_sum_exp(v, axis=None):
    """Overflow-safe ``log(sum(exp(v)))``."""
    arr = np.asarray(v, dtype=float)
    if arr.size == 0:
        raise ValueError("log_sum_exp of an empty vector")
    top = np.max(arr, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    out = np.log(np.sum(np.exp(arr - top), axis=axis, keepdims=True)) + top
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def median_index(values, prefer: int | None = None) -> tuple[int, float]:
    """Lower median of ``values`` and the index of an element attaining it.

    The lower median is the ``floor((len + 1) / 2)``-th order statistic. Among
    tied elements the smallest index wins, unless ``prefer`` names one of the
    tied elements, in which case that index is returned.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("median_index of an empty vector")
    if np.any(np.isnan(arr)):
        raise ValueError("median_index got NaN")
    k = (arr.size + 1) // 2 - 1
    value = np.partition(arr, k)[k]
    if prefer is not None and 0 <= prefer < arr.size and arr[prefer] == value:
        return int(prefer), float(value)
    idx = int(np.flatnonzero(arr == value)[0])
    return idx, float(value)


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, stream_id)``."""
    mask = (1 << 64) - 1
    ss = np.random.SeedSequence(int(seed) & mask, spawn_key=(int(stream_id) & mask,))
    return np.random.Generator(np.random.PCG64(ss))


def stream_id_for(*keys) -> int:
    """Stable 64-bit stream id derived from a tuple of ints/strings/floats."""
    h = hashlib.blake2b(repr(tuple(keys)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def log_gamma(x):
    """``log Gamma(x)`` for scalars (stdlib) or arrays."""
    if np.ndim(x) == 0:
        return math.lgamma(float(x))
    return np.vectorize(math.lgamma, otypes=[float])(x)
