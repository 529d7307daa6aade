"""Bayesian linear regression with a normal-inverse-gamma prior.

Variational family: independent Gaussians for each coefficient and an
inverse-gamma factor ``IG(c/2, d/2)`` for the noise variance. Every subset is
reduced to its sufficient statistics ``(X'X, X'y, y'y, n)``, so the
power-``w`` likelihood is handled by scaling those statistics by ``w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_math import digamma
from .data import Dataset, ModelKind

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class BlrPrior:
    """beta | sigma^2 ~ N(0, alpha sigma^2 I), sigma^2 ~ IG(a0/2, b0/2)."""

    alpha: float = 100.0
    a0: float = 2.0
    b0: float = 2.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.a0 > 0 and self.b0 > 0):
            raise ValueError("prior hyperparameters must be strictly positive")


@dataclass(frozen=True)
class BlrVariational:
    mu: np.ndarray
    s2: np.ndarray
    c: float
    d: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        s2 = np.atleast_1d(np.asarray(self.s2, dtype=float))
        if mu.shape != s2.shape or mu.ndim != 1:
            raise ValueError("mu and s2 must be vectors of equal length")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu must be finite")
        if not (np.all(np.isfinite(s2)) and np.all(s2 > 0)):
            raise ValueError("s2 must be strictly positive")
        if not (math.isfinite(self.c) and math.isfinite(self.d) and self.c > 0 and self.d > 0):
            raise ValueError(f"IG parameters must be positive, got c={self.c}, d={self.d}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "s2", s2)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "d", float(self.d))

    @property
    def p(self) -> int:
        return self.mu.size

    @property
    def mean(self) -> np.ndarray:
        return self.mu

    @property
    def var(self) -> np.ndarray:
        return self.s2

    @property
    def e_tau(self) -> float:
        """E[1 / sigma^2]."""
        return self.c / self.d

    @property
    def e_log_sigma2(self) -> float:
        return math.log(self.d / 2.0) - digamma(self.c / 2.0)

    @property
    def sigma2_mean(self) -> float:
        a = self.c / 2.0
        return (self.d / 2.0) / (a - 1.0) if a > 1.0 else math.inf


@dataclass(frozen=True)
class BlrStats:
    """Sufficient statistics of one subset, or a stack of them along axis 0."""

    xtx: np.ndarray
    xty: np.ndarray
    yty: np.ndarray
    n: np.ndarray

    @classmethod
    def from_arrays(cls, x, y) -> "BlrStats":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(x.T @ x, x.T @ y, np.asarray(float(y @ y)), np.asarray(float(y.size)))

    @classmethod
    def empty(cls, p: int) -> "BlrStats":
        return cls(np.zeros((p, p)), np.zeros(p), np.asarray(0.0), np.asarray(0.0))

    @classmethod
    def stack(cls, items) -> "BlrStats":
        items = list(items)
        return cls(
            np.stack([s.xtx for s in items]),
            np.stack([s.xty for s in items]),
            np.array([float(s.yty) for s in items]),
            np.array([float(s.n) for s in items]),
        )

    def scaled(self, w: float) -> "BlrStats":
        return BlrStats(w * self.xtx, w * self.xty, w * self.yty, w * self.n)

    def __add__(self, other: "BlrStats") -> "BlrStats":
        return BlrStats(self.xtx + other.xtx, self.xty + other.xty,
                        self.yty + other.yty, self.n + other.n)

    @property
    def p(self) -> int:
        return self.xty.shape[-1]


def as_stats(subset) -> BlrStats:
    if isinstance(subset, BlrStats):
        return subset
    if isinstance(subset, Dataset):
        if subset.kind is not ModelKind.BLR:
            raise ValueError("expected a BLR dataset")
        return BlrStats.from_arrays(subset.x, subset.y)
    x, y = subset
    return BlrStats.from_arrays(x, y)


def _check_power(power):
    if not power > 0:
        raise ValueError(f"power must be positive, got {power}")


def _expected_sq_resid(q: BlrVariational, st: BlrStats):
    """E_q ||y - X beta||^2; vectorized over stacked statistics."""
    quad = np.einsum("...ij,i,j->...", st.xtx, q.mu, q.mu)
    diag = np.diagonal(st.xtx, axis1=-2, axis2=-1) @ q.s2
    return st.yty - 2.0 * (st.xty @ q.mu) + quad + diag


def expected_loglik_blr(q: BlrVariational, subset):
    """E_q[sum_i log N(y_i; x_i' beta, sigma^2)] (power 1)."""
    st = as_stats(subset)
    return (
        -0.5 * st.n * (LOG_2PI + q.e_log_sigma2)
        - 0.5 * q.e_tau * _expected_sq_resid(q, st)
    )


def _prior_plus_entropy(q: BlrVariational, prior: BlrPrior) -> float:
    p = q.p
    a, b = q.c / 2.0, q.d / 2.0
    e_tau, e_ls = q.e_tau, q.e_log_sigma2
    log_prior_beta = (
        -0.5 * p * (LOG_2PI + math.log(prior.alpha) + e_ls)
        - 0.5 * e_tau * float(np.sum(q.mu**2 + q.s2)) / prior.alpha
    )
    a0, b0 = prior.a0 / 2.0, prior.b0 / 2.0
    log_prior_s2 = a0 * math.log(b0) - math.lgamma(a0) - (a0 + 1.0) * e_ls - b0 * e_tau
    ent_beta = 0.5 * float(np.sum(np.log(2.0 * math.pi * math.e * q.s2)))
    ent_ig = a + math.log(b) + math.lgamma(a) - (1.0 + a) * digamma(a)
    return log_prior_beta + log_prior_s2 + ent_beta + ent_ig


def elbo_blr(q: BlrVariational, prior: BlrPrior, subset, power: float = 1):
    """ELBO of ``q`` against ``prior * p(subset | beta, sigma^2) ** power``.

    Only the power normalizer is dropped; all other constants are kept so
    values are comparable across subsets. ``subset`` may be a stack of
    statistics, in which case one ELBO per subset is returned.
    """
    _check_power(power)
    if q.p != as_stats(subset).p:
        raise ValueError("dimension mismatch between state and data")
    return power * expected_loglik_blr(q, subset) + _prior_plus_entropy(q, prior)


def _sweep(q: BlrVariational, prior: BlrPrior, st: BlrStats) -> BlrVariational:
    # st is already scaled by the power
    mu = q.mu.copy()
    s2 = np.empty_like(q.s2)
    e_tau = q.e_tau
    p = q.p
    for l in range(p):
        prec = st.xtx[l, l] + 1.0 / prior.alpha
        resid = st.xty[l] - st.xtx[l] @ mu + st.xtx[l, l] * mu[l]
        mu[l] = resid / prec
        s2[l] = 1.0 / (e_tau * prec)
    if not np.all(s2 > 0) or not np.all(np.isfinite(mu)):
        raise FloatingPointError("nonpositive variance in coefficient update")
    c = float(st.n) + p + prior.a0
    tmp = BlrVariational(mu, s2, q.c, q.d)
    d = float(_expected_sq_resid(tmp, st)) + float(np.sum(mu**2 + s2)) / prior.alpha + prior.b0
    if not d > 0:
        raise FloatingPointError("nonpositive IG scale in update")
    return BlrVariational(mu, s2, c, d)


def cavi_update_blr(q: BlrVariational, prior: BlrPrior, subset, power: float = 1) -> BlrVariational:
    """One full coordinate-ascent sweep: coefficients in order, then the IG factor."""
    _check_power(power)
    st = as_stats(subset)
    if st.p != q.p:
        raise ValueError("dimension mismatch between state and data")
    return _sweep(q, prior, st.scaled(power))


def log_evidence_blr(prior: BlrPrior, subset, power: float = 1) -> float:
    """Exact ``log integral prior * likelihood ** power`` (unnormalized power)."""
    _check_power(power)
    st = as_stats(subset).scaled(power)
    p = st.p
    A = st.xtx + np.eye(p) / prior.alpha
    sign, logdet = np.linalg.slogdet(A)
    if sign <= 0:
        raise np.linalg.LinAlgError("posterior precision is not positive definite")
    R = float(st.yty) - float(st.xty @ np.linalg.solve(A, st.xty))
    a_n = 0.5 * (prior.a0 + float(st.n))
    b_n = 0.5 * (prior.b0 + R)
    a0, b0 = 0.5 * prior.a0, 0.5 * prior.b0
    return (
        -0.5 * float(st.n) * LOG_2PI
        - 0.5 * p * math.log(prior.alpha)
        - 0.5 * logdet
        + a0 * math.log(b0) - math.lgamma(a0)
        + math.lgamma(a_n) - a_n * math.log(b_n)
    )


def init_blr(p: int, prior: BlrPrior, n: float = 0.0, power: float = 1) -> BlrVariational:
    """Starting state: zero means, unit variances, E[1/sigma^2] = 1."""
    c = power * n + p + prior.a0
    return BlrVariational(np.zeros(p), np.ones(p), c, c)


def fit_blr(
    prior: BlrPrior,
    subset,
    power: float = 1,
    init: BlrVariational | None = None,
    tol: float = 1e-12,
    max_sweeps: int = 10_000,
) -> BlrVariational:
    """Coordinate ascent until parameters stop moving (relative change below ``tol``)."""
    st = as_stats(subset)
    q = init if init is not None else init_blr(st.p, prior, float(st.n), power)
    scaled = st.scaled(power)
    for _ in range(max_sweeps):
        new = _sweep(q, prior, scaled)
        if _rel_change(q, new) < tol:
            return new
        q = new
    return q


def _rel_change(a: BlrVariational, b: BlrVariational) -> float:
    num = np.concatenate([a.mu - b.mu, a.s2 - b.s2, [a.c - b.c, a.d - b.d]])
    den = np.concatenate([np.abs(b.mu) + 1.0, b.s2, [b.c, b.d]])
    return float(np.max(np.abs(num) / den))


def blend_blr(old: BlrVariational, new: BlrVariational, rho: float) -> BlrVariational:
    """Convex combination in natural parameters (damped coordinate step)."""
    if rho >= 1.0:
        return new
    prec = (1.0 - rho) / old.s2 + rho / new.s2
    eta = (1.0 - rho) * old.mu / old.s2 + rho * new.mu / new.s2
    return BlrVariational(
        eta / prec,
        1.0 / prec,
        (1.0 - rho) * old.c + rho * new.c,
        (1.0 - rho) * old.d + rho * new.d,
    )


def rescale_blr(q: BlrVariational, m: float) -> BlrVariational:
    """Divide all variances by ``m`` keeping every mean fixed.

    The IG factor keeps its mean ``b / (a - 1)`` while its variance shrinks by
    ``m``: ``a' - 2 = m (a - 2)`` and ``b' = mean * (a' - 1)``.
    """
    a = q.c / 2.0
    if not a > 2.0:
        raise ValueError("IG factor needs shape > 2 (finite variance) to be rescaled")
    mean = (q.d / 2.0) / (a - 1.0)
    a_new = 2.0 + m * (a - 2.0)
    b_new = mean * (a_new - 1.0)
    return BlrVariational(q.mu.copy(), q.s2 / m, 2.0 * a_new, 2.0 * b_new)


def ig_moments(q: BlrVariational) -> tuple[float, float]:
    a, b = q.c / 2.0, q.d / 2.0
    mean = b / (a - 1.0)
    var = b * b / ((a - 1.0) ** 2 * (a - 2.0)) if a > 2.0 else math.inf
    return mean, var


def ig_from_moments(mean: float, var: float) -> tuple[float, float]:
    """(c, d) of the IG(c/2, d/2) with the given mean and variance."""
    a = mean * mean / var + 2.0
    b = mean * (a - 1.0)
    return 2.0 * a, 2.0 * b


__all__ = [
    "BlrPrior",
    "BlrVariational",
    "BlrStats",
    "elbo_blr",
    "expected_loglik_blr",
    "cavi_update_blr",
    "log_evidence_blr",
    "init_blr",
    "fit_blr",
    "rescale_blr",
    "blend_blr",
]
