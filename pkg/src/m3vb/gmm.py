"""Univariate K-component Gaussian mixture with unit variances and equal weights.

Component means get independent ``N(0, sigma0^2)`` priors and Gaussian
variational factors. The categorical assignment factors are never stored:
for a given set of mean factors they have a closed-form optimum, so the ELBO
is always evaluated with the assignments maximized out.

With a likelihood power ``w`` the joint ``p(x, s | theta) ** w`` is tempered
while the entropy of the assignment factor is not, so the optimal
responsibilities are ``softmax(w * (m_k x - (m_k^2 + s2_k) / 2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_math import log_sum_exp
from .data import Dataset, ModelKind

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GmmPrior:
    sigma0_sq: float = 100.0

    def __post_init__(self):
        if not self.sigma0_sq > 0:
            raise ValueError("sigma0_sq must be positive")


@dataclass(frozen=True)
class GmmVariational:
    m: np.ndarray
    s2: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        s2 = np.atleast_1d(np.asarray(self.s2, dtype=float))
        if m.shape != s2.shape or m.ndim != 1:
            raise ValueError("m and s2 must be vectors of equal length")
        if not np.all(np.isfinite(m)):
            raise ValueError("m must be finite")
        if not (np.all(np.isfinite(s2)) and np.all(s2 > 0)):
            raise ValueError("s2 must be strictly positive")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "s2", s2)

    @property
    def K(self) -> int:
        return self.m.size

    @property
    def mean(self) -> np.ndarray:
        return self.m

    @property
    def var(self) -> np.ndarray:
        return self.s2

    def sorted(self) -> "GmmVariational":
        order = np.argsort(self.m, kind="stable")
        return GmmVariational(self.m[order], self.s2[order])


def as_obs(subset) -> np.ndarray:
    if isinstance(subset, Dataset):
        if subset.kind is not ModelKind.GMM:
            raise ValueError("expected a GMM dataset")
        return subset.x
    return np.asarray(subset, dtype=float).ravel()


def _expected_joint(q: GmmVariational, x: np.ndarray) -> np.ndarray:
    """E_q[log p(x_i, s_i = k | theta)], shape (n, K)."""
    return (
        -math.log(q.K)
        - 0.5 * LOG_2PI
        - 0.5 * ((x[:, None] - q.m[None, :]) ** 2 + q.s2[None, :])
    )


def responsibilities(q: GmmVariational, subset, power: float = 1) -> np.ndarray:
    """Optimal categorical factors, one row per observation."""
    x = as_obs(subset)
    logits = power * (x[:, None] * q.m[None, :] - 0.5 * (q.s2 + q.m**2)[None, :])
    logits -= logits.max(axis=1, keepdims=True)
    phi = np.exp(logits)
    phi /= phi.sum(axis=1, keepdims=True)
    return phi


def _global_terms(q: GmmVariational, prior: GmmPrior) -> float:
    """E_q[log prior(theta)] + entropy of the mean factors = -KL(q || prior)."""
    s0 = prior.sigma0_sq
    log_prior = -0.5 * (LOG_2PI + math.log(s0)) - 0.5 * (q.m**2 + q.s2) / s0
    ent = 0.5 * np.log(2.0 * math.pi * math.e * q.s2)
    return float(np.sum(log_prior + ent))


def _check(q, power):
    if not power > 0:
        raise ValueError(f"power must be positive, got {power}")


def local_terms(q: GmmVariational, subset, power: float = 1) -> np.ndarray:
    """Per-observation ``max_phi`` contribution: ``logsumexp_k(power * E log p(x_i, k))``."""
    x = as_obs(subset)
    if x.size == 0:
        return np.zeros(0)
    return log_sum_exp(power * _expected_joint(q, x), axis=1)


def elbo_gmm(q: GmmVariational, prior: GmmPrior, subset, power: float = 1) -> float:
    """ELBO with the assignment factors set to their optimum."""
    _check(q, power)
    return _global_terms(q, prior) + float(np.sum(local_terms(q, subset, power)))


def elbo_gmm_given(q: GmmVariational, prior: GmmPrior, subset, phi, power: float = 1) -> float:
    """ELBO for explicit (not necessarily optimal) responsibilities ``phi``."""
    _check(q, power)
    x = as_obs(subset)
    phi = np.asarray(phi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.sum(np.where(phi > 0, phi * np.log(phi), 0.0))
    data = power * np.sum(phi * _expected_joint(q, x)) if x.size else 0.0
    return _global_terms(q, prior) + float(data) + float(ent)


def update_means(prior: GmmPrior, subset, phi, power: float = 1) -> GmmVariational:
    """Exact coordinate maximizer of the mean factors for fixed responsibilities."""
    x = as_obs(subset)
    phi = np.asarray(phi, dtype=float)
    nk = power * phi.sum(axis=0)
    sk = power * (phi * x[:, None]).sum(axis=0)
    s2 = 1.0 / (1.0 / prior.sigma0_sq + nk)
    if not np.all(s2 > 0):
        raise FloatingPointError("nonpositive variance in mean update")
    return GmmVariational(s2 * sk, s2)


def cavi_update_gmm(q: GmmVariational, prior: GmmPrior, subset, power: float = 1) -> GmmVariational:
    """One sweep: refresh responsibilities, then update every mean factor."""
    _check(q, power)
    x = as_obs(subset)
    if x.size == 0:
        return GmmVariational(np.zeros(q.K), np.full(q.K, prior.sigma0_sq))
    return update_means(prior, x, responsibilities(q, x, power), power)


def init_gmm(x, K: int, rng: np.random.Generator | None = None, jitter: float = 1e-3) -> GmmVariational:
    """K quantile-spread means over the data with small seeded jitter; unit variances."""
    x = as_obs(x)
    if x.size == 0:
        m = np.linspace(-1.0, 1.0, K) if K > 1 else np.zeros(1)
    else:
        m = np.quantile(x, (np.arange(K) + 0.5) / K)
    if rng is not None and jitter > 0:
        m = m + jitter * rng.standard_normal(K)
    return GmmVariational(m, np.ones(K))


def fit_gmm(
    prior: GmmPrior,
    subset,
    K: int,
    power: float = 1,
    init: GmmVariational | None = None,
    tol: float = 1e-12,
    max_sweeps: int = 10_000,
) -> GmmVariational:
    x = as_obs(subset)
    q = init if init is not None else init_gmm(x, K)
    for _ in range(max_sweeps):
        new = cavi_update_gmm(q, prior, x, power)
        change = np.max(np.abs(np.concatenate([new.m - q.m, (new.s2 - q.s2) / new.s2])))
        q = new
        if change < tol:
            break
    return q


def blend_gmm(old: GmmVariational, new: GmmVariational, rho: float) -> GmmVariational:
    if rho >= 1.0:
        return new
    prec = (1.0 - rho) / old.s2 + rho / new.s2
    eta = (1.0 - rho) * old.m / old.s2 + rho * new.m / new.s2
    return GmmVariational(eta / prec, 1.0 / prec)


def rescale_gmm(q: GmmVariational, m: float) -> GmmVariational:
    return GmmVariational(q.m.copy(), q.s2 / m)
