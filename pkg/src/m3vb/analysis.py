"""Diagnostics and oracles.

Reference Gaussians and KL to them, ell-2 errors with label matching, Fisher
information estimates, an exact check of power-induced inconsistency on a
small discrete latent-variable model, and a brute-force solver for the
one-dimensional min-max median of quadratic forms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import blr as _blr
from . import gmm as _gmm
from .core_math import DiagGaussian, kl_diag_gaussians
from .data import Dataset, ModelKind


@dataclass(frozen=True)
class ReferenceGaussian:
    """``N(mean, diag(1 / (m * n * precision_diag)))``.

    ``precision_diag`` is per-observation information, so the reference
    covariance shrinks with the total sample size ``m * n``.
    """

    mean: np.ndarray
    precision_diag: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        prec = np.atleast_1d(np.asarray(self.precision_diag, dtype=float))
        if prec.shape != mean.shape:
            raise ValueError("mean and precision_diag must have equal length")
        if not np.all(np.isfinite(prec)) or np.any(prec <= 0):
            raise ValueError("precision_diag must be strictly positive")
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision_diag", prec)

    def as_gaussian(self) -> DiagGaussian:
        return DiagGaussian(self.mean, 1.0 / (self.m * self.n * self.precision_diag))


def gaussian_block(state) -> DiagGaussian:
    """The Gaussian factors of a variational state (IG factors are dropped)."""
    return DiagGaussian(state.mean, state.var)


def kl_to_reference(state, ref: ReferenceGaussian) -> float:
    g = gaussian_block(state)
    if g.dim != ref.mean.size:
        raise ValueError(f"dimension mismatch: state {g.dim}, reference {ref.mean.size}")
    return kl_diag_gaussians(g, ref.as_gaussian())


def centered_reference(state, precision_diag, m: int, n: int) -> ReferenceGaussian:
    """Reference centred at the state's own mean.

    Mixture states are sorted by component mean first; ``precision_diag`` is
    expected in the same (sorted) order.
    """
    if isinstance(state, _gmm.GmmVariational):
        state = state.sorted()
    return ReferenceGaussian(state.mean, precision_diag, m, n)


def kl_to_centered_reference(state, precision_diag, m: int, n: int) -> float:
    if isinstance(state, _gmm.GmmVariational):
        state = state.sorted()
    return kl_to_reference(state, ReferenceGaussian(state.mean, precision_diag, m, n))


def l2_error(estimated, truth, match_components: bool = False) -> float:
    """Euclidean error, optionally minimized over relabelings (K <= 5)."""
    est = np.asarray(estimated, dtype=float).ravel()
    tru = np.asarray(truth, dtype=float).ravel()
    if est.shape != tru.shape:
        raise ValueError(f"length mismatch: {est.size} vs {tru.size}")
    if not match_components:
        return float(np.linalg.norm(est - tru))
    if est.size > 5:
        raise ValueError("component matching is exhaustive and limited to K <= 5")
    perms = np.array(list(itertools.permutations(range(est.size))))
    return float(np.min(np.linalg.norm(est[perms] - tru[None, :], axis=1)))


def fisher_diag(model, theta_hat, data: Dataset, sigma2: float | None = None,
                min_samples: int = 10_000):
    """Monte-Carlo diagonal of the per-observation information and its standard error.

    BLR: the Hessian of the Gaussian log-likelihood in ``beta`` has diagonal
    ``x_l^2 / sigma^2``; ``sigma^2`` defaults to the mean squared residual at
    ``theta_hat``.
    GMM: complete-data information, ``E[1{S = k}]`` per component, with the
    label indicator replaced by its conditional probability at ``theta_hat``.

    Returns
    -------
    diag, stderr : ndarray
    """
    kind = ModelKind(model)
    theta = np.asarray(theta_hat, dtype=float).ravel()
    n = len(data)
    if n < min_samples:
        raise ValueError(f"need at least {min_samples} observations, got {n}")
    if kind is ModelKind.BLR:
        if data.kind is not ModelKind.BLR or theta.size != data.dim:
            raise ValueError("BLR information needs a BLR dataset and a matching beta")
        if sigma2 is None:
            sigma2 = float(np.mean((data.y - data.x @ theta) ** 2))
        if not sigma2 > 0:
            raise ValueError("degenerate noise variance")
        per_obs = data.x**2 / sigma2
    else:
        q = _gmm.GmmVariational(theta, np.full(theta.size, 1e-12))
        per_obs = _gmm.responsibilities(q, data, 1.0)
    diag = per_obs.mean(axis=0)
    se = per_obs.std(axis=0, ddof=1) / math.sqrt(n)
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise ValueError("degenerate information diagonal")
    return diag, se


# --------------------------------------------------------------------------
# Exact inconsistency check on a two-state, two-outcome latent model


@dataclass(frozen=True)
class DiscreteModel:
    """Tables ``P(S = 0 | theta)`` and ``P(X = 0 | S = s, theta)`` over binary S, X.

    ``p_s0[theta]`` and ``p_x0[(s, theta)]`` are exact fractions.
    """

    p_s0: dict
    p_x0: dict
    thetas: tuple = (0, 1)

    def __post_init__(self):
        for th in self.thetas:
            v = Fraction(self.p_s0[th])
            if not 0 <= v <= 1:
                raise ValueError(f"P(S=0 | theta={th}) outside [0, 1]")
            for s in (0, 1):
                w = Fraction(self.p_x0[(s, th)])
                if not 0 <= w <= 1:
                    raise ValueError(f"P(X=0 | S={s}, theta={th}) outside [0, 1]")

    def joint(self, x: int, s: int, theta) -> Fraction:
        ps = Fraction(self.p_s0[theta])
        ps = ps if s == 0 else 1 - ps
        px = Fraction(self.p_x0[(s, theta)])
        px = px if x == 0 else 1 - px
        return ps * px

    def marginal(self, x: int, theta) -> Fraction:
        return self.joint(x, 0, theta) + self.joint(x, 1, theta)

    @classmethod
    def example_4_1(cls) -> "DiscreteModel":
        F = Fraction
        return cls(
            p_s0={0: F(3, 8), 1: F(1, 2)},
            p_x0={(0, 0): F(5, 6), (1, 0): F(2, 5), (0, 1): F(11, 16), (1, 1): F(1, 4)},
        )


@dataclass
class InconsistencyReport:
    theta_star: int
    marginal: dict
    marginal_argmax: int
    powered: dict = field(default_factory=dict)
    powered_argmax: dict = field(default_factory=dict)
    limit: dict = field(default_factory=dict)
    limit_argmax: int | None = None
    flip_m: int | None = None


def _log(r) -> float:
    """Natural log of a positive Fraction without a float round trip (no underflow)."""
    r = Fraction(r)
    return math.log(r.numerator) - math.log(r.denominator)


def _argmax(values: dict):
    return max(sorted(values), key=lambda k: values[k])


def discrete_inconsistency_check(model: DiscreteModel, m_values, theta_star=0) -> InconsistencyReport:
    """Compare expected marginal log-likelihood with its powered analogue.

    For each ``m`` the powered objective is
    ``(1/m) E_{theta*}[log p~^m(X | theta)]`` with
    ``p~^m(x | theta) = sum_s p^m(x, s | theta) / sum_{x', s} p^m(x', s | theta)``,
    computed exactly before taking logs. The ``m -> infinity`` limit keeps
    the dominant joint terms. ``flip_m`` is the smallest scanned ``m`` whose
    argmax differs from ``theta_star``.
    """
    xs = (0, 1)
    truth = {x: model.marginal(x, theta_star) for x in xs}
    marginal = {
        th: sum(float(truth[x]) * _log(model.marginal(x, th)) for x in xs if truth[x] > 0)
        for th in model.thetas
    }
    rep = InconsistencyReport(theta_star, marginal, _argmax(marginal))
    for m in m_values:
        if m < 1:
            raise ValueError("powers must be >= 1")
        vals = {}
        for th in model.thetas:
            num = {x: sum(model.joint(x, s, th) ** m for s in (0, 1)) for x in xs}
            den = num[0] + num[1]
            vals[th] = sum(
                float(truth[x]) * _log(num[x] / den) for x in xs if truth[x] > 0
            ) / m
        rep.powered[m] = vals
        rep.powered_argmax[m] = _argmax(vals)
        if rep.flip_m is None and rep.powered_argmax[m] != theta_star:
            rep.flip_m = m
    for th in model.thetas:
        top = {x: max(model.joint(x, s, th) for s in (0, 1)) for x in xs}
        big = max(top.values())
        rep.limit[th] = sum(
            float(truth[x]) * _log(top[x] / big) for x in xs if truth[x] > 0
        )
    rep.limit_argmax = _argmax(rep.limit)
    return rep


# --------------------------------------------------------------------------
# Brute-force min-max median of one-dimensional quadratic forms


def _inner_max(f: np.ndarray, th: np.ndarray, omega: float) -> np.ndarray:
    """``max_g med_j omega[(f - th_j)^2 - (g - th_j)^2]`` for each entry of ``f``.

    The lower median of concave parabolas in ``g`` is piecewise concave with
    breakpoints at pairwise crossings, so its maximum is attained at a vertex
    (some ``th_j``) or at a crossing of two parabolas. Every candidate is
    evaluated.
    """
    m = th.size
    k = (m + 1) // 2 - 1
    c = (f[:, None] - th[None, :]) ** 2  # (F, m)
    cands = [np.broadcast_to(th, (f.size, m))]
    iu, ju = np.triu_indices(m, 1)
    dt = th[ju] - th[iu]
    ok = dt != 0
    iu, ju, dt = iu[ok], ju[ok], dt[ok]
    if iu.size:
        # c_i - (g - t_i)^2 = c_j - (g - t_j)^2 solved for g
        g = (c[:, iu] - c[:, ju] + th[ju] ** 2 - th[iu] ** 2) / (2.0 * dt)
        cands.append(g)
    G = np.concatenate(cands, axis=1)  # (F, C)
    vals = c[:, None, :] - (G[:, :, None] - th[None, None, :]) ** 2  # (F, C, m)
    med = np.partition(vals, k, axis=2)[:, :, k]
    return omega * med.max(axis=1)


def minmax_median_objective(f, theta_hats, omega: float):
    th = np.asarray(theta_hats, dtype=float).ravel()
    f = np.atleast_1d(np.asarray(f, dtype=float))
    return _inner_max(f, th, float(omega))


def brute_force_minmax_median(theta_hats, omega: float, step: float = 1e-3,
                              tol: float = 1e-3, chunk: int = 256):
    """Exhaustive grid minimization of the min-max median quadratic objective.

    The outer minimization scans a grid of spacing ``step`` covering the hull
    of ``theta_hats`` (plus one step on each side); the inner maximization is
    exact. Returns ``(theta_f, objective)``; ties go to the smallest grid point.
    """
    th = np.asarray(theta_hats, dtype=float).ravel()
    if th.size == 0:
        raise ValueError("need at least one local estimate")
    if not omega > 0:
        raise ValueError("omega must be positive")
    if not 0 < step <= tol:
        raise ValueError(f"grid step {step} is too coarse for tolerance {tol}")
    lo, hi = th.min() - step, th.max() + step
    grid = lo + step * np.arange(int(math.ceil((hi - lo) / step)) + 1)
    best_val = math.inf
    best_f = float(grid[0])
    for s in range(0, grid.size, chunk):
        part = grid[s:s + chunk]
        vals = _inner_max(part, th, float(omega))
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val = float(vals[i])
            best_f = float(part[i])
    return best_f, best_val
