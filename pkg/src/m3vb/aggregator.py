"""Robust aggregation of subset-level variational posteriors.

The central solver alternates two coordinate-ascent players over the ``m``
subsets. ``F`` takes a step on the subset whose ELBO gap
``ELBO_j(G) - ELBO_j(F)`` is the (lower) median, then ``G`` does the same
against the updated ``F``. Subset normalizers cancel in the gap, so only
unnormalized powered likelihoods are needed.

Baselines live here too: pooled VB, a direct median-of-KL solver (MVB), a
closed-form Wasserstein barycenter of diagonal Gaussians (WASP-style), and a
point estimator for the empirical min-max median of log-likelihoods.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import blr as _blr
from . import gmm as _gmm
from .core_math import DiagGaussian, log_sum_exp, median_index, rng_stream
from .data import Dataset, ModelKind


class Mode(str, enum.Enum):
    M3VB_ONE_STEP = "M3VB_ONE_STEP"
    M3VB_TWO_STEP = "M3VB_TWO_STEP"
    MVB = "MVB"
    POOLED = "POOLED"
    WASP = "WASP"
    MINMAX_POINT = "MINMAX_POINT"


class UnsupportedModelError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class AggregatorConfig:
    """Solver settings.

    ``step_decay`` is the exponent ``kappa`` of the step schedule
    ``rho_t = t ** -kappa`` used to damp every coordinate-ascent step of ``F``
    in natural parameters; ``0`` takes each step in full.
    ``adversary_decay`` is the same exponent for ``G``.
    With ``average`` the returned ``F`` is the average of the iterates over
    the last half of the run (in natural parameters).
    ``tie_rule`` is ``"sticky"`` (keep the previously selected block when it
    ties for the median) or ``"smallest"`` (smallest index).
    """

    mode: Mode = Mode.M3VB_ONE_STEP
    iterations: int = 500
    inner_sweeps: int = 1
    convergence_tol: float = 1e-8
    patience: int = 10
    seed: int = 0
    step_decay: float = 0.6
    adversary_decay: float = 0.3
    average: bool = True
    tie_rule: str = "sticky"
    record_gaps: bool = False
    K: int = 3
    fit_tol: float = 1e-10
    max_sweeps: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inner_sweeps < 1:
            raise ValueError("inner_sweeps must be >= 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be > 0")
        if self.step_decay < 0 or self.adversary_decay < 0:
            raise ValueError("step decay exponents must be >= 0")
        if self.tie_rule not in ("sticky", "smallest"):
            raise ValueError(f"unknown tie_rule {self.tie_rule!r}")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    side: str
    block: int
    median_gap: float
    gaps: np.ndarray | None = None


@dataclass
class SolverTrace:
    records: list = field(default_factory=list)

    def blocks(self, side: str | None = None) -> list[int]:
        return [r.block for r in self.records if side is None or r.side == side]

    def __len__(self):
        return len(self.records)


@dataclass
class AggregateResult:
    f: object
    g: object
    trace: SolverTrace
    wall_time: float = 0.0

    @property
    def mean(self) -> np.ndarray:
        return self.f.mean


# --------------------------------------------------------------------------
# Subset containers: vectorized per-subset ELBOs plus a one-subset CAVI sweep.


class BlrBlocks:
    def __init__(self, subsets, prior: _blr.BlrPrior):
        self.prior = prior
        self.stats = [_blr.as_stats(s) for s in subsets]
        if not self.stats:
            raise ValueError("need at least one subset")
        self.stacked = _blr.BlrStats.stack(self.stats)
        self.m = len(self.stats)
        self.p = self.stats[0].p

    def elbo_all(self, q, power):
        return _blr.elbo_blr(q, self.prior, self.stacked, power)

    def sweep(self, q, j, power):
        return _blr.cavi_update_blr(q, self.prior, self.stats[j], power)

    def init(self, power, rng=None):
        n = float(np.mean(self.stacked.n))
        return _blr.init_blr(self.p, self.prior, n, power)

    def log_evidence_all(self, power):
        return np.array([_blr.log_evidence_blr(self.prior, s, power) for s in self.stats])

    @staticmethod
    def params(q):
        return np.concatenate([q.mu, q.s2, [q.c, q.d]])

    blend = staticmethod(_blr.blend_blr)
    rescale = staticmethod(_blr.rescale_blr)


class GmmBlocks:
    def __init__(self, subsets, prior: _gmm.GmmPrior, K: int):
        self.prior = prior
        self.K = K
        self.parts = [_gmm.as_obs(s) for s in subsets]
        if not self.parts:
            raise ValueError("need at least one subset")
        self.m = len(self.parts)
        self.x = np.concatenate(self.parts)
        self.ids = np.repeat(np.arange(self.m), [p.size for p in self.parts])

    def elbo_all(self, q, power):
        local = _gmm.local_terms(q, self.x, power)
        return _gmm._global_terms(q, self.prior) + np.bincount(
            self.ids, weights=local, minlength=self.m
        )

    def sweep(self, q, j, power):
        return _gmm.cavi_update_gmm(q, self.prior, self.parts[j], power)

    def init(self, power, rng=None):
        return _gmm.init_gmm(self.x, self.K, rng)

    def log_evidence_all(self, power):
        raise UnsupportedModelError("GMM has no tractable subset evidence; MVB is unsupported")

    @staticmethod
    def params(q):
        return np.concatenate([q.m, q.s2])

    blend = staticmethod(_gmm.blend_gmm)
    rescale = staticmethod(_gmm.rescale_gmm)


class GaussianTargets:
    """Subsets represented directly by local Gaussian targets ``N(theta_j, Omega^-1)``.

    ``ELBO_j(F) = -KL(F || N(theta_j, Omega^-1))``; a coordinate sweep sets each
    factor of ``F`` to its exact conditional optimum. ``Omega`` is a scalar,
    a vector (diagonal) or a full precision matrix shared by all subsets.
    """

    def __init__(self, centers, omega):
        centers = np.asarray(centers, dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        self.centers = centers
        self.m, self.p = centers.shape
        om = np.asarray(omega, dtype=float)
        if om.ndim == 0:
            om = np.eye(self.p) * float(om)
        elif om.ndim == 1:
            om = np.diag(om)
        if om.shape != (self.p, self.p):
            raise ValueError("omega has the wrong shape")
        self.omega = om
        _, self._logdet = np.linalg.slogdet(om)

    def elbo_all(self, q, power=1):
        diff = q.mean[None, :] - self.centers
        quad = np.einsum("ji,ik,jk->j", diff, self.omega, diff)
        trace = float(np.diag(self.omega) @ q.var)
        ent = 0.5 * float(np.sum(np.log(2 * math.pi * math.e * q.var)))
        cross = -0.5 * self.p * math.log(2 * math.pi) + 0.5 * self._logdet
        return cross - 0.5 * (quad + trace) + ent

    def sweep(self, q, j, power=1):
        mu = q.mean.copy()
        c = self.centers[j]
        om = self.omega
        for l in range(self.p):
            off = om[l] @ (mu - c) - om[l, l] * (mu[l] - c[l])
            mu[l] = c[l] - off / om[l, l]
        return DiagGaussian(mu, 1.0 / np.diag(om))

    def init(self, power=1, rng=None):
        return DiagGaussian(np.zeros(self.p), np.ones(self.p))

    @staticmethod
    def params(q):
        return np.concatenate([q.mean, q.var])

    @staticmethod
    def blend(old, new, rho):
        if rho >= 1.0:
            return new
        prec = (1 - rho) / old.var + rho / new.var
        eta = (1 - rho) * old.mean / old.var + rho * new.mean / new.var
        return DiagGaussian(eta / prec, 1.0 / prec)

    @staticmethod
    def rescale(q, m):
        return DiagGaussian(q.mean.copy(), q.var / m)


def make_blocks(subsets, prior=None, K: int = 3):
    """Build the subset container matching the data kind."""
    if isinstance(subsets, (BlrBlocks, GmmBlocks, GaussianTargets)):
        return subsets
    subsets = list(subsets)
    if not subsets:
        raise ValueError("need at least one subset")
    first = subsets[0]
    kind = first.kind if isinstance(first, Dataset) else None
    if kind is ModelKind.BLR or isinstance(first, _blr.BlrStats) or isinstance(prior, _blr.BlrPrior):
        return BlrBlocks(subsets, prior if prior is not None else _blr.BlrPrior())
    if kind is ModelKind.GMM or isinstance(prior, _gmm.GmmPrior):
        return GmmBlocks(subsets, prior if prior is not None else _gmm.GmmPrior(), K)
    raise ValueError("cannot infer the model from the subsets")


# --------------------------------------------------------------------------
# Solvers


def _rho(t: int, kappa: float) -> float:
    return 1.0 if kappa == 0 else t ** (-kappa)


class _Progress:
    """Early stopping and suffix averaging of the ``F`` iterates.

    Stops once, for ``patience`` consecutive iterations, both the median gap
    and every parameter of ``F`` (relative to ``1 + |value|``) change by less
    than ``convergence_tol``. A run that stops this way returns its last
    iterate; otherwise the averaged output covers the last half of the run.
    """

    def __init__(self, blocks, cfg):
        self.blocks = blocks
        self.cfg = cfg
        self.states = []
        self.last_gap = None
        self.last_vec = None
        self.stable = 0

    def update(self, F, med) -> bool:
        vec = self.blocks.params(F)
        self.states.append(F)
        tol = self.cfg.convergence_tol
        calm = (
            self.last_gap is not None
            and abs(med - self.last_gap) < tol
            and float(np.max(np.abs(vec - self.last_vec) / (1.0 + np.abs(self.last_vec)))) < tol
        )
        self.stable = self.stable + 1 if calm else 0
        self.last_gap, self.last_vec = med, vec
        return self.converged

    @property
    def converged(self) -> bool:
        return self.stable >= self.cfg.patience

    def result(self):
        if self.converged or not self.cfg.average:
            return self.states[-1]
        tail = self.states[len(self.states) // 2:]
        acc = tail[0]
        for k, state in enumerate(tail[1:], start=2):
            acc = self.blocks.blend(acc, state, 1.0 / k)
        return acc


def _step(blocks, q, j, power, rho, cfg):
    new = q
    for _ in range(cfg.inner_sweeps):
        new = blocks.sweep(new, j, power)
    return blocks.blend(q, new, rho)


def _select(gaps, prev, cfg, elbos=None):
    """Median block of ``gaps``.

    Among blocks tied at the median, the sticky rule keeps ``prev``; otherwise
    ``elbos`` (if given) breaks the tie by taking the tied block whose ELBO is
    closest to the lower median ELBO over all blocks, so a tie never hands the
    step to an extreme block. This matters at the start, where ``F == G``
    makes every gap zero.
    """
    j, med = median_index(gaps, prefer=prev if cfg.tie_rule == "sticky" else None)
    if elbos is None or j == prev:
        return j, med
    tied = np.flatnonzero(np.asarray(gaps) == med)
    if tied.size > 1:
        elbos = np.asarray(elbos)
        _, target = median_index(elbos)
        j = int(tied[np.argmin(np.abs(elbos[tied] - target))])
    return j, med


def minmax_median_vb(blocks, cfg: AggregatorConfig, power: float, rescale: float | None = None) -> AggregateResult:
    """Alternating median-block coordinate ascent for ``min_F max_G med_j gap_j``.

    ``rescale`` divides the final variances of ``F`` by that factor (keeping
    its mean) after the iterations finish.
    """
    t0 = time.perf_counter()
    rng = rng_stream(cfg.seed, 0)
    F = blocks.init(power, rng)
    G = F
    eF = blocks.elbo_all(F, power)
    eG = eF.copy()
    trace = SolverTrace()
    progress = _Progress(blocks, cfg)
    prev = None
    for t in range(1, cfg.iterations + 1):
        gaps = eG - eF
        j, med = _select(gaps, prev, cfg, eF)
        trace.records.append(TraceRecord(t, "F", j, med, gaps.copy() if cfg.record_gaps else None))
        F = _step(blocks, F, j, power, _rho(t, cfg.step_decay), cfg)
        eF = blocks.elbo_all(F, power)

        gaps = eG - eF
        j2, med2 = _select(gaps, j, cfg, eG)
        trace.records.append(TraceRecord(t, "G", j2, med2, gaps.copy() if cfg.record_gaps else None))
        G = _step(blocks, G, j2, power, _rho(t, cfg.adversary_decay), cfg)
        eG = blocks.elbo_all(G, power)
        prev = j2
        if progress.update(F, med):
            break
    F_bar = progress.result()
    if rescale is not None:
        F_bar = blocks.rescale(F_bar, rescale)
    return AggregateResult(F_bar, G, trace, time.perf_counter() - t0)


def _check_m(m: int, allow_single: bool):
    if m >= 3 or (allow_single and m == 1):
        return
    raise ValueError(f"the median over {m} subsets degenerates; need m >= 3")


def m3vb_no_latent(subsets, prior=None, cfg: AggregatorConfig | None = None) -> AggregateResult:
    """Min-max median VB for models without local latent variables.

    ``M3VB_ONE_STEP`` runs on the ``m``-powered subset likelihoods;
    ``M3VB_TWO_STEP`` runs at power 1 and rescales the result by ``1/m``.
    """
    cfg = cfg or AggregatorConfig()
    blocks = make_blocks(subsets, prior, cfg.K)
    _check_m(blocks.m, allow_single=False)
    if cfg.mode is Mode.M3VB_TWO_STEP:
        return minmax_median_vb(blocks, cfg, 1.0, rescale=float(blocks.m))
    if cfg.mode is not Mode.M3VB_ONE_STEP:
        raise ValueError(f"m3vb_no_latent does not run mode {cfg.mode.value}")
    return minmax_median_vb(blocks, cfg, float(blocks.m))


def m3vb_latent(subsets, prior=None, cfg: AggregatorConfig | None = None) -> AggregateResult:
    """Aggregate-and-rescale: power-1 min-max median VB, then variances / m."""
    cfg = cfg or AggregatorConfig(mode=Mode.M3VB_TWO_STEP)
    blocks = make_blocks(subsets, prior, cfg.K)
    _check_m(blocks.m, allow_single=True)
    return minmax_median_vb(blocks, cfg, 1.0, rescale=float(blocks.m))


def m3vb_latent_one_step(subsets, prior=None, cfg: AggregatorConfig | None = None) -> AggregateResult:
    """Min-max median VB on ``m``-powered latent-variable likelihoods (inconsistent)."""
    cfg = cfg or AggregatorConfig()
    blocks = make_blocks(subsets, prior, cfg.K)
    _check_m(blocks.m, allow_single=True)
    return minmax_median_vb(blocks, cfg, float(blocks.m))


def rescale(dist, m: float):
    """Shrink variances by ``1/m`` around an unchanged mean."""
    if not m >= 1:
        raise ValueError("rescale factor m must be >= 1")
    if isinstance(dist, _blr.BlrVariational):
        return _blr.rescale_blr(dist, m)
    if isinstance(dist, _gmm.GmmVariational):
        return _gmm.rescale_gmm(dist, m)
    return GaussianTargets.rescale(dist, m)


def mvb_direct_median(subsets, prior=None, cfg: AggregatorConfig | None = None) -> AggregateResult:
    """Minimize the median over subsets of ``KL(F || m-powered subset posterior)``.

    KL values come from exact log evidences minus ELBOs; each iteration takes a
    coordinate step on the median-KL subset. Single-sided, so ``g`` is ``f``.
    """
    cfg = cfg or AggregatorConfig(mode=Mode.MVB)
    t0 = time.perf_counter()
    blocks = make_blocks(subsets, prior, cfg.K)
    power = float(blocks.m)
    log_z = blocks.log_evidence_all(power)
    F = blocks.init(power, rng_stream(cfg.seed, 0))
    trace = SolverTrace()
    progress = _Progress(blocks, cfg)
    prev = None
    for t in range(1, cfg.iterations + 1):
        kl = log_z - blocks.elbo_all(F, power)
        j, med = _select(kl, prev, cfg)
        trace.records.append(TraceRecord(t, "F", j, med, kl.copy() if cfg.record_gaps else None))
        F = _step(blocks, F, j, power, _rho(t, cfg.step_decay), cfg)
        prev = j
        if progress.update(F, med):
            break
    F_bar = progress.result()
    return AggregateResult(F_bar, F_bar, trace, time.perf_counter() - t0)


def pooled_vb(data, prior=None, cfg: AggregatorConfig | None = None, power: float = 1.0):
    """Standard coordinate ascent to convergence on one (clean) dataset."""
    cfg = cfg or AggregatorConfig(mode=Mode.POOLED)
    blocks = make_blocks([data], prior, cfg.K)
    return _fit_block(blocks, 0, power, cfg)


def mean_elbo_vb(subsets, prior=None, cfg: AggregatorConfig | None = None, power: float | None = None):
    """Maximize the average over subsets of the ``power``-powered subset ELBOs (BLR).

    The average objective has data term ``sum_j (power / m) * loglik_j``; with
    the default ``power = m`` this is the full-data likelihood.
    """
    cfg = cfg or AggregatorConfig(mode=Mode.POOLED)
    blocks = make_blocks(subsets, prior, cfg.K)
    if not isinstance(blocks, BlrBlocks):
        raise UnsupportedModelError("mean_elbo_vb is implemented for BLR only")
    w = float(blocks.m if power is None else power) / blocks.m
    combined = blocks.stats[0].scaled(w)
    for st in blocks.stats[1:]:
        combined = combined + st.scaled(w)
    init = _blr.init_blr(blocks.p, blocks.prior, float(combined.n), 1.0)
    return _blr.fit_blr(blocks.prior, combined, 1.0, init=init, tol=cfg.fit_tol, max_sweeps=cfg.max_sweeps)


def _fit_block(blocks, j, power, cfg):
    if isinstance(blocks, BlrBlocks):
        init = blocks.init(power)
        return _blr.fit_blr(blocks.prior, blocks.stats[j], power, init=init,
                            tol=cfg.fit_tol, max_sweeps=cfg.max_sweeps)
    if isinstance(blocks, GmmBlocks):
        init = blocks.init(power, rng_stream(cfg.seed, 0))
        return _gmm.fit_gmm(blocks.prior, blocks.parts[j], blocks.K, power, init=init,
                            tol=cfg.fit_tol, max_sweeps=cfg.max_sweeps)
    raise UnsupportedModelError(type(blocks).__name__)


def wasp_barycenter(local_states):
    """Closed-form 2-Wasserstein barycenter of diagonal-Gaussian factors.

    Coordinate-wise: barycenter mean is the average mean and barycenter
    standard deviation the average standard deviation. Mixture components are
    sorted by mean first to align labels. An inverse-gamma factor is
    aggregated by averaging its mean and variance and refitting.
    """
    states = list(local_states)
    if not states:
        raise ValueError("need at least one local state")
    first = states[0]
    if isinstance(first, _gmm.GmmVariational):
        states = [s.sorted() for s in states]
    means = np.mean([s.mean for s in states], axis=0)
    sds = np.mean([np.sqrt(s.var) for s in states], axis=0)
    if isinstance(first, _blr.BlrVariational):
        moments = np.array([_blr.ig_moments(s) for s in states])
        c, d = _blr.ig_from_moments(*np.mean(moments, axis=0))
        return _blr.BlrVariational(means, sds**2, c, d)
    if isinstance(first, _gmm.GmmVariational):
        return _gmm.GmmVariational(means, sds**2)

    return DiagGaussian(means, sds**2)


def wasp(subsets, prior=None, cfg: AggregatorConfig | None = None) -> AggregateResult:
    """Fit every subset at power 1, take the barycenter, rescale by ``1/m``."""
    cfg = cfg or AggregatorConfig(mode=Mode.WASP)
    t0 = time.perf_counter()
    blocks = make_blocks(subsets, prior, cfg.K)
    local = [_fit_block(blocks, j, 1.0, cfg) for j in range(blocks.m)]
    bary = rescale(wasp_barycenter(local), float(blocks.m))
    return AggregateResult(bary, bary, SolverTrace(), time.perf_counter() - t0)


def aggregate(mode, subsets, prior=None, cfg: AggregatorConfig | None = None) -> AggregateResult:
    """Dispatch a mode on a list of subsets (pooled VB fits their union)."""
    mode = Mode(mode)
    cfg = replace(cfg, mode=mode) if cfg is not None else AggregatorConfig(mode=mode)
    subsets = list(subsets)
    latent = bool(subsets) and isinstance(subsets[0], Dataset) and subsets[0].kind is ModelKind.GMM
    if mode is Mode.M3VB_ONE_STEP:
        return (m3vb_latent_one_step if latent else m3vb_no_latent)(subsets, prior, cfg)
    if mode is Mode.M3VB_TWO_STEP:
        return (m3vb_latent if latent else m3vb_no_latent)(subsets, prior, cfg)
    if mode is Mode.MVB:
        return mvb_direct_median(subsets, prior, cfg)
    if mode is Mode.WASP:
        return wasp(subsets, prior, cfg)
    if mode is Mode.POOLED:
        t0 = time.perf_counter()
        union = _concat(subsets)
        state = pooled_vb(union, prior, cfg)
        return AggregateResult(state, state, SolverTrace(), time.perf_counter() - t0)
    raise ValueError(f"mode {mode.value} does not produce a distribution; use minmax_point_estimator")


def _concat(subsets):
    first = subsets[0]
    if isinstance(first, Dataset):
        x = np.concatenate([s.x for s in subsets])
        y = None if first.y is None else np.concatenate([s.y for s in subsets])
        return Dataset(first.kind, x, y)
    return np.concatenate([np.asarray(s, dtype=float) for s in subsets])


# --------------------------------------------------------------------------
# Empirical min-max median of log-likelihoods (point estimator)


class GaussianLocationLoss:
    """Per-subset ``sum_i log N(x_i; theta, I)`` up to constants."""

    def __init__(self, subsets):
        parts = [np.asarray(s.x if isinstance(s, Dataset) else s, dtype=float) for s in subsets]
        parts = [p[:, None] if p.ndim == 1 else p for p in parts]
        self.n = np.array([p.shape[0] for p in parts], dtype=float)
        self.s1 = np.stack([p.sum(axis=0) for p in parts])
        self.s2 = np.array([float(np.sum(p * p)) for p in parts])
        self.m, self.p = self.s1.shape

    def values(self, theta):
        return -0.5 * (self.s2 - 2.0 * self.s1 @ theta + self.n * float(theta @ theta))

    def grad(self, theta, j):
        return self.s1[j] - self.n[j] * theta

    def init(self):
        return np.zeros(self.p)


class LeastSquaresLoss:
    """Per-subset ``-||y - X beta||^2 / 2`` (Gaussian log-likelihood, unit noise)."""

    def __init__(self, subsets):
        self.stats = _blr.BlrStats.stack(_blr.as_stats(s) for s in subsets)
        self.m = self.stats.xty.shape[0]
        self.p = self.stats.p

    def values(self, beta):
        st = self.stats
        return -0.5 * (st.yty - 2.0 * st.xty @ beta + np.einsum("jik,i,k->j", st.xtx, beta, beta))

    def grad(self, beta, j):
        return self.stats.xty[j] - self.stats.xtx[j] @ beta

    def init(self):
        return np.zeros(self.p)


class MixtureLoss:
    """Per-subset marginal log-likelihood of the equal-weight unit-variance mixture."""

    def __init__(self, subsets, K: int):
        self.parts = [_gmm.as_obs(s) for s in subsets]
        self.m = len(self.parts)
        self.p = K
        self.x = np.concatenate(self.parts)
        self.ids = np.repeat(np.arange(self.m), [p.size for p in self.parts])

    def _logp(self, x, theta):
        return -math.log(self.p) - 0.5 * math.log(2 * math.pi) - 0.5 * (x[:, None] - theta[None, :]) ** 2

    def values(self, theta):
        ll = log_sum_exp(self._logp(self.x, theta), axis=1)
        return np.bincount(self.ids, weights=ll, minlength=self.m)

    def grad(self, theta, j):
        x = self.parts[j]
        lp = self._logp(x, theta)
        lp -= lp.max(axis=1, keepdims=True)
        r = np.exp(lp)
        r /= r.sum(axis=1, keepdims=True)
        return (r * (x[:, None] - theta[None, :])).sum(axis=0)

    def init(self):
        return np.quantile(self.x, (np.arange(self.p) + 0.5) / self.p)


def loss_for(subsets, K: int = 3):
    subsets = list(subsets)
    first = subsets[0]
    if isinstance(first, Dataset) and first.kind is ModelKind.BLR:
        return LeastSquaresLoss(subsets)
    if isinstance(first, Dataset) and first.kind is ModelKind.GMM and K > 1:
        return MixtureLoss(subsets, K)
    return GaussianLocationLoss(subsets)


def _curvature(loss, theta0):
    grads = np.array([loss.grad(theta0, j) for j in range(loss.m)])
    norms = np.linalg.norm(grads, axis=1)
    j, _ = median_index(norms)
    u = grads[j] / norms[j] if norms[j] > 0 else np.eye(loss.p)[0]
    h = 1e-3 * (1.0 + float(np.linalg.norm(theta0)))
    shifted = np.array([loss.grad(theta0 + h * u, k) for k in range(loss.m)])
    secant = np.linalg.norm(shifted - grads, axis=1) / h
    _, L = median_index(secant)
    if not L > 0:
        raise DivergenceError("could not estimate a positive curvature scale")
    return L


def minmax_point_estimator(subsets, model=None, cfg: AggregatorConfig | None = None, theta0=None):
    """Alternating gradient steps on ``min_f max_g med_j {L_j(g) - L_j(f)}``.

    ``model`` is a loss object with ``values(theta)``, ``grad(theta, j)`` and
    ``init()``; by default one is built from the subsets. Step size at
    iteration ``t`` is ``1 / (L sqrt(t))`` with ``L`` a secant curvature
    estimate at the start point. With ``cfg.average`` the returned point is
    the average of the ``f`` iterates over the second half of the run.
    """
    cfg = cfg or AggregatorConfig(mode=Mode.MINMAX_POINT)
    loss = model if model is not None else loss_for(subsets, cfg.K)
    theta = np.asarray(theta0 if theta0 is not None else loss.init(), dtype=float)
    L = _curvature(loss, theta)
    tf = theta.copy()
    tg = theta.copy()
    history = []
    prev = None
    for t in range(1, cfg.iterations + 1):
        eta = 1.0 / (L * math.sqrt(t))
        lf = loss.values(tf)
        lg = loss.values(tg)
        jg, _ = _select(lg - lf, prev, cfg, lg)
        tg = tg + eta * loss.grad(tg, jg)
        lg = loss.values(tg)
        jf, _ = _select(lg - lf, jg, cfg, lf)
        tf = tf + eta * loss.grad(tf, jf)
        prev = jf
        if not (np.all(np.isfinite(tf)) and np.linalg.norm(tf) <= 1e6 and np.linalg.norm(tg) <= 1e6):
            raise DivergenceError(f"iterates diverged at iteration {t}")
        history.append(tf)
    if not cfg.average:
        return tf
    return np.mean(history[len(history) // 2:], axis=0)
