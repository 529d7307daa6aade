"""Self-checks run by ``m3vb check``: each returns a named pass/fail result."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import analysis
from .aggregator import AggregatorConfig, BlrBlocks, GaussianTargets, mean_elbo_vb, minmax_median_vb, pooled_vb
from .blr import BlrPrior, elbo_blr
from .core_math import rng_stream
from .data import GenConfig, generate_blr, partition

# Exact enumeration of the discrete latent example (floats of the exact
# rational expressions, 10 significant digits).
EXAMPLE_MARGINAL = {0: -0.6853142073, 1: -0.7029268267}
EXAMPLE_LIMIT = {0: -0.1025558757, 1: -0.0489438996}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _params(q) -> np.ndarray:
    return BlrBlocks.params(q)


def check_mean_elbo_equivalence(m_values=(4, 10), N: int = 200, seed: int = 0, tol: float = 1e-6):
    """Average of m power-m subset ELBOs is maximized by the full-data posterior fit."""
    out = []
    prior = BlrPrior()
    data = generate_blr(GenConfig.blr(N, theta=(1.0, -0.5)), rng_stream(seed, 0))
    cfg = AggregatorConfig(fit_tol=1e-14)
    pooled = pooled_vb(data, prior, cfg)
    for m in m_values:
        t0 = time.perf_counter()
        subsets = partition(N, m, rng_stream(seed, m)).split(data)
        avg = mean_elbo_vb(subsets, prior, cfg)
        blocks = BlrBlocks(subsets, prior)
        gap = float(np.max(np.abs(_params(avg) - _params(pooled))))
        obj = float(np.mean(blocks.elbo_all(avg, float(m))))
        full = elbo_blr(avg, prior, data, 1.0)
        ok = gap < tol and abs(obj - full) < 1e-8 * max(1.0, abs(full))
        out.append(CheckResult(
            f"mean-ELBO equivalence m={m}", ok,
            f"max parameter difference {gap:.3e} (tol {tol:g}); objective {obj:.10g} vs full-data {full:.10g}",
            time.perf_counter() - t0,
        ))
    return out


def prop2_instance(m: int = 15, omega: float = 4.0, outlier: float = 50.0, seed: int = 0):
    """Local centres for the Gaussian-target check: m-1 draws of N(0, 1/omega) plus an outlier."""
    rng = rng_stream(seed, 2)
    return np.append(rng.standard_normal(m - 1) / np.sqrt(omega), outlier)


def check_gaussian_targets(m: int = 15, omega: float = 4.0, outlier: float = 50.0, seed: int = 0):
    t0 = time.perf_counter()
    centers = prop2_instance(m, omega, outlier, seed)
    target, _ = analysis.brute_force_minmax_median(centers, omega)
    res = minmax_median_vb(GaussianTargets(centers, omega), AggregatorConfig(seed=seed), 1.0)
    mean = float(res.f.mean[0])
    rel_var = float(res.f.var[0] * omega)
    ok = abs(mean - target) < 1e-2 and abs(rel_var - 1.0) < 0.05
    return [CheckResult(
        "Gaussian-target min-max median", ok,
        f"mean {mean:.5f} vs grid oracle {target:.5f}; variance x omega = {rel_var:.4f}",
        time.perf_counter() - t0,
    )]


def check_discrete_example(m_values=range(1, 31), tol: float = 1e-3):
    t0 = time.perf_counter()
    rep = analysis.discrete_inconsistency_check(analysis.DiscreteModel.example_4_1(), list(m_values))
    close = all(abs(rep.marginal[k] - v) < tol for k, v in EXAMPLE_MARGINAL.items()) and all(
        abs(rep.limit[k] - v) < tol for k, v in EXAMPLE_LIMIT.items()
    )
    ok = close and rep.marginal_argmax == 0 and rep.limit_argmax == 1 and rep.flip_m is not None
    detail = (
        f"marginal {rep.marginal[0]:.4f} vs {rep.marginal[1]:.4f} (argmax {rep.marginal_argmax}); "
        f"limit {rep.limit[0]:.4f} vs {rep.limit[1]:.4f} (argmax {rep.limit_argmax}); "
        f"first flip at m={rep.flip_m}"
    )
    return [CheckResult("discrete latent inconsistency", ok, detail, time.perf_counter() - t0)]


def run_all():
    return check_mean_elbo_equivalence() + check_gaussian_targets() + check_discrete_example()
