"""Min-max median variational Bayes: robust aggregation of subset posteriors."""

from .aggregator import (
    AggregateResult,
    AggregatorConfig,
    GaussianTargets,
    Mode,
    SolverTrace,
    aggregate,
    m3vb_latent,
    m3vb_latent_one_step,
    m3vb_no_latent,
    mean_elbo_vb,
    minmax_median_vb,
    minmax_point_estimator,
    mvb_direct_median,
    pooled_vb,
    rescale,
    wasp,
    wasp_barycenter,
)
from .blr import BlrPrior, BlrVariational
from .core_math import DiagGaussian, kl_diag_gaussians, median_index, rng_stream
from .data import Dataset, GenConfig, ModelKind, Partition
from .gmm import GmmPrior, GmmVariational

__version__ = "0.1.0"

__all__ = [
    "AggregateResult",
    "AggregatorConfig",
    "BlrPrior",
    "BlrVariational",
    "Dataset",
    "DiagGaussian",
    "GaussianTargets",
    "GenConfig",
    "GmmPrior",
    "GmmVariational",
    "Mode",
    "ModelKind",
    "Partition",
    "SolverTrace",
    "aggregate",
    "kl_diag_gaussians",
    "m3vb_latent",
    "m3vb_latent_one_step",
    "m3vb_no_latent",
    "mean_elbo_vb",
    "median_index",
    "minmax_median_vb",
    "minmax_point_estimator",
    "mvb_direct_median",
    "pooled_vb",
    "rescale",
    "rng_stream",
    "wasp",
    "wasp_barycenter",
]
