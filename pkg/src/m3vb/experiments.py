"""Configuration-driven simulation sweeps and the ``records.csv`` format.

Every grid cell ``(m, n)`` and repetition gets its own seed derived from
``(base_seed, model, m, n, alpha, repetition)``. All modes in a cell share the
same data, so differences between modes are paired.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .aggregator import (
    AggregatorConfig,
    Mode,
    m3vb_latent,
    m3vb_latent_one_step,
    m3vb_no_latent,
    minmax_point_estimator,
    mvb_direct_median,
    pooled_vb,
    wasp,
)
from .blr import BlrPrior
from .core_math import rng_stream, stream_id_for
from .data import (
    BETA_STAR,
    THETA_STAR,
    CorruptionScheme,
    GenConfig,
    ModelKind,
    contaminate,
    generate,
    partition,
)
from .gmm import GmmPrior, GmmVariational

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

FULL_N_GRID = (100, 200, 400, 600, 1000, 1500, 2000)
FULL_M_GRID = (20, 30, 40)
REFERENCE_SAMPLES = 20_000


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelKind
    n_grid: tuple = (100,)
    m_grid: tuple = (20,)
    alpha: float = 0.0
    modes: tuple = (Mode.M3VB_ONE_STEP,)
    repetitions: int = 20
    base_seed: int = 0
    output_dir: str = "out"
    theta: tuple | None = None
    sigma: float = 1.0
    weights: tuple | None = None
    corruption: CorruptionScheme | None = None
    prior: object = None
    solver: AggregatorConfig = field(default_factory=AggregatorConfig)
    plots: tuple = ("lineplot:l2_error-vs-n:mode",)
    full_n_grid: tuple = FULL_N_GRID
    full_m_grid: tuple = FULL_M_GRID
    full_repetitions: int = 100

    def __post_init__(self):
        try:
            kind = ModelKind(self.model)
        except ValueError:
            raise ConfigError(f"unknown model {self.model!r}") from None
        object.__setattr__(self, "model", kind)
        try:
            object.__setattr__(self, "modes", tuple(Mode(m) for m in self.modes))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("n_grid", "m_grid", "full_n_grid", "full_m_grid"):
            grid = tuple(int(v) for v in getattr(self, name))
            if not grid or any(v < 1 for v in grid):
                raise ConfigError(f"{name} must be a nonempty list of positive counts")
            object.__setattr__(self, name, grid)
        if not self.modes:
            raise ConfigError("modes must be nonempty")
        if self.repetitions < 1 or self.full_repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not 0.0 <= self.alpha < 0.5:
            raise ConfigError("alpha must lie in [0, 0.5)")
        if self.theta is None:
            object.__setattr__(self, "theta", BETA_STAR if kind is ModelKind.BLR else THETA_STAR)
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        if self.prior is None:
            object.__setattr__(self, "prior", BlrPrior() if kind is ModelKind.BLR else GmmPrior())
        object.__setattr__(self, "plots", tuple(self.plots))
        try:
            self.gen_config(1)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def K(self) -> int:
        return len(self.theta)

    def gen_config(self, N: int) -> GenConfig:
        return GenConfig(
            self.model, N, theta=self.theta, sigma=self.sigma, weights=self.weights,
            alpha=self.alpha, corruption=self.corruption,
        )

    def with_full_grids(self) -> "ExperimentConfig":
        return dataclasses.replace(
            self, n_grid=self.full_n_grid, m_grid=self.full_m_grid,
            repetitions=self.full_repetitions,
        )

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {"experiment", "prior", "generator", "solver", "plots"}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config sections: {sorted(extra)}")
        exp = dict(raw.get("experiment", {}))
        _only(exp, "experiment", {
            "model", "n_grid", "m_grid", "alpha", "modes", "repetitions", "base_seed",
            "output_dir", "full_n_grid", "full_m_grid", "full_repetitions",
        })
        if "model" not in exp:
            raise ConfigError("[experiment] needs a model")
        kind_name = str(exp["model"]).upper()
        try:
            kind = ModelKind(kind_name)
        except ValueError:
            raise ConfigError(f"unknown model {exp['model']!r}") from None

        prior_raw = dict(raw.get("prior", {}))
        try:
            if kind is ModelKind.BLR:
                _only(prior_raw, "prior", {"alpha", "a0", "b0"})
                prior = BlrPrior(**prior_raw)
            else:
                _only(prior_raw, "prior", {"sigma0_sq"})
                prior = GmmPrior(**prior_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[prior]: {exc}") from None

        gen = dict(raw.get("generator", {}))
        _only(gen, "generator", {"theta", "sigma", "weights", "corruption_mean", "corruption_var"})
        corruption = None
        if "corruption_mean" in gen or "corruption_var" in gen:
            default = GenConfig(kind, 1).corruption
            corruption = CorruptionScheme(
                float(gen.pop("corruption_mean", default.mean)),
                float(gen.pop("corruption_var", default.var)),
            )

        solver = dict(raw.get("solver", {}))
        fields_ = {f.name for f in dataclasses.fields(AggregatorConfig)} - {"mode", "seed", "K"}
        _only(solver, "solver", fields_)
        try:
            solver_cfg = AggregatorConfig(**solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[solver]: {exc}") from None

        plots = dict(raw.get("plots", {}))
        _only(plots, "plots", {"specs"})
        kw = dict(exp)
        kw["model"] = kind
        if "specs" in plots:
            kw["plots"] = tuple(plots["specs"])
        for key in ("repetitions", "base_seed", "full_repetitions"):
            if key in kw and not isinstance(kw[key], int):
                raise ConfigError(f"[experiment] {key} must be an integer")
        try:
            return cls(prior=prior, solver=solver_cfg, corruption=corruption, **gen, **kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def _only(section: dict, name: str, allowed: set):
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"[{name}] has unknown keys: {sorted(extra)}")


@dataclass(frozen=True)
class RunRecord:
    model: str
    mode: str
    m: int
    n: int
    alpha: float
    repetition: int
    seed: int
    status: str
    l2_error: float
    kl_to_reference: float
    means: tuple
    wall_time_seconds: float

    @property
    def key(self):
        return (self.mode, self.m, self.n, self.repetition)


def cell_seed(base_seed: int, model: ModelKind, m: int, n: int, alpha: float, rep: int) -> int:
    return stream_id_for(int(base_seed), ModelKind(model).value, int(m), int(n), repr(float(alpha)), int(rep))


def make_cell_data(cfg: ExperimentConfig, m: int, n: int, rep: int):
    """Clean data, corrupted data and partition for one repetition of one cell."""
    seed = cell_seed(cfg.base_seed, cfg.model, m, n, cfg.alpha, rep)
    clean = generate(cfg.gen_config(m * n), rng_stream(seed, 0))
    part = partition(m * n, m, rng_stream(seed, 1))
    dirty, part = contaminate(clean, part, cfg.alpha, cfg.corruption, rng_stream(seed, 2))
    return seed, clean, dirty, part


def reference_precision(cfg: ExperimentConfig) -> np.ndarray:
    """Per-observation information diagonal from an independent clean sample."""
    seed = stream_id_for(int(cfg.base_seed), "reference", cfg.model.value)
    sample = generate(cfg.gen_config(REFERENCE_SAMPLES), rng_stream(seed, 0))
    solver = dataclasses.replace(cfg.solver, K=cfg.K, seed=seed)
    fit = pooled_vb(sample, cfg.prior, solver)
    theta_hat = fit.mean
    if isinstance(fit, GmmVariational):
        theta_hat = np.sort(theta_hat)
    diag, _ = analysis.fisher_diag(cfg.model, theta_hat, sample)
    return diag


def run_mode(mode: Mode, cfg: ExperimentConfig, subsets, clean_part, solver: AggregatorConfig):
    """Run one mode; returns ``(state_or_None, point_estimate)``."""
    latent = cfg.model is ModelKind.GMM
    solver = dataclasses.replace(solver, mode=mode)
    if mode is Mode.M3VB_ONE_STEP:
        res = (m3vb_latent_one_step if latent else m3vb_no_latent)(subsets, cfg.prior, solver)
        return res.f, res.f.mean
    if mode is Mode.M3VB_TWO_STEP:
        res = (m3vb_latent if latent else m3vb_no_latent)(subsets, cfg.prior, solver)
        return res.f, res.f.mean
    if mode is Mode.MVB:
        res = mvb_direct_median(subsets, cfg.prior, solver)
        return res.f, res.f.mean
    if mode is Mode.WASP:
        res = wasp(subsets, cfg.prior, solver)
        return res.f, res.f.mean
    if mode is Mode.POOLED:
        state = pooled_vb(clean_part, cfg.prior, solver)
        return state, state.mean
    theta = minmax_point_estimator(subsets, cfg=solver)
    return None, theta


def _run_cell(args):
    cfg, precision, m, n, rep = args
    seed, clean, dirty, part = make_cell_data(cfg, m, n, rep)
    subsets = part.split(dirty)
    clean_part = clean.take(part.clean_indices())
    solver = dataclasses.replace(cfg.solver, K=cfg.K, seed=seed)
    latent = cfg.model is ModelKind.GMM
    out = []
    for mode in cfg.modes:
        t0 = time.perf_counter()
        status = "ok"
        err = kl = math.nan
        means = (math.nan,) * cfg.K
        try:
            state, theta = run_mode(mode, cfg, subsets, clean_part, solver)
            theta = np.sort(theta) if latent else np.asarray(theta)
            means = tuple(float(v) for v in theta)
            err = analysis.l2_error(theta, cfg.theta, match_components=latent)
            if state is not None:
                kl = analysis.kl_to_centered_reference(state, precision, m, n)
        except Exception as exc:  # recorded per run, never aborts the sweep
            status = f"error: {type(exc).__name__}: {exc}"
        out.append(RunRecord(
            cfg.model.value, mode.value, m, n, cfg.alpha, rep, seed, status,
            err, kl, means, time.perf_counter() - t0,
        ))
    return out


def run_experiment(cfg: ExperimentConfig, workers: int = 1, output_dir=None, plots: bool = True):
    """Run the whole grid, write ``records.csv`` (and plots), return the records."""
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    precision = reference_precision(cfg)
    tasks = [(cfg, precision, m, n, rep)
             for m in cfg.m_grid for n in cfg.n_grid for rep in range(cfg.repetitions)]
    if workers == 1:
        chunks = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, tasks))
    records = sorted((r for chunk in chunks for r in chunk), key=lambda r: r.key)
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records(records, out / "records.csv", n_means=cfg.K)
    if plots:
        from .plotting import render_spec

        rows = read_records(out / "records.csv")
        for spec in cfg.plots:
            render_spec(rows, spec, out)
    return records


# --------------------------------------------------------------------------
# records.csv

BASE_COLUMNS = ("model", "mode", "m", "n", "alpha", "repetition", "seed", "status",
                "l2_error", "kl_to_reference")
TIME_COLUMN = "wall_time_seconds"


def columns(n_means: int) -> list[str]:
    return list(BASE_COLUMNS) + [f"mean_{i + 1}" for i in range(n_means)] + [TIME_COLUMN]


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else format(v, ".17g")
    return str(v)


def write_records(records, path, n_means: int | None = None) -> None:
    """Write records with a header row; floats use 17 significant digits, NaN is empty."""
    records = list(records)
    if n_means is None:
        n_means = max((len(r.means) for r in records), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns(n_means))
        for r in records:
            means = list(r.means) + [math.nan] * (n_means - len(r.means))
            row = [r.model, r.mode, r.m, r.n, float(r.alpha), r.repetition, r.seed, r.status,
                   float(r.l2_error), float(r.kl_to_reference), *[float(v) for v in means],
                   float(r.wall_time_seconds)]
            w.writerow([_fmt(v) for v in row])


def _parse_cell(value: str):
    if value == "":
        return math.nan
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def read_records(path) -> list[dict]:
    """Read ``records.csv`` into dicts; numeric cells become numbers, empty cells NaN."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        return [{k: _parse_cell(v) for k, v in row.items()} for row in reader]
