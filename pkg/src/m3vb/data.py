"""Synthetic data, CSV ingestion, partitioning into subsets and subset-level corruption."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace

import numpy as np


class ModelKind(str, enum.Enum):
    BLR = "BLR"
    GMM = "GMM"


@dataclass(frozen=True)
class Dataset:
    """Observations for one of the two models.

    For ``BLR`` ``x`` is an ``(N, p)`` covariate matrix and ``y`` the responses.
    For ``GMM`` ``x`` is a length-``N`` vector and ``y`` is ``None``.
    """

    kind: ModelKind
    x: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        x = np.asarray(self.x, dtype=float)
        if kind is ModelKind.BLR:
            if x.ndim != 2:
                raise ValueError(f"BLR covariates must be an (N, p) matrix, got shape {x.shape}")
            if self.y is None:
                raise ValueError("BLR dataset needs responses y")
            y = np.asarray(self.y, dtype=float)
            if y.shape != (x.shape[0],):
                raise ValueError(f"y has shape {y.shape}, expected ({x.shape[0]},)")
            if not np.all(np.isfinite(y)):
                raise ValueError("responses must be finite")
            object.__setattr__(self, "y", y)
        else:
            if x.ndim != 1:
                raise ValueError(f"GMM observations must be a vector, got shape {x.shape}")
            if self.y is not None:
                raise ValueError("GMM dataset has no responses")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates must be finite")
        object.__setattr__(self, "x", x)

    def __len__(self):
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1] if self.kind is ModelKind.BLR else 1

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        y = None if self.y is None else self.y[idx]
        return Dataset(self.kind, self.x[idx], y)


@dataclass(frozen=True)
class Partition:
    subsets: tuple
    corrupted: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(
            self, "subsets", tuple(np.asarray(s, dtype=int) for s in self.subsets)
        )
        object.__setattr__(self, "corrupted", frozenset(int(b) for b in self.corrupted))
        if any(b < 0 or b >= len(self.subsets) for b in self.corrupted):
            raise ValueError("corrupted subset index out of range")

    @property
    def m(self) -> int:
        return len(self.subsets)

    @property
    def n(self) -> int:
        """Nominal per-subset size (smallest subset)."""
        return min(len(s) for s in self.subsets)

    def split(self, data: Dataset) -> list[Dataset]:
        return [data.take(s) for s in self.subsets]

    def clean_indices(self) -> np.ndarray:
        keep = [s for j, s in enumerate(self.subsets) if j not in self.corrupted]
        if not keep:
            return np.zeros(0, dtype=int)
        return np.sort(np.concatenate(keep))


@dataclass(frozen=True)
class CorruptionScheme:
    """Replacement distribution N(mean, var) for corrupted observations."""

    mean: float
    var: float


BLR_CORRUPTION = CorruptionScheme(mean=10.0, var=1.0)
# N(0, 5) is read as variance 5 (standard deviation sqrt(5)); override via GenConfig.corruption
GMM_CORRUPTION = CorruptionScheme(mean=0.0, var=5.0)

BETA_STAR = (2.0, -1.0, 0.5, 0.0, 1.5, -0.5)
THETA_STAR = (-3.0, 0.0, 3.0)


@dataclass(frozen=True)
class GenConfig:
    """Population parameters for synthetic data.

    ``theta`` is the regression coefficient vector for BLR and the component
    means for GMM. ``sigma`` is the BLR noise standard deviation.
    """

    kind: ModelKind
    N: int
    theta: tuple = BETA_STAR
    sigma: float = 1.0
    weights: tuple | None = None
    alpha: float = 0.0
    corruption: CorruptionScheme | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0.0 <= self.alpha < 0.5:
            raise ValueError("alpha must lie in [0, 0.5)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.kind is ModelKind.GMM:
            K = len(self.theta)
            w = self.weights if self.weights is not None else (1.0 / K,) * K
            w = tuple(float(v) for v in w)
            if len(w) != K or any(v < 0 for v in w) or abs(sum(w) - 1.0) > 1e-12:
                raise ValueError("weights must be a probability vector of length K")
            object.__setattr__(self, "weights", w)
        if self.corruption is None:
            scheme = BLR_CORRUPTION if self.kind is ModelKind.BLR else GMM_CORRUPTION
            object.__setattr__(self, "corruption", scheme)

    @classmethod
    def blr(cls, N: int, **kw) -> "GenConfig":
        return cls(ModelKind.BLR, N, **kw)

    @classmethod
    def gmm(cls, N: int, **kw) -> "GenConfig":
        kw.setdefault("theta", THETA_STAR)
        return cls(ModelKind.GMM, N, **kw)


def generate_blr(cfg: GenConfig, rng: np.random.Generator) -> Dataset:
    if cfg.kind is not ModelKind.BLR:
        raise ValueError("generate_blr needs a BLR config")
    beta = np.asarray(cfg.theta)
    p = beta.size
    if p < 1:
        raise ValueError("beta must have at least one coordinate")
    x = rng.standard_normal((cfg.N, p))
    y = x @ beta + cfg.sigma * rng.standard_normal(cfg.N)
    return Dataset(ModelKind.BLR, x, y)


def generate_gmm(cfg: GenConfig, rng: np.random.Generator) -> Dataset:
    if cfg.kind is not ModelKind.GMM:
        raise ValueError("generate_gmm needs a GMM config")
    theta = np.asarray(cfg.theta)
    labels = rng.choice(theta.size, size=cfg.N, p=np.asarray(cfg.weights))
    x = theta[labels] + rng.standard_normal(cfg.N)
    return Dataset(ModelKind.GMM, x)


def generate(cfg: GenConfig, rng: np.random.Generator) -> Dataset:
    return generate_blr(cfg, rng) if cfg.kind is ModelKind.BLR else generate_gmm(cfg, rng)


def partition(N: int, m: int, rng: np.random.Generator) -> Partition:
    """Random even split of ``range(N)`` into ``m`` subsets.

    The first ``N % m`` subsets get one extra index.
    """
    if not 1 <= m <= N:
        raise ValueError(f"need 1 <= m <= N, got m={m}, N={N}")
    perm = rng.permutation(N)
    return Partition(tuple(np.sort(s) for s in np.array_split(perm, m)))


def n_corrupted(alpha: float, m: int) -> int:
    return int(math.floor(alpha * m + 1e-9))


def contaminate(
    data: Dataset,
    part: Partition,
    alpha: float,
    scheme: CorruptionScheme | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[Dataset, Partition]:
    """Replace the data of ``floor(alpha * m)`` randomly chosen subsets.

    BLR: responses are redrawn from the scheme, covariates are kept.
    GMM: observations are redrawn from the scheme.
    """
    if not 0.0 <= alpha < 0.5:
        raise ValueError("alpha must lie in [0, 0.5)")
    k = n_corrupted(alpha, part.m)
    if k == 0:
        return data, replace(part, corrupted=frozenset())
    if rng is None:
        raise ValueError("an rng is required when alpha > 0")
    if scheme is None:
        scheme = BLR_CORRUPTION if data.kind is ModelKind.BLR else GMM_CORRUPTION
    bad = np.sort(rng.choice(part.m, size=k, replace=False))
    idx = np.concatenate([part.subsets[b] for b in bad])
    draws = scheme.mean + math.sqrt(scheme.var) * rng.standard_normal(idx.size)
    if data.kind is ModelKind.BLR:
        y = data.y.copy()
        y[idx] = draws
        new = Dataset(data.kind, data.x, y)
    else:
        x = data.x.copy()
        x[idx] = draws
        new = Dataset(data.kind, x)
    return new, replace(part, corrupted=frozenset(int(b) for b in bad))


def load_csv(path, kind, header: bool = False) -> Dataset:
    """Read a numeric CSV: BLR columns ``x_1..x_p,y``; GMM a single column ``x``."""
    kind = ModelKind(kind)
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(f"{path}: row {lineno}, column {col}: cannot parse {cell!r}") from None
                if not math.isfinite(v):
                    raise ValueError(f"{path}: row {lineno}, column {col}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows)
    if kind is ModelKind.BLR:
        if arr.shape[1] < 2:
            raise ValueError(f"{path}: BLR needs at least one covariate column and y")
        return Dataset(kind, arr[:, :-1], arr[:, -1])
    if arr.shape[1] != 1:
        raise ValueError(f"{path}: GMM expects a single column, got {arr.shape[1]}")
    return Dataset(kind, arr[:, 0])


def write_csv(data: Dataset, path, header: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if data.kind is ModelKind.BLR:
            if header:
                w.writerow([f"x_{i + 1}" for i in range(data.dim)] + ["y"])
            for xi, yi in zip(data.x, data.y):
                w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])
        else:
            if header:
                w.writerow(["x"])
            for xi in data.x:
                w.writerow([repr(float(xi))])
