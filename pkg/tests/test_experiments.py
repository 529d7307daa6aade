import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from m3vb.aggregator import AggregatorConfig, Mode
from m3vb.data import ModelKind
from m3vb.experiments import (
    ConfigError,
    ExperimentConfig,
    RunRecord,
    cell_seed,
    columns,
    make_cell_data,
    read_records,
    run_experiment,
    write_records,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _minimal(**kw):
    base = dict(model="BLR", n_grid=[100], m_grid=[20], repetitions=2, modes=["M3VB_ONE_STEP"], base_seed=7)
    base.update(kw)
    return ExperimentConfig.from_dict({"experiment": base})


def _strip_time(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [",".join(line.split(",")[:-1]) for line in lines]


class TestConfig:
    @pytest.mark.parametrize("name", ["ci.toml", "blr_desk.toml", "gmm_desk.toml"])
    def test_shipped_configs_parse(self, name):
        cfg = ExperimentConfig.from_toml(CONFIGS / name)
        assert cfg.repetitions >= 1 and cfg.n_grid and cfg.m_grid

    def test_defaults(self):
        cfg = _minimal()
        assert cfg.model is ModelKind.BLR
        assert cfg.modes == (Mode.M3VB_ONE_STEP,)
        assert cfg.theta == (2.0, -1.0, 0.5, 0.0, 1.5, -0.5)
        assert cfg.solver == AggregatorConfig()

    def test_sections(self):
        cfg = ExperimentConfig.from_dict({
            "experiment": {"model": "gmm", "alpha": 0.1},
            "prior": {"sigma0_sq": 10.0},
            "generator": {"corruption_var": 25.0},
            "solver": {"iterations": 50, "step_decay": 0.0},
            "plots": {"specs": ["boxplot:l2-by-mode"]},
        })
        assert cfg.model is ModelKind.GMM and cfg.K == 3
        assert cfg.prior.sigma0_sq == 10.0
        assert cfg.corruption.var == 25.0 and cfg.corruption.mean == 0.0
        assert cfg.solver.iterations == 50
        assert cfg.plots == ("boxplot:l2-by-mode",)

    @pytest.mark.parametrize("raw", [
        {"experiment": {"model": "BLR", "alpha": 0.5}},
        {"experiment": {"model": "BLR", "repetitions": 0}},
        {"experiment": {"model": "BLR", "n_grid": []}},
        {"experiment": {"model": "BLR", "modes": ["FANCY"]}},
        {"experiment": {"model": "LOGIT"}},
        {"experiment": {}},
        {"experiment": {"model": "BLR", "typo": 1}},
        {"experiment": {"model": "BLR"}, "extra": {}},
        {"experiment": {"model": "BLR"}, "prior": {"alpha": -1.0}},
        {"experiment": {"model": "BLR"}, "prior": {"sigma0_sq": 1.0}},
        {"experiment": {"model": "BLR"}, "solver": {"seed": 3}},
        {"experiment": {"model": "BLR"}, "solver": {"iterations": 0}},
        {"experiment": {"model": "GMM"}, "generator": {"weights": [0.5, 0.5]}},
        {"experiment": {"model": "BLR", "repetitions": 2.5}},
    ])
    def test_invalid(self, raw):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw)

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            ExperimentConfig.from_toml(tmp_path / "missing.toml")
        bad = tmp_path / "bad.toml"
        bad.write_text("[experiment\nmodel=")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_toml(bad)

    def test_full_grids(self):
        cfg = _minimal().with_full_grids()
        assert cfg.n_grid == (100, 200, 400, 600, 1000, 1500, 2000)
        assert cfg.m_grid == (20, 30, 40) and cfg.repetitions == 100


class TestSeeding:
    def test_cell_seed_depends_on_every_key(self):
        base = cell_seed(1, ModelKind.BLR, 20, 100, 0.05, 0)
        variants = [
            cell_seed(2, ModelKind.BLR, 20, 100, 0.05, 0),
            cell_seed(1, ModelKind.GMM, 20, 100, 0.05, 0),
            cell_seed(1, ModelKind.BLR, 30, 100, 0.05, 0),
            cell_seed(1, ModelKind.BLR, 20, 200, 0.05, 0),
            cell_seed(1, ModelKind.BLR, 20, 100, 0.1, 0),
            cell_seed(1, ModelKind.BLR, 20, 100, 0.05, 1),
        ]
        assert len({base, *variants}) == 7

    def test_cell_data_shared_across_modes(self):
        cfg = _minimal(alpha=0.05)
        a = make_cell_data(cfg, 20, 100, 0)
        b = make_cell_data(cfg, 20, 100, 0)
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[2].y, b[2].y)
        assert len(a[3].corrupted) == 1


class TestRecords:
    def test_column_schema(self):
        assert columns(2) == ["model", "mode", "m", "n", "alpha", "repetition", "seed", "status",
                              "l2_error", "kl_to_reference", "mean_1", "mean_2", "wall_time_seconds"]

    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=3, max_size=3))
    def test_float_roundtrip(self, vals):
        import tempfile

        rec = RunRecord("BLR", "POOLED", 20, 100, 0.05, 0, 2**63 + 5, "ok", vals[0], vals[1], (vals[2],), 0.25)
        with tempfile.TemporaryDirectory() as d:
            path = Path(d) / "r.csv"
            write_records([rec], path)
            row = read_records(path)[0]
        assert float(row["l2_error"]) == vals[0]
        assert float(row["kl_to_reference"]) == vals[1]
        assert float(row["mean_1"]) == vals[2]
        assert row["seed"] == 2**63 + 5

    def test_nan_written_empty(self, tmp_path):
        rec = RunRecord("BLR", "MINMAX_POINT", 20, 100, 0.0, 0, 1, "ok", 0.5, math.nan, (1.0,), 0.1)
        write_records([rec], tmp_path / "r.csv")
        line = (tmp_path / "r.csv").read_text().splitlines()[1]
        assert ",0.5,," in line
        assert math.isnan(read_records(tmp_path / "r.csv")[0]["kl_to_reference"])


class TestRun:
    def test_minimal_smoke(self, tmp_path):
        records = run_experiment(_minimal(), output_dir=tmp_path)
        assert len(records) == 2
        assert all(r.status == "ok" and math.isfinite(r.l2_error) for r in records)
        assert sorted(p.name for p in tmp_path.iterdir()) == ["lineplot_l2_error-vs-n_mode.svg", "records.csv"]

    def test_rerun_is_identical_and_worker_count_free(self, tmp_path):
        cfg = _minimal(modes=["M3VB_ONE_STEP", "POOLED", "WASP"], alpha=0.05)
        run_experiment(cfg, output_dir=tmp_path / "a", plots=False)
        run_experiment(cfg, output_dir=tmp_path / "b", plots=False)
        run_experiment(cfg, workers=2, output_dir=tmp_path / "c", plots=False)
        a = _strip_time(tmp_path / "a" / "records.csv")
        assert a == _strip_time(tmp_path / "b" / "records.csv") == _strip_time(tmp_path / "c" / "records.csv")
        keys = [tuple(line.split(",")[1:6]) for line in a[1:]]
        assert len(set(keys)) == len(keys)

    def test_solver_errors_are_recorded(self, tmp_path):
        # MVB needs tractable subset evidence, which the mixture model lacks
        cfg = ExperimentConfig.from_dict({"experiment": {
            "model": "GMM", "n_grid": [30], "m_grid": [3], "repetitions": 1,
            "modes": ["MVB", "POOLED"]}, "solver": {"iterations": 20}})
        records = run_experiment(cfg, output_dir=tmp_path, plots=False)
        by_mode = {r.mode: r for r in records}
        assert by_mode["MVB"].status.startswith("error: UnsupportedModelError")
        assert math.isnan(by_mode["MVB"].l2_error)
        assert by_mode["POOLED"].status == "ok"

    def test_point_estimator_mode(self, tmp_path):
        cfg = _minimal(modes=["MINMAX_POINT"], repetitions=1)
        cfg = dataclasses.replace(cfg, solver=AggregatorConfig(iterations=300))
        (rec,) = run_experiment(cfg, output_dir=tmp_path, plots=False)
        assert rec.status == "ok" and math.isnan(rec.kl_to_reference) and rec.l2_error < 1.0
