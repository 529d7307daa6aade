import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, strategies as st

from m3vb.plotting import box_stats, emit_boxplot, emit_lineplot, parse_plot_spec, render_spec, spec_filename

SVG = "{http://www.w3.org/2000/svg}"


def _records():
    rows = []
    for mode in ("M3VB_ONE_STEP", "WASP"):
        for n in (100, 200):
            for rep in range(5):
                rows.append({"mode": mode, "n": n, "m": 20, "repetition": rep,
                             "l2_error": 0.1 * rep + (0.5 if mode == "WASP" else 0.0) + 10.0 / n,
                             "kl_to_reference": math.nan, "wall_time_seconds": 0.01 * rep})
    return rows


def _groups_with_id(path, prefix):
    root = ET.parse(path).getroot()
    return [g for g in root.iter(f"{SVG}g") if (g.get("id") or "").startswith(prefix)]


class TestLineplot:
    def test_one_series_two_points(self, tmp_path):
        rows = [r for r in _records() if r["mode"] == "WASP"]
        path = emit_lineplot(rows, "n", "l2_error", tmp_path / "a.svg")
        series = _groups_with_id(path, "series-")
        assert len(series) == 1
        # direct children only; marker glyphs live in a nested <defs>
        paths = series[0].findall(f"{SVG}path")
        assert len(paths) == 1
        assert len(series[0].findall(f".//{SVG}use")) == 2
        # the polyline is a move-to plus one line-to
        assert len(re.findall(r"[ML]", paths[0].get("d"))) == 2

    def test_series_and_logx(self, tmp_path):
        path = emit_lineplot(_records(), "n", "error", tmp_path / "b.svg", series="mode", logx=True)
        assert len(_groups_with_id(path, "series-")) == 2
        assert "M3VB_ONE_STEP" in path.read_text()

    def test_unknown_field_named(self, tmp_path):
        with pytest.raises(ValueError, match="'bogus'"):
            emit_lineplot(_records(), "n", "bogus", tmp_path / "c.svg")

    def test_empty_records(self, tmp_path):
        with pytest.raises(ValueError):
            emit_lineplot([], "n", "l2_error", tmp_path / "d.svg")

    def test_deterministic_bytes(self, tmp_path):
        a = emit_lineplot(_records(), "n", "l2_error", tmp_path / "e1.svg", series="mode")
        b = emit_lineplot(_records(), "n", "l2_error", tmp_path / "e2.svg", series="mode")
        assert a.read_bytes() == b.read_bytes()


class TestBoxplot:
    def test_quartiles_linear(self):
        st_ = box_stats([1, 2, 3, 4, 5])
        assert (st_["q1"], st_["med"], st_["q3"]) == (2.0, 3.0, 4.0)
        assert (st_["whislo"], st_["whishi"]) == (1.0, 5.0)
        assert st_["fliers"].size == 0

    def test_outlier(self):
        st_ = box_stats([1, 2, 3, 4, 100])
        assert st_["whishi"] == 4.0 and list(st_["fliers"]) == [100.0]

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
    def test_box_definition(self, vals):
        s = box_stats(vals)
        v = np.array(vals)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        assert (s["q1"], s["med"], s["q3"]) == (q1, med, q3)
        lo, hi = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
        inside = v[(v >= lo) & (v <= hi)]
        assert s["whislo"] == inside.min() and s["whishi"] == inside.max()
        assert s["fliers"].size + inside.size == v.size

    def test_empty_group_warned_in_margin(self, tmp_path):
        rows = _records()
        for r in rows:
            if r["mode"] == "WASP" and r["n"] == 200:
                r["l2_error"] = math.nan
        path = emit_boxplot(rows, ["mode", "n"], "l2_error", tmp_path / "box.svg")
        text = path.read_text()
        assert "skipped empty groups: mode=WASP, n=200" in text
        assert _groups_with_id(path, "margin-warning")

    def test_deterministic_bytes(self, tmp_path):
        a = emit_boxplot(_records(), "mode", "l2_error", tmp_path / "b1.svg")
        b = emit_boxplot(_records(), "mode", "l2_error", tmp_path / "b2.svg")
        assert a.read_bytes() == b.read_bytes()


class TestSpecs:
    @pytest.mark.parametrize("spec, kind, kw", [
        ("lineplot:error-vs-n", "lineplot", {"x": "n", "y": "error", "series": None, "logx": False}),
        ("lineplot:kl-vs-n:mode:logx", "lineplot", {"x": "n", "y": "kl", "series": "mode", "logx": True}),
        ("boxplot:l2_error-by-mode,n", "boxplot", {"value": "l2_error", "group_by": ["mode", "n"]}),
    ])
    def test_parse(self, spec, kind, kw):
        assert parse_plot_spec(spec) == (kind, kw)

    @pytest.mark.parametrize("spec", ["scatter:a-vs-b", "lineplot:error", "boxplot:x-by-", ""])
    def test_parse_errors(self, spec):
        with pytest.raises(ValueError):
            parse_plot_spec(spec)

    def test_render_default_name(self, tmp_path):
        path = render_spec(_records(), "boxplot:l2-by-mode", tmp_path)
        assert path.name == spec_filename("boxplot:l2-by-mode") == "boxplot_l2-by-mode.svg"
        assert path.exists()
