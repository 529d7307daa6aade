"""SVG line and box plots of experiment records.

Figures are drawn with matplotlib's object API and saved through its SVG
backend with a fixed hash salt and no date stamp, so identical records give
identical bytes.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np
from matplotlib import rc_context
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

ALIASES = {
    "error": "l2_error",
    "l2": "l2_error",
    "kl": "kl_to_reference",
    "time": "wall_time_seconds",
}

_RC = {"svg.hashsalt": "m3vb", "svg.fonttype": "none", "path.simplify": False}


def resolve_field(records, name: str) -> str:
    """Map an alias to a column and check that the column exists."""
    if not records:
        raise ValueError("no records to plot")
    col = ALIASES.get(name, name)
    if col not in records[0]:
        raise ValueError(f"unknown field {name!r}; available: {', '.join(records[0])}")
    return col


def _finite(values):
    out = []
    for v in values:
        if isinstance(v, (int, float)) and math.isfinite(v):
            out.append(float(v))
    return out


def _sort_key(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0, str(v))


def box_stats(values) -> dict:
    """Median, quartiles (linear interpolation), 1.5 IQR whiskers and outliers."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("box_stats of an empty group")
    q1, med, q3 = np.percentile(x, [25, 50, 75], method="linear")
    iqr = q3 - q1
    inside = x[(x >= q1 - 1.5 * iqr) & (x <= q3 + 1.5 * iqr)]
    return {
        "med": float(med), "q1": float(q1), "q3": float(q3),
        "whislo": float(inside.min()), "whishi": float(inside.max()),
        "fliers": x[(x < q1 - 1.5 * iqr) | (x > q3 + 1.5 * iqr)],
    }


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with rc_context(_RC):
        FigureCanvasSVG(fig)
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def emit_lineplot(records, x: str, y: str, path, series: str | None = None, logx: bool = False) -> Path:
    """Median of ``y`` across repetitions against ``x``, one line per series.

    The band around each line spans the 25th to 75th percentiles.
    """
    x = resolve_field(records, x)
    y = resolve_field(records, y)
    series = resolve_field(records, series) if series else None
    groups: dict = {}
    for r in records:
        groups.setdefault(r[series] if series else "", {}).setdefault(r[x], []).append(r[y])
    with rc_context(_RC):
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.add_subplot()
        for i, name in enumerate(sorted(groups, key=_sort_key)):
            pts = []
            for xv in sorted(groups[name], key=_sort_key):
                vals = _finite(groups[name][xv])
                if vals:
                    pts.append((xv, *np.percentile(vals, [25, 50, 75])))
            if not pts:
                continue
            xs = [p[0] for p in pts]
            (line,) = ax.plot(xs, [p[2] for p in pts], marker="o", label=str(name) or y)
            line.set_gid(f"series-{i}")
            ax.fill_between(xs, [p[1] for p in pts], [p[3] for p in pts],
                            alpha=0.2, color=line.get_color(), linewidth=0)
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(x)
        ax.set_ylabel(f"{y} (median, IQR band)")
        if series:
            ax.legend(title=series)
        fig.tight_layout()
        return _save(fig, path)


def emit_boxplot(records, group_by, value: str, path) -> Path:
    """One box per combination of ``group_by`` values.

    Groups without a single finite value are skipped and listed in the figure
    margin.
    """
    if isinstance(group_by, str):
        group_by = [group_by]
    group_by = [resolve_field(records, g) for g in group_by]
    value = resolve_field(records, value)
    groups: dict = {}
    for r in records:
        groups.setdefault(tuple(r[g] for g in group_by), []).append(r[value])
    stats, labels, skipped = [], [], []
    for key in sorted(groups, key=lambda k: tuple(_sort_key(v) for v in k)):
        label = ", ".join(f"{g}={v}" for g, v in zip(group_by, key))
        vals = _finite(groups[key])
        if not vals:
            skipped.append(label)
            continue
        st = box_stats(vals)
        st["label"] = label
        stats.append(st)
        labels.append(label)
    with rc_context(_RC):
        fig = Figure(figsize=(max(6.0, 0.6 * len(stats) + 2.0), 4.5))
        ax = fig.add_subplot()
        if stats:
            ax.bxp(stats, showfliers=True)
            ax.tick_params(axis="x", labelrotation=60, labelsize=7)
        ax.set_ylabel(value)
        if skipped:
            fig.text(0.01, 0.01, "skipped empty groups: " + "; ".join(skipped),
                     fontsize=7, color="firebrick", gid="margin-warning")
        fig.tight_layout()
        return _save(fig, path)


_LINE = re.compile(r"^lineplot:(?P<y>[A-Za-z0-9_]+)-vs-(?P<x>[A-Za-z0-9_]+)(?::(?P<series>[A-Za-z0-9_]+))?(?::(?P<log>logx))?$")
_BOX = re.compile(r"^boxplot:(?P<value>[A-Za-z0-9_]+)-by-(?P<groups>[A-Za-z0-9_]+(?:,[A-Za-z0-9_]+)*)$")


def parse_plot_spec(spec: str) -> tuple[str, dict]:
    """Parse ``lineplot:<y>-vs-<x>[:<series>][:logx]`` or ``boxplot:<value>-by-<f1>[,<f2>...]``."""
    m = _LINE.match(spec)
    if m:
        return "lineplot", {"x": m["x"], "y": m["y"], "series": m["series"], "logx": bool(m["log"])}
    m = _BOX.match(spec)
    if m:
        return "boxplot", {"value": m["value"], "group_by": m["groups"].split(",")}
    raise ValueError(f"cannot parse plot spec {spec!r}")


def spec_filename(spec: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", spec) + ".svg"


def render_spec(records, spec: str, out_dir, path=None) -> Path:
    kind, kw = parse_plot_spec(spec)
    target = Path(path) if path is not None else Path(out_dir) / spec_filename(spec)
    if kind == "lineplot":
        if kw["series"] is None and records and "mode" in records[0]:
            kw["series"] = "mode"
        return emit_lineplot(records, kw["x"], kw["y"], target, series=kw["series"], logx=kw["logx"])
    return emit_boxplot(records, kw["group_by"], kw["value"], target)
