"""Metric-vs-steps SVG charts aggregated across seeded runs."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import ParseError  # noqa: E402
from .strategies import METRIC_COLUMNS  # noqa: E402

NUMERIC_COLUMNS = ("iteration", "env_steps", "level_id", "regret", "f_gae", "buffer_size",
                   "buffer_diversity", "eval_solved_rate", "eval_mean_return", "seed")


def read_metrics(path) -> list[dict]:
    """Parse one metrics.csv; numeric cells become floats, empty cells None."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: missing header row")
        for i, col in enumerate(METRIC_COLUMNS):
            if i >= len(header) or header[i] != col:
                raise ParseError(f"{path}: expected column {col!r} at position {i}")
        if len(header) != len(METRIC_COLUMNS):
            raise ParseError(f"{path}: unexpected column {header[len(METRIC_COLUMNS)]!r}")
        rows = []
        for line_no, cells in enumerate(reader, start=2):
            if len(cells) != len(header):
                raise ParseError(f"{path}:{line_no}: {len(cells)} cells, expected {len(header)}")
            row = {}
            for col, cell in zip(header, cells):
                if col in NUMERIC_COLUMNS:
                    try:
                        row[col] = float(cell) if cell != "" else None
                    except ValueError as exc:
                        raise ParseError(f"{path}:{line_no}: column {col!r} is not numeric") from exc
                else:
                    row[col] = cell
            rows.append(row)
    return rows


@dataclass
class Curve:
    strategy: str
    steps: np.ndarray      # x: env steps, averaged over runs at each aligned iteration
    center: np.ndarray
    lower: np.ndarray | None
    upper: np.ndarray | None
    num_runs: int


def aggregate_runs(runs: Sequence[list[dict]], metric: str, agg: str = "mean",
                   strategy: str = "") -> Curve:
    """Align runs on iteration and summarise ``metric`` across them.

    Only iterations where every run has a value are kept. With ``mean`` the
    band is mean +- standard error (ddof 1); with ``median`` it spans the
    inter-quartile range. A single run gets no band.
    """
    if agg not in ("mean", "median"):
        raise ValueError(f"unknown aggregation {agg!r}")
    tables = []
    for rows in runs:
        tables.append({int(r["iteration"]): (r["env_steps"], r[metric]) for r in rows if r[metric] is not None})
    common = sorted(set.intersection(*(set(t) for t in tables))) if tables else []
    if not common:
        empty = np.zeros(0)
        return Curve(strategy, empty, empty, None, None, len(runs))
    steps = np.array([[t[i][0] for i in common] for t in tables]).mean(axis=0)
    values = np.array([[t[i][1] for i in common] for t in tables])   # (runs, points)
    n = len(values)
    lower = upper = None
    if agg == "mean":
        center = values.mean(axis=0)
        if n > 1:
            half = values.std(axis=0, ddof=1) / np.sqrt(n)
            lower, upper = center - half, center + half
    else:
        center = np.median(values, axis=0)
        if n > 1:
            lower, upper = np.percentile(values, [25, 75], axis=0)
    return Curve(strategy, steps, center, lower, upper, n)


def group_by_strategy(paths) -> dict[str, list[list[dict]]]:
    groups: dict[str, list[list[dict]]] = {}
    for p in paths:
        rows = read_metrics(p)
        if not rows:
            continue
        groups.setdefault(rows[0]["strategy"], []).append(rows)
    return groups


def plot_metrics(paths, metric: str, out, agg: str = "mean") -> list[Curve]:
    """Write an SVG of ``metric`` against env steps, one line (and band) per strategy."""
    if metric not in NUMERIC_COLUMNS:
        raise ParseError(f"column {metric!r} is not a plottable metric")
    curves = [aggregate_runs(runs, metric, agg, name) for name, runs in sorted(group_by_strategy(paths).items())]

    plt.rcParams["svg.hashsalt"] = "uedlab"
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for c in curves:
        if len(c.steps) == 0:
            continue
        line, = ax.plot(c.steps, c.center, label=f"{c.strategy} (n={c.num_runs})", gid=f"mean-{c.strategy}")
        if c.lower is not None:
            ax.fill_between(c.steps, c.lower, c.upper, alpha=0.25, color=line.get_color(),
                            linewidth=0, gid=f"band-{c.strategy}")
    ax.set_xlabel("env steps")
    ax.set_ylabel(metric)
    if any(len(c.steps) for c in curves):
        ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return curves
