"""Render result charts from bamsim timeseries.csv files.

The renderer consumes only the documented CSV schema (header below) and
never imports the simulator. One image per (scenario, chart kind):
cumulative blocked / established counts as one line per allocation model
plus a final-total bar panel, and utilization as fraction-over-time lines.
Output is deterministic: identical CSV input yields identical image bytes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "bamsim-figures"


class SchemaMismatch(ValueError):
    """A CSV header does not match the documented timeseries schema."""

    def __init__(self, column: str, detail: str = ""):
        self.column = column
        super().__init__(f"schema mismatch on column {column!r}" + (f": {detail}" if detail else ""))


class MissingScenario(ValueError):
    """A complete render needs scenarios 1-4; one was absent."""

    def __init__(self, scenario: int):
        self.scenario = scenario
        super().__init__(f"results directory has no rows for scenario {scenario}")


CHART_KINDS = ("blocked", "established", "utilization")
MODEL_ORDER = ("mam", "rdm", "atcs")

# Fixed columns of timeseries.csv; index 3 is the headline-link utilization
# column whose name embeds the link (utilization_link_<src>_<dst>).
_FIXED = {
    0: "scenario",
    1: "bam",
    2: "t_hours",
    4: "utilization_network",
    5: "cum_blocked_total",
    6: "cum_established_total",
}
_LINK_PREFIX = "utilization_link_"


@dataclass(frozen=True)
class FigureSpec:
    scenario: int
    kind: str  # blocked | established | utilization
    inputs: tuple[Path, ...]
    output: Path
    per_window: bool = False  # plot per-bin deltas instead of cumulative

    def __post_init__(self) -> None:
        if self.kind not in CHART_KINDS:
            raise ValueError(f"unknown chart kind {self.kind!r}")
        for path in self.inputs:
            if not Path(path).exists():
                raise FileNotFoundError(f"input CSV {path} does not exist")


def _check_header(header: Sequence[str]) -> None:
    for idx, name in _FIXED.items():
        if idx >= len(header) or header[idx] != name:
            raise SchemaMismatch(name, f"expected at position {idx}, header is {list(header)}")
    if not header[3].startswith(_LINK_PREFIX):
        raise SchemaMismatch(header[3] if len(header) > 3 else _LINK_PREFIX + "*",
                             f"column 3 must start with {_LINK_PREFIX!r}")
    if len(header) > 7:
        raise SchemaMismatch(header[7], "unexpected trailing column")


def _scenario_number(label: str) -> int | None:
    try:
        return int(label)
    except ValueError:
        return None


def load_timeseries(paths: Iterable[Path]) -> dict[int, dict[str, dict[str, list[float]]]]:
    """Parse and merge timeseries CSVs into data[scenario][bam][column]."""
    data: dict[int, dict[str, dict[str, list[float]]]] = {}
    for path in paths:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaMismatch("scenario", f"{path} is empty, not even a header")
            _check_header(header)
            for row in reader:
                scenario = _scenario_number(row[0])
                if scenario is None:
                    raise SchemaMismatch("scenario", f"non-numeric label {row[0]!r}")
                series = (
                    data.setdefault(scenario, {})
                    .setdefault(row[1], {"t": [], "link": [], "blocked": [], "established": []})
                )
                series["t"].append(float(row[2]))
                series["link"].append(float(row[3]))
                series["blocked"].append(float(row[5]))
                series["established"].append(float(row[6]))
    return data


def _per_window(values: list[float]) -> list[float]:
    return [values[0], *(b - a for a, b in zip(values, values[1:]))]


def _render_counts(axes, bar_axes, scenario_data, column, per_window):
    finals = []
    for model in MODEL_ORDER:
        series = scenario_data.get(model, {"t": [], column: []})
        values = series[column]
        if per_window and values:
            values = _per_window(values)
        axes.plot(series["t"], values, label=model.upper(), linewidth=1.2)
        finals.append(series[column][-1] if series[column] else 0.0)
    bar_axes.bar(
        [m.upper() for m in MODEL_ORDER],
        finals,
        color=[f"C{i}" for i in range(len(MODEL_ORDER))],
    )
    bar_axes.set_ylabel("total")
    bar_axes.tick_params(axis="x", labelrotation=45)


def _render_utilization(axes, scenario_data):
    for model in MODEL_ORDER:
        series = scenario_data.get(model, {"t": [], "link": []})
        axes.plot(series["t"], series["link"], label=model.upper(), linewidth=1.2)
    axes.set_ylim(0.0, 1.05)


def render(spec: FigureSpec) -> Path:
    """Render one chart; returns the written image path."""
    data = load_timeseries(spec.inputs)
    scenario_data = data.get(spec.scenario, {})

    if spec.kind == "utilization":
        fig, axes = plt.subplots(figsize=(7.0, 4.2), dpi=120)
        _render_utilization(axes, scenario_data)
        axes.set_ylabel("slot utilization (fraction)")
    else:
        fig, (axes, bar_axes) = plt.subplots(
            1, 2, figsize=(8.4, 4.2), dpi=120, width_ratios=(3.0, 1.0)
        )
        column = "blocked" if spec.kind == "blocked" else "established"
        _render_counts(axes, bar_axes, scenario_data, column, spec.per_window)
        label = "requests per bin" if spec.per_window else "cumulative requests"
        axes.set_ylabel(f"{spec.kind} ({label})")

    axes.set_xlabel("time (hours)")
    axes.set_title(f"{spec.kind.capitalize()} - scenario {spec.scenario:02d}")
    axes.legend(loc="best")
    fig.tight_layout()
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    suffix = spec.output.suffix.lower()
    if suffix == ".svg":
        fig.savefig(spec.output, format="svg", metadata={"Date": None})
    else:
        fig.savefig(spec.output)
    plt.close(fig)
    return spec.output


def find_timeseries(results_dir: Path) -> list[Path]:
    direct = results_dir / "timeseries.csv"
    found = [direct] if direct.exists() else []
    found += [p for p in sorted(results_dir.rglob("*/timeseries.csv"))]
    return sorted(set(found))


def render_all(
    results_dir: str | Path,
    out_dir: str | Path,
    image_format: str = "png",
    per_window: bool = False,
) -> list[Path]:
    """Render the full 4-scenario x 3-kind chart grid (12 images)."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir)
    inputs = tuple(find_timeseries(results_dir))
    if not inputs:
        raise MissingScenario(1)
    present = set(load_timeseries(inputs))
    for scenario in (1, 2, 3, 4):
        if scenario not in present:
            raise MissingScenario(scenario)
    written = []
    for scenario in (1, 2, 3, 4):
        for kind in CHART_KINDS:
            spec = FigureSpec(
                scenario=scenario,
                kind=kind,
                inputs=inputs,
                output=out_dir / f"fig_s{scenario}_{kind}.{image_format}",
                per_window=per_window and kind != "utilization",
            )
            written.append(render(spec))
    return written
