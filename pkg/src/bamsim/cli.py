"""Command-line entry point: run experiments, write CSV and manifest output.

Output files (column orders are part of the contract, see README):

summary.csv        one row per (bam, replication) with class="total", plus
                   one replication="agg" row per bam where every metric
                   column expands to mean,stddev,ci95 in adjacent columns.
summary_by_class.csv   same schema, one row per traffic class instead of
                   the total; link/network utilization repeats per row.
timeseries.csv     replication-mean series per (bam, bin).
manifest.json      full resolved configuration plus derived per-replication
                   seeds; enough to reproduce the run byte-identically.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bam import BamKind
from .config import (
    ParseError,
    ScenarioConfig,
    ValidationError,
    load_config,
    parse_config_text,
)
from .engine import derive_replication_seed, run_experiment
from .metrics import AggregatedMetrics, RawMetrics
from .topology import Link, LinkId, Topology
from .traffic import TrafficClassSpec


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _link_column(link: LinkId) -> str:
    return f"mean_utilization_link_{link[0]}_{link[1]}"


def _summary_header(headline: LinkId) -> list[str]:
    return [
        "scenario",
        "bam",
        "replication",
        "class",
        "blocked",
        "blocked_bam",
        "blocked_spectrum",
        "established",
        _link_column(headline),
        "mean_utilization_network",
    ]


_METRIC_KEYS = ("blocked", "blocked_bam", "blocked_spectrum", "established")


def _replication_row(rep: RawMetrics, headline: LinkId, class_sel: int | None) -> list[str]:
    if class_sel is None:
        label = "total"
        counts = [rep.totals()[key] for key in _METRIC_KEYS]
    else:
        label = str(class_sel)
        counts = [
            int(rep.blocked[class_sel]),
            int(rep.blocked_bam[class_sel]),
            int(rep.blocked_spectrum[class_sel]),
            int(rep.established[class_sel]),
        ]
    return [
        rep.scenario,
        rep.bam,
        str(rep.replication),
        label,
        *[str(c) for c in counts],
        _fmt(rep.link_mean_utilization[headline]),
        _fmt(rep.network_mean_utilization),
    ]


def _agg_row(agg: AggregatedMetrics, class_sel: int | None) -> list[str]:
    suffix = "total" if class_sel is None else f"class_{class_sel}"
    label = "total" if class_sel is None else str(class_sel)
    cells = [agg.scenario, agg.bam, "agg", label]
    for key in _METRIC_KEYS:
        stats = agg.scalar(f"{key}_{suffix}")
        cells += [_fmt(stats.mean), _fmt(stats.stddev), _fmt(stats.ci95)]
    for key in ("mean_utilization_link", "mean_utilization_network"):
        stats = agg.scalar(key)
        cells += [_fmt(stats.mean), _fmt(stats.stddev), _fmt(stats.ci95)]
    return cells


def render_summary_csv(
    results: dict[BamKind, AggregatedMetrics],
    headline: LinkId,
    *,
    per_class: bool,
) -> str:
    lines = [",".join(_summary_header(headline))]
    for agg in results.values():
        class_range = (
            range(len(agg.per_replication[0].class_names)) if per_class else [None]
        )
        for rep in agg.per_replication:
            for sel in class_range:
                lines.append(",".join(_replication_row(rep, headline, sel)))
        for sel in class_range:
            lines.append(",".join(_agg_row(agg, sel)))
    return "\n".join(lines) + "\n"


def render_timeseries_csv(
    results: dict[BamKind, AggregatedMetrics], headline: LinkId
) -> str:
    header = [
        "scenario",
        "bam",
        "t_hours",
        f"utilization_link_{headline[0]}_{headline[1]}",
        "utilization_network",
        "cum_blocked_total",
        "cum_established_total",
    ]
    lines = [",".join(header)]
    for agg in results.values():
        for i, t in enumerate(agg.bin_t):
            lines.append(
                ",".join(
                    [
                        agg.scenario,
                        agg.bam,
                        _fmt(float(t)),
                        _fmt(float(agg.link_utilization_mean[i])),
                        _fmt(float(agg.network_utilization_mean[i])),
                        _fmt(float(agg.cum_blocked_mean[i])),
                        _fmt(float(agg.cum_established_mean[i])),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def config_to_manifest(config: ScenarioConfig) -> dict:
    return {
        "generator": {"name": "bamsim", "version": __version__},
        "scenario": {
            "name": config.name,
            "total_requests": config.total_requests,
            "replications": config.replications,
            "base_seed": config.base_seed,
            "utilization_bin_h": config.bin_width_h,
            "hold_time_mean_h": config.hold_mean_h,
            "bams": [kind.value for kind in config.bam_kinds],
            "output_dir": config.output_dir,
        },
        "topology": {
            "links": [
                {"src": link.src, "dst": link.dst, "capacity_slots": link.capacity}
                for link in config.topology.links
            ]
        },
        "classes": [
            {
                "index": spec.index,
                "name": spec.name,
                "demand_slots": spec.demand_slots,
                "inter_arrival_h": spec.inter_arrival_h,
                "start_delay_h": spec.start_delay_h,
                "path": list(spec.path),
                "share_pct": spec.share_pct,
            }
            for spec in config.classes
        ],
        "replication_seeds": [
            derive_replication_seed(config.base_seed, rep)
            for rep in range(config.replications)
        ],
    }


def config_from_manifest(manifest: dict) -> ScenarioConfig:
    """Rebuild the resolved scenario a manifest.json records."""
    scn = manifest["scenario"]
    topology = Topology(
        Link(entry["src"], entry["dst"], entry["capacity_slots"])
        for entry in manifest["topology"]["links"]
    )
    classes = tuple(
        TrafficClassSpec(
            index=entry["index"],
            name=entry["name"],
            demand_slots=entry["demand_slots"],
            inter_arrival_h=entry["inter_arrival_h"],
            start_delay_h=entry["start_delay_h"],
            path=tuple(entry["path"]),
            share_pct=entry["share_pct"],
        )
        for entry in manifest["classes"]
    )
    return ScenarioConfig(
        name=scn["name"],
        topology=topology,
        classes=classes,
        bam_kinds=tuple(BamKind.parse(k) for k in scn["bams"]),
        total_requests=scn["total_requests"],
        replications=scn["replications"],
        base_seed=scn["base_seed"],
        bin_width_h=scn["utilization_bin_h"],
        hold_mean_h=scn["hold_time_mean_h"],
        output_dir=scn["output_dir"],
    )


def write_outputs(
    config: ScenarioConfig,
    results: dict[BamKind, AggregatedMetrics],
    out_dir: str | Path,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    headline = config.headline_link
    (out / "summary.csv").write_text(
        render_summary_csv(results, headline, per_class=False), encoding="utf-8"
    )
    (out / "summary_by_class.csv").write_text(
        render_summary_csv(results, headline, per_class=True), encoding="utf-8"
    )
    (out / "timeseries.csv").write_text(
        render_timeseries_csv(results, headline), encoding="utf-8"
    )
    (out / "manifest.json").write_text(
        json.dumps(config_to_manifest(config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bamsim",
        description="Elastic optical network slot-allocation simulator with "
        "per-class bandwidth allocation models (MAM, RDM, ATCS).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario and write CSV results")
    run.add_argument("--config", required=True, help="scenario config file or bundled preset name")
    run.add_argument(
        "--bam",
        default=None,
        help="comma-separated subset of mam,rdm,atcs or 'all' (default: config)",
    )
    run.add_argument("--requests", type=int, default=None, help="override total_requests")
    run.add_argument("--reps", type=int, default=None, help="override replications")
    run.add_argument("--seed", type=int, default=None, help="override base seed")
    run.add_argument("--out", default=None, help="output directory (default: config)")
    run.add_argument("--jobs", type=int, default=1, help="parallel replications")
    run.add_argument(
        "--audit",
        action="store_true",
        help="enable per-event consistency audits (slower)",
    )
    return parser


def run_scenario(
    config: ScenarioConfig, *, jobs: int = 1, audit: bool = False
) -> dict[BamKind, AggregatedMetrics]:
    return run_experiment(config, jobs=jobs, audit=audit)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.bam is not None:
            text = args.bam.strip().lower()
            overrides["bam_kinds"] = (
                (BamKind.MAM, BamKind.RDM, BamKind.ATCS)
                if text == "all"
                else tuple(BamKind.parse(part) for part in text.split(","))
            )
        if args.requests is not None:
            overrides["total_requests"] = args.requests
        if args.reps is not None:
            overrides["replications"] = args.reps
        if args.seed is not None:
            overrides["base_seed"] = args.seed
        if args.out is not None:
            overrides["output_dir"] = args.out
        if overrides:
            config = config.override(**overrides)
        if config.total_requests < 0 or config.replications < 1:
            raise ValidationError("requests must be >= 0 and replications >= 1")
        results = run_scenario(config, jobs=max(1, args.jobs), audit=args.audit)
        write_outputs(config, results, config.output_dir)
    except (ParseError, ValidationError, ValueError, OSError) as exc:
        print(f"bamsim: error: {exc}", file=sys.stderr)
        return 1
    out = Path(config.output_dir)
    for name in ("summary.csv", "summary_by_class.csv", "timeseries.csv", "manifest.json"):
        print(out / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
