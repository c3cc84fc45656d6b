"""Scenario configuration: file format, validation, bundled presets.

Config files are INI-style key/value sections with units spelled in the
field names. The exact grammar:

    [scenario]
    name = 01                  # label written to the CSV scenario column
    total_requests = 1000000   # merged arrivals per replication
    replications = 10
    base_seed = 42
    utilization_bin_h = 100    # sample-grid bin width, hours
    bams = mam, rdm, atcs      # or "all"
    hold_time_mean_h = 2500    # optional, defaults to 2500

    [topology]
    link_capacity_slots = 400            # default capacity
    links = 14->4, 4->2, 4->7, 4->5      # "a->b" or "a->b:capacity"

    [class.0]                  # section index = class index = priority rank
    name = Bronze              # larger index = higher priority
    demand_slots = 1
    inter_arrival_h = 40
    start_delay_h = 5000
    path = 14 -> 4 -> 2
    share_pct = 20             # shares must sum to 100

Four presets matching the bundled traffic scenarios ship inside the package
(scenario01.cfg .. scenario04.cfg); load_config falls back to them when the
given path does not exist on disk.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path as FsPath

from .bam import BamConfig, BamKind
from .topology import Link, LinkId, NoSuchLink, Topology, UnknownNode
from .traffic import HOLD_TIME_MEAN_H, TrafficClassSpec


class ParseError(ValueError):
    """Config file is syntactically malformed or a field fails to parse."""


class ValidationError(ValueError):
    """Config parsed but violates a scenario invariant."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    topology: Topology
    classes: tuple[TrafficClassSpec, ...]
    bam_kinds: tuple[BamKind, ...]
    total_requests: int
    replications: int
    base_seed: int
    bin_width_h: float
    hold_mean_h: float = HOLD_TIME_MEAN_H
    output_dir: str = "results"

    @property
    def headline_link(self) -> LinkId:
        """Link reported in the per-link CSV columns: first link declared."""
        return self.topology.links[0].id

    def override(self, **kwargs) -> "ScenarioConfig":
        return replace(self, **kwargs)


def _validate(config: ScenarioConfig) -> ScenarioConfig:
    if config.total_requests < 0:
        raise ValidationError("total_requests must be >= 0")
    if config.replications < 1:
        raise ValidationError("replications must be >= 1")
    if config.bin_width_h <= 0:
        raise ValidationError("utilization_bin_h must be positive")
    if not config.classes:
        raise ValidationError("need at least one [class.N] section")
    indexes = [spec.index for spec in config.classes]
    if indexes != list(range(len(config.classes))):
        raise ValidationError(f"class indexes must be 0..C-1, got {indexes}")
    share_sum = sum(spec.share_pct for spec in config.classes)
    if abs(share_sum - 100.0) > 1e-9:
        raise ValidationError(f"class shares sum to {share_sum:g}, expected 100")
    for spec in config.classes:
        try:
            config.topology.resolve_path(spec.path)
        except (UnknownNode, NoSuchLink) as exc:
            raise ValidationError(
                f"class {spec.name}: path {spec.path} does not resolve: {exc}"
            ) from exc
    shares = [spec.share_pct for spec in config.classes]
    for link in config.topology.links:
        try:
            BamConfig.from_shares(shares, link.capacity)
        except ValueError as exc:
            raise ValidationError(
                f"link {link.src}->{link.dst}: {exc}"
            ) from exc
    return config


def _parse_link(token: str, default_capacity: int) -> Link:
    body, _, cap_part = token.partition(":")
    src_part, arrow, dst_part = body.partition("->")
    if not arrow:
        raise ParseError(f"[topology] links: expected 'a->b', got {token!r}")
    try:
        src, dst = int(src_part), int(dst_part)
        capacity = int(cap_part) if cap_part else default_capacity
    except ValueError:
        raise ParseError(f"[topology] links: bad entry {token!r}") from None
    return Link(src, dst, capacity)


def _get(parser: configparser.ConfigParser, section: str, key: str, cast, default=None):
    if not parser.has_option(section, key):
        if default is not None:
            return default
        raise ParseError(f"[{section}] missing required field {key!r}")
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (TypeError, ValueError):
        raise ParseError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _parse_bams(raw: str) -> tuple[BamKind, ...]:
    text = raw.strip().lower()
    if text == "all":
        return (BamKind.MAM, BamKind.RDM, BamKind.ATCS)
    try:
        kinds = tuple(BamKind.parse(part) for part in text.split(","))
    except ValueError as exc:
        raise ParseError(f"[scenario] bams: {exc}") from None
    if len(set(kinds)) != len(kinds):
        raise ParseError(f"[scenario] bams: duplicate entry in {raw!r}")
    return kinds


def _parse_node_seq(raw: str) -> tuple[int, ...]:
    parts = raw.replace("->", ",").split(",")
    return tuple(int(p) for p in parts)


def parse_config_text(text: str, *, source: str = "<config>") -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None

    for section in ("scenario", "topology"):
        if not parser.has_section(section):
            raise ParseError(f"missing required section [{section}]")

    default_capacity = _get(parser, "topology", "link_capacity_slots", int, default=0)
    links_raw = _get(parser, "topology", "links", str)
    links = []
    for token in links_raw.split(","):
        token = token.strip()
        if not token:
            continue
        if ":" not in token and default_capacity <= 0:
            raise ParseError(
                "[topology] link_capacity_slots required when a link has no "
                f"explicit capacity: {token!r}"
            )
        links.append(_parse_link(token, default_capacity))
    try:
        topology = Topology(links)
    except ValueError as exc:
        raise ValidationError(f"[topology] {exc}") from exc

    class_sections = sorted(
        (s for s in parser.sections() if s.startswith("class.")),
        key=lambda s: s.split(".", 1)[1],
    )
    classes = []
    for section in class_sections:
        try:
            index = int(section.split(".", 1)[1])
        except ValueError:
            raise ParseError(f"[{section}]: class suffix must be an integer") from None
        try:
            spec = TrafficClassSpec(
                index=index,
                name=_get(parser, section, "name", str, default=f"class{index}"),
                demand_slots=_get(parser, section, "demand_slots", int),
                inter_arrival_h=_get(parser, section, "inter_arrival_h", float),
                start_delay_h=_get(parser, section, "start_delay_h", float),
                path=_get(parser, section, "path", _parse_node_seq),
                share_pct=_get(parser, section, "share_pct", float),
            )
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ValidationError(f"[{section}] {exc}") from exc
        classes.append(spec)
    classes.sort(key=lambda spec: spec.index)

    config = ScenarioConfig(
        name=_get(parser, "scenario", "name", str),
        topology=topology,
        classes=tuple(classes),
        bam_kinds=_parse_bams(_get(parser, "scenario", "bams", str, default="all")),
        total_requests=_get(parser, "scenario", "total_requests", int),
        replications=_get(parser, "scenario", "replications", int),
        base_seed=_get(parser, "scenario", "base_seed", int, default=1),
        bin_width_h=_get(parser, "scenario", "utilization_bin_h", float, default=100.0),
        hold_mean_h=_get(
            parser, "scenario", "hold_time_mean_h", float, default=HOLD_TIME_MEAN_H
        ),
        output_dir=_get(parser, "scenario", "output_dir", str, default="results"),
    )
    return _validate(config)


def bundled_scenario_names() -> tuple[str, ...]:
    files = resources.files("bamsim.scenarios")
    return tuple(
        sorted(p.name for p in files.iterdir() if p.name.endswith(".cfg"))
    )


def load_config(path: str | FsPath) -> ScenarioConfig:
    """Parse a scenario config from disk, or from the bundled presets when
    the path does not exist and its basename matches a preset name."""
    fs_path = FsPath(path)
    if fs_path.exists():
        return parse_config_text(
            fs_path.read_text(encoding="utf-8"), source=str(fs_path)
        )
    name = fs_path.name
    files = resources.files("bamsim.scenarios")
    candidate = files / name
    if name in bundled_scenario_names():
        return parse_config_text(candidate.read_text(encoding="utf-8"), source=name)
    raise ParseError(
        f"config file {path} not found (bundled presets: "
        f"{', '.join(bundled_scenario_names())})"
    )
