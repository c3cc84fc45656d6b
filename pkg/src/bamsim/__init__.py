"""Elastic optical network slot-allocation simulator comparing per-class
bandwidth allocation models (MAM, RDM, AllocTC-Sharing)."""

__version__ = "0.1.0"

from .bam import BamConfig, BamKind, BamState, admit
from .config import ScenarioConfig, load_config
from .engine import run_experiment, run_replication
from .metrics import AggregatedMetrics, RawMetrics, aggregate
from .spectrum import SlotRange, SpectrumGrid, first_fit
from .topology import Link, Path, Topology, nsfnet_partial_topology
from .traffic import Request, TrafficClassSpec, generate_arrivals, scenario_presets

__all__ = [
    "AggregatedMetrics",
    "BamConfig",
    "BamKind",
    "BamState",
    "Link",
    "Path",
    "RawMetrics",
    "Request",
    "ScenarioConfig",
    "SlotRange",
    "SpectrumGrid",
    "Topology",
    "TrafficClassSpec",
    "admit",
    "aggregate",
    "first_fit",
    "generate_arrivals",
    "load_config",
    "nsfnet_partial_topology",
    "run_experiment",
    "run_replication",
    "scenario_presets",
]
