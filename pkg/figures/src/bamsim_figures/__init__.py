"""Chart rendering for bamsim experiment results."""

__version__ = "0.1.0"

from .render import (
    CHART_KINDS,
    FigureSpec,
    MissingScenario,
    SchemaMismatch,
    render,
    render_all,
)

__all__ = [
    "CHART_KINDS",
    "FigureSpec",
    "MissingScenario",
    "SchemaMismatch",
    "render",
    "render_all",
]
