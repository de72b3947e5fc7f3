"""Post-processing figures for simulator CSV outputs."""

from .figures import (  # noqa: F401
    FigureSpec,
    SchemaMismatch,
    load_series,
    load_sweep,
    plot_ladder,
    plot_phase,
    plot_series,
)

__version__ = "0.1.0"
