"""Publication figures from sparsecl CSV output directories.

This package only reads the documented CSV contract (accuracy_matrix.csv,
traces.csv, entropy.csv, heatmap.csv, sweep.csv); it never touches
checkpoints or recomputes metrics.
"""

from .contract import (
    FIGURE_KINDS,
    MissingColumnError,
    MissingContractFileError,
    PlotContractError,
    PlotJob,
)
from .render import render

__all__ = [
    "FIGURE_KINDS",
    "MissingColumnError",
    "MissingContractFileError",
    "PlotContractError",
    "PlotJob",
    "render",
]

__version__ = "0.1.0"
