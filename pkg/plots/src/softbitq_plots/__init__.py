"""Render experiment CSVs into figures.

A pure post-processor: it reads the versioned CSV files the simulation
harness writes and produces deterministic PNG figures. No simulation
logic lives here and input files are never modified.
"""

from .figures import KINDS, FigureSpec, build_figure, render
from .schema import SchemaError, read_rows

__version__ = "0.1.0"

__all__ = ["FigureSpec", "KINDS", "SchemaError", "build_figure",
           "read_rows", "render", "__version__"]
