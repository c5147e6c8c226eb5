"""Figures for dampedwave experiment CSVs.

Consumes only the CSV files (header row, data rows, fit footer rows) written
by the dampedwave CLI; predictions are read from the footers, never
recomputed here.
"""

from .render import PlotSpec, render

__version__ = "0.1.0"
