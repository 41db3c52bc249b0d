"""Figure rendering for orbitgrad run directories.

Consumes only the documented run-directory files (trace.csv, elements.json,
metrics.json, density.csv, landscape/bestsofar CSVs, summary.json) and never
recomputes a metric or touches the inputs.
"""

from .figures import KINDS, FigureSpec, render
from .schema import SchemaError

__all__ = ["KINDS", "FigureSpec", "render", "SchemaError"]
