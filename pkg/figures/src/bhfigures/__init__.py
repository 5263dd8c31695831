"""Publication-style figures from the cavity-array simulation CSVs."""

__version__ = "0.1.0"

from .csvio import SchemaError, read_table
from .render import FigureSpec, RenderInfo, load_spec, render

__all__ = ["SchemaError", "read_table", "FigureSpec", "RenderInfo",
           "load_spec", "render", "__version__"]
