"""Static-figure renderer for twoscale analysis CSVs."""

from .render import FigureRequest, SchemaError, render

__version__ = "0.1.0"
