"""Figure and table builder for trackplan benchmark outputs."""

from .figures import DELTA_ENVELOPE_PP, FIGURE_KINDS, FigureSpec, render
from .io import SchemaError

__all__ = ["DELTA_ENVELOPE_PP", "FIGURE_KINDS", "FigureSpec", "render",
           "SchemaError"]
