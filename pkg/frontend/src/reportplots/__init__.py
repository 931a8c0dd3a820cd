"""Static report figures for seasonal regionalization chain outputs."""

__version__ = "0.1.0"

from .render import ALL_FIGURES, PlotSpec, RenderError, RenderResult, render
