"""Figure rendering for dqdsim preset CSV outputs."""

__version__ = "0.1.0"

from .render import (FigureSpec, PanelSpec, SchemaError, Series, build_figure,
                     build_spec, read_series, render)
