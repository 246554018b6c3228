"""Figure rendering for benchmark artifact directories.

Reads only the documented CSV/JSON files written by the benchmark CLI;
deliberately imports nothing from the ecdiff package itself.
"""

from .render_figures import KINDS, FigureSpec, SchemaError, main, render

__all__ = ["KINDS", "FigureSpec", "SchemaError", "main", "render"]
