"""Reduction techniques, one callable per presolver: fn(ws) -> None."""

from .cleanup import fix_variables, model_cleanup, tiny_entries
from .lindep import lin_dependencies
from .parallel import parallel_rows_linking, parallel_rows_local
from .permutation import permute
from .singletons import singleton_cols, singleton_rows
from .tightening import bound_tightening

__all__ = [
    "tiny_entries", "model_cleanup", "fix_variables",
    "singleton_rows", "singleton_cols", "bound_tightening",
    "parallel_rows_local", "parallel_rows_linking",
    "permute", "lin_dependencies",
]
