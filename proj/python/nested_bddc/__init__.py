"""Nested BDDC for mixed RT0/P0 Darcy problems on the unit square."""

from ._core import (
    ExperimentSpec,
    Problem,
    ResultRow,
    hierarchy_summary,
    nested_solve,
    preset,
    preset_names,
    run_table,
)

__all__ = [
    "ExperimentSpec",
    "Problem",
    "ResultRow",
    "hierarchy_summary",
    "nested_solve",
    "preset",
    "preset_names",
    "run_table",
]
