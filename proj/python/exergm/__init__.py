"""Exact-likelihood exponential random graph models for small networks."""

from ._core import (
    FitResult,
    FormatError,
    FormulaError,
    Graph,
    Network,
    PooledData,
    StatTable,
    TableCache,
    __version__,
    bootstrap,
    fit,
    gof,
    lr_test,
    networks_to_json,
    parse_formula,
    parse_networks,
    read_networks,
    read_result,
    regenerate_fivenets,
    sim_study,
    simulate,
    statistics,
    support_table,
    term_names,
    write_networks,
)

__all__ = [
    "FitResult",
    "FormatError",
    "FormulaError",
    "Graph",
    "Network",
    "PooledData",
    "StatTable",
    "TableCache",
    "__version__",
    "bootstrap",
    "fit",
    "gof",
    "lr_test",
    "networks_to_json",
    "parse_formula",
    "parse_networks",
    "read_networks",
    "read_result",
    "regenerate_fivenets",
    "sim_study",
    "simulate",
    "statistics",
    "support_table",
    "term_names",
    "write_networks",
]
