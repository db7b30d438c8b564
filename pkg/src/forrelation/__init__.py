"""k-fold Forrelation: exact evaluation, query circuits and a desk-scale NMR model."""
from .core import (
    Classification,
    ForrelationInstance,
    Label,
    classical_query_cost,
    classify,
    find_instances,
    forrelation,
    forrelation_bruteforce,
    showcase_instances,
)
from .oracle import BooleanFunction, CountingOracle, format_diagonal, parse_diagonal, walsh_spectrum

__all__ = [
    "BooleanFunction",
    "Classification",
    "CountingOracle",
    "ForrelationInstance",
    "Label",
    "classical_query_cost",
    "classify",
    "find_instances",
    "format_diagonal",
    "forrelation",
    "forrelation_bruteforce",
    "parse_diagonal",
    "showcase_instances",
    "walsh_spectrum",
]
