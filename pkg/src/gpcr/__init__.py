"""Generalized probabilistic cops and robbers: game model, solvers and oracles."""

from .game import Distribution, GameError, GameSpec, SpecBuilder, check_valid, validate
from .graph import Graph, GraphError, parse_edge_list

__version__ = "0.1.0"

__all__ = [
    "Distribution",
    "GameError",
    "GameSpec",
    "Graph",
    "GraphError",
    "SpecBuilder",
    "check_valid",
    "parse_edge_list",
    "validate",
]
