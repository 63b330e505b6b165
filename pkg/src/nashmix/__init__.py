"""Search-and-mix solvers and bound analysis for approximate Nash equilibria."""

from .errors import InputError, NashmixError, SearchError, SolverError
from .game import (
    BimatrixGame,
    MixedStrategy,
    RegretPair,
    Side,
    best_response,
    load_game,
    normalize,
    random_game,
    regrets,
)

__all__ = [
    "BimatrixGame",
    "InputError",
    "MixedStrategy",
    "NashmixError",
    "RegretPair",
    "SearchError",
    "Side",
    "SolverError",
    "best_response",
    "load_game",
    "normalize",
    "random_game",
    "regrets",
]

__version__ = "0.1.0"
