"""Novelty selectors and score aggregation."""

from ..errors import ConfigError
from .base import (
    ModelHyper,
    NoveltyScore,
    NoveltySelector,
    RandomSelector,
    ReconstructionSelector,
    aggregate_test,
    is_proportional,
    rank_tests,
    sequence_score,
)
from .flat_ae import FlatAESelector
from .iforest import IForestSelector, IsolationForest, c_factor
from .lstm_ae import LSTMSelector
from .transformer import TransformerSelector

SELECTORS = {
    "RD": RandomSelector,
    "AE": FlatAESelector,
    "IF": IForestSelector,
    "TE": TransformerSelector,
    "LSTM": LSTMSelector,
}
METHODS = tuple(SELECTORS)


def make_selector(name: str, hyper: ModelHyper = ModelHyper()) -> NoveltySelector:
    try:
        cls = SELECTORS[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown selector {name!r}; choose from {', '.join(METHODS)}") from None
    return cls(hyper)


__all__ = [
    "SELECTORS", "METHODS", "make_selector", "ModelHyper", "NoveltyScore", "NoveltySelector",
    "RandomSelector", "ReconstructionSelector", "FlatAESelector", "IForestSelector", "IsolationForest",
    "LSTMSelector", "TransformerSelector", "aggregate_test", "rank_tests", "sequence_score",
    "is_proportional", "c_factor",
]
