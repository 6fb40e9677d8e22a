"""Novelty-driven test selection for coverage closure on a synthetic crossbar DUV."""

from .params import DuvParams
from .stimgen import Test, Transaction, gen_corpus, load_corpus, save_corpus
from .duvsim import simulate, simulate_events, enumerate_products
from .coverage import CoverageState
from .selectors import METHODS, ModelHyper, make_selector
from .seloop import LoopConfig, RunHistory, run
from .harness import ExperimentConfig, run_experiment, net_savings, savings

__version__ = "0.1.0"

__all__ = [
    "DuvParams", "Test", "Transaction", "gen_corpus", "load_corpus", "save_corpus", "simulate",
    "simulate_events", "enumerate_products", "CoverageState", "METHODS", "ModelHyper", "make_selector",
    "LoopConfig", "RunHistory", "run", "ExperimentConfig", "run_experiment", "net_savings", "savings",
]
