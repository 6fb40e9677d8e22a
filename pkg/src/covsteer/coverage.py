"""Hit-count tracking over the coverage-product universe."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field

from .duvsim import GROUPS, CoverageEvent, enumerate_products
from .errors import CoverageError
from .params import DuvParams


@dataclass
class CoverageState:
    universe: frozenset
    hits: Counter = field(default_factory=Counter)
    checkpoints: list = field(default_factory=list)  # (tests_simulated, coverage_percent)
    tests_simulated: int = 0

    @classmethod
    def for_params(cls, params: DuvParams = DuvParams()):
        return cls(universe=enumerate_products(params))

    def absorb(self, events, tests: int = 0):
        """Count ``events``; ``tests`` is how many simulated tests produced them."""
        for ev in events:
            if ev not in self.universe:
                raise CoverageError(f"coverage key {ev!r} is not in the product universe")
        self.hits.update(events)
        self.tests_simulated += tests
        return self

    def checkpoint(self):
        point = (self.tests_simulated, self.coverage_percent())
        if self.checkpoints:
            prev = self.checkpoints[-1]
            if point[0] < prev[0] or point[1] < prev[1]:
                raise CoverageError("checkpoints must be nondecreasing")
        self.checkpoints.append(point)
        return point

    @property
    def n_covered(self):
        return sum(1 for c in self.hits.values() if c > 0)

    def coverage_percent(self) -> float:
        if not self.universe:
            return 0.0
        return 100.0 * self.n_covered / len(self.universe)

    def group_percent(self, group: str) -> float:
        members = [k for k in self.universe if k.group == group]
        if not members:
            return 0.0
        return 100.0 * sum(1 for k in members if self.hits.get(k, 0) > 0) / len(members)

    def remaining(self) -> list:
        return sorted(k for k in self.universe if self.hits.get(k, 0) == 0)

    def rarity_histogram(self) -> dict:
        """Number of products per hit count (0 = uncovered)."""
        return dict(sorted(Counter(self.hits.get(k, 0) for k in self.universe).items()))

    def copy(self):
        return CoverageState(self.universe, Counter(self.hits), list(self.checkpoints), self.tests_simulated)


def absorb(state: CoverageState, events, tests: int = 0) -> CoverageState:
    return state.absorb(events, tests)


def coverage_percent(state: CoverageState) -> float:
    return state.coverage_percent()


def remaining(state: CoverageState) -> list:
    return state.remaining()


def write_checkpoints_csv(state: CoverageState, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tests_simulated", "coverage_percent"])
        for tests, pct in state.checkpoints:
            w.writerow([tests, f"{pct:.6f}"])


__all__ = ["CoverageState", "CoverageEvent", "GROUPS", "absorb", "coverage_percent", "remaining",
           "write_checkpoints_csv"]
