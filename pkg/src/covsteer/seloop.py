"""Closed-loop novelty-driven test selection.

warm-up -> [fit on simulated windows -> score unsimulated tests -> pick a
batch -> simulate -> absorb coverage] until every goal is met or the corpus
runs out.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coverage import CoverageState
from .duvsim import simulate_events
from .encode import CorpusEncoding
from .errors import ConfigError
from .params import DuvParams
from .selectors import ModelHyper, aggregate_test, make_selector, rank_tests


# stream tags for SeedSequence([seed, tag, ...])
_WARMUP, _RANK, _TRAIN = 1, 2, 3


@dataclass(frozen=True)
class LoopConfig:
    warmup_n: int = 50
    batch: int = 100
    goals: tuple = (90.0, 95.0, 97.0)
    seed: int = 0
    selector: str = "LSTM"
    hyper: ModelHyper = ModelHyper()
    window: int = None  # default: pipeline depth D
    step: int = None  # default: window
    refit_standardizer: bool = True
    stop_at_goals: bool = True

    def __post_init__(self):
        if self.warmup_n < 1:
            raise ConfigError("warmup_n must be >= 1")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        goals = tuple(float(g) for g in self.goals)
        if any(not 0 < g <= 100 for g in goals) or any(b <= a for a, b in zip(goals, goals[1:])):
            raise ConfigError(f"goals must be strictly increasing in (0, 100], got {goals}")
        object.__setattr__(self, "goals", goals)
        if self.window is not None and self.window < 1 or self.step is not None and self.step < 1:
            raise ConfigError("window and step must be >= 1")

    def window_len(self, params: DuvParams):
        return self.window or params.D

    def step_len(self, params: DuvParams):
        step = self.step or self.window_len(params)
        if step > self.window_len(params):
            raise ConfigError(f"step ({step}) must not exceed the window length ({self.window_len(params)})")
        return step

    def to_dict(self):
        return {
            "warmup_n": self.warmup_n, "batch": self.batch, "goals": list(self.goals), "seed": self.seed,
            "selector": self.selector, "hyper": self.hyper.to_dict(), "window": self.window,
            "step": self.step, "refit_standardizer": self.refit_standardizer,
            "stop_at_goals": self.stop_at_goals,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "hyper" in d:
            d["hyper"] = ModelHyper.from_dict(d["hyper"])
        if "goals" in d:
            d["goals"] = tuple(d["goals"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad loop config: {exc}") from None


@dataclass
class Iteration:
    index: int  # 0 = warm-up
    selected: list
    tests_simulated: int
    coverage_percent: float
    fit_seconds: float = 0.0
    score_seconds: float = 0.0


@dataclass
class RunHistory:
    method: str
    seed: int
    goals: tuple
    iterations: list = field(default_factory=list)

    @property
    def checkpoints(self):
        return [(it.tests_simulated, it.coverage_percent) for it in self.iterations]

    @property
    def selector_seconds(self):
        return sum(it.fit_seconds + it.score_seconds for it in self.iterations)

    def tests_to_goal(self, goal, interpolate=True):
        """Tests needed to reach ``goal`` percent, or None if never reached.

        With ``interpolate`` the count is linear between the last checkpoint
        below the goal and the first at or above it.
        """
        prev = None
        for tests, pct in self.checkpoints:
            if pct >= goal:
                if not interpolate or prev is None or pct == prev[1]:
                    return float(tests)
                t0, c0 = prev
                return t0 + (goal - c0) / (pct - c0) * (tests - t0)
            prev = (tests, pct)
        return None

    def selected_ids(self):
        return [i for it in self.iterations for i in it.selected]

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write(json.dumps({"method": self.method, "seed": self.seed, "goals": list(self.goals)}) + "\n")
            for it in self.iterations:
                fh.write(json.dumps({
                    "iteration": it.index, "selected": it.selected, "tests_simulated": it.tests_simulated,
                    "coverage_percent": it.coverage_percent, "fit_seconds": round(it.fit_seconds, 6),
                    "score_seconds": round(it.score_seconds, 6),
                }) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        lines = Path(path).read_text().splitlines()
        head = json.loads(lines[0])
        hist = cls(head["method"], head["seed"], tuple(head["goals"]))
        for line in lines[1:]:
            r = json.loads(line)
            hist.iterations.append(Iteration(r["iteration"], r["selected"], r["tests_simulated"],
                                             r["coverage_percent"], r["fit_seconds"], r["score_seconds"]))
        return hist


def warmup_indices(n_tests: int, warmup_n: int, seed: int):
    """Warm-up draw; depends only on the seed so all methods share it."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _WARMUP]))
    return [int(i) for i in rng.choice(n_tests, size=warmup_n, replace=False)]


def run(corpus, selector, duv_params: DuvParams = DuvParams(), config: LoopConfig = LoopConfig(),
        events=None, encoding: CorpusEncoding = None, progress=None) -> RunHistory:
    """Run one selection experiment and return its history.

    ``selector`` is a NoveltySelector or a method name. ``events`` optionally
    caches simulation results per corpus position (simulation is pure);
    ``encoding`` caches the corpus encoding. ``progress`` is called with each
    finished Iteration.
    """
    n = len(corpus)
    if n == 0:
        raise ConfigError("corpus is empty")
    if config.warmup_n > n:
        raise ConfigError(f"warmup_n={config.warmup_n} exceeds corpus size {n}")
    if isinstance(selector, str):
        selector = make_selector(selector, config.hyper)
    if events is None:
        events = {}

    def sim(i):
        if i not in events:
            events[i] = simulate_events(corpus[i], duv_params)
        return events[i]

    L, step = config.window_len(duv_params), config.step_len(duv_params)
    state = CoverageState.for_params(duv_params)
    hist = RunHistory(selector.name, config.seed, config.goals)
    rank_rng = np.random.default_rng(np.random.SeedSequence([config.seed, _RANK]))

    simulated = warmup_indices(n, config.warmup_n, config.seed)
    for i in simulated:
        state.absorb(sim(i), tests=1)
    state.checkpoint()
    hist.iterations.append(Iteration(0, [corpus[i].test_id for i in simulated], state.tests_simulated,
                                     state.coverage_percent()))
    if progress:
        progress(hist.iterations[-1])

    done = np.zeros(n, dtype=bool)
    done[simulated] = True
    fixed_std = None
    it = 0
    while not done.all():
        if config.stop_at_goals and state.coverage_percent() >= config.goals[-1]:
            break
        it += 1
        pool = np.flatnonzero(~done)
        fit_s = score_s = 0.0
        if selector.needs_fit:
            if encoding is None:
                encoding = CorpusEncoding(corpus, duv_params)
            t0 = time.perf_counter()
            sim_idx = np.flatnonzero(done)
            if config.refit_standardizer or fixed_std is None:
                std = encoding.fit_standardizer(sim_idx)
                fixed_std = std
            else:
                std = fixed_std
            train, _ = encoding.windows(sim_idx, L, step, std)
            train_seed = np.random.SeedSequence([config.seed, _TRAIN, it]).generate_state(1)[0]
            selector.fit(train, seed=int(train_seed))
            t1 = time.perf_counter()
            cand, owner = encoding.windows(pool, L, step, std)
            # owner holds corpus positions; map to 0..len(pool)-1
            local = np.searchsorted(pool, owner)
            scores = aggregate_test(selector.score_windows(cand), local, len(pool))
            score_s = time.perf_counter() - t1
            fit_s = t1 - t0
        else:
            scores = None
        picked = rank_tests(pool, scores, config.batch, rank_rng)
        for i in picked:
            state.absorb(sim(i), tests=1)
        done[picked] = True
        state.checkpoint()
        hist.iterations.append(Iteration(it, [corpus[i].test_id for i in picked], state.tests_simulated,
                                         state.coverage_percent(), fit_s, score_s))
        if progress:
            progress(hist.iterations[-1])
    return hist


def replay_coverage(corpus, test_ids, duv_params: DuvParams = DuvParams()) -> float:
    """Coverage of simulating ``test_ids`` from scratch (for replay checks)."""
    by_id = {t.test_id: t for t in corpus}
    state = CoverageState.for_params(duv_params)
    for tid in test_ids:
        state.absorb(simulate_events(by_id[tid], duv_params), tests=1)
    return state.coverage_percent()


__all__ = ["LoopConfig", "RunHistory", "Iteration", "run", "warmup_indices", "replay_coverage"]
