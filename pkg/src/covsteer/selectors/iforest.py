"""Isolation forest on flattened windows (baseline)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ConfigError
from .base import ModelHyper, NoveltySelector


@lru_cache(maxsize=None)
def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def c_factor(m: int) -> float:
    """Average unsuccessful-search path length in a BST of ``m`` points."""
    if m <= 1:
        return 0.0
    return 2.0 * harmonic(m - 1) - 2.0 * (m - 1) / m


@dataclass
class IsolationTree:
    feature: np.ndarray  # -1 at external nodes
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray  # training points reaching each node
    depth: np.ndarray

    def path_length(self, X) -> np.ndarray:
        """Depth of the external node reached plus ``c(size)`` of that node."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] < self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return self.depth[node] + _c_vec(self.size[node])


def _c_vec(sizes):
    return _c_table(int(sizes.max()) if len(sizes) else 0)[sizes]


@lru_cache(maxsize=32)
def _c_table(n):
    return np.array([c_factor(m) for m in range(n + 1)])


def build_tree(X, height_limit, rng) -> IsolationTree:
    feature, threshold, left, right, size, depth = [], [], [], [], [], []

    def new_node(n, d):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(n)
        depth.append(d)
        return len(feature) - 1

    stack = [(new_node(len(X), 0), np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        d = depth[node]
        if d >= height_limit or len(idx) <= 1:
            continue
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        splittable = np.flatnonzero(hi > lo)
        if splittable.size == 0:
            continue  # all points identical
        q = int(rng.choice(splittable))
        p = rng.uniform(lo[q], hi[q])
        mask = sub[:, q] < p
        feature[node] = q
        threshold[node] = p
        l_idx, r_idx = idx[mask], idx[~mask]
        left[node] = new_node(len(l_idx), d + 1)
        right[node] = new_node(len(r_idx), d + 1)
        stack.append((left[node], l_idx))
        stack.append((right[node], r_idx))

    return IsolationTree(np.array(feature), np.array(threshold), np.array(left), np.array(right),
                         np.array(size), np.array(depth, dtype=np.float64))


class IsolationForest:
    def __init__(self, n_trees=100, subsample=256):
        self.n_trees = n_trees
        self.subsample = subsample
        self.trees = []
        self.sample_size = None

    def fit(self, X, rng):
        X = np.asarray(X, dtype=np.float64)
        if len(X) < 2:
            raise ConfigError("isolation forest needs at least 2 training points")
        m = min(self.subsample, len(X))
        limit = math.ceil(math.log2(m))
        self.sample_size = m
        self.trees = [build_tree(X[rng.choice(len(X), size=m, replace=False)], limit, rng)
                      for _ in range(self.n_trees)]
        return self

    def mean_path_length(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.mean([t.path_length(X) for t in self.trees], axis=0)

    def score(self, X):
        """2 ** (-E[h(x)] / c(m)), in (0, 1); higher is more anomalous."""
        return np.power(2.0, -self.mean_path_length(X) / c_factor(self.sample_size))


class IForestSelector(NoveltySelector):
    name = "IF"

    def __init__(self, hyper: ModelHyper = ModelHyper()):
        super().__init__(hyper)
        self.forest = None

    def fit(self, windows, seed=0):
        windows = np.asarray(windows, dtype=np.float64)
        rng = np.random.default_rng(seed)
        self.forest = IsolationForest(self.hyper.trees, self.hyper.subsample).fit(
            windows.reshape(len(windows), -1), rng)
        self.fitted = True
        return self

    def score_windows(self, windows):
        self._require_fit()
        windows = np.asarray(windows, dtype=np.float64)
        return self.forest.score(windows.reshape(len(windows), -1))
