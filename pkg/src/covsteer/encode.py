"""Transaction encoding (standardise + one-hot) and window sampling.

Per-object helpers (``encode_txn``, ``sample_windows``) follow the textbook
definitions. ``CorpusEncoding`` does the same work in bulk for the selection
loop, which re-encodes the whole corpus after every refit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EncodingError
from .params import DuvParams
from .stimgen import NUMERIC_FIELDS, BurstKind, Priority, TType

CONSTANT_STD = 1e-12


@dataclass(frozen=True)
class FeatureSchema:
    categories: tuple  # ((name, (cat0, cat1, ...)), ...)
    numeric: tuple = NUMERIC_FIELDS

    @classmethod
    def for_params(cls, params: DuvParams = DuvParams()):
        return cls(
            categories=(
                ("ttype", tuple(TType)),
                ("master", tuple(range(params.M))),
                ("slave", tuple(range(params.S))),
                ("burst_kind", tuple(BurstKind)),
                ("priority", tuple(Priority)),
            )
        )

    @property
    def onehot_dim(self):
        return sum(len(c) for _, c in self.categories)

    @property
    def dim(self):
        return self.onehot_dim + len(self.numeric)

    def block_offsets(self):
        out, pos = [], 0
        for _, cats in self.categories:
            out.append(pos)
            pos += len(cats)
        return out

    def to_dict(self):
        return {
            "categories": [[name, [c.value if hasattr(c, "value") else c for c in cats]]
                           for name, cats in self.categories],
            "numeric": list(self.numeric),
            "dim": self.dim,
        }


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool mask; constant attributes are centred only

    @property
    def scale(self):
        return np.where(self.constant, 1.0, self.std)

    def transform(self, numeric):
        return (np.asarray(numeric, dtype=np.float64) - self.mean) / self.scale

    @classmethod
    def from_array(cls, numeric):
        numeric = np.asarray(numeric, dtype=np.float64)
        if numeric.ndim != 2 or numeric.shape[0] == 0:
            raise ConfigError("cannot fit a standardizer on zero transactions")
        mean = numeric.mean(axis=0)
        std = numeric.std(axis=0)  # population statistics
        return cls(mean=mean, std=std, constant=std < CONSTANT_STD)

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "constant": self.constant.tolist()}


def numeric_row(txn):
    return [getattr(txn, f) for f in NUMERIC_FIELDS]


def fit_standardizer(tests) -> Standardizer:
    """Population mean/stddev of every numeric attribute over all transactions."""
    rows = [numeric_row(t) for test in tests for t in test.txns]
    if not rows:
        raise ConfigError("cannot fit a standardizer on zero transactions")
    return Standardizer.from_array(np.array(rows, dtype=np.float64))


def encode_txn(txn, schema: FeatureSchema, standardizer: Standardizer) -> np.ndarray:
    vec = np.zeros(schema.dim)
    pos = 0
    for name, cats in schema.categories:
        value = getattr(txn, name)
        try:
            vec[pos + cats.index(value)] = 1.0
        except ValueError:
            raise EncodingError(f"unknown category {value!r} for attribute {name!r}") from None
        pos += len(cats)
    vec[pos:] = standardizer.transform(np.array(numeric_row(txn), dtype=np.float64))
    return vec


@dataclass(frozen=True)
class Window:
    """``L`` encoded transactions of one test.

    Row ``p`` holds transaction ``offset + p``; a negative ``offset`` (tests
    shorter than ``L``) means the leading rows are zero padding.
    """

    test_id: int
    offset: int
    vectors: np.ndarray


def window_offsets(n: int, L: int, step: int) -> list:
    """Start offsets of the windows sampled from a test of ``n`` transactions."""
    if L < 1 or step < 1:
        raise ConfigError("window length and step must be >= 1")
    if step > L:
        # a stride longer than the window would skip transactions
        raise ConfigError(f"step ({step}) must not exceed the window length ({L})")
    if n < L:
        return [n - L]
    offsets = list(range(0, n - L + 1, step))
    tail = n - L
    if offsets[-1] + L < n and tail != offsets[-1]:
        offsets.append(tail)
    return offsets


def sample_windows(test, L: int, step: int, schema: FeatureSchema = None,
                   standardizer: Standardizer = None) -> list:
    """Slice ``test`` into windows of ``L`` encoded transactions.

    Without a standardizer numeric attributes are left unscaled.
    """
    schema = schema or FeatureSchema.for_params()
    if standardizer is None:
        k = len(schema.numeric)
        standardizer = Standardizer(np.zeros(k), np.ones(k), np.zeros(k, dtype=bool))
    enc = np.array([encode_txn(t, schema, standardizer) for t in test.txns])
    out = []
    for off in window_offsets(len(test.txns), L, step):
        rows = np.zeros((L, schema.dim))
        for p in range(L):
            if off + p >= 0:
                rows[p] = enc[off + p]
        out.append(Window(test.test_id, off, rows))
    return out


class CorpusEncoding:
    """Bulk encoder for a fixed corpus.

    Categorical one-hot blocks and raw numeric attributes are computed once;
    ``windows`` standardises with any fitted ``Standardizer`` and gathers
    window tensors of shape ``(n_windows, L, F)``.
    """

    def __init__(self, corpus, params: DuvParams = DuvParams(), schema: FeatureSchema = None):
        self.schema = schema or FeatureSchema.for_params(params)
        self.test_ids = [t.test_id for t in corpus]
        lengths = np.array([len(t.txns) for t in corpus])
        self.starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        self.lengths = lengths
        txns = [x for t in corpus for x in t.txns]
        self.numeric = np.array([numeric_row(x) for x in txns], dtype=np.float64)
        onehot = np.zeros((len(txns), self.schema.onehot_dim))
        col = 0
        for name, cats in self.schema.categories:
            lookup = {c: i for i, c in enumerate(cats)}
            try:
                codes = np.array([lookup[getattr(x, name)] for x in txns])
            except KeyError as exc:
                raise EncodingError(f"unknown category {exc.args[0]!r} for attribute {name!r}") from None
            onehot[np.arange(len(txns)), col + codes] = 1.0
            col += len(cats)
        self.onehot = onehot

    def numeric_of(self, indices):
        """Raw numeric rows of the tests at positions ``indices``."""
        rows = np.concatenate([np.arange(self.starts[i], self.starts[i] + self.lengths[i]) for i in indices])
        return self.numeric[rows]

    def fit_standardizer(self, indices) -> Standardizer:
        return Standardizer.from_array(self.numeric_of(indices))

    def encoded(self, standardizer: Standardizer) -> np.ndarray:
        return np.hstack([self.onehot, standardizer.transform(self.numeric)])

    def window_rows(self, indices, L, step):
        """Row indices (``-1`` = padding) and owning test position per window."""
        rows, owner = [], []
        for i in indices:
            base, n = self.starts[i], self.lengths[i]
            for off in window_offsets(int(n), L, step):
                r = np.arange(off, off + L)
                rows.append(np.where(r >= 0, base + r, -1))
                owner.append(i)
        return np.array(rows, dtype=np.int64).reshape(-1, L), np.array(owner, dtype=np.int64)

    def windows(self, indices, L, step, standardizer: Standardizer):
        rows, owner = self.window_rows(indices, L, step)
        enc = np.vstack([self.encoded(standardizer), np.zeros((1, self.schema.dim))])
        return enc[rows], owner
