"""Selector interface, test-level aggregation and ranking."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..errors import ConfigError, CovsteerError, NotFittedError, TrainingError
from ..numerics import Adam, Parameter, backward, mse, no_grad


@dataclass(frozen=True)
class ModelHyper:
    d_model: int = 32
    heads: int = 2
    enc_layers: int = 2
    ffn_dim: int = 64
    lstm_hidden: int = None  # default ceil(F / 2)
    ae_hidden: tuple = None  # default (2X, X, ceil(X / 2)) for input width X, mirrored
    epochs: int = 20
    batch: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dropout: float = 0.1
    trees: int = 100
    subsample: int = 256

    def __post_init__(self):
        if self.d_model % self.heads:
            raise ConfigError("d_model must be divisible by heads")
        for name in ("d_model", "heads", "enc_layers", "ffn_dim", "epochs", "batch", "trees", "subsample"):
            if getattr(self, name) < 1:
                raise ConfigError(f"ModelHyper.{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.ae_hidden is not None:
            object.__setattr__(self, "ae_hidden", tuple(int(v) for v in self.ae_hidden))

    def lstm_width(self, F):
        return self.lstm_hidden or math.ceil(F / 2)

    def ae_widths(self, X):
        enc = self.ae_hidden or (2 * X, X, math.ceil(X / 2))
        return tuple(enc) + tuple(reversed(enc[:-1]))

    def to_dict(self):
        d = asdict(self)
        if d["ae_hidden"] is not None:
            d["ae_hidden"] = list(d["ae_hidden"])
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown ModelHyper fields: {sorted(unknown)}")
        return cls(**d)


def is_proportional(widths) -> bool:
    """Each layer is 2x, 1/2x or 1x its predecessor (halving may round either way)."""
    def ok(a, b):
        return b == a or b in (a // 2, math.ceil(a / 2)) or a in (b // 2, math.ceil(b / 2))
    return all(ok(a, b) for a, b in zip(widths, widths[1:]))


def glorot(rng, fan_in, fan_out, name=""):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out)), name=name)


def zeros(shape, name=""):
    return Parameter(np.zeros(shape), name=name)


@dataclass
class NoveltyScore:
    test_id: int
    window_scores: list
    s_test: float = field(init=False)

    def __post_init__(self):
        if len(self.window_scores) == 0:
            raise CovsteerError(f"test {self.test_id} has no window scores")
        self.s_test = sum(s * s for s in self.window_scores) / len(self.window_scores)


def sequence_score(position_errors) -> np.ndarray:
    """Window score: mean of per-position reconstruction errors."""
    position_errors = np.asarray(position_errors, dtype=np.float64)
    return position_errors.mean(axis=-1)


def aggregate_test(window_scores, owner, n_tests=None) -> np.ndarray:
    """Test score: mean of squared window scores of each test.

    ``owner[j]`` is the test position of window ``j``. Returns one score per
    position ``0..n_tests-1``; every position must own at least one window.
    """
    window_scores = np.asarray(window_scores, dtype=np.float64)
    owner = np.asarray(owner, dtype=np.int64)
    n_tests = int(owner.max()) + 1 if n_tests is None else n_tests
    counts = np.bincount(owner, minlength=n_tests)
    if np.any(counts == 0):
        raise CovsteerError("every test needs at least one window score")
    return np.bincount(owner, weights=window_scores ** 2, minlength=n_tests) / counts


def rank_tests(ids, scores, batch: int, rng) -> list:
    """Top ``batch`` ids by descending score; ties broken uniformly at random.

    With ``scores=None`` the order is a uniform random permutation.
    """
    if batch < 1:
        raise ConfigError("batch must be >= 1")
    ids = np.asarray(ids)
    if scores is None:
        order = rng.permutation(len(ids))
    else:
        scores = np.asarray(scores, dtype=np.float64)
        order = np.lexsort((rng.random(len(ids)), -scores))
    return ids[order[:batch]].tolist()


class NoveltySelector:
    """Common interface: ``fit`` on training windows, then score windows.

    Windows are arrays of shape ``(n, L, F)``.
    """

    name = "base"
    needs_fit = True

    def __init__(self, hyper: ModelHyper = ModelHyper()):
        self.hyper = hyper
        self.fitted = False

    def fit(self, windows, seed: int = 0):
        raise NotImplementedError

    def score_windows(self, windows) -> np.ndarray:
        raise NotImplementedError

    def score_window(self, window) -> float:
        w = np.asarray(getattr(window, "vectors", window), dtype=np.float64)
        return float(self.score_windows(w[None])[0])

    def _require_fit(self):
        if not self.fitted:
            raise NotFittedError(f"{self.name} selector used before fit()")


class RandomSelector(NoveltySelector):
    name = "RD"
    needs_fit = False

    def fit(self, windows, seed=0):
        self.fitted = True
        return self

    def score_windows(self, windows):
        return np.zeros(len(windows))


class ReconstructionSelector(NoveltySelector):
    """Selectors that score a window by how badly a trained model rebuilds it."""

    def __init__(self, hyper: ModelHyper = ModelHyper()):
        super().__init__(hyper)
        self.model = None
        self.losses = []

    def build(self, L, F, rng):
        raise NotImplementedError

    def fit(self, windows, seed=0, epochs=None):
        windows = np.asarray(windows, dtype=np.float64)
        if windows.ndim != 3 or len(windows) == 0:
            raise ConfigError("fit() needs a non-empty (n, L, F) window array")
        rng = np.random.default_rng(seed)
        n, L, F = windows.shape
        self.model = self.build(L, F, rng)
        self.fitted = True
        self.losses = train_reconstruction(self.model, windows, self.hyper, rng, epochs=epochs)
        return self

    def position_errors(self, windows, chunk=8192) -> np.ndarray:
        """Per-position mean squared reconstruction error, shape ``(n, L)``."""
        self._require_fit()
        windows = np.asarray(windows, dtype=np.float64)
        out = []
        with no_grad():
            for s in range(0, len(windows), chunk):
                x = windows[s:s + chunk]
                r = self.model.forward(x, training=False).data
                out.append(((x - r) ** 2).mean(axis=-1))
        return np.concatenate(out) if out else np.zeros((0, windows.shape[1]))

    def score_windows(self, windows):
        return sequence_score(self.position_errors(windows))


def train_reconstruction(model, windows, hyper: ModelHyper, rng, epochs=None):
    """Minibatch Adam on the reconstruction loss; returns per-epoch mean loss."""
    opt = Adam(model.parameters(), lr=hyper.lr, beta1=hyper.beta1, beta2=hyper.beta2, eps=hyper.eps)
    n = len(windows)
    history = []
    for _ in range(hyper.epochs if epochs is None else epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, hyper.batch):
            x = windows[order[s:s + hyper.batch]]
            opt.zero_grad()
            loss = mse(model.forward(x, training=True, rng=rng), x)
            if not np.isfinite(loss.data):
                raise TrainingError("reconstruction loss is not finite")
            backward(loss)
            opt.step()
            total += float(loss.data) * len(x)
        history.append(total / n)
    return history
