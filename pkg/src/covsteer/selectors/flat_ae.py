"""Fully connected autoencoder on the flattened window (baseline)."""

from __future__ import annotations

import numpy as np

from ..numerics import Tensor, matmul, no_grad, relu, reshape
from .base import ReconstructionSelector, glorot, zeros


class DenseAutoencoder:
    def __init__(self, L, F, widths, rng):
        self.L, self.F = L, F
        dims = [L * F] + list(widths) + [L * F]
        self.weights = [glorot(rng, a, b, f"w{i}") for i, (a, b) in enumerate(zip(dims, dims[1:]))]
        self.biases = [zeros(b, f"b{i}") for i, b in enumerate(dims[1:])]

    def parameters(self):
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x.data if isinstance(x, Tensor) else x)
        B = x.shape[0]
        h = Tensor(x.reshape(B, -1))
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = matmul(h, w) + b
            if i < last:
                h = relu(h)
        return reshape(h, x.shape)


class FlatAESelector(ReconstructionSelector):
    """Scores the whole flattened window at once; there are no per-position
    outputs, so the window score is the reconstruction error of the flat vector."""

    name = "AE"

    def build(self, L, F, rng):
        return DenseAutoencoder(L, F, self.hyper.ae_widths(L * F), rng)

    def score_windows(self, windows, chunk=8192):
        self._require_fit()
        windows = np.asarray(windows, dtype=np.float64)
        out = []
        with no_grad():
            for s in range(0, len(windows), chunk):
                x = windows[s:s + chunk]
                r = self.model.forward(x).data
                out.append(((x - r) ** 2).reshape(len(x), -1).mean(axis=1))
        return np.concatenate(out) if out else np.zeros(0)
