"""LSTM autoencoder over windows of encoded transactions."""

from __future__ import annotations

import numpy as np

from ..numerics import Tensor, concat, matmul, reshape, sigmoid, tanh
from .base import ReconstructionSelector, glorot, zeros


def lstm_cell(z, c, H):
    """Gate pre-activations ``z`` (B, 4H) ordered i, f, o, g."""
    ifo = sigmoid(z[:, : 3 * H])
    g = tanh(z[:, 3 * H:])
    i, f, o = ifo[:, :H], ifo[:, H: 2 * H], ifo[:, 2 * H:]
    c = f * c + i * g
    return o * tanh(c), c


class LSTMAutoencoder:
    """Encoder LSTM -> last hidden state repeated L times -> decoder LSTM -> affine."""

    def __init__(self, L, F, hidden, rng):
        self.L, self.F, self.H = L, F, hidden
        H = hidden
        self.enc_wx = glorot(rng, F, 4 * H, "enc_wx")
        self.enc_wh = glorot(rng, H, 4 * H, "enc_wh")
        self.enc_b = zeros(4 * H, "enc_b")
        self.dec_wx = glorot(rng, H, 4 * H, "dec_wx")
        self.dec_wh = glorot(rng, H, 4 * H, "dec_wh")
        self.dec_b = zeros(4 * H, "dec_b")
        # forget-gate bias 1
        self.enc_b.data[H: 2 * H] = 1.0
        self.dec_b.data[H: 2 * H] = 1.0
        self.out_w = glorot(rng, H, F, "out_w")
        self.out_b = zeros(F, "out_b")

    def parameters(self):
        return [self.enc_wx, self.enc_wh, self.enc_b, self.dec_wx, self.dec_wh, self.dec_b,
                self.out_w, self.out_b]

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x.data if isinstance(x, Tensor) else x)
        B, L, _ = x.shape
        H = self.H
        h = Tensor(np.zeros((B, H)))
        c = Tensor(np.zeros((B, H)))
        xw = matmul(Tensor(x), self.enc_wx)  # (B, L, 4H)
        for t in range(L):
            z = xw[:, t, :] + matmul(h, self.enc_wh) + self.enc_b
            h, c = lstm_cell(z, c, H)

        drive = matmul(h, self.dec_wx) + self.dec_b  # same decoder input every step
        h = Tensor(np.zeros((B, H)))
        c = Tensor(np.zeros((B, H)))
        steps = []
        for _ in range(L):
            h, c = lstm_cell(drive + matmul(h, self.dec_wh), c, H)
            steps.append(reshape(h, (B, 1, H)))
        return matmul(concat(steps, axis=1), self.out_w) + self.out_b


class LSTMSelector(ReconstructionSelector):
    name = "LSTM"

    def build(self, L, F, rng):
        return LSTMAutoencoder(L, F, self.hyper.lstm_width(F), rng)
