"""Transformer encoder trained to reconstruct its input window."""

from __future__ import annotations

import math

import numpy as np

from ..numerics import Parameter, Tensor, dropout, layer_norm, matmul, relu, reshape, softmax, transpose
from .base import ReconstructionSelector, glorot, zeros


def positional_encoding(L, d_model):
    """Sinusoidal encoding: sin on even slots, cos on odd slots."""
    pos = np.arange(L)[:, None]
    i = np.arange(0, d_model, 2)[None, :]
    angle = pos / np.power(10000.0, i / d_model)
    pe = np.zeros((L, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : d_model // 2])
    return pe


def attention(q, k, v, rate=0.0, rng=None, training=False):
    """Scaled dot-product attention over the last two axes.

    Returns the output and the attention weights.
    """
    d_k = q.shape[-1]
    scores = matmul(q, transpose(k)) * (1.0 / math.sqrt(d_k))
    weights = softmax(scores, axis=-1)
    return matmul(dropout(weights, rate, rng, training), v), weights


class EncoderBlock:
    def __init__(self, d, heads, ffn, rng, idx):
        self.d, self.heads = d, heads
        self.w_qkv = glorot(rng, d, 3 * d, f"blk{idx}.w_qkv")
        self.b_qkv = zeros(3 * d, f"blk{idx}.b_qkv")
        self.w_o = glorot(rng, d, d, f"blk{idx}.w_o")
        self.b_o = zeros(d, f"blk{idx}.b_o")
        self.ln1_g = Parameter(np.ones(d), f"blk{idx}.ln1_g")
        self.ln1_b = zeros(d, f"blk{idx}.ln1_b")
        self.w_1 = glorot(rng, d, ffn, f"blk{idx}.w_1")
        self.b_1 = zeros(ffn, f"blk{idx}.b_1")
        self.w_2 = glorot(rng, ffn, d, f"blk{idx}.w_2")
        self.b_2 = zeros(d, f"blk{idx}.b_2")
        self.ln2_g = Parameter(np.ones(d), f"blk{idx}.ln2_g")
        self.ln2_b = zeros(d, f"blk{idx}.ln2_b")

    def parameters(self):
        return [self.w_qkv, self.b_qkv, self.w_o, self.b_o, self.ln1_g, self.ln1_b,
                self.w_1, self.b_1, self.w_2, self.b_2, self.ln2_g, self.ln2_b]

    def forward(self, x, rate, rng, training):
        B, L, d = x.shape
        h, dk = self.heads, d // self.heads
        qkv = matmul(x, self.w_qkv) + self.b_qkv

        def split(t):
            return transpose(reshape(t, (B, L, h, dk)), (0, 2, 1, 3))

        q, k, v = (split(qkv[:, :, j * d:(j + 1) * d]) for j in range(3))
        ctx, _ = attention(q, k, v, rate, rng, training)
        ctx = reshape(transpose(ctx, (0, 2, 1, 3)), (B, L, d))
        att = dropout(matmul(ctx, self.w_o) + self.b_o, rate, rng, training)
        x = layer_norm(x + att) * self.ln1_g + self.ln1_b
        ff = matmul(relu(matmul(x, self.w_1) + self.b_1), self.w_2) + self.b_2
        ff = dropout(ff, rate, rng, training)
        return layer_norm(x + ff) * self.ln2_g + self.ln2_b


class TransformerEncoderAE:
    def __init__(self, L, F, d_model, heads, layers, ffn, rng, rate=0.1):
        self.L, self.F, self.d = L, F, d_model
        self.rate = rate
        self.w_in = glorot(rng, F, d_model, "w_in")
        self.b_in = zeros(d_model, "b_in")
        self.pe = positional_encoding(L, d_model)
        self.blocks = [EncoderBlock(d_model, heads, ffn, rng, i) for i in range(layers)]
        self.w_out = glorot(rng, d_model, F, "w_out")
        self.b_out = zeros(F, "b_out")

    def parameters(self):
        ps = [self.w_in, self.b_in]
        for blk in self.blocks:
            ps.extend(blk.parameters())
        return ps + [self.w_out, self.b_out]

    def forward(self, x, training=False, rng=None):
        x = np.asarray(x.data if isinstance(x, Tensor) else x)
        L = x.shape[1]
        pe = self.pe if L == self.L else positional_encoding(L, self.d)
        h = matmul(Tensor(x), self.w_in) + self.b_in + pe
        for blk in self.blocks:
            h = blk.forward(h, self.rate, rng, training)
        return matmul(h, self.w_out) + self.b_out


class TransformerSelector(ReconstructionSelector):
    name = "TE"

    def build(self, L, F, rng):
        hp = self.hyper
        return TransformerEncoderAE(L, F, hp.d_model, hp.heads, hp.enc_layers, hp.ffn_dim, rng, rate=hp.dropout)
