"""Neural layer primitives: linear, embedding, LSTM step, additive attention.

Layers are functional: parameter bundles are small dataclasses of Tensors and
each call builds graph nodes. The LSTM cell is a fused op (two output nodes
sharing cached gate activations) because it dominates training cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptySourceError, ShapeError
from . import engine
from .engine import Tensor, _acc, _node


@dataclass
class Parameter:
    """Named, optionally frozen model parameter."""

    name: str
    tensor: Tensor
    frozen: bool = False

    def freeze(self) -> None:
        self.frozen = True
        self.tensor.requires_grad = False


@dataclass
class LstmState:
    h: Tensor  # (B, H) hidden; every component in (-1, 1)
    c: Tensor  # (B, H) cell


@dataclass
class LinearParams:
    w: Tensor  # (out, in)
    b: Tensor | None  # (out,)


@dataclass
class LstmParams:
    w: Tensor  # (4H, in + H), gate row order i, f, g, o
    b: Tensor  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.w.data.shape[0] // 4


@dataclass
class AttentionParams:
    w_enc: Tensor  # (P, d_enc)
    w_dec: Tensor  # (P, d_dec)
    v: Tensor  # (P,)


def uniform_init(rng: np.random.Generator, shape, bound: float = 0.1, dtype=np.float32) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def linear(x: Tensor, p: LinearParams) -> Tensor:
    return engine.matmul_wt(x, p.w, p.b)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    return engine.embedding(table, ids)


def _sigmoid_np(z: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def lstm_step(x: Tensor, state: LstmState, p: LstmParams) -> LstmState:
    """One LSTM cell update; returns a new state, inputs untouched."""
    hsz = p.hidden_size
    if x.data.ndim != 2 or state.h.data.shape[1] != hsz:
        raise ShapeError(
            f"lstm_step got x {x.shape}, h {state.h.shape} for hidden size {hsz}"
        )
    if x.data.shape[1] + hsz != p.w.data.shape[1]:
        raise ShapeError(
            f"lstm_step input width {x.data.shape[1]} incompatible with weight {p.w.shape}"
        )
    h_prev, c_prev, w, b = state.h, state.c, p.w, p.b
    xh = np.concatenate([x.data, h_prev.data], axis=1)
    z = xh @ w.data.T + b.data
    gi = _sigmoid_np(z[:, :hsz])
    gf = _sigmoid_np(z[:, hsz : 2 * hsz])
    gg = np.tanh(z[:, 2 * hsz : 3 * hsz])
    go = _sigmoid_np(z[:, 3 * hsz :])
    c2_data = gf * c_prev.data + gi * gg
    tc = np.tanh(c2_data)
    h2_data = go * tc
    in_w = x.data.shape[1]

    def acc_wb(dz_block, row_lo, row_hi):
        if w.requires_grad:
            if w.grad is None:
                w.grad = np.zeros_like(w.data)
            w.grad[row_lo:row_hi] += dz_block.T @ xh
        if b.requires_grad:
            if b.grad is None:
                b.grad = np.zeros_like(b.data)
            b.grad[row_lo:row_hi] += dz_block.sum(axis=0)

    def bw_c(gc):
        dzi = (gc * gg) * gi * (1.0 - gi)
        dzf = (gc * c_prev.data) * gf * (1.0 - gf)
        dzg = (gc * gi) * (1.0 - gg * gg)
        dxh = dzi @ w.data[:hsz] + dzf @ w.data[hsz : 2 * hsz] + dzg @ w.data[2 * hsz : 3 * hsz]
        acc_wb(dzi, 0, hsz)
        acc_wb(dzf, hsz, 2 * hsz)
        acc_wb(dzg, 2 * hsz, 3 * hsz)
        _acc(x, dxh[:, :in_w])
        _acc(h_prev, dxh[:, in_w:])
        _acc(c_prev, gc * gf)

    c2 = _node(c2_data, (x, h_prev, c_prev, w, b), bw_c)

    def bw_h(gh):
        dzo = (gh * tc) * go * (1.0 - go)
        _acc(c2, gh * go * (1.0 - tc * tc))
        dxh = dzo @ w.data[3 * hsz :]
        acc_wb(dzo, 3 * hsz, 4 * hsz)
        _acc(x, dxh[:, :in_w])
        _acc(h_prev, dxh[:, in_w:])

    h2 = _node(h2_data, (x, h_prev, c2, w, b), bw_h)
    return LstmState(h=h2, c=c2)


def additive_attention(
    h_enc: Tensor,
    query: Tensor,
    p: AttentionParams,
    mask: np.ndarray | None = None,
    enc_proj: Tensor | None = None,
) -> tuple[Tensor, Tensor]:
    """Additive (tanh-MLP) attention.

    Scores are v . tanh(W_enc h_t + W_dec q); weights are a masked softmax
    over time and the context is the weight-mixed encoder states. Accepts
    (T, d_enc) + (d_dec,) for a single query, or batched (B, T, d_enc) +
    (B, d_dec). `enc_proj` lets callers reuse the per-sequence W_enc
    projection across decoder steps.
    """
    single = h_enc.data.ndim == 2
    if single:
        h_enc = _unsqueeze0(h_enc)
        query = _unsqueeze0(query)
        enc_proj = None
    if h_enc.data.shape[1] == 0:
        raise EmptySourceError("attention over an empty encoder sequence")
    if enc_proj is None:
        enc_proj = engine.matmul3_wt(h_enc, p.w_enc)
    if mask is None:
        mask = np.ones(h_enc.data.shape[:2], dtype=bool)
    qp = engine.matmul_wt(query, p.w_dec)
    scores = engine.dot_last(engine.tanh(engine.add_rows3(enc_proj, qp)), p.v)
    a = engine.masked_softmax_rows(scores, mask)
    ctx = engine.attn_mix(a, h_enc)
    if single:
        return _squeeze0(a), _squeeze0(ctx)
    return a, ctx


def _squeeze0(t: Tensor) -> Tensor:
    out = t.data[0]

    def bw(g):
        _acc(t, g[None, ...], own=False)

    return _node(out, (t,), bw)
