"""Minimal reverse-mode autodiff over numpy arrays.

Every operation records a backward closure on the output node; `backward`
walks the graph once in reverse topological order and accumulates gradients
into every reachable node that requires them. Compute follows the dtype of
the inputs: float32 in normal use, float64 when tests build a shadow graph
for finite-difference checks.

Batch-first convention throughout: matrices are (batch, features); the
attention helpers additionally handle (batch, time, features).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..errors import NumericError, ShapeError, UsageError

_GRAD_ENABLED = True

# cross_entropy clamps exact zeros to this floor and counts the event
PROB_FLOOR = 1e-12
_CLAMP_WARNINGS = 0


class Tensor:
    """A dense numeric array plus optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data: np.ndarray, requires_grad: bool = False):
        self.data = data
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._parents: Optional[tuple] = ()

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def tensor(data, dtype=np.float32, requires_grad: bool = False) -> Tensor:
    """Wrap array-like data as a leaf tensor."""
    arr = np.asarray(data, dtype=dtype)
    return Tensor(arr, requires_grad=requires_grad)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def clamp_warning_count() -> int:
    return _CLAMP_WARNINGS


def reset_clamp_warnings() -> None:
    global _CLAMP_WARNINGS
    _CLAMP_WARNINGS = 0


def _node(data: np.ndarray, parents: Sequence[Tensor], bw: Callable) -> Tensor:
    """Create an op output, recording the closure only when it can matter."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out = Tensor(data, requires_grad=True)
        out._parents = tuple(parents)
        out._backward = bw
        return out
    return Tensor(data)


def _acc(t: Tensor, g: np.ndarray, own: bool = True) -> None:
    """Accumulate gradient into `t`. Pass own=False when `g` may be aliased."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g if own else g.copy()
    else:
        t.grad += g


def backward(loss: Tensor) -> None:
    """Populate gradients of everything reachable from a scalar loss node.

    The graph is freed afterwards; calling backward twice on the same loss
    raises UsageError.
    """
    if loss._parents is None:
        raise UsageError("backward called on an already-freed graph")
    if loss.data.size != 1:
        raise ShapeError(f"backward expects a scalar loss, got shape {loss.shape}")

    # iterative topological sort (graph depth scales with sequence length)
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._parents:
            for p in node._parents:
                if id(p) not in visited and p._parents is not None:
                    stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
        if node is not loss and node._parents:
            # free intermediate buffers; leaves keep their grads
            node._parents = ()
            node._backward = None
            node.grad = None
    loss._parents = None
    loss._backward = None


# ---------------------------------------------------------------------------
# elementwise and affine ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shape mismatch {a.shape} vs {b.shape}")

    def bw(g):
        _acc(a, g, own=False)
        _acc(b, g, own=False)

    return _node(out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub shape mismatch {a.shape} vs {b.shape}")
    out = a.data - b.data

    def bw(g):
        _acc(a, g, own=False)
        _acc(b, -g)

    return _node(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul shape mismatch {a.shape} vs {b.shape}")
    out = a.data * b.data

    def bw(g):
        _acc(a, g * b.data)
        _acc(b, g * a.data)

    return _node(out, (a, b), bw)


def scale(a: Tensor, k: float) -> Tensor:
    out = a.data * a.data.dtype.type(k)

    def bw(g):
        _acc(a, g * a.data.dtype.type(k))

    return _node(out, (a,), bw)


def mul_const(a: Tensor, k: np.ndarray) -> Tensor:
    """Multiply by a constant array (e.g. a padding mask); broadcasts."""
    out = a.data * k

    def bw(g):
        _acc(a, g * k)

    return _node(out, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bw(g):
        _acc(a, g * (1.0 - out * out))

    return _node(out, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    # tanh form avoids overflow in exp for large negative inputs
    out = 0.5 * (np.tanh(0.5 * a.data) + 1.0)

    def bw(g):
        _acc(a, g * out * (1.0 - out))

    return _node(out, (a,), bw)


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def bw(g):
        _acc(a, g * (a.data > 0))

    return _node(out, (a,), bw)


def matmul_wt(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """x @ w.T (+ b): x is (B, n), w is (m, n), b is (m,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(f"matmul_wt shapes {x.shape} and {w.shape}")
    out = x.data @ w.data.T
    if b is not None:
        out = out + b.data

    def bw(g):
        _acc(x, g @ w.data)
        _acc(w, g.T @ x.data)
        if b is not None:
            _acc(b, g.sum(axis=0))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, bw)


def matmul3_wt(x: Tensor, w: Tensor) -> Tensor:
    """Batched projection: (B, T, n) @ w.T with w (m, n)."""
    out = x.data @ w.data.T

    def bw(g):
        _acc(x, g @ w.data)
        _acc(w, np.einsum("btm,btn->mn", g, x.data))

    return _node(out, (x, w), bw)


def concat_cols(parts: Iterable[Tensor]) -> Tensor:
    parts = tuple(parts)
    widths = [p.data.shape[1] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=1)

    def bw(g):
        ofs = 0
        for p, w in zip(parts, widths):
            _acc(p, g[:, ofs : ofs + w], own=False)
            ofs += w

    return _node(out, parts, bw)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup (B,) -> (B, dim); gradients scatter-add into the table."""
    out = table.data[ids]

    def bw(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, ids, g)
        _acc(table, dt)

    return _node(out, (table,), bw)


def sum_rows(a: Tensor) -> Tensor:
    """Sum a (B,) vector into a scalar."""
    out = a.data.sum()

    def bw(g):
        _acc(a, np.broadcast_to(g, a.data.shape).copy())

    return _node(np.asarray(out, dtype=a.data.dtype), (a,), bw)


# ---------------------------------------------------------------------------
# softmax family
# ---------------------------------------------------------------------------


def _softmax_rows_np(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(v: Tensor) -> Tensor:
    """Max-subtracted softmax over the last axis; rejects NaN/Inf input."""
    if v.data.size == 0:
        raise ShapeError("softmax of an empty tensor")
    if not np.all(np.isfinite(v.data)):
        raise NumericError("softmax input contains NaN/Inf")
    out = _softmax_rows_np(v.data)

    def bw(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        _acc(v, out * (g - dot))

    return _node(out, (v,), bw)


def log_softmax_rows(z: Tensor) -> Tensor:
    shifted = z.data - z.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse

    def bw(g):
        p = np.exp(out)
        _acc(z, g - p * g.sum(axis=-1, keepdims=True))

    return _node(out, (z,), bw)


def cross_entropy(probs: Tensor, target: int) -> Tensor:
    """-ln(probs[target]) for a rank-1 distribution.

    An exactly-zero target probability is clamped to PROB_FLOOR and counted
    via clamp_warning_count().
    """
    global _CLAMP_WARNINGS
    if probs.data.ndim != 1:
        raise ShapeError("cross_entropy expects a rank-1 probability vector")
    if not 0 <= target < probs.data.shape[0]:
        raise UsageError(f"target {target} outside distribution of size {probs.data.shape[0]}")
    p = float(probs.data[target])
    if p <= 0.0:
        _CLAMP_WARNINGS += 1
        p = PROB_FLOOR
    out = np.asarray(-np.log(p), dtype=probs.data.dtype)

    def bw(g):
        dp = np.zeros_like(probs.data)
        dp[target] = -float(g) / p
        _acc(probs, dp)

    return _node(out, (probs,), bw)


def masked_nll(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Sum of -log softmax(logits)[target] over rows where mask is set.

    Fused softmax + cross-entropy with the p - onehot backward; `targets`
    is (B,) int and `mask` (B,) in {0,1}.
    """
    z = logits.data
    shifted = z - z.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - lse
    rows = np.arange(z.shape[0])
    out = -(logp[rows, targets] * mask).sum(dtype=z.dtype)

    def bw(g):
        p = np.exp(logp)
        p[rows, targets] -= 1.0
        _acc(logits, p * (float(g) * mask)[:, None])

    return _node(np.asarray(out, dtype=z.dtype), (logits,), bw)


def masked_softmax_rows(s: Tensor, mask: np.ndarray) -> Tensor:
    """Row softmax over positions where mask is True; masked entries get 0."""
    z = np.where(mask, s.data, -np.inf)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        _acc(s, out * (g - dot))

    return _node(out, (s,), bw)


# ---------------------------------------------------------------------------
# attention-shaped ops
# ---------------------------------------------------------------------------


def add_rows3(p_enc: Tensor, q: Tensor) -> Tensor:
    """(B, T, P) + (B, P) broadcast over time."""
    out = p_enc.data + q.data[:, None, :]

    def bw(g):
        _acc(p_enc, g, own=False)
        _acc(q, g.sum(axis=1))

    return _node(out, (p_enc, q), bw)


def dot_last(x: Tensor, v: Tensor) -> Tensor:
    """(B, T, P) . (P,) -> (B, T)."""
    out = x.data @ v.data

    def bw(g):
        _acc(x, g[..., None] * v.data)
        _acc(v, np.einsum("btp,bt->p", x.data, g))

    return _node(out, (x, v), bw)


def attn_mix(a: Tensor, h: Tensor) -> Tensor:
    """Context = sum_t a[b,t] * h[b,t,:] -> (B, d)."""
    out = np.einsum("bt,btd->bd", a.data, h.data)

    def bw(g):
        _acc(a, np.einsum("bd,btd->bt", g, h.data))
        _acc(h, a.data[..., None] * g[:, None, :])

    return _node(out, (a, h), bw)
