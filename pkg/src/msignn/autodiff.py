"""Small reverse-mode autodiff over dense float64 matrices.

Only the handful of ops the GNN models need are provided. Every op
returns a new :class:`Tensor` that remembers its parents and a closure
that pushes the output gradient back to them; :meth:`Tensor.backward`
walks that tape once in reverse topological order.

>>> w = Tensor(np.ones((2, 2)), requires_grad=True)
>>> total(w).backward()
>>> w.grad
array([[1., 1.],
       [1., 1.]])
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteError(FloatingPointError):
    """A forward op produced NaN or Inf."""


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward", "_used")

    def __init__(self, value, parents=(), backward=None, requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name
        self._parents = tuple(parents)
        self._backward = backward
        self._used = False

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Tensor{label} shape={self.shape}>"

    def backward(self):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf.

        ``self`` must be a scalar. A tape can be replayed only once; build
        a fresh forward pass before calling this again.
        """
        if self.value.size != 1:
            raise ValueError("backward() needs a scalar output")
        if self._used:
            raise RuntimeError("backward() already ran on this tape; rerun the forward pass")
        order = _topological(self)
        for node in order:
            if node._parents or node.requires_grad:
                node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                grads = node._backward(node.grad)
                for parent, g in zip(node._parents, grads):
                    if g is None or not parent.requires_grad:
                        continue
                    parent.grad = g if parent.grad is None else parent.grad + g
        for node in order:
            if node._parents:
                node._used = True
                node.grad = None


def _topological(root):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        stack.extend((p, False) for p in node._parents if id(p) not in seen)
    return order


def _out(value, parents, backward):
    if not np.all(np.isfinite(value)):
        raise NonFiniteError("non-finite value in forward pass")
    return Tensor(value, parents, backward)


def _check_shape(cond, msg):
    if not cond:
        raise ValueError(msg)


# --------------------------------------------------------------------------
# ops

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_shape(a.shape[1] == b.shape[0], f"matmul shape mismatch {a.shape} @ {b.shape}")
    return _out(a.value @ b.value, (a, b),
                lambda g: (g @ b.value.T if a.requires_grad else None,
                           a.value.T @ g if b.requires_grad else None))


def spmm(adj, b: Tensor, symmetric: bool = False) -> Tensor:
    """Constant (sparse) matrix times a dense tensor.

    Pass ``symmetric=True`` for symmetric operators to skip the transpose
    in the backward pass.
    """
    _check_shape(adj.shape[1] == b.shape[0], f"spmm shape mismatch {adj.shape} @ {b.shape}")

    def back(g):
        return (np.asarray((adj if symmetric else adj.T) @ g),)

    return _out(np.asarray(adj @ b.value), (b,), back)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a (1, cols) row broadcast over rows."""
    if a.shape == b.shape:
        return _out(a.value + b.value, (a, b), lambda g: (g, g))
    _check_shape(b.shape == (1, a.shape[1]), f"add shape mismatch {a.shape} + {b.shape}")
    return _out(a.value + b.value, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _out(a.value * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    return _out(a.value * mask, (a,), lambda g: (g * mask,))


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _out(a.value * keep, (a,), lambda g: (g * keep,))


def concat_cols(parts) -> Tensor:
    parts = list(parts)
    _check_shape(len({p.shape[0] for p in parts}) == 1, "concat_cols row mismatch")
    edges = np.cumsum([0] + [p.shape[1] for p in parts])

    def back(g):
        return tuple(g[:, lo:hi] for lo, hi in zip(edges[:-1], edges[1:]))

    return _out(np.hstack([p.value for p in parts]), parts, back)


def total(a: Tensor) -> Tensor:
    return _out(np.array([[a.value.sum()]]), (a,), lambda g: (np.full(a.shape, g.item()),))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels, mask) -> Tensor:
    """Mean negative log-likelihood over the rows listed in ``mask``."""
    rows = np.asarray(mask)
    if rows.dtype == bool:
        rows = np.flatnonzero(rows)
    if not len(rows):
        raise ValueError("empty mask")
    y = np.asarray(labels)[rows]
    logp = log_softmax(logits.value[rows])
    loss = -logp[np.arange(len(rows)), y].mean()

    def back(g):
        d = np.exp(logp)
        d[np.arange(len(rows)), y] -= 1.0
        full = np.zeros_like(logits.value)
        full[rows] = d * (g.item() / len(rows))
        return (full,)

    return _out(np.array([[loss]]), (logits,), back)


# --------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0


class Adam:
    """Adam with L2 decay folded into the gradient (``g + wd * p``).

    ``decay`` flags which params receive weight decay; biases normally
    do not.
    """

    def __init__(self, params, lr=0.01, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.0, decay=None):
        self.params = list(params)
        self.lr, (self.beta1, self.beta2), self.eps = lr, betas, eps
        self.weight_decay = weight_decay
        self.decay = list(decay) if decay is not None else [True] * len(self.params)
        self.state = AdamState([np.zeros_like(p.value) for p in self.params],
                               [np.zeros_like(p.value) for p in self.params])

    def step(self, grads=None):
        if grads is None:
            grads = [p.grad for p in self.params]
        st = self.state
        st.step += 1
        c1 = 1.0 - self.beta1 ** st.step
        c2 = 1.0 - self.beta2 ** st.step
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if g is None:
                g = np.zeros_like(p.value)
            if self.weight_decay and self.decay[i]:
                g = g + self.weight_decay * p.value
            st.m[i] = self.beta1 * st.m[i] + (1 - self.beta1) * g
            st.v[i] = self.beta2 * st.v[i] + (1 - self.beta2) * g * g
            p.value = p.value - self.lr * (st.m[i] / c1) / (np.sqrt(st.v[i] / c2) + self.eps)
