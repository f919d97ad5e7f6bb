"""Minimal reverse-mode autodiff over numpy arrays.

Only the operations the encoder and its heads need are provided. Every op
records a closure that maps the output gradient to input gradients; calling
:meth:`Tensor.backward` on a scalar walks the graph in reverse topological
order and accumulates into ``.grad``.
"""
from __future__ import annotations

import logging
import math
from typing import Callable, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

_GELU_C = math.sqrt(2.0 / math.pi)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(as_tensor(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)


class Parameter(Tensor):
    """A named leaf tensor owned by a model. Frozen parameters never receive
    optimizer updates and are skipped by the gradient checker."""

    __slots__ = ("trainable",)

    def __init__(self, data, name: str = "", trainable: bool = True):
        super().__init__(np.array(data), requires_grad=trainable, name=name)
        self.trainable = trainable


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _needs(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _make(data, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    if _needs(*parents):
        return Tensor(data, True, tuple(parents), backward)
    return Tensor(data)


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    out = a.data * b.data

    def bw(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    c = a.dtype.type(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    pos = a.data > 0
    return _make(np.where(pos, a.data, 0).astype(a.dtype), (a,), lambda g: (g * pos,))


def gelu(a: Tensor) -> Tensor:
    """tanh approximation."""
    x = a.data
    u = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(u)
    out = 0.5 * x * (1 + t)

    def bw(g):
        du = _GELU_C * (1 + 3 * 0.044715 * x**2)
        return (g * (0.5 * (1 + t) + 0.5 * x * (1 - t**2) * du),)

    return _make(out.astype(a.dtype), (a,), bw)


def activation(name: str) -> Callable[[Tensor], Tensor]:
    try:
        return {"relu": relu, "gelu": gelu}[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


# ---------------------------------------------------------------- shape ops

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _make(out, (a, b), bw)


def sum_(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(out, (a,), bw)


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes=None) -> Tensor:
    out = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)
    return _make(out, (a,), lambda g: (np.transpose(g, inv),))


def index(a: Tensor, idx) -> Tensor:
    out = a.data[idx]

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(out, (a,), bw)


def concat(ts: Sequence[Tensor], axis: int = -1) -> Tensor:
    ts = list(ts)
    out = np.concatenate([t.data for t in ts], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, ts, bw)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    out = table.data[ids]

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (full,)

    return _make(out, (table,), bw)


def masked_fill(a: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Entries where ``mask`` is true are replaced by ``value`` and receive no
    gradient."""
    mask = np.broadcast_to(mask, a.shape)
    out = np.where(mask, a.dtype.type(value), a.data)
    return _make(out, (a,), lambda g: (np.where(mask, 0, g),))


def masked_max(a: Tensor, mask: np.ndarray, axis: int) -> Tensor:
    """Max over ``axis`` restricted to entries where ``mask`` is true. Slices
    with no valid entry produce 0."""
    mask = np.broadcast_to(mask, a.shape)
    filled = np.where(mask, a.data, -np.inf)
    arg = np.argmax(filled, axis=axis)
    any_valid = mask.any(axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(arg, axis), axis=axis).squeeze(axis)
    out = np.where(any_valid, out, 0).astype(a.dtype)

    def bw(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(arg, axis), np.expand_dims(np.where(any_valid, g, 0), axis), axis=axis)
        return (full,)

    return _make(out, (a,), bw)


# ---------------------------------------------------------------- normalization

def softmax(a: Tensor, axis: int = -1, mask: np.ndarray | None = None) -> Tensor:
    """Row softmax. Entries where ``mask`` is false get exactly zero weight."""
    x = a.data
    if mask is not None:
        mask = np.broadcast_to(mask, x.shape)
        if not mask.any(axis=axis).all():
            raise ValueError("softmax mask excludes every entry of some row")
        x = np.where(mask, x, -np.inf)
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    p = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return _make(p, (a,), bw)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    shifted = x - x.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _make(out, (a,), bw)


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + a.dtype.type(eps))
    xhat = xc * inv
    out = xhat * gamma.data + beta.data
    n = x.shape[-1]

    def bw(g):
        gx = gg = gb = None
        if gamma.requires_grad:
            gg = _unbroadcast(g * xhat, gamma.shape)
        if beta.requires_grad:
            gb = _unbroadcast(g, beta.shape)
        if a.requires_grad:
            dxhat = g * gamma.data
            gx = inv / n * (n * dxhat - dxhat.sum(-1, keepdims=True) - xhat * (dxhat * xhat).sum(-1, keepdims=True))
        return gx, gg, gb

    return _make(out, (a, gamma, beta), bw)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    keep = (rng.random(a.shape) >= p).astype(a.dtype) / a.dtype.type(1.0 - p)
    return _make(a.data * keep, (a,), lambda g: (g * keep,))


# ---------------------------------------------------------------- losses

def cross_entropy(logits: Tensor, gold: np.ndarray, ignore: np.ndarray | None = None,
                  reduction: str = "none") -> Tensor:
    """Negative log-likelihood of ``gold`` under ``softmax(logits)``.

    ``gold`` has the shape of ``logits`` minus its last axis. Positions where
    ``ignore`` is true contribute exactly 0. ``reduction`` is ``none`` (per
    position), ``sum`` or ``mean`` (over non-ignored positions).
    """
    gold = np.asarray(gold)
    n_cls = logits.shape[-1]
    if ignore is None:
        ignore = np.zeros(gold.shape, dtype=bool)
    ignore = np.asarray(ignore, dtype=bool)
    safe = np.where(ignore, 0, gold)
    if (safe < 0).any() or (safe >= n_cls).any():
        raise ValueError(f"gold class index out of range [0, {n_cls})")
    x = logits.data
    shifted = x - x.max(axis=-1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    nll = -np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
    nll = np.where(ignore, 0, nll).astype(x.dtype)
    count = int((~ignore).sum())
    if reduction == "none":
        out = nll
    elif reduction == "sum":
        out = nll.sum()
    elif reduction == "mean":
        if count == 0:
            log.warning("cross_entropy: every position is ignored; loss defined as 0")
        out = nll.sum() / max(count, 1)
    else:
        raise ValueError(f"unknown reduction {reduction!r}")

    def bw(g):
        if reduction == "none":
            gpos = g
        elif reduction == "sum":
            gpos = np.broadcast_to(g, nll.shape)
        else:
            gpos = np.broadcast_to(g / max(count, 1), nll.shape)
        probs = np.exp(logp)
        np.put_along_axis(probs, safe[..., None], np.take_along_axis(probs, safe[..., None], -1) - 1, -1)
        return (probs * np.where(ignore, 0, gpos)[..., None],)

    return _make(np.asarray(out, dtype=x.dtype), (logits,), bw)


def kl_div_rows(prior: np.ndarray, model: Tensor, row_mask: np.ndarray) -> Tensor:
    """Mean over selected rows of KL(prior_row || model_row).

    ``0 * ln 0`` is taken as 0, so model entries where the prior is zero never
    enter the sum. Rows where ``row_mask`` is false are skipped entirely.
    """
    prior = np.asarray(prior, dtype=model.dtype)
    if prior.shape != model.shape:
        raise ValueError(f"kl_div_rows shape mismatch {prior.shape} vs {model.shape}")
    row_mask = np.broadcast_to(np.asarray(row_mask, dtype=bool), prior.shape[:-1])
    support = (prior > 0) & row_mask[..., None]
    q = model.data
    if (q[support] <= 0).any():
        raise FloatingPointError("model assigns zero probability where the prior is positive")
    n = int(row_mask.sum())
    if n == 0:
        log.warning("kl_div_rows: row mask selects nothing; loss defined as 0")
    p_s = np.where(support, prior, 0)
    q_s = np.where(support, q, 1)
    terms = np.where(support, p_s * (np.log(np.where(support, prior, 1)) - np.log(q_s)), 0)
    out = np.asarray(terms.sum() / max(n, 1), dtype=q.dtype)

    def bw(g):
        return (np.where(support, -g * p_s / q_s, 0).astype(q.dtype) / max(n, 1),)

    return _make(out, (model,), bw)


# ---------------------------------------------------------------- gradient check

def grad_check(loss_fn: Callable[[], Tensor], params: Iterable[Parameter], epsilon: float = 1e-4,
               n_samples: int | None = 200, seed: int = 0, floor: float = 1e-7) -> float:
    """Largest relative error between analytic and central-difference
    gradients, over up to ``n_samples`` coordinates per call.

    Relative error of one coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    Only trainable parameters are probed. Requires 64-bit parameters.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    params = [p for p in params if p.requires_grad]
    if not params:
        return 0.0
    for p in params:
        if p.dtype != np.float64:
            raise TypeError(f"grad_check needs float64 parameters, {p.name} is {p.dtype}")
        p.grad = None
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise FloatingPointError("loss is not finite")
    loss.backward()
    coords = [(pi, j) for pi, p in enumerate(params) for j in range(p.data.size)]
    rng = np.random.default_rng(seed)
    if n_samples is not None and n_samples < len(coords):
        pick = rng.choice(len(coords), size=n_samples, replace=False)
        coords = [coords[k] for k in sorted(pick)]
    worst = 0.0
    for pi, j in coords:
        p = params[pi]
        flat = p.data.reshape(-1)
        analytic = 0.0 if p.grad is None else float(p.grad.reshape(-1)[j])
        orig = flat[j]
        flat[j] = orig + epsilon
        up = float(loss_fn().data)
        flat[j] = orig - epsilon
        down = float(loss_fn().data)
        flat[j] = orig
        numeric = (up - down) / (2 * epsilon)
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        worst = max(worst, err)
    return worst


# ---------------------------------------------------------------- modules

class Module:
    """Parameter container. Parameters and submodules are discovered from
    instance attributes in definition order, so names are stable."""

    def named_parameters(self, prefix: str = ""):
        for key, val in vars(self).items():
            if isinstance(val, Parameter):
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{key}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self) -> dict[str, Parameter]:
        out = {}
        for name, p in self.named_parameters():
            p.name = name
            out[name] = p
        return out


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float32, bias: bool = True):
        self.weight = Parameter(xavier(rng, d_in, d_out, dtype))
        self.bias = Parameter(np.zeros(d_out, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, self.weight)
        return y if self.bias is None else add(y, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, dtype=np.float32, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(d, dtype=dtype))
        self.beta = Parameter(np.zeros(d, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)
