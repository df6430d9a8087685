"""Minimal reverse-mode autodiff over numpy arrays.

Every op returns a :class:`Tensor` that remembers its parents and a closure
propagating the upstream gradient.  ``backward`` walks the graph in reverse
topological order and accumulates into the ``grad`` slot of every tensor
created with ``requires_grad=True``.
"""
from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Build no backward graph inside the block (inference)."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class NonFiniteError(FloatingPointError):
    """Raised when an op produces NaN or Inf."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "_consumed")

    def __init__(self, data, requires_grad=False, dtype=None, _parents=(), op="leaf"):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype if dtype is not None else _default_dtype(data))
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = _parents
        self._backward = None
        self.op = op
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def zero_grad(self):
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return gather_rows(self, idx)

    @property
    def T(self):
        return transpose(self)


def _default_dtype(data):
    if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
        return data.dtype
    return np.float64


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)


def _check_finite(arr, op):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite value produced by op '{op}'")


def _make(data, parents, backward, op):
    _check_finite(data, op)
    needs = _grad_enabled and any(p.requires_grad or p._backward is not None for p in parents)
    out = Tensor(data, dtype=data.dtype, _parents=parents if needs else (), op=op)
    if needs:
        out._backward = backward
    return out


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _tracked(t):
    return t.requires_grad or t._backward is not None


# ----------------------------------------------------------------- elementwise

def add(a, b):
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), backward, "mul")


def div(a, b):
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    out = a.data / b.data

    def backward(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return _make(out, (a, b), backward, "div")


def exp(x):
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,), "exp")


def log(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return _make(out, (x,), lambda g: (g / x.data,), "log")


def relu(x):
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,), "relu")


def sigmoid(x):
    # split by sign so large |x| never overflows exp
    z = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.dtype)
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x):
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def softplus(x):
    out = np.logaddexp(0.0, x.data).astype(x.dtype)
    sig = 1.0 / (1.0 + np.exp(-x.data))
    return _make(out, (x,), lambda g: (g * sig,), "softplus")


ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu, "identity": lambda x: x}


def activation(x, kind):
    try:
        return ACTIVATIONS[kind](x)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


# ------------------------------------------------------------------- structure

def matmul(a, b):
    if a.data.ndim < 1 or b.data.ndim < 1:
        raise ValueError("matmul needs at least 1-D operands")
    if a.shape[-1] != b.shape[-2 if b.data.ndim > 1 else 0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul is defined for 2-D operands only")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _make(a.data @ b.data, (a, b), backward, "matmul")


def transpose(x):
    return _make(x.data.T, (x,), lambda g: (g.T,), "transpose")


def reshape(x, shape):
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).astype(x.dtype),)

    return _make(np.asarray(out, dtype=x.dtype), (x,), backward, "sum")


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(tensors, axis=-1):
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward, "concat")


def gather_rows(x, idx):
    """Row lookup ``x[idx]`` along the first axis; gradient scatters back with ``np.add.at``."""
    idx = np.asarray(idx) if not isinstance(idx, (slice, int, np.integer)) else idx

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(x.data[idx], (x,), backward, "gather")


def scatter_rows(x, idx, n):
    """Segment sum: ``out[idx[e]] += x[e]`` into ``n`` rows."""
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros((n,) + x.shape[1:], dtype=x.dtype)
    np.add.at(out, idx, x.data)
    return _make(out, (x,), lambda g: (g[idx],), "scatter")


def spmm(a, x):
    """Constant sparse (scipy) matrix times a dense tensor."""
    out = np.asarray(a @ x.data, dtype=x.dtype)
    at = a.T.tocsr()
    return _make(out, (x,), lambda g: (np.asarray(at @ g, dtype=x.dtype),), "spmm")


# ------------------------------------------------------------ neural operators

def conv1d_transE(stacked, kernels, bias):
    """Width-preserving 1-D convolution over stacked embedding rows.

    ``out[..., c, j] = bias[c] + sum_{u, v} kernels[c, u, v] * stacked[..., u, j + v - 1]``
    with zero padding of one column on each side.  ``stacked`` is ``(2, d)`` or
    ``(B, 2, d)``; kernels/bias are either shared (``(C, 2, 3)``/``(C,)``) or
    per-query (``(B, C, 2, 3)``/``(B, C)``).
    """
    x = stacked.data
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[-1] < 1:
        raise ValueError(f"conv1d_transE expects (B, rows, d) input with d >= 1, got {stacked.shape}")
    nb, rows, d = x.shape
    kdata, bdata = kernels.data, bias.data
    per_query = kdata.ndim == 4
    c = kdata.shape[-3]
    if kdata.shape[-2:] != (rows, 3):
        raise ValueError(f"kernel shape {kdata.shape} does not match {rows} input rows")
    if per_query and single:
        raise ValueError("per-query kernels need batched input")

    padded = np.zeros((nb, rows, d + 2), dtype=x.dtype)
    padded[:, :, 1:-1] = x
    # patches[b, u, v, j] = padded[b, u, j + v]
    patches = np.stack([padded[:, :, v:v + d] for v in range(3)], axis=2)
    pflat = patches.reshape(nb, rows * 3, d)
    kflat = kdata.reshape(kdata.shape[:-2] + (rows * 3,))
    out = kflat @ pflat + bdata[..., None]
    if single:
        out = out[0]

    def backward(g):
        if single:
            g = g[None]
        if per_query:
            gk = (g @ pflat.transpose(0, 2, 1)).reshape(kdata.shape)
            gb = g.sum(axis=-1)
        else:
            gk = np.einsum("bcj,bkj->ck", g, pflat).reshape(kdata.shape)
            gb = g.sum(axis=(0, 2))
        gp = (np.swapaxes(kflat, -1, -2) @ g).reshape(nb, rows, 3, d)
        gpad = np.zeros_like(padded)
        for v in range(3):
            gpad[:, :, v:v + d] += gp[:, :, v, :]
        gx = gpad[:, :, 1:-1]
        if single:
            gx = gx[0]
        return gx, gk, gb

    return _make(out, (stacked, kernels, bias), backward, "conv1d_transE")


def log_softmax(logits):
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    soft = np.exp(out)

    def backward(g):
        return (g - soft * g.sum(axis=-1, keepdims=True),)

    return _make(out, (logits,), backward, "log_softmax")


def softmax(logits):
    x = np.asarray(logits.data if isinstance(logits, Tensor) else logits)
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, target, reduction="sum"):
    """``-log softmax(logits)[target]``; batched when ``logits`` is 2-D."""
    target = np.asarray(target, dtype=np.int64)
    k = logits.shape[-1]
    if np.any(target < 0) or np.any(target >= k):
        raise ValueError(f"target out of range for {k} classes")
    lsm = log_softmax(logits)
    if logits.data.ndim == 1:
        return -gather_rows(lsm, int(target))
    picked = _pick(lsm, target)
    if reduction == "sum":
        return -sum(picked)
    if reduction == "mean":
        return -mean(picked)
    if reduction == "none":
        return -picked
    raise ValueError(f"unknown reduction {reduction!r}")


def _pick(x, cols):
    rows = np.arange(x.shape[0])

    def backward(g):
        full = np.zeros_like(x.data)
        full[rows, cols] = g
        return (full,)

    return _make(x.data[rows, cols], (x,), backward, "pick")


def dropout(x, rate, training, rng=None, seed=None):
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0:
        return x
    if rng is None:
        rng = np.random.default_rng(seed)
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return _make(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


# -------------------------------------------------------------------- backward

def backward(loss):
    """Accumulate d(loss)/d(leaf) into every reachable ``requires_grad`` tensor."""
    if loss.data.size != 1:
        raise ValueError("backward needs a scalar loss")
    if loss._consumed:
        raise RuntimeError("backward called twice on the same graph")
    order, seen = [], set()
    stack = [(loss, False)]
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
            if id(p) not in seen and _tracked(p):
                stack.append((p, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = node.grad + g.reshape(node.shape)
        if node._backward is None:
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if pg is None or not _tracked(p):
                continue
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
    for node in order:
        if node.grad is not None:
            _check_finite(node.grad, f"backward:{node.op}")
    loss._consumed = True
