"""Minimal NCHW tensor engine with reverse-mode automatic differentiation.

Values are float32 by default; arrays that arrive as float64 stay float64 so
the same graph can be replayed in double precision (used by gradcheck).
Every op validates that its output is finite: NaN/Inf raises NumericalError
instead of propagating silently.
"""

import numpy as np

from .errors import NumericalError, ShapeError

# tanh-approximation cubic coefficient for gelu; backward uses the same value
GELU_C = 0.044715
_SQRT_2_OVER_PI = 0.7978845608028654


def _as_array(data):
    arr = np.asarray(data)
    if arr.dtype != np.float64:
        arr = arr.astype(np.float32, copy=False)
    if not arr.flags["C_CONTIGUOUS"]:  # 0-d arrays are contiguous; keep them 0-d
        arr = np.ascontiguousarray(arr)
    return arr


class Tensor:
    """A numpy array plus an optional gradient and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def astype(self, dtype):
        return Tensor(self.data.astype(dtype))

    def backward(self):
        """Reverse-mode sweep from this (scalar) tensor through the tape."""
        if self.size != 1:
            raise ShapeError(f"backward() requires a scalar, got shape {self.shape}")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


def _toposort(root):
    """Children-before-parents order, iterative so deep graphs don't recurse out."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return list(reversed(order))


def apply_op(data, parents, backward):
    """Wrap an op result into the tape.

    `backward(grad_out)` must accumulate into the parents via `accumulate`.
    Used by every op in this module and by the conv/loss modules for their
    custom backward rules.
    """
    if not np.isfinite(data).all():
        raise NumericalError("op produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def accumulate(t, g):
    """Add `g` into t.grad (no-op for tensors outside the tape)."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _unbroadcast(g, shape):
    """Sum `g` down to `shape` (reverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _wrap(x, like):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def add(a, b):
    b = _wrap(b, a)
    with np.errstate(over="ignore"):
        out = a.data + b.data

    def backward(g):
        accumulate(a, _unbroadcast(g, a.data.shape))
        accumulate(b, _unbroadcast(g, b.data.shape))

    return apply_op(out, (a, b), backward)


def sub(a, b):
    b = _wrap(b, a)
    out = a.data - b.data

    def backward(g):
        accumulate(a, _unbroadcast(g, a.data.shape))
        accumulate(b, -_unbroadcast(g, b.data.shape))

    return apply_op(out, (a, b), backward)


def mul(a, b):
    """Element-wise product with numpy broadcasting."""
    b = _wrap(b, a)
    with np.errstate(over="ignore"):
        out = a.data * b.data

    def backward(g):
        accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return apply_op(out, (a, b), backward)


def relu(x):
    out = np.maximum(x.data, 0)

    def backward(g):
        accumulate(x, g * (x.data > 0))

    return apply_op(out, (x,), backward)


def sigmoid(x):
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        accumulate(x, g * out * (1.0 - out))

    return apply_op(out, (x,), backward)


def gelu(x):
    """tanh-approximation gelu: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + c*x^3)))."""
    d = x.data
    inner = _SQRT_2_OVER_PI * (d + GELU_C * d * d * d)
    t = np.tanh(inner)
    out = 0.5 * d * (1.0 + t)

    def backward(g):
        d_inner = _SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * d * d)
        grad = 0.5 * (1.0 + t) + 0.5 * d * (1.0 - t * t) * d_inner
        accumulate(x, g * grad)

    return apply_op(out, (x,), backward)


def l1(a, b):
    """Mean absolute difference, as a scalar tensor."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"l1 shape mismatch: {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    out = np.abs(diff).mean(dtype=a.data.dtype)

    def backward(g):
        s = g * np.sign(diff) / diff.size
        accumulate(a, s)
        accumulate(b, -s)

    return apply_op(np.asarray(out), (a, b), backward)


def mean(x):
    out = np.asarray(x.data.mean(dtype=x.data.dtype))

    def backward(g):
        accumulate(x, np.broadcast_to(g / x.data.size, x.data.shape))

    return apply_op(out, (x,), backward)


def concat(tensors, axis=1):
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            accumulate(t, g[tuple(idx)])

    return apply_op(out, tuple(tensors), backward)


def _require_nchw(x, op):
    if x.data.ndim != 4:
        raise ShapeError(f"{op} expects an NCHW tensor, got shape {x.data.shape}")


def pixel_shuffle(x, r):
    """Depth-to-space: (n, c, h, w) -> (n, c/r^2, h*r, w*r)."""
    _require_nchw(x, "pixel_shuffle")
    n, c, h, w = x.data.shape
    if c % (r * r) != 0:
        raise ShapeError(f"pixel_shuffle: {c} channels not divisible by r^2={r * r}")
    co = c // (r * r)
    out = (
        x.data.reshape(n, co, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, co, h * r, w * r)
    )

    def backward(g):
        accumulate(x, _unshuffle_data(g, r))

    return apply_op(np.ascontiguousarray(out), (x,), backward)


def _unshuffle_data(d, r):
    n, c, h, w = d.shape
    return np.ascontiguousarray(
        d.reshape(n, c, h // r, r, w // r, r)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(n, c * r * r, h // r, w // r)
    )


def pixel_unshuffle(x, r):
    """Space-to-depth, the exact inverse of pixel_shuffle."""
    _require_nchw(x, "pixel_unshuffle")
    n, c, h, w = x.data.shape
    if h % r != 0 or w % r != 0:
        raise ShapeError(f"pixel_unshuffle: spatial dims {(h, w)} not divisible by {r}")
    out = _unshuffle_data(x.data, r)

    def backward(g):
        n2, c2, h2, w2 = g.shape
        co = c2 // (r * r)
        accumulate(
            x,
            np.ascontiguousarray(
                g.reshape(n2, co, r, r, h2, w2)
                .transpose(0, 1, 4, 2, 5, 3)
                .reshape(n2, co, h2 * r, w2 * r)
            ),
        )

    return apply_op(out, (x,), backward)


def avg_pool2(x):
    """2x2 average pooling, stride 2."""
    _require_nchw(x, "avg_pool2")
    n, c, h, w = x.data.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 requires even spatial dims, got {(h, w)}")
    out = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def backward(g):
        gx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * np.asarray(
            0.25, dtype=g.dtype
        )
        accumulate(x, gx)

    return apply_op(np.ascontiguousarray(out), (x,), backward)


def global_avg_pool(x):
    """(n, c, h, w) -> (n, c, 1, 1) spatial mean."""
    _require_nchw(x, "global_avg_pool")
    n, c, h, w = x.data.shape
    out = x.data.mean(axis=(2, 3), keepdims=True)

    def backward(g):
        accumulate(x, np.broadcast_to(g / (h * w), x.data.shape))

    return apply_op(out, (x,), backward)


def _up2_axis(d, axis):
    d = np.moveaxis(d, axis, -1)
    left = np.concatenate([d[..., :1], d[..., :-1]], axis=-1)
    right = np.concatenate([d[..., 1:], d[..., -1:]], axis=-1)
    out = np.empty(d.shape[:-1] + (d.shape[-1] * 2,), dtype=d.dtype)
    out[..., 0::2] = 0.75 * d + 0.25 * left
    out[..., 1::2] = 0.75 * d + 0.25 * right
    return np.moveaxis(out, -1, axis)


def _up2_axis_adjoint(g, axis):
    g = np.moveaxis(g, axis, -1)
    ge = g[..., 0::2]
    go = g[..., 1::2]
    gx = 0.75 * (ge + go)
    # adjoint of the clamped left/right shifts
    gx[..., 0] += 0.25 * ge[..., 0]
    gx[..., :-1] += 0.25 * ge[..., 1:]
    gx[..., -1] += 0.25 * go[..., -1]
    gx[..., 1:] += 0.25 * go[..., :-1]
    return np.moveaxis(gx, -1, axis)


def bilinear_up2(x):
    """Bilinear 2x upsampling with half-pixel centers and edge clamping."""
    _require_nchw(x, "bilinear_up2")
    out = _up2_axis(_up2_axis(x.data, 2), 3)

    def backward(g):
        accumulate(x, _up2_axis_adjoint(_up2_axis_adjoint(g, 3), 2))

    return apply_op(np.ascontiguousarray(out), (x,), backward)


def clamp01(x):
    """Clamp to [0, 1]; evaluation-time only, not part of any loss graph."""
    return Tensor(np.clip(x.data, 0.0, 1.0))
