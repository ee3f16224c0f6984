"""2D convolution (cross-correlation) with an optional per-pixel tap mask.

The masked path is what pixel-adaptive convolution uses: the im2col patch
matrix is multiplied by a (n, 1, k, k, oh, ow) weight field before the same
matmul that plain conv2d performs. With an all-ones mask both paths execute
identical arithmetic, so their outputs are bit-equal.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeError
from .tensor import Tensor, accumulate, apply_op


@dataclass
class ConvParams:
    """Weight (c_out, c_in, k, k), optional bias (c_out,), stride, padding.

    padding=None means "same" padding (k-1)//2 for stride-1 use.
    """

    weight: Tensor
    bias: Optional[Tensor] = None
    stride: int = 1
    padding: Optional[int] = None

    def __post_init__(self):
        if self.weight.data.ndim != 4:
            raise ShapeError(f"conv weight must be rank 4, got {self.weight.shape}")
        if self.weight.shape[2] != self.weight.shape[3]:
            raise ShapeError(f"conv kernel must be square, got {self.weight.shape}")
        if self.bias is not None and self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match c_out={self.weight.shape[0]}"
            )
        if self.stride < 1:
            raise ShapeError(f"stride must be positive, got {self.stride}")
        if self.padding is None:
            self.padding = (self.weight.shape[2] - 1) // 2
        if self.padding < 0:
            raise ShapeError(f"padding must be non-negative, got {self.padding}")

    @property
    def c_out(self):
        return self.weight.shape[0]

    @property
    def c_in(self):
        return self.weight.shape[1]

    @property
    def kernel(self):
        return self.weight.shape[2]


def _out_dims(h, w, k, stride, padding):
    oh = (h + 2 * padding - k) // stride + 1
    ow = (w + 2 * padding - k) // stride + 1
    if oh <= 0 or ow <= 0:
        raise ShapeError(f"non-positive conv output dims for input {(h, w)}, k={k}")
    return oh, ow


def _pad(d, padding):
    if padding == 0:
        return d
    p = padding
    return np.pad(d, ((0, 0), (0, 0), (p, p), (p, p)))


def _im2col(dp, k, stride, oh, ow):
    """Strided view (n, c, k, k, oh, ow) over the padded input; no copy."""
    n, c = dp.shape[:2]
    sn, sc, sh, sw = dp.strides
    return np.lib.stride_tricks.as_strided(
        dp, (n, c, k, k, oh, ow), (sn, sc, sh, sw, stride * sh, stride * sw)
    )


def _col2im(gcols, x_shape, k, stride, padding):
    """Scatter-add of patch gradients back onto the (unpadded) input."""
    n, c, h, w = x_shape
    oh, ow = gcols.shape[4:]
    gp = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=gcols.dtype)
    for u in range(k):
        for v in range(k):
            gp[:, :, u : u + oh * stride : stride, v : v + ow * stride : stride] += gcols[
                :, :, u, v
            ]
    if padding == 0:
        return gp
    return gp[:, :, padding : padding + h, padding : padding + w]


def _forward_data(xd, wd, bd, stride, padding, mask):
    n, c, h, w = xd.shape
    co, ci, k, _ = wd.shape
    if c != ci:
        raise ShapeError(f"conv input has {c} channels, weight expects {ci}")
    oh, ow = _out_dims(h, w, k, stride, padding)
    cols = _im2col(_pad(xd, padding), k, stride, oh, ow)
    if mask is not None:
        cols = cols * mask
    cols2 = np.ascontiguousarray(cols).reshape(n, c * k * k, oh * ow)
    out = np.matmul(wd.reshape(co, -1), cols2)
    if bd is not None:
        out = out + bd.reshape(1, co, 1)
    return out.reshape(n, co, oh, ow)


def _backward_data(g, xd, wd, stride, padding, mask, need_gx, need_gw):
    n, c, h, w = xd.shape
    co, ci, k, _ = wd.shape
    oh, ow = g.shape[2:]
    g2 = g.reshape(n, co, oh * ow)
    gx = gw = None
    if need_gw:
        cols = _im2col(_pad(xd, padding), k, stride, oh, ow)
        if mask is not None:
            cols = cols * mask
        cols2 = np.ascontiguousarray(cols).reshape(n, c * k * k, oh * ow)
        gw = np.matmul(g2, cols2.transpose(0, 2, 1)).sum(axis=0).reshape(wd.shape)
    if need_gx:
        gcols = np.matmul(wd.reshape(co, -1).T, g2).reshape(n, c, k, k, oh, ow)
        if mask is not None:
            gcols = gcols * mask
        gx = _col2im(gcols, xd.shape, k, stride, padding)
    gb = g2.sum(axis=(0, 2))
    return gx, gw, gb


def _conv_op(x, p, mask):
    out = _forward_data(
        x.data, p.weight.data, None if p.bias is None else p.bias.data, p.stride, p.padding, mask
    )
    weight, bias, stride, padding = p.weight, p.bias, p.stride, p.padding
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gx, gw, gb = _backward_data(
            g,
            x.data,
            weight.data,
            stride,
            padding,
            mask,
            x.requires_grad,
            weight.requires_grad,
        )
        if gx is not None:
            accumulate(x, gx)
        if gw is not None:
            accumulate(weight, gw)
        if bias is not None:
            accumulate(bias, gb)

    return apply_op(out, parents, backward)


def conv2d(x: Tensor, p: ConvParams) -> Tensor:
    """Cross-correlation with zero padding; differentiable w.r.t. x, weight, bias."""
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d expects NCHW input, got shape {x.data.shape}")
    return _conv_op(x, p, None)


def masked_conv2d(x: Tensor, p: ConvParams, mask: np.ndarray) -> Tensor:
    """conv2d with per-output-pixel tap weights (n, 1, k, k, oh, ow).

    The mask is plain data: it never enters the gradient tape.
    """
    if x.data.ndim != 4:
        raise ShapeError(f"masked_conv2d expects NCHW input, got shape {x.data.shape}")
    n, _, h, w = x.data.shape
    k = p.kernel
    oh, ow = _out_dims(h, w, k, p.stride, p.padding)
    expected = (n, 1, k, k, oh, ow)
    if mask.shape != expected:
        raise ShapeError(f"mask shape {mask.shape} != expected {expected}")
    return _conv_op(x, p, mask.astype(x.data.dtype, copy=False))


def conv2d_backward(x: Tensor, p: ConvParams, grad_out: np.ndarray):
    """Direct analytic gradients of conv2d: (grad_x, grad_w, grad_b)."""
    g = np.asarray(grad_out, dtype=x.data.dtype)
    oh, ow = _out_dims(x.shape[2], x.shape[3], p.kernel, p.stride, p.padding)
    if g.shape != (x.shape[0], p.c_out, oh, ow):
        raise ShapeError(
            f"grad_out shape {g.shape} != conv output shape {(x.shape[0], p.c_out, oh, ow)}"
        )
    gx, gw, gb = _backward_data(g, x.data, p.weight.data, p.stride, p.padding, None, True, True)
    return gx, gw, gb
