"""Re-parameterizable conv block: three branches in training, one 3x3 at inference.

Branches: two direct 3x3 convs plus a 1x1 -> 3x3 -> 1x1 chain whose hidden
width is depth_multiplier * c_in. The first 1x1 carries no bias so that the
zero-padded chain collapses exactly into a single 3x3 kernel.
"""

from dataclasses import dataclass

import numpy as np

from .conv import ConvParams, conv2d
from .errors import ShapeError
from .tensor import Tensor

# a fused block is just a plain 3x3 ConvParams
FusedConv = ConvParams


@dataclass
class RepconvParams:
    branch_a: ConvParams
    branch_b: ConvParams
    chain_1: ConvParams  # 1x1, c_in -> d*c_in, bias-free
    chain_2: ConvParams  # 3x3, d*c_in -> d*c_in
    chain_3: ConvParams  # 1x1, d*c_in -> c_out
    depth_multiplier: int = 2

    def __post_init__(self):
        ci, co = self.c_in, self.c_out
        hidden = self.depth_multiplier * ci
        checks = [
            (self.branch_a.weight.shape, (co, ci, 3, 3)),
            (self.branch_b.weight.shape, (co, ci, 3, 3)),
            (self.chain_1.weight.shape, (hidden, ci, 1, 1)),
            (self.chain_2.weight.shape, (hidden, hidden, 3, 3)),
            (self.chain_3.weight.shape, (co, hidden, 1, 1)),
        ]
        for got, want in checks:
            if got != want:
                raise ShapeError(f"repconv branch shape {got}, expected {want}")
        if self.chain_1.bias is not None:
            raise ShapeError("repconv chain's first 1x1 must be bias-free for exact fusion")
        for p in (self.branch_a, self.branch_b, self.chain_1, self.chain_2, self.chain_3):
            if p.stride != 1:
                raise ShapeError("repconv branches must be stride 1")

    @property
    def c_in(self):
        return self.branch_a.weight.shape[1]

    @property
    def c_out(self):
        return self.branch_a.weight.shape[0]


def init_repconv(c_in: int, c_out: int, depth_multiplier: int, rng: np.random.Generator) -> RepconvParams:
    """Kaiming fan-in init; branch_b is halved so the summed output variance
    stays close to a single conv's."""
    hidden = depth_multiplier * c_in

    def kaiming(co, ci, k):
        std = np.sqrt(2.0 / (ci * k * k))
        return rng.normal(0.0, std, size=(co, ci, k, k)).astype(np.float32)

    def conv(co, ci, k, scale=1.0, bias=True):
        w = Tensor(kaiming(co, ci, k) * scale, requires_grad=True)
        b = Tensor(np.zeros(co, dtype=np.float32), requires_grad=True) if bias else None
        return ConvParams(w, b)

    return RepconvParams(
        branch_a=conv(c_out, c_in, 3),
        branch_b=conv(c_out, c_in, 3, scale=0.5),
        chain_1=conv(hidden, c_in, 1, bias=False),
        chain_2=conv(hidden, hidden, 3),
        chain_3=conv(c_out, hidden, 1),
        depth_multiplier=depth_multiplier,
    )


def repconv_forward_train(x: Tensor, p: RepconvParams) -> Tensor:
    """Sum of the three branch outputs (the training-time form)."""
    out_a = conv2d(x, p.branch_a)
    out_b = conv2d(x, p.branch_b)
    out_c = conv2d(conv2d(conv2d(x, p.chain_1), p.chain_2), p.chain_3)
    return out_a + out_b + out_c


def repconv_forward_inference(x: Tensor, fused: FusedConv) -> Tensor:
    return conv2d(x, fused)


def fuse(p: RepconvParams) -> FusedConv:
    """Collapse all branches into a single 3x3 conv.

    Chain contraction: W[o,i,u,v] = sum_{m,q} W3[o,m] W2[m,q,u,v] W1[q,i];
    the chain bias is W3 @ b2 + b3 (exact because the first 1x1 is bias-free).
    Parallel branches then add kernel-wise.
    """
    w1 = p.chain_1.weight.data[:, :, 0, 0]
    w2 = p.chain_2.weight.data
    w3 = p.chain_3.weight.data[:, :, 0, 0]
    w_chain = np.einsum("om,mquv,qi->oiuv", w3, w2, w1)
    b_chain = w3 @ p.chain_2.bias.data + p.chain_3.bias.data
    weight = p.branch_a.weight.data + p.branch_b.weight.data + w_chain
    bias = p.branch_a.bias.data + p.branch_b.bias.data + b_chain
    return ConvParams(Tensor(weight.astype(np.float32)), Tensor(bias.astype(np.float32)))


def lift(fused: FusedConv, depth_multiplier: int = 2) -> RepconvParams:
    """Embed a fused conv back into the multi-branch form (other branches zero)."""
    co, ci, k, _ = fused.weight.shape
    if k != 3:
        raise ShapeError(f"can only lift a 3x3 conv, got k={k}")
    hidden = depth_multiplier * ci

    def zeros(shape, bias_len=None):
        w = Tensor(np.zeros(shape, dtype=np.float32))
        b = None if bias_len is None else Tensor(np.zeros(bias_len, dtype=np.float32))
        return ConvParams(w, b)

    bias = fused.bias if fused.bias is not None else Tensor(np.zeros(co, dtype=np.float32))
    return RepconvParams(
        branch_a=ConvParams(Tensor(fused.weight.data.copy()), Tensor(bias.data.copy())),
        branch_b=zeros((co, ci, 3, 3), co),
        chain_1=zeros((hidden, ci, 1, 1)),
        chain_2=zeros((hidden, hidden, 3, 3), hidden),
        chain_3=zeros((co, hidden, 1, 1), co),
        depth_multiplier=depth_multiplier,
    )


def fused_param_count(c_in: int, c_out: int) -> int:
    return c_out * c_in * 9 + c_out


def train_param_count(c_in: int, c_out: int, depth_multiplier: int) -> int:
    hidden = depth_multiplier * c_in
    direct = 2 * (c_out * c_in * 9 + c_out)
    chain = hidden * c_in + (hidden * hidden * 9 + hidden) + (c_out * hidden + c_out)
    return direct + chain
