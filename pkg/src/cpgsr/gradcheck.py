"""Central finite-difference verification of analytic gradients.

The function under test is replayed in float64 (the engine follows input
dtype), so the finite-difference quotient is limited by truncation error
rather than by single-precision rounding.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericalError
from .tensor import Tensor


@dataclass
class GradcheckReport:
    max_rel_error: float
    tol: float
    n_checked: int
    per_input: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def to_double(t: Tensor, requires_grad=True) -> Tensor:
    return Tensor(t.data.astype(np.float64), requires_grad=requires_grad)


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    tol: float,
    eps: float = 1e-3,
    max_entries: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradcheckReport:
    """Compare fn's backward against central differences.

    fn maps the given tensors to a scalar Tensor. Inputs should be float64
    leaves with requires_grad=True. When max_entries is set, a random subset
    of coordinates per input is probed (for large tensors).
    """
    out = fn(*inputs)
    if not np.isfinite(out.data).all():
        raise NumericalError("gradcheck: function value is not finite")
    for t in inputs:
        t.grad = None
    out.backward()

    if rng is None:
        rng = np.random.default_rng(0)

    worst = 0.0
    checked = 0
    per_input = []
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        n = flat.size
        if max_entries is not None and n > max_entries:
            idx = rng.choice(n, size=max_entries, replace=False)
        else:
            idx = np.arange(n)
        input_worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(fn(*inputs).data)
            flat[i] = orig - eps
            f_minus = float(fn(*inputs).data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(analytic.reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-6)
            input_worst = max(input_worst, err)
            checked += 1
        per_input.append(input_worst)
        worst = max(worst, input_worst)
    return GradcheckReport(max_rel_error=worst, tol=tol, n_checked=checked, per_input=per_input)


# ---------------------------------------------------------------------------
# Named suites over the library's differentiable surfaces
# ---------------------------------------------------------------------------


def suite_conv(seed: int) -> GradcheckReport:
    from .conv import ConvParams, conv2d
    from .tensor import mean

    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(1, 2, 5, 5)), requires_grad=True)
    w = Tensor(rng.normal(0, 0.4, size=(3, 2, 3, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=3), requires_grad=True)

    def f(xv, wv, bv):
        return mean(conv2d(xv, ConvParams(wv, bv)))

    return gradcheck(f, [x, w, b], tol=1e-3)


def suite_pac(seed: int) -> GradcheckReport:
    from .conv import ConvParams
    from .pac import PartitionMap, pac_forward
    from .tensor import mean

    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(1, 3, 6, 6)), requires_grad=True)
    w = Tensor(rng.normal(0, 0.4, size=(3, 3, 3, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=3), requires_grad=True)
    part = PartitionMap(
        rng.choice([1 / 3, 0.5, 2 / 3, 5 / 6, 1.0], size=(1, 1, 6, 6)).astype(np.float32)
    )

    def f(xv, wv, bv):
        return mean(pac_forward(xv, part, ConvParams(wv, bv)))

    return gradcheck(f, [x, w, b], tol=1e-3)


def suite_attention(seed: int) -> GradcheckReport:
    from .model import ModelConfig, ModelWeights, attention_fuse
    from .tensor import mean

    rng = np.random.default_rng(seed)
    c, squeeze = 8, 4
    tensors = {
        "att.gate.weight": Tensor(rng.normal(0, 0.4, size=(c, c, 1, 1)), requires_grad=True),
        "att.gate.bias": Tensor(rng.normal(size=c), requires_grad=True),
        "att.fc1.weight": Tensor(rng.normal(0, 0.4, size=(squeeze, c, 1, 1)), requires_grad=True),
        "att.fc1.bias": Tensor(rng.normal(size=squeeze), requires_grad=True),
        "att.fc2.weight": Tensor(rng.normal(0, 0.4, size=(c, squeeze, 1, 1)), requires_grad=True),
        "att.fc2.bias": Tensor(rng.normal(size=c), requires_grad=True),
    }
    wts = ModelWeights(tensors, "train", ModelConfig())
    x = Tensor(rng.normal(size=(1, c, 4, 4)), requires_grad=True)
    side = Tensor(rng.normal(size=(1, c, 4, 4)), requires_grad=True)
    inputs = [x, side] + list(tensors.values())

    def f(xv, sv, *params):
        return mean(attention_fuse(wts, "att", xv, sv))

    return gradcheck(f, inputs, tol=1e-3, max_entries=24, rng=np.random.default_rng(seed))


def suite_pffl(seed: int) -> GradcheckReport:
    from .losses import pffl, pffl_weights

    rng = np.random.default_rng(seed)
    sr = Tensor(rng.uniform(0, 1, size=(1, 3, 32, 32)), requires_grad=True)
    hr = Tensor(rng.uniform(0, 1, size=(1, 3, 32, 32)))
    frozen = pffl_weights(sr.data, hr.data)

    def f(s):
        return pffl(s, hr, weights=frozen)

    return gradcheck(f, [sr], tol=1e-3, max_entries=48, rng=np.random.default_rng(seed))


def suite_model_loss(seed: int) -> GradcheckReport:
    """End-to-end total loss w.r.t. one conv weight deep in the side branch."""
    from .codec import CodingPriors
    from .losses import LossWeights, pffl_weights, total_loss
    from .model import ModelConfig, cpgsr_forward, init_weights
    from .pac import PartitionMap
    from .tensor import Tensor as Tsr

    rng = np.random.default_rng(seed)
    cfg = ModelConfig(m=2)
    wts = init_weights(cfg, seed)
    # the documented init zeroes the tail conv, which would block upstream
    # gradients; randomize it so the probed path is live
    wts.tensors["recon.tail.weight"].data[:] = rng.normal(
        0, 0.05, size=wts.tensors["recon.tail.weight"].shape
    ).astype(np.float32)
    h = w = 16
    lr = rng.uniform(0, 1, size=(1, 3, h, w)).astype(np.float32)
    hr = rng.uniform(0, 1, size=(1, 3, 2 * h, 2 * w)).astype(np.float32)
    priors = CodingPriors(
        qp_plane=np.full((1, 1, h, w), 37 / 63, np.float32),
        prediction=rng.uniform(0, 255, (1, 1, h, w)).astype(np.float32),
        residual=rng.uniform(-30, 30, (1, 1, h, w)).astype(np.float32),
        partition_map=PartitionMap(
            rng.choice([0.5, 2 / 3, 5 / 6], size=(1, 1, h, w)).astype(np.float32)
        ),
    )
    probe_name = "cdgb.gamma.weight"
    probe = Tensor(wts.tensors[probe_name].data.astype(np.float64), requires_grad=True)
    hr_t = Tsr(hr.astype(np.float64))
    lw = LossWeights()

    def forward(pv):
        wts.tensors[probe_name] = pv
        return cpgsr_forward(Tsr(lr.astype(np.float64)), priors, cfg, wts)

    # freeze the spectral weights at the unperturbed point so the finite
    # differences probe the same locked-gradient objective
    frozen = pffl_weights(forward(probe).data, hr_t.data)

    from .losses import pffl as pffl_op
    from .tensor import l1

    def f(pv):
        sr = forward(pv)
        return l1(sr, hr_t) * lw.alpha + pffl_op(sr, hr_t, weights=frozen) * lw.beta

    return gradcheck(f, [probe], tol=1e-2, max_entries=12, rng=np.random.default_rng(seed))


SUITES = {
    "conv": suite_conv,
    "pac": suite_pac,
    "attention": suite_attention,
    "pffl": suite_pffl,
    "model": suite_model_loss,
}
