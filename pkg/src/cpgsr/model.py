"""The prior-guided SR network.

Three stages: a guided side branch that turns the coding priors into
multi-depth feature taps, a small U-net that fuses those taps into the LR
features via gated attention, and a chain of re-parameterizable conv blocks
feeding a 2x pixel-shuffle reconstruction. A bilinear 2x skip from the input
carries the baseline image, so a zero-initialized network starts exactly at
the bilinear upsample.

Weights live in a flat name -> Tensor map so that fusion, checkpointing and
ablation stay simple. `mode` selects the multi-branch ("train") or fused
("fused") form of the rep blocks.
"""

from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional

import numpy as np

from . import fileio
from .codec import CodingPriors
from .conv import ConvParams, conv2d
from .errors import ConfigError, ShapeError
from .pac import PartitionMap, pac_forward
from .reparam import (
    RepconvParams,
    fuse,
    fused_param_count,
    repconv_forward_train,
    train_param_count,
)
from .tensor import (
    Tensor,
    add,
    bilinear_up2,
    clamp01,
    concat,
    gelu,
    global_avg_pool,
    mul,
    pixel_shuffle,
    sigmoid,
)

ATTENTION_BOTTLENECK = 8  # channel-attention squeeze width
UPSAMPLE_CHANNELS = 128  # 1x1 conv width before 2x pixel shuffle


@dataclass
class ModelConfig:
    base_channels: int = 32
    m: int = 5
    scale: int = 2
    depth_multiplier: int = 2
    unet_levels: int = 3
    prior_channels: int = 3
    use_cdgb: bool = True
    use_pac: bool = True
    use_attention: bool = True

    def __post_init__(self):
        if self.scale != 2:
            raise ConfigError("only scale 2 is supported")
        if not 1 <= self.m <= 16:
            raise ConfigError(f"m must be in [1, 16], got {self.m}")
        if self.unet_levels != 3:
            raise ConfigError("the backbone is fixed at 3 levels")
        if self.prior_channels not in (3, 5):
            raise ConfigError("prior_channels must be 3 (luma priors) or 5 (rgb priors)")


@dataclass
class ModelWeights:
    tensors: Dict[str, Tensor]
    mode: str
    config: ModelConfig

    def parameters(self) -> Dict[str, Tensor]:
        return self.tensors

    def detached_copy(self) -> "ModelWeights":
        return ModelWeights(
            {k: Tensor(v.data.copy(), requires_grad=v.requires_grad) for k, v in self.tensors.items()},
            self.mode,
            replace(self.config),
        )


def _repconv_shapes(prefix, c, d):
    hidden = d * c
    return {
        f"{prefix}.a.weight": (c, c, 3, 3),
        f"{prefix}.a.bias": (c,),
        f"{prefix}.b.weight": (c, c, 3, 3),
        f"{prefix}.b.bias": (c,),
        f"{prefix}.c1.weight": (hidden, c, 1, 1),
        f"{prefix}.c2.weight": (hidden, hidden, 3, 3),
        f"{prefix}.c2.bias": (hidden,),
        f"{prefix}.c3.weight": (c, hidden, 1, 1),
        f"{prefix}.c3.bias": (c,),
    }


def weight_schema(cfg: ModelConfig, mode: str = "train") -> Dict[str, tuple]:
    """Ordered name -> shape map for the given configuration."""
    c = cfg.base_channels
    d = cfg.depth_multiplier
    schema: Dict[str, tuple] = {}

    def conv(prefix, co, ci, k):
        schema[f"{prefix}.weight"] = (co, ci, k, k)
        schema[f"{prefix}.bias"] = (co,)

    def rep(prefix):
        if mode == "fused":
            conv(f"{prefix}.fused", c, c, 3)
        else:
            schema.update(_repconv_shapes(prefix, c, d))

    conv("head", c, 3, 3)
    if cfg.use_cdgb:
        conv("cdgb.prior", c, cfg.prior_channels, 3)
        conv("cdgb.gamma", c, 2 * c, 3)
        conv("cdgb.beta", c, 2 * c, 3)
        rep("cdgb.rep")
        conv("cdgb.down1", c, c, 3)
        conv("cdgb.pac1", c, c, 3)
        conv("cdgb.down2", c, c, 3)
        conv("cdgb.pac2", c, c, 3)
    for i in range(cfg.unet_levels):
        if cfg.use_attention:
            conv(f"unet.att{i}.gate", c, c, 1)
            conv(f"unet.att{i}.fc1", ATTENTION_BOTTLENECK, c, 1)
            conv(f"unet.att{i}.fc2", c, ATTENTION_BOTTLENECK, 1)
        else:
            conv(f"unet.fuse{i}", c, c, 3)
    conv("unet.down0", c, c, 3)
    conv("unet.down1", c, c, 3)
    conv("unet.up1", UPSAMPLE_CHANNELS, c, 1)
    conv("unet.up0", UPSAMPLE_CHANNELS, c, 1)
    for i in range(cfg.m):
        rep(f"recon.rep{i}")
    conv("recon.tail", 3 * cfg.scale * cfg.scale, c, 3)
    return schema


def init_weights(cfg: ModelConfig, seed: int) -> ModelWeights:
    """Fan-in-scaled init; the tail conv starts at zero so the network begins
    as a pure bilinear upsampler.

    The rep blocks carry no activations, so the per-conv gain is 1 (variance
    preserving for linear maps) and the three branches are scaled to keep the
    summed block variance-neutral: branch a at 1/sqrt(2), branch b at 0.5,
    and the chain's last 1x1 at 0.5.
    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in weight_schema(cfg).items():
        if name.endswith(".bias"):
            data = np.zeros(shape, np.float32)
        elif name == "recon.tail.weight":
            data = np.zeros(shape, np.float32)
        else:
            fan_in = int(np.prod(shape[1:]))
            data = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=shape).astype(np.float32)
            if ".a.weight" in name:
                data *= np.float32(1.0 / np.sqrt(2.0))
            elif ".b.weight" in name or ".c3.weight" in name:
                data *= np.float32(0.5)
        tensors[name] = Tensor(data, requires_grad=True)
    return ModelWeights(tensors, "train", cfg)


def zero_weights(cfg: ModelConfig) -> ModelWeights:
    tensors = {
        name: Tensor(np.zeros(shape, np.float32), requires_grad=True)
        for name, shape in weight_schema(cfg).items()
    }
    return ModelWeights(tensors, "train", cfg)


def _cp(wts: ModelWeights, prefix, stride=1) -> ConvParams:
    t = wts.tensors
    return ConvParams(t[f"{prefix}.weight"], t.get(f"{prefix}.bias"), stride=stride)


def _rep_params(wts: ModelWeights, prefix) -> RepconvParams:
    t = wts.tensors
    return RepconvParams(
        branch_a=ConvParams(t[f"{prefix}.a.weight"], t[f"{prefix}.a.bias"]),
        branch_b=ConvParams(t[f"{prefix}.b.weight"], t[f"{prefix}.b.bias"]),
        chain_1=ConvParams(t[f"{prefix}.c1.weight"], None),
        chain_2=ConvParams(t[f"{prefix}.c2.weight"], t[f"{prefix}.c2.bias"]),
        chain_3=ConvParams(t[f"{prefix}.c3.weight"], t[f"{prefix}.c3.bias"]),
        depth_multiplier=wts.config.depth_multiplier,
    )


def _rep_forward(wts: ModelWeights, prefix, x: Tensor) -> Tensor:
    if wts.mode == "fused":
        return conv2d(x, _cp(wts, f"{prefix}.fused"))
    return repconv_forward_train(x, _rep_params(wts, prefix))


def head(cfg: ModelConfig, wts: ModelWeights, lr_rgb: Tensor) -> Tensor:
    if lr_rgb.shape[1] != 3:
        raise ShapeError(f"expected RGB input, got {lr_rgb.shape[1]} channels")
    return conv2d(lr_rgb, _cp(wts, "head"))


def _prior_planes(priors: CodingPriors, batch: int, dtype) -> np.ndarray:
    """Stack (prediction/255, residual/255, qp) into network-scale planes."""
    planes = np.concatenate(
        [
            priors.prediction / np.float32(255.0),
            priors.residual / np.float32(255.0),
            priors.qp_plane,
        ],
        axis=1,
    ).astype(dtype, copy=False)
    if planes.shape[0] == 1 and batch > 1:
        planes = np.broadcast_to(planes, (batch,) + planes.shape[1:])
    return np.ascontiguousarray(planes)


def cdgb_forward(cfg: ModelConfig, wts: ModelWeights, feat_in: Tensor, priors: CodingPriors):
    """Side branch: affine modulation from the priors, then three feature taps
    at full, half and quarter resolution (the deeper two partition-guided)."""
    n, _, h, w = feat_in.shape
    if h % 4 or w % 4:
        raise ShapeError(f"spatial dims must be divisible by 4, got {(h, w)}")
    planes = _prior_planes(priors, n, feat_in.dtype)
    if planes.shape[2:] != (h, w):
        raise ShapeError(f"prior planes {planes.shape[2:]} do not match features {(h, w)}")
    prior_feat = conv2d(Tensor(planes), _cp(wts, "cdgb.prior"))
    stacked = concat([prior_feat, feat_in], axis=1)
    gamma = conv2d(stacked, _cp(wts, "cdgb.gamma"))
    beta = conv2d(stacked, _cp(wts, "cdgb.beta"))
    f0 = add(mul(gamma, feat_in), beta)
    f1 = _rep_forward(wts, "cdgb.rep", f0)

    part = priors.partition_map
    if part.plane.shape[0] == 1 and n > 1:
        part = PartitionMap(np.broadcast_to(part.plane, (n,) + part.plane.shape[1:]).copy())
    part_half = part.pooled2()
    part_quarter = part_half.pooled2()

    def guided(x, conv_prefix, level_part):
        p = _cp(wts, conv_prefix)
        if cfg.use_pac:
            return pac_forward(x, level_part, p)
        return conv2d(x, p)

    f2 = guided(conv2d(f1, _cp(wts, "cdgb.down1", stride=2)), "cdgb.pac1", part_half)
    f3 = guided(conv2d(f2, _cp(wts, "cdgb.down2", stride=2)), "cdgb.pac2", part_quarter)
    return f1, f2, f3


def attention_fuse(wts: ModelWeights, prefix: str, x: Tensor, side: Tensor) -> Tensor:
    """Gate x by the side features, squeeze-excite, then add the side path."""
    if x.shape != side.shape:
        raise ShapeError(f"attention operands differ: {x.shape} vs {side.shape}")
    g = sigmoid(conv2d(side, _cp(wts, f"{prefix}.gate")))
    y = mul(g, x)
    s = global_avg_pool(y)
    s = gelu(conv2d(s, _cp(wts, f"{prefix}.fc1")))
    s = sigmoid(conv2d(s, _cp(wts, f"{prefix}.fc2")))
    return add(mul(s, y), side)


def _fuse_level(cfg, wts, i, x, side):
    if cfg.use_attention:
        return attention_fuse(wts, f"unet.att{i}", x, side)
    return add(conv2d(x, _cp(wts, f"unet.fuse{i}")), side)


def _up(wts, prefix, x):
    return pixel_shuffle(conv2d(x, _cp(wts, prefix)), 2)


def unet_forward(cfg: ModelConfig, wts: ModelWeights, feat_in, f1, f2, f3) -> Tensor:
    e0 = _fuse_level(cfg, wts, 0, feat_in, f1)
    e1 = _fuse_level(cfg, wts, 1, conv2d(e0, _cp(wts, "unet.down0", stride=2)), f2)
    e2 = _fuse_level(cfg, wts, 2, conv2d(e1, _cp(wts, "unet.down1", stride=2)), f3)
    d1 = add(_up(wts, "unet.up1", e2), e1)
    d0 = add(_up(wts, "unet.up0", d1), e0)
    return d0


def reconstruct(cfg: ModelConfig, wts: ModelWeights, d0: Tensor) -> Tensor:
    z = d0
    for i in range(cfg.m):
        z = _rep_forward(wts, f"recon.rep{i}", z)
    return pixel_shuffle(conv2d(z, _cp(wts, "recon.tail")), cfg.scale)


def _zero_side(feat_in: Tensor):
    n, c, h, w = feat_in.shape
    dtype = feat_in.dtype
    return (
        Tensor(np.zeros((n, c, h, w), dtype)),
        Tensor(np.zeros((n, c, h // 2, w // 2), dtype)),
        Tensor(np.zeros((n, c, h // 4, w // 4), dtype)),
    )


def cpgsr_forward(
    lr_rgb: Tensor,
    priors: Optional[CodingPriors],
    cfg: ModelConfig,
    wts: ModelWeights,
    clamp: bool = False,
) -> Tensor:
    """Full forward: SR residual plus the bilinear 2x skip.

    `clamp` snips the output into [0, 1] for evaluation; losses are computed
    on the unclamped output.
    """
    n, _, h, w = lr_rgb.shape
    if h % 4 or w % 4:
        raise ShapeError(f"LR dims must be divisible by 4, got {(h, w)}")
    feat_in = head(cfg, wts, lr_rgb)
    if cfg.use_cdgb and priors is not None:
        f1, f2, f3 = cdgb_forward(cfg, wts, feat_in, priors)
    else:
        f1, f2, f3 = _zero_side(feat_in)
    d0 = unet_forward(cfg, wts, feat_in, f1, f2, f3)
    sr = add(reconstruct(cfg, wts, d0), bilinear_up2(lr_rgb))
    return clamp01(sr) if clamp else sr


def fuse_model(wts: ModelWeights) -> ModelWeights:
    """Collapse every rep block; all other tensors are copied verbatim."""
    if wts.mode == "fused":
        return wts
    cfg = wts.config
    prefixes = [f"recon.rep{i}" for i in range(cfg.m)]
    if cfg.use_cdgb:
        prefixes.append("cdgb.rep")
    rep_names = set()
    fused_entries = {}
    for prefix in prefixes:
        rep_names.update(_repconv_shapes(prefix, cfg.base_channels, cfg.depth_multiplier))
        fused_conv = fuse(_rep_params(wts, prefix))
        fused_entries[f"{prefix}.fused.weight"] = fused_conv.weight
        fused_entries[f"{prefix}.fused.bias"] = fused_conv.bias
    tensors = {}
    for name, shape in weight_schema(cfg, mode="fused").items():
        if name in fused_entries:
            tensors[name] = fused_entries[name]
        else:
            tensors[name] = Tensor(wts.tensors[name].data.copy())
    return ModelWeights(tensors, "fused", cfg)


def param_count(cfg: ModelConfig):
    """Exact scalar-parameter counts: {'train': n, 'fused': n}."""
    counts = {}
    for mode in ("train", "fused"):
        counts[mode] = sum(int(np.prod(s)) for s in weight_schema(cfg, mode).values())
    # sanity: rep blocks account exactly for the train/fused difference
    n_reps = cfg.m + (1 if cfg.use_cdgb else 0)
    c, d = cfg.base_channels, cfg.depth_multiplier
    expected_delta = n_reps * (train_param_count(c, c, d) - fused_param_count(c, c))
    assert counts["train"] - counts["fused"] == expected_delta
    return counts


# ---------------------------------------------------------------------------
# Checkpoint glue
# ---------------------------------------------------------------------------

_META_PREFIX = "__config__."
_BOOL_FIELDS = ("use_cdgb", "use_pac", "use_attention")


def save_weights(path, wts: ModelWeights):
    entries = {name: t.data for name, t in wts.tensors.items()}
    for f in fields(ModelConfig):
        entries[_META_PREFIX + f.name] = np.array(
            [float(getattr(wts.config, f.name))], np.float32
        )
    entries[_META_PREFIX + "fused"] = np.array(
        [1.0 if wts.mode == "fused" else 0.0], np.float32
    )
    fileio.save_checkpoint(path, entries)


def load_weights(path) -> ModelWeights:
    entries = fileio.load_checkpoint(path)
    kwargs = {}
    for f in fields(ModelConfig):
        key = _META_PREFIX + f.name
        if key not in entries:
            raise ConfigError(f"checkpoint missing config entry {f.name}")
        raw = float(entries[key][0])
        kwargs[f.name] = bool(raw) if f.name in _BOOL_FIELDS else int(raw)
    cfg = ModelConfig(**kwargs)
    mode = "fused" if float(entries[_META_PREFIX + "fused"][0]) else "train"
    schema = weight_schema(cfg, mode)
    tensors = {}
    for name, shape in schema.items():
        if name not in entries:
            raise ConfigError(f"checkpoint missing tensor {name}")
        arr = entries[name]
        if arr.shape != shape:
            raise ShapeError(f"checkpoint tensor {name} has shape {arr.shape}, expected {shape}")
        tensors[name] = Tensor(arr.astype(np.float32), requires_grad=(mode == "train"))
    return ModelWeights(tensors, mode, cfg)
