"""Training loop, evaluation, and the ablation harness.

Training samples aligned random LR/HR/prior patches, augments them with
dihedral transforms, and optimizes the combined L1 + frequency loss with
Adam at a constant learning rate. Validation runs on the tail 12.5% of the
manifest frames; early stopping watches the validation loss.

Given (seed, configs, dataset), every logged number is reproducible.
"""

import csv
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .data import Sample, collate, crop_patch, load_samples, sample_priors
from .errors import ConfigError
from .frames import FrameRGB, bicubic_upsample2, rgb_to_yuv420
from .losses import LossWeights, total_loss
from .metrics import psnr_plane, ssim_y
from .model import (
    ModelConfig,
    ModelWeights,
    cpgsr_forward,
    fuse_model,
    init_weights,
    save_weights,
)
from .optim import AdamConfig, AdamState, adam_step
from .tensor import Tensor


@dataclass
class TrainConfig:
    lr0: float = 5e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_epochs: int = 200
    early_stop_patience: int = 10
    batch: int = 4
    patch: int = 64  # LR side; HR patches are 2x
    seed: int = 0
    steps_per_epoch: int = 8
    max_steps: Optional[int] = None

    def __post_init__(self):
        if self.patch % 32 or self.patch % 4:
            raise ConfigError("patch must be a multiple of 32 (and of 4)")
        if self.batch < 1 or self.steps_per_epoch < 1:
            raise ConfigError("batch and steps_per_epoch must be positive")


@dataclass
class EpochLog:
    epoch: int
    steps: int
    train_loss: float
    val_loss: float
    val_psnr_y: float
    seconds: float


@dataclass
class TrainResult:
    log: List[EpochLog]
    step_losses: List[float]
    best_epoch: int
    best_val_loss: float
    checkpoint: Optional[Path]
    best_checkpoint: Optional[Path]
    weights: ModelWeights = field(repr=False, default=None)
    best_weights: ModelWeights = field(repr=False, default=None)


def split_samples(samples: List[Sample]):
    """Last 12.5% of frames (at least one) are held out for validation."""
    n_val = max(1, len(samples) // 8)
    if len(samples) <= n_val:
        raise ConfigError(f"dataset of {len(samples)} frames is too small to split")
    return samples[:-n_val], samples[-n_val:]


def _draw_batch(samples, cfg: TrainConfig, rng):
    batch = []
    for _ in range(cfg.batch):
        s = samples[int(rng.integers(len(samples)))]
        h, w = s.lr_rgb.shape[1:]
        if h < cfg.patch or w < cfg.patch:
            raise ConfigError(f"frame {s.index} smaller than the {cfg.patch} patch")
        x = int(rng.integers(w - cfg.patch + 1))
        y = int(rng.integers(h - cfg.patch + 1))
        batch.append(crop_patch(s, x, y, cfg.patch, rng=rng))
    return collate(batch)


def _loss_on(wts, lrs, hrs, priors, lw) -> Tensor:
    sr = cpgsr_forward(Tensor(lrs), priors, wts.config, wts)
    return total_loss(sr, Tensor(hrs), lw)


def validation_loss(wts: ModelWeights, samples: List[Sample], lw: LossWeights):
    """Mean full-frame loss and PSNR-Y over the validation frames."""
    losses = []
    psnrs = []
    for s in samples:
        sr = cpgsr_forward(Tensor(s.lr_rgb[None]), sample_priors(s), wts.config, wts)
        losses.append(float(total_loss(sr, Tensor(s.hr_rgb[None]), lw).data))
        sr_y = rgb_to_yuv420(FrameRGB(np.clip(sr.data[0], 0.0, 1.0))).y
        hr_y = rgb_to_yuv420(FrameRGB(s.hr_rgb)).y
        psnrs.append(psnr_plane(sr_y, hr_y))
    return float(np.mean(losses)), float(np.mean(psnrs))


def train(
    manifest,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    out_dir=None,
    loss_weights: Optional[LossWeights] = None,
    initial: Optional[ModelWeights] = None,
    quiet: bool = True,
) -> TrainResult:
    lw = loss_weights if loss_weights is not None else LossWeights()
    samples = load_samples(manifest)
    train_set, val_set = split_samples(samples)
    rng = np.random.default_rng(train_cfg.seed)
    wts = initial.detached_copy() if initial is not None else init_weights(model_cfg, train_cfg.seed)
    adam_cfg = AdamConfig(
        lr=train_cfg.lr0,
        beta1=train_cfg.adam_beta1,
        beta2=train_cfg.adam_beta2,
        eps=train_cfg.adam_eps,
    )
    state = AdamState()
    params = {name: t.data for name, t in wts.tensors.items()}

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    log: List[EpochLog] = []
    step_losses: List[float] = []
    best_val = np.inf
    best_epoch = -1
    best_wts = None
    t_global = 0
    stop = False

    for epoch in range(train_cfg.max_epochs):
        t0 = time.perf_counter()
        epoch_losses = []
        for _ in range(train_cfg.steps_per_epoch):
            lrs, hrs, priors = _draw_batch(train_set, train_cfg, rng)
            for t in wts.tensors.values():
                t.grad = None
            loss = _loss_on(wts, lrs, hrs, priors, lw)
            loss.backward()
            grads = {name: t.grad for name, t in wts.tensors.items()}
            t_global += 1
            adam_step(params, grads, state, adam_cfg, t_global)
            value = float(loss.data)
            epoch_losses.append(value)
            step_losses.append(value)
            if train_cfg.max_steps is not None and t_global >= train_cfg.max_steps:
                stop = True
                break
        val_loss, val_psnr = validation_loss(wts, val_set, lw)
        entry = EpochLog(
            epoch=epoch,
            steps=t_global,
            train_loss=float(np.mean(epoch_losses)),
            val_loss=val_loss,
            val_psnr_y=val_psnr,
            seconds=time.perf_counter() - t0,
        )
        log.append(entry)
        if not quiet:
            print(
                f"epoch {epoch:3d} step {t_global:5d} "
                f"train {entry.train_loss:.5f} val {val_loss:.5f} psnr {val_psnr:.2f}"
            )
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_wts = wts.detached_copy()
        elif epoch - best_epoch >= train_cfg.early_stop_patience:
            stop = True
        if stop:
            break

    ckpt = best_ckpt = None
    if out_dir is not None:
        ckpt = out_dir / "final.ckpt"
        best_ckpt = out_dir / "best.ckpt"
        save_weights(ckpt, wts)
        save_weights(best_ckpt, best_wts if best_wts is not None else wts)
        _write_log_csv(out_dir / "train_log.csv", log)
    return TrainResult(
        log=log,
        step_losses=step_losses,
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
        checkpoint=ckpt,
        best_checkpoint=best_ckpt,
        weights=wts,
        best_weights=best_wts if best_wts is not None else wts,
    )


def _write_log_csv(path, log: List[EpochLog]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "steps", "train_loss", "val_loss", "val_psnr_y", "seconds"])
        for e in log:
            writer.writerow(
                [e.epoch, e.steps, f"{e.train_loss:.6f}", f"{e.val_loss:.6f}", f"{e.val_psnr_y:.4f}", f"{e.seconds:.2f}"]
            )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def sr_frame(wts: ModelWeights, sample: Sample) -> FrameRGB:
    sr = cpgsr_forward(
        Tensor(sample.lr_rgb[None]), sample_priors(sample), wts.config, wts, clamp=True
    )
    return FrameRGB(sr.data[0])


def _frame_metrics(got: FrameRGB, want: FrameRGB) -> dict:
    a = rgb_to_yuv420(got)
    b = rgb_to_yuv420(want)
    return {
        "psnr_y": psnr_plane(a.y, b.y),
        "psnr_u": psnr_plane(a.u, b.u),
        "psnr_v": psnr_plane(a.v, b.v),
        "ssim_y": ssim_y(a.y, b.y),
    }


def evaluate(manifest, wts: ModelWeights, with_baseline: bool = True) -> List[dict]:
    """Per-frame YUV420-domain metrics for the model (and the bicubic
    baseline), plus 'mean' summary rows."""
    samples = load_samples(manifest)
    rows = []
    for s in samples:
        hr = FrameRGB(s.hr_rgb)
        row = {"method": "cpgsr", "frame": s.index}
        row.update(_frame_metrics(sr_frame(wts, s), hr))
        rows.append(row)
        if with_baseline:
            base_row = {"method": "bicubic", "frame": s.index}
            base_row.update(_frame_metrics(bicubic_upsample2(FrameRGB(s.lr_rgb)), hr))
            rows.append(base_row)
    for method in ["cpgsr"] + (["bicubic"] if with_baseline else []):
        sub = [r for r in rows if r["method"] == method]
        rows.append(
            {
                "method": method,
                "frame": "mean",
                **{
                    k: float(np.mean([r[k] for r in sub]))
                    for k in ("psnr_y", "psnr_u", "psnr_v", "ssim_y")
                },
            }
        )
    return rows


def write_metrics_csv(path, rows: List[dict]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["method", "frame_index", "psnr_y", "psnr_u", "psnr_v", "ssim_y"])
        for r in rows:
            writer.writerow(
                [
                    r["method"],
                    r["frame"],
                    f"{r['psnr_y']:.4f}",
                    f"{r['psnr_u']:.4f}",
                    f"{r['psnr_v']:.4f}",
                    f"{r['ssim_y']:.5f}",
                ]
            )


# ---------------------------------------------------------------------------
# Ablation harness
# ---------------------------------------------------------------------------

ABLATION_VARIANTS = ("full", "no_cdgb", "no_pac", "no_attention", "no_pffl")


def ablate(
    manifest,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    variants=ABLATION_VARIANTS,
) -> List[dict]:
    """One desk-scale training per variant; reports validation metrics.

    No claim is made about which variant wins at this scale.
    """
    rows = []
    for variant in variants:
        cfg = replace(model_cfg)
        lw = LossWeights()
        if variant == "no_cdgb":
            cfg = replace(model_cfg, use_cdgb=False)
        elif variant == "no_pac":
            cfg = replace(model_cfg, use_pac=False)
        elif variant == "no_attention":
            cfg = replace(model_cfg, use_attention=False)
        elif variant == "no_pffl":
            lw = LossWeights(beta=0.0)
        elif variant != "full":
            raise ConfigError(f"unknown ablation variant {variant}")
        result = train(manifest, cfg, train_cfg, loss_weights=lw)
        samples = load_samples(manifest)
        _, val_set = split_samples(samples)
        metrics = []
        for s in val_set:
            metrics.append(_frame_metrics(sr_frame(result.weights, s), FrameRGB(s.hr_rgb)))
        rows.append(
            {
                "variant": variant,
                "train_loss": result.log[-1].train_loss,
                "val_loss": result.log[-1].val_loss,
                **{
                    k: float(np.mean([m[k] for m in metrics]))
                    for k in ("psnr_y", "psnr_u", "psnr_v", "ssim_y")
                },
            }
        )
    return rows


def write_ablation_csv(path, rows: List[dict]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["variant", "train_loss", "val_loss", "psnr_y", "psnr_u", "psnr_v", "ssim_y"]
        )
        for r in rows:
            writer.writerow(
                [
                    r["variant"],
                    f"{r['train_loss']:.6f}",
                    f"{r['val_loss']:.6f}",
                    f"{r['psnr_y']:.4f}",
                    f"{r['psnr_u']:.4f}",
                    f"{r['psnr_v']:.4f}",
                    f"{r['ssim_y']:.5f}",
                ]
            )


def gradient_flow_report(wts: ModelWeights) -> Dict[str, bool]:
    """Which top-level module groups received a nonzero gradient."""
    groups = {}
    for name, t in wts.tensors.items():
        group = name.split(".")[0]
        nonzero = t.grad is not None and bool(np.any(t.grad))
        groups[group] = groups.get(group, False) or nonzero
    return groups
