"""Report figures rendered to files next to the CSV outputs (Agg backend)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_DPI = 130


def plot_training_curves(log_rows, out_path):
    """Train/validation loss and validation PSNR-Y over epochs."""
    epochs = [r.epoch for r in log_rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.plot(epochs, [r.train_loss for r in log_rows], label="train")
    ax1.plot(epochs, [r.val_loss for r in log_rows], label="validation")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("total loss")
    ax1.set_yscale("log")
    ax1.legend(frameon=False)
    ax2.plot(epochs, [r.val_psnr_y for r in log_rows], color="tab:green")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation PSNR-Y (dB)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(out_path)


def plot_metric_comparison(rows, out_path, metric="psnr_y"):
    """Per-frame bars for each method in an evaluation row set."""
    methods = sorted({r["method"] for r in rows})
    frames = sorted({r["frame"] for r in rows if r["frame"] != "mean"})
    width = 0.8 / max(len(methods), 1)
    fig, ax = plt.subplots(figsize=(max(5.0, 0.8 * len(frames) + 2), 3.4))
    x = np.arange(len(frames), dtype=float)
    for i, method in enumerate(methods):
        by_frame = {r["frame"]: r[metric] for r in rows if r["method"] == method}
        vals = [by_frame.get(fr, np.nan) for fr in frames]
        ax.bar(x + i * width, vals, width=width, label=method)
    ax.set_xticks(x + width * (len(methods) - 1) / 2)
    ax.set_xticklabels([str(fr) for fr in frames])
    ax.set_xlabel("frame")
    ax.set_ylabel(metric)
    lo = min(r[metric] for r in rows if r["frame"] != "mean")
    hi = max(r[metric] for r in rows if r["frame"] != "mean")
    pad = 0.05 * max(hi - lo, 1e-3)
    ax.set_ylim(lo - pad, hi + pad)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(out_path)


def plot_partition_map(plane, out_path, decoded_luma=None):
    """Grayscale partition rendering, optionally next to the decoded frame."""
    plane = np.asarray(plane)
    if plane.ndim == 4:
        plane = plane[0, 0]
    n_panels = 2 if decoded_luma is not None else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(4.2 * n_panels, 4.0))
    axes = np.atleast_1d(axes)
    if decoded_luma is not None:
        axes[0].imshow(decoded_luma, cmap="gray", vmin=0, vmax=255)
        axes[0].set_title("decoded frame")
        axes[0].axis("off")
    im = axes[-1].imshow(plane, cmap="gray", vmin=plane.min(), vmax=plane.max())
    axes[-1].set_title("partition map")
    axes[-1].axis("off")
    fig.colorbar(im, ax=axes[-1], fraction=0.046)
    fig.tight_layout()
    fig.savefig(out_path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(out_path)


def plot_ablation(rows, out_path, metric="psnr_y"):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    variants = [r["variant"] for r in rows]
    vals = [r[metric] for r in rows]
    ax.bar(variants, vals, color="tab:blue")
    ax.set_ylabel(metric)
    lo, hi = min(vals), max(vals)
    pad = 0.05 * max(hi - lo, 1e-3)
    ax.set_ylim(lo - pad, hi + pad)
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=FIG_DPI)
    plt.close(fig)
    return Path(out_path)
