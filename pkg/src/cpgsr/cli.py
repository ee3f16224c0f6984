"""Command-line surface for the whole pipeline.

Exit codes: 0 success, 2 configuration/usage error, 3 I/O or file-format
error, 4 numerical failure.
"""

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .data import build_dataset, load_samples
from .errors import ConfigError, FormatError, NumericalError
from .fileio import (
    load_manifest,
    read_f32_plane,
    validate_manifest,
    write_pgm,
    write_ppm,
    write_yuv,
)
from .frames import FrameRGB, rgb_to_yuv420
from .gradcheck import SUITES
from .losses import LossWeights
from .model import (
    ModelConfig,
    fuse_model,
    load_weights,
    param_count,
    save_weights,
)
from .train import (
    TrainConfig,
    ablate,
    evaluate,
    sr_frame,
    train,
    write_ablation_csv,
    write_metrics_csv,
)

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _parse_size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as e:
        raise ConfigError(f"--size must look like 512x256, got {text!r}") from e


def _load_config_file(path):
    if path is None:
        return {}, {}
    raw = json.loads(Path(path).read_text())
    return raw.get("model", {}), raw.get("train", {})


def _build_configs(args):
    """Config file first, then flags override."""
    model_kw, train_kw = _load_config_file(getattr(args, "config", None))
    for name in ("m", "base_channels"):
        v = getattr(args, name, None)
        if v is not None:
            model_kw[name] = v
    for flag, field_name in (
        ("batch", "batch"),
        ("patch", "patch"),
        ("seed", "seed"),
        ("epochs", "max_epochs"),
        ("max_steps", "max_steps"),
        ("steps_per_epoch", "steps_per_epoch"),
        ("lr", "lr0"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            train_kw[field_name] = v
    known_model = {f.name for f in fields(ModelConfig)}
    known_train = {f.name for f in fields(TrainConfig)}
    for kw, known, label in ((model_kw, known_model, "model"), (train_kw, known_train, "train")):
        unknown = set(kw) - known
        if unknown:
            raise ConfigError(f"unknown {label} config keys: {sorted(unknown)}")
    return ModelConfig(**model_kw), TrainConfig(**train_kw)


def cmd_simulate(args):
    w, h = _parse_size(args.size)
    manifest_path = build_dataset(args.out, args.seed, args.frames, (h, w), args.qp)
    validate_manifest(load_manifest(manifest_path))
    print(f"wrote {args.frames} frames and priors under {args.out}")
    print(f"manifest: {manifest_path}")
    return 0


def cmd_train(args):
    model_cfg, train_cfg = _build_configs(args)
    lw = LossWeights(beta=0.0) if args.no_pffl else LossWeights()
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    result = train(args.manifest, model_cfg, train_cfg, loss_weights=lw, quiet=args.quiet)
    save_weights(out_path, result.weights)
    best_path = out_path.with_suffix(out_path.suffix + ".best")
    save_weights(best_path, result.best_weights)
    log_csv = out_path.with_suffix(".log.csv")
    from .train import _write_log_csv

    _write_log_csv(log_csv, result.log)
    from .plots import plot_training_curves

    fig = plot_training_curves(result.log, out_path.with_suffix(".loss.png"))
    last = result.log[-1]
    print(f"trained {last.steps} steps over {len(result.log)} epochs")
    print(f"final train loss {last.train_loss:.5f}, val loss {last.val_loss:.5f}, "
          f"val PSNR-Y {last.val_psnr_y:.2f} dB")
    print(f"checkpoint: {out_path}")
    print(f"best (val) checkpoint: {best_path}")
    print(f"log: {log_csv}")
    print(f"figure: {fig}")
    return 0


def cmd_fuse(args):
    wts = load_weights(args.infile)
    if wts.mode == "fused":
        raise ConfigError("checkpoint is already fused")
    fused = fuse_model(wts)
    save_weights(args.out, fused)
    counts = param_count(wts.config)
    print(f"parameters before fusion: {counts['train']}")
    print(f"parameters after fusion:  {counts['fused']}")
    print(f"wrote {args.out}")
    return 0


def cmd_infer(args):
    wts = load_weights(args.ckpt)
    if args.fused and wts.mode != "fused":
        wts = fuse_model(wts)
    samples = load_samples(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    yuv_frames = []
    for s in samples:
        sr = sr_frame(wts, s)
        write_ppm(out_dir / f"sr_{s.index:03d}.ppm", sr)
        yuv_frames.append(rgb_to_yuv420(sr))
    write_yuv(out_dir / "sr.yuv", yuv_frames)
    print(f"wrote {len(samples)} SR frames (PPM + sr.yuv) to {out_dir}")
    return 0


def cmd_eval(args):
    wts = load_weights(args.ckpt)
    if args.fused and wts.mode != "fused":
        wts = fuse_model(wts)
    rows = evaluate(args.manifest, wts)
    csv_path = Path(args.csv)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(csv_path, rows)
    from .plots import plot_metric_comparison

    figs = [
        plot_metric_comparison(rows, csv_path.with_suffix(".psnr_y.png"), metric="psnr_y"),
        plot_metric_comparison(rows, csv_path.with_suffix(".ssim_y.png"), metric="ssim_y"),
    ]
    for r in rows:
        if r["frame"] == "mean":
            print(
                f"{r['method']:>8}: PSNR-Y {r['psnr_y']:.2f} U {r['psnr_u']:.2f} "
                f"V {r['psnr_v']:.2f} SSIM {r['ssim_y']:.4f}"
            )
    print(f"csv: {csv_path}")
    for f in figs:
        print(f"figure: {f}")
    return 0


def cmd_gradcheck(args):
    names = list(SUITES) if args.module == "all" else [args.module]
    worst = 0.0
    for name in names:
        report = SUITES[name](args.seed)
        status = "ok" if report.passed else "FAIL"
        print(
            f"{name:>10}: max rel error {report.max_rel_error:.3e} "
            f"(tol {report.tol:g}, {report.n_checked} coords) {status}"
        )
        worst = max(worst, report.max_rel_error / report.tol)
    if worst > 1.0:
        raise NumericalError("gradient check failed")
    return 0


def cmd_viz_partition(args):
    manifest = load_manifest(args.manifest)
    samples = {s["index"]: s for s in manifest["samples"]}
    if args.frame not in samples:
        raise ConfigError(f"frame {args.frame} not in manifest")
    s = samples[args.frame]
    base = Path(manifest["_base_dir"])
    w, h = s["lr_size"]
    plane = read_f32_plane(base / s["priors"]["partition"], (1, 1, h, w))[0, 0]
    write_pgm(args.out, plane * 255.0)
    print(f"wrote {args.out}")
    if args.fig:
        from .fileio import read_yuv
        from .plots import plot_partition_map

        luma = read_yuv(base / s["decoded"], w, h)[0].y
        print(f"figure: {plot_partition_map(plane, args.fig, decoded_luma=luma)}")
    return 0


def cmd_ablate(args):
    model_cfg, train_cfg = _build_configs(args)
    rows = ablate(args.manifest, model_cfg, train_cfg)
    csv_path = Path(args.csv)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    write_ablation_csv(csv_path, rows)
    from .plots import plot_ablation

    fig = plot_ablation(rows, csv_path.with_suffix(".psnr_y.png"))
    for r in rows:
        print(f"{r['variant']:>13}: PSNR-Y {r['psnr_y']:.2f} SSIM {r['ssim_y']:.4f}")
    print(f"csv: {csv_path}")
    print(f"figure: {fig}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cpgsr",
        description="Prior-guided 2x super-resolution for synthetic compressed game frames",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic frames, codec output and priors")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--size", required=True, help="HR frame size, e.g. 512x256")
    p.add_argument("--qp", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train on a simulated dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="JSON file with model/train sections")
    p.add_argument("--out", required=True, help="checkpoint path to write")
    p.add_argument("--m", type=int)
    p.add_argument("--base-channels", dest="base_channels", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--patch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--steps-per-epoch", dest="steps_per_epoch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--no-pffl", action="store_true", help="train with the L1 term only")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fuse", help="collapse rep blocks into single 3x3 convs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("infer", help="super-resolve every frame in a manifest")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fused", action="store_true")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="YUV-domain metrics vs the bicubic baseline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--fused", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--module", choices=sorted(SUITES) + ["all"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("viz-partition", help="render a frame's partition map")
    p.add_argument("--manifest", required=True)
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--out", required=True, help="PGM output path")
    p.add_argument("--fig", help="optional PNG figure path")
    p.set_defaults(func=cmd_viz_partition)

    p = sub.add_parser("ablate", help="desk-scale component ablation table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="JSON file with model/train sections")
    p.add_argument("--csv", required=True)
    p.add_argument("--batch", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--steps-per-epoch", dest="steps_per_epoch", type=int)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, OSError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
