"""Command-line entry point: ``crackseg <command> ...``.

Exit codes: 0 success, 2 bad arguments or configuration, 1 data or
numerical failure. Set ``CRACKSEG_LOG_LEVEL`` (e.g. ``INFO``) for progress logs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import ablate, checkpoint, complexity, scan_paths
from .config import RunConfig
from .data import load_dataset, read_image, read_mask, read_png, to_uint8, write_png
from .errors import ConfigError, CrackSegError, PathError, ShapeError, UsageError
from .head import binarize
from .metrics import evaluate
from .train import synthetic_samples, train

log = logging.getLogger("crackseg")

USAGE_ERRORS = (ConfigError, ShapeError, PathError, UsageError)


def _strategy(value: str) -> str:
    try:
        return scan_paths.Strategy.parse(value).value
    except (ConfigError, ValueError):
        choices = ", ".join(s.value for s in scan_paths.Strategy)
        raise argparse.ArgumentTypeError(f"invalid strategy {value!r} (choose from {choices})") from None


def _threshold(value: str) -> float:
    t = float(value)
    if not 0.0 < t < 1.0:
        raise argparse.ArgumentTypeError("threshold must lie in (0, 1)")
    return t


def _load_config(path: str | None) -> RunConfig:
    return RunConfig.load(path) if path else RunConfig()


def _write_text(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text if text.endswith("\n") else text + "\n")


def cmd_scan(args) -> int:
    paths = scan_paths.generate(args.strategy, args.height, args.width, args.paths)
    text = json.dumps(paths.to_dict(), indent=2)
    if args.out:
        _write_text(args.out, text)
    else:
        print(text)
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.steps is not None:
        cfg = cfg.replace(optim=dataclasses.replace(cfg.optim, steps=args.steps))
    if args.data:
        samples = load_dataset(args.data)
        if not samples:
            raise UsageError(f"no samples found under {args.data}")
        size = samples[0].image.shape[1]
        if size != cfg.network.image_size:
            cfg = cfg.replace(network=dataclasses.replace(cfg.network, image_size=size))
    else:
        samples = synthetic_samples(cfg, args.synthetic)
    result = train(cfg, samples)
    size = checkpoint.save(args.out, result.model, {"run": cfg.to_dict()})
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.json")
    _write_text(log_path, json.dumps({"seed": cfg.seed, "steps": result.log}, indent=2))
    log.info("wrote %s (%d bytes) and %s", args.out, size, log_path)
    summary = {"steps_run": len(result.log), "final_loss": result.final_loss, "train_f1": result.final_f1}
    print(json.dumps(summary))
    return 0


def _image_files(path: Path) -> list[Path]:
    if path.is_dir():
        root = path / "image" if (path / "image").is_dir() else path
        return sorted(root.glob("*.png"))
    return [path]


def cmd_infer(args) -> int:
    model = checkpoint.load(args.ckpt)
    src = Path(args.input)
    files = _image_files(src)
    if not files:
        raise UsageError(f"no PNG images under {src}")
    batch_mode = src.is_dir()
    for f in files:
        image = read_image(f)
        prob = model.predict_proba(image[None])[0, 0]
        out = Path(args.out) / f.name if batch_mode else Path(args.out)
        write_png(out, to_uint8(prob))
        if args.mask:
            mask_out = Path(args.mask) / f.name if batch_mode else Path(args.mask)
            write_png(mask_out, binarize(prob, args.threshold) * np.uint8(255))
    return 0


def _mask_dir(path: Path) -> Path:
    return path / "mask" if (path / "mask").is_dir() else path


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), _mask_dir(Path(args.gt))
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise UsageError(f"{d} is not a directory")
    preds = {p.stem: p for p in pred_dir.glob("*.png")}
    gts = {p.stem: p for p in gt_dir.glob("*.png")}
    common = sorted(set(preds) & set(gts))
    if not common:
        raise UsageError(f"no matching ids between {pred_dir} and {gt_dir}")
    unmatched = sorted(set(preds) ^ set(gts))
    if unmatched:
        raise UsageError(f"unmatched ids: {', '.join(unmatched)}")
    probs = []
    for sid in common:
        arr = read_png(preds[sid])
        if arr.ndim == 3:
            arr = arr[..., 0]
        probs.append(arr.astype(np.float64) / 255.0)
    masks = [read_mask(gts[sid]) for sid in common]
    report = evaluate(probs, masks)
    out = report.to_dict()
    out["ids"] = common
    _write_text(args.out, json.dumps(out, indent=2))
    return 0


def cmd_count(args) -> int:
    cfg = _load_config(args.config)
    size = args.input_size or cfg.network.image_size
    if size % cfg.network.patch_size:
        raise ConfigError(f"input size {size} must be a multiple of the patch size {cfg.network.patch_size}")
    text = complexity.report(cfg.network, size).to_json()
    if args.out:
        _write_text(args.out, text)
    else:
        print(text)
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    if args.steps is not None:
        cfg = cfg.replace(optim=dataclasses.replace(cfg.optim, steps=args.steps))
    train_set = synthetic_samples(cfg, args.synthetic)
    rows = ablate.run_axis(args.axis, cfg, train_set)
    _write_text(args.out, ablate.to_json(rows, cfg))
    csv_path = Path(args.csv) if args.csv else Path(args.out).with_suffix(".csv")
    _write_text(csv_path, ablate.to_csv(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crackseg", description="Crack segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", aliases=["scan-dump"], help="dump scan-path permutations as JSON")
    p.add_argument("--strategy", type=_strategy, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--paths", type=int, choices=(2, 4), default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("train", help="train on a dataset folder or synthetic samples")
    p.add_argument("--config")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data")
    src.add_argument("--synthetic", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="write probability maps for an image or folder")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask")
    p.add_argument("--threshold", type=_threshold, default=0.5)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score probability maps against ground-truth masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("count", help="parameter, FLOP and file-size accounting")
    p.add_argument("--config")
    p.add_argument("--input-size", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("ablate", help="train and evaluate along one configuration axis")
    p.add_argument("--axis", choices=ablate.AXES, required=True)
    p.add_argument("--config")
    p.add_argument("--synthetic", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("CRACKSEG_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        parser.print_usage(sys.stderr)
        print(f"crackseg: error: {exc}", file=sys.stderr)
        return 2
    except CrackSegError as exc:
        print(f"crackseg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
