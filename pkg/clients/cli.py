"""
Command-line client for the occlusion edge pipeline.

    occlusion synth      --spec FILE --out DIR
    occlusion label-gen  --dataset DIR --out DIR
    occlusion extract    --dataset DIR --out FILE
    occlusion train      --patches FILE --test-patches FILE --out DIR
    occlusion eval       --model FILE [FILE ...] --patches FILE --out DIR
    occlusion infer      --model FILE --stats FILE --dataset DIR --out DIR
    occlusion plot       --epochs-csv FILE --out PNG
    occlusion serve

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal or numeric error.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from db.model_store import load_model, save_model
from db.patch_store import load_patches, save_patches
from db.records import TimingWriter, read_epochs
from db.stats_store import load_stats, save_stats
from models.config_models import FusionConfig, RunConfig, load_config_file, resolve_run_config
from models.frame_models import EdgeLabel, SplitSpec
from models.fusion_models import FrameTiming
from services.dataset import (
    balance_patches,
    compute_stats,
    drop_depth,
    extract_sequence,
    frame_stem,
    load_sequence,
    make_labels,
    normalize,
    parse_scene_spec,
    read_gray,
    split_sequence,
    synth_sequence,
    write_label_png,
    write_png,
    write_sequence,
)
from services.evaluation import evaluate_report, format_report, plot_epochs, write_report
from services.fusion import binarize, infer_frame, render, write_mask
from services.network import init_model
from services.training import train
from utils.config import reset_settings
from utils.constants import (
    APPEARANCE_DIR,
    EPOCHS_CSV,
    LABEL_DIR,
    MODEL_FILE,
    RUN_CONFIG_FILE,
    STATS_FILE,
    TIMING_FILE,
)
from utils.errors import ArtifactNotFoundError, ConfigError, OcclusionError
from utils.logger import log_duration, log_function_call
from utils.logging_config import system_logging
from utils.parallel import Execution

logger = logging.getLogger(__name__)

CHANNEL_CHOICES = {"rgb": 3, "rgbd": 4}
CHANNEL_NAMES = {3: "RGB", 4: "RGB-D"}


class CliArgumentParser(argparse.ArgumentParser):
    """Usage errors raise ConfigError instead of exiting with status 2."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def _common_options() -> argparse.ArgumentParser:
    common = CliArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="key = value config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Seed for init, shuffling and sampling")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="Worker threads, 0 = all cores")
    common.add_argument("--deterministic", action="store_true", default=argparse.SUPPRESS,
                        help="Sequential execution for bit-reproducible runs")
    common.add_argument("--log-level", default=argparse.SUPPRESS, help="DEBUG, INFO, WARNING or ERROR")
    return common


def build_parser() -> CliArgumentParser:
    common = _common_options()
    parser = CliArgumentParser(prog="occlusion", description="Occlusion edge detection with a CNN on RGB-D patches",
                               parents=[common])
    commands = parser.add_subparsers(dest="command", parser_class=CliArgumentParser)
    commands.required = True

    p = commands.add_parser("synth", parents=[common], help="Render a synthetic scene in TUM layout")
    p.add_argument("--spec", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = commands.add_parser("label-gen", parents=[common], help="Write occlusion label PNGs")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--tau-depth", type=float)

    p = commands.add_parser("extract", parents=[common], help="Cut labeled patches into train/test caches")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="Train cache (.npz); test cache and stats go beside it")
    p.add_argument("--channels", choices=sorted(CHANNEL_CHOICES))
    p.add_argument("--stride", type=int)
    p.add_argument("--tau-depth", type=float)
    p.add_argument("--max-invalid-fraction", type=float)
    p.add_argument("--majority", type=int)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--split-boundary", type=int)
    p.add_argument("--balance", type=float, metavar="RATIO")

    p = commands.add_parser("train", parents=[common], help="Train a model on patch caches")
    p.add_argument("--patches", type=Path, required=True)
    p.add_argument("--test-patches", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--channels", choices=sorted(CHANNEL_CHOICES))
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--no-l2-on-output", dest="l2_on_output", action="store_false", default=None)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--test-subsample", type=int)
    p.add_argument("--train-subsample", type=int)

    p = commands.add_parser("eval", parents=[common], help="Report patch-level error rates")
    p.add_argument("--model", type=Path, nargs="+", required=True,
                   help="Model files; stats.json is read from each model's directory")
    p.add_argument("--patches", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = commands.add_parser("infer", parents=[common], help="Sweep frames and write fused heatmaps")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--stats", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--stride", type=int, nargs="+")
    p.add_argument("--fwhm", type=float)
    p.add_argument("--mode", choices=["normalized", "sum"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--frames", help="Comma-separated frame indices, default all")

    p = commands.add_parser("plot", parents=[common], help="Plot train/test error curves")
    p.add_argument("--epochs-csv", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = commands.add_parser("serve", parents=[common], help="Run the inference API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--model", type=Path)
    p.add_argument("--stats", type=Path)
    return parser


def _cli_layer(args: argparse.Namespace) -> Dict[str, Any]:
    """Nested dict of the values given on the command line."""
    def get(name: str) -> Any:
        return getattr(args, name, None)

    channels = CHANNEL_CHOICES.get(get("channels")) if get("channels") else None
    seed = get("seed")
    layer: Dict[str, Any] = {
        "command": args.command,
        "seed": seed,
        "threads": get("threads"),
        "deterministic": get("deterministic"),
        "log_level": get("log_level"),
        "dataset": {
            "tau_depth": get("tau_depth"),
            "max_invalid_fraction": get("max_invalid_fraction"),
            "majority": get("majority"),
            "train_fraction": get("train_fraction"),
            "split_boundary": get("split_boundary"),
            "balance": get("balance"),
        },
        "train": {
            "epochs": get("epochs"),
            "batch_size": get("batch_size"),
            "lr": get("lr"),
            "momentum": get("momentum"),
            "l2": get("l2"),
            "l2_on_output": get("l2_on_output"),
            "checkpoint_every": get("checkpoint_every"),
            "test_subsample": get("test_subsample"),
            "train_subsample": get("train_subsample"),
            "shuffle_seed": seed,
        },
        "fusion": {
            "fwhm": get("fwhm"),
            "mode": get("mode"),
            "threshold": get("threshold"),
        },
        "paths": {name: str(get(name)) for name in ("spec", "dataset", "out", "patches", "test_patches",
                                                     "stats", "epochs_csv") if get(name) is not None},
    }
    if args.command == "extract":
        layer["dataset"]["channels"] = channels
        layer["dataset"]["stride"] = get("stride")
    elif args.command == "train":
        layer["train"]["channels"] = channels
    elif args.command == "infer" and get("stride"):
        layer["strides"] = get("stride")
        layer["fusion"]["sweep_stride"] = get("stride")[0]
    if isinstance(get("model"), list):
        layer["paths"]["model"] = ",".join(str(m) for m in get("model"))
    elif get("model") is not None:
        layer["paths"]["model"] = str(get("model"))
    return layer


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """CLI flags over config file over defaults."""
    config_path = getattr(args, "config", None)
    file_values = load_config_file(config_path) if config_path else {}
    return resolve_run_config(file_values, _cli_layer(args))


def write_run_config(cfg: RunConfig, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RUN_CONFIG_FILE
    path.write_text(cfg.model_dump_json(indent=2), encoding="utf-8")
    return path


def _execution(cfg: RunConfig) -> Execution:
    return Execution(threads=cfg.threads, deterministic=cfg.deterministic)


def _require_dir(path: Path, kind: str) -> None:
    if not path.is_dir():
        raise ArtifactNotFoundError(kind, path)


def cmd_synth(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Render a scene spec into rgb/, depth/, labels/ and appearance/."""
    if not args.spec.is_file():
        raise ArtifactNotFoundError("scene spec", args.spec)
    spec = parse_scene_spec(args.spec.read_text(encoding="utf-8"))
    write_run_config(cfg, args.out)

    rendered = synth_sequence(spec)
    stems = write_sequence(args.out, [r.frame for r in rendered])
    for stem, item in zip(stems, rendered):
        write_label_png(item.labels, args.out / LABEL_DIR / f"{stem}.png")
        write_png(args.out / APPEARANCE_DIR / f"{stem}.png", item.appearance.astype(np.uint8) * 255)
    print(f"Wrote {len(rendered)} synthetic frames to {args.out}")
    return 0


def cmd_label_gen(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Label every frame of a TUM-layout dataset from its depth."""
    _require_dir(args.dataset, "dataset directory")
    execution = _execution(cfg)
    frames = load_sequence(args.dataset, execution)
    write_run_config(cfg, args.out)

    def label_one(frame):
        labels = make_labels(frame, cfg.dataset.tau_depth)
        write_label_png(labels, args.out / f"{frame_stem(frame)}.png")
        return labels

    labelframes = execution.map(label_one, frames)
    edges = sum(lf.count(EdgeLabel.OCCLUSION) for lf in labelframes)
    print(f"Wrote {len(labelframes)} label images ({edges} occlusion pixels) to {args.out}")
    return 0


def _appearance_masks(dataset: Path, frames) -> Optional[List]:
    folder = dataset / APPEARANCE_DIR
    if not folder.is_dir():
        return None
    masks = []
    for frame in frames:
        path = folder / f"{frame_stem(frame)}.png"
        masks.append(read_gray(path) > 0 if path.is_file() else None)
    return masks


def sibling_paths(train_cache: Path) -> Dict[str, Path]:
    """Test cache and stats file written next to a train cache."""
    stem = train_cache.name[:-len(train_cache.suffix)] if train_cache.suffix else train_cache.name
    return {
        "test": train_cache.with_name(f"{stem}_test.npz"),
        "stats": train_cache.with_name(f"{stem}_stats.json"),
    }


def cmd_extract(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Split the trajectory and write train/test patch caches plus stats."""
    _require_dir(args.dataset, "dataset directory")
    execution = _execution(cfg)
    ds = cfg.dataset
    split = SplitSpec(train_fraction=ds.train_fraction, boundary=ds.split_boundary)
    frames = load_sequence(args.dataset, execution)
    masks = _appearance_masks(args.dataset, frames)
    train_frames, test_frames = split_sequence(frames, split)
    write_run_config(cfg, args.out.parent)

    def extract(part):
        labels = execution.map(lambda f: make_labels(f, ds.tau_depth), part)
        part_masks = [masks[f.frame_id] for f in part] if masks is not None else None
        return extract_sequence(part, labels, ds.stride, ds.max_invalid_fraction, ds.channels, ds.majority,
                                part_masks, execution)

    with log_duration(logger, "Patch extraction"):
        train_patches = extract(train_frames)
        test_patches = extract(test_frames)
    if ds.balance is not None:
        train_patches = balance_patches(train_patches, ds.balance, cfg.seed)

    siblings = sibling_paths(args.out)
    save_patches(train_patches, args.out)
    save_patches(test_patches, siblings["test"])
    save_stats(compute_stats(train_patches), siblings["stats"])
    print(f"train: {len(train_patches)} patches ({train_patches.positives} occlusion) -> {args.out}")
    print(f"test:  {len(test_patches)} patches ({test_patches.positives} occlusion) -> {siblings['test']}")
    return 0


def _match_channels(patches, channels: int, what: str):
    if patches.channels == channels:
        return patches
    if patches.channels == 4 and channels == 3:
        return drop_depth(patches)
    raise ConfigError(f"{what} has {patches.channels} channels, cannot provide {channels}")


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Train from patch caches; writes model, stats and the epoch CSV."""
    train_patches = load_patches(args.patches)
    test_patches = load_patches(args.test_patches)
    if args.channels is None and "channels" not in _file_section(args, "train"):
        cfg = cfg.updated(train=cfg.train.updated(channels=train_patches.channels))
    channels = cfg.train.channels
    train_patches = _match_channels(train_patches, channels, "train cache")
    test_patches = _match_channels(test_patches, channels, "test cache")
    write_run_config(cfg, args.out)

    stats = compute_stats(train_patches)
    execution = _execution(cfg)
    model = init_model(channels, rng_seed=cfg.seed)
    log_function_call(logger, "train", epochs=cfg.train.epochs, batch_size=cfg.train.batch_size,
                      lr=cfg.train.lr, channels=channels)
    model, records = train(model, normalize(train_patches, stats), normalize(test_patches, stats), cfg.train,
                           execution=execution, epochs_csv=args.out / EPOCHS_CSV, checkpoint_dir=args.out)
    save_model(model, args.out / MODEL_FILE)
    save_stats(stats, args.out / STATS_FILE)
    if records:
        last = records[-1]
        print(f"epoch {last.epoch}: train error {last.train_error:.4f}, test error {last.test_error:.4f}")
    print(f"Wrote {args.out / MODEL_FILE}")
    return 0


def _file_section(args: argparse.Namespace, section: str) -> Dict[str, Any]:
    config_path = getattr(args, "config", None)
    return load_config_file(config_path).get(section, {}) if config_path else {}


def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    """One report row per model on the same patch cache."""
    models = [(path, load_model(path), load_stats(path.parent / STATS_FILE)) for path in args.model]
    patches = load_patches(args.patches)
    write_run_config(cfg, args.out)

    execution = _execution(cfg)
    results = []
    for path, model, stats in models:
        matched = _match_channels(patches, model.channels, "patch cache")
        name = CHANNEL_NAMES[model.channels] if len(models) == 1 else f"{CHANNEL_NAMES[model.channels]} ({path})"
        results.append(evaluate_report(name, model, normalize(matched, stats), execution))
    write_report(results, args.out)
    print(format_report(results), end="")
    return 0


def _select_frames(frames, selection: Optional[str]):
    if not selection:
        return frames
    try:
        wanted = [int(part) for part in selection.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--frames expects comma-separated indices, got '{selection}'") from e
    missing = [i for i in wanted if not 0 <= i < len(frames)]
    if missing:
        raise ConfigError(f"frame indices {missing} outside [0, {len(frames)})")
    return [frames[i] for i in wanted]


def cmd_infer(args: argparse.Namespace, cfg: RunConfig) -> int:
    """Heatmaps per (frame, stride) and the timing sidecar."""
    model = load_model(args.model)
    stats = load_stats(args.stats)
    _require_dir(args.dataset, "dataset directory")
    strides = list(cfg.strides) or [cfg.fusion.sweep_stride]
    fusion_cfgs = [FusionConfig(**{**cfg.fusion.model_dump(), "sweep_stride": s}) for s in strides]
    execution = _execution(cfg)
    frames = _select_frames(load_sequence(args.dataset, execution), args.frames)
    write_run_config(cfg, args.out)

    timings = TimingWriter(args.out / TIMING_FILE)
    for frame in frames:
        for fusion in fusion_cfgs:
            heatmap, patch_count, wall_time = infer_frame(model, frame, stats, fusion, execution)
            name = f"{frame.frame_id:04d}_s{fusion.sweep_stride}"
            heatmap_path = args.out / f"heatmap_{name}.png"
            render(heatmap, heatmap_path, args.out / f"heatmap_{name}_color.png")
            if fusion.threshold is not None:
                write_mask(binarize(heatmap, fusion.threshold), args.out / f"mask_{name}.png")
            timings.append(FrameTiming(frame_id=frame.frame_id, stride=fusion.sweep_stride,
                                       patch_count=patch_count, wall_time=wall_time, fwhm=fusion.fwhm,
                                       heatmap_path=str(heatmap_path)))
            print(f"frame {frame.frame_id} stride {fusion.sweep_stride}: {patch_count} patches, {wall_time:.3f}s")
    return 0


def cmd_plot(args: argparse.Namespace, cfg: RunConfig) -> int:
    records = read_epochs(args.epochs_csv)
    plot_epochs(records, args.out)
    print(f"Wrote {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace, cfg: RunConfig) -> int:
    import uvicorn

    if args.model is not None:
        os.environ["OCCLUSION_MODEL_PATH"] = str(args.model)
    if args.stats is not None:
        os.environ["OCCLUSION_STATS_PATH"] = str(args.stats)
    reset_settings()
    uvicorn.run("api.api:app", host=args.host, port=args.port)
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "synth": cmd_synth,
    "label-gen": cmd_label_gen,
    "extract": cmd_extract,
    "train": cmd_train,
    "eval": cmd_eval,
    "infer": cmd_infer,
    "plot": cmd_plot,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    system_logging(cfg.log_level)
    try:
        return COMMANDS[args.command](args, cfg)
    except OcclusionError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"{args.command} failed with an unexpected error")
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
