"""Command line interface: generate, train, evaluate, ablate, score.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure during training or scoring.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .checkpoint import CheckpointError
from .config import ConfigError, RunConfig, load_config_file, preset
from .ctc import LatticeError
from .data import DataError
from .estimator import TrainingDivergedError
from .graph import LayoutError
from .harness import (ABLATION_AXES, format_ablation, run_ablation,
                      run_evaluation, run_training)
from .metrics import format_report, save_report, score_files
from .synth import SynthConfig, generate_dataset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_CONFIG_FIELDS = {f.name: f.default for f in dataclasses.fields(RunConfig)}


def _channels(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}") from exc


def _optional_float(text: str):
    if text.lower() in ("none", "off"):
        return None
    return float(text)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group(
        "model configuration",
        "any RunConfig field; overrides the preset and --config file")
    for name, default in _CONFIG_FIELDS.items():
        flag = "--" + name.replace("_", "-")
        kwargs: dict = {"default": argparse.SUPPRESS,
                        "help": f"default from preset: {default}"}
        if isinstance(default, bool):
            kwargs["action"] = argparse.BooleanOptionalAction
        elif name == "gcn_channels":
            kwargs["type"] = _channels
            kwargs["metavar"] = "C1,C2,..."
        elif name in ("stop_loss", "stop_wer"):
            kwargs["type"] = _optional_float
            kwargs["metavar"] = "X|none"
        elif isinstance(default, int):
            kwargs["type"] = int
        elif isinstance(default, float):
            kwargs["type"] = float
        else:
            kwargs["type"] = str
        group.add_argument(flag, **kwargs)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    base = preset(args.preset)
    if args.config is not None:
        base = load_config_file(args.config, base=base)
    overrides = {name: getattr(args, name) for name in _CONFIG_FIELDS
                 if hasattr(args, name)}
    return base.replace(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cslr",
        description="continuous sign language recognition on synthetic data")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset + manifest")
    gen.add_argument("--out", required=True, help="dataset directory")
    gen.add_argument("--vocab-size", type=int, default=5)
    gen.add_argument("--sentences", type=int, default=10)
    gen.add_argument("--min-length", type=int, default=2)
    gen.add_argument("--max-length", type=int, default=4)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--frames-per-gloss", type=int, default=12)
    gen.add_argument("--transition-frames", type=int, default=4)
    gen.add_argument("--noise-scale", type=float, default=0.004)
    gen.add_argument("--image-size", type=int, default=32)
    gen.add_argument("--rgb-format", choices=("raw", "png"), default="raw")
    gen.add_argument("--split", default="train")

    train = sub.add_parser("train", help="train a recognizer on a manifest split")
    train.add_argument("--manifest", required=True)
    train.add_argument("--out", required=True, help="run directory")
    train.add_argument("--seed", type=int, required=True)
    train.add_argument("--split", default="train")
    train.add_argument("--dev-split", default=None)
    train.add_argument("--preset", choices=("desk", "paper"), default="desk")
    train.add_argument("--config", default=None,
                       help="JSON or TOML file with RunConfig keys")
    train.add_argument("--verbose", action="store_true")
    _add_config_flags(train)

    ev = sub.add_parser("evaluate", help="decode a split and score its WER")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--split", default="train")
    ev.add_argument("--out", default=None,
                    help="directory for references/hypotheses/report files")

    ab = sub.add_parser("ablate", help="train+score one row per ablation setting")
    ab.add_argument("--manifest", required=True)
    ab.add_argument("--axes", default="view",
                    help=f"comma-separated subset of {', '.join(ABLATION_AXES)}")
    ab.add_argument("--seed", type=int, required=True)
    ab.add_argument("--out", default=None)
    ab.add_argument("--eval-split", default=None)
    ab.add_argument("--preset", choices=("desk", "paper"), default="desk")
    ab.add_argument("--config", default=None)
    ab.add_argument("--verbose", action="store_true")
    _add_config_flags(ab)

    sc = sub.add_parser("score", help="WER of a hypothesis file vs references")
    sc.add_argument("--references", required=True)
    sc.add_argument("--hypotheses", required=True)
    sc.add_argument("--out", default=None, help="optional JSON report path")

    return parser


def _cmd_generate(args) -> int:
    synth = SynthConfig(
        vocab_size=args.vocab_size,
        sentence_length_range=(args.min_length, args.max_length),
        frames_per_gloss=args.frames_per_gloss,
        transition_frames=args.transition_frames,
        noise_scale=args.noise_scale,
        image_size=args.image_size,
    )
    manifest = generate_dataset(synth, args.sentences, args.seed, args.out,
                                split=args.split, rgb_format=args.rgb_format)
    print(f"wrote {args.sentences} sentences to {manifest}")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    report = run_training(config, args.manifest, args.seed, args.out,
                          train_split=args.split, dev_split=args.dev_split,
                          verbose=args.verbose)
    final = report["evaluations"][-1] if report["evaluations"] else None
    print(f"trained {report['steps']} steps "
          f"({report['wall_clock_seconds']:.1f}s); "
          f"checkpoint at {report['checkpoint']}")
    if final:
        print(f"final {final['split']} wer {final['wer']:.4f}, "
              f"mean nll {final['mean_nll']:.4f}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    report = run_evaluation(args.checkpoint, args.manifest, split=args.split,
                            out_dir=args.out)
    print(format_report(report))
    return EXIT_OK


def _cmd_ablate(args) -> int:
    config = _config_from_args(args)
    axes = tuple(a for a in args.axes.split(",") if a)
    table = run_ablation(config, args.manifest, args.seed, axes,
                         out_dir=args.out, eval_split=args.eval_split,
                         verbose=args.verbose)
    print(format_ablation(table))
    return EXIT_OK


def _cmd_score(args) -> int:
    report = score_files(args.references, args.hypotheses)
    print(format_report(report))
    if args.out:
        save_report(report, args.out)
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
    "score": _cmd_score,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (TrainingDivergedError, LatticeError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, LayoutError, CheckpointError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
