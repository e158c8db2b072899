"""High-level runs binding datasets, the estimator and report files."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence, Union

from .config import RunConfig
from .data import DatasetManifest, load_manifest, load_split
from .estimator import SignRecognizer
from .graph import JointLayout, default_layout, load_layout
from .metrics import corpus_report, format_report, save_report, write_sentences

ARCH_AXES = ("3d", "multiscale", "stan", "sliding-window")
ABLATION_AXES = ("view",) + ARCH_AXES


def manifest_layout(manifest: DatasetManifest) -> JointLayout:
    if manifest.layout_path:
        return load_layout(manifest.resolve(manifest.layout_path))
    return default_layout()


def _write_loss_curve(losses: Sequence[float], path: Path) -> None:
    path.write_text("".join(f"{i + 1},{value!r}\n"
                            for i, value in enumerate(losses)))


def run_training(config: RunConfig, manifest_path: Union[str, Path], seed: int,
                 out_dir: Union[str, Path], train_split: str = "train",
                 dev_split: Optional[str] = None, verbose: bool = False) -> dict:
    """Train on one split, checkpoint, and write the report files."""
    manifest = load_manifest(manifest_path)
    layout = manifest_layout(manifest)
    load_rgb = config.view in ("rgb", "both")
    train_x, train_y = load_split(manifest, train_split, load_rgb=load_rgb)
    dev_x = dev_y = None
    if dev_split is not None:
        dev_x, dev_y = load_split(manifest, dev_split, load_rgb=load_rgb)
    estimator = SignRecognizer.from_config(
        config, vocab_size=manifest.vocab_size, layout=layout, seed=seed,
        verbose=verbose)
    estimator.fit(train_x, train_y, dev_X=dev_x, dev_y=dev_y)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / "checkpoint.ckpt"
    estimator.save_checkpoint(checkpoint_path)
    _write_loss_curve(estimator.report_.losses, out_dir / "loss_curve.csv")
    report = estimator.report_.to_dict()
    report["checkpoint"] = str(checkpoint_path)
    report["manifest"] = str(manifest_path)
    report["train_split"] = train_split
    report["dev_split"] = dev_split
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return report


def run_evaluation(checkpoint_path: Union[str, Path],
                   manifest_path: Union[str, Path], split: str = "test",
                   out_dir: Optional[Union[str, Path]] = None) -> dict:
    """Decode a split with a checkpointed model and score it."""
    manifest = load_manifest(manifest_path)
    layout = manifest_layout(manifest)
    estimator = SignRecognizer.from_checkpoint(checkpoint_path, layout=layout)
    if estimator.vocab_size_ != manifest.vocab_size:
        raise ValueError(
            f"checkpoint was trained with a vocabulary of "
            f"{estimator.vocab_size_}, manifest has {manifest.vocab_size}"
        )
    load_rgb = estimator.config_.view in ("rgb", "both")
    xs, ys = load_split(manifest, split, load_rgb=load_rgb)
    predictions = estimator.predict(xs)
    references = [manifest.gloss_strings(ids) for ids in ys]
    hypotheses = [manifest.gloss_strings(ids) for ids in predictions]
    report = corpus_report(list(zip(references, hypotheses)))
    report["split"] = split
    report["config"] = estimator.config_.to_dict()
    report["checkpoint"] = str(checkpoint_path)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_sentences(references, out_dir / "references.txt")
        write_sentences(hypotheses, out_dir / "hypotheses.txt")
        save_report(report, out_dir / "evaluation.json")
    return report


def _view_rows(config: RunConfig) -> list:
    return [
        ("rgb clips", config.replace(view="rgb")),
        ("skeleton clips", config.replace(view="skeleton")),
        ("rgb + skeleton clips", config.replace(view="both")),
    ]


def _architecture_rows(config: RunConfig) -> list:
    """The skeleton-only architecture ladder: per-frame 2-d baseline, then
    spatio-temporal clips, then multi-scale and attention additions."""
    base = config.replace(view="skeleton")
    return [
        ("2d-gcn, no sliding window",
         base.replace(sliding_window=False, use_3d=False,
                      use_multiscale=False, use_stan=False)),
        ("sliding window + 3d-gcn",
         base.replace(use_multiscale=False, use_stan=False)),
        ("sliding window + 3d-gcn + multi-scale",
         base.replace(use_stan=False)),
        ("sliding window + 3d-gcn + stan",
         base.replace(use_multiscale=False)),
        ("sliding window + 3d-gcn + multi-scale + stan", base),
    ]


def run_ablation(config: RunConfig, manifest_path: Union[str, Path], seed: int,
                 axes: Sequence[str], out_dir: Optional[Union[str, Path]] = None,
                 eval_split: Optional[str] = None, verbose: bool = False) -> dict:
    """Train and score one configuration per ablation row, same data and seed.

    ``view`` selects the input-view rows; any architecture axis selects the
    five-row skeleton ladder. WER values are reported, never asserted
    against each other: at this scale only the structure is meaningful.
    """
    axes = tuple(axes)
    unknown = sorted(set(axes) - set(ABLATION_AXES))
    if unknown:
        raise ValueError(f"unknown ablation axes {unknown}; pick from {ABLATION_AXES}")
    if not axes:
        raise ValueError("no ablation axes requested")
    manifest = load_manifest(manifest_path)
    layout = manifest_layout(manifest)
    rows = []
    if "view" in axes:
        rows.extend(_view_rows(config))
    if any(a in axes for a in ARCH_AXES):
        rows.extend(_architecture_rows(config))

    results = []
    for label, row_config in rows:
        load_rgb = row_config.view in ("rgb", "both")
        xs, ys = load_split(manifest, "train", load_rgb=load_rgb)
        estimator = SignRecognizer.from_config(
            row_config, vocab_size=manifest.vocab_size, layout=layout,
            seed=seed, verbose=verbose)
        estimator.fit(xs, ys)
        if eval_split and eval_split != "train":
            eval_x, eval_y = load_split(manifest, eval_split, load_rgb=load_rgb)
        else:
            eval_x, eval_y = xs, ys
        wer = estimator.wer(eval_x, eval_y)
        results.append({
            "row": label,
            "view": row_config.view,
            "use_3d": row_config.use_3d,
            "use_multiscale": row_config.use_multiscale,
            "use_stan": row_config.use_stan,
            "sliding_window": row_config.sliding_window,
            "steps": estimator.report_.steps,
            "wer": wer,
        })
        if verbose:
            print(f"{label}: wer {wer:.3f}")
    table = {"axes": list(axes), "seed": seed, "config": config.to_dict(),
             "rows": results}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "ablation.json").write_text(
            json.dumps(table, indent=2, sort_keys=True))
    return table


def format_ablation(table: dict) -> str:
    width = max(len(r["row"]) for r in table["rows"])
    lines = [f"{'configuration':<{width}}  wer"]
    for row in table["rows"]:
        lines.append(f"{row['row']:<{width}}  {row['wer']:.3f}")
    return "\n".join(lines)
