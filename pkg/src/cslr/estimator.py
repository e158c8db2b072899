"""Scikit-learn style facade over the recognizer.

``SignRecognizer.fit(X, y)`` takes X as a list of (SkeletonSequence,
RgbSequence) pairs and y as a list of gloss-id sequences; ``predict``
returns decoded gloss-id tuples. All hyperparameters are constructor
arguments, so ``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import dataclasses
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator

from . import checkpoint as ckpt
from .config import ConfigError, RunConfig
from .ctc import best_path_decode, ctc_loss
from .data import RgbSequence, SkeletonSequence
from .graph import JointLayout, default_layout
from .metrics import corpus_wer
from .model import PreparedSample, RecognizerNetwork, prepare_sample
from .optim import Adam

_SHUFFLE_SALT = 7001


class TrainingDivergedError(RuntimeError):
    """Loss became NaN or infinite during training."""

    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value} at step {step}")
        self.step = step
        self.value = value


@dataclass
class TrainReport:
    seed: int
    config: dict
    losses: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    steps: int = 0
    stopped_early: bool = False
    skipped_samples: int = 0
    wall_clock_seconds: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def final_evaluation(self) -> Optional[dict]:
        return self.evaluations[-1] if self.evaluations else None


def _validate_pair(x, index: int) -> tuple:
    if isinstance(x, SkeletonSequence):
        return x, None
    if isinstance(x, (tuple, list)) and len(x) == 2:
        skeleton, rgb = x
        if skeleton is not None and not isinstance(skeleton, SkeletonSequence):
            raise TypeError(f"X[{index}][0] is not a SkeletonSequence")
        if rgb is not None and not isinstance(rgb, RgbSequence):
            raise TypeError(f"X[{index}][1] is not an RgbSequence")
        return skeleton, rgb
    raise TypeError(
        f"X[{index}] must be a (SkeletonSequence, RgbSequence) pair, got {type(x)}"
    )


def _validate_targets(y, vocab_size: int) -> list:
    targets = []
    for index, ids in enumerate(y):
        ids = tuple(int(g) for g in ids)
        if len(ids) < 1:
            raise ValueError(f"y[{index}] is empty; every sample needs a gloss")
        bad = [g for g in ids if not 0 <= g < vocab_size]
        if bad:
            raise ValueError(
                f"y[{index}] has gloss ids {bad} outside [0, {vocab_size})"
            )
        targets.append(ids)
    return targets


class SignRecognizer(BaseEstimator):
    """Continuous gesture-sequence recognizer with a fit/predict interface.

    Parameters mirror RunConfig; ``seed`` drives initialization, dropout
    and batch shuffling, so equal seed and data give bit-identical models.
    ``vocab_size=None`` infers the vocabulary from the training targets.
    """

    def __init__(self, view: str = "both", window: int = 8, stride: int = 4,
                 sliding_window: bool = True, scales: int = 3,
                 gcn_channels: tuple = (8, 16), use_3d: bool = True,
                 use_multiscale: bool = True, use_stan: bool = True,
                 image_size: int = 32, patch_size: int = 8, vit_dim: int = 32,
                 vit_layers: int = 2, vit_heads: int = 4,
                 projection_width: int = 64, model_dim: int = 128,
                 encoder_layers: int = 2, encoder_heads: int = 8,
                 ff_multiple: int = 4, max_positions: int = 512,
                 ctc_variant: str = "nll", learning_rate: float = 1e-3,
                 weight_decay: float = 1e-3, batch_size: int = 8,
                 dropout: float = 0.1, max_steps: int = 3000,
                 eval_every: int = 50, stop_loss: Optional[float] = 0.1,
                 stop_wer: Optional[float] = 0.0,
                 vocab_size: Optional[int] = None,
                 layout: Optional[JointLayout] = None, seed: int = 0,
                 verbose: bool = False):
        self.view = view
        self.window = window
        self.stride = stride
        self.sliding_window = sliding_window
        self.scales = scales
        self.gcn_channels = gcn_channels
        self.use_3d = use_3d
        self.use_multiscale = use_multiscale
        self.use_stan = use_stan
        self.image_size = image_size
        self.patch_size = patch_size
        self.vit_dim = vit_dim
        self.vit_layers = vit_layers
        self.vit_heads = vit_heads
        self.projection_width = projection_width
        self.model_dim = model_dim
        self.encoder_layers = encoder_layers
        self.encoder_heads = encoder_heads
        self.ff_multiple = ff_multiple
        self.max_positions = max_positions
        self.ctc_variant = ctc_variant
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.dropout = dropout
        self.max_steps = max_steps
        self.eval_every = eval_every
        self.stop_loss = stop_loss
        self.stop_wer = stop_wer
        self.vocab_size = vocab_size
        self.layout = layout
        self.seed = seed
        self.verbose = verbose

    # -- configuration plumbing ------------------------------------------------

    _CONFIG_FIELDS = tuple(f.name for f in dataclasses.fields(RunConfig))

    def build_config(self) -> RunConfig:
        return RunConfig(**{name: getattr(self, name) for name in self._CONFIG_FIELDS})

    @classmethod
    def from_config(cls, config: RunConfig, **extra) -> "SignRecognizer":
        return cls(**config.to_dict(), **extra)

    def _layout(self) -> JointLayout:
        return self.layout if self.layout is not None else default_layout()

    # -- data preparation --------------------------------------------------------

    def _prepare(self, X, y, config: RunConfig, layout: JointLayout,
                 vocab_size: int, drop_infeasible: bool):
        targets = _validate_targets(y, vocab_size) if y is not None else [()] * len(X)
        if y is not None and len(X) != len(targets):
            raise ValueError(f"X has {len(X)} samples but y has {len(targets)}")
        prepared = []
        skipped = 0
        for index, x in enumerate(X):
            skeleton, rgb = _validate_pair(x, index)
            sample = prepare_sample(skeleton, rgb, targets[index], layout, config)
            if drop_infeasible and not sample.feasible:
                warnings.warn(
                    f"sample {index}: target of length {len(sample.target)} is not "
                    f"CTC-feasible for {sample.clip_count} clips; skipping",
                    stacklevel=2,
                )
                skipped += 1
                continue
            prepared.append(sample)
        return prepared, skipped

    # -- training ------------------------------------------------------------------

    def fit(self, X, y, dev_X=None, dev_y=None) -> "SignRecognizer":
        """Train from scratch; evaluation runs on (dev_X, dev_y) when given,
        otherwise on the training split."""
        started = time.perf_counter()
        config = self.build_config()
        layout = self._layout()
        if self.vocab_size is not None:
            vocab_size = self.vocab_size
        else:
            vocab_size = 1 + max((max(ids) for ids in y if len(ids)), default=-1)
        if vocab_size < 1:
            raise ValueError("could not infer a vocabulary from empty targets")
        train_samples, skipped = self._prepare(
            X, y, config, layout, vocab_size, drop_infeasible=True)
        if not train_samples:
            raise ValueError("no CTC-feasible training samples remain")
        if dev_X is not None:
            if dev_y is None:
                raise ValueError("dev_X was given without dev_y")
            dev_samples, _ = self._prepare(
                dev_X, dev_y, config, layout, vocab_size, drop_infeasible=True)
            eval_split = "dev"
        else:
            dev_samples = train_samples
            eval_split = "train"

        network = RecognizerNetwork(config, layout, vocab_size, self.seed)
        optimizer = Adam(network.trainable_parameters(), lr=config.learning_rate,
                         weight_decay=config.weight_decay)
        shuffle_rng = np.random.default_rng([self.seed, _SHUFFLE_SALT])
        report = TrainReport(seed=self.seed, config=config.to_dict(),
                             skipped_samples=skipped)

        step = 0
        stop = False
        n = len(train_samples)
        while step < config.max_steps and not stop:
            order = shuffle_rng.permutation(n)
            for lo in range(0, n, config.batch_size):
                if step >= config.max_steps or stop:
                    break
                step += 1
                batch = [train_samples[i] for i in order[lo:lo + config.batch_size]]
                network.train()
                total = None
                for sample, lattice in zip(batch, network.lattices(batch)):
                    loss = ctc_loss(lattice, sample.target, config.ctc_variant)
                    total = loss if total is None else total + loss
                total = total * (1.0 / len(batch))
                value = float(total.data)
                if not np.isfinite(value):
                    raise TrainingDivergedError(step, value)
                total.backward()
                optimizer.step()
                report.losses.append(value)
                if step % config.eval_every == 0 or step == config.max_steps:
                    summary = evaluate_samples(network, dev_samples,
                                               config.ctc_variant)
                    summary.update({"step": step, "split": eval_split})
                    report.evaluations.append(summary)
                    if self.verbose:
                        print(f"step {step}: loss {value:.4f} "
                              f"{eval_split} wer {summary['wer']:.3f} "
                              f"nll {summary['mean_nll']:.4f}")
                    stop = self._should_stop(summary)
        if stop and report.evaluations:
            report.stopped_early = report.evaluations[-1]["step"] < config.max_steps
        report.steps = step
        report.wall_clock_seconds = time.perf_counter() - started

        self.network_ = network
        self.vocab_size_ = vocab_size
        self.layout_ = layout
        self.config_ = config
        self.report_ = report
        self.loss_curve_ = list(report.losses)
        return self

    def _should_stop(self, summary: dict) -> bool:
        if self.stop_loss is None and self.stop_wer is None:
            return False
        loss_ok = self.stop_loss is None or summary["mean_nll"] < self.stop_loss
        wer_ok = self.stop_wer is None or summary["wer"] <= self.stop_wer
        return loss_ok and wer_ok

    # -- inference -------------------------------------------------------------------

    def _check_fitted(self) -> None:
        if not hasattr(self, "network_"):
            raise RuntimeError("this SignRecognizer has not been fitted or loaded")

    def predict_lattices(self, X) -> list:
        self._check_fitted()
        prepared, _ = self._prepare(X, None, self.config_, self.layout_,
                                    self.vocab_size_, drop_infeasible=False)
        self.network_.eval()
        return [lattice.data for lattice in self.network_.lattices(prepared)]

    def predict(self, X) -> list:
        """Greedy best-path decoding to gloss-id tuples."""
        return [best_path_decode(lattice) for lattice in self.predict_lattices(X)]

    def wer(self, X, y) -> float:
        targets = [tuple(int(g) for g in ids) for ids in y]
        return corpus_wer(list(zip(targets, self.predict(X))))

    def score(self, X, y) -> float:
        """Negative corpus WER, so that greater is better."""
        return -self.wer(X, y)

    # -- persistence -------------------------------------------------------------------

    def save_checkpoint(self, path: Union[str, Path]) -> None:
        self._check_fitted()
        metadata = {
            "format": "cslr-recognizer",
            "config": self.config_.to_dict(),
            "vocab_size": self.vocab_size_,
            "seed": self.seed,
        }
        ckpt.save_module(path, self.network_, metadata)

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path],
                        layout: Optional[JointLayout] = None) -> "SignRecognizer":
        """Rebuild a fitted recognizer from a checkpoint's config echo."""
        arrays, metadata = ckpt.load_checkpoint(path)
        if not metadata or metadata.get("format") != "cslr-recognizer":
            raise ckpt.CheckpointError(
                f"{path} does not carry recognizer metadata"
            )
        config = RunConfig.from_dict(metadata["config"])
        vocab_size = int(metadata["vocab_size"])
        seed = int(metadata.get("seed", 0))
        est = cls.from_config(config, vocab_size=vocab_size, layout=layout,
                              seed=seed)
        network = RecognizerNetwork(config, est._layout(), vocab_size, seed)
        ckpt.load_module(path, network)
        est.network_ = network
        est.vocab_size_ = vocab_size
        est.layout_ = est._layout()
        est.config_ = config
        return est


def evaluate_samples(network: RecognizerNetwork,
                     samples: Sequence[PreparedSample],
                     variant: str = "nll") -> dict:
    """Decode and score prepared samples in eval mode; returns WER and mean
    losses over the split."""
    was_training = network.training
    network.eval()
    lattices = network.lattices(list(samples))
    pairs = []
    nll_total = 0.0
    for sample, lattice in zip(samples, lattices):
        pairs.append((sample.target, best_path_decode(lattice.data)))
        nll_total += float(ctc_loss(lattice, sample.target, "nll").data)
    if was_training:
        network.train()
    return {
        "wer": corpus_wer(pairs),
        "mean_nll": nll_total / max(len(samples), 1),
        "samples": len(samples),
    }
