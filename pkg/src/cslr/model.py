"""End-to-end recognizer: clip features from both views, fused, position
encoded, transformer encoded, and projected to per-clip gloss lattices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import RunConfig
from .ctc import ctc_feasible
from .data import RgbSequence, SkeletonSequence, normalize_skeleton, sliding_window
from .fusion import FusionHead
from .gcn import SkeletonClipEncoder
from .graph import JointLayout
from .nn import Linear, Module
from .transformer import (ClipPatchTransformer, PositionalEncoding,
                          SequenceEncoder, extract_patch_tubes)


@dataclass
class PreparedSample:
    """Window-segmented views of one sequence, ready for the network."""

    skeleton_nodes: Optional[np.ndarray]  # (U, m*V, 2)
    rgb_tubes: Optional[np.ndarray]       # (U, patches, tube_dim)
    target: tuple
    clip_count: int

    @property
    def feasible(self) -> bool:
        return ctc_feasible(self.target, self.clip_count)


def prepare_sample(skeleton: Optional[SkeletonSequence],
                   rgb: Optional[RgbSequence],
                   target: Sequence[int],
                   layout: JointLayout,
                   config: RunConfig) -> PreparedSample:
    """Normalize, window, and flatten one sample for the active views."""
    m = config.effective_window
    stride = config.effective_stride
    use_skeleton = config.view in ("skeleton", "both")
    use_rgb = config.view in ("rgb", "both")
    skeleton_nodes = rgb_tubes = None
    counts = []
    if use_skeleton:
        if skeleton is None:
            raise ValueError(f"view {config.view!r} needs skeleton sequences")
        normed = normalize_skeleton(skeleton, layout)
        clips = sliding_window(normed, m, stride)
        skeleton_nodes = np.stack([
            c.frames.reshape(m * layout.joint_count, 2) for c in clips])
        counts.append(len(clips))
    if use_rgb:
        if rgb is None:
            raise ValueError(f"view {config.view!r} needs rgb sequences")
        clips = sliding_window(rgb, m, stride)
        rgb_tubes = np.stack([
            extract_patch_tubes(c.frames, config.patch_size) for c in clips])
        counts.append(len(clips))
    if len(set(counts)) != 1:
        raise ValueError(f"views produced different clip counts: {counts}")
    return PreparedSample(skeleton_nodes=skeleton_nodes, rgb_tubes=rgb_tubes,
                          target=tuple(int(g) for g in target),
                          clip_count=counts[0])


class RecognizerNetwork(Module):
    """All trainable pieces of the recognizer under one parameter tree.

    Every branch is constructed regardless of the view selection so that
    parameter names and shapes are identical across ablations; disabled
    branches stay at their initialization and take no gradient.
    """

    def __init__(self, config: RunConfig, layout: JointLayout, vocab_size: int,
                 seed: int):
        super().__init__()
        if vocab_size < 1:
            raise ValueError("vocabulary must contain at least one gloss")
        self.config = config
        self.layout = layout
        self.vocab_size = vocab_size
        init_seq, dropout_seq = np.random.SeedSequence(seed).spawn(2)
        rng = np.random.default_rng(init_seq)
        self.dropout_rng = np.random.default_rng(dropout_seq)
        m = config.effective_window
        self.skeleton_encoder = SkeletonClipEncoder(
            layout, m, config.scales, config.gcn_channels, rng,
            use_multiscale=config.use_multiscale, use_stan=config.use_stan)
        self.rgb_encoder = ClipPatchTransformer(
            config.image_size, config.patch_size, m, config.vit_dim,
            config.vit_heads, config.vit_layers, config.dropout, rng,
            self.dropout_rng)
        self.fusion = FusionHead(
            config.vit_dim, self.skeleton_encoder.out_features,
            config.projection_width, config.model_dim, config.dropout, rng,
            self.dropout_rng, view=config.view)
        self.positions = PositionalEncoding(config.max_positions, config.model_dim)
        self.encoder = SequenceEncoder(
            config.model_dim, config.encoder_heads, config.encoder_layers,
            config.ff_multiple * config.model_dim, config.dropout, rng,
            self.dropout_rng)
        self.head = Linear(config.model_dim, vocab_size + 1, rng)

    def trainable_parameters(self):
        """Parameters the active view/ablation configuration can reach.

        A placeholder trains only when it stands in for a disabled view;
        a disabled branch trains not at all.
        """
        skip = []
        if self.config.view in ("rgb", "both"):
            skip.append("fusion.rgb_placeholder")
        if self.config.view in ("skeleton", "both"):
            skip.append("fusion.skeleton_placeholder")
        if self.config.view == "skeleton":
            skip.append("rgb_encoder.")
        if self.config.view == "rgb":
            skip.append("skeleton_encoder.")
        elif not self.config.use_stan:
            skip.append("skeleton_encoder.gates.")
        return [p for name, p in self.named_parameters()
                if not any(name.startswith(s) for s in skip)]

    def lattices(self, samples: Sequence[PreparedSample]) -> list:
        """Per-sample (U, vocab+1) log-probability lattices.

        Clip extraction runs over every clip of every sample at once; the
        sequence encoder batches samples with equal clip counts.
        """
        if not samples:
            return []
        use_skeleton = self.config.view in ("skeleton", "both")
        use_rgb = self.config.view in ("rgb", "both")
        skeleton_feats = rgb_feats = None
        if use_skeleton:
            flat = np.concatenate([s.skeleton_nodes for s in samples], axis=0)
            skeleton_feats = self.skeleton_encoder(Tensor(flat))
        if use_rgb:
            flat = np.concatenate([s.rgb_tubes for s in samples], axis=0)
            rgb_feats = self.rgb_encoder(Tensor(flat))
        fused = self.fusion(rgb_feats, skeleton_feats)

        offsets = np.cumsum([0] + [s.clip_count for s in samples])
        groups: dict = {}
        for index, sample in enumerate(samples):
            groups.setdefault(sample.clip_count, []).append(index)
        dim = self.config.model_dim
        out = [None] * len(samples)
        for u, indexes in sorted(groups.items()):
            rows = np.concatenate([
                np.arange(offsets[i], offsets[i] + u) for i in indexes])
            x = ad.take(fused, rows, axis=0).reshape(len(indexes), u, dim)
            x = x + self.positions.slice(u)
            z = self.encoder(x)
            scores = ad.log_softmax(self.head(z), axis=-1)
            for j, i in enumerate(indexes):
                out[i] = scores[j]
        return out
