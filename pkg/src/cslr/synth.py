"""Synthetic continuous-gesture data: seeded gloss prototypes, sentence
assembly with interpolated transitions, and stick-figure rasterization for
the RGB view.

Every gloss id maps to a fixed bank of per-joint sinusoid parameters drawn
from a generator seeded by (master seed, gloss id), so samples are
reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import data as dio
from .data import DatasetManifest, ManifestEntry, RgbSequence, SkeletonSequence
from .graph import JointLayout, default_layout, save_layout

_PROTO_SALT = 101
_NOISE_SALT = 202
_SENTENCE_SALT = 303

GROUP_COLORS = {
    "hand": (0.90, 0.25, 0.20),
    "face": (0.25, 0.55, 0.95),
    "body": (0.30, 0.85, 0.40),
}
_DEFAULT_COLOR = (0.75, 0.75, 0.75)


@dataclass(frozen=True)
class SynthConfig:
    vocab_size: int = 5
    sentence_length_range: tuple = (2, 4)
    frames_per_gloss: int = 12
    transition_frames: int = 4
    noise_scale: float = 0.004
    image_size: int = 32

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("synthetic vocabulary needs at least 2 glosses")
        lo, hi = self.sentence_length_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad sentence length range {self.sentence_length_range}")


def vocabulary_strings(vocab_size: int) -> tuple:
    return tuple(f"gloss{i:03d}" for i in range(vocab_size))


# -- rest pose and gloss prototypes ---------------------------------------------


def _hand_joints(wrist: np.ndarray, side: float, spread: float,
                 curl: float) -> np.ndarray:
    """21 joints: wrist plus 5 four-joint finger chains fanned around it."""
    joints = [wrist]
    base_angles = np.deg2rad([-55.0, -22.0, 0.0, 22.0, 48.0]) * side + np.pi / 2.0
    for f in range(5):
        angle = base_angles[f] + side * spread * (f - 2) * 0.12
        direction = np.array([np.cos(angle), np.sin(angle)])
        for s in range(1, 5):
            joints.append(wrist + direction * (0.016 + 0.016 * s) * (1.0 - 0.3 * curl))
    return np.stack(joints)


def rest_pose() -> np.ndarray:
    """The 52-joint rest pose in the unit square (image y axis points down)."""
    pose = np.zeros((52, 2))
    left_wrist = np.array([0.33, 0.74])
    right_wrist = np.array([0.67, 0.74])
    pose[0:21] = _hand_joints(left_wrist, -1.0, 0.0, 0.0)
    pose[21:42] = _hand_joints(right_wrist, +1.0, 0.0, 0.0)
    pose[42] = (0.50, 0.27)   # nose
    pose[43] = (0.46, 0.24)   # left eye
    pose[44] = (0.54, 0.24)   # right eye
    pose[45] = (0.42, 0.27)   # left ear
    pose[46] = (0.58, 0.27)   # right ear
    pose[47] = (0.50, 0.42)   # neck
    pose[48] = (0.36, 0.46)   # left shoulder
    pose[49] = (0.64, 0.46)   # right shoulder
    pose[50] = (0.30, 0.62)   # left elbow
    pose[51] = (0.70, 0.62)   # right elbow
    return pose


@dataclass(frozen=True)
class _GlossMotion:
    """Sinusoid bank steering both wrists and the finger articulation."""

    wrist_amp: np.ndarray     # (2 hands, 2 axes)
    wrist_freq: np.ndarray    # (2, 2) integer cycles per gloss
    wrist_phase: np.ndarray   # (2, 2)
    spread_amp: np.ndarray    # (2,)
    spread_freq: np.ndarray   # (2,)
    spread_phase: np.ndarray  # (2,)
    curl_amp: np.ndarray      # (2,)
    sway_phase: float


def _gloss_motion(master_seed: int, gloss_id: int) -> _GlossMotion:
    rng = np.random.default_rng([master_seed, _PROTO_SALT, gloss_id])
    return _GlossMotion(
        wrist_amp=rng.uniform(0.05, 0.16, size=(2, 2)),
        wrist_freq=rng.integers(1, 4, size=(2, 2)).astype(np.float64),
        wrist_phase=rng.uniform(0.0, 2.0 * np.pi, size=(2, 2)),
        spread_amp=rng.uniform(0.15, 0.5, size=2),
        spread_freq=rng.integers(1, 3, size=2).astype(np.float64),
        spread_phase=rng.uniform(0.0, 2.0 * np.pi, size=2),
        curl_amp=rng.uniform(0.0, 0.8, size=2),
        sway_phase=float(rng.uniform(0.0, 2.0 * np.pi)),
    )


def gloss_prototype(master_seed: int, gloss_id: int, frames: int) -> np.ndarray:
    """The fixed (frames, 52, 2) trajectory for one gloss id."""
    motion = _gloss_motion(master_seed, gloss_id)
    base = rest_pose()
    out = np.empty((frames, 52, 2))
    for t in range(frames):
        phase = 2.0 * np.pi * t / frames
        pose = base.copy()
        wrist_offsets = motion.wrist_amp * np.sin(
            motion.wrist_freq * phase + motion.wrist_phase)
        for h, (wrist_idx, elbow_idx, side) in enumerate(
                ((0, 50, -1.0), (21, 51, +1.0))):
            wrist = base[wrist_idx] + wrist_offsets[h]
            spread = motion.spread_amp[h] * np.sin(
                motion.spread_freq[h] * phase + motion.spread_phase[h])
            curl = 0.5 * motion.curl_amp[h] * (
                1.0 + np.sin(phase + motion.spread_phase[h]))
            pose[wrist_idx:wrist_idx + 21] = _hand_joints(wrist, side, spread, curl)
            pose[elbow_idx] = base[elbow_idx] + 0.5 * wrist_offsets[h]
        sway = 0.01 * np.sin(phase + motion.sway_phase)
        pose[42:52, 0] += sway
        out[t] = pose
    return out


# -- sentence assembly ------------------------------------------------------------


def sample_sentence(config: SynthConfig, rng: np.random.Generator) -> tuple:
    lo, hi = config.sentence_length_range
    length = int(rng.integers(lo, hi + 1))
    return tuple(int(rng.integers(0, config.vocab_size)) for _ in range(length))


def synth_skeleton(config: SynthConfig, master_seed: int, sample_index: int,
                   sentence: Sequence[int]) -> SkeletonSequence:
    """Concatenate gloss prototypes with interpolated transitions plus noise."""
    blocks = []
    prev_last = None
    for gloss in sentence:
        proto = gloss_prototype(master_seed, gloss, config.frames_per_gloss)
        if prev_last is not None and config.transition_frames > 0:
            n = config.transition_frames
            weights = (np.arange(1, n + 1) / (n + 1))[:, None, None]
            blocks.append((1.0 - weights) * prev_last[None] + weights * proto[0][None])
        blocks.append(proto)
        prev_last = proto[-1]
    coords = np.concatenate(blocks, axis=0)
    noise_rng = np.random.default_rng([master_seed, _NOISE_SALT, sample_index])
    coords = coords + noise_rng.normal(0.0, config.noise_scale, size=coords.shape)
    return SkeletonSequence(dio.snap_float32(coords))


def synth_generate(config: SynthConfig, master_seed: int, sample_index: int = 0,
                   sentence: Optional[Sequence[int]] = None,
                   layout: Optional[JointLayout] = None):
    """One (skeleton, rgb, gloss ids) sample; equal seeds give equal bits."""
    if sentence is None:
        rng = np.random.default_rng([master_seed, _SENTENCE_SALT, sample_index])
        sentence = sample_sentence(config, rng)
    layout = layout if layout is not None else default_layout()
    if layout.joint_count != rest_pose().shape[0]:
        raise ValueError("gloss prototypes are defined for the 52-joint layout")
    skeleton = synth_skeleton(config, master_seed, sample_index, sentence)
    rgb = rasterize_sequence(skeleton, layout, config.image_size, config.image_size)
    return skeleton, rgb, tuple(sentence)


# -- stick-figure rasterization ----------------------------------------------------


def _joint_colors(layout: JointLayout) -> np.ndarray:
    colors = np.full((layout.joint_count, 3), _DEFAULT_COLOR)
    for name, members in layout.groups.items():
        color = GROUP_COLORS.get(name, _DEFAULT_COLOR)
        for j in members:
            colors[j] = color
    return colors


def _splat_disc(img: np.ndarray, center: np.ndarray, radius: float,
                color: np.ndarray) -> None:
    h, w = img.shape[:2]
    x0 = max(int(np.floor(center[0] - radius - 1)), 0)
    x1 = min(int(np.ceil(center[0] + radius + 1)) + 1, w)
    y0 = max(int(np.floor(center[1] - radius - 1)), 0)
    y1 = min(int(np.ceil(center[1] + radius + 1)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dist = np.hypot(xs - center[0], ys - center[1])
    cover = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    patch = img[y0:y1, x0:x1]
    np.maximum(patch, cover[..., None] * color, out=patch)


def _splat_segment(img: np.ndarray, a: np.ndarray, b: np.ndarray,
                   half_width: float, color: np.ndarray) -> None:
    h, w = img.shape[:2]
    lo = np.minimum(a, b) - half_width - 1
    hi = np.maximum(a, b) + half_width + 1
    x0, y0 = max(int(np.floor(lo[0])), 0), max(int(np.floor(lo[1])), 0)
    x1, y1 = min(int(np.ceil(hi[0])) + 1, w), min(int(np.ceil(hi[1])) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    diff = b - a
    denom = float(diff @ diff)
    if denom < 1e-12:
        _splat_disc(img, a, half_width, color)
        return
    t = np.clip(((xs - a[0]) * diff[0] + (ys - a[1]) * diff[1]) / denom, 0.0, 1.0)
    dist = np.hypot(xs - (a[0] + t * diff[0]), ys - (a[1] + t * diff[1]))
    cover = np.clip(half_width + 0.5 - dist, 0.0, 1.0)
    patch = img[y0:y1, x0:x1]
    np.maximum(patch, cover[..., None] * color, out=patch)


def rasterize_frame(coords: np.ndarray, layout: JointLayout, height: int,
                    width: int, view: tuple = (0.0, 0.0, 1.0, 1.0)) -> np.ndarray:
    """Draw one skeleton frame as group-colored sticks and joint discs.

    The maximum blend makes the result independent of drawing order;
    out-of-frame geometry is clipped. Output values sit on the 8-bit grid.
    """
    coords = np.asarray(coords, dtype=np.float64)
    x0, y0, x1, y1 = view
    pixels = np.empty_like(coords)
    pixels[:, 0] = (coords[:, 0] - x0) / (x1 - x0) * (width - 1)
    pixels[:, 1] = (coords[:, 1] - y0) / (y1 - y0) * (height - 1)
    img = np.zeros((height, width, 3))
    colors = _joint_colors(layout)
    scale = max(height, width) / 32.0
    for i, j in layout.edges:
        edge_color = 0.5 * (colors[i] + colors[j])
        _splat_segment(img, pixels[i], pixels[j], 0.55 * scale, edge_color)
    for j in range(layout.joint_count):
        _splat_disc(img, pixels[j], 0.85 * scale, colors[j])
    return dio.quantize_unit(img)


def rasterize_sequence(seq: SkeletonSequence, layout: JointLayout, height: int,
                       width: int, view: tuple = (0.0, 0.0, 1.0, 1.0)) -> RgbSequence:
    frames = np.stack([
        rasterize_frame(seq.coords[t], layout, height, width, view)
        for t in range(seq.frames)
    ], axis=0)
    return RgbSequence(frames)


# -- dataset emission ---------------------------------------------------------------


def generate_dataset(config: SynthConfig, sentences: int, master_seed: int,
                     out_dir: Union[str, Path], split: str = "train",
                     rgb_format: str = "raw",
                     layout: Optional[JointLayout] = None) -> Path:
    """Write sequences, the joint layout, and a manifest under ``out_dir``.

    Appends to an existing manifest when generating another split into the
    same directory. Returns the manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    layout = layout if layout is not None else default_layout()
    vocab = vocabulary_strings(config.vocab_size)
    manifest_path = out_dir / "manifest.json"
    entries = []
    if manifest_path.exists():
        previous = dio.load_manifest(manifest_path, check_files=False)
        if previous.vocabulary != vocab or previous.rgb_format != rgb_format:
            raise ValueError(
                "existing manifest disagrees on vocabulary or rgb format; "
                "generate into a fresh directory"
            )
        entries = list(previous.entries)
    # sample indexes continue across splits so dev/test draw fresh sentences
    base_index = len(entries)
    for offset in range(sentences):
        index = base_index + offset
        skeleton, rgb, gloss_ids = synth_generate(
            config, master_seed, sample_index=index, layout=layout)
        skel_rel = f"{split}_{offset:04d}.skel"
        dio.save_sequence(skeleton, out_dir / skel_rel)
        if rgb_format == "png":
            rgb_rel = f"{split}_{offset:04d}_rgb"
            dio.save_rgb_png_dir(rgb, out_dir / rgb_rel)
        else:
            rgb_rel = f"{split}_{offset:04d}.rgbs"
            dio.save_sequence(rgb, out_dir / rgb_rel)
        entries.append(ManifestEntry(
            skeleton=skel_rel, rgb=rgb_rel,
            glosses=tuple(vocab[g] for g in gloss_ids), split=split))
    layout_rel = "joints.layout"
    save_layout(layout, out_dir / layout_rel)
    manifest = DatasetManifest(vocabulary=vocab, entries=entries,
                               rgb_format=rgb_format, layout_path=layout_rel,
                               root=out_dir)
    dio.save_manifest(manifest, manifest_path)
    return manifest_path
