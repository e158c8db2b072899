"""Sequence containers, on-disk formats, geometric normalization, clip windows.

Skeleton and RGB sequences live in memory as float64 arrays; the binary
formats store little-endian float32, and everything produced by this
package is quantized to the float32 grid at creation so that save/load
round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from .graph import JointLayout

MANIFEST_VERSION = 1
SKELETON_MAGIC = b"CSLRSKEL"
RGB_MAGIC = b"CSLRRGBS"
FORMAT_VERSION = 1


class DataError(ValueError):
    """Base for dataset and file-format failures."""


class SequenceFormatError(DataError):
    pass


class VersionMismatchError(SequenceFormatError):
    pass


class TruncatedFileError(SequenceFormatError):
    pass


class ShapeMismatchError(DataError):
    pass


class MissingFileError(DataError):
    pass


class ManifestError(DataError):
    pass


# -- sequence containers --------------------------------------------------------


@dataclass
class SkeletonSequence:
    """T frames of V joints with 2-d coordinates, shape (T, V, 2)."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 3 or self.coords.shape[-1] != 2:
            raise ShapeMismatchError(
                f"skeleton coords need shape (T, V, 2), got {self.coords.shape}"
            )
        if not np.isfinite(self.coords).all():
            raise DataError("skeleton coordinates contain NaN or infinity")

    @property
    def frames(self) -> int:
        return self.coords.shape[0]

    @property
    def joints(self) -> int:
        return self.coords.shape[1]


@dataclass
class RgbSequence:
    """T rendered frames, shape (T, H, W, 3), values in [0, 1]."""

    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 4 or self.frames.shape[-1] != 3:
            raise ShapeMismatchError(
                f"rgb frames need shape (T, H, W, 3), got {self.frames.shape}"
            )
        if self.frames.size and (self.frames.min() < 0.0 or self.frames.max() > 1.0):
            raise DataError("rgb values must lie in [0, 1]")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass(frozen=True)
class Clip:
    """A fixed-length window of a parent sequence."""

    offset: int
    frames: np.ndarray


def quantize_unit(values: np.ndarray) -> np.ndarray:
    """Snap [0, 1] values to the 8-bit grid, on the float32 lattice."""
    return (np.round(np.asarray(values, dtype=np.float64) * 255.0) / 255.0
            ).astype(np.float32).astype(np.float64)


def snap_float32(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float32).astype(np.float64)


# -- geometric normalization ----------------------------------------------------


def normalize_skeleton(seq: SkeletonSequence, layout: JointLayout) -> SkeletonSequence:
    """Translate and zoom a sequence into a person-independent frame.

    The neck joint of the first frame moves to the origin and the
    first-frame neck-to-nose distance becomes 1; every frame gets the same
    transform, so relative motion is preserved.
    """
    if seq.frames < 1:
        raise DataError("cannot normalize an empty skeleton sequence")
    neck = layout.anchor("neck")
    nose = layout.anchor("nose")
    origin = seq.coords[0, neck]
    reference = float(np.linalg.norm(seq.coords[0, nose] - origin))
    if reference <= 1e-12:
        warnings.warn(
            "degenerate neck-to-nose reference distance; applying unit scale",
            stacklevel=2,
        )
        reference = 1.0
    return SkeletonSequence((seq.coords - origin) / reference)


# -- sliding window --------------------------------------------------------------


def window_offsets(total_frames: int, m: int, stride: int) -> list:
    if total_frames < 1:
        raise DataError("cannot window an empty sequence")
    if m < 1 or not 1 <= stride <= m:
        raise ValueError(f"need m >= 1 and 1 <= stride <= m, got m={m} stride={stride}")
    if total_frames < m:
        return [0]
    count = (total_frames - m) // stride + 1
    return [i * stride for i in range(count)]


def sliding_window(seq: Union[SkeletonSequence, RgbSequence], m: int = 8,
                   stride: int = 4) -> list:
    """Cut a sequence into overlapping m-frame clips.

    Windows start at 0, stride, 2*stride, ...; a sequence shorter than m
    yields a single clip padded by repeating its last frame.
    """
    arr = seq.coords if isinstance(seq, SkeletonSequence) else seq.frames
    total = arr.shape[0]
    offsets = window_offsets(total, m, stride)
    clips = []
    for off in offsets:
        window = arr[off:off + m]
        if window.shape[0] < m:
            pad = np.repeat(window[-1:], m - window.shape[0], axis=0)
            window = np.concatenate([window, pad], axis=0)
        clips.append(Clip(offset=off, frames=window))
    return clips


# -- binary sequence files --------------------------------------------------------


def _read_exact(fh, n: int, what: str, path) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"{path}: truncated while reading {what}")
    return buf


def save_sequence(seq: Union[SkeletonSequence, RgbSequence],
                  path: Union[str, Path]) -> None:
    """Write the versioned binary format (payload is float32, so values off
    the float32 grid are quantized)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(seq, SkeletonSequence):
        magic, dims = SKELETON_MAGIC, seq.coords.shape
        payload = seq.coords
    else:
        magic, dims = RGB_MAGIC, seq.frames.shape
        payload = seq.frames
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(np.ascontiguousarray(payload, dtype="<f4").tobytes())


def load_sequence(path: Union[str, Path]) -> Union[SkeletonSequence, RgbSequence]:
    """Read a binary sequence file, or a directory of per-frame PNGs."""
    path = Path(path)
    if path.is_dir():
        return load_rgb_png_dir(path)
    if not path.exists():
        raise MissingFileError(f"sequence file not found: {path}")
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 8, "magic", path)
        if magic not in (SKELETON_MAGIC, RGB_MAGIC):
            raise SequenceFormatError(f"{path}: unrecognized magic {magic!r}")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version", path))
        if version != FORMAT_VERSION:
            raise VersionMismatchError(
                f"{path}: format version {version}, expected {FORMAT_VERSION}"
            )
        rank = 3 if magic == SKELETON_MAGIC else 4
        dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "shape", path))
        count = int(np.prod(dims, dtype=np.int64))
        payload = _read_exact(fh, 4 * count, "payload", path)
        values = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float64)
        if fh.read(1):
            raise SequenceFormatError(f"{path}: trailing bytes after payload")
    if magic == SKELETON_MAGIC:
        return SkeletonSequence(values)
    return RgbSequence(values)


def save_sequence_json(seq: Union[SkeletonSequence, RgbSequence],
                       path: Union[str, Path]) -> None:
    """Human-readable mirror of the binary format, for debugging."""
    if isinstance(seq, SkeletonSequence):
        doc = {"kind": "skeleton", "version": FORMAT_VERSION,
               "shape": list(seq.coords.shape), "values": seq.coords.tolist()}
    else:
        doc = {"kind": "rgb", "version": FORMAT_VERSION,
               "shape": list(seq.frames.shape), "values": seq.frames.tolist()}
    Path(path).write_text(json.dumps(doc))


def save_rgb_png_dir(seq: RgbSequence, dirpath: Union[str, Path]) -> None:
    """One 8-bit PNG per frame; lossless for quantized sequences."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for t in range(seq.frame_count):
        img = np.round(seq.frames[t] * 255.0).astype(np.uint8)
        Image.fromarray(img, mode="RGB").save(dirpath / f"frame_{t:05d}.png")


def load_rgb_png_dir(dirpath: Union[str, Path]) -> RgbSequence:
    dirpath = Path(dirpath)
    files = sorted(dirpath.glob("frame_*.png"))
    if not files:
        raise MissingFileError(f"no frame PNGs under {dirpath}")
    frames = []
    for f in files:
        arr = np.asarray(Image.open(f).convert("RGB"), dtype=np.float64) / 255.0
        frames.append(arr.astype(np.float32).astype(np.float64))
    return RgbSequence(np.stack(frames, axis=0))


# -- dataset manifest -------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    skeleton: str
    rgb: Optional[str]
    glosses: tuple
    split: str = "train"


@dataclass
class DatasetManifest:
    """Vocabulary plus the sample table; paths are relative to the manifest."""

    vocabulary: tuple
    entries: list
    rgb_format: str = "raw"
    layout_path: Optional[str] = None
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ManifestError("vocabulary contains duplicate glosses")
        if self.rgb_format not in ("raw", "png"):
            raise ManifestError(f"unknown rgb_format {self.rgb_format!r}")
        self._ids = {g: i for i, g in enumerate(self.vocabulary)}

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def gloss_ids(self, entry: ManifestEntry) -> tuple:
        try:
            return tuple(self._ids[g] for g in entry.glosses)
        except KeyError as exc:
            raise ManifestError(f"gloss {exc.args[0]!r} not in vocabulary") from exc

    def gloss_strings(self, ids) -> tuple:
        return tuple(self.vocabulary[i] for i in ids)

    def select(self, split: Optional[str]) -> list:
        if split is None:
            return list(self.entries)
        return [e for e in self.entries if e.split == split]

    def resolve(self, relative: str) -> Path:
        return self.root / relative


def save_manifest(manifest: DatasetManifest, path: Union[str, Path]) -> None:
    doc = {
        "schema_version": MANIFEST_VERSION,
        "vocabulary": list(manifest.vocabulary),
        "rgb_format": manifest.rgb_format,
        "layout": manifest.layout_path,
        "entries": [
            {"skeleton": e.skeleton, "rgb": e.rgb,
             "glosses": list(e.glosses), "split": e.split}
            for e in manifest.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_split(manifest: DatasetManifest, split: Optional[str] = "train",
               load_rgb: bool = True) -> tuple:
    """Materialize (X, y) for an estimator: X pairs sequences, y gloss ids."""
    entries = manifest.select(split)
    if not entries:
        raise ManifestError(f"manifest has no entries for split {split!r}")
    xs, ys = [], []
    for entry in entries:
        skeleton = load_sequence(manifest.resolve(entry.skeleton))
        if not isinstance(skeleton, SkeletonSequence):
            raise ShapeMismatchError(
                f"{entry.skeleton} is not a skeleton sequence as the manifest claims"
            )
        rgb = None
        if load_rgb and entry.rgb is not None:
            rgb = load_sequence(manifest.resolve(entry.rgb))
            if not isinstance(rgb, RgbSequence):
                raise ShapeMismatchError(
                    f"{entry.rgb} is not an rgb sequence as the manifest claims"
                )
            if rgb.frame_count != skeleton.frames:
                raise ShapeMismatchError(
                    f"{entry.rgb}: {rgb.frame_count} frames but paired skeleton "
                    f"has {skeleton.frames}"
                )
        xs.append((skeleton, rgb))
        ys.append(manifest.gloss_ids(entry))
    return xs, ys


def load_manifest(path: Union[str, Path], check_files: bool = True) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("schema_version") != MANIFEST_VERSION:
        raise VersionMismatchError(
            f"{path}: manifest schema {doc.get('schema_version')}, "
            f"expected {MANIFEST_VERSION}"
        )
    entries = [
        ManifestEntry(skeleton=e["skeleton"], rgb=e.get("rgb"),
                      glosses=tuple(e["glosses"]), split=e.get("split", "train"))
        for e in doc.get("entries", [])
    ]
    manifest = DatasetManifest(
        vocabulary=tuple(doc.get("vocabulary", ())),
        entries=entries,
        rgb_format=doc.get("rgb_format", "raw"),
        layout_path=doc.get("layout"),
        root=path.parent,
    )
    if check_files:
        for entry in entries:
            for rel in (entry.skeleton, entry.rgb):
                if rel is not None and not manifest.resolve(rel).exists():
                    raise MissingFileError(
                        f"manifest references missing file: {manifest.resolve(rel)}"
                    )
            manifest.gloss_ids(entry)
        if manifest.layout_path and not manifest.resolve(manifest.layout_path).exists():
            raise MissingFileError(
                f"manifest references missing layout: "
                f"{manifest.resolve(manifest.layout_path)}"
            )
    return manifest
