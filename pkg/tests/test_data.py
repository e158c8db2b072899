import json

import numpy as np
import pytest

from cslr.data import (DataError, DatasetManifest, ManifestEntry,
                       ManifestError, MissingFileError, RgbSequence,
                       SequenceFormatError, ShapeMismatchError,
                       SkeletonSequence, TruncatedFileError,
                       VersionMismatchError, load_manifest, load_rgb_png_dir,
                       load_sequence, load_split, normalize_skeleton,
                       quantize_unit, save_manifest, save_rgb_png_dir,
                       save_sequence, save_sequence_json, sliding_window,
                       snap_float32, window_offsets)


def make_skeleton(rng, frames=6, joints=3):
    return SkeletonSequence(snap_float32(rng.normal(size=(frames, joints, 2))))


class TestNormalization:
    def _sequence(self, rng, path3):
        coords = rng.normal(size=(5, 3, 2))
        coords[0, 1] = coords[0, 0] + (0.0, 2.0)  # clear neck-to-nose gap
        return SkeletonSequence(coords)

    def test_anchors_land_where_stated(self, rng, path3):
        seq = self._sequence(rng, path3)
        out = normalize_skeleton(seq, path3)
        assert np.allclose(out.coords[0, 0], [0.0, 0.0], atol=1e-12)
        assert np.linalg.norm(out.coords[0, 1]) == pytest.approx(1.0, abs=1e-12)

    def test_idempotent(self, rng, path3):
        once = normalize_skeleton(self._sequence(rng, path3), path3)
        twice = normalize_skeleton(once, path3)
        assert np.abs(once.coords - twice.coords).max() < 1e-12

    def test_translation_invariance(self, rng, path3):
        seq = self._sequence(rng, path3)
        shifted = SkeletonSequence(seq.coords + np.array([5.0, 5.0]))
        a = normalize_skeleton(seq, path3)
        b = normalize_skeleton(shifted, path3)
        assert np.abs(a.coords - b.coords).max() < 1e-9

    def test_scale_invariance(self, rng, path3):
        seq = self._sequence(rng, path3)
        scaled = SkeletonSequence(seq.coords * 3.0)
        a = normalize_skeleton(seq, path3)
        b = normalize_skeleton(scaled, path3)
        assert np.abs(a.coords - b.coords).max() < 1e-9

    def test_degenerate_reference_warns_and_unit_scale(self, path3):
        coords = np.zeros((2, 3, 2))
        coords[1] = 1.0
        with pytest.warns(UserWarning, match="degenerate"):
            out = normalize_skeleton(SkeletonSequence(coords), path3)
        assert np.array_equal(out.coords, coords)

    def test_nan_rejected(self):
        coords = np.zeros((1, 3, 2))
        coords[0, 0, 0] = np.nan
        with pytest.raises(DataError, match="NaN"):
            SkeletonSequence(coords)


class TestSlidingWindow:
    def test_spec_window_count(self, rng):
        seq = make_skeleton(rng, frames=16)
        clips = sliding_window(seq, m=8, stride=4)
        assert [c.offset for c in clips] == [0, 4, 8]

    def test_exact_fit_single_window(self, rng):
        assert len(sliding_window(make_skeleton(rng, frames=8), 8, 4)) == 1

    def test_short_sequence_pads_with_last_frame(self, rng):
        seq = make_skeleton(rng, frames=5)
        (clip,) = sliding_window(seq, m=8, stride=4)
        assert clip.frames.shape[0] == 8
        for t in range(5, 8):
            assert np.array_equal(clip.frames[t], seq.coords[4])

    def test_adjacent_overlap(self, rng):
        seq = make_skeleton(rng, frames=20)
        clips = sliding_window(seq, m=8, stride=4)
        for a, b in zip(clips, clips[1:]):
            assert np.array_equal(a.frames[4:], b.frames[:4])

    def test_coverage_when_stride_divides(self, rng):
        # union of windows covers every frame when stride | (T - m)
        for frames, m, stride in ((16, 8, 4), (14, 6, 2), (9, 3, 3)):
            seq = make_skeleton(rng, frames=frames)
            covered = set()
            for clip in sliding_window(seq, m, stride):
                covered.update(range(clip.offset, clip.offset + m))
            assert covered == set(range(frames))

    def test_empty_sequence_rejected(self):
        with pytest.raises(DataError):
            window_offsets(0, 8, 4)

    def test_bad_stride_rejected(self):
        with pytest.raises(ValueError):
            window_offsets(10, 4, 5)

    def test_rgb_windows_too(self, rng):
        seq = RgbSequence(quantize_unit(rng.random((10, 8, 8, 3))))
        clips = sliding_window(seq, m=4, stride=2)
        assert len(clips) == 4
        assert clips[0].frames.shape == (4, 8, 8, 3)


class TestSequenceFiles:
    def test_skeleton_roundtrip(self, tmp_path, rng):
        seq = make_skeleton(rng)
        path = tmp_path / "a.skel"
        save_sequence(seq, path)
        again = load_sequence(path)
        assert isinstance(again, SkeletonSequence)
        assert np.array_equal(again.coords, seq.coords)

    def test_rgb_roundtrip(self, tmp_path, rng):
        seq = RgbSequence(quantize_unit(rng.random((4, 6, 5, 3))))
        path = tmp_path / "a.rgbs"
        save_sequence(seq, path)
        again = load_sequence(path)
        assert isinstance(again, RgbSequence)
        assert np.array_equal(again.frames, seq.frames)

    def test_double_roundtrip_bytes_identical(self, tmp_path, rng):
        seq = make_skeleton(rng)
        first = tmp_path / "a.skel"
        second = tmp_path / "b.skel"
        save_sequence(seq, first)
        save_sequence(load_sequence(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_truncation_is_a_distinct_error(self, tmp_path, rng):
        path = tmp_path / "a.skel"
        save_sequence(make_skeleton(rng), path)
        path.write_bytes(path.read_bytes()[:-7])
        with pytest.raises(TruncatedFileError):
            load_sequence(path)

    def test_version_mismatch_detected(self, tmp_path, rng):
        path = tmp_path / "a.skel"
        save_sequence(make_skeleton(rng), path)
        raw = bytearray(path.read_bytes())
        raw[8] = 42
        path.write_bytes(bytes(raw))
        with pytest.raises(VersionMismatchError):
            load_sequence(path)

    def test_unknown_magic(self, tmp_path):
        path = tmp_path / "junk.skel"
        path.write_bytes(b"NOTAFILE" + b"\x00" * 64)
        with pytest.raises(SequenceFormatError, match="magic"):
            load_sequence(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError, match="nowhere.skel"):
            load_sequence(tmp_path / "nowhere.skel")

    def test_json_mirror(self, tmp_path, rng):
        seq = make_skeleton(rng, frames=2)
        path = tmp_path / "a.json"
        save_sequence_json(seq, path)
        doc = json.loads(path.read_text())
        assert doc["kind"] == "skeleton"
        assert doc["shape"] == [2, 3, 2]
        assert np.allclose(np.array(doc["values"]), seq.coords)

    def test_png_roundtrip(self, tmp_path, rng):
        seq = RgbSequence(quantize_unit(rng.random((3, 8, 8, 3))))
        save_rgb_png_dir(seq, tmp_path / "frames")
        again = load_rgb_png_dir(tmp_path / "frames")
        assert np.array_equal(again.frames, seq.frames)


class TestManifest:
    def _write_dataset(self, tmp_path, rng):
        skel = make_skeleton(rng)
        rgb = RgbSequence(quantize_unit(rng.random((6, 8, 8, 3))))
        save_sequence(skel, tmp_path / "s0.skel")
        save_sequence(rgb, tmp_path / "s0.rgbs")
        manifest = DatasetManifest(
            vocabulary=("hello", "world"),
            entries=[ManifestEntry("s0.skel", "s0.rgbs", ("hello", "world"),
                                   "train")],
            root=tmp_path)
        save_manifest(manifest, tmp_path / "manifest.json")
        return manifest

    def test_roundtrip(self, tmp_path, rng):
        self._write_dataset(tmp_path, rng)
        manifest = load_manifest(tmp_path / "manifest.json")
        assert manifest.vocabulary == ("hello", "world")
        assert manifest.gloss_ids(manifest.entries[0]) == (0, 1)

    def test_missing_referenced_file_named(self, tmp_path, rng):
        self._write_dataset(tmp_path, rng)
        (tmp_path / "s0.rgbs").unlink()
        with pytest.raises(MissingFileError, match="s0.rgbs"):
            load_manifest(tmp_path / "manifest.json")

    def test_unknown_gloss_rejected(self, tmp_path, rng):
        self._write_dataset(tmp_path, rng)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        doc["entries"][0]["glosses"] = ["hello", "mystery"]
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(ManifestError, match="mystery"):
            load_manifest(tmp_path / "manifest.json")

    def test_schema_version_checked(self, tmp_path, rng):
        self._write_dataset(tmp_path, rng)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        doc["schema_version"] = 99
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(VersionMismatchError):
            load_manifest(tmp_path / "manifest.json")

    def test_duplicate_vocabulary_rejected(self):
        with pytest.raises(ManifestError, match="duplicate"):
            DatasetManifest(vocabulary=("a", "a"), entries=[])

    def test_load_split_returns_pairs(self, tmp_path, rng):
        self._write_dataset(tmp_path, rng)
        manifest = load_manifest(tmp_path / "manifest.json")
        xs, ys = load_split(manifest, "train")
        assert len(xs) == len(ys) == 1
        skel, rgb = xs[0]
        assert isinstance(skel, SkeletonSequence)
        assert isinstance(rgb, RgbSequence)
        assert ys[0] == (0, 1)

    def test_load_split_empty_split_errors(self, tmp_path, rng):
        self._write_dataset(tmp_path, rng)
        manifest = load_manifest(tmp_path / "manifest.json")
        with pytest.raises(ManifestError, match="dev"):
            load_split(manifest, "dev")

    def test_swapped_kinds_detected(self, tmp_path, rng):
        self._write_dataset(tmp_path, rng)
        doc = json.loads((tmp_path / "manifest.json").read_text())
        doc["entries"][0]["skeleton"] = "s0.rgbs"
        (tmp_path / "manifest.json").write_text(json.dumps(doc))
        manifest = load_manifest(tmp_path / "manifest.json")
        with pytest.raises(ShapeMismatchError):
            load_split(manifest, "train")
