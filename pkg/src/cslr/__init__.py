"""Multi-view continuous sign language recognition at desk scale.

Skeleton clips run through a multi-scale spatio-temporal graph network,
RGB clips through a small patch transformer; fused clip features are
transformer-encoded and decoded with CTC. Everything is built on a minimal
float64 autodiff core and scored by word error rate.
"""

from .autodiff import ShapeError, Tensor
from .config import ConfigError, RunConfig, load_config_file, preset
from .ctc import (best_path_decode, brute_force_prob, collapse, ctc_feasible,
                  ctc_log_prob, ctc_loss)
from .data import (DataError, DatasetManifest, RgbSequence, SkeletonSequence,
                   load_manifest, load_sequence, load_split, normalize_skeleton,
                   save_manifest, save_sequence, sliding_window)
from .estimator import SignRecognizer, TrainingDivergedError
from .graph import (JointLayout, build_scale_adjacency, default_layout,
                    load_layout, shortest_path_distances, sym_normalize,
                    tile_block)
from .metrics import EditSummary, corpus_report, corpus_wer, edit_align
from .model import RecognizerNetwork, prepare_sample
from .synth import SynthConfig, generate_dataset, synth_generate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "DatasetManifest",
    "EditSummary",
    "JointLayout",
    "RecognizerNetwork",
    "RgbSequence",
    "RunConfig",
    "ShapeError",
    "SignRecognizer",
    "SkeletonSequence",
    "SynthConfig",
    "Tensor",
    "TrainingDivergedError",
    "best_path_decode",
    "brute_force_prob",
    "build_scale_adjacency",
    "collapse",
    "corpus_report",
    "corpus_wer",
    "ctc_feasible",
    "ctc_log_prob",
    "ctc_loss",
    "default_layout",
    "edit_align",
    "generate_dataset",
    "load_config_file",
    "load_layout",
    "load_manifest",
    "load_sequence",
    "load_split",
    "normalize_skeleton",
    "prepare_sample",
    "preset",
    "save_manifest",
    "save_sequence",
    "shortest_path_distances",
    "sliding_window",
    "sym_normalize",
    "synth_generate",
    "tile_block",
    "__version__",
]
