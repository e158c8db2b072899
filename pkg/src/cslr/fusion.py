"""Multi-view fusion head: project each view, concatenate, mix with a fully
connected layer and ReLU. Disabled views are replaced by a learned constant
vector so parameter shapes stay identical across view ablations."""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .nn import Dropout, Linear, Module, uniform_init

VIEWS = ("rgb", "skeleton", "both")


class FusionHead(Module):
    def __init__(self, rgb_dim: int, skeleton_dim: int, projection_width: int,
                 output_dim: int, dropout_rate: float, rng: np.random.Generator,
                 dropout_rng: Optional[np.random.Generator] = None,
                 view: str = "both"):
        super().__init__()
        if view not in VIEWS:
            raise ValueError(f"view must be one of {VIEWS}, got {view!r}")
        self.view = view
        self.rgb_dim = rgb_dim
        self.skeleton_dim = skeleton_dim
        self.output_dim = output_dim
        self.project_rgb = Linear(rgb_dim, projection_width, rng)
        self.project_skeleton = Linear(skeleton_dim, projection_width, rng)
        self.mix = Linear(2 * projection_width, output_dim, rng)
        self.rgb_placeholder = uniform_init((rgb_dim,), rgb_dim, rng)
        self.skeleton_placeholder = uniform_init((skeleton_dim,), skeleton_dim, rng)
        self.drop = Dropout(dropout_rate, dropout_rng)

    def _resolve(self, feats: Optional[Tensor], placeholder, dim: int,
                 enabled: bool, other: Optional[Tensor], name: str) -> Tensor:
        if enabled:
            if feats is None:
                raise ShapeError(f"view {self.view!r} needs {name} features")
            if feats.shape[-1] != dim:
                raise ShapeError(
                    f"{name} features have width {feats.shape[-1]}, expected {dim}"
                )
            return feats
        if other is None:
            raise ShapeError("fusion needs at least one view's features")
        lead = other.shape[:-1]
        return Tensor(np.zeros(lead + (dim,))) + placeholder

    def forward(self, rgb_feats: Optional[Tensor],
                skeleton_feats: Optional[Tensor]) -> Tensor:
        """Positionwise fuse (..., rgb_dim) and (..., skeleton_dim) into (..., d)."""
        use_rgb = self.view in ("rgb", "both")
        use_skeleton = self.view in ("skeleton", "both")
        rgb = self._resolve(rgb_feats, self.rgb_placeholder, self.rgb_dim,
                            use_rgb, skeleton_feats, "rgb")
        skeleton = self._resolve(skeleton_feats, self.skeleton_placeholder,
                                 self.skeleton_dim, use_skeleton, rgb_feats,
                                 "skeleton")
        if rgb.shape[:-1] != skeleton.shape[:-1]:
            raise ShapeError(
                f"view clip counts disagree: rgb {rgb.shape[:-1]} vs "
                f"skeleton {skeleton.shape[:-1]}"
            )
        joined = ad.concat([self.project_rgb(rgb), self.project_skeleton(skeleton)],
                           axis=-1)
        return self.drop(ad.relu(self.mix(joined)))
