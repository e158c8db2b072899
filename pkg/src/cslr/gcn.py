"""Skeleton clip encoder: multi-scale spatio-temporal graph convolutions with
a per-position attention gate, pooled into one feature vector per clip.

Clips enter as (batch, m*V, channels) with node-time-major rows: row a*V+i
is joint i of frame a. The normalized block adjacency ties a joint to its
k-hop neighbors and to its own copy in every frame of the clip; because the
tiling repeats the same pattern for all frame pairs, applying it reduces to
a V x V product against the frame-mean (see graph.multiscale_normalized).
After one such layer all m frame copies of a joint carry identical rows, so
the attention gate and the mean pooling commute with the tiling; the
encoder therefore runs on V rows internally and only the layer-level
operations materialize tiled outputs.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .graph import JointLayout, multiscale_normalized
from .nn import Module, ModuleList, uniform_init


class MultiScaleGraphConv(Module):
    """relu(normalized_adjacency @ x @ W_k), concatenated over scales k."""

    def __init__(self, normalized_scales, in_channels: int, out_per_scale: int,
                 m: int, rng: np.random.Generator):
        super().__init__()
        self.m = m
        self.joint_count = normalized_scales[0].shape[0]
        self.in_channels = in_channels
        self.out_per_scale = out_per_scale
        self._scales = [Tensor(mat) for mat in normalized_scales]
        for k in range(len(normalized_scales)):
            setattr(self, f"weight{k}",
                    uniform_init((in_channels, out_per_scale), in_channels, rng))

    @property
    def scale_count(self) -> int:
        return len(self._scales)

    def _check(self, x: Tensor) -> None:
        if x.shape[-2] != self.m * self.joint_count or x.shape[-1] != self.in_channels:
            raise ShapeError(
                f"expected (..., {self.m * self.joint_count}, {self.in_channels}) "
                f"clip features, got {x.shape}"
            )

    def frame_mean(self, x: Tensor) -> Tensor:
        """(batch, m*V, C) -> (batch, V, C), averaging each joint's m copies."""
        self._check(x)
        batched = x.ndim == 3
        if not batched:
            x = x.reshape(1, *x.shape)
        b = x.shape[0]
        mean = x.reshape(b, self.m, self.joint_count, self.in_channels).mean(axis=1)
        return mean if batched else mean.reshape(self.joint_count, self.in_channels)

    def scale_core(self, joints: Tensor, k: int) -> Tensor:
        """Single-scale convolution on per-joint rows (..., V, C_in)."""
        weight = getattr(self, f"weight{k}")
        return ad.relu(ad.matmul(ad.matmul(self._scales[k], joints), weight))

    def core_forward(self, joints: Tensor) -> Tensor:
        return ad.concat([self.scale_core(joints, k)
                          for k in range(self.scale_count)], axis=-1)

    def _tile(self, joints: Tensor) -> Tensor:
        batched = joints.ndim == 3
        if not batched:
            joints = joints.reshape(1, *joints.shape)
        b, v, c = joints.shape
        tiled = Tensor(np.zeros((b, self.m, v, c))) + joints.reshape(b, 1, v, c)
        tiled = tiled.reshape(b, self.m * v, c)
        return tiled if batched else tiled.reshape(self.m * v, c)

    def scale_forward(self, x: Tensor, k: int) -> Tensor:
        """Single-scale layer on node-time rows: (..., m*V, C_in) ->
        (..., m*V, out_per_scale)."""
        return self._tile(self.scale_core(self.frame_mean(x), k))

    def forward(self, x: Tensor) -> Tensor:
        return self._tile(self.core_forward(self.frame_mean(x)))


class SpatialTemporalAttention(Module):
    """Gated residual: x + x * sigmoid(conv1d(x)) per node-time position.

    The 1-d convolution maps the channel axis to a single logit per
    position; the resulting map is broadcast back across channels.
    """

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.channels = channels
        self.kernel = uniform_init((channels, 1), channels, rng)
        self.bias = uniform_init((1,), channels, rng)

    def attention_map(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.channels:
            raise ShapeError(
                f"attention expects {self.channels} channels, got {x.shape}"
            )
        return ad.sigmoid(ad.matmul(x, self.kernel) + self.bias)

    def forward(self, x: Tensor) -> Tensor:
        return x + x * self.attention_map(x)


class SkeletonClipEncoder(Module):
    """Stack of (multi-scale conv, attention) pairs, mean-pooled over all
    node-time positions into a clip feature vector."""

    def __init__(self, layout: JointLayout, m: int, scales: int,
                 channel_plan, rng: np.random.Generator,
                 use_multiscale: bool = True, use_stan: bool = True,
                 in_channels: int = 2):
        super().__init__()
        k = scales if use_multiscale else 1
        self.layout = layout
        self.m = m
        self.use_stan = use_stan
        normalized = multiscale_normalized(layout, k, m)
        convs, gates = [], []
        width = in_channels
        for out_per_scale in channel_plan:
            convs.append(MultiScaleGraphConv(normalized, width, out_per_scale, m, rng))
            width = k * out_per_scale
            gates.append(SpatialTemporalAttention(width, rng))
        self.convs = ModuleList(convs)
        self.gates = ModuleList(gates)
        self.out_features = width

    def forward(self, clips: Tensor) -> Tensor:
        """(batch, m*V, C_in) -> (batch, out_features).

        Runs on per-joint rows: every layer's tiled output repeats the
        joint rows m times, so gating and pooling give identical results
        either way (tested against the tiled path).
        """
        x = self.convs[0].frame_mean(clips)
        for conv, gate in zip(self.convs, self.gates):
            x = conv.core_forward(x)
            if self.use_stan:
                x = gate(x)
        return x.mean(axis=-2)
