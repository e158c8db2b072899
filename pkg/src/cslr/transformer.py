"""Transformer building blocks: sinusoid positions, multi-head attention,
pre-norm encoder layers, and the patch-tube transformer that turns an RGB
clip into one feature vector."""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor
from .nn import Dropout, LayerNorm, Linear, Module, ModuleList, Parameter, uniform_init


def sinusoid_table(length: int, dim: int) -> np.ndarray:
    """table[pos, 2i] = sin(pos / 10000^(2i/dim)), table[pos, 2i+1] = cos(same)."""
    positions = np.arange(length, dtype=np.float64)[:, None]
    pair = 2.0 * (np.arange(dim, dtype=np.float64)[None, :] // 2)
    angles = positions / np.power(10000.0, pair / dim)
    table = np.empty((length, dim))
    table[:, 0::2] = np.sin(angles[:, 0::2])
    table[:, 1::2] = np.cos(angles[:, 1::2])
    return table


class PositionalEncoding:
    """Precomputed sinusoid table added to sequence features."""

    def __init__(self, max_len: int, dim: int):
        self.max_len = max_len
        self.dim = dim
        self.table = sinusoid_table(max_len, dim)

    def slice(self, length: int) -> Tensor:
        if length > self.max_len:
            raise ShapeError(
                f"sequence length {length} exceeds positional table ({self.max_len})"
            )
        return Tensor(self.table[:length])

    def add(self, x: Tensor) -> Tensor:
        return x + self.slice(x.shape[-2])


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention over (batch, positions, dim)."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        super().__init__()
        if dim % heads != 0:
            raise ShapeError(f"model dim {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        b, u, _ = x.shape
        return x.reshape(b, u, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def forward(self, x: Tensor, return_weights: bool = False):
        if x.ndim != 3 or x.shape[-1] != self.dim:
            raise ShapeError(f"attention expects (batch, U, {self.dim}), got {x.shape}")
        b, u, _ = x.shape
        q = self._split(self.query(x))
        k = self._split(self.key(x))
        v = self._split(self.value(x))
        scores = ad.matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.head_dim))
        weights = ad.softmax(scores, axis=-1)
        context = ad.matmul(weights, v)
        merged = context.transpose(0, 2, 1, 3).reshape(b, u, self.dim)
        out = self.out(merged)
        if return_weights:
            return out, weights
        return out


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.grow = Linear(dim, hidden, rng)
        self.shrink = Linear(hidden, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.shrink(ad.relu(self.grow(x)))


class EncoderLayer(Module):
    """Pre-norm residual block: x + MHA(norm(x)), then y + FFN(norm(y))."""

    def __init__(self, dim: int, heads: int, ff_hidden: int,
                 dropout_rate: float, rng: np.random.Generator,
                 dropout_rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.norm_attn = LayerNorm(dim)
        self.attention = MultiHeadAttention(dim, heads, rng)
        self.norm_ff = LayerNorm(dim)
        self.feed_forward = FeedForward(dim, ff_hidden, rng)
        self.drop = Dropout(dropout_rate, dropout_rng)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.drop(self.attention(self.norm_attn(x)))
        return x + self.drop(self.feed_forward(self.norm_ff(x)))


class SequenceEncoder(Module):
    """Stack of encoder layers over already position-encoded clip features."""

    def __init__(self, dim: int, heads: int, layers: int, ff_hidden: int,
                 dropout_rate: float, rng: np.random.Generator,
                 dropout_rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.dim = dim
        self.layers = ModuleList([
            EncoderLayer(dim, heads, ff_hidden, dropout_rate, rng, dropout_rng)
            for _ in range(layers)
        ])

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3:
            raise ShapeError(f"encoder expects (batch, U, dim), got {x.shape}")
        if x.shape[-2] < 1:
            raise ShapeError("encoder got an empty sequence")
        for layer in self.layers:
            x = layer(x)
        return x


def extract_patch_tubes(frames: np.ndarray, patch: int) -> np.ndarray:
    """Cut an (m, H, W, 3) clip into ((H/p)*(W/p), m*p*p*3) flattened tubes.

    Each tube stacks the same spatial patch across all m frames, so the
    embedding sees motion, not just appearance.
    """
    m, h, w, c = frames.shape
    if h % patch or w % patch:
        raise ShapeError(f"image {h}x{w} not divisible by patch size {patch}")
    gh, gw = h // patch, w // patch
    tubes = frames.reshape(m, gh, patch, gw, patch, c)
    tubes = tubes.transpose(1, 3, 0, 2, 4, 5)  # (gh, gw, m, p, p, c)
    return np.ascontiguousarray(tubes.reshape(gh * gw, m * patch * patch * c))


class ClipPatchTransformer(Module):
    """Patch-tube transformer over one clip; the learned summary token's
    final state is the clip feature."""

    def __init__(self, image_size: int, patch: int, frames: int, dim: int,
                 heads: int, layers: int, dropout_rate: float,
                 rng: np.random.Generator,
                 dropout_rng: Optional[np.random.Generator] = None,
                 channels: int = 3):
        super().__init__()
        if image_size % patch:
            raise ShapeError(f"image size {image_size} not divisible by patch {patch}")
        self.image_size = image_size
        self.patch = patch
        self.frames = frames
        self.dim = dim
        self.patch_count = (image_size // patch) ** 2
        tube_dim = frames * patch * patch * channels
        self.embed = Linear(tube_dim, dim, rng)
        self.token = uniform_init((1, 1, dim), dim, rng)
        self.positions = PositionalEncoding(self.patch_count + 1, dim)
        self.encoder = SequenceEncoder(dim, heads, layers, 4 * dim,
                                       dropout_rate, rng, dropout_rng)

    def forward(self, tubes: Tensor) -> Tensor:
        """(batch, patch_count, tube_dim) -> (batch, dim)."""
        if tubes.shape[-2] != self.patch_count:
            raise ShapeError(
                f"expected {self.patch_count} patch tubes, got {tubes.shape}"
            )
        b = tubes.shape[0]
        token = Tensor(np.zeros((b, 1, self.dim))) + self.token
        x = ad.concat([token, self.embed(tubes)], axis=1)
        x = self.positions.add(x)
        x = self.encoder(x)
        return x[:, 0]
