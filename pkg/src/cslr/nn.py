"""Parameter containers and the standard layers built on the autodiff core."""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


class Parameter(Tensor):
    """A trainable tensor; its name path comes from its place in a Module tree."""

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


def uniform_init(shape: tuple, fan_in: int, rng: np.random.Generator) -> Parameter:
    """uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialization."""
    bound = float(np.sqrt(1.0 / max(fan_in, 1)))
    return Parameter(rng.uniform(-bound, bound, size=shape))


class Module:
    """Minimal layer container tracking parameters and submodules by attribute.

    Attribute insertion order gives every parameter a stable dotted name
    path, which the checkpoint format relies on.
    """

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, param in self._params.items():
            yield (f"{prefix}{name}", param)
        for name, module in self._modules.items():
            yield from module.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self) -> Iterator[Parameter]:
        for _, param in self.named_parameters():
            yield param

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.zero_grad()

    def train(self, mode: bool = True) -> "Module":
        object.__setattr__(self, "training", mode)
        for module in self._modules.values():
            module.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class ModuleList(Module):
    """Sequence of submodules registered under their list index."""

    def __init__(self, modules=()):
        super().__init__()
        self._items = []
        for module in modules:
            self.append(module)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


class Linear(Module):
    """Affine map x @ w + b over the trailing axis."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = uniform_init((in_features, out_features), in_features, rng)
        self.bias = uniform_init((out_features,), in_features, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise ShapeError(
                f"linear expects trailing extent {self.in_features}, got {x.shape}"
            )
        return ad.matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    """Zero-mean unit-variance over the trailing feature axis, then gain/bias."""

    EPS = 1e-5

    def __init__(self, features: int):
        super().__init__()
        if features < 1:
            raise ShapeError("layer norm needs a feature extent of at least 1")
        self.features = features
        self.gain = Parameter(np.ones(features))
        self.bias = Parameter(np.zeros(features))

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.features:
            raise ShapeError(
                f"layer norm expects trailing extent {self.features}, got {x.shape}"
            )
        centered = x - x.mean(axis=-1, keepdims=True)
        variance = (centered * centered).mean(axis=-1, keepdims=True)
        normed = centered / ad.sqrt(variance + self.EPS)
        return normed * self.gain + self.bias


class Dropout(Module):
    """Seeded inverted dropout; identity when the module is in eval mode."""

    def __init__(self, rate: float, rng: Optional[np.random.Generator] = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def forward(self, x: Tensor) -> Tensor:
        return ad.dropout(x, self.rate, self.rng, training=self.training)
