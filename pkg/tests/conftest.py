import numpy as np
import pytest

from cslr.autodiff import Tensor
from cslr.graph import JointLayout, default_layout
from cslr.synth import SynthConfig, synth_generate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def body52():
    return default_layout()


@pytest.fixture
def path3():
    """Three joints in a chain: 0 - 1 - 2."""
    return JointLayout(3, ((0, 1), (1, 2)),
                       groups={"body": (0, 1, 2)},
                       anchors={"neck": 0, "nose": 1})


@pytest.fixture(scope="session")
def tiny_dataset(body52):
    """Ten short synthetic sentences over a 5-gloss vocabulary."""
    config = SynthConfig(vocab_size=5, sentence_length_range=(2, 4),
                         image_size=32)
    xs, ys = [], []
    for index in range(10):
        skeleton, rgb, gloss = synth_generate(config, 7, index, layout=body52)
        xs.append((skeleton, rgb))
        ys.append(gloss)
    return xs, ys


def random_connected_layout(rng, joints):
    """Random spanning tree plus a few extra edges; always connected."""
    edges = set()
    order = rng.permutation(joints)
    for a, b in zip(order[:-1], order[1:]):
        edges.add((min(a, b), max(a, b)))
    for _ in range(int(rng.integers(0, joints))):
        a, b = rng.choice(joints, size=2, replace=False)
        edges.add((min(a, b), max(a, b)))
    return JointLayout(joints, tuple((int(a), int(b)) for a, b in sorted(edges)))


def random_log_lattice(rng, frames, width, sharpness=2.0):
    """Random valid log-probability rows."""
    logits = rng.normal(size=(frames, width)) * sharpness
    peak = logits.max(axis=1, keepdims=True)
    return logits - peak - np.log(np.exp(logits - peak).sum(axis=1, keepdims=True))


def central_difference(func, array, coords, h=1e-5):
    """Central finite differences of a scalar function at chosen coordinates."""
    out = {}
    for index in coords:
        original = array[index]
        array[index] = original + h
        plus = func()
        array[index] = original - h
        minus = func()
        array[index] = original
        out[index] = (plus - minus) / (2.0 * h)
    return out


def relative_error(analytic, numeric):
    scale = max(abs(analytic), abs(numeric), 1e-8)
    return abs(analytic - numeric) / scale


def check_gradients(make_loss, params, rng, coords_per_param=5, h=1e-5,
                    tol=1e-4):
    """Analytic grads of a scalar Tensor loss vs central differences.

    ``make_loss`` rebuilds the loss from current parameter values; ``params``
    is a list of Tensors with requires_grad set.
    """
    loss = make_loss()
    for p in params:
        p.zero_grad()
    loss.backward()
    grads = [p.grad.copy() for p in params]
    worst = 0.0
    for p, grad in zip(params, grads):
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        count = min(coords_per_param, flat.size)
        picks = rng.choice(flat.size, size=count, replace=False)
        numeric = central_difference(
            lambda: float(make_loss().data), flat, [int(i) for i in picks], h=h)
        for i, value in numeric.items():
            worst = max(worst, relative_error(gflat[i], value))
    return worst
