"""Connectionist temporal classification: exact marginalization over
alignment paths, the training losses, greedy decoding, and a brute-force
enumeration oracle for small instances.

Lattice convention: a (U, vocab+1) array of log-probabilities, one row per
clip position, column 0 the blank symbol and column g+1 the gloss id g.
Alignment paths use the same column symbols; the collapse map merges
consecutive repeats and then deletes blanks.
"""

from __future__ import annotations

import itertools
import warnings
from typing import Sequence, Union

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

BLANK = 0

BRUTE_FORCE_LIMIT = 10 ** 6


class LatticeError(ValueError):
    """Lattice rows are not valid log-distributions or shapes disagree."""


def validate_lattice(lattice: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    arr = np.asarray(lattice, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise LatticeError(f"lattice needs shape (U, vocab+1), got {arr.shape}")
    rowsum = np.log(np.exp(arr - arr.max(axis=1, keepdims=True)).sum(axis=1)) \
        + arr.max(axis=1)
    if np.abs(rowsum).max() > tol:
        raise LatticeError(
            f"lattice rows must log-sum-exp to 0 (worst deviation {np.abs(rowsum).max():.3g})"
        )
    return arr


def collapse(path: Sequence[int]) -> tuple:
    """Merge consecutive duplicates, then remove blanks; returns gloss ids."""
    out = []
    previous = None
    for symbol in path:
        if symbol != previous and symbol != BLANK:
            out.append(int(symbol) - 1)
        previous = symbol
    return tuple(out)


def _adjacent_repeats(target: Sequence[int]) -> int:
    return sum(1 for a, b in zip(target, target[1:]) if a == b)


def ctc_feasible(target: Sequence[int], frames: int) -> bool:
    """A path of ``frames`` symbols can collapse to ``target`` iff the frames
    cover every gloss plus one separating blank per adjacent repeat."""
    return frames >= len(target) + _adjacent_repeats(target)


def extended_target(target: Sequence[int]) -> tuple:
    """Blank-interleaved label columns and the skip-transition mask."""
    columns = [BLANK]
    for gloss in target:
        columns.append(gloss + 1)
        columns.append(BLANK)
    columns = np.asarray(columns, dtype=np.intp)
    skip = np.zeros(len(columns), dtype=bool)
    for s in range(2, len(columns)):
        skip[s] = columns[s] != BLANK and columns[s] != columns[s - 2]
    return columns, skip


def _check_target(target: Sequence[int], vocab: int) -> None:
    bad = [g for g in target if not 0 <= g < vocab]
    if bad:
        raise ValueError(f"gloss ids {bad} outside vocabulary of size {vocab}")


def _recursion_step(alpha: Tensor, row: Tensor, skip_log: np.ndarray) -> Tensor:
    """One forward-recursion step, fused into a single graph node:
    out[s] = row[s] + logsumexp(alpha[s], alpha[s-1], alpha[s-2] + skip_log[s]).
    """
    s = alpha.shape[0]
    branches = [alpha.data, np.concatenate(([-np.inf], alpha.data[:-1]))]
    if s > 2:
        branches.append(
            np.concatenate(([-np.inf, -np.inf], alpha.data[:-2])) + skip_log[:s])
    stacked = np.stack(branches)
    peak = stacked.max(axis=0)
    peak_safe = np.where(np.isfinite(peak), peak, 0.0)
    sumexp = np.exp(stacked - peak_safe).sum(axis=0)
    with np.errstate(divide="ignore"):
        merged = np.where(sumexp > 0.0, peak_safe + np.log(sumexp), -np.inf)
    out_data = row.data + merged

    def backward(g):
        if row.requires_grad:
            row._accumulate(g)
        if alpha.requires_grad:
            merged_safe = np.where(np.isfinite(merged), merged, 0.0)
            weights = np.where(np.isfinite(stacked),
                               np.exp(stacked - merged_safe), 0.0)
            weights = np.where(np.isfinite(merged), weights, 0.0)
            ga = g * weights[0]
            ga[:-1] += (g * weights[1])[1:]
            if s > 2:
                ga[:-2] += (g * weights[2])[2:]
            alpha._accumulate(ga)

    return Tensor._from_op(out_data, (alpha, row), backward)


def ctc_log_prob(lattice: Tensor, target: Sequence[int]) -> Tensor:
    """log p(target | lattice), marginalized over all collapsing paths.

    Runs the forward recursion over the blank-interleaved target in log
    space. An infeasible target gets exactly -inf (probability zero), which
    is distinct from any finite underflowed value.
    """
    if not isinstance(lattice, Tensor):
        lattice = Tensor(lattice)
    frames, width = lattice.shape
    _check_target(target, width - 1)
    target = tuple(target)
    if not ctc_feasible(target, frames):
        return Tensor(-np.inf)
    columns, skip = extended_target(target)
    s = len(columns)
    scores = ad.take(lattice, columns, axis=1)  # (U, S)

    start = np.full(s, -np.inf)
    start[0] = 0.0
    if s > 1:
        start[1] = 0.0
    alpha = scores[0] + Tensor(start)
    skip_log = np.where(skip, 0.0, -np.inf)
    for t in range(1, frames):
        alpha = _recursion_step(alpha, scores[t], skip_log)
    tail = alpha[s - 2:] if s > 1 else alpha
    return ad.logsumexp(tail, axis=0)


def ctc_loss(lattice: Tensor, target: Sequence[int],
             variant: str = "nll") -> Tensor:
    """Training loss from the marginal target probability.

    ``nll`` is -log p (the default; stays informative when p underflows);
    ``paper`` is 1 - p. Both are differentiable through the recursion and
    order samples identically.
    """
    if variant not in ("nll", "paper"):
        raise ValueError(f"unknown ctc loss variant {variant!r}")
    frames = lattice.shape[0] if isinstance(lattice, Tensor) else len(lattice)
    if not ctc_feasible(tuple(target), frames):
        warnings.warn(
            f"target of length {len(target)} with {_adjacent_repeats(tuple(target))} "
            f"adjacent repeats is infeasible for {frames} clips",
            stacklevel=2,
        )
    log_prob = ctc_log_prob(lattice, target)
    if variant == "paper":
        return 1.0 - ad.exp(log_prob)
    return -log_prob


def brute_force_prob(lattice: Union[np.ndarray, Tensor],
                     target: Sequence[int]) -> float:
    """Total probability of ``target`` by enumerating every alignment path."""
    arr = lattice.data if isinstance(lattice, Tensor) else np.asarray(lattice)
    frames, width = arr.shape
    if width ** frames > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"{width}^{frames} paths exceed the enumeration limit {BRUTE_FORCE_LIMIT}"
        )
    target = tuple(target)
    total = 0.0
    for path in itertools.product(range(width), repeat=frames):
        if collapse(path) == target:
            total += float(np.exp(sum(arr[t, sym] for t, sym in enumerate(path))))
    return total


def best_path_decode(lattice: Union[np.ndarray, Tensor]) -> tuple:
    """Greedy decoding: per-position argmax (ties to the lower index, so to
    blank first), then collapse."""
    arr = lattice.data if isinstance(lattice, Tensor) else np.asarray(lattice)
    return collapse(np.argmax(arr, axis=1))
