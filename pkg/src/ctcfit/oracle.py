"""Exhaustive path enumeration used as the reference for the lattice results.

Everything here works directly from the definitions: enumerate all C^T paths,
multiply per-frame probabilities, and sum over the paths that collapse to the
label sequence. Deliberately independent of the forward-backward code so the
two can check each other. Only usable at small sizes.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .core import Alphabet, ZeroProbability, softmax, validate_labels, validate_prob_matrix

MAX_PATHS = 10_000_000
_CHUNK = 1 << 16


class TooLarge(ValueError):
    """The instance exceeds the enumeration guard of MAX_PATHS paths."""


def iter_paths(probs, chunk_size: int = _CHUNK) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (paths, probabilities) blocks covering all C^T paths exactly once.

    Paths are decoded from consecutive integers in base C, most significant
    digit first, so the enumeration order is deterministic.
    """
    y = validate_prob_matrix(probs)
    T, num_classes = y.shape
    total = num_classes**T
    if total > MAX_PATHS:
        raise TooLarge(f"{num_classes}^{T} = {total} paths exceeds guard {MAX_PATHS}")
    place = num_classes ** np.arange(T - 1, -1, -1, dtype=np.int64)
    frame_idx = np.arange(T)
    for start in range(0, total, chunk_size):
        ids = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
        paths = (ids[:, None] // place[None, :]) % num_classes
        prob = y[frame_idx, paths].prod(axis=1)
        yield paths, prob


def _admissible_mask(paths: np.ndarray, labels: np.ndarray, blank: int) -> np.ndarray:
    """True where a path collapses (merge runs, drop blanks) to ``labels``."""
    first_of_run = np.ones(paths.shape, dtype=bool)
    first_of_run[:, 1:] = paths[:, 1:] != paths[:, :-1]
    kept = first_of_run & (paths != blank)
    ok = kept.sum(axis=1) == labels.size
    if labels.size:
        position = kept.cumsum(axis=1) - 1
        expected = labels[np.clip(position, 0, labels.size - 1)]
        ok &= np.where(kept, paths == expected, True).all(axis=1)
    return ok


def brute_prob(probs, labels, alphabet: Alphabet) -> float:
    """Probability of the label sequence by direct summation over all paths."""
    lab = validate_labels(labels, alphabet)
    total = 0.0
    for paths, prob in iter_paths(probs):
        total += float(prob[_admissible_mask(paths, lab, alphabet.blank_index)].sum())
    return total


def brute_posterior(probs, labels, alphabet: Alphabet) -> np.ndarray:
    """Per-frame class posterior by direct summation over admissible paths."""
    y = validate_prob_matrix(probs)
    lab = validate_labels(labels, alphabet)
    T, num_classes = y.shape
    numerator = np.zeros((T, num_classes))
    total = 0.0
    for paths, prob in iter_paths(probs):
        mask = _admissible_mask(paths, lab, alphabet.blank_index)
        weights = prob[mask]
        chosen = paths[mask]
        total += float(weights.sum())
        for t in range(T):
            np.add.at(numerator[t], chosen[:, t], weights)
    if total == 0.0:
        raise ZeroProbability("no admissible path has positive probability")
    return numerator / total


def fd_gradient(logits, labels, alphabet: Alphabet, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of -ln(label probability) per logit.

    Uses the enumeration probability, not the lattice, so it is an
    independent check of the analytic gradient.
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError(f"step must lie in [1e-7, 1e-3], got {step}")
    base = np.asarray(logits, dtype=float)
    lab = validate_labels(labels, alphabet)

    def objective(values: np.ndarray) -> float:
        p = brute_prob(softmax(values), lab, alphabet)
        if p == 0.0:
            raise ZeroProbability("no admissible path has positive probability")
        return -float(np.log(p))

    grad = np.empty_like(base)
    for t, k in np.ndindex(base.shape):
        bumped = base.copy()
        bumped[t, k] = base[t, k] + step
        upper = objective(bumped)
        bumped[t, k] = base[t, k] - step
        lower = objective(bumped)
        grad[t, k] = (upper - lower) / (2.0 * step)
    return grad
