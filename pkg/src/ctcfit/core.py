"""Shared primitives for frame-level sequence labeling with a blank class.

Labels are plain integer class indices; character alphabets are a CLI-level
concern. A label sequence never contains the blank. A path assigns one class
per frame and may contain blanks and repeats; the collapse map merges runs of
identical symbols and then drops blanks, turning a path into a label sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InfeasibleSequence(ValueError):
    """The label sequence cannot be produced by any path of the given length."""


class ZeroProbability(ArithmeticError):
    """Every path consistent with the label sequence has probability zero."""


@dataclass(frozen=True)
class Alphabet:
    """Class index space of size ``num_classes``, one index reserved for blank."""

    num_classes: int
    blank_index: int = 0

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if not 0 <= self.blank_index < self.num_classes:
            raise ValueError(
                f"blank_index {self.blank_index} out of range for "
                f"{self.num_classes} classes"
            )


def validate_labels(labels, alphabet: Alphabet) -> np.ndarray:
    """Return ``labels`` as a 1-D int64 array, rejecting blanks and bad indices."""
    arr = np.asarray(labels, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= alphabet.num_classes):
        raise ValueError("label index out of range for the alphabet")
    if np.any(arr == alphabet.blank_index):
        raise ValueError("label sequences must not contain the blank class")
    return arr


def validate_prob_matrix(probs, tol: float = 1e-9) -> np.ndarray:
    """Return ``probs`` as a float T x C array with non-negative rows summing to 1."""
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ValueError(f"expected a T x C matrix with T >= 1, C >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ValueError("probabilities must be finite and non-negative")
    worst = np.abs(arr.sum(axis=1) - 1.0).max()
    if worst > tol:
        raise ValueError(f"probability rows must sum to 1, worst deviation {worst:.3e}")
    return arr


def softmax(logits) -> np.ndarray:
    """Row-wise softmax of a T x C logits matrix.

    Stabilized by subtracting each row's maximum before exponentiation, so any
    finite input (tested across [-700, 700]) yields rows summing to 1.
    """
    arr = np.asarray(logits, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 2:
        raise ValueError(f"expected a T x C matrix with T >= 1, C >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("logits must be finite")
    shifted = arr - arr.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def collapse(path, alphabet: Alphabet) -> np.ndarray:
    """Map a path to its label sequence: merge runs first, then remove blanks."""
    arr = np.asarray(path, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= alphabet.num_classes):
        raise ValueError("path symbol out of range for the alphabet")
    if arr.size == 0:
        return arr
    first_of_run = np.ones(arr.size, dtype=bool)
    first_of_run[1:] = arr[1:] != arr[:-1]
    return arr[first_of_run & (arr != alphabet.blank_index)]


def extend_labels(labels, alphabet: Alphabet) -> np.ndarray:
    """Interleave blanks around and between the labels: length 2U+1, blanks at even slots."""
    arr = validate_labels(labels, alphabet)
    out = np.full(2 * arr.size + 1, alphabet.blank_index, dtype=np.int64)
    out[1::2] = arr
    return out


def min_frames(labels) -> int:
    """Shortest path length that can collapse to ``labels``.

    Each adjacent pair of equal labels forces one separating blank, so the
    minimum is U plus the number of such pairs.
    """
    arr = np.asarray(labels, dtype=np.int64).reshape(-1)
    if arr.size == 0:
        return 0
    return int(arr.size + np.count_nonzero(arr[1:] == arr[:-1]))
