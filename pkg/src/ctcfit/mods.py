"""Modifications of the per-frame fitting target and gradient.

Two knobs, usable separately or together:

* ``alpha`` pins the share of fitting-target mass assigned to non-blank
  classes. Per class, the target column is scaled so unnormalized non-blank
  mass is exactly alpha of the total, then each row is renormalized back to
  a distribution.
* ``gamma`` emphasizes frames whose fitting target sits far above the current
  output (key frames) by raising the per-frame weight to the gamma power and
  rescaling the gradient rows; factors are mean-normalized so gamma = 0 is an
  exact identity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import Alphabet, softmax, validate_labels
from .loss import LossResult, loss_grad_from_probs


class DegenerateProportion(ValueError):
    """Proportion rescaling is undefined when there are no non-blank labels."""


@dataclass(frozen=True)
class ModConfig:
    """Which modifications to apply, and at what scope.

    ``alpha`` in (0, 1) targets the non-blank mass proportion; ``gamma`` >= 0
    is the frame reweighting exponent; either may be None to disable it.
    ``rescale_scope`` chooses whether proportion statistics are pooled over
    the whole batch or computed per sequence.
    """

    alpha: float | None = None
    gamma: float | None = None
    rescale_scope: str = "per_batch"

    def __post_init__(self) -> None:
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.gamma is not None and self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.rescale_scope not in ("per_sequence", "per_batch"):
            raise ValueError(f"unknown rescale_scope {self.rescale_scope!r}")


@dataclass(frozen=True)
class RescaleStats:
    """Per-class mass totals and target counts feeding the proportion rescale.

    ``totals[k]`` is the fitting-target mass currently assigned to class k
    summed over frames; ``target_counts[k]`` is how many times k occurs in
    the label sequence (for blank: the label sequence length, kept only as a
    diagnostic).
    """

    totals: np.ndarray
    target_counts: np.ndarray


@dataclass(frozen=True)
class FrameWeights:
    """Per-frame emphasis weights: the largest target-minus-output gap.

    Both rows being distributions makes the gap maximum non-negative.
    ``normalized`` rescales raw weights to mean 1 (all zeros stay zeros).
    """

    raw: np.ndarray
    normalized: np.ndarray


def rescale_stats(pseudo_gt, labels, alphabet: Alphabet) -> RescaleStats:
    """Collect per-class mass totals and occurrence counts for one sequence."""
    target = np.asarray(pseudo_gt, dtype=float)
    lab = validate_labels(labels, alphabet)
    counts = np.bincount(lab, minlength=alphabet.num_classes).astype(np.int64)
    counts[alphabet.blank_index] = lab.size
    return RescaleStats(totals=target.sum(axis=0), target_counts=counts)


def _scale_factors(stats: RescaleStats, alpha: float, alphabet: Alphabet) -> np.ndarray:
    blank = alphabet.blank_index
    nonblank_count = int(stats.target_counts.sum() - stats.target_counts[blank])
    if nonblank_count == 0:
        raise DegenerateProportion(
            "no non-blank labels; disable alpha rescaling for empty sequences"
        )
    factors = np.ones(alphabet.num_classes)
    scalable = (stats.totals > 0.0) & (np.arange(alphabet.num_classes) != blank)
    factors[scalable] = alpha * stats.target_counts[scalable] / stats.totals[scalable]
    if stats.totals[blank] > 0.0:
        factors[blank] = (1.0 - alpha) * nonblank_count / stats.totals[blank]
    return factors


def alpha_rescale(pseudo_gt, stats: RescaleStats, alpha: float, alphabet: Alphabet) -> np.ndarray:
    """Rescale the fitting target so non-blank mass totals alpha of the whole.

    The unnormalized scaled matrix hits the alpha proportion exactly; the row
    renormalization that restores per-frame distributions makes the final
    proportion only approximate. Classes carrying no mass are untouched.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    target = np.asarray(pseudo_gt, dtype=float)
    scaled = target * _scale_factors(stats, alpha, alphabet)[None, :]
    return scaled / scaled.sum(axis=1, keepdims=True)


def frame_weights(pseudo_gt, probs) -> FrameWeights:
    """Largest per-frame excess of the fitting target over the output."""
    gap = np.asarray(pseudo_gt, dtype=float) - np.asarray(probs, dtype=float)
    # Row sums of both matrices are 1, so the max gap is >= 0 up to rounding;
    # clamp so fractional gamma powers stay real.
    raw = np.maximum(gap.max(axis=1), 0.0)
    mean = raw.mean()
    normalized = raw / mean if mean > 0.0 else np.zeros_like(raw)
    return FrameWeights(raw=raw, normalized=normalized)


def gamma_reweight(gradient, weights: FrameWeights, gamma: float) -> np.ndarray:
    """Scale gradient rows by mean-normalized weights raised to gamma.

    gamma = 0 returns the gradient unchanged (0^0 counts as 1 here). If every
    weight is zero the target equals the output, the gradient is identically
    zero, and it is returned unchanged as well.
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    grad = np.asarray(gradient, dtype=float)
    if gamma == 0.0:
        return grad.copy()
    factors = weights.raw**gamma
    mean = factors.mean()
    if mean == 0.0:
        return grad.copy()
    return grad * (factors / mean)[:, None]


def modified_loss_grad(batch, config: ModConfig, alphabet: Alphabet) -> list[LossResult]:
    """Loss results for a batch of (logits, labels) pairs under the configured mods.

    Order of application: alpha rescaling first (gradients recomputed against
    the rescaled target), then gamma reweighting with weights taken from the
    target actually being fitted. With neither knob set this reduces to the
    plain per-item computation.
    """
    items = list(batch)
    if not items:
        raise ValueError("batch must contain at least one item")

    probs: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    results: list[LossResult] = []
    for index, (logits, item_labels) in enumerate(items):
        try:
            lab = validate_labels(item_labels, alphabet)
            y = softmax(logits)
            results.append(loss_grad_from_probs(y, lab, alphabet))
        except (ValueError, ArithmeticError) as exc:
            raise type(exc)(f"batch item {index}: {exc}") from exc
        probs.append(y)
        labels.append(lab)

    if config.alpha is not None:
        if config.rescale_scope == "per_batch":
            stats_list = [rescale_stats(r.pseudo_gt, lab, alphabet) for r, lab in zip(results, labels)]
            pooled = RescaleStats(
                totals=np.sum([s.totals for s in stats_list], axis=0),
                target_counts=np.sum([s.target_counts for s in stats_list], axis=0),
            )
            stats_per_item: list[RescaleStats] = [pooled] * len(items)
        else:
            stats_per_item = [rescale_stats(r.pseudo_gt, lab, alphabet) for r, lab in zip(results, labels)]
        for index, (result, stats) in enumerate(zip(results, stats_per_item)):
            try:
                rescaled = alpha_rescale(result.pseudo_gt, stats, config.alpha, alphabet)
            except DegenerateProportion as exc:
                raise DegenerateProportion(f"batch item {index}: {exc}") from exc
            results[index] = replace(
                result, pseudo_gt=rescaled, gradient=probs[index] - rescaled
            )

    if config.gamma is not None:
        for index, result in enumerate(results):
            weights = frame_weights(result.pseudo_gt, probs[index])
            results[index] = replace(
                result, gradient=gamma_reweight(result.gradient, weights, config.gamma)
            )

    return results
