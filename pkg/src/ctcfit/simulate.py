"""Gradient descent directly on an output matrix, for watching training unfold.

There is no network and no data: a seeded random logits matrix stands in for
the model output, and plain fixed-step gradient descent updates it under the
plain or modified loss. Snapshots record the output distributions, the
fitting target actually used, the loss, and summary metrics that expose the
blank-suppression and peaking behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import Alphabet, ZeroProbability, min_frames, softmax, validate_labels
from .mods import ModConfig, frame_weights, modified_loss_grad


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run; equal configs give equal runs.

    The numeric defaults are tuned so a run shows the whole arc within a few
    hundred iterations: near-uniform start, blank suppression, then spike
    formation. Larger init_stddev values hand each label a random head start
    that lets wide bands, not spikes, win.
    """

    frames: int
    labels: tuple[int, ...]
    alphabet: Alphabet
    init_seed: int = 0
    init_stddev: float = 0.1
    learning_rate: float = 0.5
    iterations: int = 200
    snapshot_every: int = 2
    mods: ModConfig = field(default_factory=ModConfig)

    def __post_init__(self) -> None:
        validate_labels(self.labels, self.alphabet)
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if self.init_stddev < 0.0:
            raise ValueError(f"init_stddev must be >= 0, got {self.init_stddev}")
        needed = min_frames(self.labels)
        if self.frames < needed:
            raise ValueError(
                f"labels need at least {needed} frames, config has {self.frames}"
            )


@dataclass(frozen=True)
class SimSnapshot:
    """State entering one iteration: distributions, target, loss, and metrics.

    ``nonblank_mass_fraction`` is the share of output mass on non-blank
    classes; ``blank_argmax_fraction`` is the share of frames whose argmax is
    blank; ``max_frame_weight`` is the largest per-frame target-minus-output
    gap. All three are pure functions of (probs, pseudo_gt).
    """

    iteration: int
    probs: np.ndarray
    pseudo_gt: np.ndarray
    loss: float
    nonblank_mass_fraction: float
    blank_argmax_fraction: float
    max_frame_weight: float


@dataclass(frozen=True)
class SimTrajectory:
    """Recorded snapshots of one run, plus the suppression-to-peaking marker.

    ``phase_boundary`` is the iteration of the first recorded snapshot where
    the non-blank mass fraction bottoms out before rising again, or None when
    no later snapshot rises above the minimum.
    """

    config: SimConfig
    snapshots: tuple[SimSnapshot, ...]
    phase_boundary: int | None


def init_state(config: SimConfig) -> np.ndarray:
    """Seeded Gaussian logits matrix; stddev 0 gives uniform distributions."""
    rng = np.random.default_rng(config.init_seed)
    return rng.normal(0.0, config.init_stddev, (config.frames, config.alphabet.num_classes))


def _snapshot_metrics(probs: np.ndarray, pseudo_gt: np.ndarray, blank: int) -> tuple[float, float, float]:
    nonblank_mass = 1.0 - float(probs[:, blank].sum()) / probs.shape[0]
    blank_argmax = float(np.count_nonzero(np.argmax(probs, axis=1) == blank)) / probs.shape[0]
    max_weight = float(frame_weights(pseudo_gt, probs).raw.max())
    return nonblank_mass, blank_argmax, max_weight


def step(state: np.ndarray, config: SimConfig, iteration: int = 0) -> tuple[np.ndarray, SimSnapshot]:
    """One descent update; the snapshot describes the state before the update."""
    mods = replace(config.mods, rescale_scope="per_sequence")
    result = modified_loss_grad([(state, config.labels)], mods, config.alphabet)[0]
    probs = softmax(state)
    nonblank_mass, blank_argmax, max_weight = _snapshot_metrics(
        probs, result.pseudo_gt, config.alphabet.blank_index
    )
    snapshot = SimSnapshot(
        iteration=iteration,
        probs=probs,
        pseudo_gt=result.pseudo_gt,
        loss=result.loss,
        nonblank_mass_fraction=nonblank_mass,
        blank_argmax_fraction=blank_argmax,
        max_frame_weight=max_weight,
    )
    return state - config.learning_rate * result.gradient, snapshot


def _phase_boundary(snapshots: tuple[SimSnapshot, ...]) -> int | None:
    fractions = [s.nonblank_mass_fraction for s in snapshots]
    if len(fractions) < 2:
        return None
    low = int(np.argmin(fractions))
    if low == len(fractions) - 1 or max(fractions[low + 1 :]) <= fractions[low]:
        return None
    return snapshots[low].iteration


def run(config: SimConfig) -> SimTrajectory:
    """Run the configured number of iterations, recording periodic snapshots.

    Snapshots land every ``snapshot_every`` iterations plus the final one. A
    zero sequence probability aborts with the failing iteration attached.
    """
    state = init_state(config)
    snapshots: list[SimSnapshot] = []
    for iteration in range(1, config.iterations + 1):
        try:
            state, snapshot = step(state, config, iteration)
        except ZeroProbability as exc:
            abort = ZeroProbability(f"iteration {iteration}: {exc}")
            abort.iteration = iteration
            abort.partial_snapshots = tuple(snapshots)
            raise abort from exc
        if iteration % config.snapshot_every == 0 or iteration == config.iterations:
            snapshots.append(snapshot)
    recorded = tuple(snapshots)
    return SimTrajectory(config=config, snapshots=recorded, phase_boundary=_phase_boundary(recorded))
