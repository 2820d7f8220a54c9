"""Frame-level analysis toolkit for CTC-style sequence training.

The lattice code computes the probability that per-frame output
distributions collapse to a target label sequence, the per-frame posterior
used as a fitting target, and the matching gradient. On top of that sit the
proportion (alpha) and key-frame (gamma) gradient modifications, an
enumeration oracle for verifying the numerics, and a descent simulator for
visualizing how outputs evolve.
"""

from .core import (
    Alphabet,
    InfeasibleSequence,
    ZeroProbability,
    collapse,
    extend_labels,
    min_frames,
    softmax,
    validate_labels,
    validate_prob_matrix,
)
from .loss import (
    ForwardBackwardTables,
    LossResult,
    best_path_decode,
    cross_entropy,
    ctc_loss_grad,
    forward_backward,
    loss_grad_from_probs,
    posterior,
)
from .mods import (
    DegenerateProportion,
    FrameWeights,
    ModConfig,
    RescaleStats,
    alpha_rescale,
    frame_weights,
    gamma_reweight,
    modified_loss_grad,
    rescale_stats,
)
from .oracle import MAX_PATHS, TooLarge, brute_posterior, brute_prob, fd_gradient, iter_paths
from .simulate import SimConfig, SimSnapshot, SimTrajectory, init_state, run, step

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "DegenerateProportion",
    "ForwardBackwardTables",
    "FrameWeights",
    "InfeasibleSequence",
    "LossResult",
    "MAX_PATHS",
    "ModConfig",
    "RescaleStats",
    "SimConfig",
    "SimSnapshot",
    "SimTrajectory",
    "TooLarge",
    "ZeroProbability",
    "alpha_rescale",
    "best_path_decode",
    "brute_posterior",
    "brute_prob",
    "collapse",
    "cross_entropy",
    "ctc_loss_grad",
    "extend_labels",
    "fd_gradient",
    "forward_backward",
    "frame_weights",
    "gamma_reweight",
    "init_state",
    "iter_paths",
    "loss_grad_from_probs",
    "min_frames",
    "modified_loss_grad",
    "posterior",
    "rescale_stats",
    "run",
    "softmax",
    "step",
    "validate_labels",
    "validate_prob_matrix",
    "__version__",
]
