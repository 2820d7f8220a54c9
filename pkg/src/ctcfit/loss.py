"""Log-space forward-backward over the extended label lattice.

Computes the probability that the per-frame output distributions are mapped
to a given label sequence by the collapse map, the per-frame posterior used
as the fitting target (pseudo ground truth), the resulting loss, and its
gradient with respect to pre-softmax outputs.

Conventions: ``log_alpha[t, s]`` includes the emission at frame t, while
``log_beta[t, s]`` excludes it, so the total admissible-path mass through
lattice position (t, s) is exp(log_alpha + log_beta) with no division by a
possibly-zero emission probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

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

NEG_INF = float("-inf")


@dataclass(frozen=True)
class ForwardBackwardTables:
    """Forward/backward accumulators over the extended-label lattice.

    ``symbols`` is the extended label sequence the tables were built for.
    ``log_prob`` comes from the final forward column, ``log_prob_backward``
    from the initial backward column; the two agree up to rounding.
    Unreachable lattice entries hold -inf.
    """

    log_alpha: np.ndarray
    log_beta: np.ndarray
    symbols: np.ndarray
    log_prob: float
    log_prob_backward: float


@dataclass(frozen=True)
class LossResult:
    """Loss, per-frame fitting target, and gradient for one sequence.

    ``gradient`` is with respect to pre-softmax outputs; for the unmodified
    loss it equals ``probs - pseudo_gt`` with the target held constant, so
    its rows sum to zero.
    """

    log_prob: float
    loss: float
    pseudo_gt: np.ndarray
    gradient: np.ndarray


def _check_extended(symbols: np.ndarray) -> None:
    if symbols.ndim != 1 or symbols.size % 2 == 0:
        raise ValueError("extended label sequence must be 1-D with odd length")
    blank = symbols[0]
    if np.any(symbols[0::2] != blank):
        raise ValueError("even positions of the extended sequence must all be blank")
    if np.any(symbols[1::2] == blank):
        raise ValueError("odd positions of the extended sequence must be non-blank")


def forward_backward(probs, ext_symbols) -> ForwardBackwardTables:
    """Run the forward and backward recursions for one extended label sequence.

    Transitions follow the standard lattice rules: stay on the same position,
    advance by one, or skip a blank when moving between two distinct
    non-blank labels. All accumulation happens in log space, with exact -inf
    for zero-probability emissions.
    """
    y = validate_prob_matrix(probs)
    sym = np.asarray(ext_symbols, dtype=np.int64).reshape(-1)
    _check_extended(sym)
    T, num_classes = y.shape
    S = sym.size
    if sym.max(initial=0) >= num_classes:
        raise ValueError("extended label symbol out of range for the matrix width")

    needed = min_frames(sym[1::2])
    if T < needed:
        raise InfeasibleSequence(
            f"label sequence needs at least {needed} frames, got {T}"
        )

    with np.errstate(divide="ignore"):
        em = np.log(y[:, sym])  # (T, S) emission log-probabilities along the lattice

    # Skip transitions land only on a non-blank that differs from the label
    # two positions back; for even (blank) positions the symbols are equal,
    # so the same comparison rules them out.
    skip_ok = np.zeros(S, dtype=bool)
    skip_ok[2:] = sym[2:] != sym[:-2]

    shifted1 = np.empty(S)
    shifted2 = np.empty(S)

    log_alpha = np.full((T, S), NEG_INF)
    log_alpha[0, 0] = em[0, 0]
    if S > 1:
        log_alpha[0, 1] = em[0, 1]
    for t in range(1, T):
        prev = log_alpha[t - 1]
        shifted1[0] = NEG_INF
        shifted1[1:] = prev[:-1]
        shifted2[:2] = NEG_INF
        shifted2[2:] = np.where(skip_ok[2:], prev[:-2], NEG_INF)
        log_alpha[t] = np.logaddexp(np.logaddexp(prev, shifted1), shifted2) + em[t]

    if S > 1:
        log_prob = float(np.logaddexp(log_alpha[-1, -1], log_alpha[-1, -2]))
    else:
        log_prob = float(log_alpha[-1, -1])

    log_beta = np.full((T, S), NEG_INF)
    log_beta[-1, -1] = 0.0
    if S > 1:
        log_beta[-1, -2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = log_beta[t + 1] + em[t + 1]
        shifted1[-1] = NEG_INF
        shifted1[:-1] = nxt[1:]
        shifted2[-2:] = NEG_INF
        shifted2[:-2] = np.where(skip_ok[2:], nxt[2:], NEG_INF)
        log_beta[t] = np.logaddexp(np.logaddexp(nxt, shifted1), shifted2)

    if S > 1:
        log_prob_backward = float(
            np.logaddexp(em[0, 0] + log_beta[0, 0], em[0, 1] + log_beta[0, 1])
        )
    else:
        log_prob_backward = float(em[0, 0] + log_beta[0, 0])

    if log_prob == NEG_INF:
        raise ZeroProbability("every admissible path has probability zero")

    return ForwardBackwardTables(log_alpha, log_beta, sym, log_prob, log_prob_backward)


def posterior(probs, tables: ForwardBackwardTables) -> np.ndarray:
    """Per-frame class posterior given that the outputs map to the labels.

    Entry (t, k) is the probability that frame t carries class k conditioned
    on the collapse of the whole path equalling the label sequence. Classes
    outside the labels and blank are exactly zero. Rows are renormalized to
    cancel accumulated rounding; any larger drift is a numerical fault and
    raises.
    """
    y = np.asarray(probs, dtype=float)
    T, num_classes = y.shape
    la, lb, sym = tables.log_alpha, tables.log_beta, tables.symbols
    if la.shape != (T, sym.size):
        raise ValueError("tables do not match the probability matrix shape")

    occupancy = np.exp(la + lb - tables.log_prob)  # (T, S), entries in [0, 1]
    out = np.zeros((T, num_classes))
    for k in np.unique(sym):
        out[:, k] = occupancy[:, sym == k].sum(axis=1)

    row_sums = out.sum(axis=1)
    drift = np.abs(row_sums - 1.0).max()
    if drift > 1e-9:
        raise ArithmeticError(
            f"posterior rows drifted from 1 by {drift:.3e}; lattice numerics broke down"
        )
    return out / row_sums[:, None]


def loss_grad_from_probs(probs, labels, alphabet: Alphabet) -> LossResult:
    """Loss, fitting target, and gradient computed from an explicit ProbMatrix."""
    lab = validate_labels(labels, alphabet)
    tables = forward_backward(probs, extend_labels(lab, alphabet))
    pseudo_gt = posterior(probs, tables)
    y = np.asarray(probs, dtype=float)
    return LossResult(
        log_prob=tables.log_prob,
        loss=0.0 - tables.log_prob,  # 0.0 - 0.0 is +0.0, plain negation is not
        pseudo_gt=pseudo_gt,
        gradient=y - pseudo_gt,
    )


def ctc_loss_grad(logits, labels, alphabet: Alphabet) -> LossResult:
    """Softmax the logits, then compute loss, fitting target, and gradient.

    The fitting target is treated as a constant of the iteration, which makes
    the gradient exactly probs - pseudo_gt per frame.
    """
    return loss_grad_from_probs(softmax(logits), labels, alphabet)


def cross_entropy(target, probs) -> float:
    """Sum over frames of the cross entropy between target and output rows.

    Probabilities are floored at 1e-300 before the log; this is a monitoring
    quantity, not part of the lattice computation.
    """
    t = np.asarray(target, dtype=float)
    y = np.asarray(probs, dtype=float)
    if t.shape != y.shape:
        raise ValueError(f"shape mismatch: target {t.shape} vs probs {y.shape}")
    return float(-(t * np.log(np.maximum(y, 1e-300))).sum())


def best_path_decode(probs, alphabet: Alphabet) -> np.ndarray:
    """Collapse the frame-wise argmax path. Ties break toward the lowest class index."""
    y = validate_prob_matrix(probs)
    return collapse(np.argmax(y, axis=1), alphabet)
