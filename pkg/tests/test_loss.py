import numpy as np
import pytest

from ctcfit import (
    Alphabet,
    InfeasibleSequence,
    ZeroProbability,
    best_path_decode,
    cross_entropy,
    ctc_loss_grad,
    extend_labels,
    forward_backward,
    loss_grad_from_probs,
    posterior,
    softmax,
)

AB2 = Alphabet(2, 0)  # -, a
AB3 = Alphabet(3, 0)  # -, a, b


def fig3c_probs():
    """Seven frames: blanks everywhere except a plateau of 'a' in the middle."""
    y = np.zeros((7, 2))
    y[:, 0] = 1.0
    y[2] = [0.5, 0.5]
    y[3] = [0.0, 1.0]
    y[4] = [0.5, 0.5]
    return y


def test_single_frame_single_label():
    probs = np.array([[0.7, 0.3]])
    tables = forward_backward(probs, extend_labels([1], AB2))
    assert tables.log_prob == pytest.approx(np.log(0.3), abs=1e-12)
    post = posterior(probs, tables)
    np.testing.assert_allclose(post, [[0.0, 1.0]], atol=1e-15)


def test_two_frame_uniform_probability():
    probs = np.full((2, 2), 0.5)
    tables = forward_backward(probs, extend_labels([1], AB2))
    assert tables.log_prob == pytest.approx(np.log(0.75), abs=1e-12)
    post = posterior(probs, tables)
    np.testing.assert_allclose(post, [[1 / 3, 2 / 3], [1 / 3, 2 / 3]], atol=1e-12)


def test_plateau_construction_is_a_fixed_point():
    probs = fig3c_probs()
    tables = forward_backward(probs, extend_labels([1], AB2))
    assert abs(tables.log_prob) <= 1e-12  # probability exactly 1
    post = posterior(probs, tables)
    np.testing.assert_allclose(post, probs, atol=1e-12)
    result = loss_grad_from_probs(probs, [1], AB2)
    assert abs(result.loss) <= 1e-12
    assert np.abs(result.gradient).max() <= 1e-12


def test_forward_backward_agreement_random():
    rng = np.random.default_rng(11)
    for _ in range(50):
        num_classes = int(rng.integers(2, 5))
        ab = Alphabet(num_classes, 0)
        labels = rng.integers(1, num_classes, size=rng.integers(0, 4))
        frames = int(rng.integers(max(1, 2 * labels.size), 9))
        if frames < max(1, labels.size):
            continue
        probs = rng.random((frames, num_classes))
        probs /= probs.sum(axis=1, keepdims=True)
        try:
            tables = forward_backward(probs, extend_labels(labels, ab))
        except InfeasibleSequence:
            continue
        assert tables.log_prob == pytest.approx(tables.log_prob_backward, abs=1e-9)


def test_unreachable_lattice_entries_are_neg_inf():
    probs = np.full((2, 2), 0.5)
    tables = forward_backward(probs, extend_labels([1], AB2))
    # at t=0 only the first two lattice positions are reachable going forward,
    # and at the last frame only the final two can still finish going backward
    assert tables.log_alpha[0, 2] == -np.inf
    assert tables.log_beta[-1, 0] == -np.inf
    assert np.all(np.isfinite(tables.log_alpha[0, :2]))
    assert np.all(tables.log_beta[-1, 1:] == 0.0)


def test_posterior_rows_and_support():
    rng = np.random.default_rng(3)
    ab = Alphabet(5, 0)
    labels = [2, 4]
    probs = rng.random((7, 5))
    probs /= probs.sum(axis=1, keepdims=True)
    result = loss_grad_from_probs(probs, labels, ab)
    post = result.pseudo_gt
    np.testing.assert_allclose(post.sum(axis=1), np.ones(7), atol=1e-9)
    # classes outside labels + blank carry exactly zero mass
    assert np.all(post[:, 1] == 0.0)
    assert np.all(post[:, 3] == 0.0)
    # every label must be visited at least as often as it occurs
    for k in set(labels):
        assert post[:, k].sum() >= labels.count(k) - 1e-9


def test_gradient_identity_and_row_sums():
    rng = np.random.default_rng(5)
    logits = rng.normal(0, 1, (6, 3))
    result = ctc_loss_grad(logits, [1, 2], AB3)
    probs = softmax(logits)
    np.testing.assert_allclose(result.gradient, probs - result.pseudo_gt, atol=1e-12)
    np.testing.assert_allclose(result.gradient.sum(axis=1), np.zeros(6), atol=1e-9)
    assert result.loss >= 0.0
    assert result.loss == pytest.approx(-result.log_prob)


def test_uniform_gradient_values():
    result = ctc_loss_grad(np.zeros((2, 2)), [1], AB2)
    assert result.loss == pytest.approx(-np.log(0.75), abs=1e-12)
    np.testing.assert_allclose(result.gradient, [[1 / 6, -1 / 6], [1 / 6, -1 / 6]], atol=1e-12)


def test_single_frame_gradient_is_one_hot_residual():
    rng = np.random.default_rng(9)
    logits = rng.normal(0, 2, (1, 2))
    result = ctc_loss_grad(logits, [1], AB2)
    y = softmax(logits)
    np.testing.assert_allclose(result.gradient, [[y[0, 0], y[0, 1] - 1.0]], atol=1e-12)


def test_infeasible_sequence_raises():
    probs = np.full((3, 3), 1 / 3)
    with pytest.raises(InfeasibleSequence):
        forward_backward(probs, extend_labels([1, 1, 2], AB3))  # needs 4 frames


def test_zero_probability_raises():
    probs = np.array([[1.0, 0.0]])
    with pytest.raises(ZeroProbability):
        forward_backward(probs, extend_labels([1], AB2))


def test_empty_label_sequence():
    probs = np.array([[0.9, 0.1], [0.8, 0.2]])
    tables = forward_backward(probs, extend_labels([], AB2))
    assert tables.log_prob == pytest.approx(np.log(0.72), abs=1e-12)
    post = posterior(probs, tables)
    np.testing.assert_allclose(post, [[1.0, 0.0], [1.0, 0.0]], atol=1e-15)


def test_cross_entropy_values():
    one_hot = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert cross_entropy(one_hot, one_hot) == pytest.approx(0.0, abs=1e-12)

    target = np.zeros((3, 4))
    target[:, 2] = 1.0
    uniform = np.full((3, 4), 0.25)
    assert cross_entropy(target, uniform) == pytest.approx(3 * np.log(4), abs=1e-12)

    post = np.array([[1 / 3, 2 / 3], [1 / 3, 2 / 3]])
    assert cross_entropy(post, np.full((2, 2), 0.5)) == pytest.approx(2 * np.log(2), abs=1e-12)


def test_cross_entropy_finite_difference_matches_gradient():
    # With the target frozen, the cross-entropy gradient through the softmax
    # must equal probs - target, the same residual the lattice loss produces.
    rng = np.random.default_rng(17)
    logits = rng.normal(0, 1, (4, 3))
    result = ctc_loss_grad(logits, [1, 2], AB3)
    target = result.pseudo_gt
    h = 1e-5
    fd = np.empty_like(logits)
    for t, k in np.ndindex(logits.shape):
        up = logits.copy()
        up[t, k] += h
        down = logits.copy()
        down[t, k] -= h
        fd[t, k] = (cross_entropy(target, softmax(up)) - cross_entropy(target, softmax(down))) / (2 * h)
    np.testing.assert_allclose(fd, result.gradient, atol=1e-6)


def test_best_path_decode():
    probs = fig3c_probs()
    assert best_path_decode(probs, AB2).tolist() == [1]  # ---a--- -> a

    blank_only = np.tile([0.6, 0.4], (4, 1))
    assert best_path_decode(blank_only, AB2).tolist() == []

    rows = {0: [0.8, 0.1, 0.1], 1: [0.1, 0.8, 0.1], 2: [0.1, 0.1, 0.8]}
    path = [1, 1, 0, 1, 2, 0]  # aa-ab- -> aab
    probs = np.array([rows[k] for k in path])
    assert best_path_decode(probs, AB3).tolist() == [1, 1, 2]


def test_best_path_decode_tie_breaks_low_index():
    probs = np.array([[0.5, 0.5]])
    assert best_path_decode(probs, AB2).tolist() == []
