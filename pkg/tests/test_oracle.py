import numpy as np
import pytest

from ctcfit import (
    Alphabet,
    TooLarge,
    ZeroProbability,
    brute_posterior,
    brute_prob,
    fd_gradient,
    iter_paths,
    min_frames,
    softmax,
)
from ctcfit.oracle import _admissible_mask

AB2 = Alphabet(2, 0)
AB3 = Alphabet(3, 0)


def fig3c_probs():
    y = np.zeros((7, 2))
    y[:, 0] = 1.0
    y[2] = [0.5, 0.5]
    y[3] = [0.0, 1.0]
    y[4] = [0.5, 0.5]
    return y


def test_enumeration_covers_all_paths_and_sums_to_one():
    rng = np.random.default_rng(2)
    probs = rng.random((5, 3))
    probs /= probs.sum(axis=1, keepdims=True)
    seen = 0
    total = 0.0
    for paths, prob in iter_paths(probs, chunk_size=50):
        seen += paths.shape[0]
        total += prob.sum()
    assert seen == 3**5
    assert total == pytest.approx(1.0, abs=1e-9)


def test_plateau_has_exactly_four_quarter_paths():
    probs = fig3c_probs()
    assert brute_prob(probs, [1], AB2) == pytest.approx(1.0, abs=1e-15)
    admissible = []
    for paths, prob in iter_paths(probs):
        mask = _admissible_mask(paths, np.array([1]), 0) & (prob > 0)
        admissible.extend(prob[mask].tolist())
    assert len(admissible) == 4
    assert all(p == pytest.approx(0.25, abs=1e-15) for p in admissible)


def test_brute_prob_uniform_and_infeasible():
    assert brute_prob(np.full((2, 2), 0.5), [1], AB2) == pytest.approx(0.75, abs=1e-12)
    # "aab" cannot fit into 3 frames but fits into 4
    uniform3 = np.full((3, 3), 1 / 3)
    assert brute_prob(uniform3, [1, 1, 2], AB3) == 0.0
    uniform4 = np.full((4, 3), 1 / 3)
    assert brute_prob(uniform4, [1, 1, 2], AB3) > 0.0
    assert min_frames([1, 1, 2]) == 4


def test_brute_posterior_values():
    one = brute_posterior(np.array([[0.4, 0.6]]), [1], AB2)
    np.testing.assert_allclose(one, [[0.0, 1.0]], atol=1e-15)

    uniform = brute_posterior(np.full((2, 2), 0.5), [1], AB2)
    np.testing.assert_allclose(uniform, [[1 / 3, 2 / 3], [1 / 3, 2 / 3]], atol=1e-12)

    plateau = brute_posterior(fig3c_probs(), [1], AB2)
    np.testing.assert_allclose(plateau, fig3c_probs(), atol=1e-12)


def test_brute_posterior_rows_are_distributions():
    rng = np.random.default_rng(19)
    probs = rng.random((5, 3))
    probs /= probs.sum(axis=1, keepdims=True)
    post = brute_posterior(probs, [1, 2], AB3)
    np.testing.assert_allclose(post.sum(axis=1), np.ones(5), atol=1e-9)
    assert np.all(post >= 0.0)


def test_brute_posterior_zero_probability():
    with pytest.raises(ZeroProbability):
        brute_posterior(np.array([[1.0, 0.0]]), [1], AB2)


def test_size_guard():
    probs = np.full((24, 2), 0.5)  # 2^24 = 16.7M paths
    with pytest.raises(TooLarge):
        brute_prob(probs, [1], AB2)


def test_fd_gradient_step_validation():
    with pytest.raises(ValueError):
        fd_gradient(np.zeros((2, 2)), [1], AB2, step=1e-8)


def test_fd_gradient_single_frame():
    rng = np.random.default_rng(23)
    logits = rng.normal(0, 1, (1, 2))
    y = softmax(logits)
    grad = fd_gradient(logits, [1], AB2)
    np.testing.assert_allclose(grad, [[y[0, 0], y[0, 1] - 1.0]], atol=1e-7)


def test_fd_gradient_near_minimum_is_zero():
    # Logits reproducing the plateau construction up to tiny leakage: the
    # loss sits at its minimum so the finite-difference gradient vanishes.
    big = 40.0
    logits = np.full((7, 2), 0.0)
    logits[:, 0] = big
    logits[2] = [0.0, 0.0]
    logits[3] = [-big, big]
    logits[4] = [0.0, 0.0]
    grad = fd_gradient(logits, [1], AB2)
    assert np.abs(grad).max() < 1e-6
