import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.nn import Parameter
from src.training.optimizer import Adam, AdamState, adam_step
from src.utils.error_handler import ShapeError


def test_first_step_moves_by_learning_rate():
    p = np.array([1.0, -2.0])
    adam_step([p], [np.ones(2)], AdamState(), lr=0.1)
    assert_allclose(p, [0.9, -2.1], atol=1e-6)


def test_zero_gradient_is_a_no_op():
    p = np.array([0.5, 0.25, -1.0])
    before = p.copy()
    state = AdamState()
    for _ in range(3):
        adam_step([p], [np.zeros(3)], state, lr=0.1)
    assert_array_equal(p, before)
    assert state.step == 3


def test_matches_reference_over_steps(rng):
    p = rng.standard_normal(4)
    ref = p.copy()
    m = np.zeros(4)
    v = np.zeros(4)
    state = AdamState()
    for t in range(1, 6):
        g = rng.standard_normal(4)
        adam_step([p], [g], state, lr=0.01)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert_allclose(p, ref, rtol=1e-12)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        adam_step([np.zeros(2)], [np.zeros(3)], AdamState(), lr=0.1)
    with pytest.raises(ShapeError):
        adam_step([np.zeros(2)], [], AdamState(), lr=0.1)


def test_zero_lr_group_is_bitwise_unchanged(rng):
    frozen = Parameter(rng.standard_normal((3, 2)))
    fresh = Parameter(rng.standard_normal(2))
    before = frozen.data.copy()
    frozen.grad = np.ones((3, 2))
    fresh.grad = np.ones(2)

    optimizer = Adam({'backbone': [frozen], 'fresh': [fresh]}, {'backbone': 0.0, 'fresh': 0.1})
    optimizer.step()

    assert frozen.data.tobytes() == before.tobytes()
    assert optimizer.states['backbone'].step == 0
    assert optimizer.states['fresh'].step == 1


def test_missing_gradient_counts_as_zero():
    p = Parameter(np.array([1.0]))
    Adam({'fresh': [p]}, {'fresh': 0.1}).step()
    assert_array_equal(p.data, [1.0])


def test_missing_learning_rate():
    with pytest.raises(ValueError):
        Adam({'backbone': [], 'fresh': []}, {'fresh': 0.1})


def test_zero_grad():
    p = Parameter(np.zeros(2))
    p.grad = np.ones(2)
    optimizer = Adam({'fresh': [p]}, {'fresh': 0.1})
    optimizer.zero_grad()
    assert p.grad is None or not p.grad.any()


def test_first_step_is_scale_invariant(rng):
    g = rng.standard_normal(5)
    small, large = np.zeros(5), np.zeros(5)
    adam_step([small], [g], AdamState(), lr=0.01)
    adam_step([large], [g * 1000.0], AdamState(), lr=0.01)
    assert_allclose(np.abs(large), np.abs(small), rtol=1e-2)
    assert_array_equal(np.sign(large), np.sign(small))
