import math

import numpy as np
import pytest

from longfin.autograd import Tensor
from longfin.optim import AdaFactor, Adam, lr_at, make_optimizer


def _param(values, grad):
    p = Tensor(np.asarray(values, dtype=np.float64), requires_grad=True, dtype=np.float64)
    p.grad = np.asarray(grad, dtype=np.float64)
    return p


def test_adam_first_step_by_hand():
    p = _param([1.0, -2.0], [0.5, -0.25])
    Adam({"p": p}).step(0.1)
    # after bias correction m_hat = g and v_hat = g^2, so the step is lr * sign(g)
    assert np.allclose(p.data, [0.9, -1.9], atol=1e-6)


def test_adam_second_step_by_hand():
    p = _param([0.0], [1.0])
    opt = Adam({"p": p})
    opt.step(0.01)
    p.grad = np.array([3.0])
    opt.step(0.01)
    m = 0.9 * 0.1 * 1 + 0.1 * 3
    v = 0.999 * 0.001 * 1 + 0.001 * 9
    m_hat, v_hat = m / (1 - 0.9**2), v / (1 - 0.999**2)
    assert math.isclose(p.data[0], -0.01 / (1 + 1e-8) - 0.01 * m_hat / (math.sqrt(v_hat) + 1e-8), rel_tol=1e-9)


@pytest.mark.parametrize("name", ["adam", "adafactor", "AdaFactor"])
def test_zero_learning_rate_leaves_params(name):
    p = _param(np.arange(6.0).reshape(2, 3), np.ones((2, 3)))
    before = p.data.copy()
    make_optimizer(name, {"p": p}).step(0.0)
    assert np.array_equal(p.data, before)


def test_missing_gradients_are_skipped():
    p = _param([1.0], [1.0])
    p.grad = None
    Adam({"p": p}).step(1.0)
    assert p.data[0] == 1.0


def test_adafactor_moves_against_gradient_and_is_clipped():
    rng = np.random.default_rng(0)
    g = rng.standard_normal((4, 5))
    p = _param(np.zeros((4, 5)), g)
    b = _param(np.zeros(5), g[0])
    opt = AdaFactor({"w": p, "b": b})
    opt.step(0.1)
    assert np.all(np.sign(p.data) == -np.sign(g))
    assert math.sqrt(float((p.data**2).mean())) <= 0.1 + 1e-12
    assert isinstance(opt.state["w"], tuple) and opt.state["b"].shape == (5,)


def test_adafactor_minimises_a_quadratic():
    target = np.array([[1.0, -2.0], [0.5, 3.0]])
    p = _param(np.zeros((2, 2)), np.zeros((2, 2)))
    opt = AdaFactor({"p": p})
    for _ in range(400):
        p.grad = 2 * (p.data - target)
        opt.step(0.05)
    assert np.abs(p.data - target).max() < 0.1


def test_unknown_optimizer():
    with pytest.raises(ValueError):
        make_optimizer("sgd", {})


def test_lr_schedule():
    assert [lr_at(s, 1.0, 4, 10) for s in range(5)] == [0.25, 0.5, 0.75, 1.0, 1.0]
    assert lr_at(0, 2.0, 0, 10) == 2.0
    linear = [lr_at(s, 1.0, 2, 10, "linear") for s in range(10)]
    assert linear[:2] == [0.5, 1.0] and linear[-1] == 0.0
    assert all(a >= b for a, b in zip(linear[1:], linear[2:]))
    with pytest.raises(ValueError):
        lr_at(5, 1.0, 0, 10, "cosine")
