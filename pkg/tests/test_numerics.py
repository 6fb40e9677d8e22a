import numpy as np
import pytest

from covsteer.errors import ShapeError, TrainingError
from covsteer.numerics import (
    Adam,
    Parameter,
    Tensor,
    adam_step,
    backward,
    concat,
    dropout,
    grad_check,
    layer_norm,
    matmul,
    mean,
    mse,
    no_grad,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sum_,
    tanh,
    transpose,
)


def test_mse_examples():
    assert mse(Tensor([1.0, 2.0]), Tensor([1.0, 2.0])).data == 0.0
    assert mse(Tensor([0.0, 0.0]), Tensor([1.0, 1.0])).data == 1.0


def test_mse_shape_mismatch_names_shapes():
    with pytest.raises(ShapeError, match=r"\(2,\).*\(3,\)"):
        mse(Tensor([0.0, 0.0]), Tensor([1.0, 1.0, 1.0]))


def test_equal_logits_softmax():
    assert np.allclose(softmax(Tensor(np.zeros((1, 4)))).data, 0.25)


def test_square_grad():
    p = Parameter(np.array(3.0))
    backward(p * p)
    assert p.grad == 6.0


def test_detached_constant_gets_no_grad():
    p = Parameter(np.array([1.0, 2.0]))
    c = Tensor(np.array([5.0, 5.0]))
    backward(sum_(p * c))
    assert c.grad is None or np.all(c.grad == 0)
    assert np.array_equal(p.grad, [5.0, 5.0])


def test_non_scalar_loss():
    with pytest.raises(ValueError):
        backward(Parameter(np.ones(3)) * 2.0)


def test_linear_mse_matches_finite_differences():
    rng = np.random.default_rng(0)
    W = Parameter(rng.normal(size=(3, 3)))
    x = rng.normal(size=(4, 3))
    y = rng.normal(size=(4, 3))
    assert grad_check([W], lambda: mse(matmul(Tensor(x), W), Tensor(y)), min_entries=9) <= 1e-8


@pytest.mark.parametrize("build", [
    lambda x: sum_(sigmoid(x) * tanh(x)),
    lambda x: sum_(relu(x) * x),
    lambda x: sum_(softmax(x, axis=-1) * Tensor(np.arange(12.0).reshape(3, 4))),
    lambda x: sum_(layer_norm(x) * Tensor(np.arange(12.0).reshape(3, 4))),
    lambda x: sum_(concat([x, x * x], axis=0) * 0.5),
    lambda x: sum_(slice_(x, (slice(None), [0, 0, 3])) * 2.0),
    lambda x: mean(transpose(reshape(x, (2, 6))) * Tensor(np.arange(12.0).reshape(6, 2))),
    lambda x: sum_(matmul(x, transpose(x))),
])
def test_primitive_grads(build):
    rng = np.random.default_rng(1)
    # keep relu inputs away from the kink
    data = rng.normal(size=(3, 4))
    data[np.abs(data) < 0.05] = 0.3
    p = Parameter(data)
    assert grad_check([p], lambda: build(p), min_entries=12) <= 1e-6


def test_broadcast_add_unbroadcasts_grad():
    a = Parameter(np.ones((4, 3)))
    b = Parameter(np.zeros(3))
    backward(sum_(a + b))
    assert np.array_equal(b.grad, [4.0, 4.0, 4.0])


def test_batched_matmul_grad():
    rng = np.random.default_rng(2)
    a = Parameter(rng.normal(size=(2, 3, 4)))
    b = Parameter(rng.normal(size=(2, 4, 5)))
    assert grad_check([a, b], lambda: sum_(matmul(a, b) * matmul(a, b)), min_entries=40) <= 1e-6


def test_no_grad_builds_no_graph():
    p = Parameter(np.ones(2))
    with no_grad():
        y = p * 3.0
    assert not y.requires_grad


def test_dropout_eval_is_identity_and_train_scales():
    x = Tensor(np.ones(10000))
    assert dropout(x, 0.1, np.random.default_rng(0), training=False) is x
    y = dropout(x, 0.1, np.random.default_rng(0), training=True).data
    assert np.allclose(np.unique(y), [0.0, 1 / 0.9])
    assert abs(y.mean() - 1.0) < 0.02


def test_adam_zero_grad_leaves_params():
    p = Parameter(np.array([1.0, -2.0]))
    opt = Adam([p], lr=1e-3)
    p.grad = np.zeros(2)
    adam_step(opt)
    assert np.array_equal(p.data, [1.0, -2.0])


def test_adam_first_step_by_hand():
    # m_hat = g, v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps)
    p = Parameter(np.array([0.0]))
    opt = Adam([p], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8)
    p.grad = np.array([1.0])
    opt.step()
    assert p.data[0] == pytest.approx(-1e-3, rel=1e-7)


def test_adam_constant_gradient_limit():
    p = Parameter(np.array([0.0, 0.0]))
    opt = Adam([p], lr=1e-2)
    before = p.data.copy()
    for _ in range(2000):
        before = p.data.copy()
        p.grad = np.array([3.0, -0.5])
        opt.step()
    assert np.allclose(p.data - before, [-1e-2, 1e-2], rtol=1e-6)


def test_adam_nan_gradient():
    p = Parameter(np.array([1.0]))
    opt = Adam([p])
    p.grad = np.array([np.nan])
    with pytest.raises(TrainingError):
        opt.step()


def test_no_grad_is_per_thread():
    import threading

    inside, release = threading.Event(), threading.Event()

    def hold():
        with no_grad():
            inside.set()
            release.wait(5)

    t = threading.Thread(target=hold)
    t.start()
    inside.wait(5)
    try:
        p = Parameter(np.ones(2))
        assert (p * 2.0).requires_grad
    finally:
        release.set()
        t.join()
