import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sptseg.autodiff import (Tensor, backward, check_gradients, concat,
                             elementwise, layer_norm, matmul, no_grad,
                             softmax)
from sptseg.errors import ContractError, DimensionError, NonFiniteError

rng = np.random.default_rng(0)


def t(shape, scale=1.0):
    return Tensor(scale * rng.standard_normal(shape))


def test_arithmetic_values():
    a = Tensor([1.0, 2.0, 3.0])
    b = Tensor([4.0, 5.0, 6.0])
    assert np.allclose((a + b).data, [5, 7, 9])
    assert np.allclose((a - b).data, [-3, -3, -3])
    assert np.allclose((a * b).data, [4, 10, 18])
    assert np.allclose((b / a).data, [4, 2.5, 2])
    assert np.allclose((2.0 * a + 1.0).data, [3, 5, 7])


def test_elementwise_tagged_matches_operators():
    a, b = t((3, 4)), t((3, 4))
    assert np.array_equal(elementwise("mul", a, b).data, (a * b).data)
    with pytest.raises(ContractError):
        elementwise("max", a, b)


def test_binary_grads_against_finite_differences():
    for op in ("add", "sub", "mul", "div"):
        a, b = t((2, 3)), Tensor(rng.standard_normal((2, 3)) + 3.0)
        rep = check_gradients(lambda x, y: elementwise(op, x, y).sum(), [a, b])
        assert rep["finite"] and rep["max_rel_error"] < 1e-6, op


def test_broadcast_grads():
    a, b = t((2, 3, 4)), t((4,))
    rep = check_gradients(lambda x, y: (x * y + y).sum(), [a, b])
    assert rep["max_rel_error"] < 1e-6


def test_non_broadcastable_shapes_rejected():
    with pytest.raises(DimensionError):
        t((2, 3)) + t((4, 5))


def test_division_by_zero_rejected():
    with pytest.raises(ContractError):
        t((3,)) / Tensor([1.0, 0.0, 2.0])


def test_matmul_value_and_grad():
    a, b = t((3, 4)), t((4, 5))
    assert np.allclose(matmul(a, b).data, a.data @ b.data)
    rep = check_gradients(lambda x, y: matmul(x, y).sum(), [a, b])
    assert rep["max_rel_error"] < 1e-6
    with pytest.raises(DimensionError):
        matmul(t((3, 4)), t((5, 6)))


def test_matmul_batched_broadcast_grad():
    a, b = t((2, 3, 4)), t((4, 5))
    rep = check_gradients(lambda x, y: matmul(x, y).sum(), [a, b])
    assert rep["max_rel_error"] < 1e-6


def test_getitem_grad_accumulates_duplicates():
    a = t((5,))
    a.requires_grad = True
    out = (a[[0, 0, 2]] * Tensor([1.0, 2.0, 3.0])).sum()
    backward(out)
    assert np.allclose(a.grad, [3.0, 0.0, 3.0, 0.0, 0.0])


def test_concat_grad_and_value():
    a, b = t((2, 3)), t((2, 2))
    out = concat([a, b], axis=1)
    assert out.shape == (2, 5)
    rep = check_gradients(lambda x, y: concat([x, y], axis=1).sum(), [a, b])
    assert rep["max_rel_error"] < 1e-6


def test_softmax_distribution_and_grad():
    x = t((3, 5))
    s = softmax(x, axis=-1)
    assert np.allclose(s.data.sum(axis=-1), 1.0)
    assert np.all(s.data > 0)
    w = rng.standard_normal((3, 5))
    rep = check_gradients(lambda y: (softmax(y, axis=-1) * w).sum(), [x])
    assert rep["max_rel_error"] < 1e-6


def test_softmax_shift_invariance():
    x = rng.standard_normal((4, 6))
    assert np.allclose(softmax(Tensor(x)).data, softmax(Tensor(x + 1000.0)).data)


def test_layer_norm_statistics_and_grad():
    x = t((2, 5, 8))
    g, b = Tensor(np.ones(8)), Tensor(np.zeros(8))
    y = layer_norm(x, g, b)
    assert np.allclose(y.data.mean(axis=-1), 0.0, atol=1e-12)
    assert np.allclose(y.data.var(axis=-1), 1.0, atol=1e-5)
    w = rng.standard_normal((2, 5, 8))
    rep = check_gradients(lambda a, gg, bb: (layer_norm(a, gg, bb) * w).sum(),
                          [x, g, b])
    assert rep["max_rel_error"] < 1e-4


def test_unary_ops_grads():
    x = Tensor(np.abs(rng.standard_normal((3, 3))) + 0.5)
    for f in (lambda a: a.exp().sum(), lambda a: a.log().sum(),
              lambda a: a.sqrt().sum(), lambda a: a.pow(3).sum(),
              lambda a: a.tanh().sum(), lambda a: a.gelu().sum()):
        rep = check_gradients(f, [Tensor(x.data.copy())])
        assert rep["max_rel_error"] < 1e-5


def test_log_and_sqrt_domain_errors():
    with pytest.raises(ContractError):
        Tensor([-1.0]).log()
    with pytest.raises(ContractError):
        Tensor([-1.0]).sqrt()


def test_clamp_blocks_gradient_outside_range():
    x = Tensor([-2.0, 0.5, 3.0], requires_grad=True)
    backward(x.clamp(0.0, 1.0).sum())
    assert np.allclose(x.grad, [0.0, 1.0, 0.0])


def test_nonfinite_input_rejected():
    with pytest.raises(NonFiniteError):
        Tensor([1.0, np.inf])
    with pytest.raises(NonFiniteError):
        Tensor([np.nan])


def test_backward_requires_scalar():
    with pytest.raises(ContractError):
        backward(t((3,)))


def test_no_grad_suspends_tracking():
    x = Tensor(rng.standard_normal(4), requires_grad=True)
    with no_grad():
        y = (x * 2.0).sum()
    assert y._parents == () and not y.requires_grad


def test_grad_accumulates_over_reuse():
    x = Tensor([2.0], requires_grad=True)
    y = x * x + x * 3.0          # d/dx = 2x + 3 = 7
    backward(y.sum())
    assert np.allclose(x.grad, [7.0])


def test_mean_matches_sum_over_n():
    x = t((4, 6))
    assert np.allclose(x.mean(axis=1).data, x.data.sum(axis=1) / 6.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_add_commutes_and_mul_distributes(n, m, seed):
    r = np.random.default_rng(seed)
    a, b, c = (Tensor(r.standard_normal((n, m))) for _ in range(3))
    assert np.array_equal((a + b).data, (b + a).data)
    assert np.allclose((a * (b + c)).data, (a * b + a * c).data)
