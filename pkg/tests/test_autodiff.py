"""Tape correctness: op semantics, gradient accumulation, finite differences."""

import math

import numpy as np
import pytest

from zpnmt import autodiff as ad
from zpnmt.autodiff import Tensor, backward, numeric_gradient
from zpnmt.errors import ContractError, DimensionError, NumericError

RNG = np.random.default_rng(7)


def check_grads(build, tensors, rtol=1e-3, atol=1e-7, h=1e-5):
    """Compare tape gradients of a scalar-producing builder against central FD."""
    for t in tensors:
        t.zero_grad()
    loss = build()
    backward(loss)
    for t in tensors:
        fd = numeric_gradient(lambda: build().item(), t, h=h)
        np.testing.assert_allclose(t.grad, fd, rtol=rtol, atol=atol)


def test_backward_seed_is_one():
    x = Tensor(3.0, requires_grad=True)
    y = ad.scale(x, 2.0)
    backward(y)
    assert y.grad == 1.0
    assert x.grad == 2.0


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        backward(x)


def test_grad_accumulates_across_backward_calls():
    x = Tensor(2.0, requires_grad=True)
    y = ad.scale(x, 5.0)
    backward(y)
    backward(y)
    assert x.grad == 10.0


def test_shared_node_accumulates_both_paths():
    # y = x * x, dy/dx = 2x
    x = Tensor(np.array([1.5, -2.0]), requires_grad=True)
    y = ad.total(ad.mul(x, x))
    backward(y)
    np.testing.assert_allclose(x.grad, 2.0 * x.data)


def test_grad_present_iff_requires_grad():
    a = Tensor(np.ones(4), requires_grad=True)
    b = Tensor(np.ones(4))
    assert a.grad is not None and not a.grad.any()
    assert b.grad is None


def test_matmul_shapes_and_errors():
    a = Tensor(RNG.normal(size=(3, 4)))
    b = Tensor(RNG.normal(size=(4, 2)))
    np.testing.assert_allclose(ad.matmul(a, b).data, a.data @ b.data)
    with pytest.raises(DimensionError) as exc:
        ad.matmul(a, Tensor(np.ones((3, 2))))
    assert "(3, 4)" in str(exc.value) and "(3, 2)" in str(exc.value)


def test_softmax_known_values():
    p = ad.softmax(Tensor(np.array([1.0, 2.0, 3.0])))
    np.testing.assert_allclose(p.data, [0.09003057, 0.24472847, 0.66524096], atol=1e-6)
    assert abs(p.data.sum() - 1.0) < 1e-12


def test_softmax_shift_invariance_and_stability():
    x = RNG.normal(size=8)
    a = ad.softmax(Tensor(x)).data
    b = ad.softmax(Tensor(x + 1000.0)).data
    np.testing.assert_allclose(a, b, atol=1e-12)
    big = ad.softmax(Tensor(np.array([1000.0, 0.0]))).data
    assert np.all(np.isfinite(big))
    assert big[0] > 1.0 - 1e-12


def test_softmax_rejects_non_finite():
    with pytest.raises(NumericError):
        ad.softmax(Tensor(np.array([1.0, np.inf])))


def test_cross_entropy_value_and_bounds():
    p = Tensor(np.array([0.2, 0.5, 0.3]))
    assert math.isclose(ad.cross_entropy(p, 1).item(), -math.log(0.5))
    with pytest.raises(IndexError):
        ad.cross_entropy(p, 3)
    # floor keeps zero probabilities finite
    z = Tensor(np.array([1.0, 0.0]))
    assert ad.cross_entropy(z, 1).item() == pytest.approx(-math.log(1e-12))


def test_concat_stack_row_roundtrip():
    a = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    b = Tensor(np.array([3.0]), requires_grad=True)
    c = ad.concat([a, b])
    np.testing.assert_allclose(c.data, [1.0, 2.0, 3.0])
    m = ad.stack([a, a])
    np.testing.assert_allclose(m.data, [[1.0, 2.0], [1.0, 2.0]])
    r = ad.row(Tensor(np.arange(6.0).reshape(3, 2)), 2)
    np.testing.assert_allclose(r.data, [4.0, 5.0])
    with pytest.raises(IndexError):
        ad.row(Tensor(np.zeros((3, 2))), 3)


def test_no_grad_suppresses_tape():
    x = Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        y = ad.total(ad.tanh(x))
    assert not y.requires_grad
    assert y._parents == ()


@pytest.mark.parametrize("seed", range(10))
def test_fd_elementwise_ops(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=5), requires_grad=True)
    y = Tensor(rng.normal(size=5), requires_grad=True)

    def build():
        s = ad.add(ad.mul(ad.tanh(x), ad.sigmoid(y)), ad.scale(ad.sub(x, y), 0.3))
        return ad.total(s)

    check_grads(build, [x, y])


@pytest.mark.parametrize("seed", range(10))
def test_fd_matmul_all_arities(seed):
    rng = np.random.default_rng(100 + seed)
    A = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    B = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    v = Tensor(rng.normal(size=3), requires_grad=True)
    u = Tensor(rng.normal(size=4), requires_grad=True)

    def build():
        m = ad.matmul(A, B)           # 2d @ 2d
        mv = ad.matmul(A, v)          # 2d @ 1d
        vm = ad.matmul(u, A)          # 1d @ 2d
        d = ad.matmul(v, v)           # 1d @ 1d
        return ad.add(ad.add(ad.total(m), ad.total(mv)), ad.add(ad.total(vm), d))

    check_grads(build, [A, B, v, u])


@pytest.mark.parametrize("seed", range(10))
def test_fd_softmax_cross_entropy(seed):
    rng = np.random.default_rng(200 + seed)
    x = Tensor(rng.normal(size=6), requires_grad=True)
    target = int(rng.integers(0, 6))

    def build():
        return ad.cross_entropy(ad.softmax(x), target)

    check_grads(build, [x])


@pytest.mark.parametrize("seed", range(5))
def test_fd_log_mean_rows_concat(seed):
    rng = np.random.default_rng(300 + seed)
    m = Tensor(rng.uniform(0.5, 2.0, size=(4, 3)), requires_grad=True)
    a = Tensor(rng.normal(size=2), requires_grad=True)

    def build():
        return ad.add(ad.total(ad.log(ad.mean_rows(m))),
                      ad.total(ad.concat([a, ad.tanh(a)])))

    check_grads(build, [m, a])


def test_fd_random_compositions_bulk():
    # 100 random small instances across the op set
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 6))
        x = Tensor(rng.normal(size=n), requires_grad=True)
        W = Tensor(rng.normal(size=(n, n)), requires_grad=True)
        t = int(rng.integers(0, n))

        def build():
            h = ad.tanh(ad.matmul(W, x))
            p = ad.softmax(ad.add(h, x))
            return ad.add(ad.cross_entropy(p, t), ad.total(ad.sigmoid(h)))

        check_grads(build, [x, W])
