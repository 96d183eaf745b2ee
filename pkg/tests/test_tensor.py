import numpy as np
import pytest
from hypothesis import given, strategies as st

from mango import tensor as T
from mango.gradcheck import finite_difference, max_rel_err


def test_matmul_identity():
    a = T.Tensor(np.eye(2))
    b = T.Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(T.matmul(a, b).data, [[1, 2], [3, 4]])


def test_matmul_projector():
    a = T.Tensor([[1.0, 0.0], [0.0, 0.0]])
    b = T.Tensor([[5.0], [7.0]])
    assert np.array_equal(T.matmul(a, b).data, [[5], [0]])


def test_matmul_shape_mismatch():
    with pytest.raises(T.ShapeError):
        T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((2, 3))))


def test_matmul_gradient_vs_finite_differences():
    rng = np.random.default_rng(0)
    a = T.Tensor(rng.uniform(-2, 2, (3, 4)))
    b = T.Tensor(rng.uniform(-2, 2, (4, 2)))
    out = T.tsum(T.matmul(a, b))
    T.backward(out)
    numeric = finite_difference(
        lambda: T.tsum(T.matmul(a, b)).data, [a.data, b.data])
    assert max_rel_err([a.grad, b.grad], numeric) < 1e-6


def test_relu_values():
    x = T.Tensor([-1.0, 0.0, 2.0])
    assert np.array_equal(T.relu(x).data, [0, 0, 2])


def test_relu_all_negative_zero_grad():
    x = T.Tensor([-1.0, -3.0])
    out = T.tsum(T.relu(x))
    T.backward(out)
    assert np.array_equal(out.data, 0.0)
    assert np.array_equal(x.grad, [0, 0])


def test_relu_gradient_vs_finite_differences():
    rng = np.random.default_rng(1)
    # Keep inputs away from the kink.
    vals = rng.uniform(0.5, 2, 10) * rng.choice([-1, 1], 10)
    x = T.Tensor(vals)
    T.backward(T.tsum(T.relu(x)))
    numeric = finite_difference(lambda: T.tsum(T.relu(x)).data, [x.data])
    assert max_rel_err([x.grad], numeric) < 1e-6


def test_sigmoid_at_zero():
    assert T.sigmoid(T.Tensor([0.0])).data[0] == 0.5


def test_sigmoid_high_precision_value():
    import mpmath
    expected = float(1 / (1 + mpmath.e ** mpmath.mpf("-0.6325")))
    got = float(T.sigmoid(T.Tensor([0.6325])).data[0])
    assert got == pytest.approx(expected, abs=1e-14)
    assert got == pytest.approx(0.65306, abs=1e-5)


@given(st.floats(min_value=-30, max_value=30))
def test_sigmoid_symmetry_identity(x):
    s = T.sigmoid_values(np.array([x, -x]))
    assert s[0] == pytest.approx(1.0 - s[1], abs=1e-12)


@given(st.floats(min_value=-700, max_value=700, allow_nan=False))
def test_sigmoid_strictly_in_unit_interval(x):
    s = float(T.sigmoid_values(np.array([x]))[0])
    assert 0.0 < s < 1.0


def test_cross_entropy_uniform_logits():
    logits = T.Tensor(np.zeros((3, 5)))
    loss = T.cross_entropy(logits, [0, 2, 4])
    assert float(loss.data) == pytest.approx(np.log(5), abs=1e-12)


def test_cross_entropy_saturated():
    logits = np.zeros((2, 4))
    logits[0, 1] = 20.0
    logits[1, 3] = 20.0
    loss = T.cross_entropy(T.Tensor(logits), [1, 3])
    assert float(loss.data) == pytest.approx(0.0, abs=1e-6)


def test_cross_entropy_nonnegative_random():
    rng = np.random.default_rng(2)
    for _ in range(20):
        logits = T.Tensor(rng.uniform(-2, 2, (4, 3)))
        labels = rng.integers(0, 3, 4)
        assert float(T.cross_entropy(logits, labels).data) >= 0.0


def test_cross_entropy_label_out_of_range():
    with pytest.raises(T.LabelError):
        T.cross_entropy(T.Tensor(np.zeros((2, 3))), [0, 3])


def test_cross_entropy_gradient_vs_finite_differences():
    rng = np.random.default_rng(3)
    logits = T.Tensor(rng.uniform(-2, 2, (5, 4)))
    labels = rng.integers(0, 4, 5)
    T.backward(T.cross_entropy(logits, labels))
    numeric = finite_difference(
        lambda: T.cross_entropy(logits, labels).data, [logits.data])
    assert max_rel_err([logits.grad], numeric) < 1e-6


def test_backward_single_leaf():
    x = T.Tensor([3.0])
    T.backward(T.tsum(x))
    assert np.array_equal(x.grad, [1.0])


def test_backward_quadratic():
    theta = T.Tensor([1.0, -2.0, 0.5])
    loss = T.mul(T.Tensor(0.5), T.tsum(T.mul(theta, theta)))
    T.backward(loss)
    assert np.allclose(theta.grad, theta.data, atol=1e-15)


def test_backward_rejects_nonscalar_root():
    x = T.Tensor([1.0, 2.0])
    with pytest.raises(T.GraphError):
        T.backward(T.relu(x))


def test_backward_deterministic_bitwise():
    rng = np.random.default_rng(4)
    x_data = rng.uniform(-2, 2, (3, 4))
    w_data = rng.uniform(-2, 2, (4, 2))
    labels = rng.integers(0, 2, 3)

    def run():
        x, w = T.Tensor(x_data), T.Tensor(w_data)
        T.backward(T.cross_entropy(T.matmul(x, w), labels))
        return w.grad.copy()

    g1, g2 = run(), run()
    assert np.array_equal(g1, g2)


def test_untouched_leaf_gets_zero_gradient():
    x = T.Tensor([1.0])
    y = T.Tensor([2.0])
    z = T.add(x, y)
    T.backward(T.tsum(z))
    # y participates; build a graph where a leaf never joins.
    orphan = T.Tensor([5.0])
    assert orphan.grad is None  # never reached, treated as zero downstream


def test_nonfinite_is_an_error():
    with pytest.raises(T.NonFiniteError):
        T.Tensor([np.inf])
    big = T.Tensor([1e308])
    with np.errstate(over="ignore"), pytest.raises(T.NonFiniteError):
        T.add(big, big)


def test_std_population_constant():
    assert T.std_population(np.full(7, 3.3)) == 0.0


def test_std_population_worked_example():
    assert T.std_population(np.array([1.0, -1.0, 2.0, -2.0])) == \
        pytest.approx(np.sqrt(2.5), abs=1e-15)


def test_std_population_empty_rejected():
    with pytest.raises(T.GraphError):
        T.std_population(np.array([]))


@given(st.floats(min_value=-100, max_value=100),
       st.lists(st.floats(min_value=-10, max_value=10), min_size=1, max_size=8))
def test_std_population_homogeneity(c, xs):
    x = np.array(xs)
    assert T.std_population(c * x) == pytest.approx(
        abs(c) * T.std_population(x), rel=1e-9, abs=1e-9)
