import numpy as np
import pytest

from mango.metrics import (AccuracyMatrix, IncompleteMatrixError, aaa, bwt,
                           evaluate_all, final_accuracy, load_matrix,
                           save_matrix, summary, wc_acc)
from mango.model import ModelConfig, ParameterStore
from mango.streams import StreamSpec, make_cil_stream


def constant_matrix(big_t, c):
    m = AccuracyMatrix(big_t)
    for t in range(big_t):
        for j in range(t + 1):
            m.set_value(t, j, c)
    return m


def matrix_from_rows(rows):
    m = AccuracyMatrix(len(rows))
    for t, row in enumerate(rows):
        for j, v in enumerate(row):
            m.set_value(t, j, v)
    return m


def test_constant_matrix_identities():
    m = constant_matrix(4, 0.35)
    assert final_accuracy(m) == pytest.approx(0.35, abs=1e-12)
    assert aaa(m) == pytest.approx(0.35, abs=1e-12)
    assert wc_acc(m) == pytest.approx(0.35, abs=1e-12)
    assert bwt(m) == pytest.approx(0.0, abs=1e-12)


def test_final_accuracy_worked_example():
    m = matrix_from_rows([[0.5], [0.8, 0.6]])
    assert final_accuracy(m) == pytest.approx(0.7, abs=1e-15)


def test_aaa_worked_example():
    m = matrix_from_rows([[1.0], [0.5, 0.5]])
    assert aaa(m) == pytest.approx(0.75, abs=1e-15)


def test_wc_acc_worked_example():
    m = matrix_from_rows([[1.0], [0.4, 0.8]])
    assert wc_acc(m) == pytest.approx(0.6, abs=1e-15)


def test_bwt_worked_examples():
    assert bwt(matrix_from_rows([[0.9], [0.8, 0.7]])) == \
        pytest.approx(-0.1, abs=1e-15)
    assert bwt(matrix_from_rows([[0.5], [0.7, 0.9]])) == \
        pytest.approx(0.2, abs=1e-15)
    m = matrix_from_rows([[0.4], [0.4, 0.6]])
    assert bwt(m) == 0.0


def test_metric_ranges_random_matrices():
    rng = np.random.default_rng(0)
    for _ in range(50):
        big_t = int(rng.integers(2, 6))
        m = matrix_from_rows([rng.uniform(0, 1, t + 1).tolist()
                              for t in range(big_t)])
        assert 0.0 <= final_accuracy(m) <= 1.0
        assert 0.0 <= aaa(m) <= 1.0
        assert 0.0 <= wc_acc(m) <= 1.0
        assert -1.0 <= bwt(m) <= 1.0


def test_bwt_ignores_interior_entries():
    rows = [[0.5], [0.6, 0.7], [0.2, 0.3, 0.9]]
    base = bwt(matrix_from_rows(rows))
    perturbed = [row[:] for row in rows]
    perturbed[1][0] = 0.05    # interior entry: j < t < T-1
    assert bwt(matrix_from_rows(perturbed)) == base
    # ...but wc_acc does see it through the running minimum
    assert wc_acc(matrix_from_rows(perturbed)) < wc_acc(matrix_from_rows(rows))


def test_incomplete_matrix_rejected():
    m = AccuracyMatrix(3)
    m.set_value(0, 0, 0.5)
    with pytest.raises(IncompleteMatrixError):
        final_accuracy(m)


def test_out_of_triangle_rejected():
    m = AccuracyMatrix(3)
    with pytest.raises(ValueError):
        m.set_value(0, 1, 0.5)
    with pytest.raises(ValueError):
        m.record(1, 0, 5, 4)


def test_wc_acc_needs_two_tasks():
    m = constant_matrix(1, 0.5)
    with pytest.raises(ValueError):
        wc_acc(m)
    with pytest.raises(ValueError):
        bwt(m)


def test_evaluate_all_row_shape_and_purity():
    spec = StreamSpec(kind="cil", num_tasks=3, classes_per_task=2,
                      samples_per_task=50, input_dim=6, noise_scale=0.2, seed=2)
    tasks = make_cil_stream(spec)
    store = ParameterStore(ModelConfig(6, [8], 6, seed=0))
    before = [p.data.copy() for p in store.parameters()]
    m = AccuracyMatrix(3)
    evaluate_all(store, tasks[:2], m, 1)
    assert m.defined(1, 0) and m.defined(1, 1) and not m.defined(1, 2)
    for b, p in zip(before, store.parameters()):
        assert np.array_equal(b, p.data)


def test_evaluate_all_uniform_random_classifier_binomial():
    # Zero parameters -> uniform logits -> argmax ties broken to class 0;
    # use a fixed random predictor instead via random parameters with a
    # permuted-label stream: check chance-level accuracy statistically.
    rng = np.random.default_rng(3)
    n, c = 4000, 4

    class FakeTask:
        task_id = 0
        test_x = rng.uniform(-1, 1, (n, 8))
        test_y = rng.integers(0, c, n)   # labels independent of inputs

    store = ParameterStore(ModelConfig(8, [16], c, seed=9))
    m = AccuracyMatrix(1)
    evaluate_all(store, [FakeTask()], m, 0)
    sigma = np.sqrt((1 / c) * (1 - 1 / c) / n)
    assert abs(m.get(0, 0) - 1 / c) < 3 * sigma


def test_matrix_csv_roundtrip(tmp_path):
    m = matrix_from_rows([[0.9], [0.8, 0.7], [0.1, 0.2, 0.3]])
    path = tmp_path / "matrix.csv"
    save_matrix(m, path)
    loaded = load_matrix(path)
    for t in range(3):
        for j in range(t + 1):
            assert loaded.get(t, j) == m.get(t, j)
    assert summary(loaded) == summary(m)


def test_record_counts_are_exact():
    m = AccuracyMatrix(2)
    m.record(0, 0, 1, 3)
    m.record(1, 0, 1, 3)
    m.record(1, 1, 1, 3)
    # exact rational bookkeeping: identities hold to the last bit
    assert final_accuracy(m) == aaa(m) == wc_acc(m)
    assert bwt(m) == 0.0
