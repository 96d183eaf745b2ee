"""Accuracy-matrix bookkeeping and the four stream-level metrics.

A[t][j] is the test accuracy on task j after finishing training on task t
(defined for j <= t). Entries are kept as exact correct/total counts and
converted to floats on read, so metric identities hold exactly in tests.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


class IncompleteMatrixError(ValueError):
    pass


class AccuracyMatrix:
    def __init__(self, num_tasks: int):
        if num_tasks < 1:
            raise ValueError("num_tasks must be >= 1")
        self.num_tasks = num_tasks
        self._entries = {}   # (t, j) -> Fraction

    def record(self, t: int, j: int, correct: int, total: int) -> None:
        if not (0 <= j <= t < self.num_tasks):
            raise ValueError(f"entry ({t},{j}) outside lower triangle")
        if total < 1 or not (0 <= correct <= total):
            raise ValueError("bad correct/total counts")
        self._entries[(t, j)] = Fraction(correct, total)

    def set_value(self, t: int, j: int, value: float) -> None:
        """Direct float entry, for matrices loaded from files."""
        if not (0 <= j <= t < self.num_tasks):
            raise ValueError(f"entry ({t},{j}) outside lower triangle")
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"accuracy {value} outside [0,1]")
        self._entries[(t, j)] = Fraction(value)

    def get(self, t: int, j: int) -> float:
        return float(self._entries[(t, j)])

    def defined(self, t: int, j: int) -> bool:
        return (t, j) in self._entries

    def row(self, t: int):
        return [self.get(t, j) for j in range(t + 1)]

    def require_complete(self) -> None:
        for t in range(self.num_tasks):
            for j in range(t + 1):
                if (t, j) not in self._entries:
                    raise IncompleteMatrixError(f"missing entry ({t},{j})")


def evaluate_all(store, tasks_seen, matrix: AccuracyMatrix, t: int) -> None:
    """Fill row t by evaluating each seen task's test set. Single shared
    head: argmax over all classes."""
    for task in tasks_seen:
        logits = store.predict_logits(task.test_x)
        pred = logits.argmax(axis=1)
        correct = int((pred == task.test_y).sum())
        matrix.record(t, task.task_id, correct, len(task.test_y))


def final_accuracy(matrix: AccuracyMatrix) -> float:
    matrix.require_complete()
    last = matrix.num_tasks - 1
    return float(np.mean(matrix.row(last)))


def aaa(matrix: AccuracyMatrix) -> float:
    """Average over evaluation points of mean seen-task accuracy."""
    matrix.require_complete()
    per_point = [np.mean(matrix.row(t)) for t in range(matrix.num_tasks)]
    return float(np.mean(per_point))


def wc_acc(matrix: AccuracyMatrix) -> float:
    """(1/T) A[T][T] + (1 - 1/T) * mean over past tasks of the minimum
    accuracy that task ever dipped to after being learned."""
    matrix.require_complete()
    big_t = matrix.num_tasks
    if big_t < 2:
        raise ValueError("wc_acc needs at least 2 tasks")
    last = big_t - 1
    mins = [min(matrix.get(t, j) for t in range(j, big_t))
            for j in range(last)]
    min_acc = float(np.mean(mins))
    return (1.0 / big_t) * matrix.get(last, last) + (1.0 - 1.0 / big_t) * min_acc


def bwt(matrix: AccuracyMatrix) -> float:
    """Mean over past tasks of (final accuracy - just-learned accuracy)."""
    matrix.require_complete()
    big_t = matrix.num_tasks
    if big_t < 2:
        raise ValueError("bwt needs at least 2 tasks")
    last = big_t - 1
    diffs = [matrix.get(last, j) - matrix.get(j, j) for j in range(last)]
    return float(np.mean(diffs))


def summary(matrix: AccuracyMatrix) -> dict:
    return {
        "acc": final_accuracy(matrix),
        "aaa": aaa(matrix),
        "wc_acc": wc_acc(matrix),
        "bwt": bwt(matrix),
    }


# -- matrix CSV: one line per row t, comma-separated entries j=0..t ------


def save_matrix(matrix: AccuracyMatrix, path) -> None:
    matrix.require_complete()
    with open(path, "w") as fh:
        for t in range(matrix.num_tasks):
            fh.write(",".join(f"{v:.17g}" for v in matrix.row(t)) + "\n")


def load_matrix(path) -> AccuracyMatrix:
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip()]
    matrix = AccuracyMatrix(len(rows))
    for t, line in enumerate(rows):
        values = [float(v) for v in line.split(",")]
        if len(values) != t + 1:
            raise ValueError(f"row {t} has {len(values)} entries, expected {t + 1}")
        for j, v in enumerate(values):
            matrix.set_value(t, j, v)
    return matrix
