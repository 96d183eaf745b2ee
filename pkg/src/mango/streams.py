"""Deterministic synthetic task streams for class- and domain-incremental
training, plus a delimited-text ingestion path for external data.

Class-incremental (cil): each task introduces classes_per_task fresh
Gaussian blobs whose means sit on a seeded sphere in R^D, far apart
relative to the noise scale. Domain-incremental (dil): a fixed label set
whose blobs rotate in a fixed 2-plane and drift by a mean shift as tasks
advance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MEAN_RADIUS = 2.0          # class means live on a sphere of this radius
TRAIN_FRACTION = 0.8


class StreamFormatError(ValueError):
    """Malformed stream file; message names the offending line."""


@dataclass
class Task:
    task_id: int
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    classes_present: frozenset


@dataclass
class StreamSpec:
    kind: str                      # cil | dil | file
    num_tasks: int = 5
    classes_per_task: int = 2      # cil only
    num_classes: int = 5           # dil only
    samples_per_task: int = 625    # per task, before the 80/20 split
    input_dim: int = 16
    noise_scale: float = 0.1
    domain_delta: float = 0.0      # dil: rotation per task, radians
    domain_shift: float = 0.0      # dil: mean drift per task
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("cil", "dil", "file"):
            raise ValueError(f"unknown stream kind {self.kind!r}")
        if self.kind != "file":
            if self.num_tasks < 2:
                raise ValueError("num_tasks must be >= 2")
            if self.samples_per_task < 5:
                raise ValueError("samples_per_task too small to split")


def _class_means(num_classes: int, input_dim: int, rng) -> np.ndarray:
    """Seeded points on a sphere; nearly orthogonal in moderate dim, so
    blobs are linearly separable at small noise scales."""
    raw = rng.standard_normal((num_classes, input_dim))
    return MEAN_RADIUS * raw / np.linalg.norm(raw, axis=1, keepdims=True)


def _split(x, y, rng):
    n = len(y)
    n_train = int(round(TRAIN_FRACTION * n))
    perm = rng.permutation(n)
    tr, te = perm[:n_train], perm[n_train:]
    return x[tr], y[tr], x[te], y[te]


def make_cil_stream(spec: StreamSpec):
    if spec.kind != "cil":
        raise ValueError("spec.kind must be 'cil'")
    rng = np.random.default_rng(spec.seed)
    total_classes = spec.num_tasks * spec.classes_per_task
    means = _class_means(total_classes, spec.input_dim, rng)
    tasks = []
    for t in range(spec.num_tasks):
        classes = list(range(t * spec.classes_per_task,
                             (t + 1) * spec.classes_per_task))
        labels = rng.choice(classes, size=spec.samples_per_task)
        x = means[labels] + spec.noise_scale * rng.standard_normal(
            (spec.samples_per_task, spec.input_dim))
        tr_x, tr_y, te_x, te_y = _split(x, labels.astype(np.int64), rng)
        tasks.append(Task(t, tr_x, tr_y, te_x, te_y, frozenset(classes)))
    return tasks


def make_dil_stream(spec: StreamSpec):
    if spec.kind != "dil":
        raise ValueError("spec.kind must be 'dil'")
    rng = np.random.default_rng(spec.seed)
    means = _class_means(spec.num_classes, spec.input_dim, rng)
    shift_dir = rng.standard_normal(spec.input_dim)
    shift_dir /= np.linalg.norm(shift_dir)
    classes = frozenset(range(spec.num_classes))
    tasks = []
    for t in range(spec.num_tasks):
        labels = rng.choice(spec.num_classes, size=spec.samples_per_task)
        x = means[labels] + spec.noise_scale * rng.standard_normal(
            (spec.samples_per_task, spec.input_dim))
        x = _domain_transform(x, t, spec)
        x = x + (t * spec.domain_shift) * shift_dir
        tr_x, tr_y, te_x, te_y = _split(x, labels.astype(np.int64), rng)
        tasks.append(Task(t, tr_x, tr_y, te_x, te_y, classes))
    return tasks


def _domain_transform(x: np.ndarray, t: int, spec: StreamSpec) -> np.ndarray:
    """Rotate by t * domain_delta in the plane of the first two axes.
    Task 0 is always the identity."""
    angle = t * spec.domain_delta
    if angle == 0.0:
        return x
    out = x.copy()
    c, s = np.cos(angle), np.sin(angle)
    out[:, 0] = c * x[:, 0] - s * x[:, 1]
    out[:, 1] = s * x[:, 0] + c * x[:, 1]
    return out


def make_stream(spec: StreamSpec):
    if spec.kind == "cil":
        return make_cil_stream(spec)
    if spec.kind == "dil":
        return make_dil_stream(spec)
    raise ValueError("file streams are loaded with load_file_stream")


# -- file format --------------------------------------------------------
#
#   # stream tasks=<T> dim=<D>
#   task_id,split,label,f1,...,fD        (split in {train,test})
# Task ids must be contiguous from 0.


def save_stream(tasks, path) -> None:
    dim = tasks[0].train_x.shape[1]
    with open(path, "w") as fh:
        fh.write(f"# stream tasks={len(tasks)} dim={dim}\n")
        for task in tasks:
            for split, xs, ys in (("train", task.train_x, task.train_y),
                                  ("test", task.test_x, task.test_y)):
                for row, label in zip(xs, ys):
                    feats = ",".join(f"{v:.17g}" for v in row)
                    fh.write(f"{task.task_id},{split},{int(label)},{feats}\n")


def load_file_stream(path):
    rows = {}   # task_id -> {"train": [...], "test": [...]}
    dim = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 4:
                raise StreamFormatError(f"line {lineno}: expected at least 4 fields")
            try:
                task_id = int(parts[0])
                label = int(parts[2])
                feats = [float(v) for v in parts[3:]]
            except ValueError as exc:
                raise StreamFormatError(f"line {lineno}: {exc}") from exc
            split = parts[1]
            if split not in ("train", "test"):
                raise StreamFormatError(
                    f"line {lineno}: split must be train or test, got {split!r}")
            if dim is None:
                dim = len(feats)
            elif len(feats) != dim:
                raise StreamFormatError(
                    f"line {lineno}: expected {dim} features, got {len(feats)}")
            rows.setdefault(task_id, {"train": [], "test": []})
            rows[task_id][split].append((feats, label))
    if not rows:
        raise StreamFormatError("no data rows in stream file")
    ids = sorted(rows)
    if ids != list(range(len(ids))):
        raise StreamFormatError(f"task ids not contiguous from 0: {ids}")
    tasks = []
    for task_id in ids:
        task = rows[task_id]
        tr = task["train"]
        te = task["test"]
        tr_x = np.array([f for f, _ in tr], dtype=np.float64).reshape(len(tr), dim)
        tr_y = np.array([l for _, l in tr], dtype=np.int64)
        te_x = np.array([f for f, _ in te], dtype=np.float64).reshape(len(te), dim)
        te_y = np.array([l for _, l in te], dtype=np.int64)
        present = frozenset(int(l) for l in tr_y) | frozenset(int(l) for l in te_y)
        tasks.append(Task(task_id, tr_x, tr_y, te_x, te_y, present))
    return tasks


def minibatch_iter(task: Task, batch_size: int, seed: int):
    """One deterministic shuffle, then contiguous batches. Every training
    example is emitted exactly once; the final batch may be short."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = len(task.train_y)
    if n == 0:
        raise ValueError(f"task {task.task_id} has no training data")
    perm = np.random.default_rng(seed).permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        yield task.train_x[idx], task.train_y[idx]
