"""Fixed-capacity reservoir-sampled replay memory.

Every streamed item ends up in the buffer with equal probability M/N
regardless of arrival order. The buffer serves both rehearsal batches for
the training loss and the replay batches that drive the meta-objective.
"""

from __future__ import annotations

import numpy as np


class EmptyBufferError(RuntimeError):
    """Sampling from an empty buffer; callers skip the meta step instead."""


class ReplayBuffer:
    def __init__(self, capacity: int, seed: int = 0, rng=None):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        self.items = []            # (features, label, task_id)
        self.seen = 0
        self.rng = rng if rng is not None else np.random.default_rng(seed)

    def __len__(self):
        return len(self.items)

    def is_empty(self) -> bool:
        return not self.items

    def insert(self, features, label: int, task_id: int = -1) -> None:
        """Reservoir insert: keep the first M items, then replace a random
        slot with probability M/seen."""
        self.seen += 1
        if self.capacity == 0:
            return
        if len(self.items) < self.capacity:
            self.items.append((features, label, task_id))
        else:
            j = int(self.rng.integers(0, self.seen))
            if j < self.capacity:
                self.items[j] = (features, label, task_id)

    def sample(self, batch_size: int, rng):
        """Uniform sample with replacement; returns (X, y) arrays.

        With-replacement keeps the batch size constant even when the
        buffer holds fewer than batch_size items.
        """
        if not self.items:
            raise EmptyBufferError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self.items), size=batch_size)
        feats = np.stack([np.asarray(self.items[i][0], dtype=np.float64)
                          for i in idx])
        labels = np.array([self.items[i][1] for i in idx], dtype=np.int64)
        return feats, labels

    def clear(self) -> None:
        self.items = []
        self.seen = 0

    # -- debug dump: CSV rows "task_id,label,f1,...,fD" ------------------

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            for features, label, task_id in self.items:
                feats = ",".join(f"{v:.17g}" for v in np.asarray(features).ravel())
                fh.write(f"{task_id},{label},{feats}\n")
