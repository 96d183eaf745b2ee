"""MLP classifier with parameters partitioned into named layer groups.

Each linear layer (weight + bias) forms one group; the classifier head is
the last group. Groups map one-to-one onto the learned stability
coefficients. The store also carries the drift-anchor snapshot and the
momentum buffers used by the update rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T


@dataclass
class ModelConfig:
    input_dim: int
    hidden_dims: list
    num_classes: int
    seed: int = 0

    def __post_init__(self):
        self.hidden_dims = list(self.hidden_dims)
        dims = [self.input_dim, self.num_classes] + self.hidden_dims
        if any(d < 1 for d in dims):
            raise ValueError("all dimensions must be >= 1")


@dataclass
class ParameterGroup:
    name: str
    group_index: int
    tensors: list = field(default_factory=list)   # [(tensor_name, Tensor)]


class ParameterStore:
    """Grouped trainable parameters plus snapshot and momentum state."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        dims = [cfg.input_dim] + cfg.hidden_dims + [cfg.num_classes]
        self.groups = []
        for i in range(len(dims) - 1):
            fan_in, fan_out = dims[i], dims[i + 1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = T.Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            b = T.Tensor(np.zeros(fan_out))
            name = "head" if i == len(dims) - 2 else f"hidden{i}"
            self.groups.append(ParameterGroup(name, i, [("weight", w), ("bias", b)]))
        self.theta_old = [p.data.copy() for p in self.parameters()]
        self.momentum = [np.zeros_like(p.data) for p in self.parameters()]

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    def parameters(self):
        """All trainable tensors in a fixed order (groups, then w/b)."""
        return [t for g in self.groups for _, t in g.tensors]

    def group_of(self):
        """Group index for each entry of parameters()."""
        return [g.group_index for g in self.groups for _ in g.tensors]

    def snapshot_old(self) -> None:
        self.theta_old = [p.data.copy() for p in self.parameters()]

    # -- forward passes -------------------------------------------------

    def forward(self, x) -> T.Tensor:
        """Graph-building forward; returns logits [B, C]."""
        return self._forward(self.parameters(), x)

    def forward_at(self, param_arrays, x):
        """Forward at an alternate parameter image (e.g. a virtual update).

        Returns (logits, leaf tensors) so gradients can be read back per
        parameter after a backward pass.
        """
        leaves = [T.Tensor(a) for a in param_arrays]
        return self._forward(leaves, x), leaves

    def _forward(self, params, x) -> T.Tensor:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.cfg.input_dim:
            raise T.ShapeError(
                f"input must be [B, {self.cfg.input_dim}], got {x.shape}")
        h = T.Tensor(x)
        n_layers = len(params) // 2
        for i in range(n_layers):
            w, b = params[2 * i], params[2 * i + 1]
            h = T.add(T.matmul(h, w), b)
            if i < n_layers - 1:
                h = T.relu(h)
        return h

    def predict_logits(self, x) -> np.ndarray:
        """Graph-free forward for evaluation; never mutates state."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.cfg.input_dim:
            raise T.ShapeError(
                f"input must be [B, {self.cfg.input_dim}], got {x.shape}")
        params = self.parameters()
        h = x
        n_layers = len(params) // 2
        for i in range(n_layers):
            h = h @ params[2 * i].data + params[2 * i + 1].data
            if i < n_layers - 1:
                h = np.maximum(h, 0.0)
        return h

    def gradients(self):
        """Gradient array per parameter; zeros for untouched leaves."""
        return [np.zeros_like(p.data) if p.grad is None else p.grad
                for p in self.parameters()]


def init_model(cfg: ModelConfig) -> ParameterStore:
    return ParameterStore(cfg)


# -- checkpoint format --------------------------------------------------
#
# Plain text, stable across runs:
#   line 1:  "mango-checkpoint v1"
#   then per tensor, two lines:
#     "<group_name> <tensor_name> <d0> <d1> ..."
#     row-major values, space separated, printed with %.17g


def save_checkpoint(store: ParameterStore, path) -> None:
    with open(path, "w") as fh:
        fh.write("mango-checkpoint v1\n")
        for group in store.groups:
            for tname, t in group.tensors:
                dims = " ".join(str(d) for d in t.data.shape)
                fh.write(f"{group.name} {tname} {dims}\n")
                fh.write(" ".join(f"{v:.17g}" for v in t.data.ravel()) + "\n")


def load_checkpoint(store: ParameterStore, path) -> None:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "mango-checkpoint v1":
            raise ValueError(f"unrecognized checkpoint header: {header!r}")
        for group in store.groups:
            for tname, t in group.tensors:
                meta = fh.readline().split()
                if meta[:2] != [group.name, tname]:
                    raise ValueError(
                        f"checkpoint order mismatch: expected "
                        f"{group.name}/{tname}, got {meta[:2]}")
                shape = tuple(int(d) for d in meta[2:])
                if shape != t.data.shape:
                    raise ValueError(
                        f"shape mismatch for {group.name}/{tname}: "
                        f"{shape} vs {t.data.shape}")
                values = np.array([float(v) for v in fh.readline().split()])
                t.data = values.reshape(shape)
