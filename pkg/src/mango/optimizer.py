"""The gated, meta-regularized online update rule.

Per incoming mini-batch (repeated over g glances):

  1. training loss = CE on the stream batch (optionally concatenated with
     a rehearsal batch) + sum_i (lambda_i / 2) ||theta_i - theta_i_old||^2
  2. per-parameter gradient gating: g~_j = g_j * sigmoid(theta_j / std_l)
  3. every meta_every batches, a virtual step theta' = theta - eta * g~ is
     scored by replay CE; its closed-form hypergradient adapts the
     per-group stability coefficients lambda_i = exp(rho_i)
  4. momentum SGD applies the gated gradient to the live parameters

The coefficients live in log space, so they stay positive without any
constrained optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor as T
from .buffer import ReplayBuffer
from .model import ParameterStore

GATE_STD_FLOOR = 1e-8


@dataclass
class MangoConfig:
    eta: float = 0.05              # model learning rate
    eta_lambda: float = 2e-3       # stability-coefficient learning rate
    momentum: float = 0.9
    glances: int = 3
    meta_every: int = 3            # meta step every k incoming batches
    meta_batch: int = 32
    replay_batch: int = 32
    rho_init: float = -7.6         # lambda_init = exp(-7.6) ~ 5e-4
    replay_in_train: bool = True
    gate_enabled: bool = True
    reg_enabled: bool = True
    meta_enabled: bool = True
    lambda_optimizer: str = "adam"  # "adam" or "sgd"

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.eta_lambda < 0:
            raise ValueError("eta_lambda must be >= 0")
        if self.glances < 1:
            raise ValueError("glances must be >= 1")
        if self.meta_every < 1:
            raise ValueError("meta_every must be >= 1")
        if self.lambda_optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown lambda optimizer {self.lambda_optimizer!r}")


class StabilityCoefficients:
    """Per-group coefficients rho_i with lambda_i = exp(rho_i), plus the
    Adam state used to adapt them."""

    ADAM_BETA1 = 0.9
    ADAM_BETA2 = 0.999
    ADAM_EPS = 1e-8

    def __init__(self, num_groups: int, rho_init: float, eta_lambda: float,
                 optimizer: str = "adam"):
        self.rho = np.full(num_groups, float(rho_init))
        self.eta_lambda = eta_lambda
        self.optimizer = optimizer
        self.m = np.zeros(num_groups)
        self.v = np.zeros(num_groups)
        self.t = 0

    @property
    def lambdas(self) -> np.ndarray:
        return np.exp(self.rho)

    def update(self, grad_rho: np.ndarray) -> None:
        """One optimizer step on rho."""
        if self.optimizer == "sgd":
            self.rho = self.rho - self.eta_lambda * grad_rho
            return
        self.t += 1
        self.m = self.ADAM_BETA1 * self.m + (1 - self.ADAM_BETA1) * grad_rho
        self.v = self.ADAM_BETA2 * self.v + (1 - self.ADAM_BETA2) * grad_rho ** 2
        m_hat = self.m / (1 - self.ADAM_BETA1 ** self.t)
        v_hat = self.v / (1 - self.ADAM_BETA2 ** self.t)
        self.rho = self.rho - self.eta_lambda * m_hat / (np.sqrt(v_hat) + self.ADAM_EPS)


@dataclass
class StepDiagnostics:
    train_loss: float
    meta_loss: Optional[float]
    lambda_values: np.ndarray
    gate_mean: np.ndarray
    gate_min: np.ndarray
    gate_max: np.ndarray
    harmful_fraction_raw: Optional[float] = None
    harmful_fraction_gated: Optional[float] = None


# -- the individual pieces, exposed for direct testing -------------------


def train_loss(store: ParameterStore, lambdas, batch, replay_batch=None,
               reg_enabled: bool = True) -> T.Tensor:
    """CE on the (possibly replay-augmented) batch plus quadratic drift
    penalties weighted by the per-group coefficients."""
    xb, yb = batch
    if replay_batch is not None:
        xr, yr = replay_batch
        xb = np.concatenate([np.asarray(xb, dtype=np.float64),
                             np.asarray(xr, dtype=np.float64)])
        yb = np.concatenate([np.asarray(yb, dtype=np.int64),
                             np.asarray(yr, dtype=np.int64)])
    logits = store.forward(xb)
    loss = T.cross_entropy(logits, yb)
    if reg_enabled:
        group_of = store.group_of()
        for p, old, gi in zip(store.parameters(), store.theta_old, group_of):
            lam = float(lambdas[gi])
            if lam == 0.0:
                continue
            drift = T.sub(p, T.Tensor(old))
            loss = T.add(loss, T.mul(T.Tensor(lam / 2.0), T.tsum(T.mul(drift, drift))))
    return loss


def gate_values(theta: np.ndarray) -> np.ndarray:
    """sigmoid(theta_j / std(theta)) with an epsilon floor on the std."""
    std = max(T.std_population(theta), GATE_STD_FLOOR)
    return T.sigmoid_values(np.asarray(theta, dtype=np.float64) / std)


def compute_gate(store: ParameterStore):
    """Per-tensor gate arrays; each tensor is normalized by its own
    population std. Constants w.r.t. autodiff."""
    return [gate_values(p.data) for p in store.parameters()]


def gated_gradient(grads, gates):
    out = []
    for g, gate in zip(grads, gates):
        if g.shape != gate.shape:
            raise T.ShapeError(f"gradient/gate shape mismatch: {g.shape} vs {gate.shape}")
        out.append(g * gate)
    return out


def virtual_update(store: ParameterStore, gated_grads, eta: float):
    """Non-destructive trial image theta' = theta - eta * g~."""
    return [p.data - eta * g for p, g in zip(store.parameters(), gated_grads)]


def meta_loss(store: ParameterStore, theta_prime, mem_batch) -> T.Tensor:
    """Plain replay CE evaluated at the virtual parameters."""
    xm, ym = mem_batch
    if len(np.asarray(ym)) == 0:
        raise T.ShapeError("empty replay batch")
    logits, _ = store.forward_at(theta_prime, xm)
    return T.cross_entropy(logits, ym)


def meta_loss_and_grad(store: ParameterStore, theta_prime, mem_batch):
    """Replay CE at theta' and its gradient w.r.t. each theta' tensor."""
    xm, ym = mem_batch
    if len(np.asarray(ym)) == 0:
        raise T.ShapeError("empty replay batch")
    logits, leaves = store.forward_at(theta_prime, xm)
    loss = T.cross_entropy(logits, ym)
    T.backward(loss)
    grads = [np.zeros_like(l.data) if l.grad is None else l.grad for l in leaves]
    return float(loss.data), grads


def lambda_meta_gradient(store: ParameterStore, gates, grad_meta, eta: float,
                         lambdas) -> np.ndarray:
    """Closed-form hypergradient of the replay loss w.r.t. rho.

    theta'_j depends on lambda_i only through the drift-penalty gradient
    lambda_i (theta_j - theta_old_j), scaled by the (lambda-free) gate:
        d theta'_j / d lambda_i = -eta * gate_j * (theta_j - theta_old_j)
    so per group
        dL/d lambda_i = -eta * sum_j gate_j (theta_j - theta_old_j) gmeta_j
    and in log space dL/d rho_i = lambda_i * dL/d lambda_i.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    grad_lambda = np.zeros(store.num_groups)
    group_of = store.group_of()
    for p, old, gate, gm, gi in zip(store.parameters(), store.theta_old,
                                    gates, grad_meta, group_of):
        grad_lambda[gi] += -eta * float(np.sum(gate * (p.data - old) * gm))
    return lambdas * grad_lambda


def apply_update(store: ParameterStore, gated_grads, eta: float,
                 momentum: float) -> None:
    """Momentum SGD on the gated gradient: v <- mu v + g~; theta -= eta v."""
    for i, (p, g) in enumerate(zip(store.parameters(), gated_grads)):
        store.momentum[i] = momentum * store.momentum[i] + g
        p.data = p.data - eta * store.momentum[i]


def harmful_fraction(updates, past_grads) -> float:
    """Fraction of coordinates where the applied update increases the
    past loss (positive inner product), over coordinates where the
    product is nonzero. Diagnostic only."""
    positive = 0
    nonzero = 0
    for du, pg in zip(updates, past_grads):
        if du.shape != pg.shape:
            raise T.ShapeError(f"shape mismatch: {du.shape} vs {pg.shape}")
        prod = du * pg
        positive += int(np.count_nonzero(prod > 0))
        nonzero += int(np.count_nonzero(prod != 0))
    return positive / nonzero if nonzero else 0.0


# -- the full per-batch step --------------------------------------------


class MangoOptimizer:
    """Owns the stability coefficients and the per-batch training step.

    sample_rng drives replay/meta draws; the buffer owns its own insert
    rng, so ablations that never sample leave the insert stream intact.
    """

    def __init__(self, store: ParameterStore, cfg: MangoConfig, sample_rng=None):
        self.store = store
        self.cfg = cfg
        self.coeffs = StabilityCoefficients(
            store.num_groups, cfg.rho_init, cfg.eta_lambda, cfg.lambda_optimizer)
        self.sample_rng = sample_rng if sample_rng is not None \
            else np.random.default_rng(0)
        self.batch_counter = 0

    def step(self, xb, yb, buffer: ReplayBuffer, task_id: int = -1) -> StepDiagnostics:
        cfg = self.cfg
        self.batch_counter += 1
        meta_due = cfg.meta_enabled and self.batch_counter % cfg.meta_every == 0

        last_loss = 0.0
        meta_loss_value = None
        harmful_raw = None
        harmful_gated = None
        gates = None

        for glance in range(cfg.glances):
            replay = None
            if cfg.replay_in_train and not buffer.is_empty():
                replay = buffer.sample(cfg.replay_batch, self.sample_rng)
            lambdas = self.coeffs.lambdas if cfg.reg_enabled \
                else np.zeros(self.store.num_groups)
            loss = train_loss(self.store, lambdas, (xb, yb), replay,
                              reg_enabled=cfg.reg_enabled)
            T.backward(loss)
            last_loss = float(loss.data)
            grads = self.store.gradients()

            if cfg.gate_enabled:
                gates = compute_gate(self.store)
                gt = gated_gradient(grads, gates)
            else:
                gates = [np.ones_like(g) for g in grads]
                gt = grads

            # Meta step once per qualifying batch, on the first glance,
            # and only when the buffer has content (skip rule).
            if meta_due and glance == 0 and not buffer.is_empty():
                theta_prime = virtual_update(self.store, gt, cfg.eta)
                mem = buffer.sample(cfg.meta_batch, self.sample_rng)
                meta_loss_value, grad_meta = meta_loss_and_grad(
                    self.store, theta_prime, mem)
                grad_rho = lambda_meta_gradient(
                    self.store, gates, grad_meta, cfg.eta, self.coeffs.lambdas)
                self.coeffs.update(grad_rho)
                # Harmful-update diagnostics against the replay loss at theta.
                _, past_grads = meta_loss_and_grad(
                    self.store, [p.data for p in self.store.parameters()], mem)
                raw_step = [-cfg.eta * g for g in grads]
                gated_step = [-cfg.eta * g for g in gt]
                harmful_raw = harmful_fraction(raw_step, past_grads)
                harmful_gated = harmful_fraction(gated_step, past_grads)

            apply_update(self.store, gt, cfg.eta, cfg.momentum)

        # Reservoir insert once per incoming example, after the last glance.
        for row, label in zip(np.asarray(xb, dtype=np.float64),
                              np.asarray(yb, dtype=np.int64)):
            buffer.insert(row.copy(), int(label), task_id)

        group_of = self.store.group_of()
        g_mean = np.zeros(self.store.num_groups)
        g_min = np.full(self.store.num_groups, np.inf)
        g_max = np.full(self.store.num_groups, -np.inf)
        counts = np.zeros(self.store.num_groups)
        for gate, gi in zip(gates, group_of):
            g_mean[gi] += gate.sum()
            counts[gi] += gate.size
            g_min[gi] = min(g_min[gi], gate.min())
            g_max[gi] = max(g_max[gi], gate.max())
        g_mean /= counts

        return StepDiagnostics(
            train_loss=last_loss,
            meta_loss=meta_loss_value,
            lambda_values=self.coeffs.lambdas.copy(),
            gate_mean=g_mean, gate_min=g_min, gate_max=g_max,
            harmful_fraction_raw=harmful_raw,
            harmful_fraction_gated=harmful_gated,
        )
