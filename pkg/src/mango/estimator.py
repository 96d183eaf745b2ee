"""scikit-learn style front end for the continual learner.

ContinualMLPClassifier follows the estimator contract (get_params /
set_params, fit / partial_fit / predict), so the update rule composes
with sklearn pipelines and model-selection tooling. Each partial_fit
call is treated as one incoming stream mini-batch; ``new_task()`` marks a
task boundary (refreshes the drift anchor).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .buffer import ReplayBuffer
from .config import METHOD_FLAGS
from .model import ModelConfig, ParameterStore
from .optimizer import MangoConfig, MangoOptimizer


class ContinualMLPClassifier(BaseEstimator, ClassifierMixin):
    def __init__(self, hidden_dims=(32, 32), method="mango", eta=0.05,
                 eta_lambda=2e-3, momentum=0.9, glances=1, meta_every=3,
                 meta_batch=32, replay_batch=32, rho_init=-7.6,
                 buffer_capacity=200, batch_size=32, random_state=0):
        self.hidden_dims = hidden_dims
        self.method = method
        self.eta = eta
        self.eta_lambda = eta_lambda
        self.momentum = momentum
        self.glances = glances
        self.meta_every = meta_every
        self.meta_batch = meta_batch
        self.replay_batch = replay_batch
        self.rho_init = rho_init
        self.buffer_capacity = buffer_capacity
        self.batch_size = batch_size
        self.random_state = random_state

    def _setup(self, n_features, classes):
        if self.method not in METHOD_FLAGS:
            raise ValueError(f"unknown method {self.method!r}")
        self.classes_ = np.asarray(classes)
        self.n_features_in_ = n_features
        ss = np.random.SeedSequence(self.random_state)
        model_ss, buf_ss, sample_ss = ss.spawn(3)
        cfg = MangoConfig(
            eta=self.eta, eta_lambda=self.eta_lambda, momentum=self.momentum,
            glances=self.glances, meta_every=self.meta_every,
            meta_batch=self.meta_batch, replay_batch=self.replay_batch,
            rho_init=self.rho_init, **METHOD_FLAGS[self.method])
        self._store = ParameterStore(ModelConfig(
            input_dim=n_features, hidden_dims=list(self.hidden_dims),
            num_classes=len(self.classes_),
            seed=int(model_ss.generate_state(1)[0])))
        self._buffer = ReplayBuffer(self.buffer_capacity,
                                    rng=np.random.default_rng(buf_ss))
        self._opt = MangoOptimizer(self._store, cfg,
                                   sample_rng=np.random.default_rng(sample_ss))
        self._task_id = 0

    def _encode(self, y):
        lookup = {c: i for i, c in enumerate(self.classes_.tolist())}
        try:
            return np.array([lookup[v] for v in y], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"unseen class label {exc.args[0]!r}") from exc

    def partial_fit(self, X, y, classes=None):
        """One online update on a mini-batch. ``classes`` must be given on
        the first call (the full label space, as in sklearn's contract)."""
        X, y = check_X_y(X, y)
        if not hasattr(self, "_opt"):
            if classes is None:
                raise ValueError("classes must be provided on the first partial_fit")
            self._setup(X.shape[1], classes)
        self._opt.step(X, self._encode(y), self._buffer, task_id=self._task_id)
        return self

    def fit(self, X, y):
        """Single pass over (X, y) in mini-batches, as one task."""
        X, y = check_X_y(X, y)
        self._setup(X.shape[1], np.unique(y))
        enc = self._encode(y)
        for start in range(0, len(y), self.batch_size):
            xb = X[start:start + self.batch_size]
            yb = enc[start:start + self.batch_size]
            self._opt.step(xb, yb, self._buffer, task_id=self._task_id)
        self.new_task()
        return self

    def new_task(self):
        """Mark a task boundary: refresh the drift anchor."""
        self._check_fitted()
        self._store.snapshot_old()
        self._task_id += 1
        return self

    def _check_fitted(self):
        if not hasattr(self, "_opt"):
            raise NotFittedError("estimator has not been fitted yet")

    def decision_function(self, X):
        self._check_fitted()
        X = check_array(X)
        return self._store.predict_logits(X)

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[scores.argmax(axis=1)]

    def predict_proba(self, X):
        scores = self.decision_function(X)
        shifted = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    @property
    def stability_coefficients_(self):
        """Current per-group lambda values."""
        self._check_fitted()
        return self._opt.coeffs.lambdas.copy()
