"""Scikit-learn style wrappers around the DSGDA-GT solver.

``DSGDAGT`` fits any :class:`~dsbo.problems.BilevelProblem`; the classifier
wraps the logistic hyperparameter problem so that plain ``(X, y)`` data can be
split across simulated agents and fitted in one call.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dsgda import HyperParams, run, schedule
from .exceptions import DimensionMismatch
from .problems import Dataset, LogisticHyperopt
from .topology import build_topology


def _mixing(topology, n, edges):
    return build_topology({"kind": topology, "n": n, "edges": edges or []})


class DSGDAGT(BaseEstimator):
    """Solver estimator; ``fit(problem)`` runs warm start plus ``n_outer`` outer steps.

    With ``step_mode="scheduled"`` the ``alpha``/``eta_*`` values are read as
    multipliers of the ``(n, S, rho)`` schedule instead of absolute values.
    """

    def __init__(self, topology="ring", edges=None, alpha=1.0, eta_x=0.03, eta_y=0.03, eta_z=0.03,
                 step_mode="manual", n_outer=100, inner_steps=1, batch_size=1, warmup_iters=None,
                 delta_at="pre", cadence=1, random_state=0):
        self.topology = topology
        self.edges = edges
        self.alpha = alpha
        self.eta_x = eta_x
        self.eta_y = eta_y
        self.eta_z = eta_z
        self.step_mode = step_mode
        self.n_outer = n_outer
        self.inner_steps = inner_steps
        self.batch_size = batch_size
        self.warmup_iters = warmup_iters
        self.delta_at = delta_at
        self.cadence = cadence
        self.random_state = random_state

    def _hyperparams(self, W):
        if self.step_mode == "scheduled":
            alpha, ex, ey, ez = schedule(W.n, max(self.n_outer, 1), W.rho,
                                         self.alpha, self.eta_x, self.eta_y, self.eta_z)
        elif self.step_mode == "manual":
            alpha, ex, ey, ez = self.alpha, self.eta_x, self.eta_y, self.eta_z
        else:
            raise ValueError(f"step_mode must be 'manual' or 'scheduled', got {self.step_mode!r}")
        seed = 0 if self.random_state is None else int(self.random_state)
        return HyperParams(alpha, ex, ey, ez, S=self.n_outer, T=self.inner_steps,
                           batch_size=self.batch_size, warmup_iters=self.warmup_iters,
                           master_seed=seed, delta_at=self.delta_at)

    def fit(self, problem, x0=None, y0=None, z0=None):
        W = _mixing(self.topology, problem.n_agents, self.edges)
        hp = self._hyperparams(W)
        result = run(problem, W, hp, cadence=self.cadence, x0=x0, y0=y0, z0=z0)
        self.mixing_ = W
        self.hyperparams_ = hp
        self.state_ = result.state
        self.trace_ = result.trace
        self.x_ = result.state.X.mean(axis=1)
        self.y_ = result.state.Y.mean(axis=1)
        self.z_ = result.state.Z.mean(axis=1)
        return self


class DecentralizedHyperoptClassifier(ClassifierMixin, BaseEstimator):
    """Logistic regression whose per-feature regularisation is tuned by DSGDA-GT.

    Rows are dealt to ``n_agents`` agents (or grouped by ``groups``); each
    agent holds out ``val_fraction`` of its rows as validation data.  Two
    classes use the binary model, more use the softmax model.  ``lambda_`` is
    the learned log-regularisation vector and ``coef_`` the model weights.
    """

    def __init__(self, n_agents=8, topology="ring", val_fraction=0.5, alpha=1.0, eta=0.03,
                 n_outer=500, batch_size=32, warmup_iters=None, random_state=0):
        self.n_agents = n_agents
        self.topology = topology
        self.val_fraction = val_fraction
        self.alpha = alpha
        self.eta = eta
        self.n_outer = n_outer
        self.batch_size = batch_size
        self.warmup_iters = warmup_iters
        self.random_state = random_state

    def _split(self, X, codes, groups, rng):
        if groups is None:
            order = rng.permutation(len(X))
            parts = np.array_split(order, self.n_agents)
        else:
            groups = np.asarray(groups)
            if groups.shape != (len(X),):
                raise DimensionMismatch("groups must hold one entry per row")
            parts = [rng.permutation(np.flatnonzero(groups == g)) for g in np.unique(groups)]
        train, val = [], []
        for i, idx in enumerate(parts):
            n_val = int(round(self.val_fraction * len(idx)))
            if n_val < 1 or n_val >= len(idx):
                raise ValueError(f"agent {i} has {len(idx)} rows; too few for a train/val split")
            val.append(Dataset(X[idx[:n_val]], codes[idx[:n_val]], "val", i))
            train.append(Dataset(X[idx[n_val:]], codes[idx[n_val:]], "train", i))
        return train, val

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        self.classes_, codes = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        binary = len(self.classes_) == 2
        if binary:
            codes = np.where(codes == 1, 1, -1)
        rng = np.random.default_rng(self.random_state)
        train, val = self._split(X, codes, groups, rng)
        problem = LogisticHyperopt(train, val, mode="binary" if binary else "multiclass",
                                   n_classes=None if binary else len(self.classes_))
        solver = DSGDAGT(topology=self.topology, alpha=self.alpha, eta_x=self.eta, eta_y=self.eta,
                         eta_z=self.eta, n_outer=self.n_outer, batch_size=self.batch_size,
                         warmup_iters=self.warmup_iters,
                         random_state=0 if self.random_state is None else self.random_state)
        solver.fit(problem)
        self.problem_ = problem
        self.solver_ = solver
        self.lambda_ = solver.x_
        self.coef_ = solver.y_ if binary else solver.y_.reshape(len(self.classes_), X.shape[1])
        self.trace_ = solver.trace_
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.problem_.decision_function(X, self.solver_.y_)

    def predict_proba(self, X):
        scores = self.decision_function(X)
        if scores.ndim == 1:
            p = expit(scores)
            return np.column_stack([1.0 - p, p])
        return softmax(scores, axis=1)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]
