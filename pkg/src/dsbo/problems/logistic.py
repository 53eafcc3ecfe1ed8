"""Decentralized hyperparameter optimisation for regularised logistic regression.

Upper variable ``x`` holds log-regularisation weights ``lambda`` (one per
feature), lower variable ``y`` holds model weights ``omega``.

* binary: ``f_i`` is the mean logistic loss ``log(1 + exp(-y_e x_e'omega))``
  on agent ``i``'s validation split; ``g_i`` is the same loss on the training
  split plus ``1/2 sum_j exp(lambda_j) omega_j^2``.
* multiclass: cross-entropy with ``omega`` a ``c x d`` matrix (flattened
  row-major) and regulariser ``1/(c d) sum_ij exp(lambda_j) omega_ij^2``.

Sample descriptors are integer index arrays into the relevant split.  Batch
gradients are means of per-sample gradients; the regulariser is not sampled.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, log_softmax, softmax

from ..exceptions import (
    BadBatchSize,
    CapabilityMissing,
    DimensionMismatch,
    IndexOutOfRange,
)
from ..oracle import sample_batch_from
from .base import BilevelProblem
from .data import Dataset, generate_synthetic


class LogisticHyperopt(BilevelProblem):
    def __init__(self, train, val, test=None, mode="binary", n_classes=None):
        if not (len(train) == len(val) and len(train) >= 1):
            raise DimensionMismatch("need one train and one val dataset per agent")
        if test is not None and len(test) != len(train):
            raise DimensionMismatch("need one test dataset per agent")
        if mode not in ("binary", "multiclass"):
            raise ValueError(f"unknown mode {mode!r}")
        self.train, self.val = list(train), list(val)
        self.test = list(test) if test is not None else None
        self.mode = mode
        self.n_agents = len(self.train)
        self.d = self.train[0].d
        for ds in self.train + self.val + (self.test or []):
            if ds.d != self.d:
                raise DimensionMismatch("all datasets must share the feature dimension")
        if mode == "binary":
            for ds in self.train + self.val + (self.test or []):
                if not np.all(np.isin(ds.labels, (-1, 1))):
                    raise ValueError("binary labels must be -1 or +1")
            self.n_classes = 2
            self.q = self.d
        else:
            if n_classes is None:
                n_classes = int(max(ds.labels.max() for ds in self.train + self.val)) + 1
            self.n_classes = int(n_classes)
            for ds in self.train + self.val + (self.test or []):
                if ds.labels.min() < 0 or ds.labels.max() >= self.n_classes:
                    raise ValueError(f"multiclass labels must lie in 0..{self.n_classes - 1}")
            self.q = self.n_classes * self.d
        self.p = self.d
        self.has_test_data = self.test is not None

    # -- data-term kernels ----------------------------------------------
    def _rows(self, ds, sample):
        if sample is None:
            return ds.features, ds.labels
        idx = np.asarray(sample, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise BadBatchSize("sample must be a nonempty 1-d index array")
        if idx.min() < 0 or idx.max() >= len(ds):
            raise IndexOutOfRange(f"sample index outside 0..{len(ds) - 1}")
        return ds.features[idx], ds.labels[idx]

    def _data_loss(self, X, labels, w):
        if self.mode == "binary":
            return float(np.mean(np.logaddexp(0.0, -labels * (X @ w))))
        W = w.reshape(self.n_classes, self.d)
        logp = log_softmax(X @ W.T, axis=1)
        return float(-np.mean(logp[np.arange(len(labels)), labels]))

    def _data_grad(self, X, labels, w):
        if self.mode == "binary":
            margins = labels * (X @ w)
            # d/dm log(1 + e^{-m}) = -sigmoid(-m)
            coef = -expit(-margins) * labels
            return X.T @ coef / len(labels)
        W = w.reshape(self.n_classes, self.d)
        P = softmax(X @ W.T, axis=1)
        P[np.arange(len(labels)), labels] -= 1.0
        return (P.T @ X / len(labels)).ravel()

    # -- regulariser ----------------------------------------------------
    def _reg(self, lam, w):
        if self.mode == "binary":
            return 0.5 * float(np.exp(lam) @ (w * w))
        W = w.reshape(self.n_classes, self.d)
        return float(np.sum(np.exp(lam)[None, :] * W * W)) / (self.n_classes * self.d)

    def _reg_grad_w(self, lam, w):
        if self.mode == "binary":
            return np.exp(lam) * w
        W = w.reshape(self.n_classes, self.d)
        return (2.0 / (self.n_classes * self.d) * np.exp(lam)[None, :] * W).ravel()

    def _reg_grad_lam(self, lam, w):
        if self.mode == "binary":
            return 0.5 * np.exp(lam) * w * w
        W = w.reshape(self.n_classes, self.d)
        return np.exp(lam) * np.sum(W * W, axis=0) / (self.n_classes * self.d)

    # -- oracles --------------------------------------------------------
    def upper_loss(self, i, x, y):
        x, y = self._check_xy(i, x, y)
        ds = self.val[i]
        return self._data_loss(ds.features, ds.labels, y)

    def lower_loss(self, i, x, y):
        x, y = self._check_xy(i, x, y)
        ds = self.train[i]
        return self._data_loss(ds.features, ds.labels, y) + self._reg(x, y)

    def grad_x_f(self, i, x, y, sample=None):
        x, y = self._check_xy(i, x, y)
        if sample is not None:
            self._rows(self.val[i], sample)
        return np.zeros(self.p)

    def grad_y_f(self, i, x, y, sample=None):
        x, y = self._check_xy(i, x, y)
        X, labels = self._rows(self.val[i], sample)
        return self._data_grad(X, labels, y)

    def grad_x_g(self, i, x, y, sample=None):
        x, y = self._check_xy(i, x, y)
        if sample is not None:
            self._rows(self.train[i], sample)
        return self._reg_grad_lam(x, y)

    def grad_y_g(self, i, x, y, sample=None):
        x, y = self._check_xy(i, x, y)
        X, labels = self._rows(self.train[i], sample)
        return self._data_grad(X, labels, y) + self._reg_grad_w(x, y)

    def sample_upper(self, rng, i, batch_size):
        return sample_batch_from(rng, len(self.val[i]), batch_size)

    def sample_lower(self, rng, i, batch_size):
        return sample_batch_from(rng, len(self.train[i]), batch_size)

    # -- evaluation -----------------------------------------------------
    def decision_function(self, X, y):
        X = np.asarray(X, dtype=float)
        if self.mode == "binary":
            return X @ y
        return X @ y.reshape(self.n_classes, self.d).T

    def predict(self, X, y):
        scores = self.decision_function(X, y)
        if self.mode == "binary":
            return np.where(scores > 0, 1, -1)
        return np.argmax(scores, axis=1)

    def test_accuracy(self, y):
        """Accuracy of model weights ``y`` on the pooled test splits of all agents."""
        if self.test is None:
            raise CapabilityMissing("problem was built without test data")
        X = np.vstack([ds.features for ds in self.test])
        labels = np.concatenate([ds.labels for ds in self.test])
        return float(np.mean(self.predict(X, np.asarray(y, dtype=float)) == labels))


def synthetic_problem(seed, n_agents, d, samples=(500, 500, 200), noise=0.1, true_w=None):
    splits = generate_synthetic(seed, n_agents, d, samples, true_w, noise)
    train, val, test = zip(*splits)
    return LogisticHyperopt(train, val, test, mode="binary")


def partition_among_agents(pool, n_agents, sizes, seed, test_pool=None):
    """Shuffle a pooled dataset and deal disjoint train/val(/test) splits to agents.

    ``sizes`` is ``(train, val, test)`` per agent.  Test rows come from
    ``test_pool`` when given, otherwise from ``pool`` after train and val.
    """
    n_train, n_val, n_test = sizes
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(pool))
    need = n_agents * (n_train + n_val + (0 if test_pool is not None else n_test))
    if need > len(pool):
        raise ValueError(f"pool has {len(pool)} rows, {need} requested")
    if test_pool is not None:
        test_order = rng.permutation(len(test_pool))
        if n_agents * n_test > len(test_pool):
            raise ValueError(f"test pool has {len(test_pool)} rows, {n_agents * n_test} requested")

    def take(src, idx, split, agent):
        return Dataset(src.features[idx], src.labels[idx], split, agent)

    train, val, test = [], [], []
    pos = 0
    for i in range(n_agents):
        train.append(take(pool, order[pos:pos + n_train], "train", i))
        pos += n_train
        val.append(take(pool, order[pos:pos + n_val], "val", i))
        pos += n_val
        if test_pool is None:
            test.append(take(pool, order[pos:pos + n_test], "test", i))
            pos += n_test
        else:
            test.append(take(test_pool, test_order[i * n_test:(i + 1) * n_test], "test", i))
    return train, val, test


def mnist_problem(train_pool, n_agents, sizes=(500, 500, 200), seed=0, test_pool=None, n_classes=10):
    train, val, test = partition_among_agents(train_pool, n_agents, sizes, seed, test_pool)
    return LogisticHyperopt(train, val, test, mode="multiclass", n_classes=n_classes)
