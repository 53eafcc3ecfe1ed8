"""Gossip mixing matrices.

Agents are columns: a block of per-agent vectors is a ``d x n`` array and one
communication round is ``block @ W``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DimensionMismatch,
    DisconnectedGraph,
    DuplicateEdge,
    NotDoublyStochastic,
    SelfLoop,
)

_VALIDATION_TOL = 1e-10


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic weights with spectral quantity ``rho``.

    ``rho`` is ``max(|lambda_2|, |lambda_n|)``; it governs how fast repeated
    mixing drives columns to their mean.
    """

    weights: np.ndarray
    rho: float
    kind: str = "custom"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_weights(cls, weights, kind="custom"):
        w = np.asarray(weights, dtype=float)
        return cls(w, spectral_quantity(w), kind)

    def __repr__(self):
        return f"MixingMatrix(kind={self.kind!r}, n={self.n}, rho={self.rho:.6g})"


def _check_doubly_stochastic(w, tol=_VALIDATION_TOL):
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise NotDoublyStochastic(f"weights must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise NotDoublyStochastic("weights contain non-finite entries")
    if np.max(np.abs(w - w.T)) > tol:
        raise NotDoublyStochastic("weights are not symmetric")
    if np.min(w) < -tol:
        raise NotDoublyStochastic("weights have negative entries")
    if np.max(np.abs(w.sum(axis=0) - 1.0)) > tol or np.max(np.abs(w.sum(axis=1) - 1.0)) > tol:
        raise NotDoublyStochastic("row or column sums differ from 1")


def spectral_quantity(weights) -> float:
    """Largest eigenvalue magnitude after removing one copy of eigenvalue 1.

    A return value of 1 means the graph is disconnected (or the matrix is the
    identity) and the matrix cannot drive consensus.
    """
    w = np.asarray(weights, dtype=float)
    _check_doubly_stochastic(w)
    n = w.shape[0]
    if n == 1:
        return 0.0
    eig = np.linalg.eigvalsh(0.5 * (w + w.T))
    # eigvalsh returns ascending order; the trailing entry is the Perron eigenvalue 1
    rest = eig[:-1]
    return float(min(1.0, np.max(np.abs(rest))))


def build_complete(n: int) -> MixingMatrix:
    if n < 1:
        raise ValueError("n must be positive")
    return MixingMatrix(np.full((n, n), 1.0 / n), 0.0, "complete")


def build_ring(n: int) -> MixingMatrix:
    """Each agent averages itself and its two ring neighbours with weight 1/3."""
    if n < 1:
        raise ValueError("n must be positive")
    if n <= 2:
        m = build_complete(n)
        return MixingMatrix(m.weights, m.rho, "ring")
    w = np.zeros((n, n))
    third = 1.0 / 3.0
    for i in range(n):
        w[i, i] = third
        w[i, (i + 1) % n] = third
        w[i, (i - 1) % n] = third
    return MixingMatrix(w, spectral_quantity(w), "ring")


def _connected(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    components = n
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            components -= 1
    return components == 1


def build_metropolis(n: int, edges) -> MixingMatrix:
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_j))`` on an undirected graph."""
    if n < 1:
        raise ValueError("n must be positive")
    seen = set()
    clean = []
    for edge in edges:
        i, j = (int(v) for v in edge)
        if not (0 <= i < n and 0 <= j < n):
            raise DimensionMismatch(f"edge ({i}, {j}) references a vertex outside 0..{n - 1}")
        if i == j:
            raise SelfLoop(f"self loop at vertex {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed more than once")
        seen.add(key)
        clean.append(key)
    if not _connected(n, clean):
        raise DisconnectedGraph(f"edge list does not connect all {n} vertices")

    deg = np.zeros(n, dtype=int)
    for i, j in clean:
        deg[i] += 1
        deg[j] += 1
    w = np.zeros((n, n))
    for i, j in clean:
        w[i, j] = w[j, i] = 1.0 / (1 + max(deg[i], deg[j]))
    w[np.diag_indices(n)] = 1.0 - w.sum(axis=1)
    return MixingMatrix(w, spectral_quantity(w), "edges")


def build_topology(spec) -> MixingMatrix:
    """Construct a mixing matrix from a ``{"kind", "n", "edges"}`` mapping."""
    kind = spec.get("kind")
    n = int(spec["n"])
    if kind == "ring":
        return build_ring(n)
    if kind == "complete":
        return build_complete(n)
    if kind == "edges":
        return build_metropolis(n, spec.get("edges", []))
    raise ValueError(f"unknown topology kind {kind!r}")


def mix(block, W) -> np.ndarray:
    """One gossip round: column ``i`` of the result is ``sum_j w_ij block[:, j]``."""
    weights = W.weights if isinstance(W, MixingMatrix) else np.asarray(W)
    block = np.asarray(block)
    if block.ndim != 2 or block.shape[1] != weights.shape[0]:
        raise DimensionMismatch(
            f"block has shape {block.shape}, expected {weights.shape[0]} columns"
        )
    return block @ weights
