"""Keyed random streams, batch sampling and the penalty-gradient oracle.

Every random draw in a run comes from a generator keyed by
``(master_seed, role, agent, s, t)``.  Streams for distinct keys are
independent and a key always reproduces the same stream, so results do not
depend on evaluation order or on how per-agent work is scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BadBatchSize, DimensionMismatch

ROLES = {
    "y_upper": 1,
    "y_lower": 2,
    "z_lower": 3,
    "delta_upper": 4,
    "delta_lower": 5,
    "warm_y_upper": 6,
    "warm_y_lower": 7,
    "warm_z_lower": 8,
    "init": 9,
    "batch": 10,
}


@dataclass(frozen=True)
class RngPlan:
    master_seed: int

    def generator(self, role, agent=0, s=0, t=0) -> np.random.Generator:
        tag = ROLES[role] if isinstance(role, str) else int(role)
        key = [int(self.master_seed), tag, int(agent), int(s), int(t)]
        if min(key) < 0:
            raise ValueError(f"stream key entries must be nonnegative, got {key}")
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def sample_batch_from(rng, dataset_size, batch_size):
    """``batch_size`` indices drawn uniformly with replacement."""
    if not 1 <= batch_size <= dataset_size:
        raise BadBatchSize(f"batch size {batch_size} not in 1..{dataset_size}")
    return rng.integers(0, dataset_size, size=batch_size)


def sample_batch(plan, key, dataset_size, batch_size):
    """Batch indices for ``key = (role, agent, s, t)`` (trailing fields optional)."""
    return sample_batch_from(plan.generator(*key), dataset_size, batch_size)


def delta_oracle(problem, i, x, y, z, alpha, xi, psi):
    """Stochastic x-gradient of the penalised Lagrangian at ``(x, y, z)``.

    ``grad_x F_i(x, y; xi) + alpha * (grad_x G_i(x, y; psi) - grad_x G_i(x, z; psi))``.
    The same ``psi`` feeds both lower-level terms, so they cancel exactly when
    ``y == z``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    gf = problem.grad_x_f(i, x, y, xi)
    gy = problem.grad_x_g(i, x, y, psi)
    gz = problem.grad_x_g(i, x, z, psi)
    if gf.shape != (problem.p,):
        raise DimensionMismatch(f"upper gradient has shape {gf.shape}")
    return gf + alpha * (gy - gz)
