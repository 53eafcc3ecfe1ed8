"""Decentralized stochastic gradient descent with gradient tracking.

One call runs ``T`` rounds of::

    H_{t+1} = stochastic gradients at Theta_t          (one column per agent)
    U_{t+1} = U_t W + H_{t+1} - H_t
    Theta_{t+1} = Theta_t W - step * U_{t+1}

The tracker ``U`` and last gradients ``H`` are returned so the caller can
resume the recursion later; the column means satisfy ``mean(U) == mean(H)``
whenever they did on entry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, NonPositiveStep, TrackingInvariantViolated
from .topology import mix


@dataclass(frozen=True)
class InnerState:
    theta: np.ndarray
    u: np.ndarray
    h: np.ndarray

    @classmethod
    def start(cls, theta):
        theta = np.array(theta, dtype=float)
        return cls(theta, np.zeros_like(theta), np.zeros_like(theta))


def tracking_gap(u, h) -> float:
    """``|| mean(u) - mean(h) ||`` over columns."""
    return float(np.linalg.norm(u.mean(axis=1) - h.mean(axis=1)))


def inner_loop(state, step, grad_fn, T, W, on_step=None, check_tol=1e-10):
    """Run ``T`` tracked gossip-gradient steps.

    ``grad_fn(theta, t)`` returns the ``q x n`` block of per-agent stochastic
    gradients at ``theta`` for inner iteration ``t``.  ``on_step(state, t)`` is
    called after every step.  The tracking identity is checked after every step
    against ``check_tol`` (scaled by ``max(1, ||mean(h)||)``); pass ``None``
    to skip it.
    """
    if step <= 0:
        raise NonPositiveStep(f"inner step size must be positive, got {step}")
    if T < 0:
        raise ValueError("T must be nonnegative")
    theta, u, h = state.theta, state.u, state.h
    if not (theta.shape == u.shape == h.shape) or theta.shape[1] != W.n:
        raise DimensionMismatch(
            f"theta {theta.shape}, u {u.shape}, h {h.shape} incompatible with {W.n} agents"
        )
    for t in range(T):
        h_next = grad_fn(theta, t)
        if h_next.shape != theta.shape:
            raise DimensionMismatch(f"gradient block has shape {h_next.shape}, expected {theta.shape}")
        u = mix(u, W) + h_next - h
        theta = mix(theta, W) - step * u
        h = h_next
        if check_tol is not None:
            gap = tracking_gap(u, h)
            if gap > check_tol * max(1.0, float(np.linalg.norm(h.mean(axis=1)))):
                raise TrackingInvariantViolated(f"mean(u) - mean(h) = {gap:.3e} after inner step {t}")
        if on_step is not None:
            on_step(InnerState(theta, u, h), t)
    return InnerState(theta, u, h)
