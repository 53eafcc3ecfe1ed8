"""DSGDA-GT: decentralized stochastic gradient descent-ascent with gradient tracking.

Each outer step ``s``:

1. ``T`` tracked gossip steps on ``Y`` against ``f_i + alpha g_i`` (step ``eta_y``);
2. ``T`` tracked gossip steps on ``Z`` against ``g_i`` (step ``eta_z``);
3. per-agent penalty gradient ``delta_i`` at ``(x_s, y_s, z_s)``;
4. ``V <- V W + Delta_{s+1} - Delta_s``;
5. ``X <- X W - eta_x V``.

All iterates are ``dim x n`` blocks with one column per agent.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import BadRho, DimensionMismatch, DivergenceDetected, NonPositiveStep
from .inner_loop import InnerState, inner_loop, tracking_gap
from .metrics import delta_ratio, evaluate
from .oracle import RngPlan, delta_oracle
from .topology import mix

log = logging.getLogger(__name__)


def schedule(n, S, rho, k_alpha=1.0, k_x=1.0, k_y=1.0, k_z=1.0):
    """Penalty multiplier and step sizes as functions of ``(n, S, rho)``.

    ``alpha ~ (1-rho^2)^{1/2} (nS)^{1/7}``, ``eta_x, eta_y ~ (1-rho^2) n^{2/7} / S^{5/7}``,
    ``eta_z ~ (1-rho^2)^{3/2} n^{3/7} / S^{4/7}``; the ``k_*`` set the hidden constants.
    """
    if not 0 <= rho < 1:
        raise BadRho(f"rho must lie in [0, 1), got {rho}")
    if n < 1 or S < 1:
        raise ValueError("n and S must be at least 1")
    if min(k_alpha, k_x, k_y, k_z) <= 0:
        raise ValueError("multipliers must be positive")
    gap = 1.0 - rho * rho
    alpha = k_alpha * gap ** 0.5 * (n * S) ** (1 / 7)
    eta_x = k_x * gap * n ** (2 / 7) / S ** (5 / 7)
    eta_y = k_y * gap * n ** (2 / 7) / S ** (5 / 7)
    eta_z = k_z * gap ** 1.5 * n ** (3 / 7) / S ** (4 / 7)
    return alpha, eta_x, eta_y, eta_z


@dataclass(frozen=True)
class HyperParams:
    alpha: float
    eta_x: float
    eta_y: float
    eta_z: float
    S: int
    T: int = 1
    batch_size: int = 1
    warmup_iters: int | None = None
    master_seed: int = 0
    delta_at: str = "pre"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.eta_x < 0 or self.eta_y <= 0 or self.eta_z <= 0:
            raise NonPositiveStep("eta_y and eta_z must be positive and eta_x nonnegative")
        if self.S < 0 or self.T < 1 or self.batch_size < 1:
            raise ValueError("need S >= 0, T >= 1 and batch_size >= 1")
        if self.delta_at not in ("pre", "post"):
            raise ValueError("delta_at must be 'pre' or 'post'")

    @property
    def warmup(self):
        """Warm-start length; defaults to ``ceil(alpha)``."""
        return math.ceil(self.alpha) if self.warmup_iters is None else int(self.warmup_iters)


@dataclass(frozen=True)
class AlgoState:
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    V: np.ndarray
    Delta: np.ndarray
    Uy: np.ndarray
    Hy: np.ndarray
    Uz: np.ndarray
    Hz: np.ndarray
    s: int = 0

    @property
    def n(self):
        return self.X.shape[1]


def _replicate(v, dim, n):
    v = np.zeros(dim) if v is None else np.asarray(v, dtype=float)
    if v.shape != (dim,):
        raise DimensionMismatch(f"initial point has shape {v.shape}, expected ({dim},)")
    return np.repeat(v[:, None], n, axis=1)


def init_state(problem, W, hp=None, x0=None, y0=None, z0=None):
    """Every agent starts from the same ``(x0, y0, z0)``; trackers start at zero."""
    n = W.n
    if problem.n_agents != n:
        raise DimensionMismatch(f"problem has {problem.n_agents} agents, topology has {n}")
    p, q = problem.p, problem.q
    zp, zq = np.zeros((p, n)), np.zeros((q, n))
    return AlgoState(
        X=_replicate(x0, p, n), Y=_replicate(y0, q, n), Z=_replicate(z0, q, n),
        V=zp.copy(), Delta=zp.copy(), Uy=zq.copy(), Hy=zq.copy(), Uz=zq.copy(), Hz=zq.copy(),
    )


def _y_grad_fn(problem, X, alpha, plan, s, batch, roles=("y_upper", "y_lower")):
    """Per-agent stochastic gradient of ``f_i + alpha g_i`` in ``y`` at frozen ``x_i``."""

    def grad(theta, t):
        out = np.empty_like(theta)
        for i in range(theta.shape[1]):
            xi = problem.sample_upper(plan.generator(roles[0], i, s, t), i, batch)
            psi = problem.sample_lower(plan.generator(roles[1], i, s, t), i, batch)
            out[:, i] = problem.grad_y_f(i, X[:, i], theta[:, i], xi) + alpha * problem.grad_y_g(
                i, X[:, i], theta[:, i], psi
            )
        return out

    return grad


def _z_grad_fn(problem, X, plan, s, batch, role="z_lower"):
    def grad(theta, t):
        out = np.empty_like(theta)
        for i in range(theta.shape[1]):
            psi = problem.sample_lower(plan.generator(role, i, s, t), i, batch)
            out[:, i] = problem.grad_y_g(i, X[:, i], theta[:, i], psi)
        return out

    return grad


class TrackingMonitor:
    """Largest observed ``||mean(tracker) - mean(gradients)||`` per tracker."""

    def __init__(self):
        self.max_gap = {"x": 0.0, "y": 0.0, "z": 0.0}

    def inner(self, which):
        def on_step(state, t):
            self.max_gap[which] = max(self.max_gap[which], tracking_gap(state.u, state.h))

        return on_step

    def outer(self, state):
        self.max_gap["x"] = max(self.max_gap["x"], tracking_gap(state.V, state.Delta))


def warm_start(state, problem, W, hp, iterations=None, plan=None, monitor=None):
    """Run only the ``y`` and ``z`` inner loops with ``X`` frozen."""
    iterations = hp.warmup if iterations is None else iterations
    if iterations <= 0:
        return state
    plan = plan or RngPlan(hp.master_seed)
    y = inner_loop(
        InnerState(state.Y, state.Uy, state.Hy), hp.eta_y,
        _y_grad_fn(problem, state.X, hp.alpha, plan, 0, hp.batch_size, ("warm_y_upper", "warm_y_lower")),
        iterations, W, on_step=monitor.inner("y") if monitor else None,
    )
    z = inner_loop(
        InnerState(state.Z, state.Uz, state.Hz), hp.eta_z,
        _z_grad_fn(problem, state.X, plan, 0, hp.batch_size, "warm_z_lower"),
        iterations, W, on_step=monitor.inner("z") if monitor else None,
    )
    new = replace(state, Y=y.theta, Uy=y.u, Hy=y.h, Z=z.theta, Uz=z.u, Hz=z.h)
    _check_finite(new, state.s)
    return new


def _check_finite(state, step):
    for name in ("X", "Y", "Z", "V"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise DivergenceDetected(step, f"non-finite {name} at outer step {step}")


def outer_step(state, problem, W, hp, plan=None, monitor=None):
    """One outer iteration; returns the new state with ``s`` incremented."""
    if state.s >= hp.S:
        raise ValueError(f"outer step {state.s} exceeds S = {hp.S}")
    plan = plan or RngPlan(hp.master_seed)
    s, X, n, b = state.s, state.X, state.n, hp.batch_size

    y = inner_loop(
        InnerState(state.Y, state.Uy, state.Hy), hp.eta_y,
        _y_grad_fn(problem, X, hp.alpha, plan, s, b), hp.T, W,
        on_step=monitor.inner("y") if monitor else None,
    )
    z = inner_loop(
        InnerState(state.Z, state.Uz, state.Hz), hp.eta_z,
        _z_grad_fn(problem, X, plan, s, b), hp.T, W,
        on_step=monitor.inner("z") if monitor else None,
    )

    Y_eval, Z_eval = (state.Y, state.Z) if hp.delta_at == "pre" else (y.theta, z.theta)
    delta = np.empty_like(state.Delta)
    for i in range(n):
        xi = problem.sample_upper(plan.generator("delta_upper", i, s), i, b)
        psi = problem.sample_lower(plan.generator("delta_lower", i, s), i, b)
        delta[:, i] = delta_oracle(problem, i, X[:, i], Y_eval[:, i], Z_eval[:, i], hp.alpha, xi, psi)

    V = mix(state.V, W) + delta - state.Delta
    X_new = mix(X, W) - hp.eta_x * V
    new = AlgoState(X_new, y.theta, z.theta, V, delta, y.u, y.h, z.u, z.h, s + 1)
    _check_finite(new, s + 1)
    if monitor is not None:
        monitor.outer(new)
    return new


@dataclass
class RunResult:
    trace: list
    state: AlgoState
    monitor: TrackingMonitor = field(default_factory=TrackingMonitor)


def run(problem, W, hp, cadence=1, sinks=(), x0=None, y0=None, z0=None,
        gamma=False, numeric_hypergrad=False):
    """Warm start followed by ``hp.S`` outer steps.

    A record is taken at ``s = 0``, every ``cadence`` steps and at ``s = S``;
    each record is passed to every callable in ``sinks`` as it is produced.
    """
    if cadence < 1:
        raise ValueError("cadence must be at least 1")
    plan = RngPlan(hp.master_seed)
    monitor = TrackingMonitor()
    start = time.perf_counter()
    state = init_state(problem, W, hp, x0, y0, z0)
    state = warm_start(state, problem, W, hp, plan=plan, monitor=monitor)
    trace = []

    def record(st):
        rec = evaluate(problem, st, alpha=hp.alpha, gamma=gamma, numeric_hypergrad=numeric_hypergrad,
                       wall_ms=(time.perf_counter() - start) * 1e3)
        trace.append(rec)
        if log.isEnabledFor(logging.DEBUG):
            log.debug("s=%d |mean delta|^2/alpha^2 = %s", st.s, delta_ratio(st, hp.alpha))
        for sink in sinks:
            sink(rec)

    record(state)
    for _ in range(hp.S):
        state = outer_step(state, problem, W, hp, plan, monitor)
        if state.s % cadence == 0 or state.s == hp.S:
            record(state)
    log.debug("run finished: S=%d, tracking gaps %s", hp.S, monitor.max_gap)
    return RunResult(trace, state, monitor)
