"""Stationarity, consensus and penalty-gap measurements.

Everything here is first-order: second-order blocks needed by the reference
hypergradient are assembled from central differences of gradient oracles.
These routines are for measurement and testing only; the optimiser never
calls them.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np

from .exceptions import CapabilityMissing, LowerSolveFailed, SingularHessian

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceRecord:
    s: int
    wall_ms: float
    train_loss: float
    test_accuracy: float | None
    consensus_x: float
    consensus_y: float
    consensus_z: float
    grad_phi_norm: float | None
    gamma_grad_norm: float | None
    vbar_norm: float

    def as_dict(self):
        return asdict(self)

    def per_agent(self, n):
        """Consensus errors divided by the agent count."""
        return {k: getattr(self, k) / n for k in ("consensus_x", "consensus_y", "consensus_z")}


TRACE_FIELDS = tuple(f.name for f in fields(TraceRecord))


# -- finite differences --------------------------------------------------
def finite_diff(fun, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def finite_diff_jacobian(fun, x, h=1e-6):
    """Central-difference Jacobian ``J[k, j] = d fun_k / d x_j``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.stack(cols, axis=1)


# -- consensus -----------------------------------------------------------
def consensus_error(block):
    block = np.asarray(block, dtype=float)
    return float(np.linalg.norm(block - block.mean(axis=1, keepdims=True)))


# -- lower-level solves --------------------------------------------------
def _power_iteration(H, iters=100, seed=0):
    v = np.random.default_rng(seed).standard_normal(H.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = H @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        lam, v = nw, w / nw
    return float(lam)


def minimise_gradient(grad, y0, tol, max_iter=100_000, h=1e-5):
    """Full-batch gradient descent on a strongly convex function given its gradient.

    The step is ``1/ell`` with ``ell`` from power iteration on a
    finite-difference Hessian at ``y0``; it is halved whenever the gradient
    norm blows up.  Returns ``(y, ||grad(y)||, iterations)``.
    """
    y = np.array(y0, dtype=float)
    H = finite_diff_jacobian(grad, y, h)
    ell = max(_power_iteration(0.5 * (H + H.T)), 1e-12)
    step = 1.0 / ell
    g = grad(y)
    g0 = max(np.linalg.norm(g), 1e-300)
    start = y.copy()
    for it in range(max_iter):
        gn = np.linalg.norm(g)
        if gn <= tol:
            return y, float(gn), it
        if not np.isfinite(gn) or gn > 1e6 * g0:
            step *= 0.5
            y = start.copy()
            g = grad(y)
            continue
        y = y - step * g
        g = grad(y)
    gn = float(np.linalg.norm(g))
    if gn <= tol:
        return y, gn, max_iter
    raise LowerSolveFailed(f"gradient norm {gn:.3e} above tolerance {tol:.1e} after {max_iter} steps")


def _default_tol(problem):
    return 1e-9 if problem.has_exact_lower_solution else 1e-7


def solve_lower(problem, x, tol=None, y0=None, max_iter=100_000):
    """``z*(x) = argmin_y mean_i g_i(x, y)`` by gradient descent."""
    tol = _default_tol(problem) if tol is None else tol
    y0 = np.zeros(problem.q) if y0 is None else y0
    y, _, _ = minimise_gradient(lambda y: problem.mean_grad("grad_y_g", x, y), y0, tol, max_iter)
    return y


def solve_penalised(problem, x, alpha, tol=None, y0=None, max_iter=100_000):
    """``y*_alpha(x) = argmin_y mean_i (f_i + alpha g_i)(x, y)`` by gradient descent."""
    tol = _default_tol(problem) if tol is None else tol
    y0 = np.zeros(problem.q) if y0 is None else y0

    def grad(y):
        return problem.mean_grad("grad_y_f", x, y) + alpha * problem.mean_grad("grad_y_g", x, y)

    y, _, _ = minimise_gradient(grad, y0, tol, max_iter)
    return y


# -- hypergradients ------------------------------------------------------
def hypergrad_numeric(problem, x, tol_inner=None, h=1e-5, y0=None):
    """Implicit-function hypergradient from first-order oracles only.

    ``grad Phi = grad_x f - H_xy (H_yy)^{-1} grad_y f`` at the lower solution,
    with both Hessian blocks from central differences of ``grad_y g``.
    """
    x = np.asarray(x, dtype=float)
    if problem.q > 200:
        raise ValueError("dense Hessian assembly limited to q <= 200")
    y = solve_lower(problem, x, tol_inner, y0)
    H_yy = finite_diff_jacobian(lambda v: problem.mean_grad("grad_y_g", x, v), y, h)
    H_yy = 0.5 * (H_yy + H_yy.T)
    J = finite_diff_jacobian(lambda u: problem.mean_grad("grad_y_g", u, y), x, h)  # (q, p)
    if np.linalg.eigvalsh(H_yy)[0] <= 1e-8:
        raise SingularHessian("lower-level Hessian is not positive definite")
    gy = problem.mean_grad("grad_y_f", x, y)
    return problem.mean_grad("grad_x_f", x, y) - J.T @ np.linalg.solve(H_yy, gy)


def grad_phi_exact(problem, x):
    """``||grad Phi(x)||`` from the problem's closed form."""
    if not problem.has_exact_hypergradient:
        raise CapabilityMissing(f"{type(problem).__name__} has no closed-form hypergradient")
    return float(np.linalg.norm(problem.exact_hypergradient(x)))


def _alpha_warning(problem, alpha):
    consts = getattr(problem, "constants", None)
    if consts is not None:
        bound = consts()["alpha_min"]
        if alpha < bound:
            warnings.warn(
                f"alpha={alpha:g} below 2 ell_f1 / mu_g = {bound:.3g}; penalty gap bound does not apply",
                stacklevel=3,
            )


def gamma_grad(problem, x, alpha, tol_inner=None, return_info=False):
    """Gradient of the penalised value function at ``x``.

    Solves for ``y*_alpha(x)`` and ``z*(x)`` by gradient descent and returns
    ``grad_x f(x, y*_a) + alpha (grad_x g(x, y*_a) - grad_x g(x, z*))``
    (agent averages).
    """
    x = np.asarray(x, dtype=float)
    _alpha_warning(problem, alpha)
    tol = _default_tol(problem) if tol_inner is None else tol_inner
    z = solve_lower(problem, x, tol)
    y = solve_penalised(problem, x, alpha, tol, y0=z)
    g = problem.mean_grad("grad_x_f", x, y) + alpha * (
        problem.mean_grad("grad_x_g", x, y) - problem.mean_grad("grad_x_g", x, z)
    )
    if return_info:
        res_y = np.linalg.norm(
            problem.mean_grad("grad_y_f", x, y) + alpha * problem.mean_grad("grad_y_g", x, y)
        )
        res_z = np.linalg.norm(problem.mean_grad("grad_y_g", x, z))
        return g, {"y_alpha": y, "z_star": z, "residual_y": float(res_y), "residual_z": float(res_z)}
    return g


def _reference_hypergradient(problem, x):
    if problem.has_exact_hypergradient:
        return problem.exact_hypergradient(x)
    return hypergrad_numeric(problem, x)


def penalty_gap(problem, x, alpha, tol_inner=None):
    """``||grad Phi(x) - grad Gamma_alpha(x)||``."""
    return float(np.linalg.norm(_reference_hypergradient(problem, x) - gamma_grad(problem, x, alpha, tol_inner)))


def gamma_lipschitz_ratios(problem, alpha, pairs=5, radius=0.5, seed=0):
    """``||grad Gamma(a) - grad Gamma(b)|| / ||a - b||`` on random nearby point pairs.

    Diagnostic only: the smoothness constant of the penalised value function
    should stay bounded as ``alpha`` grows, but its size is not known, so
    callers log the ratios rather than assert on them.
    """
    rng = np.random.default_rng(seed)
    ratios = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(pairs):
            a = rng.standard_normal(problem.p)
            b = a + radius * rng.standard_normal(problem.p)
            ga, gb = gamma_grad(problem, a, alpha), gamma_grad(problem, b, alpha)
            ratios.append(float(np.linalg.norm(ga - gb) / np.linalg.norm(a - b)))
    log.info("alpha=%g: gamma_grad Lipschitz ratios max %.4g", alpha, max(ratios))
    return ratios


def delta_ratio(state, alpha):
    """Empirical ``||mean delta||^2 / alpha^2``; logged, never asserted."""
    if alpha <= 0:
        return None
    return float(np.linalg.norm(state.Delta.mean(axis=1)) ** 2 / alpha ** 2)


def loglog_slope(alphas, gaps):
    """Least-squares slope of ``log gap`` against ``log alpha``."""
    return float(np.polyfit(np.log(alphas), np.log(gaps), 1)[0])


# -- trace records -------------------------------------------------------
def evaluate(problem, state, alpha=None, gamma=False, numeric_hypergrad=False, wall_ms=0.0):
    """Snapshot of the metrics the problem supports, at the agent-averaged iterate."""
    x_bar = state.X.mean(axis=1)
    y_bar = state.Y.mean(axis=1)
    grad_phi = None
    if problem.has_exact_hypergradient:
        grad_phi = grad_phi_exact(problem, x_bar)
    elif numeric_hypergrad:
        grad_phi = float(np.linalg.norm(hypergrad_numeric(problem, x_bar)))
    gamma_norm = None
    if gamma and alpha is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            gamma_norm = float(np.linalg.norm(gamma_grad(problem, x_bar, alpha)))
    accuracy = problem.test_accuracy(y_bar) if problem.has_test_data else None
    return TraceRecord(
        s=int(state.s),
        wall_ms=float(wall_ms),
        train_loss=problem.mean_upper_loss(x_bar, y_bar),
        test_accuracy=accuracy,
        consensus_x=consensus_error(state.X),
        consensus_y=consensus_error(state.Y),
        consensus_z=consensus_error(state.Z),
        grad_phi_norm=grad_phi,
        gamma_grad_norm=gamma_norm,
        vbar_norm=float(np.linalg.norm(state.V.mean(axis=1))),
    )


def is_finite_record(record):
    return all(
        v is None or (isinstance(v, (int, float)) and math.isfinite(v))
        for v in record.as_dict().values()
    )
