"""Quadratic bilevel testbed with exactly computable hypergradient.

Agent ``i`` holds::

    f_i(x, y) = 1/2 x'A_i x + x'B_i y + 1/2 y'C_i y + a_i'x + c_i'y
    g_i(x, y) = 1/2 y'D_i y + x'E_i y + d_i'y

Stochastic oracles add ``sigma`` times a standard normal draw to the
deterministic gradient.  The draw for ``x`` and ``y`` components is carried by
a :class:`GaussianSample`, so two evaluations with the same sample see the same
noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DimensionMismatch
from .base import BilevelProblem


@dataclass(frozen=True)
class GaussianSample:
    noise_x: np.ndarray
    noise_y: np.ndarray


def _sym(m):
    return 0.5 * (m + np.swapaxes(m, -1, -2))


class QuadraticBilevel(BilevelProblem):
    has_exact_lower_solution = True
    has_exact_hypergradient = True

    def __init__(self, A, B, C, D, E, a, c, d, sigma=0.0):
        A, B, C, D, E = (np.array(m, dtype=float, ndmin=3) for m in (A, B, C, D, E))
        a, c, d = (np.array(v, dtype=float, ndmin=2) for v in (a, c, d))
        n, p, q = B.shape
        expected = {
            "A": (A, (n, p, p)), "C": (C, (n, q, q)), "D": (D, (n, q, q)),
            "E": (E, (n, p, q)), "a": (a, (n, p)), "c": (c, (n, q)), "d": (d, (n, q)),
        }
        for name, (arr, shape) in expected.items():
            if arr.shape != shape:
                raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {shape}")
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.A, self.B, self.C, self.D, self.E = _sym(A), B, _sym(C), _sym(D), E
        self.a, self.c, self.d = a, c, d
        self.sigma = float(sigma)
        self.n_agents, self.p, self.q = n, p, q
        for arr in (self.A, self.B, self.C, self.D, self.E, self.a, self.c, self.d):
            arr.setflags(write=False)

        self.A_bar, self.B_bar, self.C_bar = self.A.mean(0), B.mean(0), self.C.mean(0)
        self.D_bar, self.E_bar = self.D.mean(0), E.mean(0)
        self.a_bar, self.c_bar, self.d_bar = a.mean(0), c.mean(0), d.mean(0)
        self.mu_g = float(np.linalg.eigvalsh(self.D_bar)[0])
        if self.mu_g <= 0:
            raise ValueError("averaged lower Hessian D_bar must be positive definite")

    # -- losses ---------------------------------------------------------
    def upper_loss(self, i, x, y):
        x, y = self._check_xy(i, x, y)
        return float(
            0.5 * x @ self.A[i] @ x + x @ self.B[i] @ y + 0.5 * y @ self.C[i] @ y
            + self.a[i] @ x + self.c[i] @ y
        )

    def lower_loss(self, i, x, y):
        x, y = self._check_xy(i, x, y)
        return float(0.5 * y @ self.D[i] @ y + x @ self.E[i] @ y + self.d[i] @ y)

    # -- gradients ------------------------------------------------------
    def _noisy(self, g, sample, which):
        if sample is None or self.sigma == 0.0:
            return g
        return g + self.sigma * (sample.noise_x if which == "x" else sample.noise_y)

    def grad_x_f(self, i, x, y, sample=None):
        x, y = self._check_xy(i, x, y)
        return self._noisy(self.A[i] @ x + self.B[i] @ y + self.a[i], sample, "x")

    def grad_y_f(self, i, x, y, sample=None):
        x, y = self._check_xy(i, x, y)
        return self._noisy(self.B[i].T @ x + self.C[i] @ y + self.c[i], sample, "y")

    def grad_x_g(self, i, x, y, sample=None):
        x, y = self._check_xy(i, x, y)
        return self._noisy(self.E[i] @ y, sample, "x")

    def grad_y_g(self, i, x, y, sample=None):
        x, y = self._check_xy(i, x, y)
        return self._noisy(self.D[i] @ y + self.E[i].T @ x + self.d[i], sample, "y")

    # -- sampling -------------------------------------------------------
    def sample_upper(self, rng, i, batch_size=1):
        return self._draw(rng, batch_size)

    def sample_lower(self, rng, i, batch_size=1):
        return self._draw(rng, batch_size)

    def _draw(self, rng, batch_size):
        # a batch of b i.i.d. draws averages to variance sigma^2 / b
        scale = 1.0 / np.sqrt(batch_size)
        return GaussianSample(scale * rng.standard_normal(self.p), scale * rng.standard_normal(self.q))

    # -- closed forms ---------------------------------------------------
    def exact_lower_solution(self, x):
        x = np.asarray(x, dtype=float)
        return -np.linalg.solve(self.D_bar, self.E_bar.T @ x + self.d_bar)

    def lower_solution_jacobian_t(self):
        """``grad y*(x)^T = -E_bar D_bar^{-1}`` (constant for quadratics), shape ``(p, q)``."""
        return -np.linalg.solve(self.D_bar, self.E_bar.T).T

    def exact_hypergradient(self, x):
        x = np.asarray(x, dtype=float)
        y = self.exact_lower_solution(x)
        gx = self.A_bar @ x + self.B_bar @ y + self.a_bar
        gy = self.B_bar.T @ x + self.C_bar @ y + self.c_bar
        return gx + self.lower_solution_jacobian_t() @ gy

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return self.mean_upper_loss(x, self.exact_lower_solution(x))

    def phi_hessian(self):
        J = -np.linalg.solve(self.D_bar, self.E_bar.T)  # dy*/dx, shape (q, p)
        H = self.A_bar + self.B_bar @ J + J.T @ self.B_bar.T + J.T @ self.C_bar @ J
        return _sym(H)

    def stationary_point(self):
        """Minimiser of the hyperobjective (requires a positive definite ``phi_hessian``)."""
        return np.linalg.solve(self.phi_hessian(), -self.exact_hypergradient(np.zeros(self.p)))

    def constants(self):
        """Smoothness constants of the instance.

        ``ell_f0`` is unbounded for quadratics and is left out of ``kappa``;
        ``ell_g2`` and ``ell_f2`` are zero.
        """
        ell_f1 = max(
            np.linalg.norm(np.block([[self.A[i], self.B[i]], [self.B[i].T, self.C[i]]]), 2)
            for i in range(self.n_agents)
        )
        ell_g1 = max(
            np.linalg.norm(np.block([[np.zeros((self.p, self.p)), self.E[i]], [self.E[i].T, self.D[i]]]), 2)
            for i in range(self.n_agents)
        )
        return {
            "ell_f1": float(ell_f1),
            "ell_g1": float(ell_g1),
            "ell_g2": 0.0,
            "mu_g": self.mu_g,
            "kappa": float(max(ell_f1, ell_g1) / self.mu_g),
            "alpha_min": float(2 * ell_f1 / self.mu_g),
        }


def quadratic_random(seed, p, q, n_agents, conditioning=1.0, sigma=0.0,
                     coupling=0.5, heterogeneity=1.0, upper_curvature=1.0):
    """Random quadratic instance.

    ``D_bar`` is shifted so its smallest eigenvalue is at least
    ``conditioning``; the upper blocks ``A_i`` are shifted so the hyperobjective
    has curvature at least ``upper_curvature``.  Linear terms scale with the
    agent index, so heterogeneity grows with ``n_agents``.
    """
    if min(p, q, n_agents) < 1 or conditioning <= 0:
        raise ValueError("dimensions must be positive and conditioning > 0")
    rng = np.random.default_rng(seed)
    n = n_agents
    A = _sym(rng.standard_normal((n, p, p))) * 0.5
    B = coupling * rng.standard_normal((n, p, q)) / np.sqrt(q)
    Mc = rng.standard_normal((n, q, q))
    C = Mc @ np.swapaxes(Mc, 1, 2) / q * 0.5
    Md = rng.standard_normal((n, q, q))
    D = Md @ np.swapaxes(Md, 1, 2) / q
    E = coupling * rng.standard_normal((n, p, q)) / np.sqrt(q)
    scale = heterogeneity * (1.0 + np.arange(n))[:, None]
    a = scale * rng.standard_normal((n, p))
    c = scale * rng.standard_normal((n, q))
    d = scale * rng.standard_normal((n, q))

    shift = conditioning - np.linalg.eigvalsh(D.mean(0))[0]
    if shift > 0:
        D = D + shift * np.eye(q)
    prob = QuadraticBilevel(A, B, C, D, E, a, c, d, sigma)
    shift = upper_curvature - np.linalg.eigvalsh(prob.phi_hessian())[0]
    if shift > 0:
        A = A + shift * np.eye(p)
        prob = QuadraticBilevel(A, B, C, D, E, a, c, d, sigma)
    return prob


def default_quadratic(sigma=0.0, n_agents=8, seed=0):
    """The reference p = q = 5 instance used by the checks and acceptance runs."""
    return quadratic_random(seed, 5, 5, n_agents, conditioning=1.0, sigma=sigma)
