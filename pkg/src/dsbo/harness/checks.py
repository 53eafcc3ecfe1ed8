"""Property suite behind ``dsbo check``.

Each check returns ``(passed, detail)``; the suite is a quick, self-contained
health check of the installed build, not a replacement for the test suite.
"""
from __future__ import annotations

import warnings

import numpy as np

from ..dsgda import HyperParams, TrackingMonitor, init_state, outer_step, run
from ..metrics import (
    consensus_error,
    finite_diff,
    hypergrad_numeric,
    loglog_slope,
    penalty_gap,
)
from ..oracle import RngPlan, delta_oracle
from ..problems import default_quadratic, quadratic_random, synthetic_problem
from ..topology import build_complete, build_metropolis, build_ring, mix


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def check_topology():
    worst = 0.0
    for W in (build_ring(8), build_complete(5), build_metropolis(4, [(0, 1), (1, 2), (2, 3)])):
        w = W.weights
        worst = max(worst, np.abs(w - w.T).max(), np.abs(w.sum(0) - 1).max(), np.abs(w.sum(1) - 1).max())
        if w.min() < 0 or not W.rho < 1:
            return False, f"{W!r} violates nonnegativity or rho < 1"
    return worst <= 1e-12, f"max invariant deviation {worst:.1e}"


def check_mixing_contraction():
    W = build_ring(8)
    rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(100):
        A = rng.standard_normal((5, 8))
        a_bar = A.mean(axis=1, keepdims=True)
        out = mix(A, W)
        worst = max(worst, np.linalg.norm(out - a_bar) - W.rho * np.linalg.norm(A - a_bar))
        if np.abs(out.mean(axis=1) - A.mean(axis=1)).max() > 1e-12:
            return False, "mix changed a column mean"
    return worst <= 1e-10, f"max excess over rho bound {worst:.2e}"


def _gradient_errors(problem, rng, points=5):
    worst = 0.0
    for _ in range(points):
        i = int(rng.integers(problem.n_agents))
        x = 0.5 * rng.standard_normal(problem.p)
        y = 0.5 * rng.standard_normal(problem.q)
        pairs = [
            (problem.grad_x_f(i, x, y), finite_diff(lambda u: problem.upper_loss(i, u, y), x)),
            (problem.grad_y_f(i, x, y), finite_diff(lambda v: problem.upper_loss(i, x, v), y)),
            (problem.grad_x_g(i, x, y), finite_diff(lambda u: problem.lower_loss(i, u, y), x)),
            (problem.grad_y_g(i, x, y), finite_diff(lambda v: problem.lower_loss(i, x, v), y)),
        ]
        for analytic, numeric in pairs:
            scale = max(np.linalg.norm(numeric), 1e-3)
            worst = max(worst, np.linalg.norm(analytic - numeric) / scale)
    return worst


def check_gradients():
    rng = np.random.default_rng(1)
    q = _gradient_errors(quadratic_random(3, 4, 6, 3), rng)
    lg = _gradient_errors(synthetic_problem(3, 2, 5, (40, 40, 10)), rng)
    return max(q, lg) <= 1e-5, f"relative error quadratic {q:.1e}, logistic {lg:.1e}"


def check_tracking_identities():
    prob = default_quadratic(sigma=0.1)
    W = build_ring(8)
    hp = HyperParams(10.0, 0.01, 0.005, 0.05, S=100, batch_size=1, master_seed=0)
    monitor = TrackingMonitor()
    state = init_state(prob, W, hp)
    plan = RngPlan(0)
    worst_mean = 0.0
    for _ in range(hp.S):
        prev = state
        state = outer_step(state, prob, W, hp, plan, monitor)
        expected = prev.X.mean(axis=1) - hp.eta_x * state.V.mean(axis=1)
        worst_mean = max(worst_mean, np.abs(state.X.mean(axis=1) - expected).max())
    gaps = monitor.max_gap
    ok = max(gaps.values()) <= 1e-10 and worst_mean <= 1e-12
    return ok, f"tracking gaps x={gaps['x']:.1e} y={gaps['y']:.1e} z={gaps['z']:.1e}, mean update {worst_mean:.1e}"


def check_shared_sample_cancellation():
    prob = synthetic_problem(0, 2, 4, (20, 20, 5))
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    xi, psi = rng.integers(0, 20, 5), rng.integers(0, 20, 5)
    outs = [delta_oracle(prob, 0, x, y, y, a, xi, psi) for a in (0.0, 1.0, 1e3)]
    ok = all(np.array_equal(outs[0], o) for o in outs[1:])
    return ok, "delta independent of alpha when y == z" if ok else "delta depends on alpha at y == z"


def check_hypergradient_oracles():
    worst = 0.0
    for seed in range(3):
        prob = quadratic_random(seed, 4, 5, 3)
        x = np.random.default_rng(seed).standard_normal(4)
        exact = prob.exact_hypergradient(x)
        worst = max(worst, _rel(hypergrad_numeric(prob, x), exact), _rel(finite_diff(prob.phi, x, 1e-5), exact))
    return worst <= 1e-4, f"max pairwise relative error {worst:.1e}"


def check_penalty_gap_decay():
    prob = default_quadratic()
    alphas = [40, 80, 160, 320, 640]
    x = np.random.default_rng(0).standard_normal(prob.p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gaps = [penalty_gap(prob, x, a) for a in alphas]
    slope = loglog_slope(alphas, gaps)
    ok = -1.3 <= slope <= -0.7 and gaps[-1] < gaps[0] / 8
    return ok, f"log-log slope {slope:.3f}"


def check_determinism():
    prob = default_quadratic(sigma=0.05)
    W = build_ring(8)
    hp = HyperParams(5.0, 0.01, 0.01, 0.05, S=20, batch_size=2, master_seed=7)
    a = run(prob, W, hp).trace
    b = run(prob, W, hp).trace
    strip = lambda tr: [dict(r.as_dict(), wall_ms=None) for r in tr]
    return strip(a) == strip(b), "repeat runs agree" if strip(a) == strip(b) else "repeat runs differ"


def check_homogeneous_consensus():
    base = quadratic_random(5, 3, 3, 1)
    n = 4
    rep = lambda m: np.repeat(m, n, axis=0)
    from ..problems import QuadraticBilevel

    prob = QuadraticBilevel(*(rep(m) for m in (base.A, base.B, base.C, base.D, base.E, base.a, base.c, base.d)))
    W = build_ring(n)
    hp = HyperParams(5.0, 0.02, 0.02, 0.05, S=50)
    state = run(prob, W, hp).state
    worst = max(consensus_error(state.X), consensus_error(state.Y), consensus_error(state.Z))
    return worst <= 1e-12, f"max consensus error {worst:.1e}"


CHECKS = {
    "topology-invariants": check_topology,
    "mixing-contraction": check_mixing_contraction,
    "gradient-correctness": check_gradients,
    "tracking-identities": check_tracking_identities,
    "shared-sample-cancellation": check_shared_sample_cancellation,
    "hypergradient-oracles": check_hypergradient_oracles,
    "penalty-gap-decay": check_penalty_gap_decay,
    "determinism": check_determinism,
    "homogeneous-consensus": check_homogeneous_consensus,
}


def run_checks(out=print):
    """Run every property; returns True when all pass."""
    all_ok = True
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing property is a failing property
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return all_ok
