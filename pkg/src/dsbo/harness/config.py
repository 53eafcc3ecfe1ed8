"""JSON run configuration: defaults, validation and construction of run objects.

A resolved config is fully explicit; it is what gets echoed next to every
trace.  Schema (keys not listed are rejected)::

    problem    {"kind": "quadratic", "p", "q", "seed", "conditioning", "sigma",
                "coupling", "heterogeneity", "upper_curvature"}
             | {"kind": "synthetic_logistic", "d", "samples": [train, val, test],
                "noise", "seed"}
             | {"kind": "mnist", "images", "labels", "test_images", "test_labels",
                "samples": [train, val, test], "seed", "max_samples"}
    topology   {"kind": "ring" | "complete" | "edges", "n", "edges": [[i, j], ...]}
    steps      {"mode": "scheduled", "k_alpha", "k_x", "k_y", "k_z"}
             | {"mode": "manual", "alpha", "eta_x", "eta_y", "eta_z"}
    S, T, batch_size, warmup_iters (null -> ceil(alpha)), delta_at ("pre" | "post"),
    cadence, seeds, output, x0, y0, z0 (null -> zeros),
    metrics    {"gamma_grad": bool, "numeric_hypergrad": bool}
"""
from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from ..dsgda import HyperParams, schedule
from ..exceptions import ConfigError, DsboError
from ..problems import load_idx, mnist_problem, quadratic_random, synthetic_problem
from ..topology import build_topology

PROBLEM_DEFAULTS = {
    "quadratic": {
        "p": 5, "q": 5, "seed": 0, "conditioning": 1.0, "sigma": 0.0,
        "coupling": 0.5, "heterogeneity": 1.0, "upper_curvature": 1.0,
    },
    "synthetic_logistic": {"d": 10, "samples": [500, 500, 200], "noise": 0.1, "seed": 0},
    "mnist": {
        "images": None, "labels": None, "test_images": None, "test_labels": None,
        "samples": [500, 500, 200], "seed": 0, "max_samples": None,
    },
}

STEP_DEFAULTS = {
    "scheduled": {"k_alpha": 1.0, "k_x": 1.0, "k_y": 1.0, "k_z": 1.0},
    "manual": {"alpha": 1.0, "eta_x": 0.03, "eta_y": 0.03, "eta_z": 0.03},
}

TOP_DEFAULTS = {
    "S": 100, "T": 1, "batch_size": 1, "warmup_iters": None, "delta_at": "pre",
    "cadence": 1, "seeds": [0], "output": "runs/default",
    "x0": None, "y0": None, "z0": None,
}

METRIC_DEFAULTS = {"gamma_grad": False, "numeric_hypergrad": False}


def _merge(section, defaults, where):
    unknown = set(section) - set(defaults) - {"kind", "mode"}
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(section)
    return out


def resolve_config(raw, base_dir=None):
    """Fill defaults and validate; returns a new dict."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = set(TOP_DEFAULTS) | {"problem", "topology", "steps", "metrics"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    problem = raw.get("problem", {"kind": "quadratic"})
    kind = problem.get("kind")
    if kind not in PROBLEM_DEFAULTS:
        raise ConfigError(f"problem.kind must be one of {sorted(PROBLEM_DEFAULTS)}, got {kind!r}")
    problem = _merge(problem, PROBLEM_DEFAULTS[kind], "problem")
    if kind == "mnist":
        for key in ("images", "labels", "test_images", "test_labels"):
            if problem[key] is not None and base_dir is not None:
                problem[key] = str(Path(base_dir, problem[key]).resolve()) if not os.path.isabs(problem[key]) else problem[key]
        if problem["images"] is None or problem["labels"] is None:
            raise ConfigError("mnist problem needs 'images' and 'labels' paths")

    topology = dict(raw.get("topology", {"kind": "ring", "n": 8}))
    if topology.get("kind") not in ("ring", "complete", "edges") or "n" not in topology:
        raise ConfigError("topology needs kind in {ring, complete, edges} and n")
    topology.setdefault("edges", [])
    if set(topology) - {"kind", "n", "edges"}:
        raise ConfigError(f"unknown keys in topology: {sorted(set(topology) - {'kind', 'n', 'edges'})}")

    steps = raw.get("steps", {"mode": "manual"})
    mode = steps.get("mode")
    if mode not in STEP_DEFAULTS:
        raise ConfigError(f"steps.mode must be 'scheduled' or 'manual', got {mode!r}")
    steps = _merge(steps, STEP_DEFAULTS[mode], "steps")

    top = {k: copy.deepcopy(raw.get(k, v)) for k, v in TOP_DEFAULTS.items()}
    if not isinstance(top["seeds"], list) or not top["seeds"]:
        raise ConfigError("seeds must be a nonempty list of integers")
    if top["delta_at"] not in ("pre", "post"):
        raise ConfigError("delta_at must be 'pre' or 'post'")
    metrics = _merge(raw.get("metrics", {}), METRIC_DEFAULTS, "metrics")

    resolved = {"problem": problem, "topology": topology, "steps": steps, "metrics": metrics, **top}
    return resolved


def load_config(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve_config(raw, base_dir=path.parent)


def build_problem(cfg):
    spec = cfg["problem"]
    n = int(cfg["topology"]["n"])
    kind = spec["kind"]
    try:
        if kind == "quadratic":
            return quadratic_random(
                spec["seed"], spec["p"], spec["q"], n, spec["conditioning"], spec["sigma"],
                spec["coupling"], spec["heterogeneity"], spec["upper_curvature"],
            )
        if kind == "synthetic_logistic":
            return synthetic_problem(spec["seed"], n, spec["d"], tuple(spec["samples"]), spec["noise"])
        pool = load_idx(spec["images"], spec["labels"], spec["max_samples"])
        test_pool = None
        if spec["test_images"] and spec["test_labels"]:
            test_pool = load_idx(spec["test_images"], spec["test_labels"], split="test")
        return mnist_problem(pool, n, tuple(spec["samples"]), spec["seed"], test_pool)
    except (DsboError, ValueError, OSError) as exc:
        raise ConfigError(f"cannot build problem: {exc}") from exc


def build_mixing(cfg):
    try:
        return build_topology(cfg["topology"])
    except (DsboError, ValueError) as exc:
        raise ConfigError(f"invalid topology: {exc}") from exc


def build_hyperparams(cfg, W, seed):
    steps = cfg["steps"]
    try:
        if steps["mode"] == "scheduled":
            alpha, ex, ey, ez = schedule(
                W.n, max(int(cfg["S"]), 1), W.rho,
                steps["k_alpha"], steps["k_x"], steps["k_y"], steps["k_z"],
            )
        else:
            alpha, ex, ey, ez = steps["alpha"], steps["eta_x"], steps["eta_y"], steps["eta_z"]
        return HyperParams(
            alpha=float(alpha), eta_x=float(ex), eta_y=float(ey), eta_z=float(ez),
            S=int(cfg["S"]), T=int(cfg["T"]), batch_size=int(cfg["batch_size"]),
            warmup_iters=cfg["warmup_iters"], master_seed=int(seed), delta_at=cfg["delta_at"],
        )
    except (DsboError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid step configuration: {exc}") from exc


def set_field(cfg, dotted, value):
    """Return a copy of ``cfg`` with ``a.b.c`` set to ``value``."""
    out = copy.deepcopy(cfg)
    node = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"cannot vary {dotted!r}: {k!r} is not a section")
        node = node[k]
    node[keys[-1]] = value
    return out
