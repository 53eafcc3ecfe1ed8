"""Experiment orchestration: one run per seed, sweeps, dataset export."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..dsgda import run
from ..exceptions import ConfigError
from ..problems import write_dataset_csv
from .config import (
    build_hyperparams,
    build_mixing,
    build_problem,
    resolve_config,
    set_field,
)
from .traces import aggregate, write_summary, write_trace

log = logging.getLogger(__name__)


def _workers():
    try:
        return max(1, int(os.environ.get("DSBO_THREADS", "1")))
    except ValueError:
        return 1


def run_seed(cfg, seed, out_dir):
    """Run one seed and write ``trace.csv`` and ``resolved-config.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    W = build_mixing(cfg)
    hp = build_hyperparams(cfg, W, seed)
    echo = dict(cfg, seeds=[seed])
    echo["derived"] = {
        "alpha": hp.alpha, "eta_x": hp.eta_x, "eta_y": hp.eta_y, "eta_z": hp.eta_z,
        "rho": W.rho, "warmup_iters": hp.warmup, "n": W.n,
    }
    (out_dir / "resolved-config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    log.info("seed %s: alpha=%.4g eta=(%.4g, %.4g, %.4g) -> %s", seed, hp.alpha, hp.eta_x, hp.eta_y, hp.eta_z, out_dir)
    result = run(
        problem, W, hp, cadence=int(cfg["cadence"]),
        x0=cfg["x0"], y0=cfg["y0"], z0=cfg["z0"],
        gamma=cfg["metrics"]["gamma_grad"], numeric_hypergrad=cfg["metrics"]["numeric_hypergrad"],
    )
    path = out_dir / "trace.csv"
    write_trace(result.trace, path)
    return str(path)


def run_config(cfg, output=None):
    """Run every seed of a resolved config; returns the trace paths."""
    out = Path(output or cfg["output"])
    jobs = [(cfg, seed, out / f"seed_{seed}") for seed in cfg["seeds"]]
    workers = min(_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            paths = list(pool.map(run_seed, *zip(*jobs)))
    else:
        paths = [run_seed(*job) for job in jobs]
    write_summary(aggregate(paths), out / "summary.csv")
    return paths


def sweep(cfg, field, values, output=None):
    """Cross product of ``values`` for ``field`` with the config's seeds."""
    out = Path(output or cfg["output"])
    results = {}
    for value in values:
        cell = resolve_config(set_field(cfg, field, value))
        label = f"{field}={json.dumps(value)}"
        results[label] = run_config(cell, out / label)
    return results


def datagen(cfg, output=None):
    """Write every agent's train/val/test split as CSV; returns the paths."""
    problem = build_problem(cfg)
    if not hasattr(problem, "train"):
        raise ConfigError(f"datagen needs a dataset-backed problem, not {cfg['problem']['kind']!r}")
    out = Path(output or cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    splits = [("train", problem.train), ("val", problem.val)]
    if getattr(problem, "test", None) is not None:
        splits.append(("test", problem.test))
    for name, datasets in splits:
        for i, ds in enumerate(datasets):
            path = out / f"agent_{i}_{name}.csv"
            write_dataset_csv(ds, path)
            paths.append(str(path))
    return paths
