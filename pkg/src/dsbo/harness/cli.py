"""Command line entry point: ``dsbo {run,sweep,check,topology,datagen}``.

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 property-check failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from ..exceptions import ConfigError, DivergenceDetected, DsboError
from ..topology import build_topology
from .checks import run_checks
from .config import load_config
from .runner import datagen, run_config, sweep

EXIT_CONFIG, EXIT_DIVERGED, EXIT_CHECK = 2, 3, 4


def _parse_values(text):
    """``--values`` accepts a JSON list or a comma separated list of scalars."""
    try:
        values = json.loads(text)
    except json.JSONDecodeError:
        values = [json.loads(v) if _is_json(v) else v for v in text.split(",")]
    if not isinstance(values, list) or not values:
        raise ConfigError(f"--values must be a nonempty list, got {text!r}")
    return values


def _is_json(text):
    try:
        json.loads(text)
    except json.JSONDecodeError:
        return False
    return True


def _with_seed(cfg, seed):
    if seed is not None:
        cfg = dict(cfg, seeds=[seed])
    return cfg


def cmd_run(args):
    cfg = _with_seed(load_config(args.config), args.seed)
    paths = run_config(cfg, args.output)
    for p in paths:
        print(p)
    return 0


def cmd_sweep(args):
    cfg = _with_seed(load_config(args.config), args.seed)
    results = sweep(cfg, args.vary, _parse_values(args.values), args.output)
    for label, paths in results.items():
        print(f"{label}: {len(paths)} seed(s)")
    return 0


def cmd_check(args):
    return 0 if run_checks() else EXIT_CHECK


def cmd_topology(args):
    edges = json.loads(args.edges) if args.edges else []
    try:
        W = build_topology({"kind": args.kind, "n": args.n, "edges": edges})
    except (DsboError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    with np.printoptions(precision=6, suppress=True, linewidth=120):
        print(W.weights)
    print(f"rho = {W.rho:.12g}")
    return 0


def cmd_datagen(args):
    for p in datagen(load_config(args.config), args.output):
        print(p)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="dsbo", description="Decentralized stochastic bilevel optimization runs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment per seed")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default=None, help="override the config's output directory")
    p.add_argument("--seed", type=int, default=None, help="run only this master seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="vary one config field over a list of values")
    p.add_argument("--config", required=True)
    p.add_argument("--vary", required=True, help="dotted field name, e.g. steps.k_x or batch_size")
    p.add_argument("--values", required=True, help="JSON list or comma separated values")
    p.add_argument("--output", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run the property suite")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("topology", help="print a mixing matrix and its rho")
    p.add_argument("--kind", choices=("ring", "complete", "edges"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--edges", default=None, help='JSON edge list, e.g. "[[0,1],[1,2]]"')
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("datagen", help="write synthetic datasets as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_datagen)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceDetected as exc:
        print(f"diverged at outer step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except json.JSONDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
