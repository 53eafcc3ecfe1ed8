"""Configuration, orchestration, trace persistence and the property-check runner."""
from .config import (
    build_hyperparams,
    build_mixing,
    build_problem,
    load_config,
    resolve_config,
    set_field,
)
from .runner import datagen, run_config, run_seed, sweep
from .traces import aggregate, read_trace, write_summary, write_trace

__all__ = [
    "aggregate", "build_hyperparams", "build_mixing", "build_problem", "datagen", "load_config",
    "read_trace", "resolve_config", "run_config", "run_seed", "set_field", "sweep",
    "write_summary", "write_trace",
]
