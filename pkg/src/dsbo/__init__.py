"""Fully first-order decentralized stochastic bilevel optimisation (DSGDA-GT)."""
from .dsgda import (
    AlgoState,
    HyperParams,
    RunResult,
    init_state,
    outer_step,
    run,
    schedule,
    warm_start,
)
from .estimator import DSGDAGT, DecentralizedHyperoptClassifier
from .inner_loop import InnerState, inner_loop
from .oracle import RngPlan, delta_oracle, sample_batch
from .topology import (
    MixingMatrix,
    build_complete,
    build_metropolis,
    build_ring,
    build_topology,
    mix,
    spectral_quantity,
)

__version__ = "0.1.0"

__all__ = [
    "DSGDAGT",
    "AlgoState",
    "DecentralizedHyperoptClassifier",
    "HyperParams",
    "InnerState",
    "MixingMatrix",
    "RngPlan",
    "RunResult",
    "build_complete",
    "build_metropolis",
    "build_ring",
    "build_topology",
    "delta_oracle",
    "init_state",
    "inner_loop",
    "mix",
    "outer_step",
    "run",
    "sample_batch",
    "schedule",
    "spectral_quantity",
    "warm_start",
]
