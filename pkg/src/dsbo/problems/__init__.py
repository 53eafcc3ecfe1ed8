from .base import BilevelProblem
from .data import (
    Dataset,
    generate_synthetic,
    load_idx,
    read_dataset_csv,
    write_dataset_csv,
    write_idx,
)
from .logistic import (
    LogisticHyperopt,
    mnist_problem,
    partition_among_agents,
    synthetic_problem,
)
from .quadratic import (
    GaussianSample,
    QuadraticBilevel,
    default_quadratic,
    quadratic_random,
)

__all__ = [
    "BilevelProblem",
    "Dataset",
    "GaussianSample",
    "LogisticHyperopt",
    "QuadraticBilevel",
    "default_quadratic",
    "generate_synthetic",
    "load_idx",
    "mnist_problem",
    "partition_among_agents",
    "quadratic_random",
    "read_dataset_csv",
    "synthetic_problem",
    "write_dataset_csv",
    "write_idx",
]
