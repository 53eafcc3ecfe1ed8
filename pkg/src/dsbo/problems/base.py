"""Per-agent first-order oracle interface for bilevel problems.

Every gradient evaluator takes an optional ``sample``.  ``sample=None`` gives
the deterministic gradient of the local objective; otherwise ``sample`` is a
descriptor produced by :meth:`BilevelProblem.sample_upper` or
:meth:`BilevelProblem.sample_lower` and the call returns the corresponding
unbiased stochastic gradient.
"""
from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..exceptions import CapabilityMissing, DimensionMismatch, IndexOutOfRange


class BilevelProblem(ABC):
    """Upper objectives ``f_i(x, y)`` and lower objectives ``g_i(x, y)`` split across agents."""

    p: int
    q: int
    n_agents: int
    has_exact_lower_solution = False
    has_exact_hypergradient = False
    has_test_data = False

    # -- losses ---------------------------------------------------------
    @abstractmethod
    def upper_loss(self, i, x, y) -> float: ...

    @abstractmethod
    def lower_loss(self, i, x, y) -> float: ...

    # -- gradients ------------------------------------------------------
    @abstractmethod
    def grad_x_f(self, i, x, y, sample=None) -> np.ndarray: ...

    @abstractmethod
    def grad_y_f(self, i, x, y, sample=None) -> np.ndarray: ...

    @abstractmethod
    def grad_x_g(self, i, x, y, sample=None) -> np.ndarray: ...

    @abstractmethod
    def grad_y_g(self, i, x, y, sample=None) -> np.ndarray: ...

    # -- sampling -------------------------------------------------------
    @abstractmethod
    def sample_upper(self, rng, i, batch_size):
        """Draw the sample descriptor ``xi`` for agent ``i``'s upper oracles."""

    @abstractmethod
    def sample_lower(self, rng, i, batch_size):
        """Draw the sample descriptor ``psi`` for agent ``i``'s lower oracles."""

    # -- capabilities with closed forms ---------------------------------
    def exact_lower_solution(self, x):
        raise CapabilityMissing(f"{type(self).__name__} has no closed-form lower solution")

    def exact_hypergradient(self, x):
        raise CapabilityMissing(f"{type(self).__name__} has no closed-form hypergradient")

    def test_accuracy(self, y):
        raise CapabilityMissing(f"{type(self).__name__} has no test data")

    # -- agent averages -------------------------------------------------
    def mean_upper_loss(self, x, y):
        return float(np.mean([self.upper_loss(i, x, y) for i in range(self.n_agents)]))

    def mean_lower_loss(self, x, y):
        return float(np.mean([self.lower_loss(i, x, y) for i in range(self.n_agents)]))

    def mean_grad(self, name, x, y):
        """Agent average of a deterministic gradient, e.g. ``mean_grad("grad_y_g", x, y)``."""
        fn = getattr(self, name)
        total = fn(0, x, y)
        for i in range(1, self.n_agents):
            total = total + fn(i, x, y)
        return total / self.n_agents

    # -- shared validation ---------------------------------------------
    def _check_xy(self, i, x, y):
        if not 0 <= i < self.n_agents:
            raise IndexOutOfRange(f"agent {i} outside 0..{self.n_agents - 1}")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != (self.p,) or y.shape != (self.q,):
            raise DimensionMismatch(
                f"expected x of shape ({self.p},) and y of shape ({self.q},), "
                f"got {x.shape} and {y.shape}"
            )
        return x, y
