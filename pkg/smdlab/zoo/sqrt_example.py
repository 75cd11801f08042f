"""Coherent but not quasi-convex objective g(x) = 2 Σ √(1 + x_i) on [0, 1]^d."""
from __future__ import annotations

from typing import Any

import numpy as np

from smdlab.errors import DomainError
from smdlab.problem_base import NoiseModel, StochasticProblem
from smdlab.regions import Box, Vector


class SqrtExample(StochasticProblem):
    """Sum of square roots; its minimum sits at the origin corner."""

    registry_names = {"sqrt-d2": {"d": 2}, "sqrt": {"d": 2}}

    @classmethod
    def build(cls, **params: Any) -> StochasticProblem:
        return make_sqrt_example(int(params.get("d", 2)))

    def objective(self, x: Vector) -> float:
        return float(2.0 * np.sum(np.sqrt(1.0 + x)))

    def mean_gradient(self, x: Vector) -> Vector:
        return 1.0 / np.sqrt(1.0 + x)


def make_sqrt_example(d: int, noise: NoiseModel | None = None) -> SqrtExample:
    """The sqrt example on the unit cube of dimension ``d``."""
    if d < 1:
        raise DomainError("d must be at least 1")
    return SqrtExample(f"sqrt-d{d}", Box.cube(d), np.zeros((1, d)), noise)
