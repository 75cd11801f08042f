"""Rosenbrock's banana function over the benchmark domain [-2, 2]²."""
from __future__ import annotations

from typing import Any

import numpy as np

from smdlab.problem_base import NoiseModel, StochasticProblem
from smdlab.regions import Box, Vector


class Rosenbrock(StochasticProblem):
    """Locally but not globally coherent around its minimum (1, 1)."""

    registry_names = {"rosenbrock": {}}
    coherent = False

    @classmethod
    def build(cls, **params: Any) -> StochasticProblem:
        return make_rosenbrock()

    def objective(self, x: Vector) -> float:
        return float((1.0 - x[0]) ** 2 + 100.0 * (x[1] - x[0] ** 2) ** 2)

    def mean_gradient(self, x: Vector) -> Vector:
        valley = x[1] - x[0] ** 2
        return np.array([-2.0 * (1.0 - x[0]) - 400.0 * x[0] * valley, 200.0 * valley])


def make_rosenbrock(noise: NoiseModel | None = None) -> Rosenbrock:
    """Rosenbrock on [-2, 2]² with minimizer (1, 1)."""
    return Rosenbrock("rosenbrock", Box.cube(2, -2.0, 2.0), np.ones((1, 2)), noise)
