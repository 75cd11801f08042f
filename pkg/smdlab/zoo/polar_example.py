"""Non-convex coherent objective over the unit disk, written in polar form.

g(r, θ) = (3 + sin 5θ + cos 3θ) r² (5/3 - r). The radial derivative is
positive on the whole disk, which makes the origin the coherent minimizer.
"""
from __future__ import annotations

import math
from typing import Any

import numpy as np

from smdlab.problem_base import NoiseModel, StochasticProblem
from smdlab.regions import Ball, Vector


def _angular(theta: float) -> float:
    return 3.0 + math.sin(5.0 * theta) + math.cos(3.0 * theta)


def _angular_derivative(theta: float) -> float:
    return 5.0 * math.cos(5.0 * theta) - 3.0 * math.sin(3.0 * theta)


class PolarExample(StochasticProblem):
    """Flower-shaped objective over the unit ball of R²."""

    registry_names = {"polar": {}}

    @classmethod
    def build(cls, **params: Any) -> StochasticProblem:
        return make_polar_example()

    def objective(self, x: Vector) -> float:
        r = math.hypot(x[0], x[1])
        if r == 0.0:
            return 0.0
        theta = math.atan2(x[1], x[0])
        return _angular(theta) * r * r * (5.0 / 3.0 - r)

    def mean_gradient(self, x: Vector) -> Vector:
        r = math.hypot(x[0], x[1])
        if r == 0.0:
            # g = O(r²) so the gradient extends continuously by zero
            return np.zeros(2)
        theta = math.atan2(x[1], x[0])
        cos_t, sin_t = x[0] / r, x[1] / r
        radial = _angular(theta) * (10.0 / 3.0 * r - 3.0 * r * r)
        # (1/r) ∂g/∂θ, with the 1/r absorbed into r²(5/3 - r)
        tangential = _angular_derivative(theta) * r * (5.0 / 3.0 - r)
        return np.array(
            [radial * cos_t - tangential * sin_t, radial * sin_t + tangential * cos_t]
        )


def make_polar_example(noise: NoiseModel | None = None) -> PolarExample:
    """The polar example on the closed unit disk."""
    return PolarExample("polar", Ball(np.zeros(2), 1.0), np.zeros((1, 2)), noise)
