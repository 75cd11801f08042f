"""g(x) = cos x on [0, 4π]: two isolated minimizers, hence not coherent."""
from __future__ import annotations

import math
from typing import Any

import numpy as np

from smdlab.problem_base import NoiseModel, StochasticProblem
from smdlab.regions import Box, Vector


class CosineExample(StochasticProblem):
    """Negative control for coherence certification."""

    registry_names = {"cosine": {}}
    coherent = False

    @classmethod
    def build(cls, **params: Any) -> StochasticProblem:
        return make_cosine_example()

    def objective(self, x: Vector) -> float:
        return math.cos(float(x[0]))

    def mean_gradient(self, x: Vector) -> Vector:
        return np.array([-math.sin(float(x[0]))])


def make_cosine_example(noise: NoiseModel | None = None) -> CosineExample:
    """cos x on [0, 4π] with minimizers π and 3π."""
    return CosineExample(
        "cosine",
        Box([0.0], [4.0 * math.pi]),
        np.array([[math.pi], [3.0 * math.pi]]),
        noise,
    )
