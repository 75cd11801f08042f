"""Convex quadratic g(x) = ½‖x - c‖², the baseline coherent program."""
from __future__ import annotations

from typing import Any

import numpy as np

from smdlab.problem_base import NoiseModel, StochasticProblem
from smdlab.regions import Box, FeasibleRegion, Vector, as_vector, region_from_spec


class Quadratic(StochasticProblem):
    """Squared distance to a center; the minimizer is the projected center."""

    registry_names = {"quadratic-d": {"d": 2}, "quadratic": {"d": 2}}

    def __init__(
        self,
        name: str,
        region: FeasibleRegion,
        center: Vector,
        noise: NoiseModel | None = None,
    ) -> None:
        self.center = center
        super().__init__(name, region, region.project(center)[None, :], noise)

    @classmethod
    def build(cls, **params: Any) -> StochasticProblem:
        region = params.get("region")
        return make_quadratic(
            int(params.get("d", 2)),
            params.get("center"),
            region_from_spec(region) if isinstance(region, dict) else region,
        )

    def objective(self, x: Vector) -> float:
        diff = x - self.center
        return 0.5 * float(diff @ diff)

    def mean_gradient(self, x: Vector) -> Vector:
        return x - self.center


def make_quadratic(
    d: int = 2,
    center: Any = None,
    region: FeasibleRegion | None = None,
    noise: NoiseModel | None = None,
) -> Quadratic:
    """Quadratic on ``region`` (default the unit cube) centered at ``center``.

    The default center (0.3, 0.6, 0.3, 0.6, ...) is interior to the unit cube.
    """
    if region is None:
        region = Box.cube(d)
    d = region.dim
    if center is None:
        center = np.where(np.arange(d) % 2 == 0, 0.3, 0.6)
    return Quadratic(f"quadratic-d{d}", region, as_vector(center, d, "center"), noise)
