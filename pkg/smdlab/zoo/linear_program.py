"""Generic linear programs: affine objectives with a unique optimal vertex."""
from __future__ import annotations

from typing import Any

import numpy as np
from scipy.optimize import linprog

from smdlab.errors import GenericityError, UnsupportedPairingError
from smdlab.problem_base import NoiseModel, StochasticProblem
from smdlab.regions import (
    Box,
    FeasibleRegion,
    HPolytope,
    Simplex,
    Vector,
    as_vector,
    region_from_spec,
)

# Two vertices whose values differ by less than this count as tied.
TIE_TOL = 1e-12


class GenericLinearProgram(StochasticProblem):
    """g(x) = <c, x> over a polytope; its minimum is sharp."""

    registry_names = {
        "lp-simplex": {
            "name": "lp-simplex",
            "c": [1.0, 2.0],
            "region": {"kind": "simplex", "dim": 2},
        },
        "lp-box": {
            "name": "lp-box",
            "c": [-1.0, 3.0, 0.5],
            "region": {"kind": "box", "lower": [0.0] * 3, "upper": [1.0] * 3},
        },
    }

    def __init__(
        self,
        name: str,
        region: FeasibleRegion,
        cost: Vector,
        minimizer: Vector,
        noise: NoiseModel | None = None,
    ) -> None:
        self.cost = cost
        super().__init__(name, region, minimizer[None, :], noise)

    @classmethod
    def build(cls, **params: Any) -> StochasticProblem:
        region = params["region"]
        if isinstance(region, dict):
            region = region_from_spec(region)
        return make_generic_lp(params["c"], region, name=params.get("name"))

    def objective(self, x: Vector) -> float:
        return float(self.cost @ x)

    def mean_gradient(self, x: Vector) -> Vector:
        return self.cost.copy()


def _optimal_vertex(cost: Vector, region: FeasibleRegion) -> Vector:
    if isinstance(region, (Box, Simplex)):
        vertices = region.vertices()
        values = vertices @ cost
        order = np.argsort(values)
        if values.shape[0] > 1 and values[order[1]] - values[order[0]] <= TIE_TOL:
            raise GenericityError(
                f"c={cost.tolist()} is minimized by more than one vertex"
            )
        return vertices[order[0]].copy()
    if isinstance(region, HPolytope):
        A, b = region.constraints()
        free = [(None, None)] * region.dim
        result = linprog(cost, A_ub=A, b_ub=b, bounds=free, method="highs")
        if result.status != 0:
            raise GenericityError(f"linprog failed: {result.message}")
        return np.asarray(result.x, dtype=np.float64)
    raise UnsupportedPairingError(
        f"linear programs need a polytope, got a {region.kind} region"
    )


def make_generic_lp(
    c: Any,
    region: FeasibleRegion,
    noise: NoiseModel | None = None,
    name: str | None = None,
) -> GenericLinearProgram:
    """Linear program <c, x> on a box, simplex or H-polytope.

    Uniqueness of the optimal vertex is checked by enumeration for boxes and
    simplices; for H-polytopes it is the caller's responsibility.
    """
    cost = as_vector(c, region.dim, "c")
    vertex = _optimal_vertex(cost, region)
    return GenericLinearProgram(
        name or f"lp-{region.kind}", region, cost, vertex, noise
    )
