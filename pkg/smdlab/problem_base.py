"""Base class for the stochastic problems of the zoo."""
# pylint: disable=too-few-public-methods
from __future__ import annotations

import copy
from dataclasses import dataclass
from enum import Enum
from typing import Any, ClassVar, Dict

import numpy as np

from smdlab.errors import DomainError
from smdlab.regions import FeasibleRegion, Matrix, Norm, Vector


class NoiseKind(str, Enum):
    """Distribution of the additive gradient noise."""

    NONE = "none"
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean additive noise on the gradient oracle.

    ``scale`` is the standard deviation for Gaussian noise and the half-width
    for uniform noise.
    """

    kind: NoiseKind = NoiseKind.NONE
    scale: float = 0.0

    def __post_init__(self) -> None:
        if self.scale < 0:
            raise DomainError("noise scale must be non-negative")

    @classmethod
    def gaussian(cls, sigma: float) -> NoiseModel:
        """Gaussian noise with standard deviation ``sigma`` per coordinate."""
        return cls(NoiseKind.GAUSSIAN, sigma)

    @classmethod
    def uniform(cls, halfwidth: float) -> NoiseModel:
        """Uniform noise on [-halfwidth, halfwidth] per coordinate."""
        return cls(NoiseKind.UNIFORM, halfwidth)

    def sample(self, rng: np.random.Generator, dim: int) -> Vector:
        """Draw one noise vector."""
        if self.kind is NoiseKind.GAUSSIAN:
            return self.scale * rng.standard_normal(dim)
        if self.kind is NoiseKind.UNIFORM:
            return rng.uniform(-self.scale, self.scale, size=dim)
        return np.zeros(dim)

    def second_moment(
        self, rng: np.random.Generator, dim: int, norm: Norm, n: int = 10_000
    ) -> float:
        """Monte Carlo estimate of E‖ζ‖*² in the dual of ``norm``."""
        if self.kind is NoiseKind.NONE or self.scale == 0:
            return 0.0
        draws = np.array([self.sample(rng, dim) for _ in range(n)])
        if norm is Norm.L1:
            sizes = np.max(np.abs(draws), axis=1)
        else:
            sizes = np.linalg.norm(draws, axis=1)
        return float(np.mean(sizes**2))


class StochasticProblem:
    """Objective, mean gradient and known minimizers of a stochastic program.

    Subclasses live in ``smdlab.zoo`` and register themselves through
    ``registry_names``: a mapping from registry name to the default keyword
    arguments handed to ``build``.
    """

    registry_names: ClassVar[Dict[str, Dict[str, Any]]] = {}
    coherent: ClassVar[bool] = True

    def __init__(
        self,
        name: str,
        region: FeasibleRegion,
        minimizers: Any,
        noise: NoiseModel | None = None,
    ) -> None:
        self.name = name
        self.region = region
        self.minimizers: Matrix = np.atleast_2d(
            np.asarray(minimizers, dtype=np.float64)
        )
        self.noise = noise or NoiseModel()
        if self.minimizers.shape[1] != region.dim:
            raise DomainError(f"{name}: minimizers do not match the region dimension")
        for point in self.minimizers:
            region.check(point, f"{name} minimizer")

    @classmethod
    def build(cls, **params: Any) -> StochasticProblem:
        """Construct the problem from registry parameters."""
        raise NotImplementedError

    @property
    def dim(self) -> int:
        """Dimension of the decision variable."""
        return self.region.dim

    def objective(self, x: Vector) -> float:
        """Mean objective g(x)."""
        raise NotImplementedError

    def mean_gradient(self, x: Vector) -> Vector:
        """Exact gradient ∇g(x)."""
        raise NotImplementedError

    def with_noise(self, noise: NoiseModel) -> StochasticProblem:
        """Copy of the problem with a different noise model."""
        clone = copy.copy(self)
        clone.noise = noise
        return clone

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(name={self.name!r}, dim={self.dim}, "
            f"noise={self.noise})"
        )
