"""Problem registry, stochastic gradient oracle and problem sanity checks."""
from __future__ import annotations

import importlib
import logging
import pkgutil
from functools import lru_cache
from typing import Any, Dict, List, Tuple, Type

import numpy as np

from smdlab import zoo
from smdlab.errors import DomainError
from smdlab.problem_base import NoiseKind, NoiseModel, StochasticProblem
from smdlab.regions import Matrix, Vector
from smdlab.zoo.cosine_example import make_cosine_example
from smdlab.zoo.linear_program import make_generic_lp
from smdlab.zoo.polar_example import make_polar_example
from smdlab.zoo.quadratic import make_quadratic
from smdlab.zoo.rosenbrock import make_rosenbrock
from smdlab.zoo.sqrt_example import make_sqrt_example

__all__ = [
    "NoiseKind",
    "NoiseModel",
    "StochasticProblem",
    "check_first_order",
    "check_gradient",
    "list_problems",
    "make_cosine_example",
    "make_generic_lp",
    "make_polar_example",
    "make_problem",
    "make_quadratic",
    "make_rosenbrock",
    "make_sqrt_example",
    "sample_gradient",
]

_LOG = logging.getLogger(__name__)

Registry = Dict[str, Tuple[Type[StochasticProblem], Dict[str, Any]]]


@lru_cache(maxsize=None)
def _registry() -> Registry:
    """Scan the zoo package for StochasticProblem subclasses."""
    registry: Registry = {}
    for module_info in pkgutil.iter_modules(zoo.__path__):
        module = importlib.import_module(f"{zoo.__name__}.{module_info.name}")
        for obj in module.__dict__.values():
            try:
                if (
                    issubclass(obj, StochasticProblem)
                    and obj is not StochasticProblem
                    and obj.__module__ == module.__name__
                ):
                    for name, defaults in obj.registry_names.items():
                        registry[name] = (obj, defaults)
            except TypeError:
                # If obj isn't a class
                continue
    _LOG.debug("registered problems: %s", sorted(registry))
    return registry


def list_problems() -> List[str]:
    """Names accepted by ``make_problem``."""
    return sorted(_registry())


def make_problem(
    name: str, noise: NoiseModel | None = None, **params: Any
) -> StochasticProblem:
    """Build a registered problem, overriding its default parameters."""
    try:
        problem_cls, defaults = _registry()[name]
    except KeyError as exc:
        known = ", ".join(list_problems())
        raise DomainError(f"unknown problem {name!r}; known: {known}") from exc
    problem = problem_cls.build(**{**defaults, **params})
    return problem.with_noise(noise) if noise is not None else problem


def sample_gradient(
    problem: StochasticProblem, x: Vector, rng: np.random.Generator
) -> Vector:
    """∇G(x; ξ) = ∇g(x) + ζ, with ζ drawn from the problem's noise model."""
    grad = problem.mean_gradient(x)
    if problem.noise.kind is NoiseKind.NONE:
        return grad
    return grad + problem.noise.sample(rng, problem.dim)


def check_gradient(problem: StochasticProblem, points: Matrix) -> float:
    """Largest relative error between ∇g and central finite differences."""
    worst = 0.0
    eye = np.eye(problem.dim)
    for x in np.atleast_2d(points):
        step = 1e-6 * (1.0 + float(np.linalg.norm(x)))
        numeric = np.array(
            [
                (problem.objective(x + step * e) - problem.objective(x - step * e))
                / (2.0 * step)
                for e in eye
            ]
        )
        exact = problem.mean_gradient(x)
        scale = max(1.0, float(np.linalg.norm(exact)))
        error = float(np.linalg.norm(numeric - exact)) / scale
        worst = max(worst, error)
    return worst


def check_first_order(
    problem: StochasticProblem, rng: np.random.Generator, n: int = 1_000
) -> float:
    """Smallest <∇g(x*), x - x*> over sampled feasible x and stored minimizers."""
    samples = problem.region.sample(rng, n)
    worst = np.inf
    for xstar in problem.minimizers:
        grad = problem.mean_gradient(xstar)
        worst = min(worst, float(np.min((samples - xstar) @ grad)))
    return float(worst)
