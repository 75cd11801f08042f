"""Certification of variational coherence, cone geometry and trace diagnostics.

Certification is sampling based and therefore one-sided: a ``pass`` verdict
means that no violation was found at the tested resolution. Every report
carries the number of samples it rests on.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from smdlab.core import Regularizer, set_distance, set_fenchel_coupling
from smdlab.errors import DomainError, UnsupportedPairingError
from smdlab.problem_base import StochasticProblem
from smdlab.regions import Ball, FeasibleRegion, Matrix, Simplex, Vector, as_vector
from smdlab.rng import Stream, make_rng
from smdlab.smd import StepState

_LOG = logging.getLogger(__name__)

TAU_VC = 1e-8
TAU_CONE = 1e-12
TAU_SHARP = 1e-6
# Rejection sampling inside B(candidate, radius) ∩ X gives up after this many
# draws per point.
LOCAL_DRAWS_PER_POINT = 200


class Verdict(str, Enum):
    """Outcome of a certification."""

    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Witness:
    """A pair (x, x*) with a negative coherence inner product."""

    x: Vector
    xstar: Vector
    value: float

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready form."""
        return {"x": self.x.tolist(), "xstar": self.xstar.tolist(), "value": self.value}


@dataclass
class CoherenceReport:  # pylint: disable=too-many-instance-attributes
    """Result of a (local) variational coherence test."""

    verdict: Verdict
    samples_tested: int
    min_inner_product: float
    tolerance: float
    resolution: float
    witness: Optional[Witness] = None
    equality_violations: List[Vector] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready form."""
        return {
            "verdict": self.verdict.value,
            "samples_tested": self.samples_tested,
            "min_inner_product": self.min_inner_product,
            "tolerance": self.tolerance,
            "resolution": self.resolution,
            "witness": self.witness.to_dict() if self.witness else None,
            "equality_violations": [x.tolist() for x in self.equality_violations],
        }


@dataclass(frozen=True, eq=False)
class ConeQuery:
    """A direction (or dual vector) queried against the cones at a point."""

    vertex: Vector
    direction: Vector
    region: FeasibleRegion

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertex", self.region.check(self.vertex, "vertex"))
        direction = as_vector(self.direction, self.region.dim, "direction")
        if not np.any(direction):
            raise DomainError("cone query direction must be nonzero")
        object.__setattr__(self, "direction", direction)


def _test_pairs(
    problem: StochasticProblem,
    samples: Matrix,
    references: Matrix,
    resolution: float,
    requested: int,
) -> CoherenceReport:
    """Evaluate <∇g(x), x - x*> over all sample/reference pairs."""
    if samples.shape[0] == 0:
        return CoherenceReport(Verdict.INCONCLUSIVE, 0, np.nan, TAU_VC, resolution)
    grads = np.array([problem.mean_gradient(x) for x in samples])
    tolerance = TAU_VC * (1.0 + float(np.max(np.linalg.norm(grads, axis=1))))
    # inner[i, j] = <∇g(x_i), x_i - x*_j>
    inner = np.einsum("id,id->i", grads, samples)[:, None] - grads @ references.T
    flat = int(np.argmin(inner))
    i, j = np.unravel_index(flat, inner.shape)
    minimum = float(inner[i, j])
    witness = None
    if minimum < -tolerance:
        witness = Witness(samples[i].copy(), references[j].copy(), minimum)
    distances = np.min(
        np.linalg.norm(samples[:, None, :] - references[None, :, :], axis=2), axis=1
    )
    flagged = np.any(np.abs(inner) <= tolerance, axis=1) & (
        distances > 10.0 * resolution
    )
    violations = [x.copy() for x in samples[flagged]]
    if witness is not None or violations:
        verdict = Verdict.FAIL
    elif samples.shape[0] < requested:
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.PASS
    return CoherenceReport(
        verdict,
        int(samples.shape[0]),
        minimum,
        tolerance,
        resolution,
        witness,
        violations,
    )


def _resolution(diameter: float, n_samples: int, dim: int) -> float:
    return diameter / max(n_samples, 1) ** (1.0 / dim)


def certify_vc(
    problem: StochasticProblem,
    n_samples: int,
    rng: Optional[np.random.Generator] = None,
) -> CoherenceReport:
    """Sampled test of <∇g(x), x - x*> >= 0 over X × X*, equality only on X*."""
    rng = rng if rng is not None else make_rng(0, Stream.CERTIFY)
    region = problem.region
    try:
        samples = region.sample(rng, n_samples)
    except NotImplementedError:
        _LOG.warning("no sampler for %s regions", region.kind)
        return CoherenceReport(Verdict.INCONCLUSIVE, 0, np.nan, TAU_VC, np.nan)
    resolution = _resolution(region.diameter(), n_samples, region.dim)
    report = _test_pairs(problem, samples, problem.minimizers, resolution, n_samples)
    if report.verdict is Verdict.INCONCLUSIVE:
        _LOG.warning(
            "%s: coherence test inconclusive (%d samples)",
            problem.name,
            report.samples_tested,
        )
    return report


def _local_samples(
    region: FeasibleRegion,
    center: Vector,
    radius: float,
    n: int,
    rng: np.random.Generator,
) -> Matrix:
    """Points of B(center, radius) ∩ X by rejection.

    The simplex has no interior in R^d, so there the region is sampled and
    filtered by distance instead of the other way around.
    """
    ball = Ball(center, radius)
    accepted: List[Vector] = []
    draws = 0
    while len(accepted) < n and draws < LOCAL_DRAWS_PER_POINT * n:
        draws += n
        if isinstance(region, Simplex):
            batch = region.sample(rng, n)
            accepted.extend(x for x in batch if ball.contains(x))
        else:
            batch = ball.sample(rng, n)
            accepted.extend(x for x in batch if region.contains(x))
    return np.array(accepted[:n]) if accepted else np.zeros((0, region.dim))


def certify_lvc(
    problem: StochasticProblem,
    candidate: Any,
    radius: float,
    n_samples: int,
    rng: Optional[np.random.Generator] = None,
) -> CoherenceReport:
    """Coherence test restricted to B(candidate, radius) ∩ X, against the candidate."""
    if not radius > 0:
        raise DomainError("radius must be positive")
    rng = rng if rng is not None else make_rng(0, Stream.CERTIFY)
    region = problem.region
    center = region.check(candidate, "candidate")
    samples = _local_samples(region, center, radius, n_samples, rng)
    diameter = min(2.0 * radius, region.diameter())
    resolution = _resolution(diameter, n_samples, region.dim)
    return _test_pairs(problem, samples, center[None, :], resolution, n_samples)


def basin_radius(
    problem: StochasticProblem,
    candidate: Any,
    radii: Sequence[float],
    n_samples: int,
    rng: Optional[np.random.Generator] = None,
) -> Optional[float]:
    """Largest radius among ``radii`` for which ``certify_lvc`` passes."""
    rng = rng if rng is not None else make_rng(0, Stream.CERTIFY)
    for radius in sorted(radii, reverse=True):
        report = certify_lvc(problem, candidate, radius, n_samples, rng)
        if report.verdict is Verdict.PASS:
            return float(radius)
    return None


def minimizer_hull_consistent(
    problem: StochasticProblem, n_points: int = 11, tol: float = 1e-9
) -> bool:
    """Whether g stays minimal along the segments between stored minimizers.

    Coherent problems have convex minimum sets, so a failure here rules
    coherence out.
    """
    values = [problem.objective(x) for x in problem.minimizers]
    best = min(values)
    weights = np.linspace(0.0, 1.0, n_points)
    for a, b in itertools.combinations(problem.minimizers, 2):
        for w in weights:
            point = (1.0 - w) * a + w * b
            if not problem.region.contains(point):
                return False
            if abs(problem.objective(point) - best) > tol * (1.0 + abs(best)):
                return False
    return True


def tangent_cone_contains(q: ConeQuery) -> bool:
    """Whether q.direction is a feasible direction at q.vertex."""
    return q.region.tangent_contains(q.vertex, q.direction)


def polar_cone_contains(q: ConeQuery) -> bool:
    """Whether q.direction lies in the polar cone of the tangent cone at q.vertex.

    PC(vertex) = {y : <y, z> <= 0 for z in TC(vertex)}.
    """
    return q.region.polar_contains(q.vertex, q.direction, TAU_CONE)


@dataclass(frozen=True)
class SharpnessReport:
    """Smallest slope of g along unit tangent directions at a candidate."""

    is_sharp: bool
    gamma_hat: float
    directions_tested: int

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready form."""
        return {
            "is_sharp": self.is_sharp,
            "gamma_hat": self.gamma_hat,
            "directions_tested": self.directions_tested,
        }


def _sampled_tangent_directions(
    region: FeasibleRegion, p: Vector, n: int, rng: np.random.Generator
) -> Matrix:
    directions = rng.standard_normal((n, region.dim))
    for i, direction in enumerate(directions):
        if not region.tangent_contains(p, direction):
            directions[i] = -direction
    keep = [region.tangent_contains(p, z) for z in directions]
    chosen = directions[keep]
    return chosen / np.linalg.norm(chosen, axis=1)[:, None]


def check_sharpness(
    problem: StochasticProblem,
    candidate: Any,
    n_dirs: int,
    rng: Optional[np.random.Generator] = None,
) -> SharpnessReport:
    """γ̂ = min <∇g(x*), z> over unit tangent directions z.

    Directions are the cone generators plus ``n_dirs`` random nonnegative
    combinations of them; smooth boundary points fall back to random
    feasible directions.
    """
    rng = rng if rng is not None else make_rng(0, Stream.CERTIFY)
    region = problem.region
    point = region.check(candidate, "candidate")
    grad = problem.mean_gradient(point)
    try:
        generators = region.tangent_generators(point)
        combos = rng.exponential(size=(n_dirs, generators.shape[0])) @ generators
        norms = np.linalg.norm(combos, axis=1)
        directions = np.vstack([generators, combos[norms > 0] / norms[norms > 0, None]])
    except UnsupportedPairingError:
        directions = _sampled_tangent_directions(region, point, n_dirs, rng)
    if directions.shape[0] == 0:
        return SharpnessReport(False, 0.0, 0)
    gamma_hat = float(np.min(directions @ grad))
    return SharpnessReport(gamma_hat > TAU_SHARP, gamma_hat, int(directions.shape[0]))


class HitCounter:
    """Streaming callback collecting the n with dist(X*, X_n) < eps."""

    def __init__(self, generators: Matrix, eps: float) -> None:
        if not eps > 0:
            raise DomainError("eps must be positive")
        self._generators = np.atleast_2d(generators)
        self._eps = eps
        self.hits: List[int] = []

    def __call__(self, n: int, x: Vector, y: Vector) -> None:
        if set_distance(self._generators, x) < self._eps:
            self.hits.append(n)


class FenchelZoneCounter:
    """Streaming callback collecting the n with F(X*, Y_n) < delta."""

    def __init__(
        self, h: Regularizer, region: FeasibleRegion, generators: Matrix, delta: float
    ) -> None:
        if not delta > 0:
            raise DomainError("delta must be positive")
        self._h = h
        self._region = region
        self._generators = np.atleast_2d(generators)
        self._delta = delta
        self.hits: List[int] = []

    def __call__(self, n: int, x: Vector, y: Vector) -> None:
        coupling = set_fenchel_coupling(self._h, self._region, self._generators, y)
        if coupling < self._delta:
            self.hits.append(n)


class FiniteHitDetector:
    """Streaming callback finding the index from which X_n equals a vertex exactly."""

    def __init__(self, vertex: Vector, tail_window: int) -> None:
        if tail_window < 1:
            raise DomainError("tail_window must be at least 1")
        self._vertex = np.asarray(vertex, dtype=np.float64)
        self._tail_window = tail_window
        self._last_miss = -1
        self._last_n = -1

    def __call__(self, n: int, x: Vector, y: Vector) -> None:
        self._last_n = n
        if not np.array_equal(x, self._vertex):
            self._last_miss = n

    def result(self) -> Optional[int]:
        """n0, or None when the tail window is not entirely at the vertex."""
        n0 = self._last_miss + 1
        if self._last_n < 0 or self._last_n - n0 + 1 < self._tail_window:
            return None
        return n0


def hitting_times(
    trace_stream: Iterable[StepState], xstar_generators: Matrix, eps: float
) -> List[int]:
    """All n with dist(X*, X_n) < eps."""
    counter = HitCounter(xstar_generators, eps)
    for n, x, y in trace_stream:
        counter(n, x, y)
    return counter.hits


def fenchel_zone_hits(
    trace_stream: Iterable[StepState],
    h: Regularizer,
    region: FeasibleRegion,
    xstar_generators: Matrix,
    delta: float,
) -> List[int]:
    """All n with min over generators of F(x*, Y_n) < delta."""
    counter = FenchelZoneCounter(h, region, xstar_generators, delta)
    for n, x, y in trace_stream:
        counter(n, x, y)
    return counter.hits


def detect_finite_hit(
    trace_stream: Iterable[StepState], vertex: Any, tail_window: int
) -> Optional[int]:
    """Smallest n0 with X_n == vertex bitwise for every streamed n >= n0."""
    detector = FiniteHitDetector(vertex, tail_window)
    for n, x, y in trace_stream:
        detector(n, x, y)
    return detector.result()
