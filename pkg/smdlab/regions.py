"""Compact convex feasible regions.

Each region knows how to test membership, project onto itself in the
Euclidean sense, sample uniformly, and describe its tangent cone at a point
through a finite set of generators.
"""
# pylint: disable=invalid-name
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List

import numpy as np
import numpy.typing as npt
from scipy.linalg import null_space
from scipy.optimize import linprog

from smdlab.errors import DomainError, UnsupportedPairingError

_LOG = logging.getLogger(__name__)

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]

# Membership tolerance, relative to the region diameter.
FEAS_TOL = 1e-9
# Dykstra stop threshold on a full cycle, relative to max(1, ‖y‖).
DYKSTRA_TOL = 1e-12
DYKSTRA_MAX_ITER = 100_000
# Rejection sampling gives up after this many bounding-box draws per point.
REJECTION_DRAWS_PER_POINT = 1_000


class Norm(str, Enum):
    """Primal norms a regularizer can be strongly convex against."""

    L2 = "l2"
    L1 = "l1"


def as_vector(values: Any, dim: int | None = None, name: str = "vector") -> Vector:
    """Convert to a one-dimensional float array, checking the length."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DomainError(f"{name} must have length {dim}, got {arr.shape[0]}")
    return arr


def _unit_rows(rows: Matrix) -> Matrix:
    """Normalize the nonzero rows of a matrix to unit Euclidean length."""
    if rows.size == 0:
        return rows
    norms = np.linalg.norm(rows, axis=1)
    keep = norms > 0
    return rows[keep] / norms[keep, None]


class FeasibleRegion:
    """Base class for the compact convex sets SMD runs on."""

    kind: str = ""

    @property
    def dim(self) -> int:
        """Dimension of the ambient space."""
        raise NotImplementedError

    @property
    def witness(self) -> Vector:
        """A point of the region, stored at construction."""
        raise NotImplementedError

    def diameter(self) -> float:
        """Euclidean diameter (or an upper bound for it)."""
        raise NotImplementedError

    def tolerance(self, tol: float = FEAS_TOL) -> float:
        """Absolute membership tolerance."""
        return tol * max(1.0, self.diameter())

    def contains(self, x: Vector, tol: float = FEAS_TOL) -> bool:
        """Membership test up to ``tol`` relative to the diameter."""
        raise NotImplementedError

    def check(self, x: Any, name: str = "x") -> Vector:
        """Return ``x`` as an array, raising DomainError if it is infeasible."""
        arr = as_vector(x, self.dim, name)
        if not self.contains(arr):
            raise DomainError(f"{name}={arr.tolist()} is not in the {self.kind} region")
        return arr

    def project(self, y: Vector) -> Vector:
        """Closest point of the region in the Euclidean norm."""
        raise NotImplementedError

    def radius_bound(self, norm: Norm = Norm.L2) -> float:
        """Upper bound on sup ‖x‖, by default through the bounding box."""
        return self.bounding_box().radius_bound(norm)

    def bounding_box(self) -> Box:
        """Axis-aligned box containing the region."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> Matrix:
        """Draw up to ``n`` uniform points, one per row."""
        raise NotImplementedError

    def tangent_contains(self, p: Vector, direction: Vector) -> bool:
        """Whether ``direction`` belongs to the tangent cone at ``p``."""
        raise NotImplementedError

    def tangent_generators(self, p: Vector) -> Matrix:
        """Unit generators of the tangent cone at ``p``, one per row."""
        raise NotImplementedError

    def polar_contains(self, p: Vector, y: Vector, tol: float = 1e-12) -> bool:
        """Whether ``y`` belongs to the polar cone of the tangent cone at ``p``."""
        generators = self.tangent_generators(p)
        if generators.size == 0:
            return True
        scale = max(1.0, float(np.linalg.norm(y)))
        return bool(np.all(generators @ y <= tol * scale))

    def vertices(self) -> Matrix:
        """Vertices of the region, one per row."""
        raise UnsupportedPairingError(
            f"vertex enumeration is not available for {self.kind}"
        )

    def to_dict(self) -> Dict[str, Any]:
        """Serializable description (inverse of ``region_from_spec``)."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Box(FeasibleRegion):
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: Vector
    upper: Vector
    kind: str = field(default="box", init=False)

    def __post_init__(self) -> None:
        lower = as_vector(self.lower, name="lower")
        upper = as_vector(self.upper, lower.shape[0], "upper")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise DomainError("box bounds must be finite")
        if not np.all(lower < upper):
            raise DomainError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, dim: int, low: float = 0.0, high: float = 1.0) -> Box:
        """The cube [low, high]^dim."""
        return cls(np.full(dim, low), np.full(dim, high))

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    @property
    def witness(self) -> Vector:
        return 0.5 * (self.lower + self.upper)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def contains(self, x: Vector, tol: float = FEAS_TOL) -> bool:
        eps = self.tolerance(tol)
        return bool(np.all(x >= self.lower - eps) and np.all(x <= self.upper + eps))

    def project(self, y: Vector) -> Vector:
        return np.clip(y, self.lower, self.upper)

    def radius_bound(self, norm: Norm = Norm.L2) -> float:
        corner = np.maximum(np.abs(self.lower), np.abs(self.upper))
        if norm is Norm.L1:
            return float(np.sum(corner))
        return float(np.linalg.norm(corner))

    def bounding_box(self) -> Box:
        return self

    def sample(self, rng: np.random.Generator, n: int) -> Matrix:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def _at_bounds(
        self, p: Vector
    ) -> tuple[npt.NDArray[np.bool_], npt.NDArray[np.bool_]]:
        eps = self.tolerance()
        return p <= self.lower + eps, p >= self.upper - eps

    def tangent_contains(self, p: Vector, direction: Vector) -> bool:
        at_lower, at_upper = self._at_bounds(p)
        return bool(
            np.all(direction[at_lower] >= 0) and np.all(direction[at_upper] <= 0)
        )

    def tangent_generators(self, p: Vector) -> Matrix:
        at_lower, at_upper = self._at_bounds(p)
        eye = np.eye(self.dim)
        return np.vstack([eye[~at_upper], -eye[~at_lower]])

    def vertices(self) -> Matrix:
        corners = itertools.product(*zip(self.lower, self.upper))
        return np.array(list(corners), dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "box",
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


def project_simplex(y: Vector) -> Vector:
    """Euclidean projection onto the probability simplex by sort and threshold.

    When a single coordinate survives the threshold the result is the exact
    unit vector, so iterates that reach a vertex equal it bitwise.
    """
    u = np.sort(y)[::-1]
    thresholds = (np.cumsum(u) - 1.0) / np.arange(1, y.shape[0] + 1)
    k = int(np.nonzero(thresholds < u)[0][-1])
    if k == 0:
        x = np.zeros_like(y)
        x[int(np.argmax(y))] = 1.0
        return x
    return np.clip(y - thresholds[k], 0.0, None)


@dataclass(frozen=True, eq=False)
class Simplex(FeasibleRegion):
    """Probability simplex ``{x >= 0, sum(x) = 1}`` in R^dim."""

    n: int
    kind: str = field(default="simplex", init=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError("simplex dimension must be at least 1")

    @property
    def dim(self) -> int:
        return self.n

    @property
    def witness(self) -> Vector:
        return np.full(self.n, 1.0 / self.n)

    def diameter(self) -> float:
        return float(np.sqrt(2.0)) if self.n > 1 else 0.0

    def contains(self, x: Vector, tol: float = FEAS_TOL) -> bool:
        eps = self.tolerance(tol)
        return bool(np.all(x >= -eps) and abs(float(np.sum(x)) - 1.0) <= eps)

    def project(self, y: Vector) -> Vector:
        return project_simplex(y)

    def radius_bound(self, norm: Norm = Norm.L2) -> float:
        return 1.0

    def bounding_box(self) -> Box:
        return Box.cube(self.n, 0.0, 1.0)

    def sample(self, rng: np.random.Generator, n: int) -> Matrix:
        return rng.dirichlet(np.ones(self.n), size=n)

    def tangent_contains(self, p: Vector, direction: Vector) -> bool:
        eps = self.tolerance()
        scale = max(1.0, float(np.linalg.norm(direction)))
        if abs(float(np.sum(direction))) > eps * scale:
            return False
        return bool(np.all(direction[p <= eps] >= -eps * scale))

    def tangent_generators(self, p: Vector) -> Matrix:
        support = np.nonzero(p > self.tolerance())[0]
        eye = np.eye(self.n)
        rows = [eye[j] - eye[i] for i in support for j in range(self.n) if j != i]
        if not rows:
            return np.zeros((0, self.n))
        return _unit_rows(np.array(rows))

    def vertices(self) -> Matrix:
        return np.eye(self.n)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "simplex", "dim": self.n}


@dataclass(frozen=True, eq=False)
class Ball(FeasibleRegion):
    """Euclidean ball of a given center and radius."""

    center: Vector
    radius: float
    kind: str = field(default="ball", init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", as_vector(self.center, name="center"))
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return int(self.center.shape[0])

    @property
    def witness(self) -> Vector:
        return self.center.copy()

    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, x: Vector, tol: float = FEAS_TOL) -> bool:
        distance = np.linalg.norm(x - self.center)
        return bool(distance <= self.radius + self.tolerance(tol))

    def project(self, y: Vector) -> Vector:
        offset = y - self.center
        length = float(np.linalg.norm(offset))
        if length <= self.radius:
            return y.copy()
        return self.center + offset * (self.radius / length)

    def radius_bound(self, norm: Norm = Norm.L2) -> float:
        if norm is Norm.L1:
            return float(np.sum(np.abs(self.center)) + self.radius * np.sqrt(self.dim))
        return float(np.linalg.norm(self.center) + self.radius)

    def bounding_box(self) -> Box:
        return Box(self.center - self.radius, self.center + self.radius)

    def sample(self, rng: np.random.Generator, n: int) -> Matrix:
        directions = rng.standard_normal((n, self.dim))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        radii = self.radius * rng.uniform(size=n) ** (1.0 / self.dim)
        return self.center + directions * radii[:, None]

    def _on_boundary(self, p: Vector) -> bool:
        return bool(np.linalg.norm(p - self.center) >= self.radius - self.tolerance())

    def tangent_contains(self, p: Vector, direction: Vector) -> bool:
        if not self._on_boundary(p):
            return True
        return bool(np.dot(direction, p - self.center) <= 0.0)

    def tangent_generators(self, p: Vector) -> Matrix:
        if self._on_boundary(p):
            raise UnsupportedPairingError(
                "the tangent cone at a smooth ball boundary point is not polyhedral"
            )
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye])

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class HPolytope(FeasibleRegion):
    """Polytope ``{A x <= b}`` carried together with a bounding box."""

    A: Matrix
    b: Vector
    box: Box
    kind: str = field(default="hpolytope", init=False)
    _witness: Vector = field(init=False, repr=False)

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        b = as_vector(self.b, A.shape[0], "b")
        if A.shape[1] != self.box.dim:
            raise DomainError("A and the bounding box disagree on the dimension")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_witness", self._chebyshev_center())

    def _chebyshev_center(self) -> Vector:
        """Center of the largest ball inside the polytope and box."""
        A, b = self.constraints()
        norms = np.linalg.norm(A, axis=1)
        cost = np.zeros(self.dim + 1)
        cost[-1] = -1.0
        result = linprog(
            cost,
            A_ub=np.hstack([A, norms[:, None]]),
            b_ub=b,
            bounds=[(None, None)] * self.dim + [(0, None)],
            method="highs",
        )
        if result.status != 0:
            raise DomainError("the polytope is empty")
        witness = np.asarray(result.x[:-1], dtype=np.float64)
        if not np.all(self.A @ witness <= self.b + FEAS_TOL):
            raise DomainError("could not find a feasible witness for the polytope")
        return witness

    def constraints(self) -> tuple[Matrix, Vector]:
        """All halfspaces, the bounding box included."""
        eye = np.eye(self.dim)
        A = np.vstack([self.A, eye, -eye])
        b = np.concatenate([self.b, self.box.upper, -self.box.lower])
        return A, b

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def witness(self) -> Vector:
        return self._witness.copy()

    def diameter(self) -> float:
        return self.box.diameter()

    def contains(self, x: Vector, tol: float = FEAS_TOL) -> bool:
        A, b = self.constraints()
        eps = self.tolerance(tol) * np.linalg.norm(A, axis=1)
        return bool(np.all(A @ x <= b + eps))

    def project(self, y: Vector) -> Vector:
        """Dykstra's alternating projection over the halfspaces.

        A full cycle can leave ``x`` unchanged while the increments still
        move, so the loop stops only once ``x`` and the increments are both
        stationary and ``x`` is feasible.
        """
        A, b = self.constraints()
        x = np.asarray(y, dtype=np.float64).copy()
        if np.all(A @ x <= b):
            return x
        sq_norms = np.einsum("ij,ij->i", A, A)
        row_norms = np.sqrt(sq_norms)
        tol = DYKSTRA_TOL * max(1.0, float(np.linalg.norm(x)))
        increments = np.zeros_like(A)
        for _ in range(DYKSTRA_MAX_ITER):
            previous = x.copy()
            previous_increments = increments.copy()
            for i in range(A.shape[0]):
                z = x + increments[i]
                excess = float(A[i] @ z - b[i])
                x = z - (max(excess, 0.0) / sq_norms[i]) * A[i]
                increments[i] = z - x
            moved = float(np.linalg.norm(x - previous))
            shifted = float(
                np.sum(np.linalg.norm(increments - previous_increments, axis=1))
            )
            violation = float(np.max((A @ x - b) / row_norms))
            if max(moved, shifted, violation) <= tol:
                break
        else:
            _LOG.warning(
                "Dykstra projection hit the iteration cap of %d", DYKSTRA_MAX_ITER
            )
        return x

    def bounding_box(self) -> Box:
        return self.box

    def sample(self, rng: np.random.Generator, n: int) -> Matrix:
        accepted: List[Vector] = []
        draws = 0
        while len(accepted) < n and draws < REJECTION_DRAWS_PER_POINT * n:
            batch = self.bounding_box().sample(rng, n)
            draws += n
            A, b = self.constraints()
            inside = np.all(batch @ A.T <= b, axis=1)
            accepted.extend(batch[inside])
        if len(accepted) < n:
            _LOG.warning(
                "polytope sampler accepted only %d of %d points", len(accepted), n
            )
        if not accepted:
            return np.zeros((0, self.dim))
        return np.array(accepted[:n])

    def _active_rows(self, p: Vector) -> Matrix:
        A, b = self.constraints()
        eps = self.tolerance() * np.linalg.norm(A, axis=1)
        return A[np.abs(A @ p - b) <= eps]

    def tangent_contains(self, p: Vector, direction: Vector) -> bool:
        active = self._active_rows(p)
        scale = max(1.0, float(np.linalg.norm(direction)))
        return bool(np.all(active @ direction <= self.tolerance() * scale))

    def tangent_generators(self, p: Vector) -> Matrix:
        """Extreme rays of the tangent cone plus both signs of its lineality."""
        active = self._active_rows(p)
        if active.shape[0] == 0:
            eye = np.eye(self.dim)
            return np.vstack([eye, -eye])
        lineality = null_space(active)
        rows: List[Vector] = [sign * col for col in lineality.T for sign in (1.0, -1.0)]
        pointed_rank = self.dim - lineality.shape[1]
        for subset in itertools.combinations(range(active.shape[0]), pointed_rank - 1):
            system = (
                np.vstack([active[list(subset)], lineality.T])
                if subset
                else lineality.T
            )
            ray_space = null_space(system) if system.shape[0] else np.eye(self.dim)
            if ray_space.shape[1] != 1:
                continue
            ray = ray_space[:, 0]
            for candidate in (ray, -ray):
                if np.all(active @ candidate <= 1e-9):
                    rows.append(candidate)
                    break
        if not rows:
            return np.zeros((0, self.dim))
        unique = np.unique(np.round(_unit_rows(np.array(rows)), 12), axis=0)
        return _unit_rows(unique)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "hpolytope",
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "bounding_box": self.box.to_dict(),
        }


def region_from_spec(spec: Dict[str, Any]) -> FeasibleRegion:
    """Build a region from its dictionary description."""
    kind = str(spec.get("kind", "")).lower()
    if kind == "box":
        return Box(spec["lower"], spec["upper"])
    if kind == "simplex":
        return Simplex(int(spec["dim"]))
    if kind == "ball":
        return Ball(spec["center"], float(spec["radius"]))
    if kind == "hpolytope":
        box_spec = spec["bounding_box"]
        box = Box(box_spec["lower"], box_spec["upper"])
        return HPolytope(spec["A"], spec["b"], box)
    raise DomainError(f"unknown region kind {kind!r}")
