"""Regularizers, mirror maps, conjugates and the Fenchel coupling."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
from scipy.special import entr, logsumexp, softmax

from smdlab.errors import DomainError, UnsupportedPairingError
from smdlab.regions import FeasibleRegion, Matrix, Norm, Simplex, Vector, as_vector


class RegularizerKind(str, Enum):
    """Penalty functions inducing a mirror map."""

    EUCLIDEAN = "euclidean"
    ENTROPIC = "entropic"


_PAIRED_NORM = {
    RegularizerKind.EUCLIDEAN: Norm.L2,
    RegularizerKind.ENTROPIC: Norm.L1,
}


@dataclass(frozen=True)
class Regularizer:
    """A K-strongly convex penalty function h on the feasible region."""

    kind: RegularizerKind
    strong_convexity_K: float = 1.0
    paired_norm: Norm = Norm.L2

    def __post_init__(self) -> None:
        if not self.strong_convexity_K > 0:
            raise DomainError("the strong convexity modulus must be positive")
        if _PAIRED_NORM[self.kind] is not self.paired_norm:
            raise UnsupportedPairingError(
                f"{self.kind.value} regularizer is strongly convex w.r.t. "
                f"{_PAIRED_NORM[self.kind].value}, not {self.paired_norm.value}"
            )

    @classmethod
    def euclidean(cls) -> Regularizer:
        """h(x) = ½‖x‖₂², 1-strongly convex w.r.t. ℓ²."""
        return cls(RegularizerKind.EUCLIDEAN, 1.0, Norm.L2)

    @classmethod
    def entropic(cls) -> Regularizer:
        """Negative Gibbs entropy on the simplex, 1-strongly convex w.r.t. ℓ¹."""
        return cls(RegularizerKind.ENTROPIC, 1.0, Norm.L1)

    @classmethod
    def from_name(cls, name: str) -> Regularizer:
        """Look a regularizer up by its name."""
        try:
            kind = RegularizerKind(name.lower())
        except ValueError as exc:
            raise UnsupportedPairingError(f"unknown regularizer {name!r}") from exc
        return cls.euclidean() if kind is RegularizerKind.EUCLIDEAN else cls.entropic()

    @property
    def is_surjective(self) -> bool:
        """Whether the induced mirror map reaches every point of the region."""
        return self.kind is RegularizerKind.EUCLIDEAN


EUCLIDEAN = Regularizer.euclidean()
ENTROPIC = Regularizer.entropic()


def check_pairing(h: Regularizer, region: FeasibleRegion) -> None:
    """Raise if ``h`` cannot be used on ``region``."""
    if h.kind is RegularizerKind.ENTROPIC and not isinstance(region, Simplex):
        raise UnsupportedPairingError(
            f"the entropic regularizer needs a simplex, got a {region.kind} region"
        )


def regularizer_value(h: Regularizer, region: FeasibleRegion, x: Any) -> float:
    """Value h(x) of the regularizer at a feasible point."""
    check_pairing(h, region)
    point = region.check(x)
    if h.kind is RegularizerKind.ENTROPIC:
        # entr(t) = -t log t with entr(0) = 0
        return float(-np.sum(entr(point)))
    return 0.5 * float(point @ point)


def mirror_map(h: Regularizer, region: FeasibleRegion, y: Any) -> Vector:
    """Q(y) = argmax_{x in X} {<y, x> - h(x)}."""
    check_pairing(h, region)
    scores = as_vector(y, region.dim, "y")
    if h.kind is RegularizerKind.ENTROPIC:
        x = softmax(scores)
        return x / np.sum(x)
    return region.project(scores)


def conjugate_value(h: Regularizer, region: FeasibleRegion, y: Any) -> float:
    """h*(y) = max_{x in X} {<y, x> - h(x)}."""
    check_pairing(h, region)
    scores = as_vector(y, region.dim, "y")
    if h.kind is RegularizerKind.ENTROPIC:
        return float(logsumexp(scores))
    x = region.project(scores)
    return float(scores @ x - 0.5 * (x @ x))


def fenchel_coupling(h: Regularizer, region: FeasibleRegion, p: Any, y: Any) -> float:
    """F(p, y) = h(p) + h*(y) - <y, p>, clipped at zero against rounding."""
    point = region.check(p, "p")
    scores = as_vector(y, region.dim, "y")
    value = regularizer_value(h, region, point) + conjugate_value(h, region, scores)
    return max(value - float(scores @ point), 0.0)


def set_fenchel_coupling(
    h: Regularizer, region: FeasibleRegion, generators: Matrix, y: Any
) -> float:
    """F(S, y), minimized over the stored generator points of S."""
    return min(fenchel_coupling(h, region, p, y) for p in np.atleast_2d(generators))


def dual_norm(v: Any, paired_norm: Norm) -> float:
    """‖v‖* = sup{<v, x> : ‖x‖ <= 1}."""
    vec = np.asarray(v, dtype=np.float64)
    if vec.size == 0:
        return 0.0
    if paired_norm is Norm.L1:
        return float(np.max(np.abs(vec)))
    return float(np.linalg.norm(vec))


def primal_norm(v: Any, norm: Norm) -> float:
    """‖v‖ in the primal norm a regularizer is paired with."""
    vec = np.asarray(v, dtype=np.float64)
    if norm is Norm.L1:
        return float(np.sum(np.abs(vec)))
    return float(np.linalg.norm(vec))


def radius_bound(region: FeasibleRegion, norm: Norm = Norm.L2) -> float:
    """R = sup_{x in X} ‖x‖ (bounding-box bound for polytopes)."""
    return region.radius_bound(norm)


def set_distance(generators: Matrix, x: Vector) -> float:
    """Euclidean distance from ``x`` to the nearest generator point."""
    return float(np.min(np.linalg.norm(np.atleast_2d(generators) - x, axis=1)))
