"""Stochastic mirror descent, its Euclidean special case SGD, and step schedules."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import zeta

from smdlab.core import (
    EUCLIDEAN,
    Regularizer,
    check_pairing,
    mirror_map,
    set_distance,
    set_fenchel_coupling,
)
from smdlab.errors import DivergenceError, DomainError
from smdlab.problem_base import StochasticProblem
from smdlab.problems import sample_gradient
from smdlab.regions import FeasibleRegion, Matrix, Vector, as_vector
from smdlab.rng import Stream, make_rng

_LOG = logging.getLogger(__name__)

# Horizon at which validate_schedule reports partial sums.
REPORT_HORIZON = 1_000_000


@dataclass(frozen=True)
class StepSchedule:
    """α_n = base_alpha / (n + offset)^β for n >= 1."""

    base_alpha: float
    exponent_beta: float
    offset: int = 0

    def __post_init__(self) -> None:
        if self.offset < 0:
            raise DomainError("schedule offset must be non-negative")

    def alpha(self, n: int) -> float:
        """Step α_n; the first step applied by SMD is α_1."""
        if n < 1:
            raise DomainError("step indices start at 1")
        return self.base_alpha / float(n + self.offset) ** self.exponent_beta

    def alphas(self, n_max: int) -> Vector:
        """α_1, ..., α_{n_max}."""
        steps = np.arange(1, n_max + 1, dtype=np.float64) + self.offset
        return self.base_alpha / steps**self.exponent_beta

    def breakpoints(self, n_max: int) -> Vector:
        """τ_0 = 0 and τ_n = α_1 + ... + α_n for n <= n_max."""
        return np.concatenate([[0.0], np.cumsum(self.alphas(n_max))])

    def sum_of_squares(self) -> float:
        """Σ_{k>=1} α_k², through the Hurwitz zeta function."""
        if self.exponent_beta <= 0.5:
            return math.inf
        return self.base_alpha**2 * float(
            zeta(2.0 * self.exponent_beta, 1.0 + self.offset)
        )

    def scaled(self, factor: float) -> StepSchedule:
        """Same schedule with base_alpha multiplied by ``factor``."""
        return replace(self, base_alpha=self.base_alpha * factor)


@dataclass(frozen=True)
class ScheduleReport:
    """Outcome of the ℓ²-ℓ¹ check of a schedule."""

    passed: bool
    reasons: List[str]
    horizon: int
    partial_sum: float
    partial_sum_of_squares: float


def validate_schedule(
    schedule: StepSchedule, horizon: int = REPORT_HORIZON
) -> ScheduleReport:
    """Check Σ α_n² < ∞ and Σ α_n = ∞, i.e. β in (1/2, 1] and base_alpha > 0."""
    reasons: List[str] = []
    if not schedule.base_alpha > 0:
        reasons.append("base_alpha must be positive")
    if schedule.exponent_beta <= 0.5:
        reasons.append("beta <= 1/2: the squared steps are not summable")
    if schedule.exponent_beta > 1.0:
        reasons.append("beta > 1: the steps are summable")
    alphas = schedule.alphas(horizon)
    return ScheduleReport(
        passed=not reasons,
        reasons=reasons,
        horizon=horizon,
        partial_sum=float(np.sum(alphas)),
        partial_sum_of_squares=float(np.sum(alphas**2)),
    )


def confidence_schedule(
    base: StepSchedule,
    delta: float,
    eps_bar: float,
    R: float,
    Vstar: float,
    K: float,
    B: float,
) -> StepSchedule:
    """Shrink ``base`` until Σ α_k² <= min{δ ε̄² / (2 R² V*²), K δ ε̄ / B²}.

    The bound is the step-size budget under which SMD started close enough
    to a locally coherent minimum stays in its basin with probability at
    least 1 - δ. V* and B are usually estimates (see
    ``harness.estimate_constants``), so the guarantee is relative to them.
    """
    positives = (("eps_bar", eps_bar), ("R", R), ("Vstar", Vstar), ("K", K), ("B", B))
    for name, value in positives:
        if not value > 0:
            raise DomainError(f"{name} must be positive")
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    report = validate_schedule(base, horizon=1)
    if not report.passed:
        raise DomainError("invalid base schedule: " + "; ".join(report.reasons))
    budget = min(
        delta * eps_bar**2 / (2.0 * R**2 * Vstar**2), K * delta * eps_bar / B**2
    )
    factor = min(1.0, math.sqrt(budget / base.sum_of_squares()))
    _LOG.debug("confidence schedule: budget %.3e, scale factor %.3e", budget, factor)
    return base.scaled(factor)


def smd_step(
    h: Regularizer,
    region: FeasibleRegion,
    schedule: StepSchedule,
    n: int,
    y: Vector,
    grad_sample: Vector,
) -> tuple[Vector, Vector]:
    """Y_{n+1} = Y_n - α_{n+1} ∇G and X_{n+1} = Q(Y_{n+1})."""
    if n < 0:
        raise DomainError("n must be non-negative")
    y_next = y - schedule.alpha(n + 1) * grad_sample
    return y_next, mirror_map(h, region, y_next)


class StepState(NamedTuple):
    """One step of an SMD run: index, primal iterate, dual score."""

    n: int
    x: Vector
    y: Vector


StepCallback = Callable[[int, Vector, Vector], None]


def iterate(
    problem: StochasticProblem,
    h: Regularizer,
    schedule: StepSchedule,
    n_iters: int,
    rng: np.random.Generator,
    y0: Optional[Vector] = None,
) -> Iterator[StepState]:
    """Yield (n, X_n, Y_n) for n = 0, ..., n_iters."""
    region = problem.region
    check_pairing(h, region)
    y = np.zeros(region.dim) if y0 is None else as_vector(y0, region.dim, "y0").copy()
    x = mirror_map(h, region, y)
    yield StepState(0, x, y)
    for n in range(n_iters):
        y, x = smd_step(h, region, schedule, n, y, sample_gradient(problem, x, rng))
        if not np.all(np.isfinite(y)):
            raise DivergenceError(
                f"{problem.name}: dual state is not finite at step {n + 1}"
            )
        yield StepState(n + 1, x, y)


@dataclass
class RunTrace:  # pylint: disable=too-many-instance-attributes
    """Thinned record of an SMD run.

    Rows are recorded at n = 0, r, 2r, ... and at the final index, where r is
    ``record_every``. ``ergodic_distances`` measures the running average of
    all iterates, not only of the recorded ones.
    """

    problem_name: str
    regularizer: Regularizer
    schedule: StepSchedule
    seed: int
    n_iters: int
    record_every: int
    steps: List[int] = field(default_factory=list)
    iterates: List[Vector] = field(default_factory=list)
    duals: List[Vector] = field(default_factory=list)
    distances: List[float] = field(default_factory=list)
    fenchel: List[float] = field(default_factory=list)
    ergodic_distances: List[float] = field(default_factory=list)
    wall_time: float = 0.0

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final_iterate(self) -> Vector:
        """Last recorded X_n."""
        return self.iterates[-1]

    @property
    def final_distance(self) -> float:
        """dist(X*, X_N)."""
        return self.distances[-1]

    def iterate_matrix(self) -> Matrix:
        """Recorded iterates stacked one per row."""
        return np.array(self.iterates)

    def stream(self) -> Iterator[StepState]:
        """Replay the recorded rows as a step stream."""
        for n, x, y in zip(self.steps, self.iterates, self.duals):
            yield StepState(n, x, y)


def run(
    problem: StochasticProblem,
    h: Regularizer,
    schedule: StepSchedule,
    n_iters: int,
    seed: int,
    record_every: int = 1,
    y0: Optional[Vector] = None,
    callbacks: Sequence[StepCallback] = (),
) -> RunTrace:
    """Run stochastic mirror descent for ``n_iters`` steps and record a thinned trace.

    ``callbacks`` receive every (n, X_n, Y_n), thinning notwithstanding.
    """
    if n_iters < 0 or record_every < 1:
        raise DomainError("n_iters must be >= 0 and record_every >= 1")
    region = problem.region
    trace = RunTrace(problem.name, h, schedule, seed, n_iters, record_every)
    running_sum = np.zeros(region.dim)
    started = time.perf_counter()
    for state in iterate(problem, h, schedule, n_iters, make_rng(seed, Stream.RUN), y0):
        running_sum += state.x
        for callback in callbacks:
            callback(state.n, state.x, state.y)
        if state.n % record_every == 0 or state.n == n_iters:
            trace.steps.append(state.n)
            trace.iterates.append(state.x)
            trace.duals.append(state.y)
            trace.distances.append(set_distance(problem.minimizers, state.x))
            trace.fenchel.append(
                set_fenchel_coupling(h, region, problem.minimizers, state.y)
            )
            trace.ergodic_distances.append(
                set_distance(problem.minimizers, running_sum / (state.n + 1))
            )
    trace.wall_time = time.perf_counter() - started
    _LOG.info(
        "%s seed %d: %d steps in %.2fs, final dist %.3e",
        problem.name,
        seed,
        n_iters,
        trace.wall_time,
        trace.final_distance,
    )
    return trace


def sgd_run(
    problem: StochasticProblem,
    schedule: StepSchedule,
    n_iters: int,
    seed: int,
    record_every: int = 1,
    y0: Optional[Vector] = None,
    callbacks: Sequence[StepCallback] = (),
) -> RunTrace:
    """SMD with the Euclidean regularizer: X_n = proj_X(Y_n)."""
    return run(problem, EUCLIDEAN, schedule, n_iters, seed, record_every, y0, callbacks)
