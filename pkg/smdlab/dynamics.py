"""Mean dynamics ẏ = -∇g(Q(y)) and the comparison of SMD with its flow."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from smdlab.core import (
    Regularizer,
    check_pairing,
    dual_norm,
    mirror_map,
    set_fenchel_coupling,
)
from smdlab.errors import DomainError, FlowBlowUpError, RangeError
from smdlab.problem_base import StochasticProblem
from smdlab.regions import FeasibleRegion, Matrix, Vector, as_vector
from smdlab.smd import RunTrace, StepSchedule

_LOG = logging.getLogger(__name__)

DEFAULT_DT = 1e-2
# Allowed per-step increase of the Fenchel coupling along a flow, in units of dt.
LYAPUNOV_SLACK = 1e-6

VectorField = Callable[[Vector], Vector]


def mean_field(
    problem: StochasticProblem, h: Regularizer, region: FeasibleRegion
) -> VectorField:
    """The right-hand side y ↦ -∇g(Q(y))."""
    check_pairing(h, region)

    def field(y: Vector) -> Vector:
        return -problem.mean_gradient(mirror_map(h, region, y))

    return field


def rk4_step(field: VectorField, y: Vector, dt: float) -> Vector:
    """One classical fourth-order Runge-Kutta step."""
    k1 = field(y)
    k2 = field(y + 0.5 * dt * k1)
    k3 = field(y + 0.5 * dt * k2)
    k4 = field(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _steps(T: float, dt: float) -> int:
    if not (T > 0 and dt > 0):
        raise DomainError("T and dt must be positive")
    return max(1, int(round(T / dt)))


@dataclass
class FlowTrajectory:
    """Sample path of the mean dynamics on a uniform time grid."""

    times: Vector
    dual_states: Matrix
    primal_states: Matrix
    dt: float
    regularizer: Regularizer
    region: FeasibleRegion

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def endpoint(self) -> Vector:
        """Final dual state."""
        return self.dual_states[-1]


def integrate_flow(
    problem: StochasticProblem,
    h: Regularizer,
    region: FeasibleRegion,
    y0: Vector,
    T: float,
    dt: float = DEFAULT_DT,
) -> FlowTrajectory:
    """Integrate ẏ = -∇g(Q(y)) from ``y0`` over [0, T] with RK4.

    Q is only Lipschitz across the faces of the region, where RK4 loses its
    order; halve ``dt`` and compare endpoints when accuracy matters there.
    """
    n_steps = _steps(T, dt)
    field = mean_field(problem, h, region)
    y = as_vector(y0, region.dim, "y0").copy()
    duals = [y]
    for step in range(n_steps):
        y = rk4_step(field, y, dt)
        if not np.all(np.isfinite(y)):
            raise FlowBlowUpError(
                f"{problem.name}: flow state is not finite at t={(step + 1) * dt:g}"
            )
        duals.append(y)
    dual_states = np.array(duals)
    primal_states = np.array([mirror_map(h, region, state) for state in dual_states])
    times = dt * np.arange(n_steps + 1)
    return FlowTrajectory(times, dual_states, primal_states, dt, h, region)


def flow_endpoint(
    problem: StochasticProblem,
    h: Regularizer,
    region: FeasibleRegion,
    y0: Vector,
    T: float,
    dt: float = DEFAULT_DT,
) -> Vector:
    """Φ_T(y0) without recording the path."""
    field = mean_field(problem, h, region)
    y = as_vector(y0, region.dim, "y0").copy()
    for _ in range(_steps(T, dt)):
        y = rk4_step(field, y, dt)
    if not np.all(np.isfinite(y)):
        raise FlowBlowUpError(f"{problem.name}: flow state is not finite at t={T:g}")
    return y


@dataclass(frozen=True)
class FenchelProfile:
    """F(X*, y(t_i)) along a flow together with its discrete derivative."""

    values: Vector
    derivatives: Vector
    tolerance: float

    @property
    def max_increase(self) -> float:
        """Largest single-step increase of F."""
        if self.values.shape[0] < 2:
            return 0.0
        return float(np.max(np.diff(self.values)))

    @property
    def monotone(self) -> bool:
        """Whether F never increases by more than the tolerance in one step."""
        return self.max_increase <= self.tolerance


def fenchel_along_flow(
    traj: FlowTrajectory, xstar_generators: Matrix
) -> FenchelProfile:
    """F(X*, y(t)) at every sample of the trajectory."""
    values = np.array(
        [
            set_fenchel_coupling(traj.regularizer, traj.region, xstar_generators, y)
            for y in traj.dual_states
        ]
    )
    derivatives = np.diff(values) / traj.dt
    profile = FenchelProfile(values, derivatives, LYAPUNOV_SLACK * traj.dt)
    if not profile.monotone:
        _LOG.info(
            "Fenchel coupling increases along the flow by up to %.3e",
            profile.max_increase,
        )
    return profile


def uniform_decrease_horizon(
    problem: StochasticProblem,
    h: Regularizer,
    region: FeasibleRegion,
    y0s: Sequence[Vector],
    eps: float,
    t_max: float = 200.0,
    dt: float = DEFAULT_DT,
) -> Optional[float]:
    """First grid time τ with F(X*, Φ_τ(y)) <= max{ε/2, F(X*, y) - ε/2}.

    The condition has to hold for every start y.
    """
    holds: Optional[np.ndarray] = None
    times: Optional[Vector] = None
    for y0 in y0s:
        traj = integrate_flow(problem, h, region, y0, t_max, dt)
        values = fenchel_along_flow(traj, problem.minimizers).values
        bound = max(eps / 2.0, values[0] - eps / 2.0)
        current = values <= bound
        holds = current if holds is None else holds & current
        times = traj.times
    if holds is None or times is None or not np.any(holds):
        return None
    return float(times[int(np.argmax(holds))])


@dataclass(frozen=True, eq=False)
class InterpolatedProcess:
    """Piecewise-affine interpolation of the dual iterates on the times τ_n."""

    breakpoints: Vector
    anchors: Matrix

    def __post_init__(self) -> None:
        breakpoints = as_vector(self.breakpoints, name="breakpoints")
        anchors = np.atleast_2d(np.asarray(self.anchors, dtype=np.float64))
        if anchors.shape[0] != breakpoints.shape[0]:
            raise DomainError("need one anchor per breakpoint")
        if breakpoints.shape[0] < 2 or np.any(np.diff(breakpoints) <= 0):
            raise DomainError("breakpoints must be strictly increasing, at least two")
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "anchors", anchors)

    @classmethod
    def from_duals(
        cls, schedule: StepSchedule, duals: Sequence[Vector]
    ) -> InterpolatedProcess:
        """Process through Y_0, ..., Y_N with τ_n = α_1 + ... + α_n."""
        anchors = np.array(duals)
        return cls(schedule.breakpoints(anchors.shape[0] - 1), anchors)

    @classmethod
    def from_trace(cls, trace: RunTrace) -> InterpolatedProcess:
        """Process of an unthinned run."""
        if trace.record_every != 1:
            raise DomainError("interpolation needs a trace recorded at every step")
        return cls.from_duals(trace.schedule, trace.duals)

    @property
    def horizon(self) -> float:
        """τ_N."""
        return float(self.breakpoints[-1])


def interpolate(process: InterpolatedProcess, t: float) -> Vector:
    """Y(t) = Y_{n-1} + (t - τ_{n-1}) (Y_n - Y_{n-1}) / α_n for t in [τ_{n-1}, τ_n]."""
    taus = process.breakpoints
    if not taus[0] <= t <= taus[-1]:
        raise RangeError(f"t={t} outside [{taus[0]}, {taus[-1]}]")
    k = int(np.searchsorted(taus, t, side="right")) - 1
    if k >= taus.shape[0] - 1:
        return process.anchors[-1].copy()
    weight = (t - taus[k]) / (taus[k + 1] - taus[k])
    return process.anchors[k] + weight * (process.anchors[k + 1] - process.anchors[k])


def apt_deviation(  # pylint: disable=too-many-arguments
    process: InterpolatedProcess,
    problem: StochasticProblem,
    h: Regularizer,
    region: FeasibleRegion,
    t_list: Sequence[float],
    T: float,
    dt: float = DEFAULT_DT,
) -> Vector:
    """max over h in [0, T] (on the dt grid) of ‖Y(t + h) - Φ_h(Y(t))‖* for each t."""
    n_steps = _steps(T, dt)
    field = mean_field(problem, h, region)
    deviations: List[float] = []
    for t in t_list:
        if t < 0 or t + T > process.horizon:
            raise RangeError(f"[{t}, {t + T}] is not inside [0, {process.horizon}]")
        y = interpolate(process, t)
        worst = 0.0
        for step in range(1, n_steps + 1):
            y = rk4_step(field, y, dt)
            gap = interpolate(process, min(t + step * dt, process.horizon)) - y
            worst = max(worst, dual_norm(gap, h.paired_norm))
        deviations.append(worst)
    return np.array(deviations)


def export_csv(traj: FlowTrajectory, xstar_generators: Matrix, path: Path) -> Path:
    """Write the trajectory with columns t, y_1..y_d, x_1..x_d, F."""
    dim = traj.dual_states.shape[1]
    fenchel = fenchel_along_flow(traj, xstar_generators).values
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fhandle:
        writer = csv.writer(fhandle)
        writer.writerow(
            ["t"]
            + [f"y_{i + 1}" for i in range(dim)]
            + [f"x_{i + 1}" for i in range(dim)]
            + ["F"]
        )
        states = zip(traj.times, traj.dual_states, traj.primal_states, fenchel)
        for t, y, x, value in states:
            row = [float(t), *y, *x, float(value)]
            writer.writerow([repr(float(v)) for v in row])
    return path
