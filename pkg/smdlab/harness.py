"""Experiment configuration, multi-seed job execution and result persistence."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import yaml
from joblib import Parallel, delayed

from smdlab.coherence import (
    FiniteHitDetector,
    HitCounter,
    certify_lvc,
    certify_vc,
    check_sharpness,
)
from smdlab.core import Regularizer, check_pairing, dual_norm, radius_bound
from smdlab.dynamics import (
    InterpolatedProcess,
    apt_deviation,
    export_csv,
    fenchel_along_flow,
    integrate_flow,
)
from smdlab.errors import ConfigError, JobError, SmdLabError, UnsupportedPairingError
from smdlab.problem_base import NoiseKind, NoiseModel, StochasticProblem
from smdlab.problems import list_problems, make_problem
from smdlab.regions import Vector
from smdlab.rng import Stream, make_rng
from smdlab.smd import (
    RunTrace,
    StepSchedule,
    confidence_schedule,
    run,
    validate_schedule,
)

_LOG = logging.getLogger(__name__)

# Bumped whenever a CSV header or the summary layout changes.
CSV_SCHEMA_VERSION = 1
SUMMARY_FILE = "summary.json"
THREADS_ENV = "SMD_THREADS"

JOBS = ("run", "certify-vc", "certify-lvc", "sharpness", "flow", "apt", "finite-hit")
TRAJECTORY_JOBS = ("run", "finite-hit", "apt")
CERTIFY_JOBS = ("certify-vc", "certify-lvc", "sharpness")
FLOW_JOBS = ("flow", "apt")
QUANTILES = {"q10": 0.1, "q25": 0.25, "median": 0.5, "q75": 0.75, "q90": 0.9}


@dataclass(frozen=True)
class ProblemConfig:
    """Registry name and parameter overrides of the problem."""

    name: str
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ScheduleConfig:
    """Step schedule, optionally shrunk to a confidence target."""

    base_alpha: float
    beta: float
    offset: int = 0
    delta: Optional[float] = None
    eps_bar: Optional[float] = None

    def schedule(self) -> StepSchedule:
        """The configured schedule before any confidence scaling."""
        return StepSchedule(self.base_alpha, self.beta, self.offset)


@dataclass(frozen=True)
class NoiseConfig:
    """Gradient noise model."""

    kind: str = NoiseKind.NONE.value
    scale: float = 0.0

    def model(self) -> NoiseModel:
        """The configured noise model."""
        return NoiseModel(NoiseKind(self.kind), self.scale)


@dataclass(frozen=True)
class JobOptions:  # pylint: disable=too-many-instance-attributes
    """Parameters of the individual jobs."""

    hit_eps: float = 0.05
    tail_window: int = 1_000
    certify_samples: int = 2_000
    candidate: Optional[Tuple[float, ...]] = None
    lvc_radius: float = 0.3
    sharpness_dirs: int = 256
    flow_T: float = 20.0
    flow_dt: float = 1e-2
    flow_spread: float = 1.0
    apt_times: Tuple[float, ...] = (1.0, 5.0, 20.0, 80.0)
    apt_T: float = 5.0
    apt_dt: float = 1e-2
    constant_samples: int = 1_000
    y0: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class ExperimentConfig:  # pylint: disable=too-many-instance-attributes
    """One experiment: a problem, an algorithm setup, seeds and jobs."""

    problem: ProblemConfig
    schedule: ScheduleConfig
    n_iters: int
    regularizer: str = "euclidean"
    seeds: Tuple[int, ...] = (0,)
    noise: NoiseConfig = NoiseConfig()
    record_every: int = 1
    outputs: Path = Path("results")
    jobs: Tuple[str, ...] = ("run",)
    options: JobOptions = JobOptions()


def _mapping(value: Any, path: str) -> Mapping[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(path, "expected a mapping")
    return value


def _reject_unknown(
    section: Mapping[str, Any], allowed: Iterable[str], path: str
) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")


def _number(
    value: Any, path: str, kind: type = float, minimum: Optional[float] = None
) -> Any:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if kind is int and not float(value).is_integer():
        raise ConfigError(path, f"expected an integer, got {value!r}")
    number = kind(value)
    if not math.isfinite(number):
        raise ConfigError(path, "must be finite")
    if minimum is not None and number < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return number


def _optional_number(section: Mapping[str, Any], key: str, prefix: str) -> Any:
    raw = section.get(key)
    return None if raw is None else _number(raw, f"{prefix}.{key}")


def _floats(value: Any, path: str) -> Tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, "expected a list of numbers")
    return tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(value))


def _check_seeds(values: Any, path: str = "seeds") -> Tuple[int, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(path, "expected a nonempty list of seeds")
    seeds = tuple(_number(v, f"{path}[{i}]", int, 0) for i, v in enumerate(values))
    if len(set(seeds)) != len(seeds):
        raise ConfigError(path, "seeds must be distinct")
    return seeds


def _parse_problem(value: Any) -> ProblemConfig:
    if isinstance(value, str):
        value = {"name": value}
    section = _mapping(value, "problem")
    _reject_unknown(section, ("name", "params"), "problem")
    name = section.get("name")
    if name not in list_problems():
        raise ConfigError("problem.name", f"unknown problem {name!r}")
    params = _mapping(section.get("params"), "problem.params")
    return ProblemConfig(str(name), dict(params))


def _parse_schedule(value: Any) -> ScheduleConfig:
    section = _mapping(value, "schedule")
    known = (f.name for f in dataclasses.fields(ScheduleConfig))
    _reject_unknown(section, known, "schedule")
    for key in ("base_alpha", "beta"):
        if key not in section:
            raise ConfigError(f"schedule.{key}", "missing")
    config = ScheduleConfig(
        base_alpha=_number(section["base_alpha"], "schedule.base_alpha"),
        beta=_number(section["beta"], "schedule.beta"),
        offset=_number(section.get("offset", 0), "schedule.offset", int, 0),
        delta=_optional_number(section, "delta", "schedule"),
        eps_bar=_optional_number(section, "eps_bar", "schedule"),
    )
    report = validate_schedule(config.schedule(), horizon=1_000)
    if not report.passed:
        path = "schedule.base_alpha" if not config.base_alpha > 0 else "schedule.beta"
        raise ConfigError(path, "; ".join(report.reasons))
    if (config.delta is None) != (config.eps_bar is None):
        raise ConfigError("schedule.delta", "delta and eps_bar must be given together")
    if config.delta is not None and not 0 < config.delta < 1:
        raise ConfigError("schedule.delta", "must lie in (0, 1)")
    if config.eps_bar is not None and not config.eps_bar > 0:
        raise ConfigError("schedule.eps_bar", "must be positive")
    return config


def _parse_noise(value: Any) -> NoiseConfig:
    section = _mapping(value, "noise")
    _reject_unknown(section, ("kind", "scale"), "noise")
    kind = str(section.get("kind", NoiseKind.NONE.value)).lower()
    if kind not in {k.value for k in NoiseKind}:
        raise ConfigError("noise.kind", f"unknown noise kind {kind!r}")
    scale = _number(section.get("scale", 0.0), "noise.scale", float, 0.0)
    return NoiseConfig(kind, scale)


def _parse_jobs(value: Any) -> Tuple[str, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("jobs", "expected a nonempty list of jobs")
    for i, job in enumerate(value):
        if job not in JOBS:
            known = ", ".join(JOBS)
            raise ConfigError(f"jobs[{i}]", f"unknown job {job!r}; known: {known}")
    return tuple(dict.fromkeys(value))


def _parse_options(value: Any) -> JobOptions:
    section = _mapping(value, "options")
    defaults = JobOptions()
    known = (f.name for f in dataclasses.fields(JobOptions))
    _reject_unknown(section, known, "options")
    parsed: Dict[str, Any] = {}
    for key, raw in section.items():
        path = f"options.{key}"
        default = getattr(defaults, key)
        if key in ("candidate", "y0", "apt_times"):
            if raw is None and key != "apt_times":
                parsed[key] = None
            else:
                parsed[key] = _floats(raw, path)
        elif isinstance(default, int):
            parsed[key] = _number(raw, path, int, 1)
        else:
            parsed[key] = _number(raw, path, float)
            if not parsed[key] > 0:
                raise ConfigError(path, "must be positive")
    return dataclasses.replace(defaults, **parsed)


def parse_config(document: Any) -> ExperimentConfig:
    """Validate a decoded config document."""
    doc = _mapping(document, "<document>")
    _reject_unknown(doc, (f.name for f in dataclasses.fields(ExperimentConfig)), "")
    for key in ("problem", "schedule", "n_iters"):
        if key not in doc:
            raise ConfigError(key, "missing")
    config = ExperimentConfig(
        problem=_parse_problem(doc["problem"]),
        schedule=_parse_schedule(doc["schedule"]),
        n_iters=_number(doc["n_iters"], "n_iters", int, 0),
        regularizer=str(doc.get("regularizer", "euclidean")),
        seeds=_check_seeds(doc.get("seeds", [0])),
        noise=_parse_noise(doc.get("noise")),
        record_every=_number(doc.get("record_every", 1), "record_every", int, 1),
        outputs=Path(str(doc.get("outputs", "results"))),
        jobs=_parse_jobs(doc.get("jobs", ["run"])),
        options=_parse_options(doc.get("options")),
    )
    try:
        h = Regularizer.from_name(config.regularizer)
    except UnsupportedPairingError as exc:
        raise ConfigError("regularizer", str(exc)) from exc
    try:
        problem = build_problem(config)
    except (SmdLabError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError("problem.params", str(exc)) from exc
    try:
        check_pairing(h, problem.region)
    except UnsupportedPairingError as exc:
        raise ConfigError("regularizer", str(exc)) from exc
    for key in ("candidate", "y0"):
        values = getattr(config.options, key)
        if values is not None and len(values) != problem.dim:
            raise ConfigError(f"options.{key}", f"expected {problem.dim} coordinates")
    return config


def load_config(path: Path) -> ExperimentConfig:
    """Read and validate a YAML experiment config."""
    try:
        with path.open("r", encoding="utf-8") as fhandle:
            document = yaml.safe_load(fhandle)
    except FileNotFoundError as exc:
        raise ConfigError("<file>", f"{path} does not exist") from exc
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"not valid YAML: {exc}") from exc
    return parse_config(document)


def with_overrides(
    config: ExperimentConfig,
    seeds: Optional[Sequence[int]] = None,
    out_dir: Optional[Path] = None,
    jobs: Optional[Sequence[str]] = None,
) -> ExperimentConfig:
    """Config with command line overrides applied."""
    changes: Dict[str, Any] = {}
    if seeds is not None:
        changes["seeds"] = _check_seeds(list(seeds), "--seed-override")
    if out_dir is not None:
        changes["outputs"] = Path(out_dir)
    if jobs is not None:
        changes["jobs"] = _parse_jobs(list(jobs))
    return dataclasses.replace(config, **changes)


def restrict_jobs(
    config: ExperimentConfig, allowed: Sequence[str], default: str
) -> ExperimentConfig:
    """Keep only the configured jobs in ``allowed``, or ``default`` if none is."""
    kept = tuple(job for job in config.jobs if job in allowed)
    return dataclasses.replace(config, jobs=kept or (default,))


def resolve_threads(requested: int = 1) -> int:
    """Worker count: the SMD_THREADS environment variable wins over ``requested``."""
    value = os.environ.get(THREADS_ENV)
    if value is None:
        threads = requested
    else:
        try:
            threads = int(value)
        except ValueError as exc:
            raise ConfigError(
                THREADS_ENV, f"expected an integer, got {value!r}"
            ) from exc
    if threads < 1:
        source = THREADS_ENV if value is not None else "--threads"
        raise ConfigError(source, "must be >= 1")
    return threads


def build_problem(config: ExperimentConfig) -> StochasticProblem:
    """Instantiate the configured problem with its noise model."""
    return make_problem(
        config.problem.name, noise=config.noise.model(), **config.problem.params
    )


def estimate_constants(
    problem: StochasticProblem,
    n_samples: int,
    rng: Optional[np.random.Generator] = None,
    h: Optional[Regularizer] = None,
) -> Tuple[float, float, float]:
    """(R, V*, B) estimated from samples of the region.

    B is the largest sampled ‖∇g‖* and V* = max(2B, sqrt(E‖ζ‖*²)).
    """
    rng = rng if rng is not None else make_rng(0, Stream.CONSTANTS)
    norm = (h or Regularizer.euclidean()).paired_norm
    region = problem.region
    points = np.vstack([region.sample(rng, n_samples), problem.minimizers])
    b_hat = max(dual_norm(problem.mean_gradient(x), norm) for x in points)
    noise_root = math.sqrt(problem.noise.second_moment(rng, problem.dim, norm))
    return radius_bound(region, norm), max(2.0 * b_hat, noise_root), b_hat


@dataclass
class SummaryStats:  # pylint: disable=too-many-instance-attributes
    """Aggregate of all jobs of an experiment, keyed by seed."""

    problem: str
    regularizer: str
    schedule: Dict[str, float]
    seeds: List[int]
    constants: Dict[str, float]
    final_distances: Dict[int, float] = field(default_factory=dict)
    ergodic_distances: Dict[int, float] = field(default_factory=dict)
    distance_quantiles: Dict[str, float] = field(default_factory=dict)
    hit_counts: Dict[int, int] = field(default_factory=dict)
    finite_hits: Dict[int, Optional[int]] = field(default_factory=dict)
    gamma_hat: Dict[int, float] = field(default_factory=dict)
    certifications: Dict[str, Dict[int, Dict[str, Any]]] = field(default_factory=dict)
    flows: Dict[int, Dict[str, Any]] = field(default_factory=dict)
    apt: Dict[int, List[float]] = field(default_factory=dict)

    @property
    def finite_hit_count(self) -> int:
        """Seeds whose finite-hit detector returned an index."""
        return sum(n0 is not None for n0 in self.finite_hits.values())

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready form; seed keys become strings."""

        def by_seed(values: Mapping[int, Any]) -> Dict[str, Any]:
            return {str(seed): value for seed, value in values.items()}

        return {
            "schema_version": CSV_SCHEMA_VERSION,
            "problem": self.problem,
            "regularizer": self.regularizer,
            "schedule": self.schedule,
            "seeds": self.seeds,
            "constants": self.constants,
            "final_distances": by_seed(self.final_distances),
            "ergodic_distances": by_seed(self.ergodic_distances),
            "distance_quantiles": self.distance_quantiles,
            "hit_counts": by_seed(self.hit_counts),
            "finite_hits": by_seed(self.finite_hits),
            "gamma_hat": by_seed(self.gamma_hat),
            "certifications": {
                job: by_seed(rows) for job, rows in self.certifications.items()
            },
            "flows": by_seed(self.flows),
            "apt": by_seed(self.apt),
        }


@dataclass
class SeedResult:  # pylint: disable=too-many-instance-attributes
    """Everything the jobs of one seed report back to the reduce step."""

    seed: int
    final_distance: Optional[float] = None
    ergodic_distance: Optional[float] = None
    hit_count: Optional[int] = None
    finite_hit: Optional[int] = None
    gamma_hat: Optional[float] = None
    certifications: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    flow: Optional[Dict[str, Any]] = None
    apt: Optional[List[float]] = None
    failure: Optional[Tuple[str, str]] = None


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_rows(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fhandle:
        writer = csv.writer(fhandle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def trace_header(dim: int) -> List[str]:
    """Columns of a run trace CSV."""
    return ["n"] + [f"x_{i + 1}" for i in range(dim)] + ["dist", "fenchel"]


def write_trace_csv(trace: RunTrace, path: Path) -> Path:
    """Write a run trace with columns n, x_1..x_d, dist, fenchel."""
    dim = trace.iterates[0].shape[0]
    rows = (
        [str(n)] + [_fmt(v) for v in x] + [_fmt(dist), _fmt(fenchel)]
        for n, x, dist, fenchel in zip(
            trace.steps, trace.iterates, trace.distances, trace.fenchel
        )
    )
    return _write_rows(path, trace_header(dim), rows)


def _job_path(config: ExperimentConfig, job: str, seed: int) -> Path:
    return config.outputs / f"{job}_seed{seed}.csv"


def _trajectory_jobs(
    config: ExperimentConfig,
    problem: StochasticProblem,
    h: Regularizer,
    schedule: StepSchedule,
    seed: int,
    result: SeedResult,
) -> None:
    opts = config.options
    hits = HitCounter(problem.minimizers, opts.hit_eps)
    callbacks: List[Any] = [hits]
    detector = None
    if "finite-hit" in config.jobs:
        if not h.is_surjective:
            _LOG.warning(
                "%s mirror map is not surjective: exact vertex hits cannot occur",
                h.kind.value,
            )
        detector = FiniteHitDetector(problem.minimizers[0], opts.tail_window)
        callbacks.append(detector)
    duals: List[Vector] = []
    if "apt" in config.jobs:
        callbacks.append(lambda n, x, y: duals.append(y))
    y0 = None if opts.y0 is None else np.array(opts.y0)
    trace = run(
        problem, h, schedule, config.n_iters, seed, config.record_every, y0, callbacks
    )
    result.final_distance = trace.final_distance
    result.ergodic_distance = trace.ergodic_distances[-1]
    result.hit_count = len(hits.hits)
    for job in ("run", "finite-hit"):
        if job in config.jobs:
            write_trace_csv(trace, _job_path(config, job, seed))
    if detector is not None:
        result.finite_hit = detector.result()
    if duals:
        process = InterpolatedProcess.from_duals(schedule, duals)
        deviations = apt_deviation(
            process, problem, h, problem.region, opts.apt_times, opts.apt_T, opts.apt_dt
        )
        result.apt = [float(v) for v in deviations]
        _write_rows(
            _job_path(config, "apt", seed),
            ["t", "deviation"],
            ([_fmt(t), _fmt(v)] for t, v in zip(opts.apt_times, deviations)),
        )


def _certify_job(
    config: ExperimentConfig,
    problem: StochasticProblem,
    job: str,
    seed: int,
    result: SeedResult,
) -> None:
    opts = config.options
    rng = make_rng(seed, Stream.CERTIFY)
    candidate = (
        problem.minimizers[0] if opts.candidate is None else np.array(opts.candidate)
    )
    if job == "sharpness":
        sharp = check_sharpness(problem, candidate, opts.sharpness_dirs, rng)
        result.gamma_hat = sharp.gamma_hat
        result.certifications[job] = sharp.to_dict()
        _write_rows(
            _job_path(config, job, seed),
            ["is_sharp", "gamma_hat", "directions_tested"],
            [
                [
                    str(sharp.is_sharp).lower(),
                    _fmt(sharp.gamma_hat),
                    str(sharp.directions_tested),
                ]
            ],
        )
        return
    if job == "certify-vc":
        report = certify_vc(problem, opts.certify_samples, rng)
    else:
        report = certify_lvc(
            problem, candidate, opts.lvc_radius, opts.certify_samples, rng
        )
    result.certifications[job] = report.to_dict()
    _write_rows(
        _job_path(config, job, seed),
        [
            "verdict",
            "samples_tested",
            "min_inner_product",
            "tolerance",
            "resolution",
            "equality_violations",
        ],
        [
            [
                report.verdict.value,
                str(report.samples_tested),
                _fmt(report.min_inner_product),
                _fmt(report.tolerance),
                _fmt(report.resolution),
                str(len(report.equality_violations)),
            ]
        ],
    )


def _flow_job(
    config: ExperimentConfig,
    problem: StochasticProblem,
    h: Regularizer,
    seed: int,
    result: SeedResult,
) -> None:
    opts = config.options
    rng = make_rng(seed, Stream.FLOW_STARTS)
    y0 = opts.flow_spread * rng.standard_normal(problem.dim)
    traj = integrate_flow(problem, h, problem.region, y0, opts.flow_T, opts.flow_dt)
    profile = fenchel_along_flow(traj, problem.minimizers)
    export_csv(traj, problem.minimizers, _job_path(config, "flow", seed))
    result.flow = {
        "monotone": profile.monotone,
        "max_increase": profile.max_increase,
        "initial_fenchel": float(profile.values[0]),
        "final_fenchel": float(profile.values[-1]),
    }


def run_seed(config: ExperimentConfig, schedule: StepSchedule, seed: int) -> SeedResult:
    """Execute every configured job for one seed.

    Failures are reported in ``SeedResult.failure`` rather than raised, so
    that a worker process never has to ship an exception back.
    """
    result = SeedResult(seed)
    problem = build_problem(config)
    h = Regularizer.from_name(config.regularizer)
    tasks: List[Tuple[str, Any]] = []
    if any(job in config.jobs for job in TRAJECTORY_JOBS):
        tasks.append(
            (
                "run",
                lambda: _trajectory_jobs(config, problem, h, schedule, seed, result),
            )
        )
    for job in CERTIFY_JOBS:
        if job in config.jobs:
            tasks.append(
                (job, lambda job=job: _certify_job(config, problem, job, seed, result))
            )
    if "flow" in config.jobs:
        tasks.append(("flow", lambda: _flow_job(config, problem, h, seed, result)))
    for job, task in tasks:
        started = time.perf_counter()
        _LOG.info("%s: starting %s for seed %d", problem.name, job, seed)
        try:
            task()
        except Exception as exc:  # pylint: disable=broad-except
            _LOG.error("%s: %s failed for seed %d: %s", problem.name, job, seed, exc)
            result.failure = (job, f"{type(exc).__name__}: {exc}")
            return result
        _LOG.info(
            "%s: %s for seed %d done in %.2fs",
            problem.name,
            job,
            seed,
            time.perf_counter() - started,
        )
    return result


def resolve_schedule(
    config: ExperimentConfig, constants: Tuple[float, float, float]
) -> StepSchedule:
    """The configured schedule, shrunk per (δ, ε̄) when both are set."""
    base = config.schedule.schedule()
    if config.schedule.delta is None or config.schedule.eps_bar is None:
        return base
    h = Regularizer.from_name(config.regularizer)
    R, vstar, b_hat = constants
    return confidence_schedule(
        base,
        config.schedule.delta,
        config.schedule.eps_bar,
        R,
        vstar,
        h.strong_convexity_K,
        b_hat,
    )


def summarize(
    config: ExperimentConfig,
    schedule: StepSchedule,
    constants: Tuple[float, float, float],
    results: Sequence[SeedResult],
) -> SummaryStats:
    """Reduce per-seed results, in seed order."""
    R, vstar, b_hat = constants
    stats = SummaryStats(
        problem=config.problem.name,
        regularizer=config.regularizer,
        schedule={
            "base_alpha": schedule.base_alpha,
            "beta": schedule.exponent_beta,
            "offset": schedule.offset,
        },
        seeds=[r.seed for r in results],
        constants={"R": R, "Vstar": vstar, "B": b_hat},
    )
    for result in results:
        if result.final_distance is not None:
            stats.final_distances[result.seed] = result.final_distance
        if result.ergodic_distance is not None:
            stats.ergodic_distances[result.seed] = result.ergodic_distance
        if result.hit_count is not None:
            stats.hit_counts[result.seed] = result.hit_count
        if "finite-hit" in config.jobs and result.final_distance is not None:
            stats.finite_hits[result.seed] = result.finite_hit
        if result.gamma_hat is not None:
            stats.gamma_hat[result.seed] = result.gamma_hat
        for job, report in result.certifications.items():
            stats.certifications.setdefault(job, {})[result.seed] = report
        if result.flow is not None:
            stats.flows[result.seed] = result.flow
        if result.apt is not None:
            stats.apt[result.seed] = result.apt
    if stats.final_distances:
        distances = np.array(list(stats.final_distances.values()))
        stats.distance_quantiles = {
            name: float(np.quantile(distances, q)) for name, q in QUANTILES.items()
        }
    return stats


def run_experiment(config: ExperimentConfig, threads: int = 1) -> SummaryStats:
    """Run all jobs for all seeds, write the per-(job, seed) CSVs and summary.json."""
    problem = build_problem(config)
    h = Regularizer.from_name(config.regularizer)
    constants = estimate_constants(
        problem, config.options.constant_samples, make_rng(0, Stream.CONSTANTS), h
    )
    schedule = resolve_schedule(config, constants)
    _LOG.info(
        "%s: jobs %s on %d seed(s) with %d worker(s)",
        problem.name,
        ", ".join(config.jobs),
        len(config.seeds),
        threads,
    )
    config.outputs.mkdir(parents=True, exist_ok=True)
    results = Parallel(n_jobs=threads)(
        delayed(run_seed)(config, schedule, seed) for seed in config.seeds
    )
    stats = summarize(config, schedule, constants, results)
    summary_path = config.outputs / SUMMARY_FILE
    summary = json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n"
    summary_path.write_text(summary, encoding="utf-8")
    for result in results:
        if result.failure is not None:
            job, message = result.failure
            raise JobError(job, result.seed, message)
    return stats
