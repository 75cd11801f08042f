import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from smdlab.coherence import (
    ConeQuery,
    FiniteHitDetector,
    Verdict,
    basin_radius,
    certify_lvc,
    certify_vc,
    check_sharpness,
    detect_finite_hit,
    fenchel_zone_hits,
    hitting_times,
    minimizer_hull_consistent,
    polar_cone_contains,
    tangent_cone_contains,
)
from smdlab.core import EUCLIDEAN
from smdlab.errors import DomainError, UnsupportedPairingError
from smdlab.problems import NoiseModel, make_generic_lp, make_problem, make_quadratic
from smdlab.regions import Ball, Box, HPolytope, Simplex
from smdlab.rng import make_rng
from smdlab.smd import StepSchedule, StepState, run


class UnsampledBox(Box):
    """Box without a sampler."""

    def sample(self, rng, n):
        raise NotImplementedError


def constant_stream(x, n_steps, y=None):
    x = np.asarray(x, dtype=np.float64)
    y = x if y is None else np.asarray(y, dtype=np.float64)
    return [StepState(n, x, y) for n in range(n_steps)]


@pytest.mark.parametrize(
    "name", ["sqrt-d2", "polar", "quadratic-d", "lp-simplex", "lp-box"]
)
def test_coherent_problems_pass(name):
    report = certify_vc(make_problem(name), 10_000)
    assert report.verdict is Verdict.PASS
    assert report.samples_tested == 10_000
    assert report.min_inner_product >= -report.tolerance
    assert report.witness is None
    assert not report.equality_violations


def test_sqrt_example_inner_product_is_positive():
    report = certify_vc(make_problem("sqrt-d2"), 10_000)
    assert report.min_inner_product > 0.0


def test_cosine_fails_with_a_witness():
    problem = make_problem("cosine")
    report = certify_vc(problem, 2_000)
    assert report.verdict is Verdict.FAIL
    assert report.witness is not None
    assert report.witness.value < -report.tolerance
    x, xstar = report.witness.x, report.witness.xstar
    assert problem.mean_gradient(x) @ (x - xstar) == pytest.approx(report.witness.value)


def test_rosenbrock_is_not_globally_coherent():
    report = certify_vc(make_problem("rosenbrock"), 5_000)
    assert report.verdict is Verdict.FAIL
    assert report.witness is not None


def test_rosenbrock_is_locally_coherent():
    problem = make_problem("rosenbrock")
    assert certify_lvc(problem, [1.0, 1.0], 0.3, 2_000).verdict is Verdict.PASS
    assert basin_radius(problem, [1.0, 1.0], [0.3, 1.0, 2.0], 2_000) == 0.3


def test_rosenbrock_has_a_negative_point_near_the_minimum():
    problem = make_problem("rosenbrock")
    x = np.array([0.75, 0.59375])
    assert problem.mean_gradient(x) @ (x - 1.0) == pytest.approx(-0.0703125)
    assert np.linalg.norm(x - 1.0) < 0.5


def test_lvc_over_the_whole_box_fails():
    report = certify_lvc(make_problem("rosenbrock"), [1.0, 1.0], 6.0, 2_000)
    assert report.verdict is Verdict.FAIL


def test_lvc_arguments():
    problem = make_problem("rosenbrock")
    with pytest.raises(DomainError):
        certify_lvc(problem, [1.0, 1.0], 0.0, 10)
    with pytest.raises(DomainError):
        certify_lvc(problem, [3.0, 1.0], 0.1, 10)


def test_unsupported_sampler_is_inconclusive():
    problem = make_quadratic(region=UnsampledBox([0.0, 0.0], [1.0, 1.0]))
    report = certify_vc(problem, 100)
    assert report.verdict is Verdict.INCONCLUSIVE
    assert report.samples_tested == 0


def test_report_serializes():
    data = certify_vc(make_problem("cosine"), 500).to_dict()
    assert data["verdict"] == "fail"
    assert set(data["witness"]) == {"x", "xstar", "value"}


def test_minimum_set_hull():
    assert not minimizer_hull_consistent(make_problem("cosine"))
    assert minimizer_hull_consistent(make_problem("quadratic-d"))


@pytest.mark.parametrize(
    "region, vertex, direction, expected",
    [
        (Box.cube(2), [0.0, 0.0], [1.0, 1.0], True),
        (Box.cube(2), [0.0, 0.0], [-1.0, 0.0], False),
        (Simplex(3), [1.0, 0.0, 0.0], [-1.0, 1.0, 0.0], True),
        (Simplex(3), [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], False),
    ],
    ids=["box-inward", "box-outward", "simplex-edge", "simplex-off-plane"],
)
def test_tangent_cone_contains(region, vertex, direction, expected):
    assert tangent_cone_contains(ConeQuery(vertex, direction, region)) is expected


@pytest.mark.parametrize(
    "region, vertex, y, expected",
    [
        (Box.cube(2), [0.0, 0.0], [-1.0, -1.0], True),
        (Box.cube(2), [0.0, 0.0], [1.0, 0.0], False),
        (Simplex(2), [1.0, 0.0], [-1.0, -2.0], True),
    ],
    ids=["box-away", "box-inward", "simplex-negative-cost"],
)
def test_polar_cone_contains(region, vertex, y, expected):
    assert polar_cone_contains(ConeQuery(vertex, y, region)) is expected


def test_polar_cone_agrees_with_sampled_tangent_directions():
    """y is polar iff no feasible direction has a positive inner product with it."""
    region = HPolytope([[1.0, 1.0]], [1.0], Box.cube(2))
    vertex = np.array([1.0, 0.0])
    rng = make_rng(31)
    feasible = [
        z for z in rng.standard_normal((4_000, 2)) if region.tangent_contains(vertex, z)
    ]
    generators = region.tangent_generators(vertex)
    for y in rng.standard_normal((200, 2)):
        if polar_cone_contains(ConeQuery(vertex, y, region)):
            assert max(z @ y for z in feasible) <= 1e-9
        else:
            assert np.max(generators @ y) > 0.0


def test_cone_query_errors():
    with pytest.raises(DomainError):
        ConeQuery([0.0, 0.0], [0.0, 0.0], Box.cube(2))
    with pytest.raises(DomainError):
        ConeQuery([2.0, 0.0], [1.0, 0.0], Box.cube(2))
    with pytest.raises(UnsupportedPairingError):
        polar_cone_contains(ConeQuery([1.0, 0.0], [1.0, 0.0], Ball([0.0, 0.0], 1.0)))


def test_sharp_vertex_of_simplex_lp():
    report = check_sharpness(make_problem("lp-simplex"), [1.0, 0.0], 64)
    assert report.is_sharp
    assert report.gamma_hat == pytest.approx(1.0 / math.sqrt(2.0))


def test_sharp_vertex_of_box_lp():
    report = check_sharpness(make_problem("lp-box"), [1.0, 0.0, 0.0], 256)
    assert report.is_sharp
    assert report.gamma_hat == pytest.approx(0.5)
    assert report.directions_tested > 3


@pytest.mark.parametrize(
    "name, candidate",
    [("quadratic-d", [0.3, 0.6]), ("rosenbrock", [1.0, 1.0])],
    ids=["quadratic", "rosenbrock"],
)
def test_interior_minimizers_are_not_sharp(name, candidate):
    report = check_sharpness(make_problem(name), candidate, 64)
    assert not report.is_sharp
    assert report.gamma_hat == 0.0


@pytest.mark.parametrize(
    "name, candidate",
    [("lp-simplex", [1.0, 0.0]), ("lp-box", [1.0, 0.0, 0.0])],
    ids=["simplex", "box"],
)
def test_sharp_minimizers_are_locally_coherent(name, candidate):
    problem = make_problem(name)
    assert check_sharpness(problem, candidate, 64).is_sharp
    assert basin_radius(problem, candidate, [0.1, 0.05, 0.01], 1_000) is not None


@pytest.mark.parametrize(
    "name, candidate",
    [("lp-simplex", [1.0, 0.0]), ("lp-box", [1.0, 0.0, 0.0])],
    ids=["simplex", "box"],
)
def test_sharp_minimum_is_interior_to_the_polar_cone(name, candidate):
    """-∇g(x*) keeps its polar cone membership under perturbations shorter than γ̂/2."""
    problem = make_problem(name)
    vertex = np.array(candidate)
    grad = problem.mean_gradient(vertex)
    gamma = check_sharpness(problem, vertex, 64).gamma_hat
    assert gamma > 0
    rng = make_rng(23)
    for u in rng.standard_normal((200, problem.dim)):
        u *= 0.49 * gamma / np.linalg.norm(u)
        assert polar_cone_contains(ConeQuery(vertex, -(grad + u), problem.region))
    # pushing past γ̂ along the flattest edge leaves the cone
    generators = problem.region.tangent_generators(vertex)
    flattest = generators[np.argmin(generators @ grad)]
    outside = -grad + 1.01 * gamma * flattest
    assert not polar_cone_contains(ConeQuery(vertex, outside, problem.region))


def test_hitting_times_on_constant_traces():
    generators = np.array([[0.3, 0.6]])
    hits = hitting_times(constant_stream([0.3, 0.6], 5), generators, 0.05)
    assert hits == [0, 1, 2, 3, 4]
    assert hitting_times(constant_stream([0.9, 0.1], 5), generators, 0.05) == []
    with pytest.raises(DomainError):
        hitting_times(constant_stream([0.3, 0.6], 5), generators, 0.0)


def test_hitting_times_of_a_noisy_run():
    problem = make_quadratic(2, noise=NoiseModel.gaussian(0.1))
    trace = run(problem, EUCLIDEAN, StepSchedule(0.5, 0.8), 10_000, seed=0)
    hits = hitting_times(trace.stream(), problem.minimizers, 0.05)
    assert hits
    assert len([n for n in hits if n <= 5_000]) < len(hits)


def test_fenchel_zone_hits_by_reciprocity():
    region = Box.cube(2)
    xstar = np.array([0.3, 0.6])
    stream = [
        StepState(n, xstar, xstar + np.array([0.1, 0.1]) / n) for n in range(1, 31)
    ]
    hits = fenchel_zone_hits(stream, EUCLIDEAN, region, xstar[None, :], 5e-5)
    assert hits == list(range(15, 31))


def test_fenchel_zone_hits_far_away():
    stream = constant_stream([1.0, 1.0], 5, y=[5.0, 5.0])
    xstar = np.array([[0.3, 0.6]])
    assert fenchel_zone_hits(stream, EUCLIDEAN, Box.cube(2), xstar, 0.1) == []


def test_fenchel_zone_hits_of_a_noisy_run():
    problem = make_quadratic(2, noise=NoiseModel.gaussian(0.1))
    trace = run(problem, EUCLIDEAN, StepSchedule(0.5, 0.8), 2_000, seed=1)
    assert fenchel_zone_hits(
        trace.stream(), EUCLIDEAN, problem.region, problem.minimizers, 1e-3
    )


def test_detect_finite_hit_on_a_constructed_stream():
    vertex = [1.0, 0.0]
    at_vertex = [StepState(n, np.array(vertex), np.zeros(2)) for n in range(4, 10)]
    stream = constant_stream([0.5, 0.5], 4) + at_vertex
    assert detect_finite_hit(stream, vertex, tail_window=6) == 4
    assert detect_finite_hit(stream, vertex, tail_window=7) is None
    assert detect_finite_hit([], vertex, tail_window=1) is None


def test_finite_hit_on_a_noisy_linear_program():
    problem = make_generic_lp([1.0, 2.0], Simplex(2), noise=NoiseModel.gaussian(0.1))
    detector = FiniteHitDetector(problem.minimizers[0], tail_window=1_000)
    trace = run(
        problem,
        EUCLIDEAN,
        StepSchedule(0.5, 0.8),
        5_000,
        seed=0,
        record_every=1_000,
        callbacks=[detector],
    )
    n0 = detector.result()
    assert n0 is not None and n0 < 4_000
    assert_array_equal(trace.final_iterate, [1.0, 0.0])


def test_interior_minimum_is_never_hit_exactly():
    problem = make_quadratic(2, noise=NoiseModel.gaussian(0.1))
    detector = FiniteHitDetector(problem.minimizers[0], tail_window=100)
    run(
        problem,
        EUCLIDEAN,
        StepSchedule(0.5, 0.8),
        2_000,
        seed=0,
        record_every=500,
        callbacks=[detector],
    )
    assert detector.result() is None
