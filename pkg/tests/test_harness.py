import copy
import csv
import json
import math
from pathlib import Path

import pytest

from smdlab import harness
from smdlab.errors import ConfigError, FlowBlowUpError, JobError
from smdlab.harness import (
    CSV_SCHEMA_VERSION,
    SUMMARY_FILE,
    THREADS_ENV,
    JobOptions,
    estimate_constants,
    load_config,
    parse_config,
    resolve_threads,
    restrict_jobs,
    run_experiment,
    with_overrides,
)
from smdlab.problems import NoiseModel, make_problem
from smdlab.rng import make_rng

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "problem": "quadratic-d",
    "schedule": {"base_alpha": 0.5, "beta": 0.8},
    "n_iters": 200,
}


def document(**changes):
    doc = copy.deepcopy(BASE)
    doc.update(changes)
    return doc


def config_in(tmp_path, **changes):
    return parse_config(document(outputs=str(tmp_path), **changes))


def read_csv(path):
    with path.open(encoding="utf-8", newline="") as fhandle:
        return list(csv.reader(fhandle))


def read_summary(config):
    return json.loads((config.outputs / SUMMARY_FILE).read_text(encoding="utf-8"))


def test_minimal_config_defaults():
    config = parse_config(document())
    assert config.problem.name == "quadratic-d"
    assert config.regularizer == "euclidean"
    assert config.seeds == (0,)
    assert config.jobs == ("run",)
    assert config.record_every == 1
    assert config.options == JobOptions()


def test_full_config():
    config = parse_config(
        document(
            problem={"name": "lp-simplex", "params": {"c": [1.0, 2.0]}},
            regularizer="entropic",
            seeds=[3, 1],
            noise={"kind": "Gaussian", "scale": 0.1},
            jobs=["run", "sharpness", "run"],
            options={"candidate": [1.0, 0.0], "tail_window": 10, "apt_times": [1, 2]},
        )
    )
    assert config.problem.params == {"c": [1.0, 2.0]}
    assert config.seeds == (3, 1)
    assert config.noise.model() == NoiseModel.gaussian(0.1)
    assert config.jobs == ("run", "sharpness")
    assert config.options.candidate == (1.0, 0.0)
    assert config.options.apt_times == (1.0, 2.0)


@pytest.mark.parametrize(
    "changes, field_path",
    [
        ({"problem": "himmelblau"}, "problem.name"),
        (
            {"problem": {"name": "lp-simplex", "params": {"c": [1.0, 1.0]}}},
            "problem.params",
        ),
        ({"problem": {"name": "sqrt-d2", "params": {"d": 0}}}, "problem.params"),
        ({"schedule": {"base_alpha": 0.5, "beta": 0.5}}, "schedule.beta"),
        ({"schedule": {"base_alpha": 0.0, "beta": 0.8}}, "schedule.base_alpha"),
        ({"schedule": {"beta": 0.8}}, "schedule.base_alpha"),
        (
            {"schedule": {"base_alpha": 0.5, "beta": 0.8, "delta": 0.1}},
            "schedule.delta",
        ),
        (
            {
                "schedule": {
                    "base_alpha": 0.5,
                    "beta": 0.8,
                    "delta": 2.0,
                    "eps_bar": 0.1,
                }
            },
            "schedule.delta",
        ),
        ({"regularizer": "entropic"}, "regularizer"),
        ({"regularizer": "tsallis"}, "regularizer"),
        ({"seeds": [1, 1]}, "seeds"),
        ({"seeds": []}, "seeds"),
        ({"seeds": [-1]}, "seeds[0]"),
        ({"jobs": ["run", "bogus"]}, "jobs[1]"),
        ({"noise": {"kind": "cauchy"}}, "noise.kind"),
        ({"options": {"hit_eps": -1.0}}, "options.hit_eps"),
        ({"options": {"tail_window": 0}}, "options.tail_window"),
        ({"options": {"bogus": 1}}, "options.bogus"),
        ({"options": {"candidate": [1.0]}}, "options.candidate"),
        ({"n_iters": -1}, "n_iters"),
        ({"n_iters": 1.5}, "n_iters"),
        ({"n_iters": "many"}, "n_iters"),
        ({"colour": "blue"}, "colour"),
    ],
    ids=[
        "unknown-problem",
        "degenerate-lp",
        "zero-dimension",
        "beta-too-small",
        "zero-base",
        "missing-base",
        "delta-alone",
        "delta-range",
        "entropic-on-box",
        "unknown-regularizer",
        "repeated-seed",
        "no-seeds",
        "negative-seed",
        "unknown-job",
        "unknown-noise",
        "negative-option",
        "zero-window",
        "unknown-option",
        "short-candidate",
        "negative-iters",
        "fractional-iters",
        "text-iters",
        "unknown-key",
    ],
)
def test_config_errors_name_the_field(changes, field_path):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(document(**changes))
    assert excinfo.value.field_path == field_path


def test_missing_n_iters():
    doc = document()
    del doc["n_iters"]
    with pytest.raises(ConfigError) as excinfo:
        parse_config(doc)
    assert excinfo.value.field_path == "n_iters"


def test_document_must_be_a_mapping():
    with pytest.raises(ConfigError) as excinfo:
        parse_config([1, 2])
    assert excinfo.value.field_path == "<document>"


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_config(tmp_path / "missing.yaml")
    assert excinfo.value.field_path == "<file>"
    broken = tmp_path / "broken.yaml"
    broken.write_text("problem: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        load_config(broken)
    assert excinfo.value.field_path == "<document>"


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    config = load_config(path)
    assert config.jobs
    assert config.seeds


def test_overrides():
    config = parse_config(document())
    changed = with_overrides(
        config, seeds=[3, 4], out_dir=Path("elsewhere"), jobs=["flow"]
    )
    assert changed.seeds == (3, 4)
    assert changed.outputs == Path("elsewhere")
    assert changed.jobs == ("flow",)
    assert with_overrides(config) == config
    with pytest.raises(ConfigError) as excinfo:
        with_overrides(config, seeds=[1, 1])
    assert excinfo.value.field_path == "--seed-override"


def test_restrict_jobs():
    config = parse_config(document(jobs=["run", "sharpness", "flow"]))
    restricted = restrict_jobs(config, ("certify-vc", "sharpness"), "certify-vc")
    assert restricted.jobs == ("sharpness",)
    assert restrict_jobs(config, ("apt",), "apt").jobs == ("apt",)


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert resolve_threads(3) == 3
    with pytest.raises(ConfigError):
        resolve_threads(0)
    monkeypatch.setenv(THREADS_ENV, "4")
    assert resolve_threads(1) == 4
    monkeypatch.setenv(THREADS_ENV, "four")
    with pytest.raises(ConfigError):
        resolve_threads(1)
    monkeypatch.setenv(THREADS_ENV, "0")
    with pytest.raises(ConfigError):
        resolve_threads(1)


def test_constants_without_noise():
    problem = make_problem("quadratic-d", center=[0.0, 0.0])
    R, vstar, b_hat = estimate_constants(problem, 1_000, make_rng(1))
    assert R == pytest.approx(math.sqrt(2.0))
    assert 0.9 * math.sqrt(2.0) <= b_hat <= math.sqrt(2.0)
    assert vstar == 2.0 * b_hat


def test_constants_follow_the_noise_scale():
    values = []
    for sigma in (5.0, 10.0):
        noise = NoiseModel.gaussian(sigma)
        problem = make_problem("quadratic-d", noise=noise, center=[0.5, 0.5])
        values.append(estimate_constants(problem, 200, make_rng(2))[1])
    assert values[1] / values[0] == pytest.approx(2.0, rel=1e-6)


def test_run_job_writes_traces(tmp_path):
    config = config_in(tmp_path, seeds=[0, 1], record_every=50)
    stats = run_experiment(config)
    for seed in (0, 1):
        rows = read_csv(tmp_path / f"run_seed{seed}.csv")
        assert rows[0] == ["n", "x_1", "x_2", "dist", "fenchel"]
        assert [row[0] for row in rows[1:]] == ["0", "50", "100", "150", "200"]
    summary = read_summary(config)
    assert summary["schema_version"] == CSV_SCHEMA_VERSION
    assert summary["seeds"] == [0, 1]
    assert set(summary["final_distances"]) == {"0", "1"}
    assert set(summary["ergodic_distances"]) == {"0", "1"}
    assert set(summary["distance_quantiles"]) == {"q10", "q25", "median", "q75", "q90"}
    assert stats.final_distances[0] == summary["final_distances"]["0"]
    assert stats.ergodic_distances[1] == summary["ergodic_distances"]["1"]


def test_run_without_iterations(tmp_path):
    config = config_in(tmp_path, n_iters=0)
    run_experiment(config)
    rows = read_csv(tmp_path / "run_seed0.csv")
    assert len(rows) == 2
    assert rows[1][0] == "0"


def test_reruns_are_byte_identical(tmp_path):
    outputs = []
    for name in ("first", "second"):
        config = config_in(
            tmp_path / name,
            seeds=[0, 1],
            noise={"kind": "gaussian", "scale": 0.1},
            record_every=10,
            jobs=["run", "certify-vc", "sharpness"],
            options={"certify_samples": 200, "sharpness_dirs": 16},
        )
        run_experiment(config)
        written = sorted((tmp_path / name).iterdir())
        outputs.append({p.name: p.read_bytes() for p in written})
    assert outputs[0] == outputs[1]
    assert "summary.json" in outputs[0]


def test_finite_hit_summary(tmp_path):
    config = parse_config(
        {
            "problem": {"name": "lp-simplex", "params": {"c": [1.0, 2.0]}},
            "schedule": {"base_alpha": 0.5, "beta": 0.8},
            "n_iters": 3_000,
            "seeds": [0, 1, 2, 3, 4],
            "noise": {"kind": "gaussian", "scale": 0.1},
            "record_every": 100,
            "outputs": str(tmp_path),
            "jobs": ["finite-hit"],
            "options": {"tail_window": 500},
        }
    )
    stats = run_experiment(config)
    assert stats.finite_hit_count == 5
    finite_hits = read_summary(config)["finite_hits"]
    assert all(isinstance(n0, int) for n0 in finite_hits.values())
    assert (tmp_path / "finite-hit_seed4.csv").exists()


def test_interior_minimum_has_no_finite_hit(tmp_path):
    config = config_in(
        tmp_path, noise={"kind": "gaussian", "scale": 0.1}, jobs=["finite-hit"]
    )
    stats = run_experiment(config)
    assert stats.finite_hit_count == 0
    assert read_summary(config)["finite_hits"] == {"0": None}


def test_certification_jobs(tmp_path):
    config = config_in(
        tmp_path,
        problem="cosine",
        n_iters=0,
        jobs=["certify-vc", "sharpness"],
        options={"certify_samples": 500},
    )
    run_experiment(config)
    summary = read_summary(config)
    assert summary["certifications"]["certify-vc"]["0"]["verdict"] == "fail"
    rows = read_csv(tmp_path / "certify-vc_seed0.csv")
    assert rows[0][:3] == ["verdict", "samples_tested", "min_inner_product"]
    assert rows[1][0] == "fail"
    header = read_csv(tmp_path / "sharpness_seed0.csv")[0]
    assert header == ["is_sharp", "gamma_hat", "directions_tested"]


def test_sharpness_job_on_a_vertex(tmp_path):
    config = config_in(
        tmp_path, problem="lp-simplex", n_iters=0, jobs=["sharpness", "certify-lvc"]
    )
    stats = run_experiment(config)
    assert stats.gamma_hat[0] == pytest.approx(1.0 / math.sqrt(2.0))
    assert stats.certifications["certify-lvc"][0]["verdict"] == "pass"


def test_flow_job(tmp_path):
    config = config_in(
        tmp_path, problem="polar", n_iters=0, jobs=["flow"], options={"flow_T": 2.0}
    )
    stats = run_experiment(config)
    assert stats.flows[0]["monotone"]
    assert stats.flows[0]["final_fenchel"] <= stats.flows[0]["initial_fenchel"]
    header = read_csv(tmp_path / "flow_seed0.csv")[0]
    assert header == ["t", "y_1", "y_2", "x_1", "x_2", "F"]


def test_apt_job(tmp_path):
    config = config_in(
        tmp_path,
        schedule={"base_alpha": 1.0, "beta": 0.6},
        n_iters=2_000,
        noise={"kind": "gaussian", "scale": 0.1},
        record_every=100,
        jobs=["apt"],
        options={"apt_times": [1.0, 5.0, 20.0], "apt_T": 5.0},
    )
    stats = run_experiment(config)
    assert len(stats.apt[0]) == 3
    rows = read_csv(tmp_path / "apt_seed0.csv")
    assert rows[0] == ["t", "deviation"]
    assert [float(row[0]) for row in rows[1:]] == [1.0, 5.0, 20.0]


def test_confidence_target_shrinks_the_schedule(tmp_path):
    config = config_in(
        tmp_path,
        schedule={"base_alpha": 0.5, "beta": 0.8, "delta": 0.1, "eps_bar": 0.1},
        n_iters=10,
    )
    stats = run_experiment(config)
    assert stats.schedule["base_alpha"] < 0.5
    assert set(stats.constants) == {"R", "Vstar", "B"}


def test_failed_job_is_reported_after_the_summary(tmp_path, monkeypatch):
    def blow_up(*args, **kwargs):
        raise FlowBlowUpError("state is not finite")

    monkeypatch.setattr(harness, "integrate_flow", blow_up)
    config = config_in(tmp_path, jobs=["run", "flow"], n_iters=10)
    with pytest.raises(JobError) as excinfo:
        run_experiment(config)
    assert excinfo.value.job == "flow"
    assert excinfo.value.seed == 0
    assert "FlowBlowUpError" in str(excinfo.value)
    assert (tmp_path / SUMMARY_FILE).exists()
    assert (tmp_path / "run_seed0.csv").exists()
