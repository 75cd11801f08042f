"""Command line entry point.

``smd run|certify|flow <config>`` runs jobs and ``smd list-problems`` lists the zoo.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from smdlab.errors import ConfigError, JobError
from smdlab.harness import (
    CERTIFY_JOBS,
    FLOW_JOBS,
    JOBS,
    SummaryStats,
    load_config,
    resolve_threads,
    restrict_jobs,
    run_experiment,
    with_overrides,
)
from smdlab.problems import list_problems

_LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_JOB = 3


def build_parser() -> argparse.ArgumentParser:
    """Parser of the ``smd`` command."""
    parser = argparse.ArgumentParser(
        prog="smd",
        description="Stochastic mirror descent experiments and coherence checks.",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="More logging (-vv for debug)",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="Only log errors")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", f"Run every job of a config ({', '.join(JOBS)})"),
        (
            "certify",
            f"Run the certification jobs of a config ({', '.join(CERTIFY_JOBS)})",
        ),
        ("flow", f"Run the mean-dynamics jobs of a config ({', '.join(FLOW_JOBS)})"),
    ):
        command = commands.add_parser(name, help=help_text)
        command.add_argument("config", type=Path, help="Experiment config (YAML)")
        command.add_argument(
            "--seed-override",
            type=int,
            nargs="+",
            default=None,
            help="Replace the configured seeds",
        )
        command.add_argument(
            "--out-dir", type=Path, default=None, help="Replace the output directory"
        )
        command.add_argument(
            "--threads",
            type=int,
            default=1,
            help="Worker processes (SMD_THREADS takes precedence)",
        )
    commands.add_parser("list-problems", help="List the registered problems")
    return parser


def _configure_logging(verbose: int, quiet: bool) -> None:
    levels = (logging.WARNING, logging.INFO, logging.DEBUG)
    level = logging.ERROR if quiet else levels[min(verbose, 2)]
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def _report(stats: SummaryStats) -> None:
    print(f"{stats.problem} ({stats.regularizer}), seeds {stats.seeds}")
    if stats.distance_quantiles:
        print(f"  median final distance: {stats.distance_quantiles['median']:.3e}")
    if stats.finite_hits:
        print(f"  finite hits: {stats.finite_hit_count}/{len(stats.finite_hits)} seeds")
    for job, reports in stats.certifications.items():
        if job == "sharpness":
            verdicts = sorted({str(r["is_sharp"]).lower() for r in reports.values()})
        else:
            verdicts = sorted({str(r["verdict"]) for r in reports.values()})
        print(f"  {job}: {', '.join(verdicts)}")
    for seed, flow in stats.flows.items():
        print(f"  flow seed {seed}: monotone={flow['monotone']}")


def main(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return the exit code."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    if args.command == "list-problems":
        for name in list_problems():
            print(name)
        return EXIT_OK
    try:
        config = with_overrides(
            load_config(args.config), args.seed_override, args.out_dir
        )
        if args.command == "certify":
            config = restrict_jobs(config, CERTIFY_JOBS, "certify-vc")
        elif args.command == "flow":
            config = restrict_jobs(config, FLOW_JOBS, "flow")
        threads = resolve_threads(args.threads)
        stats = run_experiment(config, threads)
    except ConfigError as exc:
        _LOG.error("invalid config: %s", exc)
        return EXIT_CONFIG
    except (JobError, OSError) as exc:
        _LOG.error("%s", exc)
        return EXIT_JOB
    _report(stats)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
