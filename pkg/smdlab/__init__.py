"""Stochastic mirror descent laboratory."""
from smdlab.core import ENTROPIC, EUCLIDEAN, Regularizer
from smdlab.errors import SmdLabError
from smdlab.problems import list_problems, make_problem
from smdlab.smd import StepSchedule, run, sgd_run

__all__ = [
    "ENTROPIC",
    "EUCLIDEAN",
    "Regularizer",
    "SmdLabError",
    "StepSchedule",
    "list_problems",
    "make_problem",
    "run",
    "sgd_run",
]
