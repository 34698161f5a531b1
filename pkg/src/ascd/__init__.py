"""Accelerated stochastic coordinate descent, sequential and asynchronous.

The solver comes in three tiers sharing one parameter schedule:

* a basic full-vector iteration (reference oracle),
* an efficient single-coordinate iteration driven by a 2x2 change of
  basis, and
* an asynchronous shared-memory version of the efficient iteration with
  bounded staleness.

``ascd.harness`` provides the benchmark CLI (``ascd`` on the command
line) that runs solvers, verifies convergence-rate bounds, and measures
parallel speedup.
"""

from ascd.schedule import Regime, Schedule, StepParams, q_bound
from ascd.problems import Problem, LipschitzInfo
from ascd.seq_engine import run_sequential
from ascd.async_engine import AsyncConfig, run_async

__all__ = [
    "Regime",
    "Schedule",
    "StepParams",
    "q_bound",
    "Problem",
    "LipschitzInfo",
    "run_sequential",
    "AsyncConfig",
    "run_async",
]

__version__ = "0.1.0"
