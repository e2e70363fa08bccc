"""Parallel-trial annealing for QUBO / Max-Cut and a benchmarking harness."""

from .anneal import AnnealParams, ScheduleParams, SolveResult, calibrate_schedule, solve
from .maxcut import WeightedGraph, cut_value, maxcut_to_qubo, qubo_to_maxcut
from .qubo import QuboModel, evaluate

__version__ = "0.1.0"

__all__ = [
    "AnnealParams", "ScheduleParams", "SolveResult", "calibrate_schedule", "solve",
    "WeightedGraph", "cut_value", "maxcut_to_qubo", "qubo_to_maxcut", "QuboModel", "evaluate",
]
