"""Rearrangement inequalities on weighted model intervals.

Model weights, decreasing rearrangements, graph surrogates of metric
measure spaces, one-dimensional p-eigenvalue solvers and evaluators for
Polya-Szego type inequalities.
"""

__version__ = "0.1.0"
