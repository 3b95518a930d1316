"""Benchmark and solver toolkit for robust optimization over time (ROOT).

Two moving-peaks environments with stochastic dynamics, uniform-sampling
solvers with strict evaluation budgets, a-posteriori robustness metrics and
a seeded Monte-Carlo experiment harness.
"""

__version__ = "0.1.0"
