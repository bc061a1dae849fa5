"""Semidefinite programs: builder, interior-point solver and F_s benchmarks."""

from .benchmarks import (
    BenchmarkResult,
    benchmark1,
    benchmark1_problem,
    benchmark2,
    benchmark2_problem,
    bound_gap1,
    bound_gap2,
    fidelity_problem,
    fidelity_sdp,
    solve_benchmark1,
    solve_benchmark2,
)
from .problem import SdpProblem
from .solver import SdpSolution, solve, solve_or_raise

__all__ = [
    "BenchmarkResult",
    "SdpProblem",
    "SdpSolution",
    "benchmark1",
    "benchmark1_problem",
    "benchmark2",
    "benchmark2_problem",
    "bound_gap1",
    "bound_gap2",
    "fidelity_problem",
    "fidelity_sdp",
    "solve",
    "solve_benchmark1",
    "solve_benchmark2",
    "solve_or_raise",
]
