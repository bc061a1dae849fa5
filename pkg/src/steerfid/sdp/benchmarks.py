"""Fidelity SDP and the two extendibility-hierarchy upper bounds on F_s."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from ..errors import CapacityError, ShapeError
from ..qcore import DensityMatrix, Layout, partial_trace, partial_transpose, permute_subsystems
from ..states import purify, rank
from .problem import SdpProblem
from .solver import SdpSolution, solve_or_raise

MAX_K = 4
MAX_CONSTRAINTS = 12000
SUPPORT_CUTOFF = 1e-12


@dataclass
class BenchmarkResult:
    value: float
    k: int
    solution: SdpSolution
    bounds: tuple = field(default=(0.0, 1.0))

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "k": self.k,
            "solver_status": self.solution.status,
            "residuals": self.solution.residuals,
            "bounds": list(self.bounds),
        }


def _grid(n):
    return np.meshgrid(np.arange(n), np.arange(n), indexing="ij")


def _reduced_indices(n_keep, n_traced, transpose_low=None):
    """Index arrays for ``Tr_tail`` of a matrix whose trailing factor has size ``n_traced``.

    With ``transpose_low = d`` the lowest factor of size ``d`` among the kept
    indices is exchanged between row and column (a partial transpose).
    """
    i, j = _grid(n_keep)
    if transpose_low is not None:
        hi_i, lo_i = divmod(i, transpose_low)
        hi_j, lo_j = divmod(j, transpose_low)
        i, j = hi_i * transpose_low + lo_j, hi_j * transpose_low + lo_i
    t = np.arange(n_traced)
    return i[..., None] * n_traced + t, j[..., None] * n_traced + t


def _check_capacity(prob: SdpProblem):
    if prob.m > MAX_CONSTRAINTS:
        raise CapacityError(f"SDP with {prob.m} constraints exceeds the guard of {MAX_CONSTRAINTS}")


def _split_dims(rho: DensityMatrix, split):
    a_labels, b_labels = list(split[0]), list(split[1])
    if set(a_labels) & set(b_labels):
        raise ShapeError("the two sides of a split must be disjoint")
    layout = rho.layout
    if sorted(a_labels + b_labels) != sorted(layout.labels):
        raise ShapeError(f"split {split} does not cover layout {layout.labels}")
    mat = permute_subsystems(rho.mat, layout, a_labels + b_labels)
    return mat, layout.dim_of(a_labels), layout.dim_of(b_labels)


def _support(m: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the range of a PSD matrix."""
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return v[:, w > SUPPORT_CUTOFF]


def fidelity_problem(rho, sigma) -> SdpProblem:
    """Root-fidelity SDP restricted to the supports of ``rho`` and ``sigma``.

    Any feasible ``X`` factors as ``V X' W^dag`` with ``V``, ``W`` bases of the
    two supports, so the compressed program has the same optimum and keeps a
    strictly feasible point when either input is singular.
    """
    rho = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    sigma = sigma.mat if isinstance(sigma, DensityMatrix) else np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ShapeError(f"fidelity of matrices with shapes {rho.shape} and {sigma.shape}")
    V, W = _support(rho), _support(sigma)
    r, s = V.shape[1], W.shape[1]
    prob = SdpProblem()
    prob.add_block("Y", r + s)
    I, J = _grid(r)
    prob.add_matrix_equality(r, [("Y", I, J, 1.0)], V.conj().T @ rho @ V)
    I, J = _grid(s)
    prob.add_matrix_equality(s, [("Y", I + r, J + r, 1.0)], W.conj().T @ sigma @ W)
    # Re Tr(V X' W^dag) = Re sum_ij X'[i, j] (W^dag V)[j, i]
    I, J = np.meshgrid(np.arange(r), np.arange(s), indexing="ij")
    prob.add_objective("Y", I.ravel(), (J + r).ravel(), (W.conj().T @ V).T.ravel())
    return prob


def fidelity_sdp(rho, sigma, **solver_opts) -> float:
    """Squared optimum of ``max Re Tr X`` over ``[[rho, X], [X^dag, sigma]] >= 0``."""
    if isinstance(rho, DensityMatrix) and isinstance(sigma, DensityMatrix) and rho.layout.dims != sigma.layout.dims:
        raise ShapeError("layouts do not match")
    sol = solve_or_raise(fidelity_problem(rho, sigma), **solver_opts)
    return max(sol.primal_value, 0.0) ** 2


def benchmark1_problem(rho: DensityMatrix, split, k: int) -> SdpProblem:
    if not 1 <= k <= MAX_K:
        raise CapacityError(f"extension level k={k} is outside 1..{MAX_K}")
    mat, dA, dB = _split_dims(rho, split)
    d = dA * dB
    # the fixed corner is compressed to supp(rho) as in fidelity_problem; the
    # lower-right corner of Y (offset r) holds sigma_{AB_1}
    V = _support(mat)
    r = V.shape[1]
    prob = SdpProblem()
    prob.add_block("Y", r + d)
    I, J = _grid(r)
    prob.add_matrix_equality(r, [("Y", I, J, 1.0)], V.conj().T @ mat @ V)
    I, J = np.meshgrid(np.arange(r), np.arange(d), indexing="ij")
    prob.add_objective("Y", I.ravel(), (J + r).ravel(), V.T.ravel())
    I, J = _grid(d)
    diag = np.arange(d) + r
    if k == 1:
        # sigma lives in the lower-right corner of Y
        prob.add_constraints([("Y", diag, diag, 1.0, np.zeros(d))], [1.0])
        prob.add_block("P1", d)
        Ti, Tj = _reduced_indices(d, 1, transpose_low=dB)
        prob.add_matrix_equality(d, [("P1", I, J, 1.0), ("Y", Ti + r, Tj + r, -1.0)])
        _check_capacity(prob)
        return prob
    dS = dA * dB**k
    prob.add_block("S", dS)
    Si, Sj = _reduced_indices(d, dB ** (k - 1))
    prob.add_matrix_equality(d, [("Y", I + r, J + r, 1.0), ("S", Si, Sj, -1.0)])
    prob.add_constraints([("S", np.arange(dS), np.arange(dS), 1.0, np.zeros(dS))], [1.0])
    prob.add_permutation_invariance("S", [dA] + [dB] * k, list(range(1, k + 1)))
    for j in range(1, k + 1):
        n = dA * dB**j
        name = f"P{j}"
        prob.add_block(name, n)
        Pi, Pj = _grid(n)
        Ti, Tj = _reduced_indices(n, dB ** (k - j), transpose_low=dB**j)
        if j == 1:
            # the first prefix is the corner of Y already tied to Tr_{B2..Bk} S
            Ti, Tj = _reduced_indices(n, 1, transpose_low=dB)
            piece = ("Y", Ti + r, Tj + r, -1.0)
        else:
            piece = ("S", Ti, Tj, -1.0)
        prob.add_matrix_equality(n, [(name, Pi, Pj, 1.0), piece])
    _check_capacity(prob)
    return prob


def bound_gap1(dimB: int, k: int, value: float) -> tuple:
    """Bracket ``(lower, upper)`` on F_s implied by a first-benchmark value at level ``k``.

    ``F_s <= value`` always. The de Finetti style bound
    ``value <= 1 - (sqrt(1 - F_s) - 2 sqrt(delta (1 - delta)))^2`` with
    ``delta = dimB^2 / k`` inverts to ``F_s >= 1 - (sqrt(1 - value) + 2 sqrt(delta (1 - delta)))^2``.
    For ``delta >= 1`` the bound carries no information and ``(0, 1)`` is returned.
    """
    if k < 1:
        raise ValueError("k must be positive")
    value = min(max(float(value), 0.0), 1.0)
    delta = dimB**2 / k
    if delta >= 1:
        return 0.0, 1.0
    t = 2 * sqrt(delta * (1 - delta))
    lower = max(0.0, 1 - (sqrt(1 - value) + t) ** 2)
    return lower, value


def bound_gap2(dimA: int, dimB: int, k: int, value: float) -> tuple:
    """Bracket on F_s from a second-benchmark value: ``value - 4 dimA^3 dimB / k <= F_s <= value``."""
    if k < 1:
        raise ValueError("k must be positive")
    value = min(max(float(value), 0.0), 1.0)
    return max(0.0, value - 4 * dimA**3 * dimB / k), value


def solve_benchmark1(rho: DensityMatrix, split, k: int, **solver_opts) -> BenchmarkResult:
    sol = solve_or_raise(benchmark1_problem(rho, split, k), **solver_opts)
    value = max(sol.primal_value, 0.0) ** 2
    dB = rho.layout.dim_of(split[1])
    return BenchmarkResult(value, k, sol, bound_gap1(dB, k, value))


def benchmark1(rho: DensityMatrix, split, k: int, **solver_opts) -> float:
    return solve_benchmark1(rho, split, k, **solver_opts).value


def benchmark2_objective_operator(rho: DensityMatrix, split) -> tuple:
    """Operator ``K`` on ``R (x) A'`` with objective ``Re Tr[Gamma_{RA'} K]``.

    For the symmetric projector on ``A'A`` the contraction works out to
    ``K = (psi_R^T (x) I + T_R(psi_RA)) / 2`` with ``A'`` identified with ``A``.
    Returns ``(K, r, dA)``.
    """
    mat, dA, dB = _split_dims(rho, split)
    ordered = DensityMatrix(mat, Layout([("A", dA), ("B", dB)]))
    r = rank(mat)
    psi = purify(ordered, "R", r)
    lay = psi.layout
    v = psi.amplitudes
    full = np.outer(v, v.conj())
    psi_ra = partial_trace(full, lay, ["R", "A"])
    psi_r = partial_trace(full, lay, ["R"])
    K = 0.5 * np.kron(psi_r.T, np.eye(dA)) + 0.5 * partial_transpose(psi_ra, lay.sub(["R", "A"]), ["R"])
    return K, r, dA


def benchmark2_problem(rho: DensityMatrix, split, k: int) -> SdpProblem:
    if not 1 <= k <= MAX_K:
        raise CapacityError(f"extension level k={k} is outside 1..{MAX_K}")
    K, r, dA = benchmark2_objective_operator(rho, split)
    n = r * dA**k
    prob = SdpProblem()
    prob.add_block("G", n)
    # Re Tr[Gamma_1 K] with Gamma_1 = Tr_{A'_2..A'_k} Gamma
    n1 = r * dA
    Gi, Gj = _reduced_indices(n1, dA ** (k - 1))
    coef = np.broadcast_to(K.T[..., None], Gi.shape)
    prob.add_objective("G", Gi.ravel(), Gj.ravel(), coef.ravel())
    Ri, Rj = _reduced_indices(r, dA**k)
    prob.add_matrix_equality(r, [("G", Ri, Rj, 1.0)], np.eye(r))
    if k > 1:
        prob.add_permutation_invariance("G", [r] + [dA] * k, list(range(1, k + 1)))
    I, J = _grid(n)
    for j in range(1, k + 1):
        name = f"P{j}"
        prob.add_block(name, n)
        # transpose the first j copies of A' (the factor block of size dA^j above the tail)
        tail = dA ** (k - j)
        hi_i, rest_i = divmod(I, dA**k)
        hi_j, rest_j = divmod(J, dA**k)
        mid_i, low_i = divmod(rest_i, tail)
        mid_j, low_j = divmod(rest_j, tail)
        Ti = hi_i * dA**k + mid_j * tail + low_i
        Tj = hi_j * dA**k + mid_i * tail + low_j
        prob.add_matrix_equality(n, [(name, I, J, 1.0), ("G", Ti, Tj, -1.0)])
    _check_capacity(prob)
    return prob


def solve_benchmark2(rho: DensityMatrix, split, k: int, **solver_opts) -> BenchmarkResult:
    sol = solve_or_raise(benchmark2_problem(rho, split, k), **solver_opts)
    value = 2 * sol.primal_value - 1
    dA = rho.layout.dim_of(split[0])
    dB = rho.layout.dim_of(split[1])
    return BenchmarkResult(value, k, sol, bound_gap2(dA, dB, k, value))


def benchmark2(rho: DensityMatrix, split, k: int, **solver_opts) -> float:
    return solve_benchmark2(rho, split, k, **solver_opts).value
