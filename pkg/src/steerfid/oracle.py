"""Brute-force lower bounds on F_s for small states.

The search runs over pure-state decompositions of rho. With ``rho = W W^dag``
(``W`` has the scaled eigenvectors as columns) every decomposition into ``N``
unnormalized vectors is ``v_x = (W U^T)[:, x]`` for an isometry ``U`` of shape
``(N, rank)``, and

    F_s(rho) = max_U  sum_x max_{phi product} |<phi|v_x>|^2.

Each restart alternates three exact maximizations of
``Re sum_x sqrt(q_x) <pi_x|v_x>``: the product vectors ``pi_x`` (SVD for two
parties, alternating ascent otherwise), the weights ``q_x``, and the isometry
``U`` (polar factor). None of the steps can decrease the objective, and every
iterate certifies a lower bound.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import prod
from typing import Sequence

import numpy as np

from .errors import CapacityError, ShapeError
from .qcore import DensityMatrix, Layout, PureState, fidelity_exact, permute_subsystems, reduced_pure, spectral_norm

log = logging.getLogger(__name__)

MAX_DIM = 16


@dataclass(frozen=True)
class OracleConfig:
    restarts: int = 16
    inner_tol: float = 1e-12
    max_inner_iter: int = 2000
    decomposition_dim: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass
class OracleResult:
    value: float
    restart_values: list
    decomposition_value: float
    witness_fidelity: float
    weights: np.ndarray = field(repr=False)
    branches: list = field(repr=False)

    @property
    def spread(self) -> float:
        return float(max(self.restart_values) - min(self.restart_values))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("STEERFID_THREADS", "1")))
    except ValueError:
        return 1


def _normalize_partitions(layout, partitions) -> list:
    parts = [list(p) for p in partitions]
    if len(parts) < 2:
        raise ShapeError("at least two partitions are required")
    flat = [label for p in parts for label in p]
    if sorted(flat) != sorted(layout.labels):
        raise ShapeError(f"partitions {parts} do not cover layout {layout.labels}")
    return parts


def _best_product(t: np.ndarray, dims: Sequence[int], start=None, tol=1e-13, max_iter=2000):
    """Alternating ascent for ``max |<phi_1 ... phi_M|t>|`` over unit vectors.

    ``t`` has shape ``dims``. Returns ``(overlap, factors)``; the overlap is
    ``|<phi|t>|`` (not squared).
    """
    m = len(dims)
    if m == 2:
        u, s, vh = np.linalg.svd(t.reshape(dims))
        return float(s[0]), [u[:, 0].conj(), vh[0].conj()]
    if start is None:
        factors = []
        for i in range(m):
            unfold = np.moveaxis(t, i, 0).reshape(dims[i], -1)
            u, _, _ = np.linalg.svd(unfold, full_matrices=False)
            factors.append(u[:, 0].conj())
    else:
        factors = [f.copy() for f in start]
    value = 0.0
    for _ in range(max_iter):
        old = value
        for i in range(m):
            w = t
            for j in range(m - 1, -1, -1):
                if j != i:
                    w = np.tensordot(w, factors[j], axes=([j], [0]))
            norm = np.linalg.norm(w)
            if norm == 0:
                return 0.0, factors
            # conjugated factors: overlap <phi|t> = sum t * prod(factors)
            factors[i] = w.conj() / norm
            value = norm
        if value - old <= tol:
            break
    return float(value), factors


def fs_pure(psi: PureState, partitions, restarts: int = 50, seed: int = 0, tol: float = 1e-13, max_iter: int = 2000) -> float:
    """F_s of a pure state: largest squared overlap with a product state.

    Two partitions use the exact spectral norm of a reduced state. More
    partitions use alternating ascent from one deterministic start plus
    ``restarts - 1`` random ones.
    """
    parts = _normalize_partitions(psi.layout, partitions)
    if len(parts) == 2:
        return spectral_norm(reduced_pure(psi.amplitudes, psi.layout, parts[0]))
    dims = [psi.layout.dim_of(p) for p in parts]
    order = [label for p in parts for label in p]
    t = permute_subsystems(psi.amplitudes, psi.layout, order).reshape(dims)
    best, _ = _best_product(t, dims, tol=tol, max_iter=max_iter)
    rng = np.random.default_rng(seed)
    for _ in range(restarts - 1):
        start = []
        for d in dims:
            v = rng.normal(size=d) + 1j * rng.normal(size=d)
            start.append(v / np.linalg.norm(v))
        val, _ = _best_product(t, dims, start=start, tol=tol, max_iter=max_iter)
        best = max(best, val)
    return min(best**2, 1.0)


def _random_isometry(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    q, _ = np.linalg.qr(g)
    return q


def _seesaw(W: np.ndarray, dims: list, n_out: int, rng, tol: float, max_iter: int):
    r = W.shape[1]
    U = _random_isometry(n_out, r, rng)
    factors = [None] * n_out
    best = -1.0
    for _ in range(max_iter):
        V = (W @ U.T).T  # row x is v_x
        if len(dims) == 2:
            u, sv, vh = np.linalg.svd(V.reshape(n_out, *dims))
            s = sv[:, 0]
            # <u0 (x) vh0 | v_x> = s_x >= 0 with vh0 the top right singular row
            pis = np.einsum("xa,xb->xab", u[:, :, 0], vh[:, 0, :]).reshape(n_out, -1)
        else:
            s, pis = _product_step(V, dims, factors, tol)
        D = float(np.sum(s**2))
        if D - best <= tol:
            best = max(best, D)
            break
        best = D
        q = s**2 / D
        B = np.sqrt(q)[:, None] * (pis.conj() @ W)
        P, _, Qh = np.linalg.svd(B, full_matrices=False)
        U = (P @ Qh).conj()
    return U


def _product_step(V, dims, factors, tol):
    n_out = V.shape[0]
    s = np.zeros(n_out)
    pis = np.zeros(V.shape, dtype=complex)
    for x in range(n_out):
        val, fac = _best_product(V[x].reshape(dims), dims, start=factors[x], tol=tol, max_iter=50)
        factors[x] = fac
        s[x] = val
        # phase pi_x so that <pi_x|v_x> is real and positive
        vec = fac[0].conj()
        for f in fac[1:]:
            vec = np.kron(vec, f.conj())
        phase = np.vdot(vec, V[x])
        pis[x] = vec * (phase / abs(phase) if abs(phase) > 0 else 1.0)
    return s, pis


def _evaluate(W, U, dims, parts_layout, parts):
    """Certified value of the decomposition defined by ``U``."""
    V = (W @ U.T).T
    p = np.sum(np.abs(V) ** 2, axis=1)
    keep = p > 1e-14
    total = 0.0
    branches = []
    for x in np.flatnonzero(keep):
        psi = PureState(V[x] / np.sqrt(p[x]), parts_layout)
        f = fs_pure(psi, parts, restarts=5)
        total += p[x] * f
        branches.append(psi)
    return total, p[keep], branches


def oracle_search(rho: DensityMatrix, partitions, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    if rho.dim > MAX_DIM:
        raise CapacityError(f"oracle is limited to total dimension {MAX_DIM}, got {rho.dim}")
    parts = _normalize_partitions(rho.layout, partitions)
    order = [label for p in parts for label in p]
    mat = permute_subsystems(rho.mat, rho.layout, order)
    lay = Layout([(label, rho.layout.dims[rho.layout.index(label)]) for label in order])
    dims = [rho.layout.dim_of(p) for p in parts]
    w, v = np.linalg.eigh(mat)
    keep = w > 1e-12
    W = v[:, keep] * np.sqrt(w[keep])
    r = W.shape[1]
    if r == 1:
        psi = PureState(W[:, 0] / np.linalg.norm(W[:, 0]), lay)
        val = fs_pure(psi, parts)
        return OracleResult(val, [val], val, val, np.ones(1), [psi])
    n_out = cfg.decomposition_dim or r * r
    if n_out < r:
        raise CapacityError(f"decomposition dimension {n_out} is below the rank {r}")
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)

    def run(ss):
        rng = np.random.default_rng(ss)
        U = _seesaw(W, dims, n_out, rng, cfg.inner_tol, cfg.max_inner_iter)
        val, weights, branches = _evaluate(W, U, dims, lay, parts)
        return val, weights, branches

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        results = list(pool.map(run, streams))
    values = [res[0] for res in results]
    best = int(np.argmax(values))
    val, weights, branches = results[best]
    witness = _witness(branches, weights, dims, parts, lay)
    wit_f = fidelity_exact(mat, witness)
    log.debug("oracle restarts %s witness %.12f", values, wit_f)
    return OracleResult(max(val, wit_f), values, val, wit_f, weights, branches)


def _witness(branches, weights, dims, parts, lay) -> np.ndarray:
    """Separable state built from the best product approximant of each branch."""
    d = prod(dims)
    sigma = np.zeros((d, d), dtype=complex)
    scores = []
    vecs = []
    for psi in branches:
        t = psi.amplitudes.reshape(dims)
        val, fac = _best_product(t, dims)
        vec = fac[0].conj()
        for f in fac[1:]:
            vec = np.kron(vec, f.conj())
        scores.append(val**2)
        vecs.append(vec)
    q = np.asarray(weights) * np.asarray(scores)
    q = q / q.sum()
    for qx, vec in zip(q, vecs):
        sigma += qx * np.outer(vec, vec.conj())
    return sigma


def fs_bruteforce(rho: DensityMatrix, partitions, cfg: OracleConfig = OracleConfig()) -> float:
    """Best certified lower bound on F_s found by the restarted search."""
    return oracle_search(rho, partitions, cfg).value
