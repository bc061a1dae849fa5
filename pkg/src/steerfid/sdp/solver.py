"""Primal-dual interior-point solver for complex Hermitian SDPs.

Infeasible-start path following with the HKM search direction and Mehrotra's
predictor-corrector. Blocks stay complex throughout; the Schur complement is
real because every constraint functional is the real part of a Hermitian
inner product.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..errors import SolverError
from .problem import SdpProblem

log = logging.getLogger(__name__)

GAP_TOL = 1e-8
FEAS_TOL = 1e-8
MAX_ITER = 200
CHUNK_ELEMS = 1 << 22
DENSE_SCHUR_DIM = 2048  # blocks with s*s up to this use the Kronecker route


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    blocks: dict
    y: np.ndarray
    residuals: dict
    iterations: int
    history: list = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.primal_value


class _Block:
    def __init__(self, cb):
        self.name = cb.name
        self.s = cb.dim
        self.F = cb.F
        # constraints touching this block
        self.J = np.flatnonzero(np.diff(cb.F.indptr))
        self.FJ = cb.F[:, self.J].tocsc()
        self.FJH = self.FJ.conj().T.tocsr()
        self.C = cb.C

    def op(self, N):
        """A(N) restricted to this block's constraints."""
        return (self.FJH @ N.reshape(-1)).real

    def adj(self, y):
        v = self.FJ @ y[self.J]
        return v.reshape(self.s, self.s)

    def schur(self, X, Zinv, M):
        s = self.s
        F = self.FJ
        if s * s <= DENSE_SCHUR_DIM:
            # row-major vec(X A Zinv) = (X kron Zinv^T) vec(A)
            T = np.kron(X, Zinv.T) @ F
            M[np.ix_(self.J, self.J)] += (self.FJH @ T).real
            return
        ncols = F.shape[1]
        nnz_per_col = np.diff(F.indptr)
        budget = max(1, CHUNK_ELEMS // (s * s))
        start = 0
        while start < ncols:
            stop = start
            used = 0
            while stop < ncols and (used + nnz_per_col[stop] <= budget or stop == start):
                used += nnz_per_col[stop]
                stop += 1
            lo, hi = F.indptr[start], F.indptr[stop]
            rows = F.indices[lo:hi]
            vals = F.data[lo:hi]
            p, q = rows // s, rows % s
            # G_j = X A_j Zinv = sum_k a_k X[:, p_k] Zinv[q_k, :]
            outer = np.einsum("un,vn->uvn", X[:, p] * vals, Zinv[q, :].T).reshape(s * s, -1)
            offsets = F.indptr[start:stop] - lo
            G = np.add.reduceat(outer, offsets, axis=1)
            cols = self.J[start:stop]
            M[np.ix_(self.J, cols)] += (self.FJH @ G).real
            start = stop


def _chol(X):
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return None


def _max_step(L, D):
    """Largest alpha with X + alpha D >= 0, given the Cholesky factor L of X."""
    W = sla.solve_triangular(L, D, lower=True)
    W = sla.solve_triangular(L, W.conj().T, lower=True)
    lam = np.linalg.eigvalsh((W + W.conj().T) / 2)[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _herm(A):
    return (A + A.conj().T) / 2


def _inner(A, B):
    return float(np.real(np.vdot(A, B)))


def solve(problem: SdpProblem, gap_tol: float = GAP_TOL, feas_tol: float = FEAS_TOL, max_iter: int = MAX_ITER) -> SdpSolution:
    """Maximize the problem's objective. Never raises on non-convergence; see ``status``."""
    compiled = problem.compile()
    blocks = [_Block(cb) for cb in compiled]
    b = problem.rhs
    m = b.size
    n_total = sum(blk.s for blk in blocks)
    # internal minimization of <-C, X>
    Cm = [-blk.C for blk in blocks]

    def A_op(mats):
        out = np.zeros(m)
        for blk, N in zip(blocks, mats):
            out[blk.J] += blk.op(N)
        return out

    def A_adj(y):
        return [blk.adj(y) for blk in blocks]

    X, Z = [], []
    for blk, C in zip(blocks, Cm):
        s = blk.s
        col_norms = np.sqrt(np.asarray(abs(blk.F).power(2).sum(axis=0))).ravel()
        touched = col_norms > 0
        ratio = np.max((1 + np.abs(b[touched])) / (1 + col_norms[touched])) if touched.any() else 1.0
        xi = max(10.0, np.sqrt(s), s * ratio)
        eta = max(10.0, np.sqrt(s), np.linalg.norm(C), col_norms.max(initial=0.0))
        X.append(xi * np.eye(s, dtype=complex))
        Z.append(eta * np.eye(s, dtype=complex))
    y = np.zeros(m)
    b_norm = 1 + np.linalg.norm(b)
    c_norm = 1 + np.sqrt(sum(np.linalg.norm(C) ** 2 for C in Cm))

    status = "max_iter"
    history = []
    it = 0
    pinf = dinf = gap = np.inf
    stalls = 0
    for it in range(1, max_iter + 1):
        AtY = A_adj(y)
        rp = b - A_op(X)
        Rd = [C - Aty - Zb for C, Aty, Zb in zip(Cm, AtY, Z)]
        pobj = sum(_inner(C, Xb) for C, Xb in zip(Cm, X))
        dobj = float(b @ y)
        pinf = np.linalg.norm(rp) / b_norm
        dinf = np.sqrt(sum(np.linalg.norm(R) ** 2 for R in Rd)) / c_norm
        gap = abs(pobj - dobj)
        mu = sum(_inner(Xb, Zb) for Xb, Zb in zip(X, Z)) / n_total
        history.append((it, -pobj, -dobj, pinf, dinf, gap))
        log.debug("iter %d pobj %.10g dobj %.10g pinf %.2e dinf %.2e gap %.2e", it, -pobj, -dobj, pinf, dinf, gap)
        if pinf <= feas_tol and dinf <= feas_tol and gap <= gap_tol * max(1.0, abs(pobj)):
            status = "optimal"
            break
        if max(np.abs(Xb).max() for Xb in X) > 1e12:
            status = "dual_infeasible"
            break
        if np.abs(y).max(initial=0.0) > 1e12:
            status = "primal_infeasible"
            break

        Ls = [_chol(Zb) for Zb in Z]
        if any(L is None for L in Ls):
            status = "numerical_failure"
            break
        Zinv = [sla.cho_solve((L, True), np.eye(L.shape[0])) for L in Ls]
        Zinv = [_herm(Zi) for Zi in Zinv]
        M = np.zeros((m, m))
        for blk, Xb, Zi in zip(blocks, X, Zinv):
            blk.schur(Xb, Zi, M)
        M = (M + M.T) / 2
        factor = None
        reg = 0.0
        scale = max(np.max(np.diag(M)), 1e-300)
        for _ in range(6):
            try:
                factor = sla.cho_factor(M + reg * scale * np.eye(m), lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                reg = 1e-14 if reg == 0 else reg * 100
        if factor is None:
            status = "numerical_failure"
            break

        XRdZ = [Xb @ R @ Zi for Xb, R, Zi in zip(X, Rd, Zinv)]
        A_XRdZ = A_op(XRdZ)

        def direction(sigma_mu, corr):
            H = []
            for Xb, Zi, Cr in zip(X, Zinv, corr):
                h = sigma_mu * Zi - Xb
                if Cr is not None:
                    h = h - Cr @ Zi
                H.append(h)
            rhs = rp - A_op(H) + A_XRdZ
            dy = sla.cho_solve(factor, rhs, check_finite=False)
            AtD = A_adj(dy)
            dZ = [R - a for R, a in zip(Rd, AtD)]
            dX = [_herm(h - Xb @ dz @ Zi) for h, Xb, dz, Zi in zip(H, X, dZ, Zinv)]
            dZ = [_herm(dz) for dz in dZ]
            return dX, dy, dZ

        LX = [_chol(Xb) for Xb in X]
        if any(L is None for L in LX):
            status = "numerical_failure"
            break

        def steps(dX, dZ):
            ap = min(_max_step(L, d) for L, d in zip(LX, dX))
            ad = min(_max_step(L, d) for L, d in zip(Ls, dZ))
            return ap, ad

        dXa, dya, dZa = direction(0.0, [None] * len(blocks))
        ap, ad = steps(dXa, dZa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = sum(_inner(Xb + ap * d, Zb + ad * e) for Xb, d, Zb, e in zip(X, dXa, Z, dZa)) / n_total
        sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** 3)
        corr = [d @ e for d, e in zip(dXa, dZa)]
        dX, dy, dZ = direction(sigma * mu, corr)
        ap, ad = steps(dX, dZ)
        tau = 0.9 + 0.09 * min(min(1.0, ap), min(1.0, ad))
        ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        y = y + ad * dy
        Z = [Zb + ad * d for Zb, d in zip(Z, dZ)]
        if max(ap, ad) < 1e-10:
            stalls += 1
            if stalls >= 3:
                status = "numerical_failure"
                break
        else:
            stalls = 0

    pval = -sum(_inner(C, Xb) for C, Xb in zip(Cm, X))
    dval = -float(b @ y)
    return SdpSolution(
        status=status,
        primal_value=pval,
        dual_value=dval,
        blocks={blk.name: Xb for blk, Xb in zip(blocks, X)},
        y=-y,
        residuals={"primal_infeasibility": float(pinf), "dual_infeasibility": float(dinf), "gap": float(gap)},
        iterations=it,
        history=history,
    )


def solve_or_raise(problem: SdpProblem, **opts) -> SdpSolution:
    sol = solve(problem, **opts)
    if sol.status != "optimal":
        raise SolverError(
            f"SDP solver stopped with status {sol.status} after {sol.iterations} iterations "
            f"(residuals {sol.residuals})",
            solution=sol,
        )
    return sol
