"""Problem builder for complex Hermitian semidefinite programs.

The program is

    maximize   sum_b Re Tr(C_b X_b)
    subject to sum_b Re Tr(A_ib X_b) = b_i,   X_b >= 0.

Constraints are written through entry functionals: a term ``(block, p, q, c)``
contributes ``Re(c * X_block[p, q])``. The builder turns each functional into a
Hermitian coefficient matrix when the problem is compiled.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import prod
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..errors import AddressingError, CapacityError, ShapeError

MAX_TOTAL_DIM = 512


@dataclass
class CompiledBlock:
    name: str
    dim: int
    F: sp.csc_matrix  # (dim*dim, m), column i is vec(A_i) row-major
    C: np.ndarray


class SdpProblem:
    def __init__(self):
        self.blocks: dict[str, int] = {}
        self._obj: dict[str, list] = {}
        self._terms: dict[str, list] = {}
        self._rhs: list[np.ndarray] = []
        self.m = 0

    def add_block(self, name: str, dim: int) -> None:
        if name in self.blocks:
            raise ShapeError(f"block {name!r} already exists")
        if dim < 1:
            raise ShapeError("block dimension must be positive")
        self.blocks[name] = int(dim)
        self._obj[name] = []
        self._terms[name] = []

    @property
    def total_dim(self) -> int:
        return sum(self.blocks.values())

    def _check(self, block, p, q):
        if block not in self.blocks:
            raise AddressingError(f"unknown block {block!r}")
        s = self.blocks[block]
        if p.size and (p.min() < 0 or q.min() < 0 or p.max() >= s or q.max() >= s):
            raise AddressingError(f"entry index out of range for block {block!r} of size {s}")

    def add_objective(self, block: str, p, q, coef) -> None:
        p, q = np.atleast_1d(np.asarray(p, dtype=np.int64)), np.atleast_1d(np.asarray(q, dtype=np.int64))
        coef = np.broadcast_to(np.asarray(coef, dtype=complex), p.shape)
        self._check(block, p, q)
        self._obj[block].append((p, q, coef))

    def add_constraints(self, terms: Sequence, rhs) -> np.ndarray:
        """Append a batch of constraints.

        ``terms`` holds ``(block, p, q, coef, row)`` arrays where ``row`` indexes
        into ``rhs``. Returns the global indices of the new constraints.
        """
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        base = self.m
        for block, p, q, coef, row in terms:
            p = np.asarray(p, dtype=np.int64)
            coef = np.broadcast_to(np.asarray(coef, dtype=complex), p.shape).ravel()
            p = p.ravel()
            q = np.asarray(q, dtype=np.int64).ravel()
            row = np.asarray(row, dtype=np.int64).ravel()
            self._check(block, p, q)
            if row.size and (row.min() < 0 or row.max() >= rhs.size):
                raise AddressingError("constraint row out of range")
            self._terms[block].append((p, q, coef, row + base))
        self._rhs.append(rhs)
        self.m += rhs.size
        return np.arange(base, self.m)

    def add_matrix_equality(self, n: int, pieces: Sequence, target=None) -> np.ndarray:
        """Constrain the Hermitian n x n expression ``sum of pieces`` to ``target``.

        Each piece is ``(block, P, Q, coef)`` with index arrays of shape
        ``(n, n)`` or ``(n, n, t)``; entry ``(i, j)`` of the expression is
        ``sum_t coef * X_block[P[i, j, t], Q[i, j, t]]``. One real equation is
        emitted per diagonal entry and two per upper-triangular entry.
        """
        target = np.zeros((n, n)) if target is None else np.asarray(target, dtype=complex)
        iu, ju = np.triu_indices(n)
        off = iu != ju
        n_re, n_im = iu.size, int(off.sum())
        re_rows = np.arange(n_re)
        im_rows = n_re + np.arange(n_im)
        rhs = np.concatenate([target[iu, ju].real, target[iu[off], ju[off]].imag])
        terms = []
        for block, P, Q, coef in pieces:
            P, Q = np.asarray(P), np.asarray(Q)
            if P.ndim == 2:
                P, Q = P[..., None], Q[..., None]
            t = P.shape[2]
            coef = np.broadcast_to(np.asarray(coef, dtype=complex), P.shape)
            Pu, Qu, cu = P[iu, ju], Q[iu, ju], coef[iu, ju]
            terms.append((block, Pu, Qu, cu, np.repeat(re_rows, t)))
            terms.append((block, Pu[off], Qu[off], -1j * cu[off], np.repeat(im_rows, t)))
        return self.add_constraints(terms, rhs)

    def add_permutation_invariance(self, block: str, dims: Sequence[int], group: Sequence[int]) -> np.ndarray:
        """Constrain ``X = P X P^T`` for every permutation ``P`` of the tensor axes in ``group``.

        Works on orbits of ordered index pairs. For each class formed by an
        orbit and its transpose, the smallest pair ``r`` is kept free and every
        other upper-triangular entry is tied to ``X[r]`` or its conjugate; a
        self-transpose class also forces ``Im X[r] = 0``. The emitted equations
        are independent by construction.
        """
        s = self.blocks[block]
        dims = list(dims)
        if prod(dims) != s:
            raise ShapeError("dims do not multiply to the block size")
        base = np.arange(s).reshape(dims)
        maps = []
        for perm in itertools.permutations(group):
            order = list(range(len(dims)))
            for src, dst in zip(group, perm):
                order[src] = dst
            maps.append(base.transpose(order).ravel())
        p, q = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
        orb = np.min(np.stack([g[p] * s + g[q] for g in maps]), axis=0)
        cls = np.minimum(orb, orb.T)
        selfT = orb == orb.T
        pu, qu = np.triu_indices(s)
        lin = pu * s + qu
        rep = cls[pu, qu]
        rp, rq = rep // s, rep % s
        same = orb[pu, qu] == rep  # X[p,q] = X[r]; otherwise X[p,q] = conj(X[r])
        other = lin != rep
        diag = pu == qu
        terms = []
        rhs_count = 0

        def emit(mask, coef_pq, coef_r, rows):
            terms.append((block, pu[mask], qu[mask], coef_pq, rows))
            terms.append((block, rp[mask], rq[mask], coef_r[mask] if np.ndim(coef_r) else coef_r, rows))

        # real parts: Re X[p,q] - Re X[r] = 0
        mask = other
        rows = rhs_count + np.arange(int(mask.sum()))
        rhs_count += rows.size
        emit(mask, 1.0, -1.0, rows)
        # imaginary parts for off-diagonal entries
        mask = other & ~diag
        rows = rhs_count + np.arange(int(mask.sum()))
        rhs_count += rows.size
        sign = np.where(same, 1.0, -1.0)
        emit(mask, -1j, 1j * sign, rows)
        # self-transpose off-diagonal representatives are real
        mask = (~other) & (~diag) & selfT[pu, qu]
        rows = rhs_count + np.arange(int(mask.sum()))
        rhs_count += rows.size
        terms.append((block, pu[mask], qu[mask], -1j, rows))
        return self.add_constraints(terms, np.zeros(rhs_count))

    def compile(self) -> list[CompiledBlock]:
        if self.total_dim > MAX_TOTAL_DIM:
            raise CapacityError(f"total block dimension {self.total_dim} exceeds {MAX_TOTAL_DIM}")
        out = []
        for name, s in self.blocks.items():
            C = np.zeros((s, s), dtype=complex)
            for p, q, c in self._obj[name]:
                np.add.at(C, (q, p), c / 2)
                np.add.at(C, (p, q), np.conj(c) / 2)
            if self._terms[name]:
                p = np.concatenate([t[0] for t in self._terms[name]])
                q = np.concatenate([t[1] for t in self._terms[name]])
                c = np.concatenate([t[2] for t in self._terms[name]])
                r = np.concatenate([t[3] for t in self._terms[name]])
                idx = np.concatenate([q * s + p, p * s + q])
                vals = np.concatenate([c / 2, np.conj(c) / 2])
                F = sp.coo_matrix((vals, (idx, np.concatenate([r, r]))), shape=(s * s, self.m)).tocsc()
                F.sum_duplicates()
                F.eliminate_zeros()
            else:
                F = sp.csc_matrix((s * s, self.m), dtype=complex)
            out.append(CompiledBlock(name, s, F, C))
        return out

    @property
    def rhs(self) -> np.ndarray:
        return np.concatenate(self._rhs) if self._rhs else np.zeros(0)

    def write_sdpa(self, path) -> None:
        """Dump in sparse SDPA format after the real embedding ``[[Re, -Im], [Im, Re]]``.

        Every coefficient matrix is halved so that inner products of embedded
        matrices reproduce the complex ones. The SDPA dual form
        ``max F0.Y s.t. Fi.Y = ci, Y >= 0`` is exactly this problem.
        """
        blocks = self.compile()
        lines = [f"{self.m}", f"{len(blocks)}", " ".join(str(2 * b.dim) for b in blocks)]
        lines.append(" ".join(repr(float(v)) for v in self.rhs) or "0")

        def entries(mat_no, blk_no, A):
            A = sp.coo_matrix(A)
            s = A.shape[0]
            for i, j, v in zip(A.row, A.col, A.data):
                for (a, b, val) in ((i, j, v.real), (i + s, j + s, v.real), (i + s, j, v.imag), (i, j + s, -v.imag)):
                    if a <= b and val != 0:
                        lines.append(f"{mat_no} {blk_no} {a + 1} {b + 1} {float(val) / 2!r}")

        for k, b in enumerate(blocks, start=1):
            entries(0, k, b.C)
        for i in range(self.m):
            for k, b in enumerate(blocks, start=1):
                col = b.F[:, i]
                if col.nnz:
                    dense = np.zeros(b.dim * b.dim, dtype=complex)
                    dense[col.indices] = col.data
                    entries(i + 1, k, dense.reshape(b.dim, b.dim))
        Path(path).write_text("\n".join(lines) + "\n")
