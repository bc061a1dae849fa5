"""Dense linear algebra and quantum-information primitives.

Composite indices follow the layout order, first subsystem most significant,
so a matrix on ``Layout([("A", 2), ("B", 3)])`` reshapes to ``(2, 3, 2, 3)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial, prod
from typing import Iterable, Sequence

import numpy as np

from .errors import AddressingError, InvalidStateError, ShapeError

EIG_CLIP = 1e-10
STATE_TOL = 1e-10
MAX_PERMUTED = 5


@dataclass(frozen=True)
class Layout:
    """Ordered list of ``(label, dim)`` pairs."""

    subsystems: tuple

    def __init__(self, subsystems: Iterable[Sequence]):
        items = tuple((str(label), int(dim)) for label, dim in subsystems)
        labels = [label for label, _ in items]
        if len(set(labels)) != len(labels):
            raise ShapeError(f"duplicate labels in layout: {labels}")
        for label, dim in items:
            if dim < 1:
                raise ShapeError(f"subsystem {label!r} has dimension {dim}")
        object.__setattr__(self, "subsystems", items)

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def __len__(self):
        return len(self.subsystems)

    def __add__(self, other: "Layout") -> "Layout":
        return Layout(self.subsystems + other.subsystems)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise AddressingError(f"unknown subsystem label {label!r}; layout has {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list:
        return [self.index(label) for label in labels]

    def dim_of(self, labels: Iterable[str]) -> int:
        return prod(self.dims[i] for i in self.indices(labels))

    def sub(self, labels: Iterable[str]) -> "Layout":
        """Restriction to ``labels``, kept in layout order."""
        wanted = set(labels)
        missing = wanted.difference(self.labels)
        if missing:
            raise AddressingError(f"unknown subsystem labels {sorted(missing)}; layout has {self.labels}")
        return Layout([s for s in self.subsystems if s[0] in wanted])

    def without(self, labels: Iterable[str]) -> "Layout":
        drop = set(labels)
        self.indices(drop)
        return Layout([s for s in self.subsystems if s[0] not in drop])

    def to_json(self) -> list:
        return [[label, dim] for label, dim in self.subsystems]


def _check_square(m: np.ndarray, layout: Layout) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape != (layout.dim, layout.dim):
        raise ShapeError(f"matrix of shape {m.shape} does not match layout dimension {layout.dim}")
    return m


@dataclass(frozen=True)
class DensityMatrix:
    mat: np.ndarray
    layout: Layout

    def __post_init__(self):
        m = np.array(self.mat, dtype=complex)
        _check_square(m, self.layout)
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("density matrix has non-finite entries")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > STATE_TOL:
            raise InvalidStateError("density matrix is not Hermitian")
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1) > STATE_TOL:
            raise InvalidStateError(f"density matrix has trace {tr}")
        if np.linalg.eigvalsh(m)[0] < -STATE_TOL:
            raise InvalidStateError("density matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.layout.dim


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    layout: Layout

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if v.shape[0] != self.layout.dim:
            raise ShapeError(f"vector of length {v.shape[0]} does not match layout dimension {self.layout.dim}")
        norm = np.linalg.norm(v)
        if abs(norm - 1) > STATE_TOL:
            raise InvalidStateError(f"state vector has norm {norm}")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    def density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.layout)


def _unwrap(m):
    if isinstance(m, DensityMatrix):
        return m.mat, m.layout
    return np.asarray(m), None


def tensor(a, b):
    """Kronecker product. Layout-carrying operands give a layout-carrying result."""
    ma, la = _unwrap(a)
    mb, lb = _unwrap(b)
    out = np.kron(ma, mb)
    if la is not None and lb is not None:
        return DensityMatrix(out, la + lb)
    return out


def _letters(n):
    return [chr(ord("a") + i) for i in range(n)]


def partial_trace(m: np.ndarray, layout: Layout, keep: Iterable[str]) -> np.ndarray:
    """Trace out every subsystem not in ``keep``.

    The result is ordered as in ``layout``, whatever order ``keep`` uses.
    """
    m = _check_square(np.asarray(m), layout)
    keep_idx = sorted(set(layout.indices(keep)))
    n = len(layout)
    if len(keep_idx) == n:
        return m.copy()
    dims = layout.dims
    rows = _letters(n)
    cols = [chr(ord("A") + i) if i in keep_idx else rows[i] for i in range(n)]
    out = [rows[i] for i in keep_idx] + [cols[i] for i in keep_idx]
    expr = "".join(rows) + "".join(cols) + "->" + "".join(out)
    d = prod(dims[i] for i in keep_idx)
    return np.einsum(expr, m.reshape(dims + dims)).reshape(d, d)


def partial_transpose(m: np.ndarray, layout: Layout, transposed: Iterable[str]) -> np.ndarray:
    m = _check_square(np.asarray(m), layout)
    idx = set(layout.indices(transposed))
    n = len(layout)
    axes = list(range(2 * n))
    for i in idx:
        axes[i], axes[n + i] = n + i, i
    return m.reshape(layout.dims * 2).transpose(axes).reshape(m.shape)


def permute_subsystems(m: np.ndarray, layout: Layout, order: Sequence[str]) -> np.ndarray:
    """Reorder the tensor factors of a square matrix (or vector) to ``order``."""
    m = np.asarray(m)
    perm = layout.indices(order)
    if sorted(perm) != list(range(len(layout))):
        raise AddressingError(f"order {list(order)} is not a permutation of {layout.labels}")
    n = len(layout)
    if m.ndim == 1:
        return m.reshape(layout.dims).transpose(perm).reshape(-1)
    m = _check_square(m, layout)
    return m.reshape(layout.dims * 2).transpose(perm + [n + p for p in perm]).reshape(m.shape)


def swap_operator(d: int) -> np.ndarray:
    if d < 1:
        raise ShapeError("swap dimension must be positive")
    f = np.zeros((d * d, d * d))
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    f[(j * d + i).ravel(), (i * d + j).ravel()] = 1.0
    return f


def symmetric_projector(d: int) -> np.ndarray:
    return (np.eye(d * d) + swap_operator(d)) / 2


def symmetrize_permutations(m: np.ndarray, layout: Layout, group: Iterable[str]) -> np.ndarray:
    """Average of ``P m P^T`` over every permutation ``P`` of the ``group`` factors."""
    m = _check_square(np.asarray(m), layout)
    pos = layout.indices(group)
    if len({layout.dims[i] for i in pos}) > 1:
        raise ShapeError("permuted subsystems must share one dimension")
    if len(pos) > MAX_PERMUTED:
        raise ShapeError(f"at most {MAX_PERMUTED} subsystems may be permuted")
    n = len(layout)
    total = np.zeros_like(m, dtype=np.result_type(m, float))
    for perm in itertools.permutations(pos):
        order = list(range(n))
        for src, dst in zip(pos, perm):
            order[src] = dst
        axes = order + [n + o for o in order]
        total += m.reshape(layout.dims * 2).transpose(axes).reshape(m.shape)
    return total / factorial(len(pos))


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(m))
    w = np.where(w < EIG_CLIP, 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def spectral_norm(m: np.ndarray) -> float:
    """Largest singular value. Hermitian input goes straight through ``eigvalsh``."""
    m = np.asarray(m)
    if m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, atol=1e-12, rtol=0):
        return float(np.max(np.abs(np.linalg.eigvalsh(hermitian_part(m)))))
    w = np.linalg.eigvalsh(m.conj().T @ m)
    return float(np.sqrt(max(w[-1], 0.0)))


def fidelity_exact(rho, sigma) -> float:
    r"""Fidelity ``(Tr|sqrt(rho) sqrt(sigma)|)^2``.

    Computed as ``(sum_i sqrt(lambda_i))^2`` with ``lambda_i`` the eigenvalues of
    ``sqrt(rho) sigma sqrt(rho)``, which share the singular values of
    ``sqrt(rho) sqrt(sigma)`` squared.
    """
    a, la = _unwrap(rho)
    b, lb = _unwrap(sigma)
    if a.shape != b.shape:
        raise ShapeError(f"fidelity of matrices with shapes {a.shape} and {b.shape}")
    if la is not None and lb is not None and la.dims != lb.dims:
        raise ShapeError(f"layouts {la.subsystems} and {lb.subsystems} do not match")
    s = psd_sqrt(a)
    w = np.linalg.eigvalsh(hermitian_part(s @ b @ s))
    w = np.where(w < EIG_CLIP, 0.0, w)
    f = float(np.sum(np.sqrt(w)) ** 2)
    return min(max(f, 0.0), 1.0)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def reduced_pure(amplitudes: np.ndarray, layout: Layout, keep: Iterable[str]) -> np.ndarray:
    """Reduced density operator of a pure vector without forming the full projector."""
    keep_idx = sorted(set(layout.indices(keep)))
    rest = [i for i in range(len(layout)) if i not in keep_idx]
    t = np.asarray(amplitudes).reshape(layout.dims).transpose(keep_idx + rest)
    d = prod(layout.dims[i] for i in keep_idx)
    t = t.reshape(d, -1)
    return t @ t.conj().T


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Induced-measure random density matrix of the given rank (full by default)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_pure(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))
