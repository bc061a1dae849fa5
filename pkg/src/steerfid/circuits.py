"""Hardware-efficient ansatz circuits, statevector updates and measurement branches."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeError
from .qcore import Layout, PureState

PRUNE = 1e-14


@dataclass(frozen=True)
class ParamCircuit:
    """Layered ansatz: Rx then Ry on every qubit, then CNOTs ``i -> i+1``."""

    n_qubits: int
    layers: int
    entangling: bool = True

    def __post_init__(self):
        if self.n_qubits < 1 or self.layers < 1:
            raise ShapeError("a circuit needs at least one qubit and one layer")

    @property
    def n_params(self) -> int:
        return 2 * self.n_qubits * self.layers

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def to_json(self, params=None) -> dict:
        out = {"n_qubits": self.n_qubits, "layers": self.layers, "entangling": self.entangling}
        if params is not None:
            out["params"] = [float(t) for t in params]
        return out


class OutcomeTable(dict):
    """Per-outcome parameter vectors, created as zeros on first access."""

    def __init__(self, n_params: int, entries=None):
        super().__init__(entries or {})
        self.n_params = n_params

    def __missing__(self, outcome):
        value = np.zeros(self.n_params)
        self[outcome] = value
        return value


def _cnot_chain_perm(n: int) -> np.ndarray:
    """Basis map of CNOT(0,1) then CNOT(1,2) ... as an index permutation."""
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1
    for i in range(n - 1):
        bits[:, i + 1] ^= bits[:, i]
    return bits @ (1 << np.arange(n - 1, -1, -1))


def _rotations(theta_x: np.ndarray, theta_y: np.ndarray) -> np.ndarray:
    """Ry(ty) @ Rx(tx), batched over the leading axes."""
    cx, sx = np.cos(theta_x / 2), np.sin(theta_x / 2)
    cy, sy = np.cos(theta_y / 2), np.sin(theta_y / 2)
    out = np.empty(theta_x.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = cy * cx + 1j * sy * sx
    out[..., 0, 1] = -1j * cy * sx - sy * cx
    out[..., 1, 0] = sy * cx - 1j * cy * sx
    out[..., 1, 1] = -1j * sy * sx + cy * cx
    return out


def hea_unitaries(circ: ParamCircuit, params: np.ndarray) -> np.ndarray:
    """Batched ansatz unitaries for parameter rows of shape ``(..., n_params)``."""
    params = np.asarray(params, dtype=float)
    if params.shape[-1] != circ.n_params:
        raise ShapeError(f"expected {circ.n_params} parameters, got {params.shape[-1]}")
    batch = params.shape[:-1]
    n, dim = circ.n_qubits, circ.dim
    p = params.reshape(-1, circ.layers, n, 2)
    count = p.shape[0]
    chain = _cnot_chain_perm(n) if circ.entangling and n > 1 else None
    u = np.broadcast_to(np.eye(dim, dtype=complex), (count, dim, dim)).copy()
    for layer in range(circ.layers):
        gates = _rotations(p[:, layer, :, 0], p[:, layer, :, 1])
        local = gates[:, 0]
        for q in range(1, n):
            local = np.einsum("xab,xcd->xacbd", local, gates[:, q]).reshape(count, 2 ** (q + 1), 2 ** (q + 1))
        step = local
        if chain is not None:
            step = np.empty_like(local)
            step[:, chain, :] = local
        u = step @ u
    return u.reshape(batch + (dim, dim))


def hea_unitary(circ: ParamCircuit, params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.ndim != 1:
        raise ShapeError("hea_unitary takes a flat parameter vector")
    return hea_unitaries(circ, params)


def apply_to_subsystem(state: PureState, u: np.ndarray, targets: Sequence[str]) -> PureState:
    """Apply ``u`` to ``targets``; the factor order of ``u`` follows ``targets``."""
    layout = state.layout
    targets = list(targets)
    pos = layout.indices(targets)
    d = prod(layout.dims[i] for i in pos)
    u = np.asarray(u)
    if u.shape != (d, d):
        raise ShapeError(f"operator of shape {u.shape} does not act on targets of dimension {d}")
    rest = [i for i in range(len(layout)) if i not in pos]
    order = pos + rest
    t = state.amplitudes.reshape(layout.dims).transpose(order).reshape(d, -1)
    t = (u @ t).reshape([layout.dims[i] for i in order]).transpose(np.argsort(order))
    return PureState(t.reshape(-1), layout)


def _split(state: PureState, measured: Iterable[str]):
    layout = state.layout
    pos = sorted(set(layout.indices(measured)))
    rest = [i for i in range(len(layout)) if i not in pos]
    dm = prod(layout.dims[i] for i in pos)
    t = state.amplitudes.reshape(layout.dims).transpose(pos + rest).reshape(dm, -1)
    post_layout = Layout([layout.subsystems[i] for i in rest])
    return t, post_layout


def measure_branches(state: PureState, measured: Iterable[str]) -> list:
    """Exact computational-basis measurement of ``measured``.

    Returns ``(prob, outcome, post_state)`` triples. The outcome is the composite
    index of the measured subsystems in layout order; branches below ``1e-14``
    are dropped.
    """
    t, post_layout = _split(state, measured)
    probs = np.sum(np.abs(t) ** 2, axis=1)
    branches = []
    for x in np.flatnonzero(probs >= PRUNE):
        p = float(probs[x])
        branches.append((p, int(x), PureState(t[x] / np.sqrt(p), post_layout)))
    return branches


def sample_outcome(state: PureState, measured: Iterable[str], rng: np.random.Generator):
    t, post_layout = _split(state, measured)
    probs = np.sum(np.abs(t) ** 2, axis=1)
    probs = np.where(probs >= PRUNE, probs, 0.0)
    x = int(rng.choice(len(probs), p=probs / probs.sum()))
    return x, PureState(t[x] / np.sqrt(probs[x]), post_layout)
