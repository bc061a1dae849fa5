"""Named states, purifications and the qubit depolarizing channel."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import ceil, log2
from pathlib import Path

import numpy as np

from .circuits import ParamCircuit, hea_unitary
from .errors import CapacityError, ConfigError, ShapeError
from .qcore import DensityMatrix, Layout, PureState

RANK_CUTOFF = 1e-12

PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

KINDS = ("bell_mixture", "ghz", "depolarized_ghz4", "hea_random", "explicit")


@dataclass(frozen=True)
class NamedStateSpec:
    """Recipe for a named state.

    ``params`` by kind:

    * ``bell_mixture``: ``weights`` over (Phi+, Phi-, Psi+, Psi-); shorter lists are zero padded
    * ``ghz``: ``n_parties``
    * ``depolarized_ghz4``: ``p``
    * ``hea_random``: ``seed``, ``layers``, ``entangling``
    * ``explicit``: ``matrix``
    """

    kind: str
    params: dict = field(default_factory=dict)
    layout: Layout | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown state kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "bell_mixture":
            w = np.asarray(self.params.get("weights", ()), dtype=float)
            if w.size == 0 or w.size > 4 or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                raise ConfigError("bell_mixture weights must be a probability vector of length <= 4")
        if self.kind == "depolarized_ghz4":
            p = float(self.params.get("p", 0.7))
            if not 0 <= p <= 1:
                raise ConfigError("depolarizing probability must lie in [0, 1]")


def rank(rho: np.ndarray, cutoff: float = RANK_CUTOFF) -> int:
    return int(np.sum(np.linalg.eigvalsh(rho) > cutoff))


def default_ref_dim(rho: DensityMatrix) -> int:
    r = rank(rho.mat)
    return 1 if r <= 1 else 2 ** ceil(log2(r))


def purify(rho: DensityMatrix, ref_label: str = "R", ref_dim: int | None = None) -> PureState:
    """Schmidt-form purification ``sum_i sqrt(lam_i) |i>_R |e_i>``.

    Eigenvalues are taken in descending order and every eigenvector is rotated so
    its first non-negligible amplitude is real and positive.
    """
    w, v = np.linalg.eigh(rho.mat)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    r = int(np.sum(w > RANK_CUTOFF))
    if ref_dim is None:
        ref_dim = 1 if r <= 1 else 2 ** ceil(log2(r))
    if ref_dim < r:
        raise CapacityError(f"reference dimension {ref_dim} is below the rank {r}")
    amps = np.zeros((ref_dim, rho.dim), dtype=complex)
    for i in range(r):
        vec = v[:, i]
        lead = vec[np.flatnonzero(np.abs(vec) > 1e-12)[0]]
        amps[i] = np.sqrt(w[i]) * vec * (abs(lead) / lead)
    amps /= np.linalg.norm(amps)
    return PureState(amps.reshape(-1), Layout([(ref_label, ref_dim)]) + rho.layout)


def depolarize(rho: DensityMatrix, target: str, p: float) -> DensityMatrix:
    """``(1-p) rho + p (I/2 on target) (x) Tr_target rho``, via the Pauli twirl."""
    layout = rho.layout
    i = layout.index(target)
    if layout.dims[i] != 2:
        raise ShapeError(f"subsystem {target!r} is not a qubit")
    if not 0 <= p <= 1:
        raise ConfigError("depolarizing probability must lie in [0, 1]")
    left = int(np.prod(layout.dims[:i]))
    right = int(np.prod(layout.dims[i + 1 :]))
    out = (1 - 3 * p / 4) * rho.mat
    for pauli in PAULIS:
        op = np.kron(np.kron(np.eye(left), pauli), np.eye(right))
        out = out + (p / 4) * op @ rho.mat @ op.conj().T
    return DensityMatrix((out + out.conj().T) / 2, layout)


def _bell_vectors():
    s = 1 / np.sqrt(2)
    return (
        np.array([s, 0, 0, s]),
        np.array([s, 0, 0, -s]),
        np.array([0, s, s, 0]),
        np.array([0, s, -s, 0]),
    )


def bell_mixture(weights, layout: Layout | None = None) -> DensityMatrix:
    layout = layout or Layout([("A", 2), ("B", 2)])
    m = np.zeros((4, 4), dtype=complex)
    for w, v in zip(weights, _bell_vectors()):
        m += w * np.outer(v, v)
    return DensityMatrix(m, layout)


def ghz_vector(n: int) -> np.ndarray:
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return v


def ghz(n: int, layout: Layout | None = None) -> DensityMatrix:
    if n < 2:
        raise ConfigError("a GHZ state needs at least two parties")
    layout = layout or Layout([(f"A{i + 1}", 2) for i in range(n)])
    v = ghz_vector(n)
    return DensityMatrix(np.outer(v, v.conj()), layout)


def depolarized_ghz4(p: float = 0.7, layout: Layout | None = None) -> DensityMatrix:
    """Four-qubit GHZ with both A qubits sent through the depolarizing channel."""
    layout = layout or Layout([("A1", 2), ("A2", 2), ("B1", 2), ("B2", 2)])
    rho = ghz(4, layout)
    for label in layout.labels[:2]:
        rho = depolarize(rho, label, p)
    return rho


def hea_random(seed: int, layers: int, entangling: bool = True, layout: Layout | None = None) -> DensityMatrix:
    """Pure state ``U(theta)|0...0>`` with uniform angles from a Philox stream."""
    layout = layout or Layout([("A1", 2), ("A2", 2), ("B1", 2), ("B2", 2)])
    if any(d != 2 for d in layout.dims):
        raise ShapeError("hea_random needs an all-qubit layout")
    circ = ParamCircuit(len(layout), layers, entangling)
    rng = np.random.Generator(np.random.Philox(seed))
    theta = rng.uniform(0, 2 * np.pi, circ.n_params)
    v = hea_unitary(circ, theta)[:, 0]
    return DensityMatrix(np.outer(v, v.conj()), layout)


def build_state(spec: NamedStateSpec) -> DensityMatrix:
    p = spec.params
    if spec.kind == "bell_mixture":
        return bell_mixture(p["weights"], spec.layout)
    if spec.kind == "ghz":
        return ghz(int(p.get("n_parties", 3)), spec.layout)
    if spec.kind == "depolarized_ghz4":
        return depolarized_ghz4(float(p.get("p", 0.7)), spec.layout)
    if spec.kind == "hea_random":
        return hea_random(int(p.get("seed", 0)), int(p.get("layers", 2)), bool(p.get("entangling", True)), spec.layout)
    if spec.layout is None:
        raise ConfigError("explicit states need a layout")
    return DensityMatrix(np.asarray(p["matrix"], dtype=complex), spec.layout)


NAMED = {
    "bell-mixture": NamedStateSpec("bell_mixture", {"weights": [0.75, 0.25]}),
    "phi-plus": NamedStateSpec("bell_mixture", {"weights": [1.0]}),
    "ghz3": NamedStateSpec("ghz", {"n_parties": 3}),
    "depolarized-ghz4": NamedStateSpec("depolarized_ghz4", {"p": 0.7}),
    "hea-product": NamedStateSpec("hea_random", {"seed": 7, "layers": 2, "entangling": False}),
    "hea-entangled": NamedStateSpec("hea_random", {"seed": 7, "layers": 2, "entangling": True}),
}


def state_to_json(rho: DensityMatrix) -> dict:
    return {
        "layout": rho.layout.to_json(),
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in rho.mat],
    }


def state_from_json(data: dict) -> DensityMatrix:
    try:
        layout = Layout(data["layout"])
        raw = np.asarray(data["matrix"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed state JSON: {exc}") from exc
    if raw.ndim != 3 or raw.shape[2] != 2:
        raise ConfigError("state matrix entries must be [re, im] pairs")
    return DensityMatrix(raw[..., 0] + 1j * raw[..., 1], layout)


def load_state(ref: str) -> DensityMatrix:
    """A registered state name or a path to a state JSON file."""
    if ref in NAMED:
        return build_state(NAMED[ref])
    path = Path(ref)
    if not path.exists():
        raise ConfigError(f"{ref!r} is neither a named state ({', '.join(NAMED)}) nor a file")
    return state_from_json(json.loads(path.read_text()))
