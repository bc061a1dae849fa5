"""Variational quantum steering: rewards, SPSA driver and acceptance probabilities.

A state rho on partitions ``P_1 ... P_M`` is purified onto a reference ``R``.
A parameterized unitary ``W`` acts on ``R``, ``R`` is measured in the
computational basis, and on outcome ``x`` each of ``P_1 ... P_{M-1}`` gets its
own ansatz unitary. The global reward is the probability that all those qubits
then read zero; its maximum over parameters is F_s(rho).
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass, field, replace
from math import log2
from typing import Callable, Sequence

import numpy as np

from .circuits import OutcomeTable, ParamCircuit, hea_unitaries, measure_branches
from .errors import ConfigError, ConsistencyError, InvalidStateError, ShapeError
from .qcore import (
    DensityMatrix,
    Layout,
    PureState,
    permute_subsystems,
    reduced_pure,
    spectral_norm,
    symmetric_projector,
)
from .states import build_state, default_ref_dim, purify

log = logging.getLogger(__name__)

PRUNE = 1e-14
AGREE_TOL = 1e-10


@dataclass(frozen=True)
class SpsaGains:
    a: float = 0.2
    c: float = 0.1
    A: float | None = None  # defaults to iterations / 10
    alpha: float = 0.602
    gamma: float = 0.101

    def __post_init__(self):
        if self.a <= 0 or self.c <= 0 or self.alpha <= 0 or self.gamma <= 0 or (self.A is not None and self.A < 0):
            raise ConfigError("SPSA gains must be positive")


@dataclass(frozen=True)
class VqsaConfig:
    layers_W: int = 2
    layers_U: int = 2
    shots: int | str = 1024
    iterations: int = 300
    spsa: SpsaGains = field(default_factory=SpsaGains)
    seed: int = 0
    reward: str = "global"
    ref_dim: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if self.layers_W < 1 or self.layers_U < 1:
            raise ConfigError("layer counts must be positive")
        if self.reward not in ("global", "local"):
            raise ConfigError(f"reward must be 'global' or 'local', got {self.reward!r}")
        if self.shots != "exact" and (not isinstance(self.shots, (int, np.integer)) or self.shots < 1):
            raise ConfigError(f"shots must be a positive integer or 'exact', got {self.shots!r}")
        if self.ref_dim is not None and self.ref_dim < 1:
            raise ConfigError("ref_dim must be positive")

    @property
    def exact(self) -> bool:
        return self.shots == "exact"

    @classmethod
    def from_dict(cls, data: dict) -> "VqsaConfig":
        data = dict(data)
        spsa = data.pop("spsa", None)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        try:
            gains = SpsaGains(**spsa) if spsa else SpsaGains()
        except TypeError as exc:
            raise ConfigError(f"bad spsa section: {exc}") from exc
        return cls(spsa=gains, **data)

    def to_dict(self) -> dict:
        return {
            "layers_W": self.layers_W,
            "layers_U": self.layers_U,
            "shots": self.shots,
            "iterations": self.iterations,
            "spsa": {"a": self.spsa.a, "c": self.spsa.c, "A": self.spsa.A, "alpha": self.spsa.alpha, "gamma": self.spsa.gamma},
            "seed": self.seed,
            "reward": self.reward,
            "ref_dim": self.ref_dim,
        }


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    reward: float
    best_reward: float
    param_hash: str


@dataclass
class VqsaTrace:
    """Optimization history.

    From ``spsa_minimize`` the reward fields hold objective values (lower is
    better); ``run_vqsa`` returns rewards (higher is better).
    """

    records: list
    best_reward: float
    best_params: np.ndarray
    final_reward: float
    final_params: np.ndarray

    def __len__(self):
        return len(self.records)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records])

    def negated(self) -> "VqsaTrace":
        return VqsaTrace(
            [replace(r, reward=-r.reward, best_reward=-r.best_reward) for r in self.records],
            -self.best_reward,
            self.best_params,
            -self.final_reward,
            self.final_params,
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "reward", "best_reward"])
            for r in self.records:
                w.writerow([r.iteration, repr(r.reward), repr(r.best_reward)])


def param_hash(theta: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(theta, dtype=float).tobytes()).hexdigest()[:12]


def spsa_minimize(objective: Callable, theta0, cfg: VqsaConfig, rng: np.random.Generator, exact: Callable | None = None) -> VqsaTrace:
    """Two-evaluation SPSA with Rademacher perturbations.

    Each record holds the mean of the two perturbed evaluations. The best
    iterate is tracked on those means; when ``exact`` is given, the final and
    best iterates are re-scored with it and the better one is returned.
    Otherwise the final value is one more evaluation at the final iterate.
    """
    g = cfg.spsa
    n_iter = cfg.iterations
    A = g.A if g.A is not None else n_iter / 10
    theta = np.array(theta0, dtype=float)
    best_val, best_theta = np.inf, theta.copy()
    records = []
    for k in range(n_iter):
        ak = g.a / (A + k + 1) ** g.alpha
        ck = g.c / (k + 1) ** g.gamma
        delta = rng.choice((-1.0, 1.0), size=theta.size)
        fp = float(objective(theta + ck * delta))
        fm = float(objective(theta - ck * delta))
        est = (fp + fm) / 2
        if est < best_val:
            best_val, best_theta = est, theta.copy()
        theta = theta - ak * (fp - fm) / (2 * ck) * delta
        records.append(TraceRecord(k, est, best_val, param_hash(theta)))
    final_theta = theta
    if exact is not None:
        final_val = float(exact(final_theta))
        best_exact = float(exact(best_theta))
        if final_val <= best_exact:
            best_val, best_theta = final_val, final_theta
        else:
            best_val = best_exact
    else:
        final_val = float(objective(final_theta))
    return VqsaTrace(records, best_val, best_theta.copy(), final_val, final_theta.copy())


def _qubits(dim: int, what: str) -> int:
    n = int(round(log2(dim))) if dim > 0 else -1
    if dim < 1 or 2**n != dim:
        raise ShapeError(f"{what} has dimension {dim}, which is not a power of two")
    return n


class SteeringModel:
    """Purified state plus circuit bookkeeping for one reward problem.

    ``partitions`` lists label groups; every group but the last receives a
    conditional unitary.
    """

    def __init__(self, rho: DensityMatrix, partitions: Sequence, cfg: VqsaConfig, ref_label: str = "R"):
        parts = [list(p) for p in partitions]
        if len(parts) < 2:
            raise ConfigError("at least two partitions are required")
        flat = [label for p in parts for label in p]
        if sorted(flat) != sorted(rho.layout.labels):
            raise ConfigError(f"partitions {parts} do not cover layout {rho.layout.labels}")
        self.cfg = cfg
        self.partitions = parts
        self.dims = [rho.layout.dim_of(p) for p in parts]
        order = Layout([(label, rho.layout.dims[rho.layout.index(label)]) for label in flat])
        ordered = DensityMatrix(permute_subsystems(rho.mat, rho.layout, flat), order)
        ref_dim = cfg.ref_dim or default_ref_dim(ordered)
        self.psi = purify(ordered, ref_label, ref_dim)
        self.ref_label = ref_label
        self.ref_dim = ref_dim
        self.n_ref = _qubits(ref_dim, "reference system")
        self.party_qubits = [_qubits(d, f"partition {p}") for d, p in zip(self.dims[:-1], parts[:-1])]
        self.n_local = sum(self.party_qubits)
        self.w_circ = ParamCircuit(self.n_ref, cfg.layers_W) if self.n_ref > 0 else None
        self.u_circs = [ParamCircuit(n, cfg.layers_U) if n > 0 else None for n in self.party_qubits]
        self.n_w = self.w_circ.n_params if self.w_circ else 0
        self.n_x = sum(c.n_params for c in self.u_circs if c is not None)
        self.n_params = self.n_w + ref_dim * self.n_x
        self.amps = self.psi.amplitudes.reshape(ref_dim, -1)

    def split(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ShapeError(f"expected {self.n_params} parameters, got {theta.shape}")
        return theta[: self.n_w], theta[self.n_w :].reshape(self.ref_dim, self.n_x)

    def join(self, params_w, table) -> np.ndarray:
        params_w = np.asarray(params_w, dtype=float).reshape(-1)
        if params_w.size != self.n_w:
            raise ShapeError(f"expected {self.n_w} parameters for W, got {params_w.size}")
        rows = [np.asarray(table[x], dtype=float).reshape(-1) for x in range(self.ref_dim)]
        for x, row in enumerate(rows):
            if row.size != self.n_x:
                raise ShapeError(f"outcome {x}: expected {self.n_x} parameters, got {row.size}")
        return np.concatenate([params_w] + rows)

    def table(self, theta) -> tuple:
        pw, px = self.split(theta)
        table = OutcomeTable(self.n_x, {x: px[x].copy() for x in range(self.ref_dim)})
        return pw, table

    def steered(self, theta) -> np.ndarray:
        """Unnormalized post-measurement branches after the conditional unitaries.

        Shape ``(ref_dim, d_1, ..., d_M)``; the squared norm of slice ``x`` is
        the probability of outcome ``x``.
        """
        pw, px = self.split(theta)
        phi = self.amps
        if self.w_circ is not None:
            phi = hea_unitaries(self.w_circ, pw) @ phi
        t = phi.reshape([self.ref_dim] + self.dims)
        offset = 0
        for i, circ in enumerate(self.u_circs):
            if circ is None:
                continue
            us = hea_unitaries(circ, px[:, offset : offset + circ.n_params])
            offset += circ.n_params
            t = np.moveaxis(np.einsum("xab,xb...->xa...", us, np.moveaxis(t, i + 1, 1)), 1, i + 1)
        return t

    def branch_stats(self, theta):
        """Per-outcome probability, global-accept and per-qubit zero probabilities (joint, unnormalized)."""
        t = self.steered(theta)
        R = self.ref_dim
        probs = np.sum(np.abs(t.reshape(R, -1)) ** 2, axis=1)
        m = len(self.dims)
        cond = t.reshape([R] + self.dims[:-1] + [-1])
        zero_idx = (slice(None),) + (0,) * (m - 1)
        accept = np.sum(np.abs(cond[zero_idx]) ** 2, axis=-1)
        qubit_shape = [R] + [2] * self.n_local + [-1]
        q = np.abs(t.reshape(qubit_shape)) ** 2
        per_qubit = np.empty((R, self.n_local))
        for j in range(self.n_local):
            per_qubit[:, j] = np.sum(np.take(q, 0, axis=j + 1).reshape(R, -1), axis=1)
        keep = probs >= PRUNE
        return probs * keep, accept * keep, per_qubit * keep[:, None]

    def exact_rewards(self, theta) -> tuple:
        _, accept, per_qubit = self.branch_stats(theta)
        G = float(np.sum(accept))
        L = float(np.mean(np.sum(per_qubit, axis=0))) if self.n_local else G
        return G, L

    def reward(self, theta, rng: np.random.Generator | None = None, kind: str | None = None) -> float:
        kind = kind or self.cfg.reward
        if self.cfg.exact or rng is None:
            G, L = self.exact_rewards(theta)
            return G if kind == "global" else L
        return self.sampled_reward(theta, rng, kind)

    def sampled_reward(self, theta, rng: np.random.Generator, kind: str) -> float:
        shots = int(self.cfg.shots)
        probs, accept, per_qubit = self.branch_stats(theta)
        total = probs.sum()
        counts = rng.multinomial(shots, probs / total)
        with np.errstate(invalid="ignore", divide="ignore"):
            if kind == "global" or self.n_local == 0:
                cond = np.where(probs > 0, accept / probs, 0.0)
                hits = rng.binomial(counts, np.clip(cond, 0.0, 1.0))
            else:
                cond = np.where(probs[:, None] > 0, per_qubit / probs[:, None], 0.0)
                picks = np.stack([rng.multinomial(n, np.full(self.n_local, 1 / self.n_local)) for n in counts])
                hits = rng.binomial(picks, np.clip(cond, 0.0, 1.0))
        return float(np.sum(hits) / shots)


def _split_to_partitions(rho: DensityMatrix, split):
    """``(R-labels, P_1, ..., P_M)``; R labels must not appear in ``rho``."""
    split = [list(s) if not isinstance(s, str) else [s] for s in split]
    if len(split) < 3:
        raise ConfigError("split needs reference labels and at least two partitions")
    ref = split[0]
    if len(ref) != 1:
        raise ConfigError("the reference must be a single label")
    return ref[0], split[1:]


def _reward(rho, split, params_w, outcome_table, cfg, rng, kind):
    ref, parts = _split_to_partitions(rho, split)
    model = SteeringModel(rho, parts, cfg, ref)
    theta = model.join(params_w, outcome_table)
    if cfg.exact:
        return model.reward(theta, None, kind)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    return model.sampled_reward(theta, rng, kind)


def global_reward(rho, split, params_w, outcome_table, cfg: VqsaConfig, rng=None) -> float:
    """Acceptance probability of the steering circuit (all conditional qubits read 0)."""
    return _reward(rho, split, params_w, outcome_table, cfg, rng, "global")


def local_reward(rho, split, params_w, outcome_table, cfg: VqsaConfig, rng=None) -> float:
    """Average single-qubit zero probability over the conditional qubits."""
    return _reward(rho, split, params_w, outcome_table, cfg, rng, "local")


def global_reward_by_branches(rho, split, params_w, outcome_table, cfg: VqsaConfig) -> float:
    """Exact global reward through explicit measurement branches (slow reference route)."""
    from .circuits import apply_to_subsystem, hea_unitary

    ref, parts = _split_to_partitions(rho, split)
    model = SteeringModel(rho, parts, cfg, ref)
    state = model.psi
    if model.w_circ is not None:
        state = apply_to_subsystem(state, hea_unitary(model.w_circ, params_w), [ref])
    total = 0.0
    for prob, x, post in measure_branches(state, [ref]):
        theta_x = np.asarray(outcome_table[x], dtype=float)
        offset = 0
        amp = post
        for group, circ in zip(model.partitions[:-1], model.u_circs):
            if circ is None:
                continue
            u = hea_unitary(circ, theta_x[offset : offset + circ.n_params])
            offset += circ.n_params
            amp = apply_to_subsystem(amp, u, group)
        lay = amp.layout
        cond_labels = [label for group in model.partitions[:-1] for label in group]
        t = permute_subsystems(amp.amplitudes, lay, cond_labels + model.partitions[-1])
        d_cond = lay.dim_of(cond_labels)
        total += prob * float(np.sum(np.abs(t.reshape(d_cond, -1)[0]) ** 2))
    return total


def run_vqsa(spec, partitions, cfg: VqsaConfig) -> VqsaTrace:
    """Maximize the configured reward jointly over W and the conditional unitaries."""
    rho = spec if isinstance(spec, DensityMatrix) else build_state(spec)
    model = SteeringModel(rho, partitions, cfg)
    rng = np.random.default_rng(cfg.seed)
    kind = cfg.reward

    if cfg.exact:
        def objective(theta):
            return -model.reward(theta, None, kind)
    else:
        def objective(theta):
            return -model.sampled_reward(theta, rng, kind)

    def exact(theta):
        G, L = model.exact_rewards(theta)
        return -(G if kind == "global" else L)

    theta0 = rng.uniform(0, 2 * np.pi, model.n_params)
    trace = spsa_minimize(objective, theta0, cfg, rng, exact=exact)
    return trace.negated()


@dataclass
class EbChannelSpec:
    """Measure-and-prepare channel: rank-one POVM on R, pure preparations on A'.

    ``preps[x]`` is a vector (two partitions) or a list of vectors, one per
    conditional partition.
    """

    povm: list
    preps: list

    def __post_init__(self):
        povm = [np.asarray(m, dtype=complex) for m in self.povm]
        if not povm or len(povm) != len(self.preps):
            raise InvalidStateError("POVM and preparation lists must be non-empty and of equal length")
        d = povm[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for m in povm:
            if m.shape != (d, d) or np.max(np.abs(m - m.conj().T)) > 1e-10:
                raise InvalidStateError("POVM elements must be Hermitian and of equal size")
            w = np.linalg.eigvalsh(m)
            if w[0] < -1e-10 or (d > 1 and w[-2] > 1e-10):
                raise InvalidStateError("POVM elements must be rank-one and positive")
            total += m
        if np.max(np.abs(total - np.eye(d))) > 1e-10:
            raise InvalidStateError("POVM elements do not sum to the identity")
        preps = []
        for p in self.preps:
            parts = [p] if isinstance(p, (np.ndarray, PureState)) or np.ndim(p) == 1 else list(p)
            vecs = []
            for v in parts:
                v = v.amplitudes if isinstance(v, PureState) else np.asarray(v, dtype=complex).reshape(-1)
                if abs(np.linalg.norm(v) - 1) > 1e-10:
                    raise InvalidStateError("preparations must be unit vectors")
                vecs.append(v)
            preps.append(vecs)
        self.povm = povm
        self.preps = preps

    @property
    def ref_dim(self) -> int:
        return self.povm[0].shape[0]


def random_eb_spec(ref_dim: int, prep_dims: Sequence[int], n_outcomes: int, rng: np.random.Generator) -> EbChannelSpec:
    """Random rank-one POVM (rows of a Haar-like isometry) and random pure preparations."""
    if n_outcomes < ref_dim:
        raise ConfigError("a rank-one POVM needs at least ref_dim outcomes")
    g = rng.normal(size=(n_outcomes, ref_dim)) + 1j * rng.normal(size=(n_outcomes, ref_dim))
    V, _ = np.linalg.qr(g)
    povm = [np.outer(V[x].conj(), V[x]) for x in range(n_outcomes)]
    preps = []
    for _ in range(n_outcomes):
        vecs = []
        for d in prep_dims:
            v = rng.normal(size=d) + 1j * rng.normal(size=d)
            vecs.append(v / np.linalg.norm(v))
        preps.append(vecs)
    return EbChannelSpec(povm, preps)


def eb_from_decomposition(rho: DensityMatrix, partitions, weights, branches) -> EbChannelSpec:
    """Channel whose POVM steers the purification into the given ensemble.

    Each preparation is the top eigenvector of the branch's reduced state on the
    first partition (two partitions only).
    """
    parts = [list(p) for p in partitions]
    flat = [label for p in parts for label in p]
    order = Layout([(label, rho.layout.dims[rho.layout.index(label)]) for label in flat])
    ordered = DensityMatrix(permute_subsystems(rho.mat, rho.layout, flat), order)
    r = int(np.sum(np.linalg.eigvalsh(ordered.mat) > 1e-12))
    psi = purify(ordered, "R", r)
    Wm = psi.amplitudes.reshape(r, -1).T  # columns are the purification's components
    pinv = np.linalg.pinv(Wm)
    povm, preps = [], []
    for p, b in zip(weights, branches):
        amps = b.amplitudes if isinstance(b, PureState) else np.asarray(b)
        c = pinv @ (np.sqrt(p) * amps)
        povm.append(np.outer(c, c.conj()).conj())
        red = reduced_pure(amps, order, parts[0])
        w, v = np.linalg.eigh(red)
        preps.append(v[:, -1])
    total = sum(povm)
    # remove round-off so the POVM sums exactly to the identity
    s, u = np.linalg.eigh(total)
    fix = u @ np.diag(s**-0.5) @ u.conj().T
    povm = [fix @ m @ fix.conj().T for m in povm]
    return EbChannelSpec(povm, preps)


def eb_acceptance_terms(rho: DensityMatrix, partitions, eb: EbChannelSpec) -> tuple:
    """Acceptance probability of the swap test after a measure-and-prepare channel.

    Returns ``(direct, expanded)``. ``direct`` forms the full operator
    ``Tr[(Pi (x) I_B) sum_x omega_x (x) phi^x]``; ``expanded`` is
    ``(1 + sum_x <phi^x| omega_x,A |phi^x>) / 2``.
    """
    parts = [list(p) for p in partitions]
    flat = [label for p in parts for label in p]
    if sorted(flat) != sorted(rho.layout.labels):
        raise ConfigError(f"partitions {parts} do not cover layout {rho.layout.labels}")
    order = Layout([(label, rho.layout.dims[rho.layout.index(label)]) for label in flat])
    ordered = DensityMatrix(permute_subsystems(rho.mat, rho.layout, flat), order)
    psi = purify(ordered, "R", eb.ref_dim)
    r = eb.ref_dim
    Psi = psi.amplitudes.reshape(r, -1)
    cond_dims = [order.dim_of(p) for p in parts[:-1]]
    dA = int(np.prod(cond_dims))
    dB = order.dim_of(parts[-1])
    for x, vecs in enumerate(eb.preps):
        if [v.size for v in vecs] != cond_dims:
            raise ShapeError(f"preparation {x} has dimensions {[v.size for v in vecs]}, expected {cond_dims}")

    # swap of every A_i with its copy A'_i, identity on B; ordering (A_1..A_{M-1}, B, A'_1..A'_{M-1})
    m = len(cond_dims)
    full_dims = cond_dims + [dB] + cond_dims
    idx = np.arange(int(np.prod(full_dims))).reshape(full_dims)
    axes = list(range(m + m + 1))
    for i in range(m):
        axes[i], axes[m + 1 + i] = m + 1 + i, i
    swap_map = idx.transpose(axes).ravel()
    D = idx.size
    F = np.zeros((D, D))
    F[swap_map, np.arange(D)] = 1.0
    Pi = (np.eye(D) + F) / 2

    direct = 0.0
    expanded = 0.5
    for mu, vecs in zip(eb.povm, eb.preps):
        omega = Psi.T @ mu.T @ Psi.conj()
        phi = vecs[0]
        for v in vecs[1:]:
            phi = np.kron(phi, v)
        prep = np.outer(phi, phi.conj())
        direct += float(np.real(np.trace(Pi @ np.kron(omega, prep))))
        omega_a = np.einsum("ibjb->ij", omega.reshape(dA, dB, dA, dB))
        expanded += 0.5 * float(np.real(phi.conj() @ omega_a @ phi))
    return direct, expanded


def eb_acceptance(rho: DensityMatrix, partitions, eb: EbChannelSpec) -> float:
    direct, expanded = eb_acceptance_terms(rho, partitions, eb)
    if abs(direct - expanded) > AGREE_TOL:
        raise ConsistencyError(f"acceptance routes disagree: {direct} vs {expanded}")
    return direct


def pure_state_test(psi: PureState, split) -> float:
    """Swap-test acceptance ``(1 + ||psi_A||_inf) / 2`` for a pure bipartite state."""
    a_labels = list(split[0])
    return 0.5 * (1 + spectral_norm(reduced_pure(psi.amplitudes, psi.layout, a_labels)))


def symmetric_projection_norm(psi: PureState, split) -> float:
    """``|| Pi_{AA'} (psi_AB (x) I_A') Pi_{AA'} ||_inf`` by explicit matrices."""
    a_labels, b_labels = list(split[0]), list(split[1])
    lay = psi.layout
    v = permute_subsystems(psi.amplitudes, lay, a_labels + b_labels)
    dA, dB = lay.dim_of(a_labels), lay.dim_of(b_labels)
    # ordering (A, A', B)
    rho_ab = np.outer(v, v.conj()).reshape(dA, dB, dA, dB)
    op = np.einsum("abcd,ij->aibcjd", rho_ab, np.eye(dA)).reshape(dA * dA * dB, dA * dA * dB)
    P = np.kron(symmetric_projector(dA), np.eye(dB))
    return spectral_norm(P @ op @ P)
