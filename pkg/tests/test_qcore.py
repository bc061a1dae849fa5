import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerfid.errors import AddressingError, InvalidStateError, ShapeError
from steerfid.qcore import (
    DensityMatrix,
    Layout,
    PureState,
    fidelity_exact,
    ket,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    projector,
    random_density,
    random_pure,
    spectral_norm,
    swap_operator,
    symmetric_projector,
    symmetrize_permutations,
    tensor,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
I2 = np.eye(2)
AB = Layout([("A", 2), ("B", 2)])
PHI_PLUS = np.array([1, 0, 0, 1]) / np.sqrt(2)


def seeds():
    return st.integers(min_value=0, max_value=2**32 - 1)


def test_layout_rejects_duplicates_and_bad_dims():
    with pytest.raises(ShapeError):
        Layout([("A", 2), ("A", 2)])
    with pytest.raises(ShapeError):
        Layout([("A", 0)])


def test_unknown_label_is_addressing_error():
    with pytest.raises(AddressingError):
        AB.index("C")
    with pytest.raises(KeyError):
        partial_trace(np.eye(4) / 4, AB, ["C"])


def test_density_matrix_validation():
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.diag([0.5, 0.6, 0, 0]), AB)
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.diag([1.5, -0.5, 0, 0]), AB)
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.array([[0.5, 1], [0, 0.5]]), Layout([("A", 2)]))
    with pytest.raises(ShapeError):
        DensityMatrix(np.eye(3) / 3, AB)
    with pytest.raises(InvalidStateError):
        PureState(np.ones(4), AB)


def test_tensor_examples():
    assert np.allclose(tensor(I2, I2), np.eye(4))
    p0, p1 = projector(ket(0, 2)), projector(ket(1, 2))
    assert np.allclose(tensor(p0, p1), np.diag([0, 1, 0, 0]))
    assert np.allclose(tensor(X, I2) @ tensor(I2, X), tensor(X, X))


def test_tensor_of_states_keeps_layout():
    a = DensityMatrix(np.eye(2) / 2, Layout([("A", 2)]))
    b = DensityMatrix(np.diag([1.0, 0, 0]), Layout([("B", 3)]))
    out = tensor(a, b)
    assert isinstance(out, DensityMatrix)
    assert out.layout.labels == ("A", "B")


def test_partial_trace_examples(rng):
    assert np.allclose(partial_trace(np.outer(PHI_PLUS, PHI_PLUS), AB, ["A"]), I2 / 2)
    ra, sb = random_density(2, rng), random_density(3, rng)
    lay = Layout([("A", 2), ("B", 3)])
    assert np.allclose(partial_trace(np.kron(ra, sb), lay, ["A"]), ra, atol=1e-12)
    m = random_density(6, rng)
    assert np.allclose(partial_trace(m, lay, ["A", "B"]), m)


def test_partial_trace_keep_order_follows_layout(rng):
    lay = Layout([("A", 2), ("B", 3)])
    ra, sb = random_density(2, rng), random_density(3, rng)
    assert np.allclose(partial_trace(np.kron(ra, sb), lay, ["B"]), sb, atol=1e-12)


def test_partial_transpose_examples(rng):
    m = random_density(4, rng)
    assert np.allclose(partial_transpose(m, AB, ["A", "B"]), m.T)
    assert np.allclose(partial_transpose(partial_transpose(m, AB, ["B"]), AB, ["B"]), m)
    pt = partial_transpose(np.outer(PHI_PLUS, PHI_PLUS), AB, ["B"])
    # T_B of Phi+ is swap/2 (hand expansion), eigenvalues {1/2, 1/2, 1/2, -1/2}
    assert np.allclose(pt, swap_operator(2) / 2)
    assert np.allclose(np.sort(np.linalg.eigvalsh(pt)), [-0.5, 0.5, 0.5, 0.5])


def test_swap_operator_examples():
    F = swap_operator(2)
    assert np.allclose(F @ np.kron(ket(0, 2), ket(1, 2)), np.kron(ket(1, 2), ket(0, 2)))
    for d in (2, 3, 4):
        F = swap_operator(d)
        assert np.allclose(F @ F, np.eye(d * d))
        assert np.isclose(np.trace(F), d)


def test_symmetric_projector_examples():
    P = symmetric_projector(2)
    assert np.isclose(np.trace(P), 3)
    for d in (2, 3):
        P = symmetric_projector(d)
        assert np.max(np.abs(P @ P - P)) < 1e-12
        assert np.allclose(P @ swap_operator(d), P)
        assert np.max(np.abs(P - (np.eye(d * d) + swap_operator(d)) / 2)) <= 1e-15


def test_symmetrize_permutations(rng):
    lay = Layout([("R", 2), ("B1", 2), ("B2", 2), ("B3", 2)])
    m = random_density(16, rng)
    assert np.allclose(symmetrize_permutations(m, lay, ["B1"]), m)
    s = symmetrize_permutations(m, lay, ["B1", "B2", "B3"])
    assert np.allclose(symmetrize_permutations(s, lay, ["B1", "B2", "B3"]), s, atol=1e-12)
    for a, b in (("B1", "B2"), ("B2", "B3"), ("B1", "B3")):
        order = list(lay.labels)
        i, j = order.index(a), order.index(b)
        order[i], order[j] = order[j], order[i]
        assert np.allclose(permute_subsystems(s, lay, order), s, atol=1e-12)


def test_symmetrize_guard():
    lay = Layout([(f"B{i}", 2) for i in range(6)])
    with pytest.raises(ShapeError):
        symmetrize_permutations(np.eye(64) / 64, lay, lay.labels)


def test_spectral_norm_examples(rng):
    assert np.isclose(spectral_norm(np.diag([0.7, 0.3])), 0.7)
    assert np.isclose(spectral_norm(I2 / 2), 0.5)
    assert np.isclose(spectral_norm(projector(random_pure(5, rng))), 1.0)


def test_fidelity_examples(rng):
    rho = random_density(3, rng)
    assert np.isclose(fidelity_exact(rho, rho), 1.0)
    assert np.isclose(fidelity_exact(projector(ket(0, 2)), projector(ket(1, 2))), 0.0)
    plus = np.array([1, 1]) / np.sqrt(2)
    assert np.isclose(fidelity_exact(projector(ket(0, 2)), projector(plus)), 0.5)


def test_fidelity_layout_mismatch():
    a = DensityMatrix(np.eye(4) / 4, AB)
    b = DensityMatrix(np.eye(4) / 4, Layout([("A", 4)]))
    with pytest.raises(ShapeError):
        fidelity_exact(a, b)


@settings(max_examples=40, deadline=None)
@given(seed=seeds(), da=st.integers(1, 4), db=st.integers(1, 4))
def test_partial_trace_properties(seed, da, db):
    rng = np.random.default_rng(seed)
    lay = Layout([("A", da), ("B", db)])
    m = random_density(da * db, rng)
    red = partial_trace(m, lay, ["A"])
    assert np.isclose(np.trace(red), 1.0)
    assert np.allclose(red, red.conj().T)
    assert np.linalg.eigvalsh(red)[0] > -1e-10
    # tensor then trace recovers the first factor times the trace of the second
    a = rng.normal(size=(da, da)) + 1j * rng.normal(size=(da, da))
    b = rng.normal(size=(db, db)) + 1j * rng.normal(size=(db, db))
    assert np.max(np.abs(partial_trace(np.kron(a, b), lay, ["A"]) - a * np.trace(b))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=seeds(), da=st.integers(1, 4), db=st.integers(1, 4))
def test_partial_transpose_properties(seed, da, db):
    rng = np.random.default_rng(seed)
    lay = Layout([("A", da), ("B", db)])
    m = random_density(da * db, rng)
    ptb = partial_transpose(m, lay, ["B"])
    assert np.allclose(partial_transpose(ptb, lay, ["B"]), m)
    # T_A = (T_B)^T, so both share a spectrum
    pta = partial_transpose(m, lay, ["A"])
    assert np.allclose(np.linalg.eigvalsh(pta), np.linalg.eigvalsh(ptb), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=seeds(), d=st.integers(1, 6))
def test_fidelity_properties(seed, d):
    rng = np.random.default_rng(seed)
    a, b = random_density(d, rng), random_density(d, rng)
    assert abs(fidelity_exact(a, b) - fidelity_exact(b, a)) < 1e-10
    u, v = random_pure(d, rng), random_pure(d, rng)
    assert abs(fidelity_exact(projector(u), projector(v)) - abs(np.vdot(u, v)) ** 2) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=seeds(), d=st.integers(1, 8))
def test_spectral_norm_variational(seed, d):
    rng = np.random.default_rng(seed)
    m = random_density(d, rng)
    for _ in range(5):
        P = projector(random_pure(d, rng))
        assert spectral_norm(m) >= np.trace(m @ P).real - 1e-10
