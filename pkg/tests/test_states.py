import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steerfid.errors import CapacityError, ConfigError, ShapeError
from steerfid.oracle import fs_bruteforce
from steerfid.qcore import DensityMatrix, Layout, partial_trace, random_density
from steerfid.states import (
    NAMED,
    NamedStateSpec,
    bell_mixture,
    build_state,
    depolarize,
    depolarized_ghz4,
    ghz,
    hea_random,
    load_state,
    purify,
    state_from_json,
    state_to_json,
)


def test_bell_mixture_entries():
    rho = bell_mixture([0.75, 0.25]).mat
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.5
    expected[0, 3] = expected[3, 0] = 0.25
    assert np.allclose(rho, expected, atol=1e-15)


def test_ghz_marginals():
    rho = ghz(3)
    for label in rho.layout.labels:
        assert np.allclose(partial_trace(rho.mat, rho.layout, [label]), np.eye(2) / 2)


def test_depolarize_limits(rng):
    lay = Layout([("A", 2), ("B", 3)])
    rho = DensityMatrix(random_density(6, rng), lay)
    assert np.allclose(depolarize(rho, "A", 0.0).mat, rho.mat)
    full = depolarize(rho, "A", 1.0)
    assert np.allclose(partial_trace(full.mat, lay, ["A"]), np.eye(2) / 2)
    assert np.allclose(partial_trace(full.mat, lay, ["B"]), partial_trace(rho.mat, lay, ["B"]))
    with pytest.raises(ShapeError):
        depolarize(rho, "B", 0.5)


def _depolarize_by_traces(psi, p):
    """(1-p) rho + p I/2 (x) Tr_q rho on A1 and A2, written out with einsum."""
    t = np.einsum("abcd,efgh->abcdefgh", psi.reshape(2, 2, 2, 2), psi.conj().reshape(2, 2, 2, 2))
    eye = np.eye(2)

    def channel(t, axis):
        traced = np.trace(t, axis1=axis, axis2=axis + 4)
        mixed = np.moveaxis(np.moveaxis(np.multiply.outer(traced, eye / 2), -2, axis), -1, axis + 4)
        return (1 - p) * t + p * mixed

    return channel(channel(t, 0), 1).reshape(16, 16)


def test_depolarized_ghz4_matches_channel_definition():
    psi = np.zeros(16)
    psi[0] = psi[15] = 1 / np.sqrt(2)
    expected = _depolarize_by_traces(psi, 0.7)
    rho = depolarized_ghz4(0.7)
    assert rho.layout.labels == ("A1", "A2", "B1", "B2")
    assert np.allclose(rho.mat, expected, atol=1e-14)
    assert np.linalg.matrix_rank(rho.mat, tol=1e-12) == 8


def test_purify_pure_and_mixed():
    rho = ghz(2)
    psi = purify(rho)
    assert psi.layout.dims[0] == 1
    v = psi.amplitudes
    assert np.allclose(np.outer(v, v.conj()), rho.mat)
    mixed = DensityMatrix(np.eye(2) / 2, Layout([("A", 2)]))
    psi = purify(mixed, ref_dim=2)
    schmidt = np.linalg.svd(psi.amplitudes.reshape(2, 2), compute_uv=False)
    assert np.allclose(schmidt, [1 / np.sqrt(2)] * 2)


def test_purify_capacity_guard():
    with pytest.raises(CapacityError):
        purify(bell_mixture([0.5, 0.5]), ref_dim=1)


def test_purify_phase_convention():
    psi = purify(bell_mixture([0.75, 0.25]))
    rows = psi.amplitudes.reshape(2, 4)
    assert np.allclose(np.sum(np.abs(rows) ** 2, axis=1), [0.75, 0.25])
    for row in rows:
        lead = row[np.flatnonzero(np.abs(row) > 1e-12)[0]]
        assert abs(lead.imag) < 1e-15 and lead.real > 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 8), extra=st.integers(0, 3))
def test_purify_roundtrip(seed, d, extra):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(1, d + 1))
    rho = DensityMatrix(random_density(d, rng, rank=r), Layout([("S", d)]))
    psi = purify(rho, ref_dim=r + extra)
    v = psi.amplitudes
    back = partial_trace(np.outer(v, v.conj()), psi.layout, ["S"])
    assert np.max(np.abs(back - rho.mat)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.floats(0, 1))
def test_depolarize_preserves_states(seed, p):
    rng = np.random.default_rng(seed)
    lay = Layout([("A", 2), ("B", 2)])
    out = depolarize(DensityMatrix(random_density(4, rng), lay), "B", p)
    assert abs(np.trace(out.mat) - 1) < 1e-12
    assert np.linalg.eigvalsh(out.mat)[0] > -1e-12


def test_named_states_are_valid():
    for name, spec in NAMED.items():
        rho = build_state(spec)
        v = purify(rho).amplitudes
        back = partial_trace(np.outer(v, v.conj()), purify(rho).layout, rho.layout.labels)
        assert np.max(np.abs(back - rho.mat)) < 1e-10, name


def test_hea_random_is_deterministic():
    a = hea_random(3, 2, True)
    b = hea_random(3, 2, True)
    assert np.array_equal(a.mat, b.mat)
    assert not np.allclose(a.mat, hea_random(4, 2, True).mat)


def test_hea_product_state_is_separable():
    rho = build_state(NAMED["hea-product"])
    assert fs_bruteforce(rho, [["A1", "A2"], ["B1", "B2"]]) > 1 - 1e-6


def test_spec_validation():
    with pytest.raises(ConfigError):
        NamedStateSpec("nonsense")
    with pytest.raises(ConfigError):
        NamedStateSpec("bell_mixture", {"weights": [0.5, 0.6]})
    with pytest.raises(ConfigError):
        NamedStateSpec("depolarized_ghz4", {"p": 1.5})


def test_json_roundtrip(tmp_path):
    rho = depolarized_ghz4(0.7)
    path = tmp_path / "state.json"
    path.write_text(json.dumps(state_to_json(rho)))
    back = load_state(str(path))
    assert back.layout == rho.layout
    assert np.allclose(back.mat, rho.mat, atol=1e-15)


def test_json_errors(tmp_path):
    with pytest.raises(ConfigError):
        state_from_json({"matrix": [[[1, 0]]]})
    with pytest.raises(ShapeError):
        state_from_json({"layout": [["A", 2]], "matrix": [[[1, 0]]]})
    with pytest.raises(ConfigError):
        load_state(str(tmp_path / "missing.json"))
