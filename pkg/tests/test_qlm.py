import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threespin import qlm
from threespin.errors import ConfigError, PhysicsError
from threespin.qlm import QLMConfig

# independent fixtures: patterns found by brute-force enumeration (1-based ions,
# odd ions = matter sites with "up" = occupied, even ions = links with flux sz/2)
STRING_4 = "↓↓↓↓↑↓↑"
MESON_4 = "↓↓↑↑↓↓↑"


def _charges(pattern):
    sites = pattern[::2]
    return [(1 if s == "↑" else 0) - (1 if j % 2 else 0) for j, s in enumerate(sites, start=1)]


def _enumerate(n_stag, predicate):
    n = 2 * n_stag - 1
    diag = [qlm.gauss_operator(i, n_stag).diagonal().real for i in range(1, n_stag)]
    out = []
    for idx, bits in enumerate(itertools.product("↑↓", repeat=n)):
        pattern = "".join(bits)
        if all(abs(g[idx]) < 1e-12 for g in diag) and predicate(pattern):
            out.append(pattern)
    return out


def test_enumerated_patterns_match_fixtures():
    string = _enumerate(4, lambda p: _charges(p) == [-1, 0, 0, 1] and len(set(p[1::2])) == 1)
    meson = _enumerate(4, lambda p: _charges(p) == [-1, 1, -1, 1])
    assert string == [STRING_4]
    assert meson == [MESON_4]
    assert qlm.spin_pattern(qlm.string_state(4)) == STRING_4
    assert qlm.spin_pattern(qlm.meson_state(4)) == MESON_4


@pytest.mark.parametrize("n_stag", [2, 4, 6])
def test_states_are_physical(n_stag):
    for state in (qlm.string_state(n_stag), qlm.meson_state(n_stag)):
        for i in range(1, n_stag):
            g = qlm.gauss_operator(i, n_stag)
            assert np.linalg.norm(g @ state.amplitudes) < 1e-14


def test_wrong_boundary_has_no_string():
    with pytest.raises(PhysicsError, match="expected exactly one"):
        qlm.string_state(4, boundary=-1)


def test_config_validation():
    with pytest.raises(ConfigError):
        QLMConfig(3)
    with pytest.raises(ConfigError, match="exceeds the cap"):
        QLMConfig(8)
    with pytest.raises(ConfigError):
        QLMConfig(4, g=0.0)
    with pytest.raises(ConfigError):
        QLMConfig(4, boundary=0)
    assert QLMConfig(6).n_ions == 11
    assert QLMConfig(4).exact and not QLMConfig(4, g=10).exact


def test_dimensions():
    assert qlm.build_ion_hamiltonian(QLMConfig(4)).dimension == 128
    assert qlm.build_ion_hamiltonian(QLMConfig(6)).dimension == 2048


def test_no_hopping_is_diagonal():
    h = qlm.build_ion_hamiltonian(QLMConfig(4, J=0.0)).matrix
    np.testing.assert_allclose(h, np.diag(np.diag(h)))


@pytest.mark.parametrize("n_stag", [2, 4, 6])
def test_gauss_law_commutes_with_exact_model(n_stag):
    h = qlm.build_ion_hamiltonian(QLMConfig(n_stag)).matrix
    for i in range(1, n_stag):
        g = qlm.gauss_operator(i, n_stag).toarray()
        assert np.max(np.abs(g @ h - h @ g)) < 1e-12


def test_gauss_law_broken_by_perturbation():
    h = qlm.build_ion_hamiltonian(QLMConfig(4, g=10)).matrix
    g = qlm.gauss_operator(2, 4).toarray()
    assert np.max(np.abs(g @ h - h @ g)) > 1e-3


@pytest.mark.parametrize("g", [math.inf, 10.0])
def test_rotation_maps_hamiltonians(g):
    cfg = QLMConfig(4, g=g)
    u = qlm.basis_rotation(4)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(128), atol=1e-15)
    lhs = u @ qlm.build_ion_hamiltonian(cfg).matrix @ u.conj().T
    assert np.max(np.abs(lhs - qlm.build_rotated_hamiltonian(cfg).matrix)) < 1e-12


def test_rotated_ions():
    assert qlm.rotated_ions(4) == [3, 4, 7]
    assert qlm.rotated_ions(6) == [3, 4, 7, 8, 11]
    with pytest.raises(ConfigError):
        qlm.rotated_ions(3)


def test_gauss_operator_index():
    with pytest.raises(IndexError):
        qlm.gauss_operator(0, 4)
    with pytest.raises(IndexError):
        qlm.gauss_operator(4, 4)
    assert qlm.max_gauss_violation(4) == pytest.approx(1.0)


def test_string_to_meson_properties():
    t = np.linspace(0, 5, 501)
    p = qlm.string_to_meson(QLMConfig(4), t)
    assert p.values[0] == pytest.approx(0.0, abs=1e-14)
    assert np.all((p.values >= 0) & (p.values <= 1 + 1e-12))
    assert math.isfinite(qlm.first_revival_time(t, p.values))
    rotated = qlm.string_to_meson(QLMConfig(4), t, rotated=True)
    np.testing.assert_allclose(rotated.values, p.values, atol=1e-10)


def test_first_revival_time():
    t = np.linspace(0, 10, 1001)
    assert qlm.first_revival_time(t, np.sin(t) ** 2) == pytest.approx(np.pi / 2, abs=0.01)
    assert math.isnan(qlm.first_revival_time(t, 0.1 * np.sin(t) ** 2))


def test_gate_decomposition_at_zero_and_printed_sign():
    d = qlm.decompose_three_spin_gate(0.0)
    np.testing.assert_allclose(d.target, np.eye(8), atol=1e-15)
    assert d.residual < 1e-15
    d = qlm.decompose_three_spin_gate(0.7)
    assert d.residual < 1e-12
    assert d.residual_as_printed > 0.1
    assert len(d.two_body_gates) == 12
    assert qlm.fidelity_budget() == pytest.approx(0.995**12)
    assert round(qlm.fidelity_budget(), 3) == 0.942


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(-2 * math.pi, 2 * math.pi))
def test_gate_identity_property(alpha):
    d = qlm.decompose_three_spin_gate(alpha)
    assert d.residual_three_body < 1e-12
    assert d.residual_two_body < 1e-12
