import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threespin import hilbert
from threespin.errors import ConfigError, DimensionError
from threespin.hilbert import DOWN, UP, SpaceLayout, embed_phonon, embed_spin, product_state


def test_dimension_of_multi_mode_layout():
    assert SpaceLayout(3, (6, 2, 2)).dimension == 8 * 7 * 3 * 3 == 504
    assert SpaceLayout(3, (6,)).dimension == 56


def test_sigma_plus_raises_down():
    lay = SpaceLayout(1, ())
    sp_ = embed_spin("σ⁺", 0, lay)
    up = product_state("↑", (), lay).amplitudes
    down = product_state("↓", (), lay).amplitudes
    np.testing.assert_allclose(sp_ @ down, up)
    np.testing.assert_allclose(sp_ @ (sp_ @ down), 0)


def test_sigma_pm_from_pauli():
    for kind, sign in (("+", 1), ("-", -1)):
        expected = (hilbert.spin_matrix("x") + sign * 1j * hilbert.spin_matrix("y")) / 2
        np.testing.assert_allclose(hilbert.spin_matrix(kind), expected)


def test_ladder_truncation():
    lay = SpaceLayout(0, (3,))
    a = embed_phonon("a", 0, lay)
    adag = embed_phonon("a†", 0, lay)
    vac = np.eye(4)[0]
    np.testing.assert_allclose(adag @ vac, np.eye(4)[1])
    np.testing.assert_allclose(a @ vac, 0)
    np.testing.assert_allclose(adag @ np.eye(4)[3], 0)
    np.testing.assert_allclose(embed_phonon("n", 0, lay).diagonal(), [0, 1, 2, 3])


def test_product_state_index_and_factor_order():
    lay = SpaceLayout(3, (6, 2, 2))
    psi = product_state("↓↑↓", (0, 0, 0), lay)
    idx = int(np.flatnonzero(psi.amplitudes)[0])
    assert idx == np.ravel_multi_index((DOWN, UP, DOWN, 0, 0, 0), lay.dims)
    assert psi.norm() == 1.0
    sz = [psi.amplitudes.conj() @ (embed_spin("z", i, lay) @ psi.amplitudes) for i in range(3)]
    np.testing.assert_allclose(np.real(sz), [-1, 1, -1])
    np.testing.assert_allclose(lay.sz_diagonal(1), embed_spin("z", 1, lay).diagonal().real)


def test_aliases_and_pattern_errors():
    assert hilbert.parse_spin_pattern("dUu↓") == [DOWN, UP, UP, DOWN]
    with pytest.raises(ConfigError):
        hilbert.parse_spin_pattern("010")
    with pytest.raises(ConfigError):
        hilbert.spin_matrix("q")
    with pytest.raises(ConfigError):
        embed_phonon("b", 0, SpaceLayout(0, (2,)))


def test_occupation_out_of_range():
    with pytest.raises(ConfigError):
        product_state("↓", (3,), SpaceLayout(1, (2,)))
    with pytest.raises(ConfigError):
        product_state("↓↓", (0,), SpaceLayout(1, (2,)))


def test_index_errors():
    lay = SpaceLayout(2, (2,))
    with pytest.raises(IndexError):
        embed_spin("z", 2, lay)
    with pytest.raises(IndexError):
        embed_phonon("a", 1, lay)


def test_dimension_cap(monkeypatch):
    monkeypatch.setenv("SIM_MAX_DIM", "100")
    with pytest.raises(DimensionError, match="SIM_MAX_DIM"):
        SpaceLayout(3, (6, 2, 2))
    monkeypatch.setenv("SIM_MAX_DIM", "1e6")
    assert hilbert.max_dimension() == 1_000_000
    monkeypatch.setenv("SIM_MAX_DIM", "lots")
    with pytest.raises(ConfigError):
        hilbert.max_dimension()
    monkeypatch.delenv("SIM_MAX_DIM")
    assert hilbert.max_dimension() == hilbert.DEFAULT_MAX_DIM


def test_negative_cutoff_rejected():
    with pytest.raises(ConfigError):
        SpaceLayout(1, (-1,))


@settings(max_examples=40, deadline=None)
@given(
    n_spins=st.integers(1, 3),
    cutoffs=st.lists(st.integers(0, 3), max_size=2),
    data=st.data(),
)
def test_embedding_commutes_across_factors(n_spins, cutoffs, data):
    lay = SpaceLayout(n_spins, tuple(cutoffs))
    i = data.draw(st.integers(0, n_spins - 1))
    j = data.draw(st.integers(0, n_spins - 1).filter(lambda k: k != i)) if n_spins > 1 else None
    a = embed_spin(data.draw(st.sampled_from("+-xyz")), i, lay)
    others = []
    if j is not None:
        others.append(embed_spin(data.draw(st.sampled_from("+-xyz")), j, lay))
    if cutoffs:
        others.append(embed_phonon("a", data.draw(st.integers(0, len(cutoffs) - 1)), lay))
    for b in others:
        assert abs(a @ b - b @ a).max() < 1e-14 if (a @ b - b @ a).nnz else True


@settings(max_examples=40, deadline=None)
@given(cutoff=st.integers(1, 8))
def test_canonical_commutator_below_cutoff(cutoff):
    a = hilbert.ladder(cutoff).toarray()
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(cutoff + 1)
    expected[cutoff, cutoff] = -cutoff  # hard truncation defect
    np.testing.assert_allclose(comm, expected, atol=1e-12)
