import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threespin import trap
from threespin.errors import PhysicsError
from threespin.units import khz, mhz, to_khz

from oracles import finite_difference_modes as _oracle_modes


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_modes_match_finite_difference_oracle(n):
    cfg = trap.TrapConfig(n, mhz(5), mhz(1), khz(26))
    spec = trap.transverse_modes(cfg)
    freqs, positions = _oracle_modes(n, cfg.omega_x, cfg.omega_z)
    np.testing.assert_allclose(spec.frequencies, freqs, rtol=1e-8)
    np.testing.assert_allclose(spec.equilibrium_positions, positions, atol=1e-10)


def test_equilibrium_examples():
    np.testing.assert_allclose(trap.equilibrium_positions(1), [0.0])
    np.testing.assert_allclose(trap.equilibrium_positions(2), [-0.25 ** (1 / 3), 0.25 ** (1 / 3)], atol=1e-12)
    np.testing.assert_allclose(trap.equilibrium_positions(3), [-1.0772, 0, 1.0772], atol=1e-4)


@pytest.mark.parametrize("n", [2, 3, 6, 9])
def test_equilibrium_is_symmetric_force_free(n):
    u = trap.equilibrium_positions(n)
    assert np.all(np.diff(u) > 0)
    np.testing.assert_allclose(u, -u[::-1], atol=1e-12)
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    force = -u + np.sum(np.sign(diff) / diff**2, axis=1)
    assert np.max(np.abs(force)) < 1e-12


def test_three_ion_spectrum_analytic():
    spec = trap.transverse_modes(trap.TrapConfig(3, mhz(5), mhz(1), khz(26)))
    wx, wz = 5.0, 1.0
    expected = [wx, math.sqrt(wx**2 - wz**2), math.sqrt(wx**2 - 2.4 * wz**2)]
    np.testing.assert_allclose(to_khz(spec.frequencies) / 1e3, expected, rtol=1e-12)
    np.testing.assert_allclose(spec.eigenvectors[0], np.full(3, 1 / math.sqrt(3)), atol=1e-12)
    assert spec.mode_names == ("com", "tilt", "zigzag")


def test_single_ion():
    spec = trap.transverse_modes(trap.TrapConfig(1, mhz(5), mhz(1), khz(26)))
    np.testing.assert_allclose(spec.frequencies, [mhz(5)])
    np.testing.assert_allclose(spec.eigenvectors, [[1.0]])


def test_eigenvector_sign_convention():
    spec = trap.transverse_modes(trap.TrapConfig(5, mhz(5), mhz(0.8), khz(26)))
    for vec in spec.eigenvectors:
        # ties (mirror-symmetric modes) resolve to the first largest component
        k = np.flatnonzero(np.abs(vec) >= np.abs(vec).max() - 1e-9)[0]
        assert vec[k] > 0
    np.testing.assert_allclose(spec.eigenvectors @ spec.eigenvectors.T, np.eye(5), atol=1e-12)


def test_lamb_dicke():
    cfg = trap.TrapConfig(3, mhz(5), mhz(1), khz(26))
    spec = trap.transverse_modes(cfg)
    assert spec.eta_com == pytest.approx(0.0416, abs=5e-5)
    np.testing.assert_allclose(spec.lamb_dicke[0], math.sqrt(cfg.omega_rec / (3 * cfg.omega_x)), rtol=1e-12)
    doubled = trap.transverse_modes(trap.TrapConfig(3, mhz(5), mhz(1), khz(52)))
    np.testing.assert_allclose(doubled.lamb_dicke, spec.lamb_dicke * math.sqrt(2), rtol=1e-12)
    quadrupled = trap.ModeSpectrum(spec.frequencies * 4, spec.eigenvectors, spec.lamb_dicke, spec.equilibrium_positions)
    np.testing.assert_allclose(trap.lamb_dicke_matrix(cfg, quadrupled), spec.lamb_dicke / 2, rtol=1e-12)


def test_zigzag_bound():
    assert to_khz(trap.zigzag_bound(mhz(5), 3)) / 1e3 == pytest.approx(2.67, abs=0.01)
    assert to_khz(trap.zigzag_bound(mhz(5), 2)) / 1e3 == pytest.approx(5 / 0.73 * 2**-0.86, rel=1e-12)
    assert to_khz(trap.zigzag_bound(mhz(5), 2)) / 1e3 == pytest.approx(3.77, abs=0.01)
    with pytest.raises(PhysicsError):
        trap.zigzag_bound(mhz(5), 1)


def test_zigzag_warning_and_strict():
    with pytest.warns(RuntimeWarning, match="zig-zag"):
        trap.TrapConfig(3, mhz(5), mhz(3), khz(26))
    with pytest.raises(PhysicsError, match="zig-zag"):
        trap.TrapConfig(3, mhz(5), mhz(3), khz(26), strict_zigzag=True)


def test_unstable_chain_rejected():
    with pytest.warns(RuntimeWarning):
        cfg = trap.TrapConfig(3, mhz(1), mhz(2), khz(26))
    with pytest.raises(PhysicsError, match="chain unstable"):
        trap.transverse_modes(cfg)


@pytest.mark.parametrize("field", ["omega_x", "omega_z", "omega_rec"])
def test_config_validation(field):
    kwargs = dict(n_ions=3, omega_x=mhz(5), omega_z=mhz(1), omega_rec=khz(26))
    kwargs[field] = 0.0
    with pytest.raises(PhysicsError):
        trap.TrapConfig(**kwargs)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 6), ratio=st.floats(0.05, 0.25))
def test_com_at_omega_x_and_descending(n, ratio):
    spec = trap.transverse_modes(trap.TrapConfig(n, mhz(5), mhz(5) * ratio, khz(26)))
    assert spec.omega_com == pytest.approx(mhz(5), rel=1e-12)
    assert np.all(np.diff(spec.frequencies) < 0)
