import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from threespin import _kernels, drives, evolve
from threespin.errors import ConfigError, NumericalError
from threespin.evolve import PropagationPolicy, TimeSeries
from threespin.hilbert import SpaceLayout, StateVector, embed_phonon, embed_spin, product_state
from threespin.units import khz


def _random_hermitian(dim, density, seed):
    rng = np.random.default_rng(seed)
    a = sp.random(dim, dim, density=density, random_state=rng, dtype=float)
    b = sp.random(dim, dim, density=density, random_state=rng, dtype=float)
    m = (a + 1j * b).tocsr()
    return ((m + m.getH()) / 2).tocsr()


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_expm_apply_matches_scipy(seed):
    h = _random_hermitian(40, 0.2, seed)
    h.sort_indices()
    rng = np.random.default_rng(seed + 10)
    psi = rng.normal(size=40) + 1j * rng.normal(size=40)
    psi /= np.linalg.norm(psi)
    dt = 3.7
    hnorm = float(abs(h).sum(axis=1).max())
    out = psi.copy()
    data = h.data.astype(complex)
    _kernels.expm_apply(
        h.indptr.astype(np.int64), h.indices.astype(np.int64), data, hnorm, dt, out, 1e-14,
        np.empty(40, complex), np.empty(40, complex),
    )
    np.testing.assert_allclose(out, expm(-1j * dt * h.toarray()) @ psi, atol=1e-12)


def _toy_series():
    """1 ion, 1 mode, cutoff 2, red + blue sidebands at different detunings."""
    lay = SpaceLayout(1, (2,))
    s = drives.HamiltonianSeries(lay)
    a = embed_phonon("a", 0, lay)
    spl = embed_spin("+", 0, lay)
    s.add((a.getH() @ spl).tocsr(), 0.5j * 2.0, -3.0)
    s.add((a @ a @ spl).tocsr(), -0.25 * 1.5, 5.0)
    return s, lay


def _ode_reference(series, psi0, times):
    def rhs(t, y):
        return -1j * (series.at(t) @ y)

    sol = solve_ivp(rhs, (0, times[-1]), psi0, t_eval=times, method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y.T


def test_propagate_matches_ode_oracle():
    s, lay = _toy_series()
    psi0 = product_state("↓", (0,), lay)
    ts = evolve.propagate(s, psi0, PropagationPolicy(4.0, dt=2e-4, record_interval=0.5))
    ref = _ode_reference(s, psi0.amplitudes, ts.times)
    zd = lay.sz_diagonal(0)
    np.testing.assert_allclose(ts.sz[:, 0], np.abs(ref) ** 2 @ zd, atol=1e-6)
    np.testing.assert_allclose(ts.final_state.amplitudes, ref[-1], atol=1e-6)


def test_midpoint_rule_is_second_order():
    s, lay = _toy_series()
    psi0 = product_state("↓", (0,), lay)
    ref = _ode_reference(s, psi0.amplitudes, np.array([0.0, 2.0]))[-1]
    errs = []
    for dt in (0.02, 0.01):
        ts = evolve.propagate(s, psi0, PropagationPolicy(2.0, dt=dt, record_interval=2.0))
        errs.append(np.linalg.norm(ts.final_state.amplitudes - ref))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_empty_series_is_identity():
    lay = SpaceLayout(2, (2,))
    s = drives.HamiltonianSeries(lay)
    psi0 = product_state("↓↑", (1,), lay)
    ts = evolve.propagate(s, psi0, PropagationPolicy(1e-3))
    np.testing.assert_allclose(ts.sz, np.tile([-1.0, 1.0], (ts.n_samples, 1)))
    np.testing.assert_allclose(ts.phonons, 1.0)
    assert ts.norm_drift == 0.0


def test_policy_resolution():
    p = PropagationPolicy(1e-3, record_interval=1e-5)
    f = khz(8)
    dt, stride, total = p.resolve(f)
    assert dt <= p.max_dt(f)
    assert dt * stride == pytest.approx(1e-5)
    assert total * dt == pytest.approx(1e-3)
    fine = PropagationPolicy(1e-3, record_interval=1e-5, steps_per_period=500)
    assert fine.resolve(f)[0] <= p.max_dt(f) / 10
    with pytest.raises(ConfigError, match="stability limit"):
        PropagationPolicy(1e-3, dt=1.1 * p.max_dt(f)).resolve(f)
    with pytest.raises(ConfigError):
        PropagationPolicy(1e-3, steps_per_period=10)
    with pytest.raises(ConfigError):
        PropagationPolicy(0.0)
    assert p.max_dt(0.0) == math.inf


def test_final_step_lands_on_t_final():
    s, lay = _toy_series()
    psi0 = product_state("↓", (0,), lay)
    ts = evolve.propagate(s, psi0, PropagationPolicy(1.03, dt=0.01, record_interval=0.25))
    assert ts.times[-1] == pytest.approx(1.03, abs=1e-15)
    ref = _ode_reference(s, psi0.amplitudes, np.array([0.0, 1.03]))[-1]
    np.testing.assert_allclose(ts.final_state.amplitudes, ref, atol=1e-3)


def test_leakage_flag_and_norm_failure():
    lay = SpaceLayout(1, (1,))
    s = drives.HamiltonianSeries(lay)
    s.add((embed_phonon("a", 0, lay).getH() @ embed_spin("+", 0, lay)).tocsr(), 1.0, 0.0)
    psi0 = product_state("↓", (0,), lay)
    ts = evolve.propagate(s, psi0, PropagationPolicy(2.0, dt=0.01))
    assert "leakage" in ts.flags and ts.max_leak > 0.5
    with pytest.raises(NumericalError, match="norm drift"):
        evolve.propagate(s, psi0, PropagationPolicy(2.0, dt=0.01, taylor_tol=0.5))


def test_layout_mismatch_rejected():
    s, _ = _toy_series()
    with pytest.raises(ConfigError):
        evolve.propagate(s, product_state("↓", (), SpaceLayout(1, ())), PropagationPolicy(1.0))


def test_convergence_check_reports_change():
    s, lay = _toy_series()
    psi0 = product_state("↓", (0,), lay)
    ts = evolve.propagate(s, psi0, PropagationPolicy(1.0, dt=0.01, record_interval=0.1, convergence_check=True))
    assert 0 < ts.dt_halving_change < 1e-3


def test_partial_trace_and_fidelity():
    lay = SpaceLayout(3, (2,))
    rho = evolve.partial_trace_phonons(product_state("↓↓↓", (0,), lay))
    proj = np.zeros(8)
    proj[7] = 1.0
    np.testing.assert_allclose(rho, np.outer(proj, proj), atol=1e-15)

    lay1 = SpaceLayout(1, (1,))
    ent = (product_state("↓", (0,), lay1).amplitudes + product_state("↑", (1,), lay1).amplitudes) / math.sqrt(2)
    np.testing.assert_allclose(evolve.partial_trace_phonons(StateVector(ent, lay1)), np.eye(2) / 2)

    ghz = evolve.ghz_state()
    assert evolve.fidelity(np.outer(ghz, ghz.conj()), ghz) == pytest.approx(1.0)
    other = np.zeros(8, complex)
    other[3] = 1
    assert evolve.fidelity(np.outer(other, other), ghz) == 0.0
    assert evolve.fidelity(np.eye(8) / 8, ghz) == pytest.approx(1 / 8)
    with pytest.raises(ConfigError):
        evolve.fidelity(np.eye(8) / 8, 2 * ghz)
    with pytest.raises(NumericalError):
        evolve.fidelity(2 * np.eye(8), ghz)


def test_ghz_phase_convention():
    ghz = evolve.ghz_state()
    assert ghz[7] == pytest.approx(1 / math.sqrt(2))  # all down
    assert ghz[0] == pytest.approx(-1j / math.sqrt(2))  # all up


def test_fidelity_recorded_from_all_down_starts_at_half():
    lay = SpaceLayout(3, (1,))
    s = drives.HamiltonianSeries(lay)
    ts = evolve.propagate(s, product_state("↓↓↓", (0,), lay), PropagationPolicy(1e-3), target=evolve.ghz_state())
    np.testing.assert_allclose(ts.fidelity, 0.5)


def _series(times, values):
    n = len(times)
    return TimeSeries(np.asarray(times), np.asarray(values)[:, None], np.asarray(values)[:, None],
                      np.zeros((n, 1)), mode_names=("com",))


def test_time_average():
    t = np.linspace(0, 1, 101)
    ts = _series(t, t)
    assert evolve.time_average(ts, "n_com") == pytest.approx(0.5)
    assert evolve.time_average(ts, "sz_1", window=0.5) == pytest.approx(0.25)
    assert evolve.time_average(ts, "n_total") == pytest.approx(0.5)
    assert evolve.time_average(ts, t**2) == pytest.approx(np.mean(t**2))
    with pytest.raises(ConfigError, match="exceeds simulated span"):
        evolve.time_average(ts, "n_com", window=2.0)
    with pytest.raises(ConfigError):
        evolve.time_average(ts, "n_tilt")
    with pytest.raises(ConfigError):
        evolve.time_average(ts, np.zeros(3))


@settings(max_examples=30, deadline=None)
@given(period=st.floats(0.5, 5.0), wiggle=st.floats(0.0, 0.15))
def test_period_extraction(period, wiggle):
    t = np.linspace(0, 3 * period, 3001)
    s = -np.cos(2 * np.pi * t / period) * (1 - wiggle) + wiggle * np.sin(40 * 2 * np.pi * t / period)
    assert evolve.first_oscillation_period(t, s) == pytest.approx(period, rel=0.02)


def test_period_nan_without_excursion():
    t = np.linspace(0, 1, 50)
    assert math.isnan(evolve.first_oscillation_period(t, -np.ones(50)))
