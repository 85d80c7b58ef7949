"""Time-ordered propagation of a :class:`HamiltonianSeries` and derived observables.

Each step applies exp(-i H(t + dt/2) dt) to the state (exponential midpoint
rule). The exponential acts on the vector through a scaled Taylor series, so no
dense propagator is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericalError
from .hilbert import DOWN, UP, StateVector
from .units import TWO_PI

STEPS_PER_FASTEST_PERIOD = 50
DEFAULT_RECORD_INTERVAL = 1e-5  # s
TAYLOR_TOL = 1e-14
LEAK_FLAG = 1e-2
NORM_FAIL = 1e-6


@dataclass(frozen=True)
class PropagationPolicy:
    """Step-size and sampling policy.

    ``dt`` may never exceed 1/(50 f_max). When omitted it defaults to the
    largest step below 1/(steps_per_period * f_max) that divides the sampling
    interval. Samples are taken every ``record_stride`` steps when given, else
    every ``record_interval`` seconds.
    """

    t_final: float
    dt: float | None = None
    record_interval: float = DEFAULT_RECORD_INTERVAL
    record_stride: int | None = None
    convergence_check: bool = False
    steps_per_period: int = STEPS_PER_FASTEST_PERIOD
    taylor_tol: float = TAYLOR_TOL

    def __post_init__(self):
        if not self.t_final > 0:
            raise ConfigError(f"t_final must be positive, got {self.t_final}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.record_interval > 0:
            raise ConfigError(f"record_interval must be positive, got {self.record_interval}")
        if self.record_stride is not None and self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.steps_per_period < STEPS_PER_FASTEST_PERIOD:
            raise ConfigError(
                f"steps_per_period must be >= {STEPS_PER_FASTEST_PERIOD}, got {self.steps_per_period}"
            )

    def max_dt(self, max_frequency):
        """Largest step allowed for a series whose fastest term oscillates at ``max_frequency`` rad/s."""
        if max_frequency <= 0:
            return math.inf
        return TWO_PI / (STEPS_PER_FASTEST_PERIOD * max_frequency)

    def resolve(self, max_frequency):
        """(dt, steps_per_sample, total_steps) for the given fastest frequency."""
        limit = self.max_dt(max_frequency)
        target = limit * STEPS_PER_FASTEST_PERIOD / self.steps_per_period
        if self.dt is not None:
            if self.dt > limit * (1 + 1e-12):
                raise ConfigError(
                    f"dt={self.dt:.3e} s exceeds the stability limit {limit:.3e} s "
                    f"(1/{STEPS_PER_FASTEST_PERIOD} of the fastest period)"
                )
            dt = self.dt
            stride = self.record_stride or max(1, round(self.record_interval / dt))
        elif self.record_stride is not None:
            stride = self.record_stride
            dt = min(target, self.t_final)
        else:
            interval = min(self.record_interval, self.t_final)
            stride = max(1, math.ceil(interval / target - 1e-9))
            dt = interval / stride
        total = max(1, math.ceil(self.t_final / dt - 1e-9))
        return dt, stride, total


@dataclass
class TimeSeries:
    """Sampled observables of one propagation run (times in seconds)."""

    times: np.ndarray
    sz: np.ndarray  # (samples, ions)
    phonons: np.ndarray  # (samples, modes)
    leak: np.ndarray  # (samples, modes), population of the top kept Fock level
    fidelity: np.ndarray | None = None
    norm_drift: float = 0.0
    dt: float = 0.0
    mode_names: tuple = ()
    flags: list = field(default_factory=list)
    final_state: StateVector | None = None
    dt_halving_change: float | None = None

    @property
    def n_samples(self):
        return len(self.times)

    @property
    def total_phonons(self):
        return self.phonons.sum(axis=1)

    @property
    def max_leak(self):
        return float(self.leak.max()) if self.leak.size else 0.0


class _CompiledSeries:
    """Union CSR pattern of all channels plus the scatter map used by the kernel."""

    def __init__(self, series):
        dim = series.dimension
        chans = series.channels()
        self.dim = dim
        self.freqs = np.array([f for f, _ in chans], dtype=float)
        rows, cols, vals, ch = [], [], [], []
        for c, (_, mat) in enumerate(chans):
            coo = mat.tocoo()
            rows.append(coo.row.astype(np.int64))
            cols.append(coo.col.astype(np.int64))
            vals.append(coo.data.astype(complex))
            ch.append(np.full(coo.nnz, c, dtype=np.int64))
        if rows:
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            self.val = np.concatenate(vals)
            self.ch = np.concatenate(ch)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            self.val = np.zeros(0, dtype=complex)
            self.ch = np.zeros(0, dtype=np.int64)
        # sorted unique (row, col) keys are exactly CSR order
        keys, self.pos = np.unique(rows * dim + cols, return_inverse=True)
        self.pos = self.pos.astype(np.int64).ravel()
        order = np.argsort(self.pos, kind="stable")  # sequential writes in the kernel
        self.pos, self.val, self.ch = self.pos[order], self.val[order], self.ch[order]
        self.indices = (keys % dim).astype(np.int64)
        counts = np.bincount(keys // dim, minlength=dim) if keys.size else np.zeros(dim, dtype=np.int64)
        self.indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)

    def advance(self, psi, t0, dt, nsteps, tol):
        return _kernels.midpoint_steps(
            psi, t0, dt, nsteps, self.indptr, self.indices, self.pos, self.ch, self.val, self.freqs, tol
        )


class _Observables:
    def __init__(self, layout, target):
        self.layout = layout
        self.sz = np.array([layout.sz_diagonal(i) for i in range(layout.n_spins)])
        self.n = np.array([layout.number_diagonal(m) for m in range(layout.n_modes)])
        self.leak = np.array([layout.leak_diagonal(m) for m in range(layout.n_modes)])
        self.target = None if target is None else np.asarray(target, dtype=complex)

    def measure(self, psi):
        p = np.abs(psi) ** 2
        fid = None
        if self.target is not None:
            fid = _pure_fidelity(psi, self.target, self.layout)
        return self.sz @ p, self.n @ p, self.leak @ p, fid


def _pure_fidelity(psi, target, layout):
    block = psi.reshape(layout.spin_dimension, layout.phonon_dimension)
    return float(np.clip(np.linalg.norm(target.conj() @ block) ** 2, 0.0, 1.0))


def propagate(series, initial, policy, *, target=None, mode_names=None):
    """Integrate the Schrodinger equation for ``series`` from ``initial``.

    ``target`` is an optional pure spin state; when given, the fidelity of the
    reduced spin state with it is recorded at every sample. Leakage above 1e-2
    adds a ``"leakage"`` flag; a norm drift above 1e-6 raises NumericalError.
    """
    if initial.layout != series.layout:
        raise ConfigError("initial state and Hamiltonian use different layouts")
    result = _run(series, initial, policy, target, mode_names)
    if policy.convergence_check:
        dt, stride, _ = policy.resolve(series.max_frequency)
        # same sampling grid, half the step
        fine = replace(policy, dt=dt / 2, record_stride=2 * stride, convergence_check=False)
        check = _run(series, initial, fine, None, mode_names)
        n = min(check.n_samples, result.n_samples)
        result.dt_halving_change = float(np.max(np.abs(check.sz[:n] - result.sz[:n])))
    return result


def _run(series, initial, policy, target, mode_names):
    layout = series.layout
    compiled = _CompiledSeries(series)
    dt, stride, total = policy.resolve(series.max_frequency)
    obs = _Observables(layout, target)
    psi = np.array(initial.amplitudes, dtype=complex, copy=True)
    norm0 = np.linalg.norm(psi)

    times, sz, nn, lk, fid = [], [], [], [], []

    def record(t):
        s, n, l, f = obs.measure(psi)
        times.append(t)
        sz.append(s)
        nn.append(n)
        lk.append(l)
        fid.append(f)

    record(0.0)
    drift = 0.0
    done = 0
    while done < total:
        k = min(stride, total - done)
        t0 = done * dt
        _advance_chunk(compiled, psi, t0, dt, k, policy, total, done)
        done += k
        t = min(done * dt, policy.t_final) if done == total else done * dt
        record(t)
        drift = max(drift, abs(np.linalg.norm(psi) - norm0))
        if drift > NORM_FAIL:
            raise NumericalError(f"norm drift {drift:.3e} exceeds {NORM_FAIL:g} at t={t:.6g} s")

    leak = np.array(lk).reshape(len(times), layout.n_modes)
    flags = []
    if leak.size and leak.max() > LEAK_FLAG:
        flags.append("leakage")
    return TimeSeries(
        times=np.array(times),
        sz=np.array(sz).reshape(len(times), layout.n_spins),
        phonons=np.array(nn).reshape(len(times), layout.n_modes),
        leak=leak,
        fidelity=np.array(fid) if target is not None else None,
        norm_drift=float(drift),
        dt=dt,
        mode_names=tuple(mode_names) if mode_names else tuple(f"m{m}" for m in range(layout.n_modes)),
        flags=flags,
        final_state=StateVector(psi, layout),
    )


def _advance_chunk(compiled, psi, t0, dt, k, policy, total, done):
    last = done + k == total
    end = policy.t_final if last else (done + k) * dt
    # the final step is shortened so the run ends exactly at t_final
    if last and end < (done + k) * dt - 1e-15:
        if k > 1:
            compiled.advance(psi, t0, dt, k - 1, policy.taylor_tol)
        t_last = t0 + (k - 1) * dt
        compiled.advance(psi, t_last, end - t_last, 1, policy.taylor_tol)
    else:
        compiled.advance(psi, t0, dt, k, policy.taylor_tol)


def time_average(series, observable, window=None):
    """Mean of ``observable`` over samples with t <= ``window`` (whole run if None).

    ``observable`` is a 1-D array aligned with ``series.times`` or one of the
    names ``"n_total"``, ``"n_<mode>"``, ``"sz_<ion>"`` (ions counted from 1).
    """
    values = _observable(series, observable)
    if window is None:
        mask = np.ones(series.n_samples, dtype=bool)
    else:
        if window > series.times[-1] * (1 + 1e-9):
            raise ConfigError(
                f"averaging window {window:g} s exceeds simulated span {series.times[-1]:g} s"
            )
        mask = series.times <= window * (1 + 1e-12)
    return float(np.mean(values[mask]))


def _observable(series, observable):
    if not isinstance(observable, str):
        values = np.asarray(observable, dtype=float)
        if values.shape != series.times.shape:
            raise ConfigError("observable array must align with the time grid")
        return values
    if observable == "n_total":
        return series.total_phonons
    if observable.startswith("n_"):
        name = observable[2:]
        if name in series.mode_names:
            return series.phonons[:, series.mode_names.index(name)]
    if observable.startswith("sz_"):
        ion = int(observable[3:]) - 1
        if 0 <= ion < series.sz.shape[1]:
            return series.sz[:, ion]
    if observable == "fidelity" and series.fidelity is not None:
        return series.fidelity
    raise ConfigError(f"unknown observable {observable!r}")


def partial_trace_phonons(state):
    """Reduced spin density matrix (2^N x 2^N) of a spin (x) phonon state."""
    layout = state.layout
    block = np.asarray(state.amplitudes).reshape(layout.spin_dimension, layout.phonon_dimension)
    rho = block @ block.conj().T
    return 0.5 * (rho + rho.conj().T)


def fidelity(rho, target):
    """<psi|rho|psi> for a normalized pure ``target``, clipped to [0, 1]."""
    psi = np.asarray(target, dtype=complex)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-9:
        raise ConfigError(f"target state must be normalized (norm {nrm:.12g})")
    value = float(np.real(psi.conj() @ rho @ psi))
    if value < -1e-12 or value > 1 + 1e-12:
        raise NumericalError(f"fidelity {value} outside [0, 1]; rho is not a density matrix")
    return min(max(value, 0.0), 1.0)


def ghz_state(n_spins=3, phase=-0.5 * math.pi):
    """(|dd...d> + e^{i phase} |uu...u>) / sqrt(2); the default phase gives -i."""
    psi = np.zeros(2**n_spins, dtype=complex)
    all_down = int(np.ravel_multi_index((DOWN,) * n_spins, (2,) * n_spins))
    all_up = int(np.ravel_multi_index((UP,) * n_spins, (2,) * n_spins))
    psi[all_down] = 1 / math.sqrt(2)
    psi[all_up] = np.exp(1j * phase) / math.sqrt(2)
    return psi


def first_oscillation_period(times, sz1):
    """Twice the time of the first maximum of <sigma_z_1> from an all-down start.

    The maximum is searched inside the first excursion above zero, which ends
    only once the signal falls back below half its starting value (hysteresis,
    so fast wiggles around zero do not split the hump). The discrete peak is
    refined by a parabola through its neighbours. Returns nan if <sigma_z_1>
    never becomes positive.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(sz1, dtype=float)
    above = np.flatnonzero(s > 0)
    if above.size == 0:
        return math.nan
    start = above[0]
    release = 0.5 * min(s[0], 0.0)
    below = np.flatnonzero(s[start:] < release)
    stop = start + below[0] if below.size else len(s)
    k = start + int(np.argmax(s[start:stop]))
    if 0 < k < len(s) - 1:
        y0, y1, y2 = s[k - 1], s[k], s[k + 1]
        denom = y0 - 2 * y1 + y2
        h = t[k + 1] - t[k]
        if denom < 0 and math.isclose(t[k] - t[k - 1], h, rel_tol=1e-9):
            return 2 * (t[k] + 0.5 * h * (y0 - y2) / denom)
    return 2 * t[k]
