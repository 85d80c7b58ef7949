"""Effective spin Hamiltonians obtained from the Magnus expansion.

For a red/blue pair with beatnotes mu_r and mu_b = -2 mu_r the resonant
second- and third-order terms give

* a single-spin term  sum_i h_i sigma_z_i,
* a two-spin term     sum_{i != j} c_ij sigma+_i sigma-_j,
* a three-spin term   sum_{i,j,k distinct} c_ijk sigma+_i sigma+_j sigma+_k + h.c.

Contributions of several pairs (the primary drive and its mirror) add.
All couplings are angular frequencies in rad/s.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, PhysicsError
from .hilbert import SpaceLayout, StateVector, embed_phonon, embed_spin, product_state

RESONANCE_RTOL = 1e-12
DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class EffectiveCouplings:
    """Coefficients of the static effective spin Hamiltonian.

    ``three_spin[i, j, k]`` is the coefficient of the ordered product
    sigma+_i sigma+_j sigma+_k; entries with repeated indices are zero.
    """

    single_spin: np.ndarray
    two_spin: np.ndarray
    three_spin: np.ndarray
    phonon_occupations: tuple = ()

    @property
    def n_ions(self):
        return len(self.single_spin)

    @property
    def j3(self):
        """Three-spin coefficient of one ordered triple (ions 1, 2, 3)."""
        if self.n_ions < 3:
            return 0.0
        return float(self.three_spin[0, 1, 2])

    @property
    def three_spin_total(self):
        """Total coefficient multiplying sigma+_1 sigma+_2 sigma+_3 (all 6 orderings)."""
        if self.n_ions < 3:
            return 0.0
        return float(sum(self.three_spin[p] for p in itertools.permutations(range(3))))

    def __add__(self, other):
        if not isinstance(other, EffectiveCouplings):
            return NotImplemented
        return EffectiveCouplings(
            self.single_spin + other.single_spin,
            self.two_spin + other.two_spin,
            self.three_spin + other.three_spin,
            self.phonon_occupations,
        )


def _pairs(drive, omega_com):
    """(rabi_red, rabi_blue, mu_r) for each beatnote pair of a DriveSet."""
    mu_r, _ = drive.beatnotes(omega_com)
    out = [(drive.rabi_red, drive.rabi_blue, mu_r)]
    if drive.mirror:
        mu_r2, _ = drive.mirror_beatnotes(omega_com)
        out.append((drive.rabi_red_mirror, drive.rabi_blue_mirror, mu_r2))
    return out


def _check_resonance(value, scale):
    if abs(value) <= RESONANCE_RTOL * scale:
        raise PhysicsError("resonant divergence; adjust δ")


def _fock_pair_moment(m, n, occ):
    """<a+_m a+_n a_m a_n> summed over the orderings (m', n') of the same pair."""
    if m == n:
        return occ[m] * (occ[m] - 1)
    return 2 * occ[m] * occ[n]


def _single_pair(spectrum, rabi_r, rabi_b, mu_r, occ):
    w = np.asarray(spectrum.frequencies, dtype=float)
    eta = np.asarray(spectrum.lamb_dicke, dtype=float)
    n_modes, n_ions = eta.shape
    scale = float(np.max(w))
    d1 = w + mu_r
    d2 = w[:, None] + w[None, :] + 2 * mu_r
    for v in d1:
        _check_resonance(v, scale)
    for v in d2.ravel():
        _check_resonance(v, scale)
    occ = np.asarray(occ, dtype=float)
    pair_sum = occ[:, None] + occ[None, :] + 1

    h = np.zeros(n_ions)
    for i in range(n_ions):
        first = np.sum(eta[:, i] ** 2 * rabi_r**2 / d1 * (occ + 0.5))
        second = 0.0
        for m in range(n_modes):
            for n in range(n_modes):
                bracket = eta[m, i] ** 2 * eta[n, i] ** 2 * pair_sum[m, n]
                # only Fock-diagonal (m', n') survive the expectation value
                bracket += eta[m, i] ** 2 * eta[n, i] ** 2 * _fock_pair_moment(m, n, occ)
                second += rabi_b**2 / d2[m, n] * bracket
        h[i] = 0.25 * (first - 0.25 * second)

    c2 = np.zeros((n_ions, n_ions))
    for i in range(n_ions):
        for j in range(n_ions):
            if i == j:
                continue
            red = np.sum(eta[:, i] * eta[:, j] * rabi_r**2 / d1)
            blue = 0.0
            for m in range(n_modes):
                for n in range(n_modes):
                    blue += (
                        eta[m, i] * eta[n, i] * eta[m, j] * eta[n, j]
                        * rabi_b**2 / d2[m, n] * pair_sum[m, n]
                    )
            c2[i, j] = -0.25 * (red + 0.5 * blue)

    kern = (3 * mu_r + w[:, None] + 2 * w[None, :]) / (
        24 * d1[:, None] * d1[None, :] * d2
    )
    c3 = np.zeros((n_ions,) * 3)
    for i, j, k in itertools.permutations(range(n_ions), 3):
        c3[i, j, k] = rabi_r**2 * rabi_b * np.einsum(
            "m,n,m,n,mn->", eta[:, i], eta[:, j], eta[:, k], eta[:, k], kern
        )
    return h, c2, c3


def effective_multi_mode(spectrum, drive, phonon_occupations=None):
    """Effective couplings summed over all modes of ``spectrum`` and all pairs of ``drive``.

    ``phonon_occupations`` are Fock numbers per mode (default vacuum); the
    phonon-number operators are evaluated on that Fock state.
    """
    n_modes = spectrum.n_modes
    occ = tuple(int(n) for n in (phonon_occupations or (0,) * n_modes))
    if len(occ) != n_modes:
        raise ConfigError(f"need {n_modes} phonon occupations, got {len(occ)}")
    if any(n < 0 for n in occ):
        raise ConfigError("phonon occupations must be non-negative")
    n_ions = spectrum.n_ions
    total = EffectiveCouplings(
        np.zeros(n_ions), np.zeros((n_ions, n_ions)), np.zeros((n_ions,) * 3), occ
    )
    for rabi_r, rabi_b, mu_r in _pairs(drive, spectrum.omega_com):
        h, c2, c3 = _single_pair(spectrum, rabi_r, rabi_b, mu_r, occ)
        total = total + EffectiveCouplings(h, c2, c3, occ)
    return total


def effective_single_mode(eta_com, rabi_red, rabi_blue, delta, n_com=0, n_ions=3):
    """Closed-form single-mode couplings of one pair detuned by ``delta`` from the com mode."""
    if delta == 0:
        raise PhysicsError("detuning delta must be non-zero")
    n = float(n_com)
    e2 = eta_com**2
    h = -(e2 / (4 * delta)) * (rabi_red**2 * (n + 0.5) - e2 * rabi_blue**2 * (n * n + n + 1) / 8)
    c2 = (e2 / (4 * delta)) * (rabi_red**2 + 0.5 * e2 * rabi_blue**2 * (n + 0.5))
    c3 = three_spin_one_drive(eta_com, rabi_red, rabi_blue, delta)
    two = np.full((n_ions, n_ions), c2)
    np.fill_diagonal(two, 0.0)
    three = np.zeros((n_ions,) * 3)
    for p in itertools.permutations(range(n_ions), 3):
        three[p] = c3
    return EffectiveCouplings(np.full(n_ions, h), two, three, (int(n_com),))


def effective_single_mode_drive(drive, eta_com, n_com=0, n_ions=3):
    """Single-mode couplings of a DriveSet: primary pair plus, if enabled, its mirror.

    The mirror pair sits at detuning -q delta relative to the com sideband.
    """
    out = effective_single_mode(eta_com, drive.rabi_red, drive.rabi_blue, drive.delta, n_com, n_ions)
    if drive.mirror:
        out = out + effective_single_mode(
            eta_com, drive.rabi_red_mirror, drive.rabi_blue_mirror, -drive.delta_mirror, n_com, n_ions
        )
    return out


def three_spin_one_drive(eta_com, rabi_red, rabi_blue, delta):
    """eta^4 Omega_r^2 Omega_b / (16 delta^2)."""
    if delta == 0:
        raise PhysicsError("detuning delta must be non-zero")
    return eta_com**4 * rabi_red**2 * rabi_blue / (16 * delta**2)


def three_spin_two_drive(eta_com, rabi_red, rabi_blue, delta, q):
    """One-drive value enhanced by the mirror pair: J3 (1 + 1/sqrt(q))."""
    return three_spin_one_drive(eta_com, rabi_red, rabi_blue, delta) * (1 + 1 / math.sqrt(q))


def predicted_period(couplings):
    """Three-spin Rabi period pi / (total sigma+sigma+sigma+ coefficient), in seconds.

    With uniform couplings this is pi / (6 J3).
    """
    total = couplings.three_spin_total
    if not total > 0:
        raise PhysicsError("three-spin coupling must be positive to define a period")
    return math.pi / total


def three_spin_mode_contributions(spectrum, drive):
    """Per (m, n) mode-pair contribution to the total ions-(1,2,3) three-spin coefficient."""
    if spectrum.n_ions < 3:
        raise PhysicsError("three-spin contributions need at least 3 ions")
    w = np.asarray(spectrum.frequencies, dtype=float)
    eta = np.asarray(spectrum.lamb_dicke, dtype=float)
    out = np.zeros((len(w), len(w)))
    for rabi_r, rabi_b, mu_r in _pairs(drive, spectrum.omega_com):
        d1 = w + mu_r
        d2 = w[:, None] + w[None, :] + 2 * mu_r
        kern = (3 * mu_r + w[:, None] + 2 * w[None, :]) / (24 * d1[:, None] * d1[None, :] * d2)
        for i, j, k in itertools.permutations(range(3)):
            out += rabi_r**2 * rabi_b * kern * np.outer(eta[:, i] * eta[:, k], eta[:, j] * eta[:, k])
    return out


def spin_hamiltonian(couplings):
    """Dense 2^N x 2^N matrix of the effective spin Hamiltonian."""
    n = couplings.n_ions
    layout = SpaceLayout(n, ())
    dim = layout.dimension
    h = sp.csr_matrix((dim, dim), dtype=complex)
    plus = [embed_spin("+", i, layout) for i in range(n)]
    minus = [p.getH().tocsr() for p in plus]
    for i in range(n):
        h = h + couplings.single_spin[i] * embed_spin("z", i, layout)
    for i, j in itertools.permutations(range(n), 2):
        if couplings.two_spin[i, j] != 0:
            h = h + couplings.two_spin[i, j] * (plus[i] @ minus[j])
    three = sp.csr_matrix((dim, dim), dtype=complex)
    for i, j, k in itertools.permutations(range(n), 3):
        if couplings.three_spin[i, j, k] != 0:
            three = three + couplings.three_spin[i, j, k] * (plus[i] @ plus[j] @ plus[k])
    h = h + three + three.getH()
    dense = h.toarray()
    return 0.5 * (dense + dense.conj().T)


def effective_spin_evolution(couplings, initial, t):
    """exp(-i H_eff t) applied to a spin-only state (pattern string or StateVector)."""
    n = couplings.n_ions
    if isinstance(initial, str):
        initial = product_state(initial, (), SpaceLayout(n, ()))
    if initial.layout.n_modes != 0 or initial.layout.n_spins != n:
        raise ConfigError("effective evolution needs a spin-only state with matching ion count")
    evals, evecs = np.linalg.eigh(spin_hamiltonian(couplings))
    coef = evecs.conj().T @ initial.amplitudes
    amps = evecs @ (np.exp(-1j * evals * t) * coef)
    return StateVector(amps, initial.layout)


def effective_sz_trace(couplings, initial, times):
    """<sigma_z_i>(t) under the effective Hamiltonian, shape (len(times), N)."""
    n = couplings.n_ions
    layout = SpaceLayout(n, ())
    if isinstance(initial, str):
        initial = product_state(initial, (), layout)
    evals, evecs = np.linalg.eigh(spin_hamiltonian(couplings))
    coef = evecs.conj().T @ initial.amplitudes
    phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), evals))
    amps = (phases * coef) @ evecs.T
    probs = np.abs(amps) ** 2
    zdiag = np.array([layout.sz_diagonal(i) for i in range(n)])
    return probs @ zdiag.T


def single_spin_operator(spectrum, drive, cutoffs, ion):
    """Phonon-operator-valued sigma_z coefficient of ``ion`` on a phonon-only space.

    Includes the a+ a+ a a terms between every pair of mode pairs whose summed
    frequencies agree to a relative 1e-9.
    """
    layout = SpaceLayout(0, tuple(cutoffs))
    if layout.n_modes != spectrum.n_modes:
        raise ConfigError(f"need {spectrum.n_modes} cutoffs, got {layout.n_modes}")
    w = np.asarray(spectrum.frequencies, dtype=float)
    eta = np.asarray(spectrum.lamb_dicke, dtype=float)
    dim = layout.dimension
    ident = sp.identity(dim, dtype=complex, format="csr")
    a = [embed_phonon("a", m, layout) for m in range(layout.n_modes)]
    ad = [op.getH().tocsr() for op in a]
    num = [embed_phonon("n", m, layout) for m in range(layout.n_modes)]
    out = sp.csr_matrix((dim, dim), dtype=complex)
    modes = range(layout.n_modes)
    for rabi_r, rabi_b, mu_r in _pairs(drive, spectrum.omega_com):
        scale = float(np.max(w))
        for m in modes:
            _check_resonance(w[m] + mu_r, scale)
            out = out + 0.25 * eta[m, ion] ** 2 * rabi_r**2 / (w[m] + mu_r) * (num[m] + 0.5 * ident)
        for m in modes:
            for n in modes:
                den = w[m] + w[n] + 2 * mu_r
                _check_resonance(den, scale)
                bracket = eta[m, ion] ** 2 * eta[n, ion] ** 2 * (num[m] + num[n] + ident)
                for mp in modes:
                    for np_ in modes:
                        if math.isclose(w[mp] + w[np_], w[m] + w[n], rel_tol=DEGENERACY_RTOL):
                            bracket = bracket + (
                                eta[m, ion] * eta[n, ion] * eta[mp, ion] * eta[np_, ion]
                                * (ad[mp] @ ad[np_] @ a[m] @ a[n])
                            )
                out = out - (0.25 * 0.25) * rabi_b**2 / den * bracket
    return out.tocsr()
