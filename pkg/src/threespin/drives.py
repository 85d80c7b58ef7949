"""Raman drive configurations and the rotating-wave Hamiltonians they generate.

Every builder returns a :class:`HamiltonianSeries`, a list of
``(operator, prefactor, frequency)`` terms with

    H(t) = sum_k prefactor_k * exp(i * frequency_k * t) * operator_k + h.c.

Phase conventions follow the printed interaction-picture Hamiltonians
verbatim: a factor ``i/2`` on the first-order red sideband, ``-1/4`` on the
second-order blue sideband, and all laser phases zero at t = 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import PhysicsError
from .hilbert import SpaceLayout, embed_phonon, embed_spin

DEFAULT_Q = 1.3


@dataclass(frozen=True)
class RamanDrive:
    """One beatnote: Rabi frequency, detuning from the com mode, sideband order."""

    rabi: float
    detuning_from_com: float
    sideband_order: int

    def __post_init__(self):
        if not self.rabi > 0:
            raise PhysicsError(f"Rabi frequency must be positive, got {self.rabi}")
        if self.sideband_order not in (1, 2):
            raise PhysicsError(f"sideband_order must be 1 or 2, got {self.sideband_order}")


@dataclass(frozen=True)
class DriveSet:
    """Red/blue drive pair, optionally with its scaled mirror pair.

    The mirror pair has Rabi frequencies scaled by sqrt(q) and detuning
    q * delta on the opposite side of the com sidebands.
    """

    rabi_red: float
    rabi_blue: float
    delta: float
    mirror: bool = True
    q: float = DEFAULT_Q

    def __post_init__(self):
        if self.rabi_red < 0 or self.rabi_blue < 0:
            raise PhysicsError("Rabi frequencies must be non-negative")
        if self.delta == 0:
            raise PhysicsError("detuning delta must be non-zero")
        if self.mirror:
            if not self.q > 0:
                raise PhysicsError(f"scale factor q must be positive, got {self.q}")
            if self.q == 1:
                raise PhysicsError("q = 1 rejected: resonant cross-pair sidebands")
            if abs(self.q - 1) < 0.05:
                warnings.warn(
                    f"q={self.q} is close to 1; cross-pair sidebands are near resonance",
                    RuntimeWarning,
                    stacklevel=2,
                )

    @classmethod
    def with_default_blue(cls, rabi_red, delta, eta_com, *, mirror=True, q=DEFAULT_Q):
        """Drive set with the equal-strength rule Omega_b = 2 Omega_r / eta_com."""
        return cls(rabi_red, 2.0 * rabi_red / eta_com, delta, mirror=mirror, q=q)

    @property
    def rabi_red_mirror(self):
        return math.sqrt(self.q) * self.rabi_red

    @property
    def rabi_blue_mirror(self):
        return math.sqrt(self.q) * self.rabi_blue

    @property
    def delta_mirror(self):
        return self.q * self.delta

    def beatnotes(self, omega_com):
        """(mu_r, mu_b) of the primary pair, with mu_b = -2 mu_r."""
        mu_r = -omega_com - self.delta
        return mu_r, -2.0 * mu_r

    def mirror_beatnotes(self, omega_com):
        mu_r = -omega_com + self.q * self.delta
        return mu_r, 2.0 * omega_com - 2.0 * self.q * self.delta

    def drives(self):
        """The individual beatnotes as :class:`RamanDrive` records."""
        out = []
        if self.rabi_red > 0:
            out.append(RamanDrive(self.rabi_red, -self.delta, 1))
        if self.rabi_blue > 0:
            out.append(RamanDrive(self.rabi_blue, 2 * self.delta, 2))
        if self.mirror:
            if self.rabi_red > 0:
                out.append(RamanDrive(self.rabi_red_mirror, self.delta_mirror, 1))
            if self.rabi_blue > 0:
                out.append(RamanDrive(self.rabi_blue_mirror, -2 * self.delta_mirror, 2))
        return out


@dataclass(frozen=True)
class Term:
    op: sp.csr_matrix
    prefactor: complex
    frequency: float
    label: str = ""


@dataclass
class HamiltonianSeries:
    """Time-dependent Hamiltonian as a sum of oscillating terms plus h.c."""

    layout: SpaceLayout
    terms: list = field(default_factory=list)
    label: str = ""

    def add(self, op, prefactor, frequency, label=""):
        if prefactor != 0:
            self.terms.append(Term(op, complex(prefactor), float(frequency), label))

    def __len__(self):
        return len(self.terms)

    @property
    def dimension(self):
        return self.layout.dimension

    @property
    def max_frequency(self):
        """Largest |frequency| over all terms (rad/s); 0 for an empty series."""
        return max((abs(t.frequency) for t in self.terms), default=0.0)

    @property
    def n_families(self):
        """Number of distinct operators (before h.c.)."""
        return len({id(t.op) for t in self.terms})

    def at(self, t):
        """H(t) as a sparse matrix."""
        dim = self.dimension
        out = sp.csr_matrix((dim, dim), dtype=complex)
        for term in self.terms:
            out = out + (term.prefactor * np.exp(1j * term.frequency * t)) * term.op
        return (out + out.getH()).tocsr()

    def channels(self):
        """Terms merged by frequency, h.c. included: list of (frequency, matrix).

        H(t) = sum over channels of exp(i f t) * M_f.
        """
        merged = {}
        freqs = {}
        for term in self.terms:
            for freq, mat in (
                (term.frequency, term.prefactor * term.op),
                (-term.frequency, np.conj(term.prefactor) * term.op.getH()),
            ):
                # frequencies differing only by summation-order roundoff share a channel
                key = round(freq, 6)
                if key in merged:
                    merged[key] = merged[key] + mat
                else:
                    merged[key] = mat
                    freqs[key] = float(freq)
        return [(freqs[k], merged[k].tocsr()) for k in sorted(merged)]


def _check_single_mode(layout):
    if layout.n_modes != 1:
        raise PhysicsError(
            f"single-mode Hamiltonian needs exactly one phonon mode, layout has {layout.n_modes}"
        )


def single_mode_one_drive(drive, eta_com, layout):
    """Single (com) mode, one red/blue pair; the mirror flag of ``drive`` is ignored."""
    _check_single_mode(layout)
    return _single_mode(drive, eta_com, layout, mirror=False)


def single_mode_two_drive(drive, eta_com, layout):
    """Single (com) mode with the primary pair and its sqrt(q)-scaled mirror."""
    _check_single_mode(layout)
    if not drive.mirror:
        raise PhysicsError("two-drive Hamiltonian requires a mirror pair (mirror=True)")
    return _single_mode(drive, eta_com, layout, mirror=True)


def _single_mode(drive, eta_com, layout, mirror):
    series = HamiltonianSeries(layout, label="single_mode_2drive" if mirror else "single_mode_1drive")
    a = embed_phonon("a", 0, layout)
    adag = a.getH().tocsr()
    a2 = (a @ a).tocsr()
    delta = drive.delta
    sq = math.sqrt(drive.q) if mirror else 0.0
    red = 0.5j * drive.rabi_red * eta_com
    blue = -0.25 * drive.rabi_blue * eta_com**2
    for i in range(layout.n_spins):
        sp_i = embed_spin("+", i, layout)
        op_red = (adag @ sp_i).tocsr()
        op_blue = (a2 @ sp_i).tocsr()
        series.add(op_red, red, -delta, f"red ion{i + 1}")
        series.add(op_blue, blue, 2 * delta, f"blue ion{i + 1}")
        if mirror:
            series.add(op_red, sq * red, drive.q * delta, f"red' ion{i + 1}")
            series.add(op_blue, sq * blue, -2 * drive.q * delta, f"blue' ion{i + 1}")
    return series


def multi_mode_two_drive(drive, spectrum, layout):
    """All transverse modes to second order in the Lamb-Dicke parameters.

    The (m, n) double sum of the blue sideband is kept unsymmetrized: both
    orderings appear as separate terms. Beatnotes are mu_r = -omega_com - delta,
    mu_b = -2 mu_r, and the mirror pair per :meth:`DriveSet.mirror_beatnotes`.
    With ``drive.mirror`` false only the primary pair is included.
    """
    if layout.n_modes != spectrum.n_modes:
        raise PhysicsError(
            f"layout has {layout.n_modes} modes but spectrum has {spectrum.n_modes}"
        )
    if layout.n_spins != spectrum.n_ions:
        raise PhysicsError(
            f"layout has {layout.n_spins} spins but spectrum describes {spectrum.n_ions} ions"
        )
    series = HamiltonianSeries(layout, label="multi_mode_2drive" if drive.mirror else "multi_mode_1drive")
    w = np.asarray(spectrum.frequencies, dtype=float)
    eta = np.asarray(spectrum.lamb_dicke, dtype=float)
    omega_com = spectrum.omega_com
    mu_r, mu_b = drive.beatnotes(omega_com)
    pairs = [(drive.rabi_red, drive.rabi_blue, mu_r, mu_b)]
    if drive.mirror:
        mu_r2, mu_b2 = drive.mirror_beatnotes(omega_com)
        pairs.append((drive.rabi_red_mirror, drive.rabi_blue_mirror, mu_r2, mu_b2))

    n_modes = layout.n_modes
    a_ops = [embed_phonon("a", m, layout) for m in range(n_modes)]
    for i in range(layout.n_spins):
        sp_i = embed_spin("+", i, layout)
        for m in range(n_modes):
            op = (a_ops[m].getH() @ sp_i).tocsr()
            for k, (rabi_r, _, mu, _) in enumerate(pairs):
                series.add(op, 0.5j * eta[m, i] * rabi_r, w[m] + mu, f"red{k} m{m} ion{i + 1}")
        for m in range(n_modes):
            for n in range(n_modes):
                op = (a_ops[m] @ a_ops[n] @ sp_i).tocsr()
                for k, (_, rabi_b, _, mu) in enumerate(pairs):
                    series.add(
                        op,
                        -0.25 * eta[m, i] * eta[n, i] * rabi_b,
                        mu - w[m] - w[n],
                        f"blue{k} m{m} n{n} ion{i + 1}",
                    )
    return series
