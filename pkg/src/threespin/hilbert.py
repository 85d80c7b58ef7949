"""Composite spin (x) phonon state space and operator embedding.

Tensor-factor order is fixed: spins first (ion 1 is the leftmost, most
significant factor), then phonon modes in descending frequency order. Within a
spin factor index 0 is |up> and index 1 is |down>, so sigma_z = diag(+1, -1)
and sigma_+ = |up><down|.

Phonon modes are hard-truncated: cutoff ``c`` keeps Fock levels 0..c and
a^dagger annihilates level c. Truncation quality is monitored through the
population of the top level (see :meth:`SpaceLayout.leak_diagonal`).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DimensionError

DEFAULT_MAX_DIM = 1_000_000
UP, DOWN = 0, 1

_SPIN_MATS = {
    "+": np.array([[0, 1], [0, 0]], dtype=complex),
    "-": np.array([[0, 0], [1, 0]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "i": np.eye(2, dtype=complex),
}
_SPIN_ALIASES = {
    "σ⁺": "+", "sp": "+", "plus": "+", "+": "+",
    "σ⁻": "-", "sm": "-", "minus": "-", "-": "-",
    "σˣ": "x", "x": "x", "sx": "x",
    "σʸ": "y", "y": "y", "sy": "y",
    "σᶻ": "z", "z": "z", "sz": "z",
    "I": "i", "i": "i", "id": "i",
}
_UP_CHARS = {"↑": UP, "u": UP, "U": UP}
_DOWN_CHARS = {"↓": DOWN, "d": DOWN, "D": DOWN}


def max_dimension():
    """Hilbert-space dimension cap, read from ``SIM_MAX_DIM`` (default 1e6)."""
    raw = os.environ.get("SIM_MAX_DIM")
    if not raw:
        return DEFAULT_MAX_DIM
    try:
        return int(float(raw))
    except ValueError:
        raise ConfigError(f"SIM_MAX_DIM must be a number, got {raw!r}") from None


def spin_matrix(kind):
    try:
        return _SPIN_MATS[_SPIN_ALIASES[kind]]
    except KeyError:
        raise ConfigError(f"unknown spin operator {kind!r}") from None


def ladder(cutoff):
    """Truncated annihilation operator on Fock levels 0..cutoff."""
    return sp.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1, format="csr").astype(complex)


def parse_spin_pattern(pattern):
    """Map a spin string such as ``"↓↑↓"`` or ``"dud"`` to factor indices."""
    out = []
    for ch in pattern:
        if ch in _UP_CHARS:
            out.append(UP)
        elif ch in _DOWN_CHARS:
            out.append(DOWN)
        else:
            raise ConfigError(f"invalid spin character {ch!r} in {pattern!r}")
    return out


@dataclass(frozen=True)
class SpaceLayout:
    n_spins: int
    phonon_cutoffs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "phonon_cutoffs", tuple(int(c) for c in self.phonon_cutoffs))
        if self.n_spins < 0:
            raise ConfigError("n_spins must be >= 0")
        if any(c < 0 for c in self.phonon_cutoffs):
            raise ConfigError(f"phonon cutoffs must be >= 0, got {self.phonon_cutoffs}")
        cap = max_dimension()
        if self.dimension > cap:
            raise DimensionError(
                f"Hilbert dimension {self.dimension} exceeds cap {cap} (set SIM_MAX_DIM to raise it)"
            )

    @property
    def n_modes(self):
        return len(self.phonon_cutoffs)

    @property
    def dims(self):
        return (2,) * self.n_spins + tuple(c + 1 for c in self.phonon_cutoffs)

    @property
    def spin_dimension(self):
        return 2**self.n_spins

    @property
    def phonon_dimension(self):
        return int(np.prod([c + 1 for c in self.phonon_cutoffs], dtype=np.int64))

    @property
    def dimension(self):
        return self.spin_dimension * self.phonon_dimension

    def index(self, spins, occupations=()):
        """Flat basis index of a product state."""
        if len(spins) != self.n_spins or len(occupations) != self.n_modes:
            raise ConfigError(
                f"expected {self.n_spins} spins and {self.n_modes} occupations, "
                f"got {len(spins)} and {len(occupations)}"
            )
        for m, (n, c) in enumerate(zip(occupations, self.phonon_cutoffs)):
            if not 0 <= n <= c:
                raise ConfigError(f"occupation {n} of mode {m} outside 0..{c}")
        return int(np.ravel_multi_index(tuple(spins) + tuple(occupations), self.dims))

    def _factor_diagonal(self, factor, values):
        shape = [1] * len(self.dims)
        shape[factor] = self.dims[factor]
        full = np.broadcast_to(np.reshape(values, shape), self.dims)
        return np.ascontiguousarray(full, dtype=float).ravel()

    def sz_diagonal(self, ion):
        self._check_ion(ion)
        return self._factor_diagonal(ion, [1.0, -1.0])

    def number_diagonal(self, mode):
        self._check_mode(mode)
        c = self.phonon_cutoffs[mode]
        return self._factor_diagonal(self.n_spins + mode, np.arange(c + 1, dtype=float))

    def leak_diagonal(self, mode):
        """Projector onto the highest kept Fock level of ``mode``."""
        self._check_mode(mode)
        c = self.phonon_cutoffs[mode]
        vals = np.zeros(c + 1)
        vals[c] = 1.0
        return self._factor_diagonal(self.n_spins + mode, vals)

    def _check_ion(self, ion):
        if not 0 <= ion < self.n_spins:
            raise IndexError(f"ion index {ion} out of range for {self.n_spins} spins")

    def _check_mode(self, mode):
        if not 0 <= mode < self.n_modes:
            raise IndexError(f"mode index {mode} out of range for {self.n_modes} modes")


def _embed(local, factor, layout):
    mats = [sp.identity(d, dtype=complex, format="csr") for d in layout.dims]
    mats[factor] = sp.csr_matrix(local)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats).tocsr()


def embed_spin(op_kind, ion_index, layout):
    """Spin operator on ``ion_index`` with identities on every other factor.

    ``op_kind`` is one of ``+ - x y z i`` (aliases such as ``"σ⁺"`` accepted);
    sigma_+/- = (sigma_x +/- i sigma_y) / 2.
    """
    layout._check_ion(ion_index)
    return _embed(spin_matrix(op_kind), ion_index, layout)


def embed_phonon(op_kind, mode_index, layout):
    """Truncated ``a``, ``a†`` (also ``adag``) or ``n`` on one phonon mode."""
    layout._check_mode(mode_index)
    a = ladder(layout.phonon_cutoffs[mode_index])
    local = {
        "a": a,
        "a†": a.getH(),
        "adag": a.getH(),
        "n": (a.getH() @ a),
    }.get(op_kind)
    if local is None:
        raise ConfigError(f"unknown phonon operator {op_kind!r}")
    return _embed(local, layout.n_spins + mode_index, layout)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    layout: SpaceLayout

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def copy(self):
        return StateVector(self.amplitudes.copy(), self.layout)


def product_state(spin_pattern, phonon_occupations, layout):
    """Normalized computational-basis state |spins> (x) |n_1, n_2, ...>."""
    spins = parse_spin_pattern(spin_pattern)
    idx = layout.index(spins, tuple(phonon_occupations))
    amps = np.zeros(layout.dimension, dtype=complex)
    amps[idx] = 1.0
    return StateVector(amps, layout)
