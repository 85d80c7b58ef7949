"""Spin-1/2 U(1) quantum link model on a trapped-ion chain.

Staggered site j (1-based) lives on ion 2j-1 and the link leaving it on ion
2j, so ``n_stag`` sites need 2 n_stag - 1 ions. A site is occupied when its
ion is up. Odd sites carry charge n - 1 (an empty odd site is an electron),
even sites carry charge n (an occupied even site is a positron), and a link
with sigma_z = +-1 carries electric flux +-1/2. The boundary flux entering
the chain is fixed by ``boundary`` = sigma_z of a virtual ion 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import ConfigError, PhysicsError
from .hilbert import DOWN, UP, SpaceLayout, StateVector, embed_spin

MAX_NSTAG = 7
MS_GATE_FIDELITY = 0.995
MS_GATE_COUNT = 12


@dataclass(frozen=True)
class QLMConfig:
    """Model parameters; ``g = inf`` is the exact model, finite g adds gauge-violating terms."""

    n_stag: int
    J: float = 1.0
    mu: float = 0.5
    g: float = math.inf
    boundary: int = 1
    max_n_stag: int = MAX_NSTAG

    def __post_init__(self):
        if self.n_stag < 2 or self.n_stag % 2:
            raise ConfigError(f"n_stag must be an even integer >= 2, got {self.n_stag}")
        if self.n_stag > self.max_n_stag:
            raise ConfigError(
                f"n_stag={self.n_stag} exceeds the cap {self.max_n_stag} "
                f"(dimension 2^{2 * self.n_stag - 1})"
            )
        if not self.g > 0:
            raise ConfigError(f"perturbation divisor g must be positive or inf, got {self.g}")
        if self.boundary not in (1, -1):
            raise ConfigError(f"boundary must be +1 or -1, got {self.boundary}")

    @property
    def n_ions(self):
        return 2 * self.n_stag - 1

    @property
    def exact(self):
        return math.isinf(self.g)


@dataclass(frozen=True)
class SpinHamiltonian:
    matrix: np.ndarray
    label: str = ""

    @property
    def dimension(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class QLMSeries:
    """An observable of a QLM quench on a dimensionless time grid."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""


def _layout(n_stag):
    return SpaceLayout(2 * n_stag - 1, ())


def _ops(layout):
    plus = [embed_spin("+", k, layout) for k in range(layout.n_spins)]
    minus = [p.getH().tocsr() for p in plus]
    z = [embed_spin("z", k, layout) for k in range(layout.n_spins)]
    return plus, minus, z


def _perturbation(config, layout, plus, minus, z):
    dim = layout.dimension
    out = sp.csr_matrix((dim, dim), dtype=complex)
    if config.exact:
        return out
    n = layout.n_spins
    for j, k in itertools.permutations(range(n), 2):
        hop = plus[j] @ minus[k]
        out = out + (config.J / config.g) * (hop + hop.getH())
    for j in range(n):
        out = out + (config.mu / config.g) * z[j]
    return out


def build_ion_hamiltonian(config):
    """J sum_i [s+_{2i-1} s+_{2i} s-_{2i+1} + h.c.] + mu sum_i (-1)^i sz_{2i-1}, plus perturbation."""
    layout = _layout(config.n_stag)
    plus, minus, z = _ops(layout)
    dim = layout.dimension
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for i in range(1, config.n_stag):
        a, b, c = 2 * i - 2, 2 * i - 1, 2 * i  # ions 2i-1, 2i, 2i+1 (0-based)
        hop = plus[a] @ plus[b] @ minus[c]
        h = h + config.J * (hop + hop.getH())
    for i in range(1, config.n_stag + 1):
        h = h + config.mu * (-1) ** i * z[2 * i - 2]
    h = h + _perturbation(config, layout, plus, minus, z)
    label = "exact" if config.exact else f"g={config.g:g}"
    return SpinHamiltonian(_dense_hermitian(h), f"ion {label}")


def build_rotated_hamiltonian(config):
    """J sum_i [s+ s+ s+ + h.c.] - mu sum_i sz_{2i-1}, plus the rotated perturbation."""
    layout = _layout(config.n_stag)
    plus, minus, z = _ops(layout)
    dim = layout.dimension
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for i in range(1, config.n_stag):
        hop = plus[2 * i - 2] @ plus[2 * i - 1] @ plus[2 * i]
        h = h + config.J * (hop + hop.getH())
    for i in range(1, config.n_stag + 1):
        h = h - config.mu * z[2 * i - 2]
    rot = _rotation_sparse(config.n_stag, layout)
    h = h + rot @ _perturbation(config, layout, plus, minus, z) @ rot
    label = "exact" if config.exact else f"g={config.g:g}"
    return SpinHamiltonian(_dense_hermitian(h), f"rotated {label}")


def _dense_hermitian(h):
    dense = h.toarray()
    return 0.5 * (dense + dense.conj().T)


def rotated_ions(n_stag):
    """1-based ions flipped by the basis rotation: 2 n_stag - 1 and pairs (4i-1, 4i)."""
    if n_stag % 2:
        raise ConfigError(f"basis rotation needs even n_stag, got {n_stag}")
    ions = [2 * n_stag - 1]
    for i in range(1, n_stag // 2):
        ions += [4 * i - 1, 4 * i]
    return sorted(ions)


def _rotation_sparse(n_stag, layout):
    ions = rotated_ions(n_stag)
    mats = [embed_spin("x", k - 1, layout) for k in ions]
    return reduce(lambda a, b: a @ b, mats).tocsr()


def basis_rotation(n_stag):
    """The product of sigma_x on the rotated ions, as a dense unitary."""
    return _rotation_sparse(n_stag, _layout(n_stag)).toarray()


def gauss_operator(i, n_stag, boundary=1):
    """G_i = (sz_{2i} - sz_{2i-2} - sz_{2i-1} - (-1)^i) / 2, i = 1 .. n_stag - 1."""
    if not 1 <= i <= n_stag - 1:
        raise IndexError(f"Gauss operator index {i} outside 1..{n_stag - 1}")
    if boundary not in (1, -1):
        raise ConfigError(f"boundary must be +1 or -1, got {boundary}")
    layout = _layout(n_stag)
    dim = layout.dimension
    ident = sp.identity(dim, dtype=complex, format="csr")
    z = lambda k: embed_spin("z", k - 1, layout)  # noqa: E731
    left = boundary * ident if i == 1 else z(2 * i - 2)
    g = z(2 * i) - left - z(2 * i - 1) - (-1) ** i * ident
    return (0.5 * g).tocsr()


def abs_gauss_diagonal(i, n_stag, boundary=1):
    """Diagonal of |G_i|; G_i is diagonal in the z basis, so |G_i| is its elementwise modulus."""
    g = gauss_operator(i, n_stag, boundary)
    if (g - sp.diags(g.diagonal())).count_nonzero():
        raise PhysicsError("Gauss operator is expected to be diagonal in the z basis")
    return np.abs(g.diagonal().real)


def _site_charges(bits, n_stag):
    """Charges per staggered site and link fluxes of a z-basis pattern (bits: UP/DOWN per ion)."""
    occ = [1 if bits[2 * j - 2] == UP else 0 for j in range(1, n_stag + 1)]
    charges = [occ[j - 1] - (1 if j % 2 else 0) for j in range(1, n_stag + 1)]
    flux = [0.5 if bits[2 * j - 1] == UP else -0.5 for j in range(1, n_stag)]
    return charges, flux


def _gauss_ok(bits, n_stag, boundary):
    charges, flux = _site_charges(bits, n_stag)
    e_prev = 0.5 * boundary
    for j in range(1, n_stag):
        if flux[j - 1] - e_prev != charges[j - 1]:
            return False
        e_prev = flux[j - 1]
    return True


def physical_basis_states(n_stag, boundary=1):
    """All z-basis patterns annihilated by every G_i, as tuples of UP/DOWN per ion."""
    n = 2 * n_stag - 1
    return [b for b in itertools.product((UP, DOWN), repeat=n) if _gauss_ok(b, n_stag, boundary)]


def _is_string(bits, n_stag):
    charges, flux = _site_charges(bits, n_stag)
    ends = charges[0] == -1 and charges[-1] == 1
    return ends and all(c == 0 for c in charges[1:-1]) and len(set(flux)) == 1


def _is_meson(bits, n_stag):
    charges, _ = _site_charges(bits, n_stag)
    return all(c == (-1 if j % 2 else 1) for j, c in enumerate(charges, start=1))


def _select(n_stag, boundary, predicate, name):
    if n_stag % 2:
        raise ConfigError(f"{name} state needs even n_stag, got {n_stag}")
    found = [b for b in physical_basis_states(n_stag, boundary) if predicate(b, n_stag)]
    if len(found) != 1:
        raise PhysicsError(
            f"expected exactly one {name} state for n_stag={n_stag}, boundary={boundary}; found {len(found)}"
        )
    layout = _layout(n_stag)
    amps = np.zeros(layout.dimension, dtype=complex)
    amps[layout.index(found[0])] = 1.0
    return StateVector(amps, layout)


def string_state(n_stag, boundary=1):
    """Electron on site 1, positron on the last site, one uniform flux line between them."""
    return _select(n_stag, boundary, _is_string, "string")


def meson_state(n_stag, boundary=1):
    """Every site charged: n_stag/2 electron-positron pairs with alternating flux."""
    return _select(n_stag, boundary, _is_meson, "meson")


def spin_pattern(state):
    """Arrow string of a z-basis product state."""
    idx = int(np.argmax(np.abs(state.amplitudes)))
    bits = np.unravel_index(idx, state.layout.dims)
    return "".join("↑" if b == UP else "↓" for b in bits)


class _Evolver:
    def __init__(self, hamiltonian):
        self.evals, self.evecs = np.linalg.eigh(hamiltonian.matrix)

    def states(self, psi0, times):
        coef = self.evecs.conj().T @ psi0
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), self.evals))
        return (phases * coef) @ self.evecs.T  # (n_times, dim)


def string_to_meson(config, t_grid, rotated=False):
    """P(t) = |<meson| exp(-i H t) |string>| by exact diagonalization.

    With ``rotated`` the string is mapped into the rotated basis, evolved with
    the rotated Hamiltonian and mapped back before the overlap.
    """
    psi_s = string_state(config.n_stag, config.boundary).amplitudes
    psi_m = meson_state(config.n_stag, config.boundary).amplitudes
    if rotated:
        rot = basis_rotation(config.n_stag)
        states = _Evolver(build_rotated_hamiltonian(config)).states(rot @ psi_s, t_grid) @ rot.T
    else:
        states = _Evolver(build_ion_hamiltonian(config)).states(psi_s, t_grid)
    values = np.abs(states @ psi_m.conj())
    return QLMSeries(np.asarray(t_grid, dtype=float), values, "P_string_to_meson")


def gauss_violation(config, t_grid):
    """<sum_i |G_i|> / (2 n_stag - 3) along the quench from the string state."""
    psi_s = string_state(config.n_stag, config.boundary).amplitudes
    states = _Evolver(build_ion_hamiltonian(config)).states(psi_s, t_grid)
    diag = sum(abs_gauss_diagonal(i, config.n_stag, config.boundary) for i in range(1, config.n_stag))
    values = (np.abs(states) ** 2) @ diag / (2 * config.n_stag - 3)
    return QLMSeries(np.asarray(t_grid, dtype=float), values, "gauss_violation")


def max_gauss_violation(n_stag, boundary=1):
    """Largest normalized <sum |G_i|> over all z-basis states (1 by construction)."""
    diag = sum(abs_gauss_diagonal(i, n_stag, boundary) for i in range(1, n_stag))
    return float(diag.max() / (2 * n_stag - 3))


def first_revival_time(times, values, threshold=0.5):
    """Time of the first local maximum of ``values`` above ``threshold`` (nan if none)."""
    v = np.asarray(values)
    for k in range(1, len(v) - 1):
        if v[k] > threshold and v[k] >= v[k - 1] and v[k] > v[k + 1]:
            return float(times[k])
    return math.nan


# three-spin gate decomposition ------------------------------------------------

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "i": np.eye(2, dtype=complex),
}


def _pauli_string(s):
    return reduce(np.kron, (_PAULI[c] for c in s))


@dataclass(frozen=True)
class GateDecomposition:
    alpha: float
    target: np.ndarray
    three_body_factors: list
    two_body_gates: list
    residual_three_body: float
    residual_two_body: float
    residual_as_printed: float

    @property
    def residual(self):
        return max(self.residual_three_body, self.residual_two_body)


def _conjugated(generator, middle, sign, alpha):
    """e^{-i pi/4 G} e^{sign i alpha/4 M} e^{i pi/4 G} as three gates (rightmost acts first)."""
    g, m = _pauli_string(generator), _pauli_string(middle)
    return [expm(-0.25j * math.pi * g), expm(sign * 0.25j * alpha * m), expm(0.25j * math.pi * g)]


# (conjugating generator, middle generator, sign of alpha) for the four blocks
_TWO_BODY_BLOCKS = (
    ("yzi", "ixx", +1),
    ("yyi", "izy", +1),
    ("xyi", "izx", -1),
    ("xxi", "izy", -1),
)


def decompose_three_spin_gate(alpha):
    """Compare exp(-i alpha (s+s+s+ + h.c.)) with its three-body and MS-gate factorizations.

    The fourth conjugated block needs exp(-i alpha/4 sz sy) for the identity to
    hold; ``residual_as_printed`` reports the mismatch with the opposite sign.
    """
    alpha = float(alpha)
    sp3 = reduce(np.kron, [np.array([[0, 1], [0, 0]], dtype=complex)] * 3)
    target = expm(-1j * alpha * (sp3 + sp3.conj().T))

    three = [
        expm(0.25j * alpha * _pauli_string("yyx")),
        expm(0.25j * alpha * _pauli_string("yxy")),
        expm(-0.25j * alpha * _pauli_string("xxx")),
        expm(0.25j * alpha * _pauli_string("xyy")),
    ]
    prod3 = reduce(np.matmul, three)

    def product(blocks):
        gates = [gate for g, m, s in blocks for gate in _conjugated(g, m, s, alpha)]
        return gates, reduce(np.matmul, gates)

    gates, prod2 = product(_TWO_BODY_BLOCKS)
    printed = _TWO_BODY_BLOCKS[:3] + (("xxi", "izy", +1),)
    _, prod_printed = product(printed)
    return GateDecomposition(
        alpha=alpha,
        target=target,
        three_body_factors=three,
        two_body_gates=gates,
        residual_three_body=float(np.max(np.abs(prod3 - target))),
        residual_two_body=float(np.max(np.abs(prod2 - target))),
        residual_as_printed=float(np.max(np.abs(prod_printed - target))),
    )


def fidelity_budget(gate_fidelity=MS_GATE_FIDELITY, n_gates=MS_GATE_COUNT):
    """Product fidelity of ``n_gates`` independent gates."""
    return gate_fidelity**n_gates
