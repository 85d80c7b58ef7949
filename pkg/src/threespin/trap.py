"""Ion-chain geometry and transverse normal modes.

Equilibrium positions are solved in dimensionless axial units, where the
length scale is l = (e^2 / 4 pi eps0 M omega_z^2)^(1/3). In these units the
axial potential of ion i is u_i^2 / 2 plus the pairwise Coulomb energy
1/|u_i - u_j|, so only the ratio omega_x / omega_z enters the transverse
mode spectrum and the ion mass and charge never appear explicitly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import PhysicsError

MAX_NEWTON_ITER = 500
FORCE_TOL = 1e-12


@dataclass(frozen=True)
class TrapConfig:
    """Trap and laser-geometry parameters (angular frequencies in rad/s).

    ``omega_rec`` is the recoil frequency |dk|^2 / (2 M).
    """

    n_ions: int
    omega_x: float
    omega_z: float
    omega_rec: float
    strict_zigzag: bool = False

    def __post_init__(self):
        if self.n_ions < 1:
            raise PhysicsError(f"n_ions must be >= 1, got {self.n_ions}")
        for name in ("omega_x", "omega_z", "omega_rec"):
            if not getattr(self, name) > 0:
                raise PhysicsError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_ions >= 2:
            bound = zigzag_bound(self.omega_x, self.n_ions)
            if self.omega_z >= bound:
                msg = (
                    f"omega_z={self.omega_z:.6g} rad/s exceeds the zig-zag bound "
                    f"{bound:.6g} rad/s for {self.n_ions} ions"
                )
                if self.strict_zigzag:
                    raise PhysicsError(msg)
                warnings.warn(msg, RuntimeWarning, stacklevel=2)


@dataclass(frozen=True)
class ModeSpectrum:
    """Transverse normal modes, sorted by descending frequency.

    ``eigenvectors[m, i]`` is the participation b_{m,i} of ion i in mode m and
    ``lamb_dicke[m, i]`` the corresponding eta_{m,i}. Mode 0 is the
    center-of-mass mode.
    """

    frequencies: np.ndarray
    eigenvectors: np.ndarray
    lamb_dicke: np.ndarray
    equilibrium_positions: np.ndarray
    mode_names: tuple = field(default=())

    @property
    def n_modes(self):
        return len(self.frequencies)

    @property
    def n_ions(self):
        return self.eigenvectors.shape[1]

    @property
    def omega_com(self):
        return float(self.frequencies[0])

    @property
    def eta_com(self):
        return float(self.lamb_dicke[0, 0])

    def select(self, modes):
        """Spectrum restricted to the given mode indices (ion count unchanged)."""
        modes = list(modes)
        names = tuple(self.mode_names[m] for m in modes) if self.mode_names else ()
        return ModeSpectrum(
            frequencies=self.frequencies[modes].copy(),
            eigenvectors=self.eigenvectors[modes].copy(),
            lamb_dicke=self.lamb_dicke[modes].copy(),
            equilibrium_positions=self.equilibrium_positions,
            mode_names=names,
        )

    def with_lamb_dicke(self, lamb_dicke):
        return ModeSpectrum(
            frequencies=self.frequencies,
            eigenvectors=self.eigenvectors,
            lamb_dicke=np.asarray(lamb_dicke, dtype=float),
            equilibrium_positions=self.equilibrium_positions,
            mode_names=self.mode_names,
        )


def _coulomb_force(u):
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return -u + np.sum(np.sign(diff) / diff**2, axis=1)


def _coulomb_jacobian(u):
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    inv3 = 1.0 / np.abs(diff) ** 3
    jac = 2.0 * inv3
    np.fill_diagonal(jac, -1.0 - 2.0 * inv3.sum(axis=1))
    return jac


def equilibrium_positions(n_ions):
    """Dimensionless axial equilibrium positions, sorted ascending.

    Damped Newton iteration on the net force, seeded with uniform spacing.
    """
    if n_ions < 1:
        raise PhysicsError(f"n_ions must be >= 1, got {n_ions}")
    if n_ions == 1:
        return np.zeros(1)
    # uniform seed spanning roughly the expected chain length
    half = 0.5 * n_ions ** (2.0 / 3.0) + 0.5
    u = np.linspace(-half, half, n_ions)
    for _ in range(MAX_NEWTON_ITER):
        force = _coulomb_force(u)
        if np.max(np.abs(force)) < FORCE_TOL:
            break
        step = np.linalg.solve(_coulomb_jacobian(u), -force)
        # keep the ordering: never move an ion past half the gap to its neighbour
        gaps = np.diff(u)
        limit = 0.5 * np.min(gaps)
        scale = min(1.0, limit / max(np.max(np.abs(step)), 1e-300))
        u = u + scale * step
    else:
        raise PhysicsError(
            f"equilibrium solver did not converge for n_ions={n_ions} "
            f"after {MAX_NEWTON_ITER} iterations"
        )
    u = 0.5 * (u - u[::-1])  # exact mirror symmetry about the trap center
    return u


def transverse_hessian(positions, omega_x, omega_z):
    """Dimensionless transverse stiffness matrix (units of omega_z^2)."""
    u = np.asarray(positions, dtype=float)
    n = len(u)
    diff = u[:, None] - u[None, :]
    with np.errstate(divide="ignore"):
        inv3 = np.where(np.eye(n, dtype=bool), 0.0, 1.0 / np.abs(diff) ** 3)
    hess = inv3.copy()
    hess[np.diag_indices(n)] = (omega_x / omega_z) ** 2 - inv3.sum(axis=1)
    return hess


def _fix_signs(vecs):
    # first component within 1e-9 of the largest magnitude is made positive
    out = vecs.copy()
    for row in out:
        mags = np.abs(row)
        k = int(np.argmax(mags >= mags.max() - 1e-9))
        if row[k] < 0:
            row *= -1.0
    return out


def _mode_names(n):
    if n == 1:
        return ("com",)
    if n == 3:
        return ("com", "tilt", "zigzag")
    if n == 2:
        return ("com", "tilt")
    return ("com",) + tuple(f"m{k}" for k in range(1, n))


def transverse_modes(config):
    """Transverse normal-mode spectrum of the chain described by ``config``."""
    u = equilibrium_positions(config.n_ions)
    hess = transverse_hessian(u, config.omega_x, config.omega_z)
    evals, evecs = np.linalg.eigh(hess)
    if np.any(evals <= 0):
        raise PhysicsError("chain unstable at these trap parameters")
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    vecs = _fix_signs(evecs[:, order].T)
    freqs = config.omega_z * np.sqrt(evals)
    spectrum = ModeSpectrum(
        frequencies=freqs,
        eigenvectors=vecs,
        lamb_dicke=np.zeros_like(vecs),
        equilibrium_positions=u,
        mode_names=_mode_names(config.n_ions),
    )
    return spectrum.with_lamb_dicke(lamb_dicke_matrix(config, spectrum))


def lamb_dicke_matrix(config, spectrum):
    """eta_{m,i} = sqrt(omega_rec / omega_m) * b_{m,i}."""
    freqs = np.asarray(spectrum.frequencies, dtype=float)
    if np.any(freqs <= 0):
        raise PhysicsError("mode frequencies must be positive")
    return np.sqrt(config.omega_rec / freqs)[:, None] * spectrum.eigenvectors


def zigzag_bound(omega_x, n_ions):
    """Largest axial frequency before the linear chain buckles (empirical scaling)."""
    if n_ions < 2:
        raise PhysicsError("zig-zag bound is undefined for a single ion")
    return omega_x / 0.73 * n_ions ** (-0.86)
