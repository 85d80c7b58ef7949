"""Compiled inner loop of the time stepper.

H(t) is stored as one CSR sparsity pattern whose values are rebuilt every
step from per-channel contributions: data[pos[e]] += val[e] * exp(i f[ch[e]] t).
"""

import numpy as np
from numba import njit

MAX_TAYLOR_ORDER = 60


@njit(cache=True, fastmath=True)
def _csr_matvec(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for r in range(n):
        acc = 0.0 + 0.0j
        for k in range(indptr[r], indptr[r + 1]):
            acc += data[k] * x[indices[k]]
        out[r] = acc


@njit(cache=True, fastmath=True)
def _norm(x):
    acc = 0.0
    for k in range(x.shape[0]):
        acc += x[k].real * x[k].real + x[k].imag * x[k].imag
    return np.sqrt(acc)


@njit(cache=True, fastmath=True)
def assemble(t, pos, ch, val, freqs, ph, data):
    """Fill ``data`` with the CSR values of H(t)."""
    for c in range(freqs.shape[0]):
        ph[c] = np.exp(1j * freqs[c] * t)
    data[:] = 0.0
    for e in range(pos.shape[0]):
        data[pos[e]] += val[e] * ph[ch[e]]


@njit(cache=True, fastmath=True)
def norm_bound(indptr, pos, val, dim):
    """Time-independent upper bound on the max absolute row sum of H(t)."""
    row_of = np.empty(indptr[-1], dtype=np.int64)
    for r in range(dim):
        for k in range(indptr[r], indptr[r + 1]):
            row_of[k] = r
    sums = np.zeros(dim)
    for e in range(pos.shape[0]):
        sums[row_of[pos[e]]] += abs(val[e])
    return sums.max() if dim > 0 else 0.0


@njit(cache=True, fastmath=True)
def expm_apply(indptr, indices, data, hnorm, dt, psi, tol, term, tmp):
    """psi <- exp(-i H dt) psi by a scaled, truncated Taylor series.

    The step is split into s sub-steps with ||H|| dt / s <= 1 and each series is
    cut once a term's norm drops below ``tol``. ``term`` and ``tmp`` are
    scratch vectors. Returns the number of matvecs.
    """
    d = psi.shape[0]
    s = max(1, int(np.ceil(hnorm * abs(dt))))
    h = dt / s
    nmv = 0
    for _ in range(s):
        for k in range(d):
            term[k] = psi[k]
        for j in range(1, MAX_TAYLOR_ORDER + 1):
            _csr_matvec(indptr, indices, data, term, tmp)
            nmv += 1
            coef = -1j * h / j
            for k in range(d):
                term[k] = coef * tmp[k]
                psi[k] += term[k]
            if _norm(term) < tol:
                break
    return nmv


@njit(cache=True, fastmath=True)
def midpoint_steps(psi, t0, dt, nsteps, indptr, indices, pos, ch, val, freqs, tol):
    """Advance ``psi`` in place by ``nsteps`` steps of exp(-i H(t + dt/2) dt)."""
    data = np.empty(indices.shape[0], dtype=np.complex128)
    ph = np.empty(freqs.shape[0], dtype=np.complex128)
    term = np.empty(psi.shape[0], dtype=np.complex128)
    tmp = np.empty(psi.shape[0], dtype=np.complex128)
    hnorm = norm_bound(indptr, pos, val, psi.shape[0])
    nmv = 0
    for k in range(nsteps):
        t = t0 + (k + 0.5) * dt
        assemble(t, pos, ch, val, freqs, ph, data)
        nmv += expm_apply(indptr, indices, data, hnorm, dt, psi, tol, term, tmp)
    return nmv
