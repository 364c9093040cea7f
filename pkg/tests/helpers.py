"""Independent dense truncated-Fock reference implementations for the tests."""

import math

import numpy as np

from pvar.algebra import Monomial, OperatorPolynomial

SIGMA = {
    "+": np.array([[0, 0], [1, 0]], dtype=complex),   # basis (g, e): |e><g|
    "-": np.array([[0, 1], [0, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
}


def lowering(n):
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def dense_monomial(mono: Monomial, dims, n_modes):
    """Matrix of a normal-ordered monomial on a tensor product of truncated modes and spins."""
    factors = []
    for i, d in enumerate(dims):
        if i < n_modes:
            p, q = mono.exponents(i)
            a = lowering(d)
            factors.append(np.linalg.matrix_power(a.conj().T, p) @ np.linalg.matrix_power(a, q))
        else:
            lab = mono.spin_label(i - n_modes)
            factors.append(np.eye(2, dtype=complex) if lab is None else SIGMA[lab])
    out = np.array([[1.0 + 0j]])
    for f in factors:
        out = np.kron(out, f)
    return out


def dense(op: OperatorPolynomial, dims):
    d = int(np.prod(dims))
    out = np.zeros((d, d), dtype=complex)
    for mono, coef in op.items():
        out += coef * dense_monomial(mono, dims, op.n_modes)
    return out


def fock_moment_table(ket_or_rho, n_levels, order):
    """``<a^+p a^q>`` from a single-mode state vector or density matrix."""
    a = lowering(n_levels)
    ad = a.conj().T
    rho = ket_or_rho
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    out = np.zeros((order + 1, order + 1), dtype=complex)
    for p in range(order + 1):
        for q in range(order + 1 - p):
            op = np.linalg.matrix_power(ad, p) @ np.linalg.matrix_power(a, q)
            out[p, q] = np.trace(rho @ op)
    return out


def displacement(alpha, n):
    from scipy.linalg import expm
    a = lowering(n)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def squeeze(r, phi, n):
    """``S = exp((zeta* a^2 - zeta a^+2)/2)``, ``zeta = r e^{i phi}``."""
    from scipy.linalg import expm
    a = lowering(n)
    zeta = r * np.exp(1j * phi)
    return expm(0.5 * (np.conj(zeta) * a @ a - zeta * a.conj().T @ a.conj().T))


def fock_ket(l, n):
    v = np.zeros(n, dtype=complex)
    v[l] = 1.0
    return v


def thermal_rho(n0, n):
    k = np.arange(n)
    p = n0 ** k / (1 + n0) ** (k + 1)
    return np.diag(p / p.sum()).astype(complex)


def coherent_ket(alpha, n):
    k = np.arange(n)
    logf = np.array([math.lgamma(i + 1) for i in k])
    with np.errstate(divide="ignore"):
        amp = np.exp(-abs(alpha) ** 2 / 2 - 0.5 * logf) * (alpha ** k if alpha != 0 else (k == 0))
    return amp.astype(complex)


def squeezed_vacuum_ket(r, phi, n):
    """Exact Fock amplitudes of ``S(r, phi)|0>``."""
    out = np.zeros(n, dtype=complex)
    t = -np.exp(1j * phi) * np.tanh(r)
    for k in range(0, (n + 1) // 2):
        logc = 0.5 * math.lgamma(2 * k + 1) - k * math.log(2) - math.lgamma(k + 1)
        out[2 * k] = t ** k * math.exp(logc) / math.sqrt(math.cosh(r))
    return out
