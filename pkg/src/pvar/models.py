"""Model constructors: driven-dissipative Jaynes-Cummings, three-boson Rydberg
cavity model, and the polariton basis change."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    Monomial, ModelSpec, OperatorPolynomial, annihilation, creation, spin_op, transform_modes,
)


@dataclass(frozen=True)
class JcParams:
    """Jaynes-Cummings parameters.

    ``kappa`` is the cavity field decay rate (photon loss jump ``sqrt(2 kappa) a``)
    and ``gamma`` the atomic decay rate (jump ``sqrt(gamma) sigma-``); with these
    conventions the mean-field equations read
    ``d<a>/dt = -(kappa + i delta_c) <a> - i g <sigma-> - i p``.
    """

    delta_c: float = 0.0
    delta_a: float = 0.0
    g: float = 0.0
    p: float = 0.0
    kappa: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.kappa < 0 or self.gamma < 0:
            raise ValueError("decay rates must be >= 0")

    def replace(self, **changes) -> "JcParams":
        return JcParams(**{**self.__dict__, **changes})


def free_cavity(delta: float, p: float, kappa: float) -> ModelSpec:
    """Single driven, damped mode: ``H = delta a^+a + p (a + a^+)``, jump ``sqrt(kappa) a``."""
    a, ad = annihilation(0, 1), creation(0, 1)
    h = delta * (ad * a) + p * (a + ad)
    jumps = (a * math.sqrt(kappa),) if kappa else ()
    return ModelSpec(1, 0, h, jumps, ("a",))


def jaynes_cummings(params: JcParams) -> ModelSpec:
    a, ad = annihilation(0, 1, 1), creation(0, 1, 1)
    sp_, sm = spin_op(0, "+", 1, 1), spin_op(0, "-", 1, 1)
    h = (params.delta_c * (ad * a) + params.delta_a * (sp_ * sm)
         + params.g * (a * sp_ + ad * sm) + params.p * (ad + a))
    jumps = []
    if params.kappa:
        jumps.append(a * math.sqrt(2.0 * params.kappa))
    if params.gamma:
        jumps.append(sm * math.sqrt(params.gamma))
    return ModelSpec(1, 1, h, tuple(jumps), ("a",))


@dataclass(frozen=True)
class RydbergParams:
    """Three-boson model: cavity ``a``, intermediate ``b``, Rydberg ``c``.

    ``omega`` is the control Rabi frequency, ``n_atoms`` enters via ``g sqrt(N)``.
    """

    delta_c: float = 0.0
    delta_e: float = 0.0
    delta_r: float = 0.0
    g: float = 0.0
    omega: float = 0.0
    p: float = 0.0
    kappa_r: float = 0.0
    kappa_i: float = 0.0
    gamma_c: float = 0.0
    gamma_e: float = 0.0
    gamma_r: float = 0.0
    n_atoms: float = 1.0

    def __post_init__(self):
        if min(self.gamma_c, self.gamma_e, self.gamma_r, self.kappa_i) < 0:
            raise ValueError("decay rates must be >= 0")
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")

    def replace(self, **changes) -> "RydbergParams":
        return RydbergParams(**{**self.__dict__, **changes})

    @property
    def collective_g(self) -> float:
        return self.g * math.sqrt(self.n_atoms)


def rydberg_three_boson(params: RydbergParams) -> ModelSpec:
    n = 3
    a, b, c = (annihilation(m, n) for m in range(n))
    ad, bd, cd = (creation(m, n) for m in range(n))
    gn = params.collective_g
    h = (-params.delta_c * (ad * a) + params.p * (a + ad) - params.delta_e * (bd * b)
         - params.delta_r * (cd * c) + gn * (a * bd + ad * b)
         + 0.5 * params.omega * (b * cd + bd * c) + 0.5 * params.kappa_r * (cd * cd * c * c))
    jumps = []
    for rate, op in ((params.gamma_c, a), (params.gamma_e, b), (params.gamma_r, c),
                     (params.kappa_i, c * c)):
        if rate:
            jumps.append(op * math.sqrt(rate))
    return ModelSpec(n, 0, h, tuple(jumps), ("a", "b", "c"))


def single_particle_matrix(model: ModelSpec) -> np.ndarray:
    """Coefficients ``h[i, j]`` of the bilinear terms ``a_i^+ a_j`` in the Hamiltonian."""
    n = model.n_modes
    h = np.zeros((n, n), dtype=complex)
    for mono, coef in model.hamiltonian.items():
        if mono.spin or mono.order != 2:
            continue
        if len(mono.boson) == 1:
            m, p, q = mono.boson[0]
            if p == 1 and q == 1:
                h[m, m] += coef
        elif len(mono.boson) == 2:
            (m1, p1, q1), (m2, p2, q2) = mono.boson
            if (p1, q1, p2, q2) == (1, 0, 0, 1):
                h[m1, m2] += coef
            elif (p1, q1, p2, q2) == (0, 1, 1, 0):
                h[m2, m1] += coef
    return h


@dataclass(frozen=True)
class PolaritonBasis:
    """``modes = V @ polaritons``; the polariton operators are ``V^+ @ modes``.

    Columns of ``V`` are ordered ``(+, 0, -)``; ``energies`` matches that order.
    """

    transform: np.ndarray
    energies: np.ndarray
    labels: tuple[str, ...] = ("psi_plus", "psi_0", "psi_minus")
    degenerate: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def unitary(self) -> np.ndarray:
        """``U`` mapping lab modes ``(a, b, c)`` to polariton modes."""
        return self.transform.conj().T


def polariton_basis(h: np.ndarray, bright_mode: int = 1) -> PolaritonBasis:
    """Eigenbasis of a Hermitian 3x3 single-particle matrix.

    The dark polariton is the eigenvector with the smallest weight on
    ``bright_mode`` (the intermediate atomic level); the other two are ordered
    by descending energy.
    """
    h = np.asarray(h, dtype=complex)
    if not np.allclose(h, h.conj().T, atol=1e-12):
        raise ValueError("single-particle matrix is not Hermitian")
    energies, vecs = np.linalg.eigh(h)
    overlap = np.abs(vecs[bright_mode, :])
    dark = int(np.argmin(overlap))
    rest = [i for i in np.argsort(-energies) if i != dark]
    order = [rest[0], dark, rest[1]]
    vecs = vecs[:, order]
    energies = energies[order]
    # fix the gauge: largest component of each column real positive
    for j in range(vecs.shape[1]):
        k = int(np.argmax(np.abs(vecs[:, j])))
        vecs[:, j] *= np.exp(-1j * np.angle(vecs[k, j]))
    gaps = np.abs(np.subtract.outer(energies, energies))[np.triu_indices(3, 1)]
    degenerate = bool(np.any(gaps < 1e-9 * max(1.0, np.abs(energies).max())))
    notes = ("degenerate eigenvalues; ordering fixed by the overlap convention",) if degenerate else ()
    return PolaritonBasis(vecs, energies, degenerate=degenerate, notes=notes)


def polariton_transform(model: ModelSpec) -> tuple[ModelSpec, PolaritonBasis]:
    """Rewrite a three-mode model in the eigenbasis of its quadratic part.

    The bilinear part is diagonalized; drive, interaction and jump operators are
    carried over by substituting ``a_i = sum_q V[i, q] Psi_q``.
    """
    if model.n_modes != 3:
        raise ValueError("polariton transform expects the three-boson model")
    basis = polariton_basis(single_particle_matrix(model))
    v = basis.transform
    h = transform_modes(model.hamiltonian, v)
    h = 0.5 * (h + h.dagger())
    jumps = tuple(transform_modes(c, v) for c in model.jumps)
    new = ModelSpec(model.n_modes, model.n_spins, h, jumps, basis.labels)
    return new, basis


def lab_observable(key: Monomial, basis: PolaritonBasis, n_modes: int = 3) -> OperatorPolynomial:
    """Polariton-mode monomial expressed through the lab modes (``Psi = V^+ a``)."""
    op = OperatorPolynomial.from_monomial(key, n_modes, 0)
    return transform_modes(op, basis.transform.conj().T)
