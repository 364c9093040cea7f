"""Exact steady states in a truncated Fock basis.

Vectorization is column stacking, ``vec(A X B) = (B^T kron A) vec(X)``.  The
tensor order of the Hilbert space is all boson modes (in index order)
followed by all spins; each spin has basis ``(|g>, |e>)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import Monomial, ModelSpec, OperatorPolynomial
from .errors import CapacityError, SingularSystemError, StructuralError, TruncationError

DEFAULT_DIM_CAP = 4096

_SPIN_MATS = {
    "+": sp.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]])),
    "-": sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]])),
    "z": sp.csr_matrix(np.diag([-1.0, 1.0])),
}


@dataclass(frozen=True)
class TruncationSpec:
    cutoffs: tuple[int, ...]
    n_spins: int = 0
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        object.__setattr__(self, "cutoffs", tuple(int(c) for c in self.cutoffs))
        if any(c < 1 for c in self.cutoffs):
            raise ValueError("Fock cutoffs must be >= 1")
        if self.dim > self.dim_cap:
            raise CapacityError(f"Hilbert dimension {self.dim} exceeds cap {self.dim_cap}")

    @classmethod
    def uniform(cls, model: ModelSpec, cutoff: int, dim_cap: int = DEFAULT_DIM_CAP):
        return cls((cutoff,) * model.n_modes, model.n_spins, dim_cap)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.cutoffs + (2,) * self.n_spins

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))


def destroy(n: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n)), 1, shape=(n, n), format="csr")


def _factor_matrix(trunc: TruncationSpec, mono: Monomial) -> sp.csr_matrix:
    factors = []
    for m, n in enumerate(trunc.cutoffs):
        p, q = mono.exponents(m)
        a = destroy(n)
        mat = sp.identity(n, format="csr")
        if p:
            mat = mat @ (a.T.tocsr() ** p)
        if q:
            mat = mat @ (a ** q)
        factors.append(mat)
    for s in range(trunc.n_spins):
        lab = mono.spin_label(s)
        factors.append(_SPIN_MATS[lab] if lab else sp.identity(2, format="csr"))
    if not factors:
        return sp.csr_matrix(np.ones((1, 1)))
    return reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)


def operator_matrix(op: OperatorPolynomial, trunc: TruncationSpec) -> sp.csr_matrix:
    """Sparse matrix of a normal-ordered polynomial in the truncated basis."""
    if op.n_modes != len(trunc.cutoffs) or op.n_spins != trunc.n_spins:
        raise StructuralError("operator and truncation index spaces differ")
    out = sp.csr_matrix((trunc.dim, trunc.dim), dtype=complex)
    for mono, c in op.items():
        out = out + c * _factor_matrix(trunc, mono)
    return out.tocsr()


def build_liouvillian(model: ModelSpec, trunc: TruncationSpec) -> sp.csr_matrix:
    """Column-stacked Lindblad superoperator."""
    if model.n_modes != len(trunc.cutoffs) or model.n_spins != trunc.n_spins:
        raise StructuralError("model and truncation index spaces differ")
    d = trunc.dim
    eye = sp.identity(d, format="csr", dtype=complex)
    h = operator_matrix(model.hamiltonian, trunc)
    lv = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for jump in model.jumps:
        c = operator_matrix(jump, trunc)
        cdc = (c.conj().T @ c).tocsr()
        lv = lv + sp.kron(c.conj(), c) - 0.5 * sp.kron(eye, cdc) - 0.5 * sp.kron(cdc.T, eye)
    return lv.tocsr()


def apply_liouvillian(model: ModelSpec, trunc: TruncationSpec, rho: np.ndarray) -> np.ndarray:
    """``L(rho)`` computed with dense matrices (no vectorization)."""
    h = operator_matrix(model.hamiltonian, trunc).toarray()
    out = -1j * (h @ rho - rho @ h)
    for jump in model.jumps:
        c = operator_matrix(jump, trunc).toarray()
        cd = c.conj().T
        out += c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)
    return out


@dataclass(frozen=True)
class SteadyStateResult:
    rho: np.ndarray
    trunc: TruncationSpec
    residual: float
    boundary_population: tuple[float, ...]
    warnings: tuple[str, ...] = field(default=())

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.rho).min())


def _boundary_population(rho: np.ndarray, trunc: TruncationSpec) -> tuple[float, ...]:
    diag = np.real(np.diag(rho)).reshape(trunc.dims)
    out = []
    for m in range(len(trunc.cutoffs)):
        marginal = np.moveaxis(diag, m, 0).reshape(trunc.dims[m], -1).sum(axis=1)
        out.append(float(marginal[-1]))
    return tuple(out)


def steady_state(superop: sp.spmatrix, trunc: TruncationSpec, *, strict: bool = False,
                 boundary_tol: float = 1e-6) -> SteadyStateResult:
    """Null vector of ``superop`` with unit trace, by bordered sparse LU.

    The first row of the Liouvillian is replaced by the trace functional.  In
    ``strict`` mode a boundary population above ``boundary_tol`` raises
    :class:`TruncationError`; otherwise it is reported as a warning.
    """
    d = trunc.dim
    lv = sp.lil_matrix(superop, dtype=complex)
    trace_idx = np.arange(d) * (d + 1)
    lv[0, :] = 0
    lv[0, trace_idx] = 1.0
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            vec = spla.spsolve(lv.tocsc(), rhs)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularSystemError(
                "bordered steady-state system is singular: the steady state is degenerate"
            ) from exc
    if not np.all(np.isfinite(vec)):
        raise SingularSystemError("bordered steady-state system is singular: non-finite solution")

    rho = vec.reshape((d, d), order="F")
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    residual = float(np.linalg.norm(superop @ rho.reshape(-1, order="F")))
    boundary = _boundary_population(rho, trunc)
    notes = []
    worst = max(boundary, default=0.0)
    if worst > boundary_tol:
        msg = f"boundary population {worst:.3g} exceeds {boundary_tol:g}; raise the cutoff"
        if strict:
            raise TruncationError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    return SteadyStateResult(rho, trunc, residual, boundary, tuple(notes))


def solve(model: ModelSpec, cutoff, *, strict: bool = False, dim_cap: int = DEFAULT_DIM_CAP,
          boundary_tol: float = 1e-6) -> SteadyStateResult:
    """Convenience wrapper: build the Liouvillian and return its steady state."""
    if np.isscalar(cutoff):
        trunc = TruncationSpec.uniform(model, int(cutoff), dim_cap)
    else:
        trunc = TruncationSpec(tuple(cutoff), model.n_spins, dim_cap)
    return steady_state(build_liouvillian(model, trunc), trunc, strict=strict,
                        boundary_tol=boundary_tol)


def expectation(result: SteadyStateResult, op: OperatorPolynomial) -> complex:
    return complex(np.sum(operator_matrix(op, result.trunc).T.multiply(result.rho)))


def exact_moment(result: SteadyStateResult, key: Monomial) -> complex:
    """``tr(rho * key)`` for a normal-ordered key; warns when the order nears the cutoff."""
    if key.is_identity():
        return 1.0 + 0j
    key.check_space(len(result.trunc.cutoffs), result.trunc.n_spins)
    for m, p, q in key.boson:
        n = result.trunc.cutoffs[m]
        if max(p, q) > n / 2:
            warnings.warn(f"moment order ({p}, {q}) on mode {m} is close to cutoff {n}",
                          RuntimeWarning, stacklevel=2)
    mat = _factor_matrix(result.trunc, key)
    return complex(np.sum(mat.T.multiply(result.rho)))
