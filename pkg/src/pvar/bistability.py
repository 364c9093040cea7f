"""Mean-field (Maxwell-Bloch) fixed points of the driven Jaynes-Cummings model and
branch selection by comparing variational norms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .algebra import EomSystem, eom_system
from .models import JcParams, jaynes_cummings
from .moments import Ansatz, Coherent, ModeAnsatz, SpinAnsatz
from .variational import cost, tracked_keys


@dataclass(frozen=True)
class FixedPoint:
    """Mean-field solution: field ``<a>``, ``<sigma->`` and ``<sigma_z>``."""

    a: complex
    sigma_minus: complex
    sigma_z: float

    @property
    def intensity(self) -> float:
        return abs(self.a) ** 2

    @property
    def bloch(self) -> tuple[float, float, float]:
        s = self.sigma_minus
        return (2.0 * s.real, -2.0 * s.imag, self.sigma_z)

    def ansatz(self) -> Ansatz:
        """Coherent cavity state times the matching spin state."""
        bloch = np.asarray(self.bloch)
        norm = float(np.linalg.norm(bloch))
        if norm > 1.0:
            bloch = bloch / norm
        return Ansatz((ModeAnsatz((Coherent(self.a),)),), (SpinAnsatz(tuple(bloch)),))


def mean_field_rhs(params: JcParams, a: complex, sm: complex, sz: float):
    """Right-hand sides of the factorized first-order equations."""
    da = -(params.kappa + 1j * params.delta_c) * a - 1j * params.g * sm - 1j * params.p
    dsm = -(params.gamma / 2 + 1j * params.delta_a) * sm + 1j * params.g * a * sz
    dsz = -params.gamma * (sz + 1) + 2j * params.g * (np.conj(a) * sm - a * np.conj(sm))
    return da, dsm, dsz.real


def _intensity_polynomial(params: JcParams, p: float) -> np.ndarray:
    # Eliminating <sigma-> and <sigma_z> leaves n |A u + B|^2 = p^2 u^2, u = Dn + 2 g^2 n
    g, gam = params.g, params.gamma
    d = gam ** 2 / 4 + params.delta_a ** 2
    a_c = params.kappa + 1j * params.delta_c
    b_c = g ** 2 * (gam / 2 - 1j * params.delta_a)
    c0 = a_c * d + b_c
    c1 = 2 * g ** 2 * a_c
    lhs = np.array([abs(c1) ** 2, 2 * (np.conj(c0) * c1).real, abs(c0) ** 2, 0.0])
    rhs = p ** 2 * np.array([0.0, 4 * g ** 4, 4 * g ** 2 * d, d ** 2])
    return lhs - rhs


def fixed_points(params: JcParams, p: float | None = None) -> list[FixedPoint]:
    """All mean-field fixed points at drive ``p``, sorted by intensity."""
    if params.gamma <= 0 and params.g != 0:
        raise ValueError("atomic decay gamma must be > 0 for a unique atomic steady state")
    p = params.p if p is None else p
    poly = _intensity_polynomial(params, p)
    scale = np.max(np.abs(poly))
    if scale == 0:
        roots = np.array([0.0])
    else:
        poly = np.trim_zeros(poly / scale, "f")
        roots = np.roots(poly) if len(poly) > 1 else np.array([])
        if poly[-1] == 0 and len(poly) > 1:
            roots = np.append(roots, 0.0)
    deriv = np.polyder(poly) if len(poly) > 1 else np.zeros(1)
    ns = []
    for r in roots:
        if abs(r.imag) > 1e-7 * max(1.0, abs(r)) or r.real < -1e-12:
            continue
        n = max(float(r.real), 0.0)
        for _ in range(3):
            dv = np.polyval(deriv, n)
            if dv == 0:
                break
            n = max(n - np.polyval(poly, n) / dv, 0.0)
        if all(abs(n - m) > 1e-9 * max(1.0, n) for m in ns):
            ns.append(n)
    d = params.gamma ** 2 / 4 + params.delta_a ** 2
    out = []
    for n in sorted(ns):
        if params.g == 0:
            z = -1.0
        else:
            z = -d / (d + 2 * params.g ** 2 * n)
        denom = params.gamma / 2 + 1j * params.delta_a
        lin = params.kappa + 1j * params.delta_c - params.g ** 2 * z / denom
        a = -1j * p / lin if p else 0j
        sm = 1j * params.g * a * z / denom if params.g else 0j
        out.append(FixedPoint(complex(a), complex(sm), float(z)))
    return out


@dataclass(frozen=True)
class FixedPointScan:
    p_values: tuple[float, ...]
    solutions: tuple[tuple[FixedPoint, ...], ...]

    def multistable(self) -> list[bool]:
        return [len(s) >= 3 for s in self.solutions]

    def interval(self) -> tuple[float, float] | None:
        """Smallest and largest sampled drive with three fixed points."""
        ps = [p for p, m in zip(self.p_values, self.multistable()) if m]
        return (min(ps), max(ps)) if ps else None


def maxwell_bloch_fixed_points(params: JcParams, p_sweep) -> FixedPointScan:
    p_sweep = tuple(float(p) for p in p_sweep)
    return FixedPointScan(p_sweep, tuple(tuple(fixed_points(params, p)) for p in p_sweep))


@dataclass(frozen=True)
class BranchChoice:
    p: float
    chosen: FixedPoint
    norms: tuple[float, ...] = ()
    candidates: tuple[FixedPoint, ...] = ()
    tie: bool = False


@dataclass(frozen=True)
class BranchSelection:
    choices: tuple[BranchChoice, ...]
    crossings: tuple[float, ...] = field(default=())


def branch_norm(params: JcParams, point: FixedPoint, p: float, order: int = 2,
                weights: str = "adaptive", system: EomSystem | None = None) -> float:
    """Residual norm of the pinned coherent x Bloch state on the order-``order`` key set."""
    if system is None:
        system = eom_system(jaynes_cummings(params.replace(p=p)), tracked_keys(1, 1, order))
    return cost(point.ansatz(), system, weights).total


def _stable_pair(points):
    # lowest and highest branch; the middle one of three is the unstable solution
    return (points[0], points[-1])


def branch_select(params: JcParams, scan: FixedPointScan, order: int = 2,
                  weights: str = "adaptive", tie_tol: float = 1e-12) -> BranchSelection:
    """Pick, at every drive, the fixed point with the smaller variational norm.

    Ties (relative difference below ``tie_tol``) go to the lower-intensity branch
    and are flagged.  Sign changes of the norm difference between neighbouring
    multistable samples are refined with Brent's method into crossing drives.
    """
    keys = tracked_keys(1, 1, order)
    choices = []
    diffs = []
    for p, sols in zip(scan.p_values, scan.solutions):
        if len(sols) < 3:
            choices.append(BranchChoice(p, sols[0], (), tuple(sols)))
            diffs.append(None)
            continue
        system = eom_system(jaynes_cummings(params.replace(p=p)), keys)
        low, high = _stable_pair(sols)
        n_low = branch_norm(params, low, p, order, weights, system)
        n_high = branch_norm(params, high, p, order, weights, system)
        tie = abs(n_low - n_high) <= tie_tol * max(n_low, n_high, 1e-300)
        chosen = low if (tie or n_low < n_high) else high
        choices.append(BranchChoice(p, chosen, (n_low, n_high), (low, high), tie))
        diffs.append(n_low - n_high)

    def diff_at(p):
        sols = fixed_points(params, p)
        if len(sols) < 3:
            return np.nan
        system = eom_system(jaynes_cummings(params.replace(p=p)), keys)
        low, high = _stable_pair(sols)
        return branch_norm(params, low, p, order, weights, system) - \
            branch_norm(params, high, p, order, weights, system)

    crossings = []
    for i in range(len(diffs) - 1):
        d0, d1 = diffs[i], diffs[i + 1]
        if d0 is None or d1 is None or np.sign(d0) == np.sign(d1):
            continue
        p0, p1 = scan.p_values[i], scan.p_values[i + 1]
        try:
            crossings.append(float(optimize.brentq(diff_at, p0, p1, xtol=1e-10)))
        except ValueError:
            crossings.append(0.5 * (p0 + p1))
    return BranchSelection(tuple(choices), tuple(crossings))
