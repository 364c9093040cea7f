"""Normal-ordered moments of convolved P-distribution families.

Each component family knows its moments ``<a^{dagger p} a^q>`` in closed form.
Convolving two P distributions shifts the phase-space variable, so the
moments of the convolution follow from the binomial expansion of
``(x + y)^{*p} (x + y)^q``:

    <a^{+p} a^q> = sum_{n<=p, m<=q} C(p, n) C(q, m) <a^{+n} a^m>_1 <a^{+(p-n)} a^{q-m}>_2

Multimode moments factorize over modes and spins, corrected by a cluster
expansion over the stored cross-mode correlation entries ``delta``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import signal

from .algebra import IDENTITY, Monomial
from .errors import MomentOrderError, StructuralError, UnphysicalMomentsError

DEFAULT_MAX_ORDER = 16
MAX_CORRELATION_ORDER = 3
TWO_PI = 2.0 * math.pi


def _check_order(p: int, q: int, max_order: int) -> None:
    if p < 0 or q < 0:
        raise ValueError("moment exponents must be non-negative")
    if p + q > max_order:
        raise MomentOrderError(
            f"moment order {p + q} exceeds max_order={max_order}; raise it explicitly"
        )


def _canon_phase(phi: float) -> float:
    phi = float(phi) % TWO_PI
    return 0.0 if phi == TWO_PI else phi


@lru_cache(maxsize=None)
def _matchings(n: int) -> int:
    # number of perfect matchings of n items, (n-1)!!
    if n % 2:
        return 0
    return math.factorial(n) // (2 ** (n // 2) * math.factorial(n // 2))


def gaussian_moment(n_pair: complex, m_pair: complex, p: int, q: int) -> complex:
    """Wick sum for a zero-mean Gaussian state with ``<a^+ a> = N`` and ``<a a> = M``."""
    total = 0j
    for k in range(min(p, q) + 1):
        if (p - k) % 2 or (q - k) % 2:
            continue
        count = math.comb(p, k) * math.comb(q, k) * math.factorial(k) \
            * _matchings(p - k) * _matchings(q - k)
        total += count * n_pair ** k * np.conj(m_pair) ** ((p - k) // 2) * m_pair ** ((q - k) // 2)
    return complex(total)


def _squeeze_pairs(r: float, phi: float, n0: float = 0.0) -> tuple[float, complex]:
    # S^+ a S = a cosh r - e^{i phi} a^+ sinh r, averaged over a thermal state of mean n0
    ch, sh = math.cosh(r), math.sinh(r)
    n_pair = n0 * ch * ch + (n0 + 1.0) * sh * sh
    m_pair = -cmath.exp(1j * phi) * sh * ch * (2.0 * n0 + 1.0)
    return n_pair, m_pair


# -- component families ---------------------------------------------------------

@dataclass(frozen=True)
class Coherent:
    alpha: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))

    def _moment(self, p, q):
        return np.conj(self.alpha) ** p * self.alpha ** q


@dataclass(frozen=True)
class Thermal:
    n0: float = 0.0

    def __post_init__(self):
        if not self.n0 >= 0:
            raise ValueError(f"thermal occupation must be >= 0, got {self.n0}")
        object.__setattr__(self, "n0", float(self.n0))

    def _moment(self, p, q):
        return float(math.factorial(p)) * self.n0 ** p if p == q else 0.0


@dataclass(frozen=True)
class Fock:
    l: int = 0

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 0:
            raise ValueError(f"Fock number must be a non-negative integer, got {self.l}")
        object.__setattr__(self, "l", int(self.l))

    def _moment(self, p, q):
        if p != q or p > self.l:
            return 0.0
        return float(math.perm(self.l, p))


@dataclass(frozen=True)
class Squeezed:
    """Squeezed vacuum ``S(r, phi)|0>``."""

    r: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.r >= 0:
            raise ValueError(f"squeezing r must be >= 0, got {self.r}")
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "phi", _canon_phase(self.phi))

    def _moment(self, p, q):
        return gaussian_moment(*_squeeze_pairs(self.r, self.phi), p, q)


@dataclass(frozen=True)
class SqueezedThermal:
    """``S(r, phi) rho_thermal(n0) S^+``."""

    n0: float = 0.0
    r: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.n0 >= 0 or not self.r >= 0:
            raise ValueError("n0 and r must be >= 0")
        object.__setattr__(self, "n0", float(self.n0))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "phi", _canon_phase(self.phi))

    def _moment(self, p, q):
        return gaussian_moment(*_squeeze_pairs(self.r, self.phi, self.n0), p, q)


@lru_cache(maxsize=4096)
def _squeezed_fock_moment(l: int, r: float, phi: float, p: int, q: int) -> complex:
    # exact: starting from |l>, p+q ladder steps never leave levels <= l+p+q
    dim = l + p + q + 2
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    ad = a.T.copy()
    b = a * math.cosh(r) - cmath.exp(1j * phi) * math.sinh(r) * ad
    bd = b.conj().T
    vec = np.zeros(dim, dtype=complex)
    vec[l] = 1.0
    out = vec
    for _ in range(q):
        out = b @ out
    for _ in range(p):
        out = bd @ out
    return complex(vec.conj() @ out)


@dataclass(frozen=True)
class SqueezedFock:
    """``S(r, phi)|l>``."""

    l: int = 0
    r: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 0 or not self.r >= 0:
            raise ValueError("l must be a non-negative integer and r >= 0")
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "phi", _canon_phase(self.phi))

    def _moment(self, p, q):
        return _squeezed_fock_moment(self.l, self.r, self.phi, p, q)


def coherent_overlap(a1: complex, a2: complex) -> complex:
    """``<a1|a2>`` for coherent states."""
    return cmath.exp(-0.5 * abs(a1) ** 2 - 0.5 * abs(a2) ** 2 + np.conj(a1) * a2)


@dataclass(frozen=True)
class Cat:
    """Superposition ``A (|alpha1> + theta |alpha2>)``; ``A`` follows from the overlaps."""

    alpha1: complex = 0j
    alpha2: complex = 0j
    theta: complex = 1.0

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "theta"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        if self.norm_sq() <= 1e-14:
            raise ValueError("cat superposition has zero norm")

    def norm_sq(self) -> float:
        ov = coherent_overlap(self.alpha1, self.alpha2)
        return (1.0 + abs(self.theta) ** 2 + 2.0 * (self.theta * ov).real)

    @property
    def normalization(self) -> float:
        return 1.0 / math.sqrt(self.norm_sq())

    def _moment(self, p, q):
        a1, a2, th = self.alpha1, self.alpha2, self.theta
        ov = coherent_overlap(a1, a2)
        c1, c2 = np.conj(a1), np.conj(a2)
        val = (c1 ** p * a1 ** q + abs(th) ** 2 * c2 ** p * a2 ** q
               + th * ov * c1 ** p * a2 ** q + np.conj(th * ov) * c2 ** p * a1 ** q)
        return val / self.norm_sq()


ComponentState = Coherent | Thermal | Fock | Squeezed | SqueezedThermal | SqueezedFock | Cat
COMPONENT_TYPES = {
    "coherent": Coherent,
    "thermal": Thermal,
    "fock": Fock,
    "squeezed": Squeezed,
    "squeezed_thermal": SqueezedThermal,
    "squeezed_fock": SqueezedFock,
    "cat": Cat,
}


def component_moment(state, p: int, q: int, max_order: int = DEFAULT_MAX_ORDER) -> complex:
    """``<a^{+p} a^q>`` of one component state."""
    _check_order(p, q, max_order)
    if p == 0 and q == 0:
        return 1.0 + 0j
    return complex(state._moment(p, q))


def moment_table(state, order: int, max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    """``T[p, q] = <a^{+p} a^q>`` for ``p + q <= order`` (zero elsewhere)."""
    _check_order(0, order, max_order)
    idx = np.arange(order + 1)
    mask = np.add.outer(idx, idx) <= order
    if isinstance(state, Coherent):
        c = state.alpha
        table = np.outer(np.conj(c) ** idx, c ** idx)
        return np.where(mask, table, 0.0)
    table = np.zeros((order + 1, order + 1), dtype=complex)
    if isinstance(state, (Thermal, Fock)):
        for p in range(order // 2 + 1):
            table[p, p] = state._moment(p, p)
        table[0, 0] = 1.0
        return table
    for p in range(order + 1):
        for q in range(order + 1 - p):
            table[p, q] = component_moment(state, p, q, max_order)
    return table


@lru_cache(maxsize=None)
def _inv_factorials(order: int) -> np.ndarray:
    return np.array([math.exp(-math.lgamma(k + 1)) for k in range(order + 1)])


def convolve_tables(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Moment table of the convolution of two P distributions (same shape tables).

    With ``T~[p, q] = T[p, q] / (p! q!)`` the binomial double sum becomes a plain
    two-dimensional discrete convolution.
    """
    k = t1.shape[0] - 1
    f = _inv_factorials(k)
    # scale one axis at a time: the full p! q! product leaves float range at high order
    s1 = t1 * f[:, None] * f[None, :]
    s2 = t2 * f[:, None] * f[None, :]
    conv = signal.convolve2d(s1, s2)[: k + 1, : k + 1] / f[:, None] / f[None, :]
    idx = np.arange(k + 1)
    return np.where(np.add.outer(idx, idx) <= k, conv, 0.0)


def _check_components(components: Sequence) -> None:
    if not components:
        raise ValueError("component list must be nonempty")
    if sum(isinstance(c, Cat) for c in components) > 1:
        raise ValueError("at most one cat component per mode is supported")


def convolved_table(components: Sequence, order: int,
                    max_order: int = DEFAULT_MAX_ORDER) -> np.ndarray:
    _check_components(components)
    table = moment_table(components[0], order, max_order)
    for comp in components[1:]:
        table = convolve_tables(table, moment_table(comp, order, max_order))
    return table


def convolve_moment(components: Sequence, p: int, q: int,
                    max_order: int = DEFAULT_MAX_ORDER) -> complex:
    """Moment of the left-to-right convolution of ``components``."""
    _check_order(p, q, max_order)
    _check_components(components)
    if len(components) == 1:
        return component_moment(components[0], p, q, max_order)
    return complex(convolved_table(components, p + q, max_order)[p, q])


# -- ansatz ---------------------------------------------------------------------

@dataclass(frozen=True)
class ModeAnsatz:
    components: tuple = (Coherent(0j),)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        _check_components(self.components)


@dataclass(frozen=True)
class SpinAnsatz:
    """Spin-1/2 state ``(1 + x sx + y sy + z sz) / 2``."""

    bloch: tuple[float, float, float] = (0.0, 0.0, -1.0)

    def __post_init__(self):
        b = tuple(float(v) for v in self.bloch)
        if len(b) != 3:
            raise ValueError("Bloch vector needs three components")
        if b[0] ** 2 + b[1] ** 2 + b[2] ** 2 > 1.0 + 1e-12:
            raise ValueError(f"Bloch vector {b} lies outside the unit ball")
        object.__setattr__(self, "bloch", b)

    def expectation(self, label: str | None) -> complex:
        x, y, z = self.bloch
        if label is None:
            return 1.0 + 0j
        if label == "+":
            return complex(0.5 * x, 0.5 * y)
        if label == "-":
            return complex(0.5 * x, -0.5 * y)
        return complex(z)


def _normalize_correlations(correlations: Mapping[Monomial, complex],
                            n_modes: int) -> dict[Monomial, complex]:
    out: dict[Monomial, complex] = {}
    for key, val in correlations.items():
        if key.spin:
            raise StructuralError(f"correlation key {key} carries spin factors")
        key.check_space(n_modes, 0)
        if len(key.modes) < 2:
            raise StructuralError(f"correlation key {key} touches fewer than two modes")
        if key.order > MAX_CORRELATION_ORDER:
            raise StructuralError(
                f"correlation key {key} has order {key.order} > {MAX_CORRELATION_ORDER}"
            )
        val = complex(val)
        canon = key.canonical()
        if canon != key:
            val = val.conjugate()
        if canon == canon.dagger():
            val = complex(val.real, 0.0)
        if canon in out and abs(out[canon] - val) > 1e-12:
            raise ValueError(f"conflicting correlation values for {canon}")
        out[canon] = val
    return out


@dataclass(frozen=True)
class Ansatz:
    """Product of per-mode convolved P families and spin Bloch vectors, plus cross-mode
    correlation entries ``delta`` keyed by canonical monomials."""

    modes: tuple[ModeAnsatz, ...]
    spins: tuple[SpinAnsatz, ...] = ()
    correlations: Mapping[Monomial, complex] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "spins", tuple(self.spins))
        object.__setattr__(
            self, "correlations", _normalize_correlations(self.correlations, len(self.modes))
        )

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def n_spins(self) -> int:
        return len(self.spins)

    def delta(self, key: Monomial) -> complex:
        canon = key.canonical()
        val = self.correlations.get(canon, 0j)
        return val if canon == key else val.conjugate()

    def __hash__(self):
        return hash((self.modes, self.spins, tuple(sorted(self.correlations.items()))))


def _mode_dicts(mono: Monomial) -> dict[int, tuple[int, int]]:
    return {m: (p, q) for m, p, q in mono.boson}


@lru_cache(maxsize=65536)
def cluster_terms(key: Monomial, blocks: tuple[Monomial, ...]):
    """Cluster expansion of a boson monomial over correlation blocks.

    Returns ``((weight, counts, remainder), ...)`` where ``counts[j]`` is the number
    of times ``blocks[j]`` is pulled out and ``remainder`` is the factorized rest.
    Weight counts the distinct ways to pick operator instances for the blocks.
    """
    target = _mode_dicts(key)
    block_dicts = [_mode_dicts(b) for b in blocks]
    out = []

    def fits(rem, bd):
        return all(m in rem and rem[m][0] >= p and rem[m][1] >= q for m, (p, q) in bd.items())

    def recurse(j, rem, counts):
        if j == len(blocks):
            weight = 1.0
            for m, (p, q) in target.items():
                rp, rq = rem.get(m, (0, 0))
                num = math.factorial(p) * math.factorial(q)
                den = math.factorial(rp) * math.factorial(rq)
                for bd, k in zip(block_dicts, counts):
                    bp, bq = bd.get(m, (0, 0))
                    den *= (math.factorial(bp) * math.factorial(bq)) ** k
                weight *= num / den
            for k in counts:
                weight /= math.factorial(k)
            out.append((weight, tuple(counts), Monomial.make(rem)))
            return
        bd = block_dicts[j]
        k = 0
        cur = dict(rem)
        while True:
            recurse(j + 1, cur, counts + [k])
            if not fits(cur, bd):
                break
            cur = {m: (pq[0] - bd.get(m, (0, 0))[0], pq[1] - bd.get(m, (0, 0))[1])
                   for m, pq in cur.items()}
            k += 1

    recurse(0, target, [])
    return tuple(out)


def _factorized(ansatz: Ansatz, boson: Monomial, tables, max_order) -> complex:
    val = 1.0 + 0j
    for m, p, q in boson.boson:
        if tables is not None and m in tables and p + q < tables[m].shape[0]:
            val *= tables[m][p, q]
        else:
            val *= convolve_moment(ansatz.modes[m].components, p, q, max_order)
    return val


def ansatz_moment(ansatz: Ansatz, key: Monomial, max_order: int = DEFAULT_MAX_ORDER,
                  tables: Mapping[int, np.ndarray] | None = None) -> complex:
    """Moment of ``key`` in the ansatz state.

    Per-mode moments come from the convolved component tables, spins factorize,
    and every stored correlation entry that fits inside the key contributes
    through the cluster expansion (products of disjoint entries included).
    """
    if key.is_identity():
        return 1.0 + 0j
    key.check_space(ansatz.n_modes, ansatz.n_spins)
    if key.order > max_order:
        raise MomentOrderError(f"moment {key} of order {key.order} exceeds max_order={max_order}")
    spin_val = 1.0 + 0j
    for s, lab in key.spin:
        spin_val *= ansatz.spins[s].expectation(lab)
    boson = Monomial(key.boson)
    if not ansatz.correlations or len(boson.modes) < 2:
        return spin_val * _factorized(ansatz, boson, tables, max_order)

    blocks = []
    for canon in sorted(ansatz.correlations):
        blocks.append(canon)
        if canon.dagger() != canon:
            blocks.append(canon.dagger())
    blocks = tuple(b for b in blocks if set(b.modes) <= set(boson.modes))
    total = 0j
    for weight, counts, rem in cluster_terms(boson, blocks):
        term = weight * _factorized(ansatz, rem, tables, max_order)
        for b, k in zip(blocks, counts):
            if k:
                term *= ansatz.delta(b) ** k
        total += term
    return spin_val * total


def mode_tables(ansatz: Ansatz, order: int, max_order: int = DEFAULT_MAX_ORDER):
    """Per-mode convolved moment tables up to ``order``, for repeated evaluation."""
    return {m: convolved_table(mode.components, order, max_order)
            for m, mode in enumerate(ansatz.modes)}


# -- squeezing -------------------------------------------------------------------

@dataclass(frozen=True)
class Squeezing:
    r: float
    phi: float
    v_min: float


def squeezing_of(mean: complex, ada: float, aa: complex) -> Squeezing:
    """Effective squeezing from ``<a>``, ``<a^+ a>``, ``<a a>``.

    With centered moments ``nu`` and ``mu`` the smallest quadrature variance is
    ``1/2 + nu - |mu|`` (vacuum: 1/2).
    """
    nu = float(np.real(ada)) - abs(mean) ** 2
    mu = complex(aa) - complex(mean) ** 2
    v_min = 0.5 + nu - abs(mu)
    if v_min <= 0:
        raise UnphysicalMomentsError(f"minimal quadrature variance {v_min:.3g} <= 0")
    if v_min >= 0.5:
        return Squeezing(0.0, 0.0, v_min)
    r = -0.5 * math.log(2.0 * v_min)
    return Squeezing(r, _canon_phase(cmath.phase(-mu)), v_min)


def mode_squeezing(ansatz: Ansatz, mode: int) -> Squeezing:
    mean = ansatz_moment(ansatz, Monomial.make({mode: (0, 1)}))
    ada = ansatz_moment(ansatz, Monomial.make({mode: (1, 1)}))
    aa = ansatz_moment(ansatz, Monomial.make({mode: (0, 2)}))
    return squeezing_of(mean, ada, aa)


def moments_dict(source, keys: Iterable[Monomial]) -> dict[Monomial, complex]:
    """Evaluate ``keys`` with an ansatz, or pass through an existing mapping."""
    if isinstance(source, Ansatz):
        return {k: ansatz_moment(source, k) for k in keys}
    return {k: complex(source[k]) for k in keys}


__all__ = [
    "Ansatz", "Cat", "Coherent", "COMPONENT_TYPES", "Fock", "IDENTITY", "ModeAnsatz",
    "Squeezed", "SqueezedFock", "SqueezedThermal", "Squeezing", "SpinAnsatz", "Thermal",
    "ansatz_moment", "component_moment", "convolve_moment", "convolved_table",
    "gaussian_moment", "mode_squeezing", "mode_tables", "moment_table", "squeezing_of",
]
