"""Normal-ordered operator algebra for bosonic modes and spin-1/2 sites.

Operators are sparse maps from :class:`Monomial` to complex coefficients.
Every stored monomial is normal ordered: per mode all creation operators sit
to the left of all annihilation operators, and each spin site carries at most
one of ``"+"``, ``"-"``, ``"z"`` (identity is omitted).

The canonical commutation relation ``[a_m, a_m^dagger] = 1`` is applied in
closed form,

    a^q a^{dagger p} = sum_k k! C(p, k) C(q, k) a^{dagger (p-k)} a^{q-k},

so coefficients stay exact integers times the user supplied numbers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Iterable, Iterator, Mapping

from .errors import StructuralError

#: Terms with smaller coefficient magnitude are dropped after arithmetic.
DROP_TOL = 1e-14

SPIN_LABELS = ("+", "-", "z")

# Pauli products for sigma+ = |e><g|, sigma- = |g><e|, sigma_z = |e><e| - |g><g|.
# None stands for the identity.
_SPIN_TABLE = {
    ("+", "+"): (),
    ("-", "-"): (),
    ("+", "-"): ((0.5, None), (0.5, "z")),
    ("-", "+"): ((0.5, None), (-0.5, "z")),
    ("z", "z"): ((1.0, None),),
    ("z", "+"): ((1.0, "+"),),
    ("+", "z"): ((-1.0, "+"),),
    ("z", "-"): ((-1.0, "-"),),
    ("-", "z"): ((1.0, "-"),),
}

_SPIN_DAGGER = {"+": "-", "-": "+", "z": "z"}


@dataclass(frozen=True, order=True)
class Monomial:
    """Normal-ordered product ``prod_m a_m^{dagger p_m} a_m^{q_m} * prod_s sigma_s``.

    ``boson`` holds ``(mode, p, q)`` triples sorted by mode with ``p + q > 0``;
    ``spin`` holds ``(site, label)`` pairs sorted by site.  A monomial doubles
    as the address of one expectation value (a moment key).
    """

    boson: tuple[tuple[int, int, int], ...] = ()
    spin: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        for mode, p, q in self.boson:
            if mode < 0 or p < 0 or q < 0:
                raise StructuralError(f"negative index in boson factor {(mode, p, q)}")
        for site, label in self.spin:
            if site < 0 or label not in SPIN_LABELS:
                raise StructuralError(f"bad spin factor {(site, label)}")

    @classmethod
    def make(cls, boson: Mapping[int, tuple[int, int]] | None = None,
             spin: Mapping[int, str] | None = None) -> "Monomial":
        """Build a canonical monomial from ``{mode: (p, q)}`` and ``{site: label}``."""
        b = tuple(sorted((m, p, q) for m, (p, q) in (boson or {}).items() if p + q > 0))
        s = tuple(sorted((site, lab) for site, lab in (spin or {}).items() if lab != "1"))
        return cls(b, s)

    @property
    def order(self) -> int:
        """Total boson order ``sum_m (p_m + q_m)``."""
        return sum(p + q for _, p, q in self.boson)

    @property
    def degree(self) -> int:
        """Boson order plus one per non-identity spin factor."""
        return self.order + len(self.spin)

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(m for m, _, _ in self.boson)

    def exponents(self, mode: int) -> tuple[int, int]:
        for m, p, q in self.boson:
            if m == mode:
                return p, q
        return 0, 0

    def spin_label(self, site: int) -> str | None:
        for s, lab in self.spin:
            if s == site:
                return lab
        return None

    def is_identity(self) -> bool:
        return not self.boson and not self.spin

    def dagger(self) -> "Monomial":
        return Monomial(
            tuple((m, q, p) for m, p, q in self.boson),
            tuple((s, _SPIN_DAGGER[lab]) for s, lab in self.spin),
        )

    def canonical(self) -> "Monomial":
        """Representative of the pair ``{self, self.dagger()}`` (the smaller one)."""
        return min(self, self.dagger())

    def check_space(self, n_modes: int, n_spins: int) -> None:
        for m, _, _ in self.boson:
            if m >= n_modes:
                raise StructuralError(f"mode {m} outside declared range 0..{n_modes - 1}")
        for s, _ in self.spin:
            if s >= n_spins:
                raise StructuralError(f"spin {s} outside declared range 0..{n_spins - 1}")

    def label(self, mode_names: Iterable[str] | None = None) -> str:
        names = list(mode_names) if mode_names is not None else None
        parts = []
        for m, p, q in self.boson:
            name = names[m] if names else f"a{m}"
            if p:
                parts.append(f"{name}^+" + (f"^{p}" if p > 1 else ""))
            if q:
                parts.append(name + (f"^{q}" if q > 1 else ""))
        for s, lab in self.spin:
            parts.append(f"s{s}{lab}")
        return " ".join(parts) if parts else "1"

    def __str__(self) -> str:
        return self.label()


IDENTITY = Monomial()


@lru_cache(maxsize=None)
def _boson_product(p1: int, q1: int, p2: int, q2: int) -> tuple[tuple[int, int, int], ...]:
    # (coefficient, p, q) of a^{+p1} a^{q1} a^{+p2} a^{q2}
    out = []
    for k in range(min(q1, p2) + 1):
        c = factorial(k) * comb(q1, k) * comb(p2, k)
        out.append((c, p1 + p2 - k, q1 + q2 - k))
    return tuple(out)


@lru_cache(maxsize=65536)
def monomial_product(lhs: Monomial, rhs: Monomial) -> tuple[tuple[complex, Monomial], ...]:
    """Normal-ordered expansion of ``lhs * rhs`` as ``((coef, monomial), ...)``."""
    left_b = {m: (p, q) for m, p, q in lhs.boson}
    right_b = {m: (p, q) for m, p, q in rhs.boson}
    factors = []
    for m in sorted(set(left_b) | set(right_b)):
        p1, q1 = left_b.get(m, (0, 0))
        p2, q2 = right_b.get(m, (0, 0))
        factors.append([(c, ("b", m, p, q)) for c, p, q in _boson_product(p1, q1, p2, q2)])

    left_s = dict(lhs.spin)
    right_s = dict(rhs.spin)
    for s in sorted(set(left_s) | set(right_s)):
        l1, l2 = left_s.get(s), right_s.get(s)
        if l1 is None or l2 is None:
            factors.append([(1.0, ("s", s, l1 or l2))])
        else:
            opts = _SPIN_TABLE[(l1, l2)]
            if not opts:
                return ()
            factors.append([(c, ("s", s, lab)) for c, lab in opts])

    out = []
    for combo in itertools.product(*factors):
        coef = 1.0
        boson, spin = [], []
        for c, item in combo:
            coef *= c
            if item[0] == "b":
                _, m, p, q = item
                if p + q:
                    boson.append((m, p, q))
            elif item[2] is not None:
                spin.append((item[1], item[2]))
        out.append((coef, Monomial(tuple(boson), tuple(spin))))
    return tuple(out)


class OperatorPolynomial:
    """Complex linear combination of normal-ordered monomials.

    Instances are treated as immutable; arithmetic returns new objects.
    """

    __slots__ = ("_terms", "n_modes", "n_spins")

    def __init__(self, terms: Mapping[Monomial, complex] | None = None,
                 n_modes: int = 1, n_spins: int = 0):
        self.n_modes = int(n_modes)
        self.n_spins = int(n_spins)
        clean = {}
        for mono, c in (terms or {}).items():
            mono.check_space(self.n_modes, self.n_spins)
            c = complex(c)
            if abs(c) >= DROP_TOL:
                clean[mono] = c
        self._terms = clean

    # -- constructors --------------------------------------------------
    @classmethod
    def zero(cls, n_modes: int = 1, n_spins: int = 0) -> "OperatorPolynomial":
        return cls({}, n_modes, n_spins)

    @classmethod
    def identity(cls, n_modes: int = 1, n_spins: int = 0, coef: complex = 1.0):
        return cls({IDENTITY: coef}, n_modes, n_spins)

    @classmethod
    def from_monomial(cls, mono: Monomial, n_modes: int = 1, n_spins: int = 0,
                      coef: complex = 1.0) -> "OperatorPolynomial":
        return cls({mono: coef}, n_modes, n_spins)

    # -- access ---------------------------------------------------------
    @property
    def terms(self) -> dict[Monomial, complex]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[Monomial, complex]]:
        return iter(sorted(self._terms.items()))

    def monomials(self) -> list[Monomial]:
        return sorted(self._terms)

    def coefficient(self, mono: Monomial) -> complex:
        return self._terms.get(mono, 0j)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def _like(self, terms) -> "OperatorPolynomial":
        return OperatorPolynomial(terms, self.n_modes, self.n_spins)

    def _check_compatible(self, other: "OperatorPolynomial") -> None:
        if (self.n_modes, self.n_spins) != (other.n_modes, other.n_spins):
            raise StructuralError(
                f"index spaces differ: ({self.n_modes}, {self.n_spins}) vs "
                f"({other.n_modes}, {other.n_spins})"
            )

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = OperatorPolynomial.identity(self.n_modes, self.n_spins, other)
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        self._check_compatible(other)
        out = dict(self._terms)
        for mono, c in other._terms.items():
            out[mono] = out.get(mono, 0j) + c
        return self._like(out)

    __radd__ = __add__

    def __neg__(self):
        return self._like({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor: complex) -> "OperatorPolynomial":
        return self._like({m: c * factor for m, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return NotImplemented

    def __truediv__(self, other):
        return self.scale(1.0 / other)

    def dagger(self) -> "OperatorPolynomial":
        return adjoint(self)

    # -- comparison -----------------------------------------------------
    def allclose(self, other: "OperatorPolynomial", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for c in diff._terms.values())

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return self.allclose(self.dagger(), atol)

    def __eq__(self, other):
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return (self.n_modes, self.n_spins) == (other.n_modes, other.n_spins) and \
            self._terms == other._terms

    def __hash__(self):
        return hash((self.n_modes, self.n_spins, frozenset(self._terms.items())))

    def __repr__(self) -> str:
        return f"OperatorPolynomial({self}, n_modes={self.n_modes}, n_spins={self.n_spins})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        return " + ".join(f"({_fmt(c)})*{m}" for m, c in self.items())


def _fmt(c: complex) -> str:
    if c.imag == 0:
        return f"{c.real:.6g}"
    if c.real == 0:
        return f"{c.imag:.6g}j"
    return f"{c.real:.6g}{c.imag:+.6g}j"


# -- elementary operators --------------------------------------------------

def annihilation(mode: int, n_modes: int, n_spins: int = 0) -> OperatorPolynomial:
    return OperatorPolynomial.from_monomial(Monomial.make({mode: (0, 1)}), n_modes, n_spins)


def creation(mode: int, n_modes: int, n_spins: int = 0) -> OperatorPolynomial:
    return OperatorPolynomial.from_monomial(Monomial.make({mode: (1, 0)}), n_modes, n_spins)


def spin_op(site: int, label: str, n_modes: int, n_spins: int) -> OperatorPolynomial:
    return OperatorPolynomial.from_monomial(Monomial.make(spin={site: label}), n_modes, n_spins)


# -- core operations -----------------------------------------------------------

def multiply(lhs: OperatorPolynomial, rhs: OperatorPolynomial) -> OperatorPolynomial:
    """Normal-ordered product ``lhs * rhs``."""
    lhs._check_compatible(rhs)
    out: dict[Monomial, complex] = {}
    for m1, c1 in lhs._terms.items():
        for m2, c2 in rhs._terms.items():
            for c, mono in monomial_product(m1, m2):
                out[mono] = out.get(mono, 0j) + c1 * c2 * c
    return lhs._like(out)


def adjoint(op: OperatorPolynomial) -> OperatorPolynomial:
    """Hermitian conjugate.  The conjugate of a normal-ordered monomial is normal ordered."""
    return op._like({m.dagger(): c.conjugate() for m, c in op._terms.items()})


def commutator(lhs: OperatorPolynomial, rhs: OperatorPolynomial) -> OperatorPolynomial:
    return multiply(lhs, rhs) - multiply(rhs, lhs)


def anticommutator(lhs: OperatorPolynomial, rhs: OperatorPolynomial) -> OperatorPolynomial:
    return multiply(lhs, rhs) + multiply(rhs, lhs)


@dataclass(frozen=True)
class ModelSpec:
    """Hamiltonian and jump operators (rates absorbed as ``sqrt(rate) * c``)."""

    n_modes: int
    n_spins: int
    hamiltonian: OperatorPolynomial
    jumps: tuple[OperatorPolynomial, ...] = ()
    mode_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "jumps", tuple(self.jumps))
        for op in (self.hamiltonian, *self.jumps):
            if (op.n_modes, op.n_spins) != (self.n_modes, self.n_spins):
                raise StructuralError("operator index space differs from the model's")
        if not self.hamiltonian.is_hermitian(atol=1e-10):
            raise ValueError("Hamiltonian is not Hermitian")
        if self.mode_names is not None and len(self.mode_names) != self.n_modes:
            raise ValueError("mode_names must name every mode")

    def zero(self) -> OperatorPolynomial:
        return OperatorPolynomial.zero(self.n_modes, self.n_spins)

    def monomial(self, mono: Monomial) -> OperatorPolynomial:
        return OperatorPolynomial.from_monomial(mono, self.n_modes, self.n_spins)


def adjoint_lindblad(model: ModelSpec, obs: OperatorPolynomial) -> OperatorPolynomial:
    """Heisenberg-picture generator ``i[H, A] + sum_c (c^+ A c - {c^+ c, A}/2)``."""
    out = commutator(model.hamiltonian, obs).scale(1j)
    for c in model.jumps:
        cd = adjoint(c)
        cdc = multiply(cd, c)
        out = out + multiply(multiply(cd, obs), c) - anticommutator(cdc, obs).scale(0.5)
    return out


@dataclass(frozen=True)
class EomSystem:
    """Symbolic equations ``d<key>/dt = rhs`` for a tracked key set."""

    equations: tuple[tuple[Monomial, OperatorPolynomial], ...]

    @property
    def keys(self) -> tuple[Monomial, ...]:
        return tuple(k for k, _ in self.equations)

    def monomials(self) -> list[Monomial]:
        """Every monomial appearing on any right-hand side."""
        seen = set()
        for _, rhs in self.equations:
            seen.update(rhs.monomials())
        return sorted(seen)

    def boundary(self) -> list[Monomial]:
        """Right-hand-side monomials that are not themselves tracked (closure boundary)."""
        tracked = set(self.keys) | {k.dagger() for k in self.keys} | {IDENTITY}
        return [m for m in self.monomials() if m not in tracked]

    def __iter__(self):
        return iter(self.equations)

    def __len__(self):
        return len(self.equations)


def eom_system(model: ModelSpec, keys: Iterable[Monomial]) -> EomSystem:
    """Equations of motion of the expectation values addressed by ``keys``."""
    keys = list(keys)
    if len(set(keys)) != len(keys):
        raise ValueError("keys must be distinct")
    eqs = []
    for key in keys:
        key.check_space(model.n_modes, model.n_spins)
        eqs.append((key, adjoint_lindblad(model, model.monomial(key))))
    return EomSystem(tuple(eqs))


def transform_modes(op: OperatorPolynomial, matrix) -> OperatorPolynomial:
    """Substitute ``a_i -> sum_q matrix[i, q] b_q`` (and conjugate for creations).

    ``matrix`` is square over the boson modes; spins are untouched.
    """
    n = op.n_modes
    lowered = [
        OperatorPolynomial(
            {Monomial.make({q: (0, 1)}): complex(matrix[i][q]) for q in range(n)}, n, op.n_spins
        )
        for i in range(n)
    ]
    raised = [adjoint(x) for x in lowered]
    out = OperatorPolynomial.zero(n, op.n_spins)
    for mono, coef in op._terms.items():
        term = OperatorPolynomial.identity(n, op.n_spins, coef)
        # all creations first: the original modes commute, so this is the same operator
        for m, p, _ in mono.boson:
            for _ in range(p):
                term = multiply(term, raised[m])
        for m, _, q in mono.boson:
            for _ in range(q):
                term = multiply(term, lowered[m])
        for s, lab in mono.spin:
            term = multiply(term, spin_op(s, lab, n, op.n_spins))
        out = out + term
    return out
