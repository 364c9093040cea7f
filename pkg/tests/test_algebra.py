import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import dense, dense_monomial
from pvar.algebra import (
    IDENTITY, ModelSpec, Monomial, OperatorPolynomial, adjoint_lindblad, annihilation,
    commutator, creation, eom_system, monomial_product, spin_op, transform_modes,
)
from pvar.errors import StructuralError


def poly(n_modes, n_spins, terms):
    out = OperatorPolynomial.zero(n_modes, n_spins)
    for coef, boson, spin in terms:
        out = out + OperatorPolynomial.from_monomial(Monomial.make(boson, spin), n_modes, n_spins, coef)
    return out


def test_canonical_commutator():
    a, ad = annihilation(0, 1), creation(0, 1)
    assert (a * ad).allclose(ad * a + OperatorPolynomial.identity(1))
    assert commutator(a, ad).allclose(OperatorPolynomial.identity(1))


def test_reordering_closed_form():
    # a^2 a^+2 = a^+2 a^2 + 4 a^+ a + 2
    a, ad = annihilation(0, 1), creation(0, 1)
    lhs = a * a * ad * ad
    rhs = poly(1, 0, [(1, {0: (2, 2)}, None), (4, {0: (1, 1)}, None), (2, {}, None)])
    assert lhs.allclose(rhs)


def test_spin_products():
    sp_, sm, sz = (spin_op(0, lab, 0, 1) for lab in "+-z")
    one = OperatorPolynomial.identity(0, 1)
    assert (sp_ * sm).allclose((one + sz) * 0.5)
    assert (sm * sp_).allclose((one - sz) * 0.5)
    assert (sz * sz).allclose(one)
    assert (sp_ * sp_).is_zero()
    assert commutator(sp_, sm).allclose(sz)


def test_modes_commute():
    a0, a1d = annihilation(0, 2), creation(1, 2)
    assert commutator(a0, a1d).is_zero()


def test_out_of_range_mode():
    with pytest.raises(StructuralError):
        Monomial.make({2: (1, 0)}).check_space(2, 0)


def test_hermitian_check():
    a, ad = annihilation(0, 1), creation(0, 1)
    with pytest.raises(ValueError):
        ModelSpec(1, 0, a * 1j + ad, (), ("a",))


def test_decay_of_field_and_number():
    g = 0.7
    a, ad = annihilation(0, 1), creation(0, 1)
    model = ModelSpec(1, 0, OperatorPolynomial.zero(1), (a * np.sqrt(g),), ("a",))
    assert adjoint_lindblad(model, a).allclose(a * (-g / 2))
    assert adjoint_lindblad(model, ad * a).allclose(ad * a * (-g))


def test_eom_distinct_keys():
    model = ModelSpec(1, 0, OperatorPolynomial.zero(1), (), ("a",))
    k = Monomial.make({0: (0, 1)})
    with pytest.raises(ValueError):
        eom_system(model, [k, k])


def test_dagger_and_canonical():
    k = Monomial.make({0: (2, 1), 1: (0, 1)}, {0: "+"})
    assert k.dagger().dagger() == k
    assert k.canonical() == k.dagger().canonical()
    assert IDENTITY.is_identity()


def test_transform_modes_matches_dense():
    rng = np.random.default_rng(3)
    u, _ = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    op = poly(2, 0, [(0.3 + 0.1j, {0: (1, 1), 1: (0, 1)}, None), (1.2, {1: (2, 0)}, None)])
    new = transform_modes(op, u)
    # the substitution preserves the operator when both sides are built from
    # the same abstract modes: check a^+_0 a_0 + a^+_1 a_1 is invariant
    number = poly(2, 0, [(1, {0: (1, 1)}, None), (1, {1: (1, 1)}, None)])
    assert transform_modes(number, u).allclose(number, atol=1e-12)
    assert len(new) > 0


# -- randomized duality -------------------------------------------------------

KEEP = 4  # rho lives on the lowest KEEP levels of every mode


def _random_poly(rng, n_modes, n_spins, n_terms, max_exp):
    out = OperatorPolynomial.zero(n_modes, n_spins)
    for _ in range(n_terms):
        boson = {m: tuple(int(x) for x in rng.integers(0, max_exp + 1, 2)) for m in range(n_modes)}
        spin = {s: str(rng.choice(["+", "-", "z"])) for s in range(n_spins) if rng.random() < 0.6}
        coef = complex(rng.normal(), rng.normal())
        out = out + OperatorPolynomial.from_monomial(Monomial.make(boson, spin), n_modes, n_spins, coef)
    return out


def random_model(rng):
    n_modes = int(rng.integers(1, 3))
    n_spins = int(rng.integers(0, 2))
    h = _random_poly(rng, n_modes, n_spins, 3, 1)
    h = (h + h.dagger()) * 0.5
    jumps = tuple(_random_poly(rng, n_modes, n_spins, 2, 1) for _ in range(int(rng.integers(0, 4))))
    return ModelSpec(n_modes, n_spins, h, jumps)


def random_rho(rng, dims, n_modes):
    # support on the lowest KEEP Fock levels of every mode
    mask = np.ones(1, dtype=bool)
    for i, d in enumerate(dims):
        local = np.zeros(d, dtype=bool)
        local[: KEEP if i < n_modes else d] = True
        mask = np.kron(mask, local).astype(bool)
    k = int(mask.sum())
    x = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    small = x @ x.conj().T
    small /= np.trace(small)
    rho = np.zeros((mask.size, mask.size), dtype=complex)
    idx = np.flatnonzero(mask)
    rho[np.ix_(idx, idx)] = small
    return rho


def duality_gap(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    obs = _random_poly(rng, model.n_modes, model.n_spins, 3, 2)
    # enlarged space: every monomial involved acts exactly on the support of rho
    dims = [KEEP + 8] * model.n_modes + [2] * model.n_spins
    rho = random_rho(rng, dims, model.n_modes)
    h = dense(model.hamiltonian, dims)
    lrho = -1j * (h @ rho - rho @ h)
    for c in model.jumps:
        cm = dense(c, dims)
        cd = cm.conj().T
        lrho += cm @ rho @ cd - 0.5 * (cd @ cm @ rho + rho @ cd @ cm)
    lhs = np.trace(lrho @ dense(obs, dims))
    rhs = np.trace(rho @ dense(adjoint_lindblad(model, obs), dims))
    scale = max(1.0, abs(lhs))
    return abs(lhs - rhs) / scale


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_duality_property(seed):
    assert duality_gap(seed) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
def test_product_associativity(s1, s2, s3):
    polys = []
    for s in (s1, s2, s3):
        rng = np.random.default_rng(s)
        polys.append(_random_poly(rng, 2, 1, 2, 2))
    x, y, z = polys
    assert ((x * y) * z).allclose(x * (y * z), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_product_matches_dense(seed):
    rng = np.random.default_rng(seed)
    x = _random_poly(rng, 1, 1, 2, 2)
    y = _random_poly(rng, 1, 1, 2, 2)
    dims = [12, 2]
    # compare on states below level 4 so truncation never matters
    proj = np.zeros((24, 24))
    for n in range(4):
        for s in range(2):
            proj[2 * n + s, 2 * n + s] = 1
    lhs = proj @ dense(x * y, dims) @ proj
    rhs = proj @ dense(x, dims) @ dense(y, dims) @ proj
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_monomial_product_is_cached_tuple():
    m = Monomial.make({0: (0, 1)})
    out = monomial_product(m, m.dagger())
    assert isinstance(out, tuple) and len(out) == 2
