import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import (
    coherent_ket, displacement, fock_ket, fock_moment_table, squeeze, squeezed_vacuum_ket,
    thermal_rho,
)
from pvar.algebra import Monomial
from pvar.errors import MomentOrderError, UnphysicalMomentsError
from pvar.moments import (
    Ansatz, Cat, Coherent, Fock, ModeAnsatz, SpinAnsatz, Squeezed, SqueezedFock, SqueezedThermal,
    Thermal, ansatz_moment, component_moment, convolve_moment, convolved_table, moment_table,
    squeezing_of,
)

N = 160
ORDER = 6


def reference_rho(comp):
    """Independent truncated-Fock density matrix for a component state."""
    if isinstance(comp, Coherent):
        v = coherent_ket(comp.alpha, N)
        return np.outer(v, v.conj())
    if isinstance(comp, Thermal):
        return thermal_rho(comp.n0, N)
    if isinstance(comp, Fock):
        v = fock_ket(comp.l, N)
        return np.outer(v, v.conj())
    if isinstance(comp, Squeezed):
        v = squeezed_vacuum_ket(comp.r, comp.phi, N)
        return np.outer(v, v.conj())
    if isinstance(comp, SqueezedThermal):
        s = squeeze(comp.r, comp.phi, N)
        return s @ thermal_rho(comp.n0, N) @ s.conj().T
    if isinstance(comp, SqueezedFock):
        v = squeeze(comp.r, comp.phi, N) @ fock_ket(comp.l, N)
        return np.outer(v, v.conj())
    if isinstance(comp, Cat):
        v = coherent_ket(comp.alpha1, N) + comp.theta * coherent_ket(comp.alpha2, N)
        v /= np.linalg.norm(v)
        return np.outer(v, v.conj())
    raise TypeError(comp)


def displaced(rho, alpha):
    # displace in a doubled space so the truncated exponential is exact on the
    # levels that matter, then project back
    big = np.zeros((3 * N, 3 * N), dtype=complex)
    big[:N, :N] = rho
    d = displacement(alpha, 3 * N)
    return (d @ big @ d.conj().T)[:N, :N]


FAMILIES = [
    Coherent(0.6 - 0.4j), Thermal(0.3), Fock(3), Squeezed(0.4, 1.1),
    SqueezedThermal(0.2, 0.3, 2.0), SqueezedFock(1, 0.3, 0.7), Cat(0.9, -0.9, 1.0),
    Cat(0.5j, 1.0, 0.4 - 0.3j),
]


@pytest.mark.parametrize("comp", FAMILIES, ids=lambda c: type(c).__name__)
def test_component_moments_match_fock(comp):
    ref = fock_moment_table(reference_rho(comp), N, ORDER)
    got = moment_table(comp, ORDER)
    assert np.max(np.abs(got - ref)) < 1e-8


# Gallery pairs: the convolution of a state with a coherent P is a displacement;
# thermal with thermal adds occupations; Fock/squeezed pairs use the Fock
# reference of the combined state where it is known in closed form.
def test_convolution_with_coherent_is_displacement():
    for comp in (Thermal(0.1), Fock(1), Squeezed(0.5, 0.0), Fock(2), Squeezed(1.0, -math.pi / 2)):
        for alpha in (1j, 1.0):
            ref = fock_moment_table(displaced(reference_rho(comp), alpha), N, ORDER)
            got = convolved_table([comp, Coherent(alpha)], ORDER)
            assert np.max(np.abs(got - ref)) < 1e-8


def test_thermal_thermal_adds():
    got = convolved_table([Thermal(0.1), Thermal(1e-3)], ORDER)
    assert np.allclose(got, moment_table(Thermal(0.101), ORDER), atol=1e-12)


def test_coherent_coherent_adds():
    got = convolved_table([Coherent(1j), Coherent(1.0)], ORDER)
    assert np.allclose(got, moment_table(Coherent(1 + 1j), ORDER), atol=1e-10)


def test_squeezed_thermal_convolution_is_gaussian():
    # P convolution adds the normally ordered covariances N and M
    r, phi, n0 = 0.5, 0.0, 0.1
    sq = Squeezed(r, phi)
    conv = convolved_table([sq, Thermal(n0)], ORDER)
    n_sq = math.sinh(r) ** 2
    m_sq = -cmath.exp(1j * phi) * math.sinh(r) * math.cosh(r)
    from pvar.moments import gaussian_moment
    for p in range(ORDER + 1):
        for q in range(ORDER + 1 - p):
            assert abs(conv[p, q] - gaussian_moment(n_sq + n0, m_sq, p, q)) < 1e-10


def test_fock_fock_convolution_against_binomial_sum():
    t = convolved_table([Fock(1), Fock(2)], ORDER)
    # <a^+k a^k> of the sum of two independent P-variables with only diagonal moments
    for k in range(ORDER // 2 + 1):
        direct = sum(math.comb(k, j) ** 2 * component_moment(Fock(1), j, j)
                     * component_moment(Fock(2), k - j, k - j) for j in range(k + 1))
        assert abs(t[k, k] - direct) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 3), st.floats(0, 1.2), st.floats(-7, 7))
def test_intensity_difference_identity(n0, r, phi):
    st_ = component_moment(SqueezedThermal(n0, r, phi), 1, 1)
    conv = convolve_moment([Squeezed(r, phi), Thermal(n0)], 1, 1)
    assert abs((st_ - conv) - 2 * n0 * math.sinh(r) ** 2) <= 1e-12 * max(1.0, abs(st_))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(FAMILIES), st.integers(0, 4), st.integers(0, 4))
def test_conjugation_symmetry(comp, p, q):
    assert abs(component_moment(comp, p, q) - np.conj(component_moment(comp, q, p))) < 1e-10


def test_order_limit():
    with pytest.raises(MomentOrderError):
        component_moment(Thermal(0.2), 10, 10, max_order=16)


def test_invalid_components():
    with pytest.raises(ValueError):
        Thermal(-0.1)
    with pytest.raises(ValueError):
        Fock(1.5)
    with pytest.raises(ValueError):
        Squeezed(-0.1, 0.0)
    with pytest.raises(ValueError):
        ModeAnsatz((Cat(1, 2), Cat(1, -1)))


def test_phase_canonicalized():
    assert Squeezed(0.3, -math.pi / 2).phi == pytest.approx(1.5 * math.pi)


def test_spin_expectations():
    s = SpinAnsatz((0.2, -0.4, 0.5))
    assert s.expectation("-") == pytest.approx(0.1 + 0.2j)
    assert s.expectation("+") == pytest.approx(0.1 - 0.2j)
    assert s.expectation("z") == pytest.approx(0.5)
    with pytest.raises(ValueError):
        SpinAnsatz((1.0, 1.0, 0.0))


def test_correlation_cluster_expansion():
    k01 = Monomial.make({0: (0, 1), 1: (0, 1)})
    ans = Ansatz((ModeAnsatz((Coherent(0.5),)), ModeAnsatz((Coherent(-0.2j),))),
                 correlations={k01: 0.3 + 0.1j})
    assert ansatz_moment(ans, k01) == pytest.approx(0.5 * -0.2j + 0.3 + 0.1j)
    # conjugate key
    assert ansatz_moment(ans, k01.dagger()) == pytest.approx(np.conj(0.5 * -0.2j + 0.3 + 0.1j))
    # a0 a1^2 picks up 2 <a1> delta
    k = Monomial.make({0: (0, 1), 1: (0, 2)})
    expect = 0.5 * (-0.2j) ** 2 + 2 * (-0.2j) * (0.3 + 0.1j)
    assert ansatz_moment(ans, k) == pytest.approx(expect)


def test_product_state_matches_dense_two_modes():
    from helpers import dense_monomial
    a1, a2 = 0.4 + 0.2j, -0.3j
    ans = Ansatz((ModeAnsatz((Coherent(a1), Thermal(0.2))), ModeAnsatz((Coherent(a2),))))
    n = 30
    d1 = displacement(a1, n)
    rho1 = d1 @ thermal_rho(0.2, n) @ d1.conj().T
    v2 = coherent_ket(a2, n)
    rho = np.kron(rho1, np.outer(v2, v2.conj()))
    for key in (Monomial.make({0: (1, 1), 1: (0, 1)}), Monomial.make({0: (0, 2), 1: (1, 0)})):
        ref = np.trace(rho @ dense_monomial(key, [n, n], 2))
        assert abs(ansatz_moment(ans, key) - ref) < 1e-8


def test_squeezing_extractor():
    r, phi = 0.4, 1.0
    comp = Squeezed(r, phi)
    sq = squeezing_of(0, component_moment(comp, 1, 1).real, component_moment(comp, 0, 2))
    assert sq.r == pytest.approx(r, abs=1e-12)
    assert sq.phi == pytest.approx(phi, abs=1e-12)
    assert squeezing_of(0.3, 0.09, 0.09).r == 0.0
    with pytest.raises(UnphysicalMomentsError):
        squeezing_of(0, 0.0, 2.0)
