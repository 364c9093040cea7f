import numpy as np
import pytest

from pvar.algebra import Monomial, OperatorPolynomial
from pvar.errors import CapacityError, TruncationError
from pvar.models import JcParams, free_cavity, jaynes_cummings
from pvar.oracle import TruncationSpec, apply_liouvillian, build_liouvillian, exact_moment, solve


def alpha0(delta, p, kappa):
    return -1j * p / (kappa / 2 + 1j * delta)


def test_driven_cavity_is_coherent():
    delta, p, kappa = 0.4, 0.8, 1.3
    res = solve(free_cavity(delta, p, kappa), 25)
    a = alpha0(delta, p, kappa)
    assert exact_moment(res, Monomial.make({0: (0, 1)})) == pytest.approx(a, abs=1e-9)
    assert exact_moment(res, Monomial.make({0: (1, 1)})) == pytest.approx(abs(a) ** 2, abs=1e-9)
    assert res.purity == pytest.approx(1.0, abs=1e-8)


def test_jc_without_drive_is_dark():
    res = solve(jaynes_cummings(JcParams(g=1.0, kappa=1.0, gamma=1.0)), 6)
    assert exact_moment(res, Monomial.make({0: (1, 1)})) == pytest.approx(0, abs=1e-12)
    assert exact_moment(res, Monomial.make(None, {0: "z"})) == pytest.approx(-1, abs=1e-12)


def test_superoperator_matches_dense_action():
    model = jaynes_cummings(JcParams(delta_c=0.3, delta_a=-0.2, g=0.7, p=0.5, kappa=0.4, gamma=0.9))
    trunc = TruncationSpec.uniform(model, 5)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    rho = x @ x.conj().T
    vec = build_liouvillian(model, trunc) @ rho.reshape(-1, order="F")
    assert np.allclose(vec.reshape(10, 10, order="F"), apply_liouvillian(model, trunc, rho))


def test_trace_preservation():
    model = jaynes_cummings(JcParams(g=0.7, p=0.5, kappa=0.4, gamma=0.9))
    trunc = TruncationSpec.uniform(model, 4)
    lv = build_liouvillian(model, trunc).toarray()
    trace_row = np.eye(8).reshape(-1, order="F")
    assert np.allclose(trace_row @ lv, 0, atol=1e-12)


def test_capacity_cap():
    with pytest.raises(CapacityError):
        TruncationSpec((100, 100), 0, dim_cap=4096)


def test_strict_truncation():
    with pytest.raises(TruncationError):
        solve(free_cavity(0.0, 3.0, 1.0), 8, strict=True)
    with pytest.warns(RuntimeWarning):
        res = solve(free_cavity(0.0, 3.0, 1.0), 8)
    assert res.warnings


def test_steady_state_is_physical():
    res = solve(jaynes_cummings(JcParams(g=1.0, p=0.6, kappa=1.0, gamma=2.0)), 12)
    assert res.min_eigenvalue() > -1e-10
    assert np.trace(res.rho).real == pytest.approx(1.0)
    assert res.residual < 1e-10
