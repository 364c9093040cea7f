import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pvar.algebra import Monomial, eom_system
from pvar.models import JcParams, free_cavity, jaynes_cummings
from pvar.moments import Ansatz, Coherent, ModeAnsatz, SpinAnsatz, Squeezed, Thermal
from pvar.variational import (
    CompiledCost, MinimizeOptions, ParameterSchema, cost, least_squares_start, mean_field_starts,
    minimize, residuals, seeded_template, tracked_keys,
)


def cavity_template(alpha=0j):
    return Ansatz((ModeAnsatz((Coherent(alpha),)),))


def test_jc_first_order_keys():
    keys = tracked_keys(1, 1, 1)
    assert set(keys) == {Monomial.make({0: (0, 1)}), Monomial.make(None, {0: "-"}), Monomial.make(None, {0: "z"})}
    assert len(keys) == 3


def test_key_sets_grow_monotonically():
    for n_modes, n_spins in ((1, 0), (1, 1), (2, 0)):
        prev = set()
        for order in (1, 2, 3):
            cur = set(tracked_keys(n_modes, n_spins, order))
            assert prev < cur
            prev = cur


def test_keys_distinct_up_to_conjugation():
    keys = tracked_keys(2, 1, 2)
    canon = {k.canonical() for k in keys}
    assert len(canon) == len(keys)


def test_cavity_residual_closed_form():
    delta, p, kappa = 0.5, 0.7, 1.1
    system = eom_system(free_cavity(delta, p, kappa), tracked_keys(1, 0, 1))
    alpha = 0.3 - 0.2j
    res = residuals(cavity_template(alpha), system)[Monomial.make({0: (0, 1)})]
    assert res == pytest.approx(-(kappa / 2 + 1j * delta) * alpha - 1j * p)


def test_cost_is_linear_in_weight_scale():
    system = eom_system(free_cavity(0.5, 0.7, 1.1), tracked_keys(1, 0, 2))
    ans = cavity_template(0.4)
    base = cost(ans, system).total
    assert cost(ans, system, scale=3.0).total == pytest.approx(3 * base)


def test_compiled_matches_direct():
    model = jaynes_cummings(JcParams(g=0.8, p=0.4, kappa=1.0, gamma=2.0, delta_c=0.3))
    system = eom_system(model, tracked_keys(1, 1, 2))
    ans = Ansatz((ModeAnsatz((Coherent(0.3 + 0.1j), Thermal(0.2))),), (SpinAnsatz((0.1, 0.2, -0.6)),))
    compiled = CompiledCost(system, ans)
    d, _, _ = compiled.evaluate(ans)
    assert d == pytest.approx(cost(ans, system).total, rel=1e-12)


def alpha0(delta, p, kappa):
    return -1j * p / (kappa / 2 + 1j * delta)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 2), st.floats(0.2, 3))
def test_cavity_minimum_is_exact(delta, p, kappa):
    # the vacuum is a local minimum of D for strong drive, so seed from mean-field roots
    model = free_cavity(delta, p, kappa)
    starts = [seeded_template(cavity_template(), r) for r in mean_field_starts(model)]
    res = minimize(model, cavity_template(), MinimizeOptions(n_starts=2, seed=0), starts=starts)
    assert res.D < 1e-10
    got = res.ansatz.modes[0].components[0].alpha
    assert abs(got - alpha0(delta, p, kappa)) < 1e-6 * max(1.0, abs(got))


def test_vacuum_is_a_local_minimum_under_strong_drive():
    res = minimize(free_cavity(0.0, 1.0, 1.0), cavity_template(), MinimizeOptions(n_starts=2))
    assert res.D == pytest.approx(1.0)


def test_undriven_cavity_relaxes_to_vacuum():
    res = minimize(free_cavity(0.3, 0.0, 1.0), cavity_template(0.5), MinimizeOptions(n_starts=2))
    assert abs(res.ansatz.modes[0].components[0].alpha) < 1e-6


def test_schema_round_trip():
    ans = Ansatz((ModeAnsatz((Coherent(0.2 - 0.1j), Squeezed(0.3, 0.4), Thermal(0.5))),),
                 (SpinAnsatz((0.1, -0.2, 0.3)),))
    schema = ParameterSchema(ans)
    back = schema.unpack(schema.pack(ans))
    assert np.allclose(schema.pack(back), schema.pack(ans))
    frozen = ParameterSchema(ans, frozen=["spin0.x"])
    assert frozen.size == schema.size - 1
    with pytest.raises(KeyError):
        ParameterSchema(ans, frozen=["nope"])


def test_minimize_is_deterministic():
    model = jaynes_cummings(JcParams(g=1.0, p=0.5, kappa=1.0, gamma=4.0))
    tmpl = Ansatz((ModeAnsatz((Coherent(0j),)),), (SpinAnsatz((0, 0, -1)),))
    opts = MinimizeOptions(n_starts=3, seed=7, max_evals=1500)
    r1, r2 = minimize(model, tmpl, opts), minimize(model, tmpl, opts)
    assert r1.D == r2.D
    assert r1.ansatz == r2.ansatz


def test_global_phase_invariance():
    # rotating the drive phase rotates the optimum and leaves D unchanged
    phase = np.exp(0.7j)
    system = eom_system(free_cavity(0.4, 0.6, 1.0), tracked_keys(1, 0, 2))
    a = alpha0(0.4, 0.6, 1.0)
    d1 = cost(cavity_template(a), system).total
    d2 = cost(cavity_template(a * phase), system).total
    assert d1 < 1e-12 and d2 > 1e-3


def test_mean_field_starts_linear_cavity():
    roots = mean_field_starts(free_cavity(0.4, 0.6, 1.0))
    assert len(roots) == 1
    assert roots[0][0] == pytest.approx(alpha0(0.4, 0.6, 1.0), abs=1e-9)
    with pytest.raises(ValueError):
        mean_field_starts(jaynes_cummings(JcParams(g=1.0)))


def test_seeded_template_and_least_squares():
    tmpl = Ansatz((ModeAnsatz((Coherent(0j), Thermal(0.1))),))
    seeded = seeded_template(tmpl, [0.5j])
    assert seeded.modes[0].components[0].alpha == 0.5j
    assert seeded.modes[0].components[1] == Thermal(0.1)
    fit = least_squares_start(free_cavity(0.4, 0.6, 1.0), cavity_template(), MinimizeOptions(order=1))
    assert abs(fit.modes[0].components[0].alpha - alpha0(0.4, 0.6, 1.0)) < 1e-8
