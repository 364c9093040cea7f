import numpy as np
import pytest

from pvar.bistability import (
    branch_norm, branch_select, fixed_points, maxwell_bloch_fixed_points, mean_field_rhs,
)
from pvar.models import JcParams

BISTABLE = JcParams(g=2.0, kappa=0.1, gamma=2.0, delta_c=0.0, delta_a=0.0)


@pytest.mark.parametrize("p", [0.05, 0.3, 0.7, 2.0])
def test_fixed_points_solve_mean_field(p):
    for fp in fixed_points(BISTABLE, p):
        da, dsm, dsz = mean_field_rhs(BISTABLE.replace(p=p), fp.a, fp.sigma_minus, fp.sigma_z)
        assert abs(da) < 1e-9 and abs(dsm) < 1e-9 and abs(dsz) < 1e-9


def test_undriven_fixed_point_is_ground_state():
    (fp,) = fixed_points(BISTABLE, 0.0)
    assert fp.a == 0 and fp.sigma_z == -1


def test_uncoupled_limit_is_linear_cavity():
    params = JcParams(g=0.0, kappa=0.5, gamma=1.0, delta_c=0.2)
    (fp,) = fixed_points(params, 0.4)
    assert fp.a == pytest.approx(-0.4j / (0.5 + 0.2j))


def test_three_solutions_inside_window():
    scan = maxwell_bloch_fixed_points(BISTABLE, np.linspace(0.01, 3, 120))
    counts = [len(s) for s in scan.solutions]
    assert 3 in counts and counts[0] == 1 and counts[-1] == 1
    lo, hi = scan.interval()
    assert lo < hi


def test_branch_select_without_bistability_takes_unique_point():
    scan = maxwell_bloch_fixed_points(BISTABLE, [0.01])
    sel = branch_select(BISTABLE, scan)
    assert sel.crossings == () and sel.choices[0].chosen == scan.solutions[0][0]


def test_branch_norm_first_order_ties():
    # at order 1 every mean-field root makes the factorized residuals vanish
    p = 0.6
    sols = fixed_points(BISTABLE, p)
    assert len(sols) == 3
    for fp in sols:
        assert branch_norm(BISTABLE, fp, p, order=1) < 1e-9
