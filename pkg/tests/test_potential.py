import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from displab import potential as pot
from displab import resolvent as rs
from displab.errors import UsageError
from displab.radial import DiscretizedOperator, RadialGrid

GRID = RadialGrid.geometric(4, 10.0, per_decade=6)


def test_newton_n4():
    assert pot.newtonian_kernel(4, 1.0) == pytest.approx(-1 / (4 * math.pi ** 2), rel=1e-15)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_newton_two_routes(n):
    s = np.array([0.3, 2.0])
    a = pot.newtonian_kernel(n, s)
    b = -rs.zero_energy_kernel(n, s)
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_newton_n6_value():
    c6 = 1 / (4 * math.pi ** 3)
    assert pot.newtonian_kernel(6, 2.0) == pytest.approx(-c6 * 2.0 ** -4, rel=1e-14)


def test_condition_14_power_law():
    assert pot.check_condition("1.4", pot.power_law(3 + 0.1)).passed
    res = pot.check_condition("1.4", pot.power_law(3 - 0.5))
    assert not res.passed and "exponent" in res.detail


def test_condition_13_gaussian_closed_form():
    # V^ = pi^2 exp(-|xi|^2 / 4) in R^4, so int |V^| = pi^2 (4 pi)^2
    res = pot.check_condition("1.3", pot.gaussian(1.0))
    assert res.passed and res.margin == pytest.approx(16 * math.pi ** 4, rel=1e-8)


def test_condition_11_and_16():
    assert pot.check_condition("1.1", pot.power_law(3.5)).passed
    assert not pot.check_condition("1.1", pot.power_law(2.5)).passed
    assert pot.check_condition("1.6", pot.gaussian(1.0)).passed
    with pytest.raises(UsageError):
        pot.check_condition("9.9", pot.gaussian(1.0))


@given(d1=st.floats(3.2, 6.0), extra=st.floats(0.0, 2.0), c=st.floats(0.1, 1.0))
def test_prop_condition_monotone(d1, extra, c):
    # V2 = c <r>^-(d1+extra) is dominated by V1 = <r>^-d1
    V1, V2 = pot.power_law(d1), pot.power_law(d1 + extra, c)
    for cond in ("1.4", "1.6"):
        if pot.check_condition(cond, V1).passed:
            assert pot.check_condition(cond, V2).passed


def test_resonance_zero_potential_identity():
    rep, T = pot.resonance_test(pot.zero_potential(), GRID)
    assert rep.regular and np.array_equal(T.matrix, np.eye(GRID.size))


def test_resonance_neumann_oracle():
    V = pot.gaussian(1e-2)
    _, T = pot.resonance_test(V, GRID, refine=False)
    assert (T - pot.neumann_T(V, GRID)).norm_l1() < 1e-6


def test_T_inverts_zero_energy_operator():
    V = pot.gaussian(0.5)
    rep, T = pot.resonance_test(V, GRID)
    A = pot.zero_energy_operator(V, GRID)
    assert rep.regular and (T @ A - DiscretizedOperator.identity(GRID)).norm_l1() < 1e-6


def test_coupling_sweep_crossing():
    sw = pot.coupling_sweep(pot.attractive_well(1.0), GRID)
    assert sw.monotone_before_critical and math.isfinite(sw.critical_coupling)
    assert sw.singular_at_critical < 1e-8
    rep, T = pot.resonance_test(pot.attractive_well(sw.critical_coupling), GRID)
    assert not rep.regular and T is None


def test_zero_limit_consistency():
    V = pot.gaussian(0.2)
    A = pot.zero_energy_operator(V, GRID).matrix
    for h in (2.0, 30.0):
        assert np.max(np.abs(rs.zero_limit_factor(V, GRID, h).matrix - A)) < 1e-10


def test_presets():
    for k in pot.PRESETS:
        V = pot.make_potential(k, 0.5)
        assert np.all(np.isfinite(V.value(np.linspace(0, 20, 50))))
    with pytest.raises(UsageError):
        pot.make_potential("nope")
