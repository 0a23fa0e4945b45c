import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from displab import potential as pot
from displab import resolvent as rs
from displab.envelope import log_grid
from displab.errors import DependencyError, DomainError
from displab.radial import DiscretizedOperator, RadialGrid

from conftest import rel

GRID = RadialGrid.geometric(4, 10.0, per_decade=6)


def test_zero_energy_two_routes():
    s = np.geomspace(1e-2, 1e2, 9)
    a = rs.free_resolvent_kernel(rs.ResolventPoint(0j, "plus", 1.0, 4), s)
    assert rel(a, 1 / (4 * math.pi ** 2 * s ** 2)) < 1e-12
    assert rel(a, -pot.newtonian_kernel(4, s)) < 1e-12


def test_zero_energy_is_small_z_limit():
    s = 1.3
    a = rs.free_resolvent_kernel(rs.ResolventPoint(1e-7 + 0j, "plus", 1.0, 4), s)
    b = rs.zero_energy_kernel(4, s)
    assert abs(a - b) / abs(b) < 1e-6


def test_scaling_example():
    z = 1 + 1j
    a = rs.free_resolvent_kernel(rs.ResolventPoint(z, "plus", 2.0, 4), 3.0)
    b = 2.0 ** -4 * rs.free_resolvent_kernel(rs.ResolventPoint(z, "plus", 1.0, 4), 1.5)
    assert abs(a - b) <= 1e-12 * abs(b)


@given(h=st.floats(0.1, 40.0), s=st.floats(0.01, 50.0), x=st.floats(0.3, 3.0), y=st.floats(0.0, 1.0),
       n=st.sampled_from([4, 5, 6]))
def test_prop_resolvent_scaling(h, s, x, y, n):
    z = complex(x, y)
    a = rs.free_resolvent_kernel(rs.ResolventPoint(z, "plus", h, n), s)
    b = h ** -n * rs.free_resolvent_kernel(rs.ResolventPoint(z, "plus", 1.0, n), s / h)
    assert abs(a - b) <= 1e-10 * abs(b)


@given(x=st.floats(0.3, 3.0), y=st.floats(0.0, 1.0), s=st.floats(0.01, 50.0))
def test_prop_branch_reflection(x, y, s):
    z = complex(x, y)
    a = rs.free_resolvent_kernel(rs.ResolventPoint(z, "plus", 1.0, 4), s)
    b = rs.free_resolvent_kernel(rs.ResolventPoint(z.conjugate(), "minus", 1.0, 4), s)
    assert abs(a - np.conj(b)) <= 1e-13 * abs(a)


def test_wrong_half_plane():
    with pytest.raises(DomainError):
        rs.ResolventPoint(1 - 1j, "plus")


def test_kernel_envelope_n5():
    rep = rs.kernel_envelope("2.9", 5, [1.0 + 0j], [1.0], log_grid(1e-3, 1e3, 6, 1), log_grid(1e-3, 1e3, 6, 2))
    assert rep.finite and rep.refinement_stable


def test_small_sigma_decay_envelope():
    g1, g2 = log_grid(1e-3, 1e3, 8, 1), log_grid(1e-3, 1e3, 8, 2)
    a = rs.resolvent_decay_envelope(4, 1.5 + 0.2j, g1, g2)
    b = rs.resolvent_decay_envelope(4, 1.5 + 0.4j, g1, g2)
    assert a.finite and a.refinement_stable
    assert b.fitted_constant <= a.fitted_constant * 2.0 ** 3     # envelope ratio |Im z|^-(n+2)/2
    with pytest.raises(DomainError):
        rs.resolvent_decay_envelope(4, 1.5, g1)


def test_decay_envelope_small_sigma_ratio_bounded():
    s = np.geomspace(1e-8, 1e-4, 5)
    rep = rs.resolvent_decay_envelope(4, 1.5 + 0.2j, s)
    r = [v / env for _, v, env in rep.rows]
    assert max(r) / min(r) < 1.01


def test_born_inverse_zero_potential():
    pr = rs.born_inverse(pot.zero_potential(), rs.ResolventPoint(1.2 + 0j, "plus", 3.0), GRID)
    assert np.array_equal(pr.inverse_factor.matrix, np.eye(GRID.size))


def test_born_inverse_neumann_oracle():
    V = pot.gaussian(1e-3)
    p = rs.ResolventPoint(1.2 + 0j, "plus", 10.0)
    pr = rs.born_inverse(V, p, GRID)
    A = rs.v_free_resolvent(V, p, GRID)
    I = DiscretizedOperator.identity(GRID)
    neu = I - A + A @ A
    assert pr.valid and (pr.inverse_factor - neu).norm_l1() < 1e-6


def test_born_inverse_residual():
    pr = rs.born_inverse(pot.gaussian(0.3), rs.ResolventPoint(1.1 + 0.2j, "plus", 4.0), GRID)
    assert pr.valid and pr.residual < 1e-6


def test_born_inverse_invalid_near_bound_state():
    prof = pot.attractive_well(1.0)
    g_star = pot.critical_coupling(prof, GRID)
    p = rs.ResolventPoint(0j, "plus", 10.0)
    assert rs.born_inverse(prof.with_coupling(0.5 * g_star), p, GRID).valid
    pr = rs.born_inverse(prof.with_coupling(g_star), p, GRID)
    assert not pr.valid or pr.smallest_singular < 1e-6


def test_zero_limit_identity():
    V = pot.gaussian(0.4)
    A = pot.zero_energy_operator(V, GRID).matrix
    for h in (1.0, 5.0):
        assert np.max(np.abs(rs.zero_limit_factor(V, GRID, h).matrix - A)) < 1e-10


def test_perturbed_minus_free_T_zero_potential():
    op = rs.perturbed_minus_free_T(pot.zero_potential(), rs.ResolventPoint(1.2 + 0.1j, "plus", 8.0), GRID)
    assert not np.any(op.matrix)


def test_perturbed_minus_free_T_needs_regular_zero():
    prof = pot.attractive_well(1.0)
    V = prof.with_coupling(pot.critical_coupling(prof, GRID))
    with pytest.raises(DependencyError):
        rs.perturbed_minus_free_T(V, rs.ResolventPoint(1.2 + 0.1j, "plus", 8.0), GRID)


def test_perturbed_minus_free_T_two_routes():
    V = pot.gaussian(0.1)
    p = rs.ResolventPoint(1.2 + 0.2j, "plus", 8.0)
    a = rs.perturbed_minus_free_T(V, p, GRID)
    b = rs.perturbed_minus_free_T_product(V, p, GRID)
    assert np.max(np.abs(a.matrix - b.matrix)) <= 1e-9 * np.max(np.abs(a.matrix))


def test_perturbed_minus_free_T_decreasing_in_h():
    V = pot.gaussian(0.1)
    z = 1.2 + 0.2j
    norms = []
    for h in (8.0, 16.0, 32.0):
        p = rs.ResolventPoint(z, "plus", h)
        norms.append(rs.perturbed_minus_free_T(V, p, GRID, out_grid=rs.wave_grid(p)).norm_l1())
    assert norms[0] > norms[1] > norms[2]
