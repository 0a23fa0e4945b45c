import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from displab import funcalc as fc
from displab import potential as pot
from displab import propagator as prop
from displab.errors import DomainError, PreconditionError, UsageError

from conftest import rel


def test_free_kernel_dispersive_law():
    for t in (0.5, 1.0, 7.0):
        s = np.linspace(0, 20, 101)
        assert np.max(np.abs(prop.free_kernel(s, t, 4))) == pytest.approx((4 * math.pi * t) ** -2, rel=1e-14)
    with pytest.raises(DomainError):
        prop.free_kernel(1.0, 0.0)


def test_t0_matches_fourier_bessel():
    s = np.array([0.1, 0.5, 2.0, 9.0])
    a = prop.band_limited_kernel(fc.psi, 1.0, 0.0, s, 4)
    b = fc.psi_kernel(1.0, s, 4)
    assert np.max(np.abs(a - b)) < 1e-10 * np.max(np.abs(b))


def test_scaling_example():
    a = prop.band_limited_kernel(fc.psi, 3.0, 9.0, 3.0, 4)
    b = 3.0 ** -4 * prop.band_limited_kernel(fc.psi, 1.0, 1.0, 1.0, 4)
    assert abs(a - b) <= 1e-12 * abs(b)


@given(h=st.floats(0.2, 20.0), t=st.floats(-50.0, 50.0), s=st.floats(0.0, 30.0), n=st.sampled_from([4, 5]))
def test_prop_kernel_scaling(h, t, s, n):
    a = prop.band_limited_kernel(fc.psi, h, t * h * h, s * h, n)
    b = h ** -n * prop.band_limited_kernel(fc.psi, 1.0, t, s, n)
    assert abs(a - b) <= 1e-10 * abs(b) + 1e-300


@given(t=st.floats(0.1, 80.0), s=st.floats(0.0, 30.0))
def test_prop_time_symmetry(t, s):
    a = prop.band_limited_kernel(fc.psi, 1.0, -t, s, 4)
    b = prop.band_limited_kernel(fc.psi, 1.0, t, s, 4)
    assert abs(a - np.conj(b)) <= 1e-13 * abs(b) + 1e-300


def test_plancherel_mass_t_independent():
    ref = prop.plancherel_exact(4)
    for t in (1.0, 5.0, 25.0):
        assert prop.plancherel_mass(t, 4) == pytest.approx(ref, rel=1e-6)


def test_band_limited_sup_below_free_after_partition():
    # summing the dyadic psi-pieces over theta gives the eta_a kernel, whose sup obeys
    # the free dispersive law up to quadrature tolerance
    a, t = 0.05, 3.0
    s = np.linspace(0, 10, 41)
    k = prop.eta_kernel(a, t, s)
    assert np.max(np.abs(k)) <= (4 * math.pi * t) ** -2 * (1 + 1e-6)


def test_eta_kernel_two_assembly_routes():
    a, t = 0.05, 2.0
    s = np.array([0.0, 0.7, 3.0])
    assert rel(prop.synthesized_eta_kernel(a, t, s), prop.eta_kernel(a, t, s)) < 1e-6


@pytest.mark.parametrize("s", [0.0, 0.5, 1.5])
def test_kernel_bound_family(s):
    tg = (np.geomspace(1.0, 100.0, 17), np.geomspace(0.1, 100.0, 49))
    rep = prop.kernel_bound_report(s, 4, *tg, refined=(np.geomspace(1.0, 100.0, 33), np.geomspace(0.1, 100.0, 97)))
    assert rep.finite and rep.refinement_stable


def test_integrated_norm_zero():
    assert prop.integrated_V_norm(pot.zero_potential(), 8.0).value == 0.0


@pytest.mark.slow
def test_integrated_norm_slope_and_tail():
    V = pot.gaussian(0.1)
    a = prop.integrated_V_norm(V, 8.0)
    b = prop.integrated_V_norm(V, 16.0)
    assert b.value < a.value and math.log2(a.value / b.value) > 0
    c = prop.integrated_V_norm(V, 8.0, tau_max=128.0)
    assert abs(c.value - a.value) <= a.tail


def test_born_terms_vanish_for_zero_potential():
    for order in (1, 2):
        assert prop.born_term(order, pot.zero_potential(), 3.0, [0.0], [1.0]) == 0
    assert prop.F_kernel(pot.zero_potential(), 3.0, [0.0], [0.0]) == 0


def test_born_term_errors():
    V = pot.gaussian(0.1)
    with pytest.raises(DomainError):
        prop.born_term(1, V, 0.0, [0.0], [0.0])
    with pytest.raises(UsageError):
        prop.born_term(3, V, 1.0, [0.0], [0.0])


def test_born_order1_times_t2_bounded():
    V = pot.gaussian(0.1)
    vals = [abs(prop.born_term(1, V, t, [0.0], [1.0])) * t * t for t in (1.0, 4.0, 16.0, 64.0)]
    assert np.all(np.isfinite(vals)) and max(vals) < 10 * vals[0] + 1e-3


@pytest.mark.slow
def test_F_kernel_routes_agree():
    V = pot.gaussian(1.0)
    a = prop.F_kernel(V, 3.0, [0.0], [0.0], 4, route="direct")
    b = prop.F_kernel(V, 3.0, [0.0], [0.0], 4, route="U")
    assert abs(a - b) <= 1e-4 * abs(a)


def test_decay_report_free():
    tg = np.geomspace(1.0, 100.0, 9)
    rep = prop.dispersive_decay_report(pot.zero_potential(), 0.1, tg, 2, (4, 0))
    free = prop.free_band_limited_constant(0.1, tg)
    assert rep.max_normalized == pytest.approx(free, rel=1e-3)
    assert rep.drift < 0.01


def test_decay_report_resonant_potential_rejected():
    prof = pot.attractive_well(1.0)
    from displab.radial import RadialGrid
    g = pot.critical_coupling(prof, RadialGrid.geometric(4, 10.0))
    with pytest.raises(PreconditionError):
        prop.dispersive_decay_report(prof.with_coupling(g), 0.05, [1.0, 2.0], 1, (2, 0), refine=False)
