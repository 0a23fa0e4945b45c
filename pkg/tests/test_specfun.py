import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from displab import specfun as sf
from displab.envelope import log_grid
from displab.errors import DomainError, RangeError

from conftest import rel

ORDERS = [sf.Order.of(v) for v in (1, 1.5, 2, 2.5, 3)]


def mp_hcal(nu, z, kind=1):
    f = mp.hankel1 if kind == 1 else mp.hankel2
    return complex(mp.mpc(z) ** nu * f(nu, z))


def mp_jcal(nu, z):
    return complex(mp.mpc(z) ** nu * mp.besselj(nu, z))


def test_half_integer_closed_form():
    h = sf.hankel_scaled(1.5, "plus", 1.0)
    ref = -math.sqrt(2 / math.pi) * np.exp(1j) * (1 + 1j)
    assert abs(h - ref) / abs(ref) < 1e-10


def test_jcal_half_integer_closed_form():
    ref = math.sqrt(2 / math.pi) * (math.sin(2) - 2 * math.cos(2))
    assert abs(sf.bessel_j_scaled(1.5, 2.0) - ref) / abs(ref) < 1e-10


def test_small_argument_limit_nu1():
    assert abs(sf.hankel_at_zero(1, "plus") - (-2j / math.pi)) < 1e-15
    assert abs(sf.hankel_scaled(1, "plus", 1e-7) - (-2j / math.pi)) < 1e-10


def test_minus_is_conjugate_on_real_axis():
    assert sf.hankel_scaled(1, "minus", 2.0) == pytest.approx(np.conj(sf.hankel_scaled(1, "plus", 2.0)), rel=1e-14)


def test_jcal_small_z():
    assert sf.bessel_j_scaled(1, 1e-3).real == pytest.approx(5e-7, rel=1e-3)


def test_jcal_is_mean_of_branches():
    h = sf.hankel_scaled(1, "plus", 5.0) + sf.hankel_scaled(1, "minus", 5.0)
    assert abs(sf.bessel_j_scaled(1, 5.0) - 0.5 * h) < 1e-12


@pytest.mark.parametrize("order", ORDERS, ids=lambda o: f"nu={o.nu}")
def test_hankel_against_mpmath(order):
    zs = [0.05, 0.7, 3.0, 11.9, 12.1, 40.0, 300.0, 2 + 1j, 8 + 2.5j, 15 + 4j, 0.3 + 0.3j]
    for z in zs:
        ref = mp_hcal(order.nu, z)
        assert abs(sf.hankel_scaled(order, "plus", z) - ref) / abs(ref) < 1e-10, z


@pytest.mark.parametrize("order", ORDERS, ids=lambda o: f"nu={o.nu}")
def test_jcal_against_mpmath(order):
    for z in (1e-3, 0.5, 5.0, 12.0, 30.0, 200.0, 3 + 1j):
        ref = mp_jcal(order.nu, z)
        assert abs(sf.bessel_j_scaled(order, z) - ref) <= 1e-10 * max(abs(ref), 1e-300) + 1e-15 * abs(z) ** order.nu


def test_switchover_continuity():
    for o in (sf.Order.of(1), sf.Order.of(2)):
        r = sf.SERIES_RADIUS
        a = sf.hankel_scaled(o, "plus", r * (1 - 1e-12))
        b = sf.hankel_scaled(o, "plus", r * (1 + 1e-12))
        assert abs(a - b) / abs(a) < 1e-9


def test_domain_and_range_errors():
    with pytest.raises(DomainError):
        sf.hankel_scaled(1, "plus", 1 - 1j)
    with pytest.raises(DomainError):
        sf.hankel_scaled(1, "minus", 1 + 1j)
    with pytest.raises(RangeError):
        sf.hankel_scaled(1, "plus", 1e7)
    with pytest.raises(DomainError):
        sf.amplitude_b(1, "plus", -1.0)
    with pytest.raises(DomainError):
        sf.Order.of(0.3)


def test_amplitude_reconstruction():
    z = 1.0
    bp, bm = sf.amplitude_b(1.5, "plus", z), sf.amplitude_b(1.5, "minus", z)
    j = np.exp(1j * z) * bp + np.exp(-1j * z) * bm
    assert abs(j - sf.bessel_j_scaled(1.5, z)) < 1e-10


def test_amplitude_symbol_order():
    # |b_1(z)| / z^(1/2) settles to a constant on a dyadic grid
    z = 100.0 * 2.0 ** np.arange(6)
    r = np.abs(sf.amplitude_b(1, "plus", z)) / np.sqrt(z)
    assert np.max(np.abs(r / r[-1] - 1)) < 0.01


def test_amplitude_small_z_bounded():
    z = np.geomspace(1e-6, 1e-2, 9)
    b = np.abs(sf.amplitude_b(2, "plus", z))
    assert np.all(np.isfinite(b)) and b.max() < 2 * abs(sf.hankel_at_zero(2))


def test_derivative_recurrence_matches_finite_difference():
    z, d = 3.7, 1e-5
    for o in (sf.Order.of(1), sf.Order.of(1.5)):
        fd = (sf.bessel_j_scaled(o, z + d) - sf.bessel_j_scaled(o, z - d)) / (2 * d)
        assert abs(sf.bessel_j_scaled_deriv(o, z, 1) - fd) < 1e-8
        fd = (sf.amplitude_b(o, "plus", z + d) - sf.amplitude_b(o, "plus", z - d)) / (2 * d)
        assert abs(sf.amplitude_b_deriv(o, "plus", z, 1) - fd) < 1e-8


def test_hankel_envelope_nu1_stable():
    rep = sf.check_hankel_envelope(1, sf.half_plane_grid(level=1), sf.half_plane_grid(level=2))
    assert rep.finite and rep.refinement_stable


def test_hankel_envelope_nu32_closed_form_bound():
    x = log_grid(1e-2, 1e2, 8, 1)
    rep = sf.check_hankel_envelope(1.5, x.astype(complex), log_grid(1e-2, 1e2, 8, 2).astype(complex))
    assert rep.fitted_constant <= math.sqrt(2 / math.pi) * math.sqrt(2) * (1 + 1e-9)


def test_envelope_single_point_deep_in_plane():
    rep = sf.check_hankel_envelope(2, np.array([10j]))
    assert rep.finite


def test_derivative_envelope_stable():
    rep = sf.check_hankel_difference_envelope(1, sf.half_plane_grid(level=1), sf.half_plane_grid(level=2))
    assert rep.finite and rep.refinement_stable


@given(x=st.floats(0.01, 500.0), o=st.sampled_from(ORDERS))
def test_prop_conjugate_symmetry(x, o):
    p, m = sf.hankel_scaled(o, "plus", x), sf.hankel_scaled(o, "minus", x)
    assert abs(m - np.conj(p)) <= 1e-14 * abs(p)
    assert abs(sf.bessel_j_scaled(o, x).imag) <= 1e-12 * max(1.0, abs(p))


@given(x=st.floats(0.05, 60.0), y=st.floats(0.0, 5.0), o=st.sampled_from(ORDERS))
def test_prop_wronskian_like_recurrence(x, y, o):
    # H_{nu+1} = (2 nu / z) H_nu - H_{nu-1}, written for the scaled functions
    z = complex(x, y)
    hm = sf.hankel_scaled(o.shifted(-1), "plus", z)
    h0 = sf.hankel_scaled(o, "plus", z)
    hp = sf.hankel_scaled(o.shifted(1), "plus", z)
    lhs = hp
    rhs = 2 * o.nu * h0 - z * z * hm
    assert abs(lhs - rhs) <= 1e-9 * max(abs(lhs), abs(2 * o.nu * h0), 1e-300)
