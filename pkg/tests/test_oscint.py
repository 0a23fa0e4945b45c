import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from displab import oscint as oi
from displab.errors import DomainError


def test_U_zero_closed_form():
    ref = (1 + 4 / 3 * math.log(2)) / 9
    assert abs(oi.U_eval(0.0, 0.0, 3.0, 4) - ref) < 1e-10
    assert oi.U_closed_form_zero(3.0) == pytest.approx(ref, rel=1e-14)
    assert ref == pytest.approx(0.213800, abs=1e-6)


def test_U_against_mpmath():
    s1, s2, t = 0.7, 2.3, 5.0
    f = lambda tau: mp.expj(s1 / (t - tau) + s2 / tau) * ((t - tau) * tau) ** -2
    ref = complex(mp.quad(f, mp.linspace(1, t - 1, 9)))
    assert abs(oi.U_eval(s1, s2, t, 4) - ref) < 1e-10 * abs(ref)


def test_U_empty_range():
    r = oi.U_eval(1.0, 2.0, 2.0, 4, info=True)
    assert r.empty and r.value == 0


@given(s1=st.floats(0.0, 100.0), s2=st.floats(0.0, 100.0), t=st.floats(2.1, 40.0))
def test_prop_U_swap(s1, s2, t):
    a, b = oi.U_eval(s1, s2, t), oi.U_eval(s2, s1, t)
    assert abs(a - b) <= 1e-13 * abs(a) + 1e-300


def test_u_empty_range():
    assert oi.u_eval(1.0, 2.0, 0.5) == 0


def test_u_direct_vs_contour():
    a = oi.u_eval(0.0, 1.0, 0.1, 4, "direct")
    b = oi.u_eval(0.0, 1.0, 0.1, 4, "contour")
    assert abs(a - b) < 1e-6


def test_u_direct_vs_contour_case_two():
    a = oi.u_eval(3.0, 3.0, 0.05, 4, "direct")
    b = oi.u_eval(3.0, 3.0, 0.05, 4, "contour")
    assert abs(a - b) < 1e-8 * max(1.0, abs(a))


def test_u_domain():
    with pytest.raises(DomainError):
        oi.u_eval(1.0, 1.0, 0.7)


def test_classify_examples():
    p = oi.classify_case(0.0, 1.0, 0.2)
    assert p.mu0 == 1.0 and p.case == "one"
    p = oi.classify_case(2.0, 2.0, 0.1)
    assert p.mu0 == 2.0 and p.case == "two"
    p = oi.classify_case(1e6, 1.0, 0.4)
    assert p.mu0 == pytest.approx(1001.0) and p.case == "one"
    assert oi.classify_case(1.0, 0.0, 0.2).degenerate


def test_contour_identity():
    assert oi.identity_B7_check(5, seed=3) < 1e-8


def test_rho_vanishes_off_support():
    u1 = np.linspace(0.0, 10.0, 21)
    for u2 in (0.5, 0.99, 2.0, 3.0):
        assert not np.any(oi.rho_function(u1, u2))


def test_W1_scaling():
    spec = oi.WPieceSpec("W1", 4.0 * 4, 0.2 * 4, 1.0 * 2, 0.7 * 2)
    a = oi.W_eval(spec, 2.0, 4)
    b = 2.0 ** (-6) * oi.W1_eval(oi.WPieceSpec("W1", 4.0, 0.2, 1.0, 0.7))
    assert abs(a - b) <= 1e-6 * abs(b)


def test_W1_two_routes():
    spec = oi.WPieceSpec("W1", 5.0, 0.2, 1.3, 0.8)
    a = oi.W1_eval(spec, route="tau")
    b = oi.W1_eval(spec, route="lambda")
    assert abs(a - b) <= 1e-5 * abs(a)


def test_W_spec_validation():
    with pytest.raises(DomainError):
        oi.WPieceSpec("W1", 0.1, 0.2, 1.0, 1.0)


def test_contour_lemma_routes_agree():
    for lam in (10.0, 1000.0):
        a = oi.contour_lemma_integral(lam, 5.0, 0.1, method="contour")
        b = oi.contour_lemma_integral(lam, 5.0, 0.1, method="direct")
        assert abs(a - b) <= 1e-8 * max(abs(a), 1e-12)


def test_kernel_u_sweep():
    rep = oi.bound_B6_sweep(4)
    assert rep.finite and rep.refinement_stable
