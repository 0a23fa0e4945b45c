import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize

from displab import funcalc as fc
from displab import potential as pot
from displab import resolvent as rs
from displab.errors import DomainError

AAE = fc.AlmostAnalyticExtension(3, 1.0)
G_MAX = optimize.minimize_scalar(lambda s: -float(fc.psi(s)), bounds=(1, 2), method="bounded").x


def test_chi1_step_shape():
    s = np.array([0.5, 1.0, 2.0, 3.0])
    assert np.allclose(fc.chi1(s), [0, 0, 1, 1])
    assert integrate.quad(lambda u: float(fc.chi1(u, 1)), 1, 2)[0] == pytest.approx(1.0, abs=1e-12)


@given(s=st.floats(1e-3, 10.0), a=st.floats(0.01, 1.0))
def test_prop_chi_eta_partition(s, a):
    fam = fc.CutoffFamily(a)
    assert fam.chi_a(s) + fam.eta_a(s) == pytest.approx(1.0, abs=1e-15)


def test_psi_support():
    s = np.concatenate([np.linspace(0.01, 1.0, 20), np.linspace(2.0, 5.0, 20)])
    assert not np.any(fc.psi(s))


def test_hs_scalar_at_max():
    assert abs(fc.hs_apply_scalar(AAE, 1.0, G_MAX) - float(fc.psi(G_MAX))) < 1e-6


@pytest.mark.parametrize("g", [0.5, 0.99, 2.01, 3.0])
def test_hs_scalar_outside_support(g):
    assert abs(fc.hs_apply_scalar(AAE, 1.0, g)) < 1e-6


def test_hs_scalar_scaling():
    g = 0.35
    assert abs(fc.hs_apply_scalar(AAE, 2.0, g) - float(fc.psi(4 * g))) < 1e-6


@given(g=st.floats(0.5, 2.5))
def test_prop_hs_scalar_matches_psi(g):
    assert abs(fc.hs_apply_scalar(AAE, 1.0, g) - float(fc.psi(g))) < 1e-6


def test_hs_scalar_domain():
    with pytest.raises(DomainError):
        fc.hs_apply_scalar(AAE, 1.0, -1.0)


def test_extension_restricts_to_phi():
    x = np.linspace(0.9, 1.5, 31)
    assert np.allclose(AAE.value(x + 0j), fc.psi(x * x), atol=1e-14)


def test_hs_kernel_pair_point():
    a = fc.hs_free_cutoff_kernel(AAE, 1.0, 0.5, 4)[0]
    b = fc.psi_kernel(1.0, 0.5, 4)[0]
    assert abs(a - b) / abs(b) < 1e-3


@pytest.mark.parametrize("h", [2.0, 5.0])
def test_kernel_scaling_both_routes(h):
    s = np.array([0.3, 1.0, 4.0])
    fb = fc.psi_kernel(h, s * h, 4)
    assert np.allclose(fb, h ** -4 * fc.psi_kernel(1.0, s, 4), rtol=1e-10, atol=0)
    hs = fc.hs_free_cutoff_kernel(AAE, h, s * h, 4)
    assert np.allclose(hs, h ** -4 * fc.hs_free_cutoff_kernel(AAE, 1.0, s, 4), rtol=1e-8, atol=0)


def test_kernel_rapid_decay():
    rep = fc.kernel_decay_envelope(4, refine=True)
    assert rep.finite and rep.refinement_stable


@pytest.mark.parametrize("N", [2, 3, 4])
def test_dbar_envelope(N):
    rep = fc.dbar_envelope(N, 1.0, refine=True)
    assert rep.finite and rep.refinement_stable


def test_eta_synthesis_examples():
    fam = fc.CutoffFamily(0.05)
    assert fam.eta_a(0.04) == 1.0 and fc.eta_synthesis(fam, 0.04)[0] == pytest.approx(1.0, abs=1e-12)
    assert fam.eta_a(0.1) == 0.0 and fc.eta_synthesis(fam, 0.12)[0] == 0.0
    assert fc.eta_synthesis_check(fam, [0.075]) < 1e-8
    assert fc.eta_synthesis_check(fam, np.linspace(0.001, 0.2, 57)) < 1e-8


def test_dyadic_sum_identity():
    p = rs.ResolventPoint(1.3 + 0.2j, "plus", 1.0)
    A = fc.dyadic_resolvent_decomposition(fc.DyadicPiece(0.1, "A"), p, 1.0)
    B = fc.dyadic_resolvent_decomposition(fc.DyadicPiece(0.1, "B"), p, 1.0)
    assert abs(A + B - 1 / (1 - p.z ** 2)) < 1e-8


@given(g=st.floats(0.05, 20.0), h=st.floats(0.5, 4.0), eps=st.floats(0.02, 0.5))
def test_prop_dyadic_sum(g, h, eps):
    p = rs.ResolventPoint(1.1 + 0.3j, "plus", h)
    A = fc.dyadic_resolvent_decomposition(fc.DyadicPiece(eps, "A"), p, g)
    B = fc.dyadic_resolvent_decomposition(fc.DyadicPiece(eps, "B"), p, g)
    ref = 1 / (h * h * g - p.z ** 2)
    assert abs(A + B - ref) <= 1e-8 * max(1.0, abs(ref))


def test_bump_normalized():
    v = integrate.quad(lambda t: float(fc.bump_phi(t * t)) / t, 1, math.sqrt(2), epsabs=1e-13)[0]
    assert v == pytest.approx(1.0, abs=1e-10)


@given(s=st.floats(1e-4, 1e4), eps=st.floats(0.01, 0.5))
def test_prop_chi_partition(s, eps):
    tot = sum(fc.chi_eps(j, eps, np.array([s]))[0] for j in (1, 2, 3))
    assert tot == pytest.approx(1.0, abs=1e-8)


def test_chi_partition_example():
    assert sum(fc.chi_eps(j, 0.1, np.array([2.7]))[0] for j in (1, 2, 3)) == pytest.approx(1.0, abs=1e-8)


def test_piece_A_vanishes_for_small_eps():
    # eps theta h sqrt(g) < 1 on theta <= 1, so phi vanishes on the A range
    p = rs.ResolventPoint(1.3 + 0.2j, "plus", 1.0)
    assert fc.dyadic_resolvent_decomposition(fc.DyadicPiece(0.01, "A"), p, 1.0) == 0


def test_f_bounds():
    lam = np.linspace(1.0, 2.0, 41)
    mus = np.geomspace(1e-3, 1e3, 25)
    ref = (np.geomspace(1e-3, 1e3, 49), np.linspace(1.0, 2.0, 81))
    for j in (0, 1, 2):
        for rep in fc.f_bounds_check(mus, lam, 1.3 + 0.1j, j, refined=ref):
            assert rep.finite and rep.refinement_stable, (j, rep.bound_id)


def test_f_symbol_derivative_matches_fd():
    lam, mu, z, d = 1.4, 0.7, 1.3 + 0.1j, 1e-6
    for j in (1, 2):
        fd = (fc.f_symbol(lam + d, mu, z, j - 1) - fc.f_symbol(lam - d, mu, z, j - 1)) / (2 * d)
        assert abs(fc.f_symbol(lam, mu, z, j) - fd) < 1e-5 * max(1.0, abs(fd))


@pytest.mark.slow
def test_psi_norm_h_uniform():
    norms = fc.psi_l1_norms((1, 2, 4), 4)
    v = np.array(list(norms.values()))
    assert v.max() / v.min() - 1 < 0.01


def test_cutoff_difference_zero_potential():
    M = fc.cutoff_difference_operator(pot.zero_potential(), 4.0, 4, mode="plain")
    assert M.norm_l1() == 0.0


@pytest.mark.slow
def test_small_h_difference_bound():
    rep = fc.small_h_difference_fit(pot.gaussian(0.1), (1.0, 0.5, 0.25))
    assert rep.finite
