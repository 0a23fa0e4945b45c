import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from displab import potential as pot
from displab import propagator as prop
from displab.errors import DivergenceError
from displab.quad import sphere_area
from displab.radial import (RadialGrid, RadialKernel, bipolar_compose, norm_L1_to_L1,
                            norm_L1_to_L2, norm_L1_to_Linf, radial_integral, two_center_integral)

gauss = lambda n: RadialKernel(lambda s: np.exp(-s * s), n)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_grid_integrates_gaussian(n):
    g = RadialGrid.geometric(n, 12.0)
    assert abs(g.integrate(lambda r: np.exp(-r * r)) / math.pi ** (n / 2) - 1) < 1e-8


def test_norm_l1_gaussian_convolution():
    assert norm_L1_to_L1(None, gauss(4)).value == pytest.approx(math.pi ** 2, abs=1e-8)


def test_norm_l1_newtonian_against_mean_value_oracle():
    # |x|^-2 is harmonic in R^4, so its spherical mean about y is max(r, rho)^-2
    V = lambda r: (1 + r * r) ** -2.0
    k = RadialKernel(lambda s: s ** -2.0, 4, singular=True)
    rhos = np.array([0.0, 0.5, 1.0, 3.0])
    res = norm_L1_to_L1(V, k, rho_samples=rhos)
    for rho, got in zip(rhos, res.values):
        f = lambda r: sphere_area(4) * r ** 3 * V(r) / max(r, rho) ** 2
        ref = integrate.quad(f, 0, np.inf, limit=400)[0] if rho == 0 else (
            integrate.quad(f, 0, rho, limit=400)[0] + integrate.quad(f, rho, np.inf, limit=400)[0])
        assert got == pytest.approx(ref, rel=1e-6), rho
    assert res.value == pytest.approx(math.pi ** 2, rel=1e-6)   # the sup sits at y = 0


def test_norm_l1_divergent_tail():
    with pytest.raises(DivergenceError):
        norm_L1_to_L1(None, RadialKernel(lambda s: s ** -3.5, 4))


def test_norm_linf_constant_and_free_kernel():
    assert norm_L1_to_Linf(2.5) == 2.5
    K = lambda s: prop.free_kernel(s, 1.0, 4)
    assert norm_L1_to_Linf(K) == pytest.approx((4 * math.pi) ** -2, rel=1e-12)


def test_norm_l2_gaussian():
    assert norm_L1_to_L2(None, gauss(4)).value == pytest.approx(math.pi / 2, rel=1e-8)
    assert norm_L1_to_L2(None, RadialKernel(lambda s: 0 * s, 4)).value == 0.0


def test_bipolar_gaussian_convolution():
    for d in (0.0, 0.7, 2.0):
        v = bipolar_compose(gauss(4), None, gauss(4), [0.0], [d], method="partition")
        assert v == pytest.approx((math.pi / 2) ** 2 * math.exp(-d * d / 2), rel=1e-7)


def test_bipolar_three_gaussians():
    V = pot.gaussian(1.0)
    v = bipolar_compose(gauss(4), V, gauss(4), [0.0], [0.0])
    assert v == pytest.approx((math.pi / 3) ** 2, rel=1e-8)


def test_bipolar_zero_potential():
    assert bipolar_compose(gauss(4), 0.0, gauss(4), [0.0], [1.0]) == 0


def test_bipolar_relabel_symmetry_exact():
    k1 = RadialKernel(lambda s: np.exp(-s) / (s + 0.1), 4, singular=True)
    k2 = gauss(4)
    V = pot.gaussian(1.0)
    x, y = np.array([0.3, 0.1, 0, 0]), np.array([-1.0, 0.4, 0.2, 0])
    assert bipolar_compose(k1, V, k2, x, y) == bipolar_compose(k2, V, k1, y, x)


def test_scaling_preserves_l1_norm():
    k = RadialKernel(lambda s: np.exp(-s) * (1 + s), 4)
    base = norm_L1_to_L1(None, k).value
    for h in (0.5, 3.0):
        assert norm_L1_to_L1(None, k.scaled(h)).value == pytest.approx(base, rel=1e-7)


@given(a=st.floats(0.5, 3.0), c=st.floats(1.0, 2.0), rho=st.floats(0.0, 4.0))
def test_prop_norm_monotone_under_domination(a, c, rho):
    # c e^{-s^2/a} dominates e^{-s^2/a} pointwise
    small = RadialKernel(lambda s: np.exp(-s * s / a), 4)
    big = RadialKernel(lambda s: c * np.exp(-s * s / a), 4)
    V = pot.gaussian(1.0)
    r = [rho]
    assert norm_L1_to_L1(V, small, rho_samples=r).value <= norm_L1_to_L1(V, big, rho_samples=r).value * (1 + 1e-12)
    assert norm_L1_to_L2(None, small).value <= norm_L1_to_L2(None, big).value * (1 + 1e-12)
    assert norm_L1_to_Linf(small) <= norm_L1_to_Linf(big)


def test_two_center_matches_radial_at_origin():
    G = lambda s: np.exp(-s * s)
    V = pot.gaussian(1.0)
    a = two_center_integral(V, G, 0.0, 4)
    b = radial_integral(lambda r: V.value(r) * G(r), 4)
    assert a == pytest.approx(b, rel=1e-9)
