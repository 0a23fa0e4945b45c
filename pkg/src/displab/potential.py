"""Radial potentials, decay/integrability conditions and the zero-energy test.

The zero-energy operator ``1 - V Delta^{-1}`` is discretized on radial
functions.  Newton's theorem gives the spherical mean of the kernel of
``Delta^{-1}`` in closed form,

    M(r, s) = -max(r, s)^(2-n) / ((n - 2) |S^{n-1}|),

so the matrix is exact up to the outer quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erfc

from .errors import DivergenceError, DomainError, UsageError
from .quad import sphere_area
from .radial import (DiscretizedOperator, RadialGrid, RadialKernel, norm_L1_to_L1,
                     radial_integral)
from .specfun import bessel_j_ratio

SINGULAR_THRESHOLD = 1e-8
DRIFT_GATE = 0.10
DEFAULT_EPS_14 = 0.05


@dataclass(frozen=True)
class RadialPotential:
    """``V(x) = coupling * profile(|x|)``.

    ``decay`` is the declared pair ``(C, delta)`` with
    ``|V| <= C <x>^-delta`` (``delta = inf`` for rapidly decaying profiles);
    ``support_radius`` is where the profile is negligible (below 1e-16).
    """

    profile: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    coupling: float = 1.0
    decay: tuple | None = None
    id: str = "custom"
    support_radius: float | None = None

    def value(self, r):
        r = np.asarray(r, float)
        if self.coupling == 0.0:
            return np.zeros_like(r)
        return self.coupling * self.profile(r)

    __call__ = value

    def with_coupling(self, g: float) -> "RadialPotential":
        return RadialPotential(self.profile, g, self.decay, self.id, self.support_radius)

    @property
    def decay_exponent(self) -> float:
        return math.inf if self.decay is None else float(self.decay[1])

    @property
    def is_zero(self) -> bool:
        return self.coupling == 0.0


def gaussian(coupling: float = 1.0, width: float = 1.0) -> RadialPotential:
    return RadialPotential(lambda r: np.exp(-(r / width) ** 2), coupling,
                           (abs(coupling), math.inf), "gaussian", 6.2 * width)


def power_law(delta: float, coupling: float = 1.0) -> RadialPotential:
    return RadialPotential(lambda r: (1.0 + r * r) ** (-delta / 2.0), coupling,
                           (abs(coupling), delta), f"power{delta:g}", None)


def compact_bump(coupling: float = 1.0, radius: float = 2.0) -> RadialPotential:
    def prof(r):
        u = np.clip(r / radius, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            v = np.exp(1.0 - 1.0 / np.maximum(1.0 - u * u, 1e-300))
        return np.where(u < 1.0, v, 0.0)
    return RadialPotential(prof, coupling, (abs(coupling), math.inf), "bump", radius)


def attractive_well(depth: float = 1.0, radius: float = 1.5, edge: float = 0.3) -> RadialPotential:
    """Smoothed square well ``-depth`` on ``r < radius``."""
    return RadialPotential(lambda r: -0.5 * erfc((r - radius) / edge), depth,
                           (abs(depth), math.inf), "well", radius + 12 * edge)


def zero_potential() -> RadialPotential:
    return RadialPotential(lambda r: np.zeros_like(np.asarray(r, float)), 0.0,
                           (0.0, math.inf), "zero", 1.0)


PRESETS = {
    "gaussian": (gaussian, "V = g exp(-r^2)"),
    "power": (lambda coupling=1.0, delta=4.5: power_law(delta, coupling), "V = g <r>^-delta"),
    "bump": (compact_bump, "V = g exp(1 - 1/(1-(r/R)^2)) on r < R"),
    "well": (lambda coupling=1.0, **kw: attractive_well(coupling, **kw),
             "V = -g on r < 1.5, smoothed edge"),
    "zero": (lambda coupling=0.0: zero_potential(), "V = 0"),
}


def make_potential(pid: str, coupling: float = 1.0, **kw) -> RadialPotential:
    if pid not in PRESETS:
        raise UsageError(f"unknown potential {pid!r}; valid: {', '.join(PRESETS)}")
    return PRESETS[pid][0](coupling=coupling, **kw)


# ---------------------------------------------------------------------------
# conditions

@dataclass
class ConditionResult:
    condition: str
    passed: bool
    margin: float
    detail: str

    def __bool__(self):
        return self.passed


def _tail_exponent(V: RadialPotential) -> float:
    """Effective decay exponent at infinity, declared or fitted on [1e2, 1e4]."""
    if V.support_radius is not None or V.is_zero:
        return math.inf
    r = np.geomspace(1e2, 1e4, 9)
    v = np.abs(V.value(r))
    if np.all(v == 0):
        return math.inf
    slope = np.polyfit(np.log(r), np.log(np.maximum(v, 1e-300)), 1)[0]
    return -slope


def _sup_kernel_condition(V, n, kernel, needed, name):
    delta = _tail_exponent(V)
    if not delta > needed:
        return ConditionResult(name, False, math.inf,
                               f"requires decay exponent > {needed:.4g} at infinity, have {delta:.4g}")
    try:
        val = norm_L1_to_L1(V, RadialKernel(kernel, n, singular=True)).value
    except DivergenceError as e:
        return ConditionResult(name, False, math.inf, str(e))
    return ConditionResult(name, math.isfinite(val), val,
                           f"sup_y integral = {val:.6g} (decay {delta:.4g} > {needed:.4g})")


# condition ids accepted by check_condition (report bound_id data)
CONDITIONS = ("1.1", "1.3", "1.4", "1.6")


def check_condition(cond: str, V: RadialPotential, n: int = 4, eps: float = DEFAULT_EPS_14,
                    delta: float | None = None, C: float | None = None) -> ConditionResult:
    """Check one of the named decay/integrability conditions (keys of ``CONDITIONS``) for a radial ``V``.

    The margin is the finite value of the relevant integral (or the fitted
    constant for the pointwise decay condition); failures carry the violated
    exponent inequality.
    """
    if n < 4:
        raise DomainError("n must be >= 4")
    if V.is_zero:
        return ConditionResult(cond, True, 0.0, "V = 0")
    if cond == "1.1":
        d = delta if delta is not None else V.decay_exponent
        need = (n + 2) / 2.0
        # rapidly decaying profiles are tested against the threshold exponent + 1
        d_test = d if math.isfinite(d) else need + 1.0
        r = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 400)])
        fitted = float(np.max(np.abs(V.value(r)) * (1 + r * r) ** (d_test / 2.0)))
        bound = C if C is not None else (V.decay[0] if math.isfinite(d) else math.inf)
        ok = d > need and fitted <= bound * (1 + 1e-9)
        return ConditionResult("1.1", bool(ok), fitted,
                               f"fitted C = {fitted:.6g} for delta = {d_test:g}; "
                               f"delta > {need:g} required")
    if cond == "1.4":
        k = lambda s: s ** (-(n - 2.0)) + s ** (-(n - 2.0) / 2.0 + eps)
        return _sup_kernel_condition(V, n, k, (n + 2.0) / 2.0 + eps, "1.4")
    if cond == "1.6":
        k = lambda s: s ** (-(n - 2.0)) + s ** (-(n - 1.0) / 2.0)
        return _sup_kernel_condition(V, n, k, (n + 1.0) / 2.0, "1.6")
    if cond == "1.3":
        val = fourier_l1_norm(V, n)
        ok = math.isfinite(val)
        return ConditionResult("1.3", ok, val, f"int |V^| = {val:.6g}")
    raise UsageError(f"unknown condition {cond!r}; valid: 1.1, 1.3, 1.4, 1.6")


def radial_fourier(V, n: int, xi: np.ndarray, r_max: float | None = None) -> np.ndarray:
    """``V^(xi) = int e^{-i x.xi} V(|x|) dx`` for radial ``V``.

    Uses ``int_{S^{n-1}} e^{-i r xi w} dw = (2 pi)^{n/2} J_nu(r xi) / (r xi)^nu``.
    """
    from .quad import panels
    R = r_max or (V.support_radius or 200.0)
    br = np.linspace(0.0, R, int(max(64, 8 * R)) + 1)
    r, w = panels(br, 8)
    vals = V.value(r) * r ** (n - 1)
    xi = np.atleast_1d(np.asarray(xi, float))
    out = np.empty(xi.shape)
    for i, x in enumerate(xi):
        jr = np.real(bessel_j_ratio((n - 2) / 2.0, r * x))
        out[i] = (2 * math.pi) ** (n / 2.0) * np.sum(w * vals * jr)
    return out


def fourier_l1_norm(V, n: int, xi_max: float = 40.0) -> float:
    """``int |V^(xi)| dxi`` by radial quadrature; ``inf`` if the tail is not integrable."""
    from .quad import panels
    br = np.linspace(0.0, xi_max, 161)
    xi, w = panels(br, 8)
    vhat = radial_fourier(V, n, xi)
    f = np.abs(vhat) * xi ** (n - 1) * sphere_area(n)
    total = float(np.sum(w * f))
    tail_ratio = f[-1] * xi_max / max(total, 1e-300)
    if tail_ratio > 1e-3:
        return math.inf
    return total


# ---------------------------------------------------------------------------
# Newtonian potential and the zero-energy operator

def newtonian_constant(n: int) -> float:
    """``c_n`` with ``(-Delta)^{-1}`` kernel ``c_n sigma^(2-n)``: ``1/((n-2)|S^{n-1}|)``."""
    if n < 3:
        raise DomainError("n must be >= 3")
    return 1.0 / ((n - 2.0) * sphere_area(n))


def newtonian_kernel(n: int, sigma):
    """Kernel of ``Delta^{-1}`` (negative definite): ``-c_n sigma^(2-n)``."""
    sigma = np.asarray(sigma, float)
    if np.any(sigma <= 0):
        raise DomainError("sigma must be positive")
    return -newtonian_constant(n) * sigma ** (2.0 - n)


def newtonian_mean_kernel(n: int):
    """Spherical mean over |y| = s of the kernel of ``Delta^{-1}`` (Newton's theorem)."""
    c = newtonian_constant(n)
    return lambda r, s: -c * np.maximum(r, s) ** (2.0 - n)


def laplace_inverse_operator(grid: RadialGrid) -> DiscretizedOperator:
    return DiscretizedOperator.from_mean_kernel(grid, newtonian_mean_kernel(grid.dimension),
                                                kind="convolution")


def v_laplace_inverse(V: RadialPotential, grid: RadialGrid) -> DiscretizedOperator:
    """``V Delta^{-1}`` (multiplication after the Newtonian convolution)."""
    return DiscretizedOperator.from_mean_kernel(grid, newtonian_mean_kernel(grid.dimension),
                                                left=V)


def zero_energy_operator(V: RadialPotential, grid: RadialGrid) -> DiscretizedOperator:
    """Discretized ``1 - V Delta^{-1}``."""
    return DiscretizedOperator.identity(grid) - v_laplace_inverse(V, grid)


@dataclass
class ResonanceReport:
    smallest_singular: float
    T_norm_L1: float
    regular: bool
    grid_id: str
    inconclusive: bool = False
    drift: float | None = None
    refined_T_norm_L1: float | None = None

    @property
    def status(self) -> str:
        if self.inconclusive:
            return "inconclusive"
        return "regular" if self.regular else "singular"


def grid_id(grid: RadialGrid) -> str:
    return f"n{grid.dimension}-rmax{grid.r_max:g}-pd{grid.per_decade}-m{grid.size}"


def _resonance_single(V, grid):
    A = zero_energy_operator(V, grid)
    smin = A.smallest_singular()
    if smin <= SINGULAR_THRESHOLD:
        return A, smin, None, math.inf
    T = A.inverse()
    T.kind = "T"
    return A, smin, T, T.norm_l1()


def resonance_test(V: RadialPotential, grid: RadialGrid, refine: bool = True):
    """Zero-energy test: returns ``(ResonanceReport, T)``.

    Regular means the smallest singular value exceeds ``1e-8`` and the
    L1 norm of ``T`` moves by less than 10% on the refined grid; otherwise
    the report is singular or inconclusive (``T`` is ``None`` if singular).
    """
    if V.is_zero:
        T = DiscretizedOperator.identity(grid)
        return ResonanceReport(1.0, 1.0, True, grid_id(grid), drift=0.0, refined_T_norm_L1=1.0), T
    A, smin, T, tn = _resonance_single(V, grid)
    if T is None:
        return ResonanceReport(smin, math.inf, False, grid_id(grid)), None
    drift, tn2, inconclusive = None, None, False
    if refine:
        _, smin2, T2, tn2 = _resonance_single(V, grid.refined())
        if T2 is None:
            inconclusive = True
        else:
            drift = abs(tn2 - tn) / tn
            inconclusive = drift > DRIFT_GATE
    rep = ResonanceReport(smin, tn, not inconclusive, grid_id(grid), inconclusive, drift, tn2)
    return rep, T


def neumann_T(V: RadialPotential, grid: RadialGrid, terms: int = 40) -> DiscretizedOperator:
    """``sum_k (V Delta^{-1})^k`` truncated (test oracle for small couplings)."""
    B = v_laplace_inverse(V, grid)
    acc = DiscretizedOperator.identity(grid)
    term = DiscretizedOperator.identity(grid)
    for _ in range(terms):
        term = term @ B
        acc = acc + term
    return acc


@dataclass
class CouplingSweep:
    couplings: np.ndarray
    smallest_singular: np.ndarray
    critical_coupling: float
    singular_at_critical: float

    @property
    def monotone_before_critical(self) -> bool:
        mask = self.couplings <= self.critical_coupling
        s = self.smallest_singular[mask]
        return bool(np.all(np.diff(s) <= 1e-12 * max(1.0, s.max())))


def critical_coupling(profile_potential: RadialPotential, grid: RadialGrid) -> float:
    """Smallest ``g > 0`` making ``1 - g V1 Delta^{-1}`` singular (``V1`` the unit-coupling potential).

    ``1 - g B`` is singular iff ``1/g`` is an eigenvalue of ``B``; the
    first crossing is the largest positive real eigenvalue.
    """
    B = v_laplace_inverse(profile_potential.with_coupling(1.0), grid).matrix
    ev = np.linalg.eigvals(B)
    real = ev[np.abs(ev.imag) < 1e-9 * np.abs(ev).max()].real
    pos = real[real > 0]
    if pos.size == 0:
        return math.inf
    return float(1.0 / pos.max())


def coupling_sweep(profile_potential: RadialPotential, grid: RadialGrid,
                   couplings=None, n_points: int = 24) -> CouplingSweep:
    """Smallest singular value of ``1 - V Delta^{-1}`` along ``V = g V1``, with the crossing located."""
    g_star = critical_coupling(profile_potential, grid)
    if couplings is None:
        top = 1.5 * g_star if math.isfinite(g_star) else 10.0
        couplings = np.linspace(0.0, top, n_points)
    couplings = np.asarray(couplings, float)
    s = np.array([zero_energy_operator(profile_potential.with_coupling(g), grid).smallest_singular()
                  for g in couplings])
    s_star = (zero_energy_operator(profile_potential.with_coupling(g_star), grid).smallest_singular()
              if math.isfinite(g_star) else math.nan)
    return CouplingSweep(couplings, s, g_star, s_star)
