"""Free and perturbed resolvents of ``h^2 G - z^2`` in the radial channel.

Kernel of the free resolvent ``(h^2 G_0 - z^2)^{-1}`` for ``+-Im z >= 0``:

    R_h(sigma, z) = +- h^-2 i sigma^(-2 nu) / (4 (2 pi)^nu) Hcal_nu^{+-}(sigma z / h).

Its spherical mean (Gegenbauer addition theorem, only the m = 0 term
survives) is, with ``k = z / h``,

    M(r, s) = +- (i/4) pi^-nu Gamma(nu + 1) h^-2
              * [J_nu(k r<) / (k r<)^nu] * r>^(-2 nu) Hcal_nu^{+-}(k r>),

which tends to the Newtonian mean ``Gamma(nu) / (4 pi^(nu+1)) h^-2 r>^(-2 nu)``
as ``z -> 0``.  Operators on radial functions use the convention of
:class:`displab.radial.DiscretizedOperator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .envelope import EnvelopeFitReport, fit_envelope
from .errors import DependencyError, DomainError
from .potential import RadialPotential, resonance_test
from .radial import DiscretizedOperator, RadialGrid, RadialKernel, norm_L1_to_L1
from .specfun import Order, bessel_j_ratio, hankel_at_zero, hankel_scaled, japanese

VALID_THRESHOLD = 1e-8


@dataclass(frozen=True)
class ResolventPoint:
    z: complex
    branch: str = "plus"
    h: float = 1.0
    n: int = 4

    def __post_init__(self):
        if self.branch not in ("plus", "minus"):
            raise DomainError("branch must be 'plus' or 'minus'")
        s = 1 if self.branch == "plus" else -1
        if s * complex(self.z).imag < 0:
            raise DomainError(f"z = {self.z} is in the wrong half-plane for branch {self.branch}")
        if self.h <= 0:
            raise DomainError("h must be positive")
        if self.n < 4:
            raise DomainError("n must be >= 4")

    @classmethod
    def at(cls, z, h=1.0, n=4) -> "ResolventPoint":
        z = complex(z)
        return cls(z, "plus" if z.imag >= 0 else "minus", h, n)

    @property
    def sign(self) -> int:
        return 1 if self.branch == "plus" else -1

    @property
    def order(self) -> Order:
        return Order.from_dimension(self.n)

    @property
    def k(self) -> complex:
        return complex(self.z) / self.h

    def with_(self, **kw) -> "ResolventPoint":
        d = dict(z=self.z, branch=self.branch, h=self.h, n=self.n)
        d.update(kw)
        return ResolventPoint(**d)


def free_resolvent_kernel(p: ResolventPoint, sigma):
    """``R_h^{+-}(sigma, z)``; at ``z = 0`` the small-argument limit is used."""
    sigma = np.asarray(sigma, float)
    if np.any(sigma <= 0):
        raise DomainError("sigma must be positive")
    o = p.order
    nu = o.nu
    pref = p.sign * 1j / (4.0 * (2 * math.pi) ** nu) / p.h ** 2 * sigma ** (-2 * nu)
    if p.z == 0:
        return pref * hankel_at_zero(o, p.branch)
    return pref * hankel_scaled(o, p.branch, sigma * p.z / p.h)


def zero_energy_kernel(n: int, sigma, h: float = 1.0):
    """``R_h(sigma, 0)`` through the small-argument Hankel limit."""
    return free_resolvent_kernel(ResolventPoint(0j, "plus", h, n), sigma)


def resolvent_kernel(p: ResolventPoint) -> RadialKernel:
    return RadialKernel(lambda s: free_resolvent_kernel(p, s), p.n, p.h, singular=True,
                        label=f"R_h(z={p.z})")


def resolvent_mean_kernel(p: ResolventPoint):
    """Spherical mean ``M(r, s)`` of the free resolvent kernel (see module docstring)."""
    o = p.order
    nu = o.nu
    c = p.sign * 0.25j * math.pi ** (-nu) * gamma(nu + 1) / p.h ** 2
    k = p.k

    def M(r, s):
        r, s = np.broadcast_arrays(np.asarray(r, float), np.asarray(s, float))
        lo, hi = np.minimum(r, s), np.maximum(r, s)
        if k == 0:
            jr = 1.0 / (2 ** nu * gamma(nu + 1))
            hv = hankel_at_zero(o, p.branch)
            return c * jr * hv * hi ** (-2 * nu)
        # lo/hi take few distinct values (grid nodes): evaluate on those only
        ul, il = np.unique(lo, return_inverse=True)
        uh, ih = np.unique(hi, return_inverse=True)
        jr = np.asarray(bessel_j_ratio(o, k * ul))[il].reshape(lo.shape)
        hv = (np.asarray(hankel_scaled(o, p.branch, k * uh)) * uh ** (-2 * nu))[ih].reshape(hi.shape)
        return c * jr * hv

    return M


def mean_kernel_matrix(p: ResolventPoint, r, s) -> np.ndarray:
    """``M(r_i, s_j)`` from four special-function vectors (no pairwise evaluation)."""
    r, s = np.asarray(r, float), np.asarray(s, float)
    if p.k == 0:
        return resolvent_mean_kernel(p)(r[:, None], s[None, :])
    o, nu, k = p.order, p.order.nu, p.k
    c = p.sign * 0.25j * math.pi ** (-nu) * gamma(nu + 1) / p.h ** 2
    Jr, Js = np.asarray(bessel_j_ratio(o, k * r)), np.asarray(bessel_j_ratio(o, k * s))
    Hr = np.asarray(hankel_scaled(o, p.branch, k * r)) * r ** (-2 * nu)
    Hs = np.asarray(hankel_scaled(o, p.branch, k * s)) * s ** (-2 * nu)
    return c * np.where(r[:, None] <= s[None, :], Jr[:, None] * Hs[None, :], Hr[:, None] * Js[None, :])


def mean_kernel_factors(zs, h: float, n: int, r, branch: str = "plus"):
    """Batched ``(J(k r), H(k r) r^{-2 nu})`` for many ``z`` at once, shapes ``(len(zs), len(r))``.

    Pairs with :func:`mean_kernel_from_factors`; amortizes special-function
    overhead when many resolvent points share the same radial nodes.
    """
    o = Order.from_dimension(n)
    k = np.asarray(zs, complex)[:, None] / h
    r = np.asarray(r, float)[None, :]
    J = np.asarray(bessel_j_ratio(o, k * r))
    H = np.asarray(hankel_scaled(o, branch, k * r)) * r ** (-2 * o.nu)
    return J, H


def mean_kernel_const(h: float, n: int, branch: str = "plus") -> complex:
    nu = Order.from_dimension(n).nu
    return (1 if branch == "plus" else -1) * 0.25j * math.pi ** (-nu) * gamma(nu + 1) / h ** 2


def mean_kernel_from_factors(Jr, Hr, Js, Hs, r, s, h: float, n: int, branch: str = "plus"):
    c = mean_kernel_const(h, n, branch)
    return c * np.where(np.asarray(r)[:, None] <= np.asarray(s)[None, :],
                        Jr[:, None] * Hs[None, :], Hr[:, None] * Js[None, :])


def free_resolvent_operator(p: ResolventPoint, grid: RadialGrid,
                            out_grid: RadialGrid | None = None) -> DiscretizedOperator:
    """``R_{0,h}(z)`` on radial functions."""
    M = mean_kernel_matrix(p, (out_grid or grid).nodes, grid.nodes)
    return DiscretizedOperator(M * grid.weights[None, :], grid, "convolution", out_grid)


def v_free_resolvent(V: RadialPotential, p: ResolventPoint, grid: RadialGrid,
                     h2: bool = True) -> DiscretizedOperator:
    """``h^2 V R_{0,h}(z)`` (or ``V R_{0,h}(z)`` with ``h2=False``)."""
    M = mean_kernel_matrix(p, grid.nodes, grid.nodes)
    M = np.asarray(V(grid.nodes), float)[:, None] * M * grid.weights[None, :]
    return DiscretizedOperator((p.h ** 2 if h2 else 1.0) * M, grid, "sandwich")


def zero_limit_factor(V: RadialPotential, grid: RadialGrid, h: float) -> DiscretizedOperator:
    """``1 + h^2 V R_{0,h}(0)``."""
    p = ResolventPoint(0j, "plus", h, grid.dimension)
    return DiscretizedOperator.identity(grid) + v_free_resolvent(V, p, grid)


@dataclass
class PerturbedResolvent:
    base: ResolventPoint
    factor: DiscretizedOperator = field(repr=False)
    inverse_factor: DiscretizedOperator | None = field(repr=False)
    valid: bool
    smallest_singular: float
    residual: float

    @property
    def inverse_norm_L1(self) -> float:
        return math.inf if self.inverse_factor is None else self.inverse_factor.norm_l1()


def born_inverse(V: RadialPotential, p: ResolventPoint, grid: RadialGrid) -> PerturbedResolvent:
    """Factor ``1 + h^2 V R_{0,h}(z)`` and its inverse by dense LU.

    ``valid`` is false when the smallest singular value (of the
    weight-balanced matrix) is at most ``1e-8``.
    """
    I = DiscretizedOperator.identity(grid)
    if V.is_zero:
        return PerturbedResolvent(p, I, I, True, 1.0, 0.0)
    F = I + v_free_resolvent(V, p, grid)
    smin = F.smallest_singular()
    if smin <= VALID_THRESHOLD:
        return PerturbedResolvent(p, F, None, False, smin, math.inf)
    Finv = F.inverse()
    res = (Finv @ F - I).norm_l1()
    return PerturbedResolvent(p, F, Finv, True, smin, res)


def perturbed_resolvent_operator(pr: PerturbedResolvent, grid: RadialGrid,
                                 out_grid: RadialGrid | None = None) -> DiscretizedOperator:
    """``R_h(z) = R_{0,h}(z) (1 + h^2 V R_{0,h}(z))^{-1}``."""
    if not pr.valid:
        raise DependencyError("perturbed resolvent unavailable: factor is near-singular")
    return free_resolvent_operator(pr.base, grid, out_grid) @ pr.inverse_factor


def _need_T(V, grid, T):
    if T is not None:
        return T
    rep, T = resonance_test(V, grid, refine=False)
    if T is None or not rep.regular:
        raise DependencyError("zero is not regular for V: T from the resonance test is unavailable")
    return T


def perturbed_minus_free_T(V: RadialPotential, p: ResolventPoint, grid: RadialGrid,
                           T: DiscretizedOperator | None = None,
                           out_grid: RadialGrid | None = None) -> DiscretizedOperator:
    """``R_h(z) - R_{0,h}(z) T`` on radial functions."""
    if V.is_zero:
        n_out = (out_grid or grid).size
        return DiscretizedOperator(np.zeros((n_out, grid.size), complex), grid, "zero", out_grid)
    T = _need_T(V, grid, T)
    pr = born_inverse(V, p, grid)
    if not pr.valid:
        raise DependencyError("factor 1 + h^2 V R_0(z) is near-singular")
    R0 = free_resolvent_operator(p, grid, out_grid)
    return R0 @ (pr.inverse_factor - T)


def perturbed_minus_free_T_product(V, p, grid, T=None, out_grid=None) -> DiscretizedOperator:
    """Same operator through the factorized form ``-R0 T D T (1 + D T)^{-1}``,
    ``D = h^2 V (R_0(z) - R_0(0))``; an independent assembly route.

    The sign follows from ``F^{-1} - T = F^{-1} (T^{-1} - F) T = -F^{-1} D T`` and
    ``F^{-1} = T (1 + D T)^{-1}``.
    """
    T = _need_T(V, grid, T)
    D = v_free_resolvent(V, p, grid) - v_free_resolvent(V, p.with_(z=0j, branch="plus"), grid)
    I = DiscretizedOperator.identity(grid)
    R0 = free_resolvent_operator(p, grid, out_grid)
    return -1.0 * (R0 @ T @ D @ T @ (I + D @ T).inverse())


def wave_grid(p: ResolventPoint, tail_decades: float = 30.0, base_r_max: float = 10.0,
              per_decade: int = 8) -> RadialGrid:
    """Output grid resolving ``R_{0,h}(z)`` out to ``tail_decades / Im k``."""
    k = p.k
    if k.imag == 0:
        raise DomainError("wave grid needs Im z != 0")
    r_max = max(base_r_max, tail_decades / abs(k.imag))
    wl = 2 * math.pi / max(abs(k.real), 1e-12)
    return RadialGrid.oscillatory(p.n, r_max, min(wl, r_max), per_decade=per_decade)


# ---------------------------------------------------------------------------
# norms (full R^n, not only the radial channel)

def v_resolvent_norm(V: RadialPotential, p: ResolventPoint, rho_samples=None) -> float:
    """``sup_y int |V(x)| |R_h(|x - y|, z)| dx``."""
    return norm_L1_to_L1(V, resolvent_kernel(p), rho_samples, n=p.n).value


def v_resolvent_difference_norm(V: RadialPotential, p: ResolventPoint, rho_samples=None) -> float:
    """``sup_y int |V(x)| |R_h(|x-y|, z) - R_h(|x-y|, 0)| dx``."""
    p0 = p.with_(z=0j, branch="plus")
    k = RadialKernel(lambda s: free_resolvent_kernel(p, s) - free_resolvent_kernel(p0, s),
                     p.n, p.h, singular=True)
    return norm_L1_to_L1(V, k, rho_samples, n=p.n).value


def free_resolvent_norm(p: ResolventPoint) -> float:
    """``int |R_h(|xi|, z)| dxi`` (h-independent)."""
    return norm_L1_to_L1(None, resolvent_kernel(p), n=p.n).value


# ---------------------------------------------------------------------------
# envelopes

def resolvent_decay_envelope(n: int, z: complex, sigma_grid, refined_grid=None) -> EnvelopeFitReport:
    """Fit ``|R_1(sigma, z)| <= C sigma^(-2 nu) <sigma>^(-5/2) |Im z|^(-(n+2)/2)``."""
    z = complex(z)
    if z.imag == 0:
        raise DomainError("envelope undefined for Im z = 0")
    p = ResolventPoint.at(z, 1.0, n)
    nu = (n - 2) / 2.0

    def samples(grid):
        s = np.asarray(grid, float)
        v = np.abs(free_resolvent_kernel(p, s))
        return [({"sigma": si}, vi) for si, vi in zip(s, v)]

    env = lambda q: (q["sigma"] ** (-2 * nu) * japanese(q["sigma"]) ** -2.5
                     * abs(z.imag) ** (-(n + 2) / 2.0))
    ref = samples(refined_grid) if refined_grid is not None else None
    rep = fit_envelope(samples(sigma_grid), env, "2.16", refined=ref)
    rep.exponents["Im z"] = z.imag
    return rep


def phi_arc(n_pts: int = 12, imag_parts=(0.05, 0.1, 0.2, 0.4), lo: float = 1.0,
            hi: float = math.sqrt(2.0)) -> np.ndarray:
    """Sample points ``x + i y`` over the support of the almost-analytic extension."""
    x = np.linspace(lo, hi, n_pts)
    return np.array([xi + 1j * y for y in imag_parts for xi in x])


def strip_points(n_pts: int = 9, imag_parts=(0.0, 0.1, 0.3, 0.6, 0.9), lo: float = 1.0,
                 hi: float = math.sqrt(2.0)) -> np.ndarray:
    """Upper-half-plane points of ``supp phi~`` (including the real segment)."""
    return phi_arc(n_pts, imag_parts, lo, hi)


def kernel_envelope(bound_id: str, n: int, z_points, h_values, sigma_grid,
                    refined_grid=None) -> EnvelopeFitReport:
    """Fits of the free resolvent kernel bounds for ``h >= 1``.

    kernel: ``|R_h(sigma, z)| <= C h^-2 (sigma^(-n+2) + sigma^(-(n-1)/2))``;
    difference: ``|R_h(sigma, z) - R_h(sigma, 0)| <= C h^(-5/2) (sigma^(-n+5/2) + sigma^(-(n-1)/2))``.
    Both branches are sampled (``z`` and ``conj z``).
    """
    if bound_id not in ("2.9", "2.10"):
        raise DomainError("bound_id must be '2.9' or '2.10'")
    if min(h_values) < 1:
        raise DomainError("the bounds are stated for h >= 1")
    zs = [complex(z) for z in z_points]

    def samples(grid):
        s = np.asarray(grid, float)
        out = []
        for h in h_values:
            for z in zs:
                for zz in ((z, z.conjugate()) if z.imag else (z,)):
                    for br in (("plus", "minus") if zz.imag == 0 else (None,)):
                        p = ResolventPoint(zz, br or ("plus" if zz.imag > 0 else "minus"), h, n)
                        v = free_resolvent_kernel(p, s)
                        if bound_id == "2.10":
                            v = v - free_resolvent_kernel(p.with_(z=0j), s)
                        out += [({"sigma": float(a), "re": zz.real, "im": zz.imag, "h": float(h)},
                                 float(abs(b))) for a, b in zip(s, v)]
        return out

    if bound_id == "2.9":
        env = lambda q: q["h"] ** -2 * (q["sigma"] ** (2 - n) + q["sigma"] ** (-(n - 1) / 2.0))
    else:
        env = lambda q: q["h"] ** -2.5 * (q["sigma"] ** (-n + 2.5) + q["sigma"] ** (-(n - 1) / 2.0))
    ref = samples(refined_grid) if refined_grid is not None else None
    return fit_envelope(samples(sigma_grid), env, bound_id, refined=ref)
