"""Band-limited free propagators and Born (Duhamel) terms.

The kernel of ``e^{itG_0} f(h^2 G_0)`` is radial,

    K_h(sigma, t) = sigma^{-2nu} / (2pi)^{nu+1} int e^{it lam^2} Jcal_nu(sigma lam) f(h^2 lam^2) lam dlam,

and ``K_h(sigma, t) = h^{-n} K_1(sigma/h, t/h^2)``.  Here ``e^{itG_0}`` has
kernel ``(-4 pi i t)^{-n/2} e^{-i sigma^2 / 4t}``; the oscillatory kernels (``F``,
``U``) are written with the opposite phase convention, see :func:`F_kernel`.

Born terms use a frequency representation.  For a cutoff supported in
``[0, 2c]`` a Gauss rule ``{mu_q, w_q}`` gives

    K(sigma, t) = sum_q B(sigma, q) e^{i t mu_q},
    B(sigma, q) = w_q mu_q^nu j_nu(sigma sqrt(mu_q)) f(mu_q) / (2 (2pi)^{nu+1}),

with ``j_nu(w) = J_nu(w) / w^nu``.  The time integrals of the Duhamel terms are
then exact: ``t^k`` times the divided difference of ``exp`` at the nodes
``i t mu``.  Only the space integrals are done by quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import funcalc
from .envelope import EnvelopeFitReport, fit_envelope, fit_power_law
from .errors import BudgetError, DomainError, PreconditionError, UsageError
from .quad import gauss_legendre, panels, sphere_area
from .radial import RadialGrid, RadialKernel, bipolar_compose, norm_L1_to_L1, ComposeRule
from .specfun import Order, bessel_j_ratio, bessel_j_scaled

VALID_T = 1e3
VALID_SIGMA = 1e3


class AccuracyWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# single-time kernels

def free_kernel(sigma, t: float, n: int = 4):
    """Kernel of ``e^{itG_0}``: ``(-4 pi i t)^{-n/2} exp(-i sigma^2 / 4t)``."""
    if t == 0:
        raise DomainError("t must be nonzero")
    sigma = np.asarray(sigma, float)
    return (-4j * math.pi * t) ** (-n / 2.0) * np.exp(-1j * sigma * sigma / (4.0 * t))


def _lambda_breaks(lo_u: float, hi_u: float, t: float, sigma_max: float, min_panels: int = 8):
    """Breakpoints in ``lam`` resolving both ``e^{it lam^2}`` and ``Jcal(sigma lam)``."""
    a, b = math.sqrt(lo_u), math.sqrt(hi_u)
    n_u = max(min_panels, int(math.ceil(abs(t) * (hi_u - lo_u) / (0.5 * math.pi))))
    n_l = max(min_panels, int(math.ceil(sigma_max * (b - a) / (0.5 * math.pi))))
    bu = np.sqrt(np.linspace(lo_u, hi_u, n_u + 1))
    bl = np.linspace(a, b, n_l + 1)
    return np.unique(np.concatenate([bu, bl]))


def band_limited_kernel(symbol: Callable = funcalc.psi, h: float = 1.0, t: float = 0.0, sigma=1.0,
                        n: int = 4, support: tuple[float, float] = (1.0, 2.0), order: int = 12):
    """``K_h(sigma, t)`` for a cutoff ``symbol`` supported in ``support`` (in units of ``h^2 lam^2``).

    Panel Gauss-Legendre in ``lam`` with breakpoints uniform in ``lam^2``
    (phase ``t lam^2``) and in ``lam`` (Bessel oscillation); the node set is
    covariant under ``(sigma, t, h) -> (sigma/h, t/h^2, 1)``.
    """
    if not h > 0:
        raise DomainError("h must be positive")
    lo, hi = support
    if lo < 0 or hi <= lo:
        raise DomainError("support must be a positive interval")
    sig = np.atleast_1d(np.asarray(sigma, float))
    if abs(t) > VALID_T * h * h or sig.max(initial=0.0) > VALID_SIGMA * h:
        warnings.warn("band_limited_kernel outside the validated (t, sigma) box", AccuracyWarning)
    smax = float(sig.max(initial=0.0)) / h
    br = _lambda_breaks(lo, hi, t / (h * h), smax)
    lam1, w1 = panels(br, order)
    lam, w = lam1 / h, w1 / h
    base = w * symbol(h * h * lam * lam) * lam * np.exp(1j * t * lam * lam)
    nu = (n - 2) / 2.0
    od = Order.from_dimension(n)
    out = np.empty(sig.shape, complex)
    chunk = max(1, 2_000_000 // max(1, lam.size))
    for s0 in range(0, sig.size, chunk):
        s = sig[s0:s0 + chunk]
        # sigma^{-2nu} Jcal(sigma lam) = lam^{2nu} j_nu(sigma lam); regular at sigma = 0
        J = np.real(bessel_j_ratio(od, np.outer(s, lam).ravel())).reshape(s.size, lam.size)
        out[s0:s0 + chunk] = (J * lam ** (2 * nu)) @ base
    out /= (2 * math.pi) ** (nu + 1)
    return out if np.ndim(sigma) else out[0]


def psi1(u):
    """``psi_1 = 1`` on ``supp psi = [1, 2]``; supported in ``[1/2, 4]``."""
    u = np.asarray(u, float)
    return funcalc.chi1(2 * u) * (1.0 - funcalc.chi1(0.5 * u))


def eta_symbol(a: float):
    fam = funcalc.CutoffFamily(a)
    return fam.eta_a


@dataclass(frozen=True)
class BandLimitedPropagator:
    h: float
    t: float
    n: int = 4
    symbol: Callable = funcalc.psi
    support: tuple[float, float] = (1.0, 2.0)

    def __post_init__(self):
        if self.t == 0:
            raise DomainError("t must be nonzero")
        if not self.h > 0:
            raise DomainError("h must be positive")

    def profile(self, sigma):
        return band_limited_kernel(self.symbol, self.h, self.t, sigma, self.n, self.support)

    def __call__(self, sigma):
        return self.profile(sigma)

    def rescaled(self) -> "BandLimitedPropagator":
        """The ``h = 1`` propagator at time ``t / h^2``."""
        return replace(self, h=1.0, t=self.t / self.h ** 2)

    def radial_kernel(self, sigma_max: float, n_table: int = 800) -> RadialKernel:
        """Spline-tabulated profile, for norm computations."""
        s = np.linspace(0.0, sigma_max, n_table)
        v = self.profile(s)
        sp = CubicSpline(s, v)

        def prof(r):
            r = np.asarray(r, float)
            return np.where(r <= sigma_max, sp(np.minimum(r, sigma_max)), 0.0)
        return RadialKernel(prof, self.n, self.h, singular=False, label=f"K_h h={self.h} t={self.t}")


def synthesized_eta_kernel(a: float, t: float, sigma, n: int = 4, theta_max_factor: float = 1e4,
                           panels_per_unit: int = 2, order: int = 16):
    """``int_{1/a}^inf K_{sqrt theta}(sigma, t) dtheta / theta``: the eta_a kernel from psi-pieces."""
    v0, v1 = math.log(1.0 / a), math.log(theta_max_factor / a)
    m = max(4, int(math.ceil((v1 - v0) * panels_per_unit * max(1.0, abs(t) * a))))
    v, w = panels(np.linspace(v0, v1, m + 1), order)
    sig = np.atleast_1d(np.asarray(sigma, float))
    acc = np.zeros(sig.shape, complex)
    for vi, wi in zip(v, w):
        acc += wi * band_limited_kernel(funcalc.psi, math.exp(0.5 * vi), t, sig, n)
    return acc


def eta_kernel(a: float, t: float, sigma, n: int = 4):
    """Kernel of ``e^{itG_0} eta_a(G_0)`` by direct quadrature."""
    return band_limited_kernel(eta_symbol(a), 1.0, t, sigma, n, support=(0.0, 2.0 * a))


# ---------------------------------------------------------------------------
# kernel bounds and Plancherel

def kernel_bound_report(s: float, n: int = 4, t_grid=None, sigma_grid=None, refined=None,
                        h: float = 1.0) -> EnvelopeFitReport:
    """Fit ``|K_1(sigma, t)| <= C |t|^{-s-1/2} sigma^{s-(n-1)/2}``."""
    if t_grid is None:
        t_grid = np.geomspace(1.0, 100.0, 17)
    if sigma_grid is None:
        sigma_grid = np.geomspace(0.1, 100.0, 49)

    def samples(tg, sg):
        out = []
        for t in tg:
            v = np.abs(band_limited_kernel(funcalc.psi, h, float(t), np.asarray(sg), n))
            out += [({"t": float(t), "sigma": float(x)}, float(a)) for x, a in zip(sg, v)]
        return out

    env = lambda q: abs(q["t"]) ** (-s - 0.5) * q["sigma"] ** (s - (n - 1) / 2.0)
    ref = samples(*refined) if refined is not None else None
    rep = fit_envelope(samples(t_grid, sigma_grid), env, f"2.24_s{s:g}", refined=ref)
    rep.exponents["s"] = s
    return rep


def plancherel_mass(t: float, n: int = 4, h: float = 1.0, sigma_max: float | None = None,
                    per_unit: int = 1) -> float:
    """``int |K_h(sigma, t)|^2 sigma^{n-1} omega dsigma`` by quadrature in sigma."""
    # k_1 decays only like exp(-c sqrt(sigma)) (Gevrey cutoff), so the range is generous
    smax = sigma_max or (2.0 * SQRT2_ * abs(t) / h + 260.0) * h
    br = np.concatenate([np.linspace(0.0, min(2.0, smax), 9)[:-1],
                         np.linspace(min(2.0, smax), smax, int(per_unit * smax / h) + 2)])
    s, w = panels(br, 12)
    k = band_limited_kernel(funcalc.psi, h, t, s, n)
    return float(np.sum(w * np.abs(k) ** 2 * s ** (n - 1)) * sphere_area(n))


SQRT2_ = math.sqrt(2.0)


def plancherel_exact(n: int = 4, h: float = 1.0) -> float:
    """``(2pi)^{-n} int |psi(h^2 |xi|^2)|^2 dxi``."""
    lam, w = panels(np.linspace(1.0, SQRT2_, 33), 16)
    val = np.sum(w * funcalc.psi(lam * lam) ** 2 * lam ** (n - 1)) * sphere_area(n)
    return float(val / (2 * math.pi) ** n * h ** (-n))


# ---------------------------------------------------------------------------
# integrated-in-time norm

@dataclass
class IntegratedNorm:
    value: float
    tail: float
    tail_exponent: float
    times: np.ndarray
    norms: np.ndarray
    h: float



def integrated_V_norm(V, h: float, n: int = 4, symbol: Callable = funcalc.psi,
                      support=(1.0, 2.0), tau_max: float = 64.0, order: int = 6,
                      rho_samples=None, n_table: int = 600) -> IntegratedNorm:
    """``int_R || V e^{itG_0} psi(h^2 G_0) ||_{L1->L1} dt`` in scaled time ``t = h^2 tau``.

    ``K_h(-t) = conj K_h(t)`` so the integral is twice the one over ``t > 0``.
    Dyadic panels on ``[0, tau_max]``; the tail beyond is a fitted power law.
    """
    if V is None or getattr(V, "is_zero", False):
        return IntegratedNorm(0.0, 0.0, math.inf, np.zeros(0), np.zeros(0), h)
    R = V.support_radius or 10.0
    rho = np.asarray(rho_samples if rho_samples is not None else
                     np.concatenate([[0.0], np.geomspace(0.05, 2 * R, 11)]))
    smax = R + float(rho.max()) + 1.0 + R
    br = np.concatenate([[0.0], 2.0 ** np.arange(-2, math.log2(tau_max) + 1)])
    tau, wt = panels(br, order)
    vals = np.empty(tau.size)
    for i, tv in enumerate(tau):
        prop = BandLimitedPropagator(h, h * h * tv, n, symbol, support)
        k = prop.radial_kernel(smax, n_table)
        vals[i] = norm_L1_to_L1(V, k, rho_samples=rho, n=n).value
    body = float(np.sum(wt * vals))
    alpha, _ = _fit_tail(tau[-order:], vals[-order:])
    tail = math.inf if alpha <= 1 else float(vals[-1] * tau[-1] / (alpha - 1.0))
    total = 2.0 * h * h * (body + tail)
    return IntegratedNorm(total, 2.0 * h * h * tail, alpha, h * h * tau, vals, h)


def _fit_tail(x, y):
    C, beta = fit_power_law(x, np.maximum(np.abs(y), 1e-300))
    return beta, C


# ---------------------------------------------------------------------------
# frequency representation for Born terms

class JTable:
    """Cubic Hermite table of ``j_nu(w) = J_nu(w) / w^nu`` on ``[0, w_max]``."""

    def __init__(self, n: int, w_max: float, step: float = 2e-3):
        self.n = n
        self.step = step
        self.w_max = w_max
        w = np.arange(0.0, w_max + 2 * step, step)
        od = Order.from_dimension(n)
        f = np.real(bessel_j_ratio(od, w))
        # d/dw j_nu = -w j_{nu+1}
        d = -w * np.real(bessel_j_ratio(od.shifted(1), w)) * step
        self.size = w.size
        f0, f1, d0, d1 = f[:-1], f[1:], d[:-1], d[1:]
        # per-interval cubic in the local coordinate s, highest power first
        self.coef = np.stack([2 * f0 - 2 * f1 + d0 + d1, -3 * f0 + 3 * f1 - 2 * d0 - d1, d0, f0], axis=1)

    def __call__(self, w):
        w = np.asarray(w, float)
        if w.size and w.max() > self.w_max + self.step:
            raise DomainError("JTable argument beyond table range")
        x = w / self.step
        i = np.minimum(x.astype(np.int64), self.size - 2)
        s = x - i
        c = self.coef[i]
        return ((c[..., 0] * s + c[..., 1]) * s + c[..., 2]) * s + c[..., 3]


@dataclass(frozen=True)
class FrequencyRule:
    """Gauss nodes ``mu_q`` on ``[0, 2c]`` for ``eta_c`` with kernel weights."""

    c: float
    q: int = 48
    n: int = 4

    def nodes(self):
        per = 8
        m = max(1, self.q // per)
        mu, w = panels(np.linspace(0.0, 2.0 * self.c, m + 1), per)
        nu = (self.n - 2) / 2.0
        eta = funcalc.CutoffFamily(self.c).eta_a(mu)
        wk = w * mu ** nu * eta / (2.0 * (2 * math.pi) ** (nu + 1))
        return mu, wk

    def kernel(self, sigma, t: float, jt: JTable | None = None):
        mu, wk = self.nodes()
        sig = np.atleast_1d(np.asarray(sigma, float))
        arg = np.outer(sig, np.sqrt(mu))
        J = jt(arg) if jt is not None else np.real(
            bessel_j_ratio(Order.from_dimension(self.n), arg.ravel())).reshape(arg.shape)
        return (J * wk) @ np.exp(1j * t * mu)


def phi1(d):
    """``(e^d - 1) / d`` with the removable singularity filled in."""
    d = np.asarray(d, complex)
    out = np.empty(d.shape, complex)
    small = np.abs(d) < 1e-3
    ds = d[small]
    out[small] = 1 + ds / 2 + ds * ds / 6 + ds ** 3 / 24 + ds ** 4 / 120
    dl = d[~small]
    out[~small] = np.expm1(dl) / dl
    return out


def expdd1(x0, x1):
    """Divided difference ``exp[x0, x1]``."""
    x0, x1 = np.broadcast_arrays(np.asarray(x0, complex), np.asarray(x1, complex))
    return np.exp(x1) * phi1(x0 - x1)


def expdd2(x0, x1, x2, series_radius: float = 0.5, terms: int = 24):
    """Divided difference ``exp[x0, x1, x2]`` (symmetric), stable for close nodes."""
    X = np.stack(np.broadcast_arrays(np.asarray(x0, complex), np.asarray(x1, complex),
                                     np.asarray(x2, complex)))
    m = X.mean(axis=0)
    Y = X - m
    spread = np.max(np.abs(Y), axis=0)
    out = np.empty(m.shape, complex)
    near = spread < series_radius
    if np.any(near):
        y = Y[:, near]
        p = [None] + [np.sum(y ** k, axis=0) for k in range(1, terms + 1)]
        hk = [np.ones(y.shape[1], complex)]
        acc = hk[0] / 2.0
        fact = 2.0
        for k in range(1, terms + 1):
            hk.append(sum(p[i] * hk[k - i] for i in range(1, k + 1)) / k)
            fact *= (k + 2)
            acc = acc + hk[k] / fact
        out[near] = np.exp(m[near]) * acc
    far = ~near
    if np.any(far):
        y = Y[:, far]
        # order so that the first and last nodes are the most distant pair
        d01, d02, d12 = (np.abs(y[0] - y[1]), np.abs(y[0] - y[2]), np.abs(y[1] - y[2]))
        a, b, c = y[0].copy(), y[1].copy(), y[2].copy()
        swap01 = (d12 >= d02) & (d12 >= d01)     # most distant pair is (1,2)
        swap12 = (d01 >= d02) & (d01 > d12)      # most distant pair is (0,1)
        a[swap01], b[swap01] = y[1][swap01], y[0][swap01]
        b[swap12], c[swap12] = y[2][swap12], y[1][swap12]
        val = (expdd1(a, b) - expdd1(b, c)) / (a - c)
        out[far] = np.exp(m[far]) * val
    return out


# ---------------------------------------------------------------------------
# reduced space grids

@dataclass(frozen=True)
class XiGrid:
    """Origin-centred grid on ``R^n`` in reduced coordinates relative to a plane.

    ``a1, a2`` are the in-plane coordinates and ``rp`` the length of the
    orthogonal component; ``w`` integrates functions of ``(a1, a2, rp)``.
    """

    a1: np.ndarray
    a2: np.ndarray
    rp: np.ndarray
    r: np.ndarray
    w: np.ndarray

    @classmethod
    def build(cls, n: int, R: float, n_s: int, n_theta: int, n_phi: int) -> "XiGrid":
        rule = ComposeRule(n_theta=n_theta, n_phi=n_phi)
        from .radial import _sphere_nodes
        c, phi, wsph = _sphere_nodes(n, rule)
        m = max(1, n_s // 8)
        s, ws = panels(np.linspace(0.0, R, m + 1), min(8, n_s))
        S = s[:, None]
        a1 = (S * c[None, :] * np.cos(phi)[None, :]).ravel()
        a2 = (S * c[None, :] * np.sin(phi)[None, :]).ravel()
        rp = (S * np.sqrt(np.maximum(1.0 - c[None, :] ** 2, 0.0))).ravel()
        r = np.broadcast_to(S, (s.size, c.size)).ravel()
        w = ((ws * s ** (n - 1))[:, None] * wsph[None, :]).ravel()
        return cls(a1, a2, rp, r.copy(), w)

    @property
    def size(self) -> int:
        return self.w.size

    def dist(self, p) -> np.ndarray:
        return np.sqrt((self.a1 - p[0]) ** 2 + (self.a2 - p[1]) ** 2 + self.rp ** 2)


# ---------------------------------------------------------------------------
# Born series

@dataclass(frozen=True)
class BornConfig:
    a: float = 0.05
    left_factor: float = 4.0       # inner/left cutoff eta_{a'} with a' = left_factor * a
    q_right: int = 48
    q_left: int = 64
    q_mid: int = 24
    xi_s: int = 32
    xi_theta: int = 12
    xi_phi: int = 24
    mid_s: int = 10
    mid_theta: int = 6
    mid_phi: int = 12
    n_beta: int = 12
    budget_nodes: int = 5_000_000

    def refined(self) -> "BornConfig":
        return replace(self, q_right=2 * self.q_right, q_left=2 * self.q_left,
                       q_mid=self.q_mid + 8,
                       xi_s=2 * self.xi_s, xi_theta=2 * self.xi_theta, xi_phi=2 * self.xi_phi,
                       # order 2 is ~1e-3 of order 1; a modest bump keeps the tensor affordable
                       mid_s=self.mid_s + 2, mid_theta=self.mid_theta + 1,
                       mid_phi=self.mid_phi + 2, n_beta=self.n_beta + 4)


class BornSeries:
    """Duhamel terms of ``e^{itG} eta_a(G)`` for a radial ``V`` in the plane of the sample points.

    Order 0: ``e^{itG_0} eta_a(G_0)``.  Order 1:
    ``i int_0^t e^{i(t-s)G_0} eta_{a'}(G_0) V e^{isG_0} eta_a(G_0) ds``.  Order 2 has
    the middle evolution also cut off by ``eta_{a'}``.
    """

    def __init__(self, V, n: int = 4, config: BornConfig | None = None):
        if n != 4:
            raise UsageError("Born terms are implemented for n = 4")
        self.V = V
        self.n = n
        self.cfg = cfg = config or BornConfig()
        self.right = FrequencyRule(cfg.a, cfg.q_right, n)
        self.left = FrequencyRule(cfg.left_factor * cfg.a, cfg.q_left, n)
        self.mid = FrequencyRule(cfg.left_factor * cfg.a, cfg.q_mid, n)
        self.mu_r, self.w_r = self.right.nodes()
        self.mu_l, self.w_l = self.left.nodes()
        self.mu_m, self.w_m = self.mid.nodes()
        self.R = (V.support_radius if V is not None and V.support_radius else 8.0)
        self.zero = V is None or getattr(V, "is_zero", False)
        self._xi1 = None
        self._xi2 = None
        self._jt = None
        self._mid_cache = None

    # -- helpers
    def _jtab(self, dmax):
        wmax = dmax * math.sqrt(2 * self.cfg.left_factor * self.cfg.a) + 1.0
        if self._jt is None or self._jt.w_max < wmax:
            self._jt = JTable(self.n, max(wmax, 40.0))
        return self._jt

    def _B(self, d, mu, w):
        jt = self._jtab(float(np.max(d)) if d.size else 1.0)
        return jt(np.outer(d, np.sqrt(mu))) * w[None, :]

    def xi1(self) -> XiGrid:
        if self._xi1 is None:
            c = self.cfg
            self._xi1 = XiGrid.build(self.n, self.R, c.xi_s, c.xi_theta, c.xi_phi)
            if self._xi1.size * max(c.q_left, c.q_right) > 40 * c.budget_nodes:
                raise BudgetError("order-1 grid exceeds the node budget; use a coarser BornConfig")
        return self._xi1

    def xi2(self) -> XiGrid:
        if self._xi2 is None:
            c = self.cfg
            self._xi2 = XiGrid.build(self.n, self.R, c.mid_s, c.mid_theta, c.mid_phi)
            if self._xi2.size ** 2 * c.n_beta > 40 * c.budget_nodes:
                raise BudgetError("order-2 grid exceeds the node budget; use a coarser BornConfig")
        return self._xi2

    # -- order 0
    def free(self, sigma, t: float):
        return self.right.kernel(sigma, t, self._jtab(float(np.max(sigma)) + 1.0))

    # -- order 1
    def s1(self, x, y) -> np.ndarray:
        return self.s1_many([(x, y)])[0]

    def s1_many(self, pairs, chunk: int = 2048) -> list[np.ndarray]:
        """Order-1 frequency tensors; streamed over the grid so each point is tabulated once per chunk."""
        g = self.xi1()
        vw = g.w * self.V(g.r)
        pts = sorted({(float(p[0]), float(p[1])) for pr in pairs for p in pr})
        idx = {p: k for k, p in enumerate(pts)}
        out = [np.zeros((self.mu_l.size, self.mu_r.size)) for _ in pairs]
        for c0 in range(0, g.size, chunk):
            sl = slice(c0, c0 + chunk)
            d = [np.sqrt((g.a1[sl] - p[0]) ** 2 + (g.a2[sl] - p[1]) ** 2 + g.rp[sl] ** 2) for p in pts]
            L, R = {}, {}
            for k, (x, y) in enumerate(pairs):
                i, j = idx[(float(x[0]), float(x[1]))], idx[(float(y[0]), float(y[1]))]
                if i not in L:
                    L[i] = self._B(d[i], self.mu_l, self.w_l) * vw[sl, None]
                if j not in R:
                    R[j] = self._B(d[j], self.mu_r, self.w_r)
                out[k] += L[i].T @ R[j]
        return out

    def e1(self, t: float) -> np.ndarray:
        return t * expdd1(1j * t * self.mu_l[:, None], 1j * t * self.mu_r[None, :])

    # -- order 2
    def _mid(self):
        if self._mid_cache is None:
            g = self.xi2()
            nb = self.cfg.n_beta
            beta = math.pi * (np.arange(nb) + 0.5) / nb
            A = (g.a1[:, None] - g.a1[None, :]) ** 2 + (g.a2[:, None] - g.a2[None, :]) ** 2 \
                + g.rp[:, None] ** 2 + g.rp[None, :] ** 2
            P = 2 * g.rp[:, None] * g.rp[None, :]
            dmax = math.sqrt(float(A.max() + P.max()))
            jt = self._jtab(dmax)
            mids = []
            for mu, w in zip(self.mu_m, self.w_m):
                acc = np.zeros(A.shape)
                sq = math.sqrt(mu)
                for b in beta:
                    acc += jt(sq * np.sqrt(np.maximum(A - P * math.cos(b), 0.0)))
                mids.append(acc * (w / nb))
            self._mid_cache = mids
        return self._mid_cache

    def s2_many(self, pairs) -> list[np.ndarray]:
        g = self.xi2()
        vw = g.w * self.V(g.r)
        mids = self._mid()
        Ls = [self._B(g.dist(x), self.mu_l, self.w_l) * vw[:, None] for x, _ in pairs]
        Rs = [self._B(g.dist(y), self.mu_r, self.w_r) * vw[:, None] for _, y in pairs]
        Rall = np.concatenate(Rs, axis=1)
        qr = self.mu_r.size
        out = [np.empty((self.mu_l.size, self.mu_m.size, qr)) for _ in pairs]
        for b, M in enumerate(mids):
            MR = M @ Rall
            for k, L in enumerate(Ls):
                out[k][:, b, :] = L.T @ MR[:, k * qr:(k + 1) * qr]
        return out

    def e2(self, t: float) -> np.ndarray:
        xl = 1j * t * self.mu_l[:, None, None]
        xm = 1j * t * self.mu_m[None, :, None]
        xr = 1j * t * self.mu_r[None, None, :]
        return t * t * expdd2(xl, xm, xr)

    # -- assembled terms
    def terms(self, pairs, t_grid, order: int = 2):
        """Arrays ``(free, first, second)`` of shape ``(len(pairs), len(t_grid))``."""
        P, T = len(pairs), len(t_grid)
        free = np.empty((P, T), complex)
        first = np.zeros((P, T), complex)
        second = np.zeros((P, T), complex)
        for k, (x, y) in enumerate(pairs):
            d = math.hypot(x[0] - y[0], x[1] - y[1])
            for j, t in enumerate(t_grid):
                free[k, j] = self.free(np.array([d]), t)[0]
        if self.zero or order < 1:
            return free, first, second
        E1 = [self.e1(t) for t in t_grid]
        for k, S in enumerate(self.s1_many(pairs)):
            for j in range(T):
                first[k, j] = 1j * np.sum(S * E1[j])
        if order >= 2:
            S2 = self.s2_many(pairs)
            for j, t in enumerate(t_grid):
                E2 = self.e2(t)
                for k in range(P):
                    second[k, j] = -np.sum(S2[k] * E2)
        return free, first, second


def born_term(order: int, V, t: float, x, y, a: float = 0.05, n: int = 4,
              config: BornConfig | None = None) -> complex:
    """Single Duhamel term of the given order at ``(t, x, y)`` (points as planar pairs)."""
    if t == 0:
        raise DomainError("t must be nonzero")
    if order not in (1, 2):
        raise UsageError("order must be 1 or 2")
    cfg = config or BornConfig(a=a)
    bs = BornSeries(V, n, cfg)
    if bs.zero:
        return 0.0 + 0.0j
    x, y = _planar(x), _planar(y)
    f, g1, g2 = bs.terms([(x, y)], [t], order)
    return complex(g1[0, 0] if order == 1 else g2[0, 0])


def _planar(p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, float))
    if p.size == 1:
        return np.array([p[0], 0.0])
    if p.size >= 2 and np.allclose(p[2:], 0):
        return p[:2].copy()
    raise DomainError("points must lie in the sampling plane")


# ---------------------------------------------------------------------------
# sample pairs and the decay report

RADII = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)


def sample_pairs(n_random: int = 16, seed: int = 0, radii=RADII):
    """Collinear pairs ``x = r1 e1``, ``y = +-r2 e1`` plus random planar placements."""
    pairs = []
    for r1 in radii:
        for r2 in radii:
            for sg in ((1.0,) if r2 == 0 else (1.0, -1.0)):
                pairs.append((np.array([r1, 0.0]), np.array([sg * r2, 0.0])))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        r1, r2 = rng.choice(radii, 2)
        a1, a2 = rng.uniform(0, 2 * math.pi, 2)
        pairs.append((np.array([r1 * math.cos(a1), r1 * math.sin(a1)]),
                      np.array([r2 * math.cos(a2), r2 * math.sin(a2)])))
    return pairs


def t_grid_default(per_decade: int = 24, lo: float = 1.0, hi: float = 100.0) -> np.ndarray:
    m = int(round(per_decade * math.log10(hi / lo)))
    return np.geomspace(lo, hi, m + 1)


@dataclass
class DecayReport:
    t_grid: np.ndarray
    sup_values: np.ndarray
    normalized: np.ndarray
    max_normalized: float
    potential_id: str
    a: float
    truncation_order: int
    order_ratio: np.ndarray
    free_sup: np.ndarray
    n_pairs: int
    refined_max_normalized: float | None = None
    free_check: float | None = None

    @property
    def drift(self) -> float | None:
        if self.refined_max_normalized is None:
            return None
        return abs(self.refined_max_normalized - self.max_normalized) / self.max_normalized

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.normalized)))

    def to_csv(self) -> str:
        lines = ["t,sup,normalized,order_ratio"]
        for t, s, m, r in zip(self.t_grid, self.sup_values, self.normalized, self.order_ratio):
            lines.append(f"{t:.12e},{s:.12e},{m:.12e},{r:.12e}")
        return "\n".join(lines) + "\n"


def _decay_once(V, a, t_grid, order, pairs, n, cfg):
    bs = BornSeries(V, n, cfg)
    f0, f1, f2 = bs.terms(pairs, t_grid, order)
    tot = f0 + (f1 if order >= 1 else 0) + (f2 if order >= 2 else 0)
    sup = np.max(np.abs(tot), axis=0)
    s1 = np.max(np.abs(f1), axis=0)
    s2 = np.max(np.abs(f2), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(s1 > 0, s2 / np.where(s1 > 0, s1, 1.0), 0.0)
    return sup, ratio, np.max(np.abs(f0), axis=0), f0


def dispersive_decay_report(V, a: float = 0.05, t_grid=None, truncation_order: int = 2,
                            sample_pairs_spec: tuple[int, int] = (16, 0), n: int = 4,
                            config: BornConfig | None = None, refine: bool = True,
                            check_resonance: bool = True) -> DecayReport:
    """Per-t sup over sample pairs of ``|free + Born terms|``, normalized by ``t^{n/2}``."""
    t_grid = np.asarray(t_grid if t_grid is not None else t_grid_default())
    if check_resonance and V is not None and not getattr(V, "is_zero", False):
        from .potential import resonance_test
        rep, _ = resonance_test(V, RadialGrid.geometric(n, r_max=max(10.0, V.support_radius or 10.0)),
                                refine=False)
        if not rep.regular:
            raise PreconditionError(f"zero is not regular for {V.id}: sigma_min={rep.smallest_singular:.3g}")
    cfg = config or BornConfig(a=a)
    nr, seed = sample_pairs_spec
    pairs = sample_pairs(nr, seed)
    sup, ratio, fsup, f0 = _decay_once(V, a, t_grid, truncation_order, pairs, n, cfg)
    norm = sup * t_grid ** (n / 2.0)
    # independent route for the free part: direct quadrature of the eta_a kernel
    dists = np.array([math.hypot(x[0] - y[0], x[1] - y[1]) for x, y in pairs])
    ud, inv = np.unique(dists, return_inverse=True)
    direct = np.array([eta_kernel(a, float(t), ud, n)[inv] for t in t_grid]).T
    free_check = float(np.max(np.abs(direct - f0)) / np.max(np.abs(direct)))
    report = DecayReport(t_grid, sup, norm, float(np.max(norm)), getattr(V, "id", "zero"), a,
                         truncation_order, ratio, fsup, len(pairs), free_check=free_check)
    if refine:
        pairs2 = sample_pairs(2 * nr, seed)
        sup2, _, _, _ = _decay_once(V, a, t_grid, truncation_order, pairs2, n, cfg.refined())
        report.refined_max_normalized = float(np.max(sup2 * t_grid ** (n / 2.0)))
    return report


def free_band_limited_constant(a: float, t_grid, n: int = 4, sigma_max: float = 16.0,
                               n_sigma: int = 161) -> float:
    """``max_t t^{n/2} sup_sigma |K_{eta_a}(sigma, t)|`` on a dense sigma grid."""
    s = np.linspace(0.0, sigma_max, n_sigma)
    return float(max(abs(t) ** (n / 2.0) * np.max(np.abs(eta_kernel(a, float(t), s, n)))
                     for t in t_grid))


# ---------------------------------------------------------------------------
# F(t): Duhamel term with unrestricted free kernels

def conj_free_kernel(sigma, s: float, n: int = 4):
    """``(4 pi i s)^{-n/2} e^{i sigma^2 / 4s}``, the phase convention of the ``U`` kernel."""
    sigma = np.asarray(sigma, float)
    return (4j * math.pi * s) ** (-n / 2.0) * np.exp(1j * sigma * sigma / (4.0 * s))


def c_n(n: int) -> complex:
    """Constant in ``F_1(t)(x, y) = c_n int U(|x-xi|^2/4, |y-xi|^2/4, t) V(xi) dxi``."""
    return 1j * (4j * math.pi) ** (-n)


def F_kernel(V, t: float, x, y, n: int = 4, route: str = "direct", tau_order: int = 12,
             rule: ComposeRule | None = None, xi: XiGrid | None = None) -> complex:
    """Kernel of ``F_1(t) = i int_1^{t-1} e^{i(t-s)Delta} V e^{isDelta} ds`` at ``(x, y)``.

    ``route='direct'`` integrates compositions of the closed-form free kernels
    in ``s``; ``route='U'`` uses the oscillatory integral ``U`` of the
    ``oscint`` module under a space integral.
    """
    if V is None or getattr(V, "is_zero", False):
        return 0.0 + 0.0j
    if t <= 2:
        raise DomainError("F_1 needs t > 2")
    R = V.support_radius or 8.0
    if route == "direct":
        rule = rule or ComposeRule(s_per_decade=8, n_theta=16, n_phi=32)
        xv, yv = np.zeros(n), np.zeros(n)
        xp, yp = _planar(x), _planar(y)
        xv[:2], yv[:2] = xp, yp
        # s-panels graded toward both endpoints, phase-limited in the middle
        dmax = (R + max(np.linalg.norm(xp), np.linalg.norm(yp))) ** 2 / 4.0
        half = 0.5 * t
        g = np.concatenate([1.0 + (half - 1.0) * np.linspace(0, 1, 9) ** 2])
        nb = max(8, int(math.ceil(dmax * (1.0 - 1.0 / half) / (0.25 * math.pi))))
        g = np.unique(np.concatenate([g, 1.0 / np.linspace(1.0, 1.0 / half, nb + 1)]))
        br = np.unique(np.concatenate([g, t - g[::-1]]))
        s, w = panels(br, tau_order)
        acc = 0.0 + 0.0j
        for si, wi in zip(s, w):
            k1 = RadialKernel(lambda r, u=t - si: conj_free_kernel(r, u, n), n, singular=False)
            k2 = RadialKernel(lambda r, u=si: conj_free_kernel(r, u, n), n, singular=False)
            acc += wi * bipolar_compose(k1, V, k2, xv, yv, n, rule, method="origin", s_max=R)
        return 1j * acc
    if route == "U":
        from .oscint import U_eval
        g = xi or XiGrid.build(n, R, 48, 16, 32)
        xp, yp = _planar(x), _planar(y)
        s1 = g.dist(xp) ** 2 / 4.0
        s2 = g.dist(yp) ** 2 / 4.0
        u = U_eval(s1, s2, t, n)
        return complex(c_n(n) * np.sum(g.w * V(g.r) * u))
    raise UsageError("route must be 'direct' or 'U'")
