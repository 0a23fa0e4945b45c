"""Oscillatory integrals of the large-time Duhamel analysis.

    U(s1, s2, t) = int_1^{t-1} e^{i s1/(t-tau) + i s2/tau} (t-tau)^{-n/2} tau^{-n/2} dtau
    u(s1', s2', k) = int_2^{1/k} e^{i phi(mu)} (mu/(mu-1))^{n/2} mu^{n/2-2} dmu,
    phi(mu) = mu s2' + mu s1' / (mu - 1)

(the second written in ``mu = 1/tau'``).  Panels are laid out so that the
accumulated phase per panel stays below pi/4; each rule is refined by panel
bisection until two levels agree.

``W_1`` is the kernel of the high-frequency Duhamel piece.  The primary route
is the time convolution ``-i int_g^{t-g} Kt(s1, t-tau) K(s2, tau) dtau`` with
``Kt`` the kernel for the symbol ``1 - psi_1``; the second route is the
double spectral integral with the ``lambda_1`` tail moved onto a vertical ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import funcalc
from .envelope import Axis, EnvelopeFitReport, polished_fit
from .errors import AccuracyError, DomainError, UsageError
from .propagator import psi1, _lambda_breaks
from .quad import panels
from .specfun import Order, bessel_j_ratio

PHASE_STEP = 0.25 * math.pi


def _bisect(br: np.ndarray, level: int) -> np.ndarray:
    for _ in range(level):
        mid = 0.5 * (br[:-1] + br[1:])
        br = np.sort(np.concatenate([br, mid]))
    return br


def _phase_breaks(lo, hi, accumulated, total, extra=()):
    """Breakpoints at equal increments ``PHASE_STEP`` of a monotone phase bound."""
    m = int(math.ceil(total / PHASE_STEP))
    br = [lo, hi]
    if m > 1:
        x = np.linspace(lo, hi, 20 * m + 200)
        # dense inversion of the monotone bound
        xs = np.concatenate([np.geomspace(1e-9, 1.0, 400) * (hi - lo) + lo, x])
        xs = np.unique(np.clip(xs, lo, hi))
        A = accumulated(xs)
        br += list(np.interp(np.linspace(0, A[-1], m + 1)[1:-1], A, xs))
    return np.unique(np.concatenate([np.asarray(br, float), [e for e in extra if lo < e < hi]]))


def _adaptive(rule_at_level, tol: float, max_level: int = 5, order: int = 10):
    prev = None
    for level in range(max_level + 1):
        val = rule_at_level(level, order)
        if prev is not None:
            err = np.max(np.abs(val - prev))
            if err <= tol:
                return val, float(err)
        prev = val
    raise AccuracyError("oscillatory quadrature did not converge", achieved=float(err))


# ---------------------------------------------------------------------------
# U

@dataclass
class UResult:
    value: np.ndarray
    error: float
    empty: bool = False


def U_eval(sigma1, sigma2, t: float, n: int = 4, tol: float = 1e-10, info: bool = False):
    """``U(sigma1, sigma2, t)``, vectorized over ``sigma1, sigma2``; zero (flagged) for ``t <= 2``."""
    s1, s2 = np.broadcast_arrays(np.asarray(sigma1, float), np.asarray(sigma2, float))
    if np.any(s1 < 0) or np.any(s2 < 0):
        raise DomainError("sigma must be nonnegative")
    if t <= 2:
        res = UResult(np.zeros(s1.shape, complex), 0.0, True)
        return res if info else res.value
    S1, S2 = float(s1.max(initial=0)), float(s2.max(initial=0))
    lo, hi = 1.0, t - 1.0

    def acc(x):
        return S2 * (1.0 - 1.0 / x) + S1 * (1.0 / (t - x) - 1.0 / (t - 1.0))

    half = 0.5 * t
    geo = 1.0 + (half - 1.0) * (np.geomspace(1.0, 1.0 + 8 * (half - 1.0), 12) - 1.0) / (8 * (half - 1.0))
    extra = np.concatenate([geo, t - geo])
    base = _phase_breaks(lo, hi, acc, acc(hi), extra)
    # mirror-symmetric nodes: swapping sigma1, sigma2 reflects tau -> t - tau
    base = np.unique(np.concatenate([base, t - base]))
    a1, a2 = s1.ravel(), s2.ravel()

    def rule(level, order):
        tau, w = panels(_bisect(base, level), order)
        amp = w * (t - tau) ** (-n / 2.0) * tau ** (-n / 2.0)
        out = np.empty(a1.size, complex)
        chunk = max(1, 4_000_000 // tau.size)
        for k in range(0, a1.size, chunk):
            ph = np.outer(a1[k:k + chunk], 1.0 / (t - tau)) + np.outer(a2[k:k + chunk], 1.0 / tau)
            out[k:k + chunk] = np.exp(1j * ph) @ amp
        return out

    val, err = _adaptive(rule, tol)
    res = UResult(val.reshape(s1.shape), err)
    if info:
        return res
    return res.value if res.value.ndim else complex(res.value)


def U_closed_form_zero(t: float, n: int = 4) -> float:
    """``U(0, 0, t)`` for ``n = 4`` by partial fractions."""
    if n != 4:
        raise UsageError("closed form implemented for n = 4")
    if t <= 2:
        return 0.0
    # int_1^{t-1} dtau / (tau^2 (t-tau)^2)
    F = lambda x: (-1.0 / x + 1.0 / (t - x)) / t ** 2 + 2.0 / t ** 3 * (math.log(x) - math.log(t - x))
    return F(t - 1.0) - F(1.0)


# ---------------------------------------------------------------------------
# u

def _u_amp(mu, n):
    return (mu / (mu - 1.0)) ** (n / 2.0) * mu ** (n / 2.0 - 2.0)


def _phi(mu, s1p, s2p):
    return mu * s2p + s1p * mu / (mu - 1.0)


def _u_direct_interval(s1p, s2p, lo, hi, n, tol):
    if hi <= lo:
        return np.zeros(np.broadcast(s1p, s2p).shape, complex), 0.0
    a1, a2 = np.broadcast_arrays(np.asarray(s1p, float), np.asarray(s2p, float))
    S1, S2 = float(a1.max(initial=0)), float(a2.max(initial=0))
    acc = lambda x: S2 * (x - lo) + S1 * (lo / (lo - 1.0) - x / (x - 1.0))
    extra = lo + (hi - lo) * (np.geomspace(1.0, 101.0, 10) - 1.0) / 100.0
    base = _phase_breaks(lo, hi, acc, acc(hi), extra)
    f1, f2 = a1.ravel(), a2.ravel()

    def rule(level, order):
        mu, w = panels(_bisect(base, level), order)
        amp = w * _u_amp(mu, n)
        g = mu / (mu - 1.0)
        out = np.empty(f1.size, complex)
        chunk = max(1, 4_000_000 // mu.size)
        for k in range(0, f1.size, chunk):
            ph = np.outer(f2[k:k + chunk], mu) + np.outer(f1[k:k + chunk], g)
            out[k:k + chunk] = np.exp(1j * ph) @ amp
        return out

    val, err = _adaptive(rule, tol)
    return val.reshape(a1.shape), err


def u_eval(sigma1p, sigma2p, kappa: float, n: int = 4, method: str = "direct",
           tol: float = 1e-11, gamma: float = 0.05):
    """``u(sigma1', sigma2', kappa)``; ``method='contour'`` rotates the path near ``mu_0``."""
    if not 0 < kappa <= 0.5:
        raise DomainError("kappa must lie in (0, 1/2]")
    if method == "direct":
        v, _ = _u_direct_interval(sigma1p, sigma2p, 2.0, 1.0 / kappa, n, tol)
        return v if v.ndim else complex(v)
    if method == "contour":
        s1, s2 = float(sigma1p), float(sigma2p)
        prof = classify_case(s1, s2, kappa) if s2 > 0 else None
        c = min(max(prof.mu0 if prof else 2.0, 2.0), 1.0 / kappa)
        lo, hi = max(0.9 * c, 2.0), min(1.1 * c, 1.0 / kappa)
        mid = _stationary_piece_contour(s1, s2, c, lo, hi, n, gamma)
        left, _ = _u_direct_interval(s1, s2, 2.0, lo, n, tol)
        right, _ = _u_direct_interval(s1, s2, hi, 1.0 / kappa, n, tol)
        return complex(left + mid + right)
    raise UsageError("method must be 'direct' or 'contour'")


def _ray_integral(f, a, rot, n_panels, order=16):
    """``int_0^a f dz`` via the ray ``z = e^{i rot} y`` plus the closing arc back to ``a``."""
    if a == 0:
        return 0.0 + 0.0j
    y, w = panels(np.linspace(0.0, a, n_panels + 1), order)
    e = np.exp(1j * rot)
    ray = np.sum(w * f(e * y)) * e
    th, wt = panels(np.linspace(rot, 0.0, max(4, n_panels // 4) + 1), order)
    z = a * np.exp(1j * th)
    arc = np.sum(wt * f(z) * 1j * z)
    return complex(ray + arc)


def _stationary_piece_contour(s1p, s2p, c, lo, hi, n, gamma):
    """``int_lo^hi e^{i phi} amp dmu`` with ``mu = c (1 + z)`` on rotated rays from ``z = 0``."""
    f = lambda z: np.exp(1j * _phi(c * (1 + z), s1p, s2p)) * _u_amp(c * (1 + z), n) * c
    total = 0.0 + 0.0j
    for a, sgn in ((hi / c - 1.0, 1.0), (lo / c - 1.0, -1.0)):
        if a == 0:
            continue
        # rotate to the side where Im(phi) grows
        cands = []
        for rot in (gamma, -gamma):
            zt = 0.5 * a * np.exp(1j * rot)
            cands.append((float(np.imag(_phi(c * (1 + zt), s1p, s2p))), rot))
        rot = max(cands)[1]
        var = abs(_phi(c * (1 + a), s1p, s2p) - _phi(c, s1p, s2p))
        m = max(8, int(math.ceil(var / PHASE_STEP)))
        total += sgn * _ray_integral(f, a, rot, m)
    return total


@dataclass(frozen=True)
class PhaseProfile:
    sigma1p: float
    sigma2p: float
    kappa: float
    mu0: float
    case: str
    min_phase_derivative: float | None = None
    degenerate: bool = False


def classify_case(sigma1p: float, sigma2p: float, kappa: float) -> PhaseProfile:
    """Case 2 iff ``mu_0 = 1 + sqrt(s1'/s2')`` lies in ``[3/2, 3/(2 kappa)]``."""
    if not 0 < kappa <= 0.5:
        raise DomainError("kappa must lie in (0, 1/2]")
    if sigma2p <= 0:
        return PhaseProfile(sigma1p, sigma2p, kappa, math.inf, "one", None, True)
    mu0 = 1.0 + math.sqrt(sigma1p / sigma2p)
    two = 1.5 <= mu0 <= 1.5 / kappa
    mind = None
    if not two:
        mu = np.geomspace(2.0, 1.0 / kappa, 2001) if 1 / kappa > 2 else np.array([2.0])
        mind = float(np.min(np.abs(sigma2p - sigma1p / (mu - 1.0) ** 2)))
    return PhaseProfile(sigma1p, sigma2p, kappa, mu0, "two" if two else "one", mind)


def u1_stationary(sigma1p, sigma2p, kappa, n: int = 4, method: str = "direct", gamma: float = 0.05):
    """Piece of ``u`` over ``I(mu_0) = [0.9 mu_0, 1.1 mu_0] cap [2, 1/kappa]`` (Case 2)."""
    prof = classify_case(sigma1p, sigma2p, kappa)
    if prof.case != "two":
        raise DomainError("stationary piece defined in Case 2 only")
    lo, hi = max(0.9 * prof.mu0, 2.0), min(1.1 * prof.mu0, 1.0 / kappa)
    if hi <= lo:
        return 0.0 + 0.0j
    if method == "contour":
        return complex(_stationary_piece_contour(sigma1p, sigma2p, prof.mu0, lo, hi, n, gamma))
    v, _ = _u_direct_interval(sigma1p, sigma2p, lo, hi, n, 1e-12)
    return complex(v)


def contour_lemma_integral(lam: float, mu0: float, a: float, n: int = 4, method: str = "contour",
                           gamma: float = 0.05) -> complex:
    """``int_0^a e^{i lam phi(z)} g(z) dz`` with the rescaled phase and amplitude of ``u_1``."""
    if abs(a) > 0.1:
        raise DomainError("|a| must be at most 1/10")

    def phi(z):
        return (1 + z) * (1 + (mu0 - 1) ** 2 / (mu0 * (1 + z) - 1))

    def g(z):
        return ((1 + z) / (1 + z - 1 / mu0)) ** (n / 2.0) * (1 + z) ** (n / 2.0 - 2)

    f = lambda z: np.exp(1j * lam * phi(z)) * g(z)
    var = abs(lam * (phi(a) - phi(0.0)))
    m = max(8, int(math.ceil(var / PHASE_STEP)))
    if method == "contour":
        return _ray_integral(f, a, gamma, m)
    y, w = panels(np.linspace(0.0, a, m + 1), 16)
    return complex(np.sum(w * f(y + 0j)))


# ---------------------------------------------------------------------------
# W_1

@dataclass(frozen=True)
class WPieceSpec:
    which: str = "W1"
    t: float = 4.0
    gamma: float = 0.1
    sigma1: float = 1.0
    sigma2: float = 1.0
    k: int | None = None
    m: int | None = None

    def __post_init__(self):
        if self.which not in ("W1", "W1_1", "W1_2"):
            raise UsageError("which must be W1, W1_1 or W1_2")
        if not self.gamma > 0 or self.t < 2 * self.gamma:
            raise DomainError("need t >= 2 gamma > 0")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise DomainError("sigma must be positive")


def _kernel_times(symbol, support, h, times, sigma, n, order=12):
    """``K_h(sigma, t_j)`` for many times (one sigma); node set covariant in ``h``."""
    times = np.asarray(times, float)
    tmax = float(np.max(np.abs(times)))
    br = _lambda_breaks(support[0], support[1], tmax / (h * h), sigma / h)
    lam1, w1 = panels(br, order)
    lam, w = lam1 / h, w1 / h
    nu = (n - 2) / 2.0
    j = np.real(bessel_j_ratio(Order.from_dimension(n), sigma * lam))
    c = w * symbol(h * h * lam * lam) * lam ** (2 * nu + 1) * j / (2 * math.pi) ** (nu + 1)
    return np.exp(1j * np.outer(times, lam * lam)) @ c


def _tau_breaks(t, g, s1, n_min=8):
    """Breakpoints (h = 1 units) for ``int_g^{t-g} Kt(s1, t-tau) K(s2, tau) dtau``."""
    L = t - 2 * g
    nb = max(n_min, int(math.ceil(L / 0.3)))
    uni = np.linspace(g, t - g, nb + 1)
    # free phase s1^2/(4 s) in s = t - tau, graded toward s = g
    P0 = s1 * s1 / (4 * g)
    P1 = s1 * s1 / (4 * (t - g))
    m = int(math.ceil((P0 - P1) / PHASE_STEP))
    s = s1 * s1 / (4 * (P0 - PHASE_STEP * np.arange(1, m))) if m > 1 else np.zeros(0)
    geo = g * np.geomspace(1.0, max(2.0, (t - g) / g), 16)
    ss = np.concatenate([s, geo])
    ss = ss[(ss > g) & (ss < t - g)]
    return np.unique(np.concatenate([uni, t - ss]))


def W_eval(spec: WPieceSpec, h: float = 1.0, n: int = 4, route: str = "tau", order: int = 12,
           level: int = 0) -> complex:
    """``W_h(sigma1, sigma2, t, gamma)``; ``route='tau'`` (time convolution) or ``'lambda'``."""
    if route == "lambda":
        if h != 1.0:
            raise UsageError("the spectral route is implemented at h = 1")
        if spec.which == "W1_1":
            return _W_lambda(spec, n, first=True)
        if spec.which == "W1_2":
            return _W_lambda(spec, n, first=False)
        return _W_lambda(spec, n, True) - _W_lambda(spec, n, False)
    if route != "tau":
        raise UsageError("route must be 'tau' or 'lambda'")
    if spec.which != "W1":
        raise UsageError("the time route gives the full W only")
    t1, g1, s1 = spec.t / h ** 2, spec.gamma / h ** 2, spec.sigma1 / h
    br = _bisect(_tau_breaks(t1, g1, s1), level)
    tau1, w1 = panels(br, order)
    tau, w = tau1 * h * h, w1 * h * h
    K = _kernel_times(funcalc.psi, (1.0, 2.0), h, tau, spec.sigma2, n)
    s = spec.t - tau
    Kt = (-4j * math.pi * s) ** (-n / 2.0) * np.exp(-1j * spec.sigma1 ** 2 / (4.0 * s))
    Kt = Kt - _kernel_times(psi1, (0.5, 4.0), h, s, spec.sigma1, n)
    return complex(-1j * np.sum(w * Kt * K))


def _W_lambda(spec: WPieceSpec, n: int, first: bool, order: int = 8) -> complex:
    t, g, s1, s2 = spec.t, spec.gamma, spec.sigma1, spec.sigma2
    A, B = (t - g, g) if first else (g, t - g)   # phases of u1 and u2
    nu = (n - 2) / 2.0
    od = Order.from_dimension(n)
    # u2 on supp psi = [1, 2]
    n2 = max(8, int(math.ceil((B + s2 * (math.sqrt(2) - 1)) / PHASE_STEP)))
    u2, w2 = panels(np.linspace(1.0, 2.0, n2 + 1), order)
    f2 = w2 * funcalc.psi(u2) * u2 ** nu * np.real(bessel_j_ratio(od, s2 * np.sqrt(u2))) \
        * np.exp(1j * B * u2)
    # u1 on [0, U0] then the vertical ray U0 + i s
    U0 = max(8.0, (s1 / A) ** 2)
    n_a = int(math.ceil(A * U0 / PHASE_STEP))
    n_s = int(math.ceil(s1 * math.sqrt(U0) / PHASE_STEP))
    br = np.unique(np.concatenate([[0.0, 0.5, 1.0, 2.0, 4.0], np.linspace(0, U0, n_a + 2),
                                   np.linspace(0, math.sqrt(U0), n_s + 2) ** 2,
                                   np.linspace(0.5, 1.0, 9), np.linspace(2.0, 4.0, 17)]))
    br = br[br <= U0]
    u1, w1 = panels(br, order)
    f1 = w1 * (1.0 - psi1(u1)) * u1 ** nu * np.real(bessel_j_ratio(od, s1 * np.sqrt(u1))) \
        * np.exp(1j * A * u1)
    real_part = f1 @ (1.0 / (u2[None, :] - u1[:, None])) @ f2
    S = 80.0 / A
    sb = np.concatenate([[0.0], np.geomspace(1e-3 * S, S, 24)])
    sr, wr = panels(sb, 16)
    z = U0 + 1j * sr
    jr = bessel_j_ratio(od, s1 * np.sqrt(z))
    fr = 1j * wr * z ** nu * jr * np.exp(1j * A * z)
    tail = fr @ (1.0 / (u2[None, :] - z[:, None])) @ f2
    pref = 1.0 / (4 * (2 * math.pi) ** (2 * nu + 2))
    return complex(pref * (real_part + tail))


def rho_function(u1, u2):
    """``rho(u1, u2) = (1 - psi_1)(u1) psi(u2) / (u2 - u1)``."""
    u1, u2 = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
    out = np.zeros(u1.shape)
    num = (1.0 - psi1(u1)) * funcalc.psi(u2)
    m = num != 0
    out[m] = num[m] / (u2[m] - u1[m])
    return out


# ---------------------------------------------------------------------------
# envelope sweeps

def _grouped(pts, key, fn):
    """Evaluate ``fn(key_value, indices)`` per distinct value of ``key``; returns |values|."""
    out = np.empty(len(pts))
    groups: dict = {}
    for i, p in enumerate(pts):
        groups.setdefault(p[key], []).append(i)
    for kv, idx in groups.items():
        out[idx] = np.abs(fn(kv, idx))
    return out


def _u1_batch(s1p, s2p, kappa, n, tol=1e-12):
    """Vectorized stationary piece: each point integrated over its own ``I(mu_0)``."""
    s1p, s2p = np.asarray(s1p, float), np.asarray(s2p, float)
    mu0 = 1.0 + np.sqrt(s1p / s2p)
    lo, hi = np.maximum(0.9 * mu0, 2.0), np.minimum(1.1 * mu0, 1.0 / kappa)
    L = np.maximum(hi - lo, 0.0)
    var = (s2p + s1p / (lo - 1.0) ** 2) * L
    base = np.linspace(0.0, 1.0, max(8, int(math.ceil(var.max(initial=0) / PHASE_STEP))) + 1)

    def rule(level, order):
        x, w = panels(_bisect(base, level), order)
        mu = lo[:, None] + L[:, None] * x[None, :]
        f = np.exp(1j * _phi(mu, s1p[:, None], s2p[:, None])) * _u_amp(mu, n)
        return (f * w[None, :]) @ np.ones(x.size) * L

    val, _ = _adaptive(rule, tol)
    return val


def _U_values(n):
    def value(pts):
        return _grouped(pts, "t", lambda t, idx: U_eval(
            np.array([pts[i]["sigma1"] for i in idx]), np.array([pts[i]["sigma2"] for i in idx]), t, n))
    return value


def _u_values(n, kind):
    def fn(k, idx, pts):
        a = np.array([pts[i]["sigma1p"] for i in idx])
        b = np.array([pts[i]["sigma2p"] for i in idx])
        if kind == "u1":
            return _u1_batch(a, b, k, n)
        return u_eval(a, b, k, n)
    return lambda pts: _grouped(pts, "kappa", lambda k, idx: fn(k, idx, pts))


def bound_B6_sweep(n: int = 4, axes=None, refine: bool = True, **polish) -> EnvelopeFitReport:
    """Fit of ``|U| <= C t^{-n/2} (sigma1^{-1/2} + sigma2^{-1/2})``."""
    axes = axes or {"sigma1": Axis(1e-2, 1e2, 9), "sigma2": Axis(1e-2, 1e2, 9), "t": Axis(2.5, 200.0, 7)}
    env = lambda q: q["t"] ** (-n / 2.0) * (q["sigma1"] ** -0.5 + q["sigma2"] ** -0.5)
    return polished_fit(_U_values(n), env, axes, "B.6", refine=refine, **polish)


U_BOUNDS = {
    "B.8": ("all", lambda q, n: q["kappa"] ** (-(n - 3) / 2.0) * q["sigma2p"] ** -0.5),
    "B.9": ("all", lambda q, n: q["kappa"] ** (-(n - 2) / 2.0)),
    "B.12": ("one", lambda q, n: q["kappa"] ** (-(n - 4) / 2.0) / q["sigma2p"]),
    "B.15": ("u1", lambda q, n: q["kappa"] ** (-(n - 3) / 2.0) * q["sigma2p"] ** -0.5),
}


def u_bound_sweep(bound_id: str, n: int = 4, axes=None, refine: bool = True, **polish) -> EnvelopeFitReport:
    """Envelope fits for ``u``: the three Case-1 bounds and the Case-2 stationary-piece bound (see ``U_BOUNDS``)."""
    if bound_id not in U_BOUNDS:
        raise UsageError(f"unknown u bound {bound_id}")
    kind, envf = U_BOUNDS[bound_id]
    axes = axes or {"sigma1p": Axis(1e-2, 1e2, 9), "sigma2p": Axis(1e-2, 1e2, 9),
                    "kappa": Axis(0.01, 0.5, 6)}
    keep = None
    if kind == "one":
        keep = lambda q: classify_case(q["sigma1p"], q["sigma2p"], q["kappa"]).case == "one"
    elif kind == "u1":
        keep = lambda q: classify_case(q["sigma1p"], q["sigma2p"], q["kappa"]).case == "two"
    return polished_fit(_u_values(n, kind), lambda q: envf(q, n), axes, bound_id, refine=refine,
                        keep=keep, **polish)


def bound_B14_sweep(n: int = 4, axes=None, refine: bool = True, **polish) -> EnvelopeFitReport:
    """``|int_0^a e^{i lam phi} g dz| <= C lam^{-1/2}`` for ``lam in [1, 1e4]``."""
    axes = axes or {"lam": Axis(1.0, 1e4, 13), "mu0": Axis(values=(2.0, 5.0, 10.0)),
                    "a": Axis(values=(0.1, -0.1))}
    value = lambda pts: np.array([contour_lemma_integral(p["lam"], p["mu0"], p["a"], n) for p in pts])
    return polished_fit(value, lambda q: q["lam"] ** -0.5, axes, "B.14", refine=refine, **polish)


def bound_B25_sweep(n: int = 4, axes=None, eps: float = 0.1, refine: bool = True,
                    **polish) -> EnvelopeFitReport:
    """Final ``W_1`` envelope over ``sigma_i in [0.1, 10]``, ``gamma in {0.1, 0.2}``, ``t in [4 gamma, 50]``."""
    axes = axes or {"sigma1": Axis(0.1, 10.0, 5), "sigma2": Axis(0.1, 10.0, 5),
                    "t": Axis(0.4, 50.0, 7), "gamma": Axis(values=(0.1, 0.2))}
    polish = {"top": 3, "rounds": 2, "points": 5, **polish}

    def value(pts):
        return np.array([W_eval(WPieceSpec("W1", p["t"], p["gamma"], p["sigma1"], p["sigma2"]), n=n)
                         for p in pts])

    def env(q):
        s1, s2 = q["sigma1"], q["sigma2"]
        return (q["gamma"] ** (-(n - 3) / 2.0 - eps) * q["t"] ** (-n / 2.0)
                * (s1 ** (2 - n) + s1 ** (-1 + eps) + s2 ** (2 - n) + s2 ** (-1 + eps)))

    rep = polished_fit(value, env, axes, "B.25", refine=refine, keep=lambda q: q["t"] >= 4 * q["gamma"],
                       **polish)
    rep.exponents["epsilon"] = eps
    return rep


def bound_B26_sweep(axes=None, refine: bool = True, **polish) -> EnvelopeFitReport:
    """``|rho(u1, u2)| <= C <u1>^{-1}`` (alpha = 0)."""
    axes = axes or {"u1": Axis(1e-3, 1e4, 29), "u2": Axis(1.0, 2.0, 11, "lin")}
    value = lambda pts: rho_function([p["u1"] for p in pts], [p["u2"] for p in pts])
    return polished_fit(value, lambda q: 1.0 / (1.0 + q["u1"]), axes, "B.26", refine=refine, **polish)


# ---------------------------------------------------------------------------
# identities and aliases

def U_from_u(sigma1: float, sigma2: float, t: float, n: int = 4, tol: float = 1e-12) -> complex:
    """``t^(1-n) (u(s1/t, s2/t, 1/t) + u(s2/t, s1/t, 1/t))``: the split of ``U`` at ``tau = t/2``."""
    if t < 2:
        raise DomainError("the split needs t >= 2")
    k = 1.0 / t
    a, b = sigma1 * k, sigma2 * k
    return t ** (1.0 - n) * (u_eval(a, b, k, n, tol=tol) + u_eval(b, a, k, n, tol=tol))


def identity_B7_check(n_points: int = 20, seed: int = 0, n: int = 4) -> float:
    """Largest relative gap between ``U`` and :func:`U_from_u` at random points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        s1, s2 = 10.0 ** rng.uniform(-2, 2, 2)
        t = float(rng.uniform(2.5, 60.0))
        direct = complex(U_eval(s1, s2, t, n, tol=1e-12))
        split = U_from_u(s1, s2, t, n)
        worst = max(worst, abs(direct - split) / abs(direct))
    return worst


def W1_eval(spec: WPieceSpec, cutoffs=None, n: int = 4, route: str = "tau", **kw) -> complex:
    """``W_1`` (``h = 1``); ``cutoffs`` is accepted for interface symmetry (the pieces fix them)."""
    return W_eval(spec, 1.0, n, route, **kw)
