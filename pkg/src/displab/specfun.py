"""Scaled cylinder functions for the free resolvent and propagator kernels.

Conventions (``nu = (n-2)/2``)::

    Hplus_nu(z)  = z**nu * H1_nu(z)        valid for Im z >= 0
    Hminus_nu(z) = z**nu * H2_nu(z)        valid for Im z <= 0
    Jcal_nu(z)   = z**nu * J_nu(z) = (Hplus + Hminus) / 2
    b_nu^{+-}(z) = Hpm_nu(z) * exp(-+ i z) / 2,  Jcal = e^{iz} b^+ + e^{-iz} b^-

Half-integer orders are exact: ``Hplus = sqrt(2/pi) e^{iz} p(z)`` with a
polynomial ``p`` generated by the three-term recurrence
``H_{nu+1} = 2 nu H_nu - z^2 H_{nu-1}`` for the scaled functions.

Integer orders are evaluated piecewise:

* ``|z| <= 12`` and ``Im z <= 3``: ascending series (J and Y with the log term),
* ``|z| <= 12`` with ``Im z > 3``, and ``12 < |z| <= 20``: the Laplace-type integral
  ``H1 = sqrt(2/(pi z)) e^{i w} / Gamma(nu+1/2) * int e^{-u} u^(nu-1/2)
  (1 + iu/2z)^(nu-1/2) du`` by generalized Gauss-Laguerre; the series loses
  ``exp(2 Im z)`` to cancellation there and the asymptotic series only
  reaches about 1e-10 near ``|z| = 12``,
* ``|z| > 20``: Hankel asymptotic expansion truncated at its smallest term and
  at most ``ceil(|z|)`` terms.

The minus branch uses the reflection ``Hminus(z) = conj(Hplus(conj z))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_genlaguerre

from .envelope import EnvelopeFitReport, fit_envelope
from .errors import DomainError, RangeError

SERIES_RADIUS = 12.0
SERIES_MAX_IMAG = 3.0
ASYM_RADIUS = 20.0        # Laguerre quadrature between SERIES_RADIUS and here
MAX_ABS_ARG = 1e6
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_EULER_GAMMA = 0.57721566490153286061
_SERIES_TERMS = 60
_LAGUERRE_NODES = 80


@dataclass(frozen=True)
class Order:
    """Bessel order ``nu``, stored as the integer ``2 nu``."""

    twice_nu: int

    @classmethod
    def from_dimension(cls, n: int) -> "Order":
        if int(n) != n or n < 4:
            raise DomainError(f"dimension must be an integer >= 4, got {n}")
        return cls(int(n) - 2)

    @classmethod
    def of(cls, nu) -> "Order":
        f = Fraction(nu).limit_denominator(2)
        if f.denominator not in (1, 2) or abs(float(f) - float(nu)) > 1e-12:
            raise DomainError(f"order must be an integer or half-integer, got {nu}")
        return cls(int(2 * f))

    @property
    def nu(self) -> float:
        return self.twice_nu / 2.0

    @property
    def dimension(self) -> int:
        return self.twice_nu + 2

    @property
    def parity(self) -> str:
        return "integer" if self.twice_nu % 2 == 0 else "half-integer"

    def shifted(self, k: int) -> "Order":
        return Order(self.twice_nu + 2 * k)


@dataclass(frozen=True)
class ScaledCylinderValue:
    value: complex
    argument: complex
    branch: str


def _as_order(order) -> Order:
    if isinstance(order, Order):
        return order
    return Order.of(order)


def _check_branch(branch: str) -> int:
    if branch in ("plus", "+", 1):
        return 1
    if branch in ("minus", "-", -1):
        return -1
    raise DomainError(f"branch must be 'plus' or 'minus', got {branch!r}")


# ---------------------------------------------------------------------------
# half-integer orders: exact polynomial form

@lru_cache(maxsize=None)
def _halfint_poly(m: int) -> np.ndarray:
    """Coefficients (ascending powers) of p with Hplus_{m+1/2} = sqrt(2/pi) e^{iz} p."""
    p_prev = np.array([-1j])               # m = 0
    if m == 0:
        return p_prev
    p_cur = np.array([-1j, -1.0 + 0j])     # m = 1: -i - z
    for k in range(1, m):
        nu = k + 0.5
        nxt = np.zeros(len(p_cur) + 2, complex)
        nxt[:len(p_cur)] += 2 * nu * p_cur
        nxt[2:2 + len(p_prev)] -= p_prev
        p_prev, p_cur = p_cur, nxt
    return p_cur


def _hplus_halfint(twice_nu: int, z: np.ndarray) -> np.ndarray:
    pref = _SQRT_2_OVER_PI * np.exp(1j * z)
    if twice_nu >= 1:
        coeffs = _halfint_poly((twice_nu - 1) // 2)
        return pref * np.polynomial.polynomial.polyval(z, coeffs)
    # nu = -1/2, -3/2, ... via the downward recurrence
    h_hi = _hplus_halfint(1, z)                       # nu = 1/2
    h_lo = pref / z                                   # nu = -1/2
    nu = -0.5
    while 2 * nu > twice_nu:
        h_hi, h_lo = h_lo, (2 * nu * h_lo - h_hi) / z**2
        nu -= 1.0
    return h_lo


# ---------------------------------------------------------------------------
# integer orders

@lru_cache(maxsize=None)
def _series_coeffs(n: int):
    k = np.arange(_SERIES_TERMS)
    fact_k = np.array([math.factorial(i) for i in k], float)
    fact_nk = np.array([math.factorial(n + i) for i in k], float)
    c_j = (-1.0) ** k / (4.0 ** k * fact_k * fact_nk) / 2.0 ** n
    harm = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, _SERIES_TERMS + n + 1))])
    psi_sum = (-2 * _EULER_GAMMA + harm[k] + harm[n + k])
    c_y = psi_sum * c_j
    fin = np.array([math.factorial(n - i - 1) / math.factorial(i) / 4.0 ** i
                    for i in range(n)] or [0.0], float)
    return c_j, c_y, fin


def _hplus_int_series(n: int, z: np.ndarray) -> np.ndarray:
    """z^n (J_n + i Y_n) from the ascending series (n >= 0)."""
    c_j, c_y, fin = _series_coeffs(n)
    z2 = z * z
    zn2 = z ** (2 * n)
    jpart = zn2 * np.polynomial.polynomial.polyval(z2, c_j)
    ypoly = zn2 * np.polynomial.polynomial.polyval(z2, c_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = np.log(z / 2.0)
    ypart = (-(2.0 ** n) / math.pi * np.polynomial.polynomial.polyval(z2, fin)
             + 2.0 / math.pi * logt * jpart - ypoly / math.pi)
    if n > 0:
        ypart = np.where(z == 0, -(2.0 ** n) / math.pi * math.factorial(n - 1), ypart)
    return jpart + 1j * ypart


def _phase(z, nu):
    return z - nu * math.pi / 2 - math.pi / 4


@lru_cache(maxsize=None)
def _laguerre(alpha: float):
    return roots_genlaguerre(_LAGUERRE_NODES, alpha)


def _hplus_int_laguerre(n: int, z: np.ndarray) -> np.ndarray:
    alpha = n - 0.5
    u, w = _laguerre(alpha)
    f = (1.0 + 1j * u[None, :] / (2.0 * z[:, None])) ** alpha
    integral = f @ w
    h1 = np.sqrt(2.0 / (math.pi * z)) * np.exp(1j * _phase(z, n)) * integral / gamma(n + 0.5)
    return z ** n * h1


def _asym_series(nu: float, z: np.ndarray, sign: int) -> np.ndarray:
    """sum_k (sign i)^k a_k(nu) z^-k, truncated at the smallest term."""
    z = np.asarray(z, complex)
    kmax = int(min(max(np.ceil(np.max(np.abs(z), initial=0.0)), 2), 80))
    mu = 4.0 * nu * nu
    total = np.ones(z.shape, complex).ravel()
    zf = z.ravel()
    idx = np.arange(zf.size)          # entries still summing
    term = np.ones(zf.size, complex)
    last = np.ones(zf.size)
    for k in range(1, kmax + 1):
        if idx.size == 0:
            break
        t = term * (sign * 1j) * (mu - (2 * k - 1) ** 2) / (k * 8.0 * zf[idx])
        mag = np.abs(t)
        grow = mag >= last
        keep = ~grow
        total[idx[keep]] += t[keep]
        small = mag <= 1e-17 * np.abs(total[idx])
        live = keep & ~small
        idx, term, last = idx[live], t[live], mag[live]
    return total.reshape(z.shape)


def _hplus_int_asym(n: int, z: np.ndarray) -> np.ndarray:
    s = _asym_series(float(n), z, +1)
    return (z ** n) * np.sqrt(2.0 / (math.pi * z)) * np.exp(1j * _phase(z, n)) * s


def _hminus_int_asym(n: int, z: np.ndarray) -> np.ndarray:
    s = _asym_series(float(n), z, -1)
    return (z ** n) * np.sqrt(2.0 / (math.pi * z)) * np.exp(-1j * _phase(z, n)) * s


def _hplus_int(n: int, z: np.ndarray) -> np.ndarray:
    if n < 0:
        m = -n
        return (-1.0) ** m * z ** (-2 * m) * _hplus_int(m, z)
    out = np.empty(z.shape, complex)
    az = np.abs(z)
    near = az <= SERIES_RADIUS
    ser = near & (z.imag <= SERIES_MAX_IMAG)
    far = az > ASYM_RADIUS
    lag = ~ser & ~far
    if ser.any():
        out[ser] = _hplus_int_series(n, z[ser])
    if lag.any():
        out[lag] = _hplus_int_laguerre(n, z[lag])
    if far.any():
        out[far] = _hplus_int_asym(n, z[far])
    return out


def _hplus_core(twice_nu: int, z: np.ndarray) -> np.ndarray:
    """Hplus for Im z >= 0 (imaginary zeros are forced to +0)."""
    z = np.where(z.imag == 0, z.real + 0j, z)
    if twice_nu % 2:
        return _hplus_halfint(twice_nu, z)
    return _hplus_int(twice_nu // 2, z)


def _prepare(arg) -> tuple[np.ndarray, bool]:
    arr = np.asarray(arg, dtype=complex)
    return np.atleast_1d(arr), arr.ndim == 0


def _finish(out: np.ndarray, scalar: bool):
    return complex(out[0]) if scalar else out


def _check_range(z: np.ndarray) -> None:
    if np.any(np.abs(z) > MAX_ABS_ARG):
        bad = z[np.abs(z) > MAX_ABS_ARG][0]
        raise RangeError(f"|argument| exceeds {MAX_ABS_ARG:g}: {bad}")


# ---------------------------------------------------------------------------
# public API

def hankel_scaled(order, branch, lam):
    """``lam**nu * H^{(1|2)}_nu(lam)`` on the closed half-plane of the branch.

    Vectorised over ``lam``.  Raises :class:`DomainError` for arguments in the
    wrong half-plane and :class:`RangeError` for ``|lam| > 1e6``.
    """
    order = _as_order(order)
    sgn = _check_branch(branch)
    z, scalar = _prepare(lam)
    _check_range(z)
    if np.any(sgn * z.imag < 0):
        raise DomainError(f"argument in the wrong half-plane for branch {branch!r}")
    zero = z == 0
    if zero.any() and order.twice_nu <= 0:
        raise DomainError("Hcal_nu(0) is infinite for nu <= 0")
    src = z if sgn > 0 else np.conj(z)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = _hplus_core(order.twice_nu, src)
    if zero.any():
        out[zero] = hankel_at_zero(order, "plus")
    if sgn < 0:
        out = np.conj(out)
    return _finish(out, scalar)


def hankel_value(order, branch, lam) -> ScaledCylinderValue:
    return ScaledCylinderValue(hankel_scaled(order, branch, complex(lam)),
                               complex(lam), "plus" if _check_branch(branch) > 0 else "minus")


def hankel_at_zero(order, branch="plus") -> complex:
    """Small-argument limit ``Hcal_nu^{+-}(0) = -+ i 2^nu Gamma(nu) / pi``."""
    order = _as_order(order)
    if order.twice_nu <= 0:
        raise DomainError("limit at 0 is finite only for nu > 0")
    sgn = _check_branch(branch)
    return -sgn * 1j * 2.0 ** order.nu * gamma(order.nu) / math.pi


def _jcal_series(twice_nu: int, z: np.ndarray) -> np.ndarray:
    """Jcal_nu = z^nu J_nu via the entire ascending series (any nu > -1)."""
    nu = twice_nu / 2.0
    k = np.arange(_SERIES_TERMS)
    c = np.array([(-1.0) ** i / (4.0 ** i * math.factorial(i) * math.gamma(i + nu + 1))
                  for i in k]) / 2.0 ** nu
    z2 = z * z
    with np.errstate(invalid="ignore", divide="ignore"):
        zp = z ** twice_nu if twice_nu >= 0 else z ** (2 * nu)
    return zp * np.polynomial.polynomial.polyval(z2, c)


def _jcal(twice_nu: int, z: np.ndarray) -> np.ndarray:
    if twice_nu < 0:
        # only needed for derivative recurrences: Jcal_{nu} = z^{2nu} * J_nu/z^nu
        if twice_nu % 2 == 0:
            m = -twice_nu // 2
            return (-1.0) ** m * z ** (-2 * m) * _jcal(2 * m, z)
        return 0.5 * (_hplus_halfint(twice_nu, z) + np.conj(_hplus_halfint(twice_nu, np.conj(z))))
    out = np.empty(z.shape, complex)
    az = np.abs(z)
    if twice_nu % 2:
        small = az <= 1.0
        big = ~small
        if small.any():
            out[small] = _jcal_series(twice_nu, z[small])
        if big.any():
            zb = z[big]
            out[big] = 0.5 * (_hplus_halfint(twice_nu, zb)
                              + np.conj(_hplus_halfint(twice_nu, np.conj(zb))))
        return out
    n = twice_nu // 2
    near = az <= SERIES_RADIUS
    if near.any():
        out[near] = _jcal_series(twice_nu, z[near])
    far = ~near
    if far.any():
        zf = z[far]
        # Jcal is even for integer order: reduce to Re z >= 0
        zf = np.where(zf.real < 0, -zf, zf)
        out[far] = 0.5 * (_hplus_int_asym(n, zf) + _hminus_int_asym(n, zf))
    return out


def bessel_j_scaled(order, z):
    """``z**nu * J_nu(z)``; entire in ``z``."""
    order = _as_order(order)
    zz, scalar = _prepare(z)
    _check_range(zz)
    return _finish(_jcal(order.twice_nu, zz), scalar)


def bessel_j_ratio(order, w):
    """``J_nu(w) / w**nu``, the regular factor of ``Jcal_nu(w) / w**(2 nu)``."""
    order = _as_order(order)
    ww, scalar = _prepare(w)
    out = np.empty(ww.shape, complex)
    small = np.abs(ww) <= 2.0
    if small.any():
        nu = order.nu
        k = np.arange(30)
        c = np.array([(-1.0) ** i / (4.0 ** i * math.factorial(i) * math.gamma(i + nu + 1))
                      for i in k]) / 2.0 ** nu
        out[small] = np.polynomial.polynomial.polyval(ww[small] ** 2, c)
    big = ~small
    if big.any():
        wb = ww[big]
        out[big] = _jcal(order.twice_nu, wb) / wb ** order.twice_nu
    return _finish(out, scalar)


def bessel_j_scaled_deriv(order, z, j: int = 1):
    """``d^j/dz^j Jcal_nu(z)`` for ``j <= 2`` from ``Jcal_nu' = z Jcal_{nu-1}``."""
    order = _as_order(order)
    zz, scalar = _prepare(z)
    tn = order.twice_nu
    if j == 0:
        out = _jcal(tn, zz)
    elif j == 1:
        out = zz * _jcal(tn - 2, zz)
    elif j == 2:
        out = _jcal(tn - 2, zz) + zz * zz * _jcal(tn - 4, zz)
    else:
        raise DomainError("only derivative orders j <= 2 are supported")
    return _finish(out, scalar)


def amplitude_b(order, branch, z):
    """Amplitude ``b_nu^{+-}(z) = Hcal^{+-}(z) e^{-+iz} / 2`` for real ``z > 0``."""
    order = _as_order(order)
    sgn = _check_branch(branch)
    zz, scalar = _prepare(z)
    if np.any(zz.real <= 0) or np.any(zz.imag != 0):
        raise DomainError("amplitude_b requires real z > 0")
    h = _hplus_core(order.twice_nu, zz)
    b = 0.5 * h * np.exp(-1j * zz)
    if sgn < 0:
        b = np.conj(b)
    return _finish(b, scalar)


def amplitude_b_deriv(order, branch, z, j: int = 1):
    """``d^j/dz^j b_nu^{+-}(z)`` for ``j <= 2`` (real ``z > 0``)."""
    order = _as_order(order)
    sgn = _check_branch(branch)
    zz, scalar = _prepare(z)
    if np.any(zz.real <= 0):
        raise DomainError("amplitude_b requires z > 0")
    tn = order.twice_nu
    h0 = _hplus_core(tn, zz)
    e = 0.5 * np.exp(-1j * zz)
    if j == 0:
        out = e * h0
    elif j == 1:
        out = e * (zz * _hplus_core(tn - 2, zz) - 1j * h0)
    elif j == 2:
        h1 = zz * _hplus_core(tn - 2, zz)
        h2 = _hplus_core(tn - 2, zz) + zz * zz * _hplus_core(tn - 4, zz)
        out = e * (h2 - 2j * h1 - h0)
    else:
        raise DomainError("only derivative orders j <= 2 are supported")
    if sgn < 0:
        out = np.conj(out)
    return _finish(out, scalar)


def japanese(x):
    """``<x> = (1 + |x|^2)^(1/2)``."""
    return np.sqrt(1.0 + np.abs(x) ** 2)


def check_hankel_envelope(order, sample_grid, refined_grid=None, branch="plus") -> EnvelopeFitReport:
    """Fit ``|Hcal(lam)| <= C <lam>^((n-3)/2) e^{-|Im lam|}`` over a grid.

    ``sample_grid`` is an iterable of complex arguments in the branch
    half-plane; ``refined_grid`` (optional) the 2x refined set.
    """
    order = _as_order(order)
    p = (order.dimension - 3) / 2.0

    def samples(grid):
        lam = np.asarray(list(grid), complex)
        if lam.size == 0:
            from .errors import UsageError
            raise UsageError("empty sample grid")
        vals = hankel_scaled(order, branch, lam)
        return [({"re": l.real, "im": l.imag}, abs(v)) for l, v in zip(lam, np.atleast_1d(vals))]

    env = lambda q: float(japanese(complex(q["re"], q["im"])) ** p * math.exp(-abs(q["im"])))
    ref = samples(refined_grid) if refined_grid is not None else None
    return fit_envelope(samples(sample_grid), env, "2.6", refined=ref)


def check_hankel_difference_envelope(order, sample_grid, refined_grid=None, branch="plus") -> EnvelopeFitReport:
    """Fit ``|Hcal(lam) - Hcal(0)| <= C |lam|^(1/2) <lam>^((n-4)/2)``."""
    order = _as_order(order)
    p = (order.dimension - 4) / 2.0
    h0 = hankel_at_zero(order, branch)

    def samples(grid):
        lam = np.asarray(list(grid), complex)
        vals = np.atleast_1d(hankel_scaled(order, branch, lam)) - h0
        return [({"re": l.real, "im": l.imag}, abs(v)) for l, v in zip(lam, vals)]

    def env(q):
        lam = complex(q["re"], q["im"])
        return float(abs(lam) ** 0.5 * japanese(lam) ** p)

    ref = samples(refined_grid) if refined_grid is not None else None
    return fit_envelope(samples(sample_grid), env, "2.8", refined=ref)


def half_plane_grid(lo: float = 1e-3, hi: float = 50.0, per_decade: int = 8, n_angle: int = 7,
                    level: int = 1, sign: int = 1) -> np.ndarray:
    """Polar grid ``|lam| in [lo, hi]`` (log), ``arg in [0, pi]`` (sign +) or ``[-pi, 0]``."""
    m = int(round(math.log10(hi / lo) * per_decade)) * level + 1
    r = np.geomspace(lo, hi, m)
    th = np.linspace(0.0, math.pi, (n_angle - 1) * level + 1) * sign
    return (r[:, None] * np.exp(1j * th)[None, :]).ravel()


def amplitude_envelope(bound_id: str, order, j: int, z_grid, refined_grid=None,
                       branch: str = "plus") -> EnvelopeFitReport:
    """Symbol-type bounds on the real axis for ``j in {0, 1}``.

    small-z shape: ``|d^j Jcal| <= C z^(n-2-j) <z>^(j-(n-1)/2)``;
    uniform: ``|d^j Jcal| <= C <z>^((n-3)/2)``;
    amplitude: ``|d^j b^{+-}| <= C <z>^((n-3)/2-j)``.
    """
    order = _as_order(order)
    n = order.dimension
    if j not in (0, 1, 2):
        raise DomainError("derivative order j must be 0, 1 or 2")
    if bound_id == "B.30":
        if j > n - 2:
            raise DomainError("the small-z Jcal bound holds for j <= n-2")
        f = lambda z: bessel_j_scaled_deriv(order, z, j)
        env = lambda q: q["z"] ** (n - 2 - j) * float(japanese(q["z"])) ** (j - (n - 1) / 2.0)
    elif bound_id == "B.31":
        f = lambda z: bessel_j_scaled_deriv(order, z, j)
        env = lambda q: float(japanese(q["z"])) ** ((n - 3) / 2.0)
    elif bound_id == "B.32":
        if j > n - 3:
            raise DomainError("the amplitude bound holds for j <= n-3")
        f = lambda z: amplitude_b_deriv(order, branch, z, j)
        env = lambda q: float(japanese(q["z"])) ** ((n - 3) / 2.0 - j)
    else:
        raise DomainError(f"unknown amplitude bound {bound_id}")

    def samples(grid):
        z = np.asarray(list(grid), float)
        v = np.atleast_1d(f(z))
        return [({"z": float(a)}, abs(b)) for a, b in zip(z, v)]

    ref = samples(refined_grid) if refined_grid is not None else None
    rep = fit_envelope(samples(z_grid), env, f"{bound_id}_j{j}", refined=ref)
    rep.exponents["j"] = j
    return rep
