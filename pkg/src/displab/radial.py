"""Radial grids, radial kernels and their reductions to low-dimensional integrals.

Three reductions cover every operator quantity in the package:

* ``radial_integral``: integral of a radial function over R^n,
* ``two_center_integral``: ``int F(|x|) G(|x - y|) dx`` for a point ``y``,
  used for the column norms ``sup_y int |V(x)| |k(|x - y|)| dx``,
* ``bipolar_compose``: ``int k1(|x - xi|) V(|xi|) k2(|xi - y|) dxi``.

The last one writes ``xi`` around a centre ``c`` as ``c + s w`` with
``w`` on the unit sphere split into its component in the plane spanned by
the three points (length ``c``, angle ``phi``) and an orthogonal part, so

    dw = |S^{n-3}| (1 - c^2)^((n-4)/2) c dc dphi.

Discretized operators act on radial functions (the zero angular momentum
channel) with entries ``A[i, j] = K(r_i, r_j) w_j``; the L1 -> L1 norm of
such a matrix is ``max_j sum_i w_i |K(r_i, r_j)|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DivergenceError, DomainError, UsageError
from .quad import gauss_legendre, geometric_breaks, panels, power_tail, sphere_area

TAIL_FRACTION = 1e-3


# ---------------------------------------------------------------------------
# grids and kernels

@dataclass(frozen=True)
class RadialGrid:
    """Quadrature for ``int_{R^n} f(|x|) dx`` on ``(0, r_max]``."""

    dimension: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    r_max: float = 0.0
    per_decade: int = 8
    r_min: float = 1e-4
    order: int = 8
    breaks_extra: tuple = ()

    @classmethod
    def geometric(cls, n: int, r_max: float = 10.0, r_min: float = 1e-4,
                  per_decade: int = 8, order: int = 8, extra: tuple = ()) -> "RadialGrid":
        if n < 4:
            raise DomainError("dimension must be >= 4")
        if not (0 < r_min < r_max):
            raise UsageError("need 0 < r_min < r_max")
        br = geometric_breaks(r_min, r_max, per_decade, extra=extra)
        # extra resolution on the bulk where potentials live
        bulk = np.linspace(0.0, min(r_max, 8.0), 2 * per_decade + 1)[1:]
        br = np.unique(np.concatenate([br, bulk]))
        r, w = panels(br, order)
        w = w * sphere_area(n) * r ** (n - 1)
        return cls(n, r, w, r_max, per_decade, r_min, order, tuple(extra))

    @classmethod
    def oscillatory(cls, n: int, r_max: float, wavelength: float, r_min: float = 1e-4,
                    per_decade: int = 8, order: int = 8) -> "RadialGrid":
        """Geometric near 0, then panels no wider than ``wavelength / 2`` out to ``r_max``."""
        width = max(wavelength / 2.0, 1e-3)
        start = min(8.0, r_max)
        far = np.arange(start, r_max + width, width)[1:] if r_max > start else np.array([])
        return cls.geometric(n, r_max, r_min, per_decade, order, extra=tuple(far))

    def refined(self) -> "RadialGrid":
        ex = np.asarray(self.breaks_extra, float)
        if ex.size > 1:
            ex = np.unique(np.concatenate([ex, 0.5 * (ex[1:] + ex[:-1])]))
        return RadialGrid.geometric(self.dimension, self.r_max, self.r_min,
                                    2 * self.per_decade, self.order, tuple(ex))

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, f) -> complex:
        vals = f(self.nodes) if callable(f) else np.asarray(f)
        return np.sum(self.weights * vals)


@dataclass(frozen=True)
class RadialKernel:
    """Convolution kernel ``k(|x - y|)``.

    ``singular`` marks kernels that blow up at zero distance; they are
    integrated in coordinates centred at the singularity.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    dimension: int
    scale_h: float = 1.0
    singular: bool = False
    label: str = ""

    def __call__(self, sigma):
        return self.profile(np.asarray(sigma, float))

    def scaled(self, h: float) -> "RadialKernel":
        """Kernel ``h^-n k(sigma / h)`` (the L1 norm is unchanged)."""
        n, prof = self.dimension, self.profile
        return replace(self, profile=lambda s: h ** (-n) * prof(np.asarray(s) / h),
                       scale_h=self.scale_h * h)

    def abs(self) -> "RadialKernel":
        prof = self.profile
        return replace(self, profile=lambda s: np.abs(prof(s)))


def _values(f, r):
    """Evaluate a radial profile given as callable, object with ``value`` or constant."""
    if f is None:
        return np.ones_like(r)
    if hasattr(f, "value"):
        return f.value(r)
    if callable(f):
        return f(r)
    return np.full_like(r, float(f))


def _support(f, default):
    return getattr(f, "support_radius", None) or default


# ---------------------------------------------------------------------------
# discretized operators (radial channel)

@dataclass
class DiscretizedOperator:
    """Matrix ``A`` acting on nodal values, with right weights folded in."""

    matrix: np.ndarray
    grid: RadialGrid
    kind: str = "convolution"
    out_grid: RadialGrid | None = None

    @property
    def out(self) -> RadialGrid:
        return self.out_grid if self.out_grid is not None else self.grid

    @classmethod
    def identity(cls, grid: RadialGrid) -> "DiscretizedOperator":
        return cls(np.eye(grid.size, dtype=complex), grid, "identity")

    @classmethod
    def from_mean_kernel(cls, grid: RadialGrid, mean_kernel, left=None, kind="sandwich",
                         out_grid: RadialGrid | None = None):
        """``A[i, j] = left(r_i) M(r_i, s_j) w_j`` from a spherical-mean kernel.

        Rows live on ``out_grid`` (default: ``grid``), columns on ``grid``.
        """
        r = (out_grid or grid).nodes
        s = grid.nodes
        M = mean_kernel(r[:, None], s[None, :])
        if left is not None:
            M = _values(left, r)[:, None] * M
        return cls(np.asarray(M, complex) * grid.weights[None, :], grid, kind, out_grid)

    @property
    def kernel(self) -> np.ndarray:
        return self.matrix / self.grid.weights[None, :]

    def norm_l1(self) -> float:
        """Discrete L1 -> L1 norm ``max_j sum_i w_i |K_ij|``."""
        w = self.out.weights
        return float(np.max(np.sum(w[:, None] * np.abs(self.kernel), axis=0)))

    def column_norms(self) -> np.ndarray:
        return np.sum(self.out.weights[:, None] * np.abs(self.kernel), axis=0)

    def norm_linf(self) -> float:
        """Discrete L1 -> L^inf norm, the largest kernel entry."""
        return float(np.max(np.abs(self.kernel)))

    def balanced(self) -> np.ndarray:
        """``W^(1/2) K W^(1/2)``: the matrix whose singular values approximate the operator's."""
        s = np.sqrt(self.grid.weights)
        return s[:, None] * self.kernel * s[None, :]

    def smallest_singular(self) -> float:
        return float(np.linalg.svd(self.balanced(), compute_uv=False)[-1])

    def apply(self, f) -> np.ndarray:
        return self.matrix @ np.asarray(f)

    def __matmul__(self, other: "DiscretizedOperator") -> "DiscretizedOperator":
        return DiscretizedOperator(self.matrix @ other.matrix, other.grid, "composition",
                                   self.out_grid)

    def __add__(self, other):
        return DiscretizedOperator(self.matrix + other.matrix, self.grid, "sum", self.out_grid)

    def __sub__(self, other):
        return DiscretizedOperator(self.matrix - other.matrix, self.grid, "sum", self.out_grid)

    def __rmul__(self, c):
        return DiscretizedOperator(c * self.matrix, self.grid, self.kind, self.out_grid)

    def inverse(self) -> "DiscretizedOperator":
        return DiscretizedOperator(np.linalg.inv(self.matrix), self.grid, "inverse")


# ---------------------------------------------------------------------------
# one- and two-centre integrals

def radial_integral(f, n: int, r_max: float = 1e3, r_min: float = 1e-7,
                    per_decade: int = 8, tail: bool = True) -> float | complex:
    """``int_{R^n} f(|x|) dx`` with an analytic power-law tail beyond ``r_max``."""
    br = geometric_breaks(r_min, r_max, per_decade,
                          extra=tuple(np.linspace(0.5, min(r_max, 20.0), 40)))
    r, w = panels(br, 8)
    vals = _values(f, r) * r ** (n - 1) * sphere_area(n)
    total = np.sum(w * vals)
    if tail:
        alpha, t = power_tail(r, vals)
        if not math.isfinite(t):
            raise DivergenceError(f"radial integrand decays like r^-{alpha:.3g}; need exponent > 1")
        if np.iscomplexobj(total):
            t = t * np.exp(1j * np.angle(vals[-1]))
        total = total + t
    return total


def _inner_t_rule(m_panels: int = 10, m: int = 8):
    """Fixed template for the inner angular integral (see ``two_center_integral``)."""
    u, wu = panels(np.linspace(0.0, 1.0, m_panels + 1), m)
    x, wx = gauss_legendre(m)
    return u, wu, 0.5 * (x + 1), 0.5 * wx


def _angular_mean(G, r, rho, n, q_floor=1e-10):
    """``int_{-1}^{1} G(|r e - rho e'|) (1 - t^2)^((n-3)/2) dt`` for arrays ``r``.

    Both endpoints are regularized (``t = 1 - q^2`` and ``t = -1 + p^2``); the
    ``t -> 1`` half is graded geometrically towards ``q ~ |r - rho| / sqrt(2 r rho)``
    where a kernel singular at zero distance varies fastest.
    """
    r = np.asarray(r, float)[:, None]
    u, wu, x0, w0 = _inner_t_rule()
    rr = 2.0 * r * rho
    a = np.abs(r - rho) / np.sqrt(np.maximum(rr, 1e-300))
    q0 = np.clip(0.2 * a, q_floor, 1.0)
    # q in [0, q0] (plain GL) then q = q0^(1-u) on [q0, 1]
    qa = q0 * x0[None, :]
    wa = q0 * w0[None, :]
    lq = np.log(q0)
    qb = np.exp(lq * (1.0 - u[None, :]))
    wb = qb * (-lq) * wu[None, :]
    q = np.concatenate([qa, qb], axis=1)
    wq = np.concatenate([wa, wb], axis=1)
    jac = 2.0 * q ** (n - 2) * (2.0 - q * q) ** ((n - 3) / 2.0)
    s_hi = np.sqrt((r - rho) ** 2 + rr * q * q)
    # far half: t = -1 + p^2, p in [0, 1], |x - y|^2 = (r + rho)^2 - 2 r rho p^2
    p = np.concatenate([x0 * 0.5, 0.5 + x0 * 0.5])[None, :]
    wp = np.concatenate([w0 * 0.5, w0 * 0.5])[None, :]
    jacp = 2.0 * p ** (n - 2) * (2.0 - p * p) ** ((n - 3) / 2.0)
    s_lo = np.sqrt(np.maximum((r + rho) ** 2 - rr * p * p, 0.0))
    return (np.sum(wq * jac * G(s_hi), axis=1) + np.sum(wp * jacp * G(s_lo), axis=1))


def two_center_integral(F, G, rho: float, n: int, r_max: float | None = None,
                        per_decade: int = 8, tail: bool = True) -> float | complex:
    """``int_{R^n} F(|x|) G(|x - y|) dx`` for ``|y| = rho``.

    ``F`` may be ``None`` (constant one), a callable, or a potential object;
    ``G`` is a callable of the distance.  The outer radius is truncated at
    ``r_max`` (default: the support radius of ``F`` or 1e3) with a power-law
    tail correction; a tail decaying no faster than ``r^-1`` raises
    :class:`DivergenceError`.
    """
    if F is None and not hasattr(G, "value"):
        return radial_integral(G, n, r_max=r_max or 1e3, per_decade=per_decade, tail=tail)
    r_max = r_max or _support(F, 1e3)
    scale = max(rho, 1.0)
    extra = [rho] if rho > 0 else []
    if rho > 0:
        for j in range(1, 7):
            extra += [rho * (1 - 10.0 ** -j), rho * (1 + 10.0 ** -j)]
    br = geometric_breaks(1e-7 * scale, max(r_max, 2 * rho), per_decade,
                          extra=tuple(extra) + tuple(np.linspace(0.25, min(r_max, 12.0), 48)))
    r, w = panels(br, 8)
    ratio = sphere_area(n) / sphere_area(n - 1)
    if rho == 0:
        inner = G(r) * ratio
    else:
        inner = _angular_mean(G, r, rho, n)
    f = _values(F, r) * r ** (n - 1) * sphere_area(n - 1) * inner
    total = np.sum(w * f)
    if tail and F is not None and getattr(F, "support_radius", None) is None:
        alpha, t = power_tail(r, f)
        if not math.isfinite(t):
            raise DivergenceError(
                f"integrand decays like r^-{alpha:.3g} at infinity; need exponent > 1")
        total = total + t
    elif tail and F is None:
        alpha, t = power_tail(r, f)
        if not math.isfinite(t):
            raise DivergenceError(f"kernel integrand decays like r^-{alpha:.3g}")
        total = total + t
    return total


def default_y_samples(F=None, n_pts: int = 24) -> np.ndarray:
    """Radii ``|y|`` at which the sup over ``y`` is sampled (0 included)."""
    R = _support(F, 10.0)
    return np.concatenate([[0.0], np.geomspace(0.02, max(2.0 * R, 2.0), n_pts - 1)])


@dataclass
class NormResult:
    value: float
    argmax_rho: float
    samples: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __float__(self):
        return float(self.value)


def norm_L1_to_L1(V, k, rho_samples=None, n: int | None = None, **kw) -> NormResult:
    """``sup_y int |V(x)| |k(|x - y|)| dx`` with ``y`` sampled over radii.

    ``V=None`` means the pure convolution norm ``int |k(|xi|)| dxi``.  The
    sup is realized on the sampled radii and the maximizer is reported.
    """
    n = n or getattr(k, "dimension", None)
    if n is None:
        raise UsageError("dimension required")
    G = lambda s: np.abs(k(s))
    if V is None:
        val = float(np.real(radial_integral(G, n, **kw)))
        return NormResult(val, 0.0, np.array([0.0]), np.array([val]))
    absV = lambda r: np.abs(_values(V, r))
    absV_obj = _AbsProfile(absV, getattr(V, "support_radius", None))
    rhos = default_y_samples(V) if rho_samples is None else np.asarray(rho_samples, float)
    vals = np.array([float(np.real(two_center_integral(absV_obj, G, rho, n, **kw)))
                     for rho in rhos])
    i = int(np.argmax(vals))
    return NormResult(float(vals[i]), float(rhos[i]), rhos, vals)


@dataclass
class _AbsProfile:
    f: Callable
    support_radius: float | None = None

    def value(self, r):
        return self.f(r)


def norm_L1_to_L2(weight, k, rho_samples=None, n: int | None = None, **kw) -> NormResult:
    """``sup_y ( int W(|x|)^2 W(|y|)^-2 |k(|x - y|)|^2 dx )^(1/2)``; ``weight=None`` is W = 1."""
    n = n or getattr(k, "dimension", None)
    G = lambda s: np.abs(k(s)) ** 2
    if weight is None:
        val = math.sqrt(float(np.real(radial_integral(G, n, **kw))))
        return NormResult(val, 0.0, np.array([0.0]), np.array([val]))
    W2 = _AbsProfile(lambda r: np.abs(_values(weight, r)) ** 2)
    rhos = (np.concatenate([[0.0], np.geomspace(0.05, 50.0, 15)])
            if rho_samples is None else np.asarray(rho_samples, float))
    vals = []
    for rho in rhos:
        I = float(np.real(two_center_integral(W2, G, rho, n, **kw)))
        wy = float(np.abs(_values(weight, np.array([rho]))[0])) ** 2
        vals.append(math.sqrt(I / wy))
    vals = np.array(vals)
    i = int(np.argmax(vals))
    return NormResult(float(vals[i]), float(rhos[i]), rhos, vals)


def norm_L1_to_Linf(K, sample=None) -> float:
    """Sup of ``|K|`` over the sampling set.

    ``K`` is either a radial kernel (sampled on ``sample`` distances) or a
    callable of point pairs ``K(x, y)`` sampled on ``sample = (xs, ys)``.
    """
    if callable(K) and not isinstance(sample, tuple):
        s = np.geomspace(1e-3, 1e2, 400) if sample is None else np.asarray(sample, float)
        return float(np.max(np.abs(K(s))))
    if not callable(K):
        return float(abs(K))
    xs, ys = sample
    return float(max(abs(K(x, y)) for x, y in zip(xs, ys)))


# ---------------------------------------------------------------------------
# three-point compositions

def _plane_frame(x: np.ndarray, y: np.ndarray):
    """Orthonormal (e1, e2) spanning the plane of 0, x, y, independent of order."""
    dim = len(x)
    cands = [x + y, x - y, x, y] + [np.eye(dim)[i] for i in range(dim)]
    e1 = None
    for v in cands:
        nv = np.linalg.norm(v)
        if nv > 1e-12 * max(1.0, np.linalg.norm(x) + np.linalg.norm(y)):
            e1 = _orient(v / nv)
            break
    rest = [x - y, x, y] + [np.eye(dim)[i] for i in range(dim)]
    for v in rest:
        u = v - np.dot(v, e1) * e1
        nu = np.linalg.norm(u)
        if nu > 1e-9 * max(1.0, np.linalg.norm(v)):
            e2 = u / nu
            return e1, _orient(e2)
    raise DomainError("could not build a frame")


def _orient(e):
    # canonical sign: first significant component positive
    idx = int(np.argmax(np.abs(e) > 1e-12))
    return e if e[idx] > 0 else -e


def _as_point(p, n) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, float))
    if p.size == n:
        return p
    if p.size == 1:
        out = np.zeros(n)
        out[0] = p[0]
        return out
    out = np.zeros(n)
    out[:p.size] = p
    return out


@dataclass(frozen=True)
class ComposeRule:
    """Node counts for ``bipolar_compose``."""

    s_per_decade: int = 6
    s_order: int = 8
    n_theta: int = 16
    n_phi: int = 32
    s_min: float = 1e-6
    partition_power: float | None = None

    def refined(self) -> "ComposeRule":
        return replace(self, s_per_decade=2 * self.s_per_decade, n_theta=2 * self.n_theta,
                       n_phi=2 * self.n_phi)


def _sphere_nodes(n, rule: ComposeRule):
    """Nodes on S^{n-1} as (c, phi, weight) with c the in-plane component length."""
    xt, wt = gauss_legendre(rule.n_theta)
    th = 0.25 * math.pi * (xt + 1)
    wth = 0.25 * math.pi * wt
    c = np.sin(th)
    wc = wth * np.sin(th) * np.cos(th) ** (n - 3)
    phi = 2 * math.pi * np.arange(rule.n_phi) / rule.n_phi
    wphi = np.full(rule.n_phi, 2 * math.pi / rule.n_phi)
    C, P = np.meshgrid(c, phi, indexing="ij")
    W = (wc[:, None] * wphi[None, :]) * (sphere_area(n - 2) if n > 3 else 1.0)
    return C.ravel(), P.ravel(), W.ravel()


def _centered_piece(k_c, k_o, V, center, other, e1, e2, n, rule, s_max, power,
                    center_first):
    """Integral over xi = center + s w of V * (k_c(|xi-center|) * k_o(|xi-other|)) * w_center."""
    br = geometric_breaks(rule.s_min, s_max, rule.s_per_decade,
                          extra=tuple(np.linspace(0.25, min(s_max, 16.0), int(4 * min(s_max, 16.0)) + 1)))
    s, ws = panels(br, rule.s_order)
    c, phi, wsph = _sphere_nodes(n, rule)
    S = s[:, None]
    a1 = S * c[None, :] * np.cos(phi)[None, :]
    a2 = S * c[None, :] * np.sin(phi)[None, :]
    # in-plane coordinates relative to center; orthogonal radius^2 = s^2 (1 - c^2)
    oc1, oc2 = np.dot(other - center, e1), np.dot(other - center, e2)
    z1, z2 = np.dot(center, e1), np.dot(center, e2)
    orth2 = (S * S) * (1.0 - c[None, :] ** 2)
    d_o = np.sqrt((a1 - oc1) ** 2 + (a2 - oc2) ** 2 + orth2)
    r_xi = np.sqrt((a1 + z1) ** 2 + (a2 + z2) ** 2 + orth2)
    d_c = np.broadcast_to(S, d_o.shape)
    kc = k_c(d_c)
    ko = k_o(d_o)
    prod = kc * ko if center_first else ko * kc
    if power is not None:
        pc, po = d_c ** power, d_o ** power
        wpart = po / (pc + po)
        vals = _values(V, r_xi) * (prod * wpart)
    else:
        vals = _values(V, r_xi) * prod
    return np.sum((ws * s ** (n - 1))[:, None] * wsph[None, :] * vals)


def bipolar_compose(k1, V, k2, x, y, n: int | None = None, rule: ComposeRule | None = None,
                    method: str = "auto", s_max: float | None = None) -> complex:
    """``int_{R^n} k1(|x - xi|) V(|xi|) k2(|xi - y|) dxi``.

    ``method='partition'`` splits the integrand with weights
    ``|xi-y|^p / (|xi-x|^p + |xi-y|^p)`` and its complement and integrates each
    part in coordinates centred at its singular point (``p = n`` by default);
    ``method='origin'`` centres at 0, suited to smooth kernels and localized
    ``V``.  Both variants are exactly symmetric under
    ``(k1, x) <-> (k2, y)``.
    """
    n = n or getattr(k1, "dimension", None) or getattr(k2, "dimension", None)
    if n is None:
        raise UsageError("dimension required")
    if V is not None and not callable(V) and not hasattr(V, "value") and float(V) == 0.0:
        return 0.0 + 0.0j
    rule = rule or ComposeRule()
    xv, yv = _as_point(x, n), _as_point(y, n)
    if method == "auto":
        singular = getattr(k1, "singular", True) or getattr(k2, "singular", True)
        method = "partition" if singular else "origin"
    e1, e2 = _plane_frame(xv, yv)
    R = s_max or _support(V, None)
    if method == "origin":
        if R is None:
            raise UsageError("origin-centred composition needs a localized V or s_max")
        # centre at 0 with 'other' = x; distances to x and y both computed from the frame
        return _origin_piece(k1, k2, V, xv, yv, e1, e2, n, rule, R)
    p = rule.partition_power or float(n)
    far = max(np.linalg.norm(xv), np.linalg.norm(yv))
    Rs = (R + far + 1.0) if R is not None else 1e3
    # order of the factors in the product is fixed by (k1 at x, k2 at y) so that
    # relabelling (k1, x) <-> (k2, y) reproduces the same floating-point values
    px = _centered_piece(k1, k2, V, xv, yv, e1, e2, n, rule, Rs, p, True)
    py = _centered_piece(k2, k1, V, yv, xv, e1, e2, n, rule, Rs, p, False)
    return complex(px + py) if _canonical_first(xv, yv) else complex(py + px)


def _canonical_first(x, y) -> bool:
    return tuple(x) <= tuple(y)


def _origin_piece(k1, k2, V, xv, yv, e1, e2, n, rule, R):
    xt, wt = gauss_legendre(max(24, rule.s_per_decade * 6))
    s = 0.5 * R * (xt + 1)
    ws = 0.5 * R * wt
    c, phi, wsph = _sphere_nodes(n, rule)
    S = s[:, None]
    a1 = S * c[None, :] * np.cos(phi)[None, :]
    a2 = S * c[None, :] * np.sin(phi)[None, :]
    orth2 = (S * S) * (1.0 - c[None, :] ** 2)
    dx = np.sqrt((a1 - xv @ e1) ** 2 + (a2 - xv @ e2) ** 2 + orth2)
    dy = np.sqrt((a1 - yv @ e1) ** 2 + (a2 - yv @ e2) ** 2 + orth2)
    v1, v2 = k1(dx), k2(dy)
    # product ordered canonically by point so relabelling is bitwise exact
    prod = v1 * v2 if _canonical_first(xv, yv) else v2 * v1
    vals = _values(V, np.broadcast_to(S, dx.shape)) * prod
    return complex(np.sum((ws * s ** (n - 1))[:, None] * wsph[None, :] * vals))
