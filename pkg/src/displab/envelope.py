"""Empirical constants for claimed bounds ``|f(p)| <= C g(p)``.

Every displayed estimate is checked the same way: sample ``|f|`` on a
parameter grid, divide by the closed-form envelope ``g`` and keep the
largest ratio.  The grid is then refined 2x and the fit is declared
stable when the maximum moves by less than ``DRIFT_TOL``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import UsageError

DRIFT_TOL = 0.05


@dataclass
class EnvelopeFitReport:
    bound_id: str
    fitted_constant: float
    worst_point: dict
    refinement_stable: bool | None
    drift: float | None = None
    exponents: dict = field(default_factory=dict)
    rows: list = field(default_factory=list, repr=False)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.fitted_constant)

    @property
    def ok(self) -> bool:
        return self.finite and bool(self.refinement_stable)

    def summary(self) -> dict:
        return {
            "bound_id": self.bound_id,
            "fitted_constant": self.fitted_constant,
            "worst_point": {k: float(v) for k, v in self.worst_point.items()},
            "refinement_stable": self.refinement_stable,
            "drift": self.drift,
            "exponents": dict(self.exponents),
            "n_samples": len(self.rows),
        }

    def to_csv(self) -> str:
        """CSV with the parameter columns followed by value, envelope, ratio."""
        buf = io.StringIO()
        if not self.rows:
            return ""
        keys = list(self.rows[0][0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys + ["abs_value", "envelope", "ratio"])
        for params, val, env in self.rows:
            w.writerow([_fmt(params[k]) for k in keys]
                       + [_fmt(val), _fmt(env), _fmt(val / env)])
        return buf.getvalue()


def _fmt(x) -> str:
    return format(float(x), ".12e")


def _max_ratio(samples, envelope):
    rows = []
    best, worst = -math.inf, {}
    for params, val in samples:
        env = float(envelope(params))
        if not env > 0:
            raise UsageError(f"envelope not positive at {params}")
        val = float(abs(val))
        rows.append((dict(params), val, env))
        r = val / env
        if not math.isfinite(r):
            best, worst = math.inf, dict(params)
        elif r > best:
            best, worst = r, dict(params)
    if not rows:
        raise UsageError("fit_envelope needs at least one sample")
    return best, worst, rows


def fit_envelope(samples: Iterable[tuple[Mapping, float]],
                 envelope: Callable[[Mapping], float],
                 bound_id: str,
                 refined: Iterable[tuple[Mapping, float]] | None = None,
                 drift_tol: float = DRIFT_TOL) -> EnvelopeFitReport:
    """Fit the best constant of ``|value| <= C * envelope(params)``.

    ``refined`` is the same quantity sampled on the 2x refined grid; without
    it the stability flag is left undetermined (``None``).
    """
    c0, worst, rows = _max_ratio(samples, envelope)
    if refined is None:
        return EnvelopeFitReport(bound_id, c0, worst, None, None, rows=rows)
    c1, worst1, rows1 = _max_ratio(refined, envelope)
    drift = abs(c1 - c0) / c0 if c0 > 0 else (0.0 if c1 == 0 else math.inf)
    fitted, wp = (c1, worst1) if c1 >= c0 else (c0, worst)
    return EnvelopeFitReport(bound_id, fitted, wp, bool(drift < drift_tol),
                             drift, rows=rows1)


def envelope_sweep(value: Callable[[Sequence[Mapping]], np.ndarray],
                   envelope: Callable[[Mapping], float],
                   grid: Callable[[int], Sequence[Mapping]],
                   bound_id: str,
                   drift_tol: float = DRIFT_TOL) -> EnvelopeFitReport:
    """Evaluate ``value`` on ``grid(1)`` and the refined ``grid(2)`` and fit.

    ``value`` receives the whole list of parameter dicts so that callers can
    vectorise; it returns an array of (complex) values.
    """
    out = []
    for level in (1, 2):
        pts = list(grid(level))
        vals = np.abs(np.asarray(value(pts)))
        out.append(list(zip(pts, vals)))
    return fit_envelope(out[0], envelope, bound_id, refined=out[1],
                        drift_tol=drift_tol)


def log_grid(lo: float, hi: float, per_decade: int, level: int = 1) -> np.ndarray:
    """Geometric grid with ``per_decade * level`` points per decade.

    Level-2 grids contain every level-1 node, so refinement can only raise
    a sampled maximum.
    """
    n = max(2, int(round(math.log10(hi / lo) * per_decade * level)) + 1)
    if level > 1:
        n1 = max(2, int(round(math.log10(hi / lo) * per_decade)) + 1)
        n = (n1 - 1) * level + 1
    return np.geomspace(lo, hi, n)


def lin_grid(lo: float, hi: float, n: int, level: int = 1) -> np.ndarray:
    return np.linspace(lo, hi, (n - 1) * level + 1)


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit ``y = C x^(-beta)``; returns ``(C, beta)``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, icpt = np.polyfit(lx, ly, 1)
    return float(np.exp(icpt)), float(-slope)


@dataclass(frozen=True)
class Axis:
    """Sweep axis: ``lo..hi`` with ``n`` base points on a ``log`` or ``lin`` scale.

    ``values`` overrides the range with a fixed list that is never polished.
    """

    lo: float = 1.0
    hi: float = 1.0
    n: int = 1
    scale: str = "log"
    values: tuple | None = None

    def grid(self, level: int = 1) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, float)
        m = (self.n - 1) * level + 1
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, m)
        return np.linspace(self.lo, self.hi, m)

    def _fwd(self, x):
        return np.log(x) if self.scale == "log" else np.asarray(x, float)

    def _inv(self, u):
        return np.exp(u) if self.scale == "log" else u

    def local(self, x: float, half: float, m: int) -> np.ndarray:
        u = self._fwd(x)
        lo, hi = self._fwd(self.lo), self._fwd(self.hi)
        return self._inv(np.clip(np.linspace(u - half, u + half, m), lo, hi))

    def spacing(self, level: int) -> float:
        if self.values is not None or self.n < 2:
            return 0.0
        return float(self._fwd(self.hi) - self._fwd(self.lo)) / ((self.n - 1) * level)


def polished_samples(value: Callable[[list], np.ndarray], axes: Mapping[str, Axis], level: int = 1,
                     top: int = 6, rounds: int = 3, points: int = 7,
                     envelope: Callable[[Mapping], float] | None = None,
                     keep: Callable[[Mapping], bool] | None = None) -> list:
    """Grid samples plus local re-sampling around the largest ratios.

    The sampled maximum of an oscillating ratio depends on where grid points
    land; polishing the top candidates in shrinking boxes makes the reported
    maximum converge instead.
    """
    names = list(axes)
    grids = [axes[k].grid(level) for k in names]
    mesh = np.meshgrid(*grids, indexing="ij")
    pts = [dict(zip(names, map(float, c))) for c in zip(*(m.ravel() for m in mesh))]
    if keep is not None:
        pts = [p for p in pts if keep(p)]
    vals = np.abs(np.asarray(value(pts)))
    samples = list(zip(pts, vals))
    if envelope is None or top <= 0:
        return samples
    ratio = np.array([v / envelope(p) for p, v in samples])
    order = np.argsort(-np.where(np.isfinite(ratio), ratio, -np.inf))
    starts, seen = [], set()
    for k in order:
        key = tuple(round(v, 12) for v in pts[k].values())
        if key not in seen:
            seen.add(key)
            starts.append(pts[k])
        if len(starts) >= top:
            break
    poly = [k for k in names if axes[k].spacing(level) > 0]
    for p0 in starts:
        best, half = dict(p0), {k: axes[k].spacing(level) for k in poly}
        for _ in range(rounds):
            loc = [axes[k].local(best[k], half[k], points) if k in poly else np.array([best[k]])
                   for k in names]
            lm = np.meshgrid(*loc, indexing="ij")
            lp = [dict(zip(names, map(float, c))) for c in zip(*(m.ravel() for m in lm))]
            if keep is not None:
                lp = [p for p in lp if keep(p)]
            if not lp:
                break
            lv = np.abs(np.asarray(value(lp)))
            samples += list(zip(lp, lv))
            lr = np.array([v / envelope(p) for p, v in zip(lp, lv)])
            best = lp[int(np.argmax(np.where(np.isfinite(lr), lr, -np.inf)))]
            half = {k: 2.0 * h / (points - 1) for k, h in half.items()}
    return samples


def polished_fit(value: Callable[[list], np.ndarray], envelope: Callable[[Mapping], float],
                 axes: Mapping[str, Axis], bound_id: str, refine: bool = True,
                 drift_tol: float = DRIFT_TOL, **polish) -> EnvelopeFitReport:
    """``fit_envelope`` on polished samples of the base grid and the 2x grid."""
    base = polished_samples(value, axes, 1, envelope=envelope, **polish)
    ref = polished_samples(value, axes, 2, envelope=envelope, **polish) if refine else None
    return fit_envelope(base, envelope, bound_id, refined=ref, drift_tol=drift_tol)


@dataclass
class TrendReport:
    """Power-law trend ``value(h) ~ C h^(-beta)`` of a (possibly rescaled) norm.

    ``expect='decay'`` asks for a non-increasing sequence with ``beta > 0``;
    ``expect='bounded'`` for a monotone sequence (either direction) whose fit
    does not grow (``beta >= -slack``).
    """

    bound_id: str
    h: list
    values: list
    scale_exponent: float
    beta: float
    fitted_constant: float
    monotone: bool
    expect: str = "decay"
    slack: float = 0.02

    @property
    def ok(self) -> bool:
        if not (self.monotone and math.isfinite(self.fitted_constant)):
            return False
        return self.beta > 0 if self.expect == "decay" else self.beta >= -self.slack

    def summary(self) -> dict:
        return {"bound_id": self.bound_id, "h": list(map(float, self.h)),
                "values": list(map(float, self.values)), "scale_exponent": self.scale_exponent,
                "beta": self.beta, "fitted_constant": self.fitted_constant,
                "monotone": self.monotone, "expect": self.expect, "ok": self.ok}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "value", "fit"])
        for h, v in zip(self.h, self.values):
            w.writerow([_fmt(h), _fmt(v), _fmt(self.fitted_constant * h ** (-self.beta))])
        return buf.getvalue()


def h_trend(bound_id: str, h: Sequence[float], values: Sequence[float],
            scale_exponent: float = 0.0, expect: str = "decay",
            slack: float = 0.02) -> TrendReport:
    """Build a :class:`TrendReport` from raw norms; ``values * h**scale_exponent`` is fitted."""
    if expect not in ("decay", "bounded"):
        raise UsageError("expect must be 'decay' or 'bounded'")
    order = np.argsort(np.asarray(h, float))
    hs = np.asarray(h, float)[order]
    v = np.abs(np.asarray(values, float))[order] * hs ** scale_exponent
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        return TrendReport(bound_id, list(hs), list(v), scale_exponent, math.nan, math.inf,
                           False, expect, slack)
    C, beta = fit_power_law(hs, v)
    d = np.diff(v) / v[:-1]
    down = bool(np.all(d <= slack))
    mono = down if expect == "decay" else bool(down or np.all(d >= -slack))
    return TrendReport(bound_id, list(hs), list(v), scale_exponent, beta, C, mono, expect, slack)
