"""Verification suites shared by the command line runner and the acceptance tests.

A suite is a list of tasks; a task returns items.  Items are
:class:`~displab.envelope.EnvelopeFitReport`, :class:`~displab.envelope.TrendReport`
or :class:`Check` (a scalar comparison against a tolerance).  Every item has
a ``bound_id`` and an ``ok`` flag.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import funcalc, oscint, potential as pot, propagator as prop, resolvent as rs, specfun as sf
from .config import ExperimentConfig
from .envelope import EnvelopeFitReport, TrendReport, h_trend, log_grid
from .radial import RadialGrid


@dataclass
class Check:
    bound_id: str
    value: float
    tolerance: float | None
    passed: bool
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return bool(self.passed)

    def summary(self) -> dict:
        return {"bound_id": self.bound_id, "value": float(self.value), "tolerance": self.tolerance,
                "ok": self.ok, **{k: _plain(v) for k, v in self.detail.items()}}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value"])
        w.writerow(["value", format(float(self.value), ".12e")])
        for k, v in self.detail.items():
            if isinstance(v, (int, float, np.floating)):
                w.writerow([k, format(float(v), ".12e")])
        return buf.getvalue()


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def check_le(bound_id: str, value: float, tol: float, **detail) -> Check:
    return Check(bound_id, float(value), tol, bool(np.isfinite(value) and value <= tol), detail)


def item_ok(item) -> bool:
    return bool(item.ok)


def item_summary(item) -> dict:
    s = item.summary()
    s["ok"] = item_ok(item)
    s["kind"] = type(item).__name__
    return s


@dataclass
class SuiteResult:
    name: str
    items: list
    seconds: float
    error: str | None = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "fail"
        if not self.items:
            return "inconclusive"
        if all(item_ok(i) for i in self.items):
            return "pass"
        if any(isinstance(i, EnvelopeFitReport) and i.finite and i.refinement_stable is None
               for i in self.items if not item_ok(i)):
            return "inconclusive"
        return "fail"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def lines(self) -> list[str]:
        out = []
        for i in self.items:
            s = item_summary(i)
            val = s.get("fitted_constant", s.get("value", s.get("beta")))
            out.append(f"  {'ok  ' if s['ok'] else 'FAIL'} {s['bound_id']:<16} {val!s:<24}")
        if self.error:
            out.append(f"  error: {self.error}")
        return out


# ---------------------------------------------------------------------------
# criterion 1: special-function anchors

def task_anchors(cfg: ExperimentConfig) -> list:
    o = sf.Order.from_dimension(5)       # nu = 3/2
    h = complex(sf.hankel_scaled(o, "plus", 1.0))
    h_ref = -math.sqrt(2 / math.pi) * np.exp(1j) * (1 + 1j)
    j = complex(sf.bessel_j_scaled(o, 2.0))
    j_ref = math.sqrt(2 / math.pi) * (math.sin(2) - 2 * math.cos(2))
    return [check_le("anchor_H3/2(1)", abs(h - h_ref) / abs(h_ref), 1e-10),
            check_le("anchor_J3/2(2)", abs(j - j_ref) / abs(j_ref), 1e-10)]


# ---------------------------------------------------------------------------
# criterion 2: scaling laws

def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def task_scaling(cfg: ExperimentConfig, n_tuples: int = 20) -> list:
    rng = np.random.default_rng(cfg.seed)
    n = cfg.dimension
    err_R = err_K = err_k = err_W = 0.0
    for _ in range(n_tuples):
        h = float(10 ** rng.uniform(-0.5, 1.5))
        s = float(10 ** rng.uniform(-1, 1.5))
        z = complex(rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.0))
        a = rs.free_resolvent_kernel(rs.ResolventPoint(z, "plus", h, n), s)
        b = h ** -n * rs.free_resolvent_kernel(rs.ResolventPoint(z, "plus", 1.0, n), s / h)
        err_R = max(err_R, _rel(a, b))
        t = float(rng.uniform(-20, 20)) * h * h
        a = prop.band_limited_kernel(funcalc.psi, h, t, s, n)
        b = h ** -n * prop.band_limited_kernel(funcalc.psi, 1.0, t / h ** 2, s / h, n)
        err_K = max(err_K, _rel(a, b))
        a = funcalc.psi_kernel(h, s, n)
        b = h ** -n * funcalc.psi_kernel(1.0, s / h, n)
        err_k = max(err_k, _rel(a, b))
        hw = float(10 ** rng.uniform(-0.3, 0.6))
        g = float(rng.uniform(0.1, 0.3))
        tw = float(rng.uniform(2 * g + 0.5, 12.0))
        s1, s2 = (float(x) for x in 10 ** rng.uniform(-0.5, 0.7, 2))
        spec = oscint.WPieceSpec("W1", tw * hw * hw, g * hw * hw, s1 * hw, s2 * hw)
        a = oscint.W_eval(spec, hw, n)
        b = hw ** (-2 * n + 2) * oscint.W_eval(oscint.WPieceSpec("W1", tw, g, s1, s2), 1.0, n)
        err_W = max(err_W, _rel(a, b))
    return [check_le("scaling_R", err_R, 1e-8), check_le("scaling_K", err_K, 1e-8),
            check_le("scaling_k", err_k, 1e-8), check_le("B.24", err_W, 1e-8)]


# ---------------------------------------------------------------------------
# criterion 3: HS route vs Fourier-Bessel route

def task_hs_pair(cfg: ExperimentConfig) -> list:
    n = cfg.dimension
    aae = funcalc.AlmostAnalyticExtension(cfg.hs_order, cfg.strip_width)
    worst = 0.0
    for h in (1.0, 2.0, 4.0, 8.0):
        sig = np.geomspace(0.05, 20.0, 41) * h
        a = funcalc.hs_free_cutoff_kernel(aae, h, sig, n)
        b = funcalc.psi_kernel(h, sig, n)
        worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    g = np.linspace(0.8, 2.2, 57)
    serr = max(abs(funcalc.hs_apply_scalar(aae, 1.0, x) - float(funcalc.psi(x))) for x in g)
    return [check_le("2.5_kernel_pair", worst, 1e-3, sigma_range="[0.05, 20] h"),
            check_le("2.5_scalar", serr, 1e-6)]


# ---------------------------------------------------------------------------
# criterion 4: zero energy

def task_newton(cfg: ExperimentConfig) -> list:
    n = cfg.dimension
    s = np.geomspace(1e-3, 1e3, 61)
    a = rs.free_resolvent_kernel(rs.ResolventPoint(0j, "plus", 1.0, n), s)
    b = -pot.newtonian_kernel(n, s)          # (-Delta)^{-1} = -Delta^{-1}
    items = [check_le("newton_kernel", _rel(a, b), 1e-8)]
    if n == 4:
        items.append(check_le("newton_n4", _rel(b, 1.0 / (4 * math.pi ** 2 * s ** 2)), 1e-8))
    V = pot.make_potential(cfg.potential, cfg.coupling)
    grid = RadialGrid.geometric(n, cfg.r_max, per_decade=cfg.per_decade)
    A = pot.zero_energy_operator(V, grid).matrix
    worst = max(float(np.max(np.abs(rs.zero_limit_factor(V, grid, h).matrix - A))) for h in (1.0, 7.0))
    items.append(check_le("zero_limit_identity", worst, 1e-10))
    return items


# ---------------------------------------------------------------------------
# criterion 5: envelope suite

def _envelopes(n: int, full: bool) -> list:
    o = sf.Order.from_dimension(n)
    items = [
        sf.check_hankel_envelope(o, sf.half_plane_grid(level=1), sf.half_plane_grid(level=2)),
        sf.check_hankel_difference_envelope(o, sf.half_plane_grid(level=1), sf.half_plane_grid(level=2)),
    ]
    sig1, sig2 = log_grid(1e-3, 1e3, 6, 1), log_grid(1e-3, 1e3, 6, 2)
    hs = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    for b in ("2.9", "2.10"):
        items.append(rs.kernel_envelope(b, n, rs.strip_points(), hs, sig1, sig2))
    items.append(rs.resolvent_decay_envelope(n, 1.2 + 0.1j, log_grid(1e-3, 1e3, 8, 1), log_grid(1e-3, 1e3, 8, 2)))
    items.append(funcalc.kernel_decay_envelope(n))
    zr1, zr2 = log_grid(1e-3, 1e3, 8, 1), log_grid(1e-3, 1e3, 8, 2)
    for b in ("B.30", "B.31", "B.32"):
        for j in (0, 1):
            items.append(sf.amplitude_envelope(b, o, j, zr1, zr2))
    if full:
        items.append(oscint.bound_B26_sweep())
        tg = (np.geomspace(1.0, 100.0, 17), np.geomspace(0.1, 100.0, 49))
        tg2 = (np.geomspace(1.0, 100.0, 33), np.geomspace(0.1, 100.0, 97))
        for s in (0.0, 0.5, (n - 1) / 2.0):
            items.append(prop.kernel_bound_report(s, n, *tg, refined=tg2))
    if n != 4:
        for it in items:
            it.bound_id = f"{it.bound_id}@n{n}"
    return items


def task_envelopes(cfg: ExperimentConfig) -> list:
    return _envelopes(4, True) + _envelopes(5, False)


# ---------------------------------------------------------------------------
# criterion 6: oscillatory integrals

def task_oscint(cfg: ExperimentConfig) -> list:
    n = 4
    u0 = complex(oscint.U_eval(0.0, 0.0, 3.0, n))
    ref = (1 + 4.0 / 3.0 * math.log(2.0)) / 9.0
    rng = np.random.default_rng(cfg.seed)
    swap = 0.0
    for _ in range(10):
        s1, s2 = 10 ** rng.uniform(-2, 2, 2)
        t = float(rng.uniform(2.5, 60))
        a, b = complex(oscint.U_eval(s1, s2, t, n)), complex(oscint.U_eval(s2, s1, t, n))
        swap = max(swap, abs(a - b) / abs(a))
    items = [check_le("U(0,0,3)", abs(u0 - ref), 1e-8),
             check_le("U_swap", swap, 1e-13),
             check_le("B.7", oscint.identity_B7_check(20, cfg.seed, n), 1e-8)]
    items.append(oscint.bound_B6_sweep(n))
    for b in ("B.8", "B.9", "B.12", "B.15"):
        items.append(oscint.u_bound_sweep(b, n))
    items.append(oscint.bound_B14_sweep(n))
    items.append(oscint.bound_B25_sweep(n))
    return items


# ---------------------------------------------------------------------------
# criterion 7: h-decay trends

def task_trends(cfg: ExperimentConfig) -> list:
    n = cfg.dimension
    V = pot.make_potential(cfg.potential, cfg.coupling)
    hs = tuple(cfg.h_values)
    zs = rs.phi_arc(n_pts=2, imag_parts=(0.1, 0.4))
    a, b, c, d = [], [], [], []
    for h in hs:
        pts = [rs.ResolventPoint(z, "plus", h, n) for z in zs]
        a.append(max(rs.v_resolvent_norm(V, p) for p in pts))
        b.append(max(rs.v_resolvent_difference_norm(V, p) for p in pts))
        g = funcalc.cutoff_grids(V, h, n)[0]
        # ||R_h - R_0 T|| |Im z|^q with q = 0 on the sampled arc
        c.append(max(rs.perturbed_minus_free_T(V, p, g, out_grid=rs.wave_grid(p)).norm_l1() for p in pts))
        d.append(prop.integrated_V_norm(V, h, n).value)
    items = [h_trend("2.11", hs, a, 2.0, "bounded"),
             h_trend("2.12", hs, b, 2.5, "bounded"),
             h_trend("2.21", hs, c, 0.0, "decay"),
             funcalc.cutoff_difference_trend(V, hs, n),
             h_trend("2.22", hs, d, 0.0, "decay")]
    return items


# ---------------------------------------------------------------------------
# criterion 8: zero-energy resonance

def task_resonance(cfg: ExperimentConfig) -> list:
    n = cfg.dimension
    grid = RadialGrid.geometric(n, cfg.r_max, per_decade=cfg.per_decade)
    rep0, T0 = pot.resonance_test(pot.zero_potential(), grid)
    ident = float(np.max(np.abs(T0.matrix - np.eye(grid.size))))
    Vs = pot.gaussian(1e-3)
    _, T = pot.resonance_test(Vs, grid, refine=False)
    neu = (T - pot.neumann_T(Vs, grid)).norm_l1()
    sweep = pot.coupling_sweep(pot.attractive_well(1.0), grid)
    repV, _ = pot.resonance_test(pot.make_potential(cfg.potential, cfg.coupling), grid)
    repS, _ = pot.resonance_test(pot.attractive_well(sweep.critical_coupling), grid)
    return [
        Check("T_identity_V0", ident, 0.0, ident == 0.0 and rep0.regular),
        check_le("T_neumann", neu, 1e-6),
        Check("sigma_min_sweep", sweep.singular_at_critical, 1e-8,
              bool(sweep.monotone_before_critical and math.isfinite(sweep.critical_coupling)
                   and sweep.singular_at_critical <= 1e-8),
              {"critical_coupling": sweep.critical_coupling}),
        Check("refinement_gate", repV.drift if repV.drift is not None else math.inf, 0.1,
              bool(repV.regular and not repV.inconclusive and not repS.regular),
              {"status_V": repV.status, "status_at_crossing": repS.status}),
    ]


# ---------------------------------------------------------------------------
# criterion 9: dispersive decay

def decay_items(rep: prop.DecayReport, control: float, free_const: float) -> list:
    n_ok = rep.finite and rep.drift is not None and rep.drift < 0.10
    return [
        Check("1.5", rep.max_normalized, 0.10, bool(n_ok),
              {"refined": rep.refined_max_normalized, "drift": rep.drift, "n_pairs": rep.n_pairs,
               "free_check": rep.free_check}),
        check_le("1.5_order_ratio", float(np.max(rep.order_ratio)), 0.10),
        check_le("1.5_free_control", abs(control - free_const) / free_const, 1e-3,
                 control=control, free_constant=free_const),
    ]


def task_decay_headline(cfg: ExperimentConfig) -> list:
    n = cfg.dimension
    V = pot.make_potential(cfg.potential, cfg.coupling)
    tg = prop.t_grid_default(cfg.t_per_decade, cfg.t_min, cfg.t_max)
    rep = prop.dispersive_decay_report(V, cfg.a, tg, 2, (cfg.sample_pairs, cfg.seed), n)
    ctrl = prop.dispersive_decay_report(pot.zero_potential(), cfg.a, tg, 2,
                                        (cfg.sample_pairs, cfg.seed), n, refine=False)
    free = prop.free_band_limited_constant(cfg.a, tg, n)
    return decay_items(rep, ctrl.max_normalized, free)


def task_decay_kernels(cfg: ExperimentConfig) -> list:
    """The kernel-level bounds feeding the decay estimate."""
    n = cfg.dimension
    sig1, sig2 = log_grid(1e-3, 1e3, 6, 1), log_grid(1e-3, 1e3, 6, 2)
    hs = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
    return [rs.kernel_envelope("2.9", n, rs.strip_points(), hs, sig1, sig2),
            rs.kernel_envelope("2.10", n, rs.strip_points(), hs, sig1, sig2),
            oscint.bound_B6_sweep(4), oscint.u_bound_sweep("B.8", 4), oscint.bound_B25_sweep(4)]


# ---------------------------------------------------------------------------
# module suites

def task_specfun_extra(cfg: ExperimentConfig) -> list:
    n = cfg.dimension
    o = sf.Order.from_dimension(n)
    zr1, zr2 = log_grid(1e-3, 1e3, 8, 1), log_grid(1e-3, 1e3, 8, 2)
    items = [sf.check_hankel_envelope(o, sf.half_plane_grid(level=1), sf.half_plane_grid(level=2)),
             sf.check_hankel_difference_envelope(o, sf.half_plane_grid(level=1), sf.half_plane_grid(level=2))]
    for b in ("B.30", "B.31", "B.32"):
        for j in (0, 1):
            items.append(sf.amplitude_envelope(b, o, j, zr1, zr2))
    return items


def task_funcalc_extra(cfg: ExperimentConfig) -> list:
    items = [funcalc.dbar_envelope(N, cfg.strip_width) for N in (2, 3, 4)]
    items.append(funcalc.kernel_decay_envelope(cfg.dimension))
    norms = funcalc.psi_l1_norms((1, 2, 4, 8, 16), cfg.dimension)
    v = np.array(list(norms.values()))
    items.append(check_le("2.1", float(v.max() / v.min() - 1.0), 0.01, **{f"h={k:g}": x for k, x in norms.items()}))
    return items


def task_propagator_extra(cfg: ExperimentConfig) -> list:
    n = cfg.dimension
    tg = (np.geomspace(1.0, 100.0, 17), np.geomspace(0.1, 100.0, 49))
    tg2 = (np.geomspace(1.0, 100.0, 33), np.geomspace(0.1, 100.0, 97))
    return [prop.kernel_bound_report(s, n, *tg, refined=tg2) for s in (0.0, 0.5, (n - 1) / 2.0)]


CRITERIA: dict[int, tuple[str, list[Callable], float]] = {
    1: ("special-function anchors", [task_anchors], 1.0),
    2: ("scaling laws", [task_scaling], 60.0),
    3: ("functional-calculus oracle pair", [task_hs_pair], 120.0),
    4: ("Newtonian constant two-route check", [task_newton], 60.0),
    5: ("envelope suite", [task_envelopes], 600.0),
    6: ("oscillatory-integral suite", [task_oscint], 600.0),
    7: ("h-decay trends", [task_trends], 300.0),
    8: ("resonance suite", [task_resonance], 120.0),
    9: ("dispersive-decay headline", [task_decay_headline], 600.0),
}

SUITE_TASKS: dict[str, list[Callable]] = {
    "specfun": [task_anchors, task_specfun_extra],
    "resolvent": [task_newton, task_trends],
    "funcalc": [task_hs_pair, task_funcalc_extra],
    "propagator": [task_scaling, task_propagator_extra],
    "oscint": [task_oscint],
    "resonance": [task_resonance],
    "decay": [task_decay_headline, task_decay_kernels],
}


def run_tasks(name: str, tasks, cfg: ExperimentConfig) -> SuiteResult:
    t0 = time.perf_counter()
    items, err = [], None
    for task in tasks:
        try:
            items += task(cfg)
        except Exception as e:     # recorded per suite; the run continues
            err = f"{task.__name__}: {type(e).__name__}: {e}"
            break
    return SuiteResult(name, items, time.perf_counter() - t0, err)


def run_suite(name: str, cfg: ExperimentConfig) -> SuiteResult:
    return run_tasks(name, SUITE_TASKS[name], cfg)


def run_criterion(k: int, cfg: ExperimentConfig | None = None) -> SuiteResult:
    cfg = cfg or ExperimentConfig()
    title, tasks, _ = CRITERIA[k]
    return run_tasks(f"criterion_{k}", tasks, cfg)


def selected_suites(suite: str) -> list[str]:
    return list(SUITE_TASKS) if suite == "all" else [suite]


__all__ = ["Check", "SuiteResult", "CRITERIA", "SUITE_TASKS", "run_suite", "run_criterion",
           "selected_suites", "TrendReport"]
