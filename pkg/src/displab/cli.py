"""Command line runner: ``displab run | report | list-potentials | self-test``."""

from __future__ import annotations

import argparse
import json
import os
import re
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import SUITES, ExperimentConfig, dump_config, load_config
from .envelope import EnvelopeFitReport, TrendReport
from .errors import DisplabError, UsageError
from .suites import SuiteResult, item_ok, item_summary, run_suite, run_tasks, selected_suites

EXIT = {"pass": 0, "inconclusive": 3, "fail": 1}
USAGE_EXIT = 2


# ---------------------------------------------------------------------------
# output

def _safe(bound_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._@=-]+", "_", bound_id)


def _svg(item, path: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    plt.rcParams["svg.hashsalt"] = "displab"
    fig, ax = plt.subplots(figsize=(5, 4))
    if isinstance(item, EnvelopeFitReport):
        env = np.array([r[2] for r in item.rows])
        val = np.array([r[1] for r in item.rows])
        m = val > 0
        ax.loglog(env[m], val[m], ".", ms=3, label="samples")
        xs = np.geomspace(env[m].min(), env[m].max(), 50) if m.any() else np.array([1.0])
        ax.loglog(xs, item.fitted_constant * xs, "-", label=f"C = {item.fitted_constant:.4g}")
        ax.set_xlabel("envelope")
        ax.set_ylabel("|value|")
    else:
        h = np.array(item.h)
        ax.loglog(h, item.values, "o", label="values")
        ax.loglog(h, item.fitted_constant * h ** (-item.beta), "-", label=f"beta = {item.beta:.3g}")
        ax.set_xlabel("h")
        ax.set_ylabel("norm")
    ax.set_title(item.bound_id)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_run(results: list[SuiteResult], cfg: ExperimentConfig, out_dir: str, wall: float) -> str:
    """Write CSVs, SVGs and the manifest into a temporary directory, then rename it into place."""
    os.makedirs(out_dir, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".partial-", dir=out_dir)
    try:
        table = []
        for res in results:
            for item in res.items:
                name = _safe(item.bound_id)
                with open(os.path.join(tmp, f"{name}.csv"), "w", encoding="utf-8", newline="") as fh:
                    fh.write(item.to_csv())
                if isinstance(item, (EnvelopeFitReport, TrendReport)):
                    _svg(item, os.path.join(tmp, f"{name}.svg"))
                s = item_summary(item)
                s["suite"] = res.name
                table.append(s)
        manifest = {
            "tool": "displab", "version": __version__, "complete": True,
            "config": cfg.snapshot(), "wall_time": wall,
            "suites": {r.name: {"status": r.status, "seconds": r.seconds, "error": r.error,
                                "items": [i.bound_id for i in r.items]} for r in results},
            "results": table,
        }
        with open(os.path.join(tmp, "config.ini"), "w", encoding="utf-8") as fh:
            fh.write(dump_config(cfg))
        with open(os.path.join(tmp, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        stamp = time.strftime("%Y%m%d-%H%M%S")
        final = os.path.join(out_dir, f"{stamp}-{cfg.suite}-seed{cfg.seed}")
        k = 1
        while os.path.exists(final):
            final = os.path.join(out_dir, f"{stamp}-{cfg.suite}-seed{cfg.seed}-{k}")
            k += 1
        os.rename(tmp, final)
        return final
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def worst_status(results: list[SuiteResult]) -> str:
    statuses = {r.status for r in results}
    for s in ("fail", "inconclusive"):
        if s in statuses:
            return s
    return "pass"


def run(cfg: ExperimentConfig) -> tuple[str, list[SuiteResult]]:
    names = selected_suites(cfg.suite)
    t0 = time.perf_counter()
    if cfg.workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(run_suite, names, [cfg] * len(names)))
    else:
        results = [run_suite(nm, cfg) for nm in names]
    path = write_run(results, cfg, cfg.out, time.perf_counter() - t0)
    return path, results


# ---------------------------------------------------------------------------
# report

def render_report(manifest_path: str) -> str:
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, "manifest.json")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            m = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise OSError(f"cannot read manifest {manifest_path}: {e}") from None
    lines = []
    if str(m.get("version", "")) != __version__:
        lines.append(f"warning: manifest written by version {m.get('version')}, "
                     f"this is {__version__}; rendering best effort")
    suites = m.get("suites") or {}
    if not suites:
        lines.append("no suites run")
        return "\n".join(lines)
    for name, s in suites.items():
        lines.append(f"[{name}] {s.get('status')} ({s.get('seconds', 0):.1f} s)"
                     + (f"  error: {s['error']}" if s.get("error") else ""))
    lines.append("")
    lines.append(f"{'bound_id':<20} {'constant/value':>16} {'exponent':>10} {'drift':>10}  status")
    for r in m.get("results", []):
        const = r.get("fitted_constant", r.get("value"))
        expo = r.get("beta", "")
        drift = r.get("drift", "")
        fmt = lambda v: f"{v:.6g}" if isinstance(v, (int, float)) and v is not None else str(v or "")
        lines.append(f"{r.get('bound_id', '?'):<20} {fmt(const):>16} {fmt(expo):>10} {fmt(drift):>10}  "
                     f"{'ok' if r.get('ok') else 'FAIL'}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="displab", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run verification suites")
    r.add_argument("--config", help="config file (INI sections)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--suite", help=f"one of {', '.join(SUITES)}")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    rp = sub.add_parser("report", help="summarize a run directory or manifest")
    rp.add_argument("manifest")
    sub.add_parser("list-potentials", help="list potential presets")
    st = sub.add_parser("self-test", help="fast anchors and identities")
    st.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "list-potentials":
            from .potential import PRESETS
            for k, (_, desc) in PRESETS.items():
                print(f"{k:<10} {desc}")
            return 0
        if args.cmd == "report":
            print(render_report(args.manifest))
            return 0
        if args.cmd == "self-test":
            from .suites import task_anchors, task_newton, task_resonance, task_scaling
            cfg = ExperimentConfig(seed=args.seed)
            res = run_tasks("self-test", [task_anchors, task_scaling, task_newton, task_resonance], cfg)
            print("\n".join(res.lines()))
            print(f"self-test: {res.status}")
            return EXIT[res.status]
        cfg = load_config(args.config)
        over = {k: v for k, v in (("out", args.out), ("suite", args.suite), ("seed", args.seed),
                                  ("workers", args.workers)) if v is not None}
        if over:
            cfg = cfg.replace(**over)
            cfg.validate()
        path, results = run(cfg)
        for res in results:
            print(f"[{res.name}] {res.status} ({res.seconds:.1f} s)")
            print("\n".join(res.lines()))
        status = worst_status(results)
        print(f"wrote {path}\noverall: {status}")
        return EXIT[status]
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 4
    except DisplabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
