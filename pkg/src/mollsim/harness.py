"""Experiment orchestration: sweeps over (N, h, replica), marginal
replica studies, persistence, and report generation.

Every cell result is appended to a line-delimited results file as it
completes, so interrupted sweeps resume by skipping completed keys.
Cell failures quarantine the cell and the run record is marked
partial.  Records are deterministic for a fixed config and seed set
up to timestamps and runtimes.
"""

import datetime
import json
import math
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import rates
from .config import ExperimentConfig, config_hash, validate_config
from .engine import engine_name
from .grids import GridField, GridSpec
from .initial import density_on_grid
from .metrics import (ErrorRecord, bootstrap_moment_interval,
                      l1_lr_norm, lp_norm, moment_over_replicas,
                      per_snapshot_errors, weighted_marginal_error)
from .particles import (SimConfig, gaussian_domination_check,
                        mollified_empirical_measure,
                        replica_density_estimate, simulate)
from .pde import PdeConfig, solve_mild
from .bumps import MollifierParams
from .tabulate import get_tabulated_kernel

RUN_SCHEMA = 1
VOLATILE_KEYS = frozenset({"timestamps", "wall_seconds", "runtime_seconds",
                           "started", "finished"})


def env_fingerprint() -> dict:
    import scipy
    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "engine": engine_name(),
    }


def utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def strip_volatile(obj):
    """Copy with timestamps/runtimes removed, for record comparison."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items()
                if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


def cell_key(seed, N, h, replica) -> str:
    return "%d:%d:%.17g:%d" % (seed, N, h, replica)


def reference_solution(cfg: ExperimentConfig, extra_times=()):
    """Shared reference density on the measure grid at the error times."""
    grid = cfg.measure_grid
    u0 = density_on_grid(cfg.initial_law, grid)
    times = sorted(set(cfg.snapshot_times()) | set(extra_times))
    pcfg = PdeConfig(kernel=cfg.kernel, box=cfg.measure_L, n=cfg.measure_n,
                     dt=cfg.pde_dt, T=cfg.T, dealias=True,
                     kernel_transform_mode=cfg.pde_mode,
                     self_tol=cfg.pde_self_tol)
    return solve_mild(u0, pcfg, snapshot_times=times)


def _mollifier_for(cfg: ExperimentConfig, N: int) -> MollifierParams:
    return MollifierParams(d=cfg.d, alpha=float(rates._coerce(cfg.alpha)),
                           N=N)


def run_cell(cfg: ExperimentConfig, seed: int, N: int, h: float,
             replica: int, u_series):
    """One (seed, N, h, replica) simulation -> (ErrorRecord, extras).

    u_series: reference GridFields, t=0 first then the error times.
    """
    t0 = time.perf_counter()
    m = _mollifier_for(cfg, N)
    tab = get_tabulated_kernel(cfg.kernel, m,
                               cells_per_radius=cfg.cells_per_radius)
    sim = SimConfig(N=N, d=cfg.d, h=h, T=cfg.T, A=cfg.cutoff_A,
                    kernel=cfg.kernel, mollifier=m,
                    initial_law=cfg.initial_law, seed=seed, replica=replica,
                    snapshot_times=(0.0,) + cfg.snapshot_times(),
                    h_base=cfg.h_base,
                    cells_per_radius=cfg.cells_per_radius)
    grid = cfg.measure_grid
    stats = {}
    fields = simulate(sim, tab=tab, stats=stats,
                      collect=lambda s: mollified_empirical_measure(
                          s, m, grid))
    if len(fields) != len(u_series):
        raise RuntimeError("snapshot count mismatch: %d vs %d"
                           % (len(fields), len(u_series)))
    errs = per_snapshot_errors(fields[1:], u_series[1:], cfg.r)
    init_gap = GridField(grid, fields[0].values - u_series[0].values, 0.0)
    init_error = l1_lr_norm(init_gap, cfg.r)
    sup_l2 = max(lp_norm(f, 2) for f in fields)
    leakage = max(f.meta.get("boundary_loss", 0.0) for f in fields)
    rec = ErrorRecord(N=N, h=h, replica=replica, m=cfg.moments[0],
                      sup_time_error=max(errs), snapshot_errors=errs,
                      marginal_error=None,
                      runtime_seconds=time.perf_counter() - t0,
                      clamp_fraction=stats.get("clamp_fraction", 0.0))
    extras = {"seed": seed, "init_error": init_error,
              "sup_density_l2": sup_l2, "boundary_loss": leakage}
    return rec, extras


def _cell_task(args):
    cfg, seed, N, h, replica, u_values, times, grid_args = args
    grid = GridSpec(*grid_args)
    u_series = [GridField(grid, v, t) for v, t in zip(u_values, times)]
    rec, extras = run_cell(cfg, seed, N, h, replica, u_series)
    return rec.to_json(), extras


def _load_results(path):
    done, quarantined = {}, []
    if not os.path.exists(path):
        return done, quarantined
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("kind") == "cell":
                done[obj["key"]] = obj
            elif obj.get("kind") == "quarantine":
                quarantined.append(obj)
    return done, quarantined


def run_sweep(cfg: ExperimentConfig, resume: bool = False, workers: int = 1,
              log=None) -> dict:
    """Execute the sweep and return the run record (also written to
    <output>/run_record.json)."""
    problems = validate_config(cfg)
    if problems:
        from .config import ConfigError
        raise ConfigError(problems)
    say = log if log is not None else (lambda *_: None)
    outdir = cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    results_path = os.path.join(outdir, "results.jsonl")
    if os.path.exists(results_path) and not resume:
        raise RuntimeError("results file %s exists; pass resume=True or "
                           "remove it" % results_path)
    done, old_quarantine = _load_results(results_path)
    started = utc_now()
    t_wall = time.perf_counter()

    say("solving the reference density (dt=%g)" % cfg.pde_dt)
    sol = reference_solution(cfg)
    u_series = [sol.field_at(0.0)] + [sol.field_at(t)
                                      for t in cfg.snapshot_times()]
    a_warn = cfg.cutoff_A < 2.0 * sol.drift_sup
    if a_warn:
        warnings.warn("cutoff A=%g is below twice the reference field sup "
                      "%g; the clamp may distort the drift"
                      % (cfg.cutoff_A, sol.drift_sup), stacklevel=2)

    plan = cfg.plan()
    tasks = [(seed, N, h, rep) for seed in cfg.seeds for N, h in plan
             for rep in range(cfg.replicas)]
    pending = [t for t in tasks if cell_key(*t) not in done]
    say("plan: %d cells (%d already done)" % (len(tasks),
                                              len(tasks) - len(pending)))

    quarantined = []
    fh = open(results_path, "a")
    try:
        if workers > 1 and pending:
            grid_args = (cfg.d, cfg.measure_L, cfg.measure_n)
            times = [f.time for f in u_series]
            vals = [f.values for f in u_series]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = [(t, pool.submit(_cell_task,
                                        (cfg, t[0], t[1], t[2], t[3],
                                         vals, times, grid_args)))
                        for t in pending]
                for (seed, N, h, rep), fut in futs:
                    key = cell_key(seed, N, h, rep)
                    try:
                        rec_json, extras = fut.result()
                        obj = {"kind": "cell", "key": key,
                               "record": rec_json, "extras": extras}
                        done[key] = obj
                    except Exception as ex:  # quarantine, keep sweeping
                        obj = {"kind": "quarantine", "key": key,
                               "error": "%s: %s" % (type(ex).__name__, ex)}
                        quarantined.append(obj)
                    fh.write(json.dumps(obj, sort_keys=True) + "\n")
                    fh.flush()
        else:
            for seed, N, h, rep in pending:
                key = cell_key(seed, N, h, rep)
                say("cell %s" % key)
                try:
                    rec, extras = run_cell(cfg, seed, N, h, rep, u_series)
                    obj = {"kind": "cell", "key": key,
                           "record": rec.to_json(), "extras": extras}
                    done[key] = obj
                except Exception as ex:
                    obj = {"kind": "quarantine", "key": key,
                           "error": "%s: %s" % (type(ex).__name__, ex)}
                    quarantined.append(obj)
                fh.write(json.dumps(obj, sort_keys=True) + "\n")
                fh.flush()
    finally:
        fh.close()

    record = _assemble_record(cfg, sol, done, quarantined, tasks, a_warn)
    record["timestamps"] = {"started": started, "finished": utc_now()}
    record["wall_seconds"] = time.perf_counter() - t_wall
    with open(os.path.join(outdir, "run_record.json"), "w") as out:
        json.dump(record, out, sort_keys=True, indent=1)
    return record


def _assemble_record(cfg, sol, done, quarantined, tasks, a_warn) -> dict:
    plan = cfg.plan()
    m0 = cfg.moments[0]
    cells = [done[cell_key(*t)] for t in tasks if cell_key(*t) in done]

    aggregates = []
    for seed in cfg.seeds:
        for N, h in plan:
            errs, inits, clamps, sups = [], [], [], []
            for rep in range(cfg.replicas):
                obj = done.get(cell_key(seed, N, h, rep))
                if obj is None:
                    continue
                errs.append(obj["record"]["sup_time_error"])
                inits.append(obj["extras"]["init_error"])
                clamps.append(obj["record"]["clamp_fraction"])
                sups.append(obj["extras"]["sup_density_l2"])
            if not errs:
                continue
            row = {"seed": seed, "N": N, "h": h, "replicas_done": len(errs)}
            for m in cfg.moments:
                pt, lo, hi = bootstrap_moment_interval(errs, m, seed=seed)
                row["moment_m%d" % m] = pt
                row["moment_m%d_ci" % m] = [lo, hi]
            row["init_error_mean"] = float(np.mean(inits))
            row["clamp_fraction_mean"] = float(np.mean(clamps))
            row["sup_density_l2_mean"] = float(np.mean(sups))
            aggregates.append(row)

    fits = {}
    verdicts = []
    e = cfg.exponents()
    n_values = sorted({N for N, _ in plan})
    h_values = sorted({h for _, h in plan})

    if len(n_values) >= 3 and (cfg.coupled or len(h_values) == 1):
        pts = [(row["N"], row["moment_m%d" % m0]) for row in aggregates
               if row["moment_m%d" % m0] > 0]
        if len(pts) >= 3:
            fit = rates.fit_loglog(pts)
            fits["n_slope"] = _fit_json(fit)
            if cfg.coupled:
                verdicts.append(_verdict(
                    "n_slope", fit.slope, -float(e.rho), cfg.slope_band_n,
                    "config slope_band_n"))

    if len(h_values) >= 3 and len(n_values) == 1:
        pts, dropped = [], 0
        if cfg.plateau_h is not None:
            base = {}
            for row in aggregates:
                if abs(row["h"] - cfg.plateau_h) < 1e-15:
                    base[row["seed"]] = row["moment_m%d" % m0]
            for row in aggregates:
                if abs(row["h"] - cfg.plateau_h) < 1e-15:
                    continue
                floor = base.get(row["seed"])
                if floor is None:
                    continue
                gap = row["moment_m%d" % m0] - floor
                if gap > 0:
                    pts.append((row["h"], gap))
                else:
                    dropped += 1
        else:
            pts = [(row["h"], row["moment_m%d" % m0]) for row in aggregates]
        if len(pts) >= 3:
            fit = rates.fit_loglog(pts)
            fits["h_slope"] = _fit_json(fit)
            fits["h_slope"]["plateau_subtracted"] = cfg.plateau_h is not None
            fits["h_slope"]["points_dropped"] = dropped
            verdicts.append(_verdict(
                "h_slope", fit.slope, float(e.v3), cfg.slope_band_h,
                "config slope_band_h"))
        elif cfg.plateau_h is not None:
            verdicts.append({"name": "h_slope", "value": None,
                             "target": float(e.v3),
                             "band": cfg.slope_band_h,
                             "band_source": "config slope_band_h",
                             "pass": False,
                             "note": "plateau subtraction left %d points"
                                     % len(pts)})

    if cfg.check_density_flat and len(n_values) >= 3:
        pts = [(row["N"], row["sup_density_l2_mean"]) for row in aggregates
               if row["sup_density_l2_mean"] > 0]
        if len(pts) >= 3:
            fit = rates.fit_loglog(pts)
            fits["density_n_slope"] = _fit_json(fit)
            verdicts.append(_verdict(
                "density_l2_flat", fit.slope, 0.0, cfg.flat_band,
                "config flat_band"))

    status = "complete" if (len(cells) == len(tasks) and not quarantined) \
        else "partial"
    return {
        "schema": RUN_SCHEMA,
        "kind": "run_record",
        "title": cfg.title,
        "config_hash": config_hash(cfg),
        "env": env_fingerprint(),
        "mode": "coupled" if cfg.coupled else "fixed",
        "plan": [[N, h] for N, h in plan],
        "seeds": list(cfg.seeds),
        "replicas": cfg.replicas,
        "exponents": {k: (v if not isinstance(v, float) or
                          math.isfinite(v) else "inf")
                      for k, v in e.as_floats().items()},
        "exponent_summary": rates.summary(cfg.d, cfg.r, cfg.zeta),
        "a_policy": {"A": cfg.cutoff_A,
                     "reference_drift_sup": sol.drift_sup,
                     "warned": bool(a_warn)},
        "pde": {"dt": cfg.pde_dt, "self_convergence": sol.self_convergence,
                "min_value": sol.min_value, "drift_sup": sol.drift_sup},
        "cells": cells,
        "quarantined": quarantined,
        "aggregates": aggregates,
        "fits": fits,
        "verdicts": verdicts,
        "status": status,
    }


def _fit_json(fit) -> dict:
    return {"slope": fit.slope, "intercept": fit.intercept,
            "stderr": fit.stderr, "r_squared": fit.r_squared,
            "points": [list(p) for p in fit.points]}


def _verdict(name, value, target, band, source) -> dict:
    return {"name": name, "value": value, "target": target, "band": band,
            "band_source": source, "pass": bool(abs(value - target) <= band)}


# ---------------------------------------------------------------------------
# single-particle marginal study
# ---------------------------------------------------------------------------

def cell_average_onto(u: GridField, coarse: GridSpec) -> GridField:
    """Average fine-grid values over the coarse nearest-node cells."""
    if u.spec.d != coarse.d:
        raise ValueError("dimension mismatch")
    pts = u.spec.points()
    idx = np.floor((pts + coarse.L) / coarse.spacing + 0.5).astype(np.int64)
    inside = np.all((idx >= 0) & (idx < coarse.n), axis=1)
    flat = np.ravel_multi_index(tuple(idx[inside].T),
                                (coarse.n,) * coarse.d)
    sums = np.bincount(flat, weights=u.values.ravel()[inside],
                       minlength=coarse.n ** coarse.d)
    cnts = np.bincount(flat, minlength=coarse.n ** coarse.d)
    vals = np.where(cnts > 0, sums / np.maximum(cnts, 1), 0.0)
    return GridField(coarse, vals.reshape((coarse.n,) * coarse.d), u.time)


def run_thm2(cfg: ExperimentConfig, resume: bool = False, log=None) -> dict:
    """Replica-marginal study across the sweep: Gaussian-weighted density
    error and the domination-ratio stability check."""
    problems = validate_config(cfg)
    if cfg.marginal is None:
        problems.append("[marginal] section required for this study")
    if problems:
        from .config import ConfigError
        raise ConfigError(problems)
    say = log if log is not None else (lambda *_: None)
    mg = cfg.marginal
    outdir = cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    results_path = os.path.join(outdir, "thm2_results.jsonl")
    if os.path.exists(results_path) and not resume:
        raise RuntimeError("results file %s exists; pass resume=True or "
                           "remove it" % results_path)
    done, _ = _load_results(results_path)
    started = utc_now()
    t_wall = time.perf_counter()

    sol = reference_solution(cfg, extra_times=(mg.t,))
    u_t = cell_average_onto(sol.field_at(mg.t), mg.grid)

    plan = cfg.plan()
    quarantined = []
    cells = []
    fh = open(results_path, "a")
    try:
        for seed in cfg.seeds:
            for N, h in plan:
                key = "%d:%d:%.17g:0" % (seed, N, h)
                if key in done:
                    cells.append(done[key])
                    continue
                say("marginal cell seed=%d N=%d h=%g" % (seed, N, h))
                try:
                    rec = _thm2_cell(cfg, seed, N, h, u_t)
                    obj = {"kind": "cell", "key": key, "record": rec}
                    cells.append(obj)
                    done[key] = obj
                except Exception as ex:
                    obj = {"kind": "quarantine", "key": key,
                           "error": "%s: %s" % (type(ex).__name__, ex)}
                    quarantined.append(obj)
                fh.write(json.dumps(obj, sort_keys=True) + "\n")
                fh.flush()
    finally:
        fh.close()

    medians = []
    for N, h in plan:
        errs = [c["record"]["weighted_error"] for c in cells
                if c["record"]["N"] == N and c["record"]["h"] == h]
        ratios = [c["record"]["domination_ratio"] for c in cells
                  if c["record"]["N"] == N and c["record"]["h"] == h]
        if errs:
            medians.append({"N": N, "h": h,
                            "weighted_error_median": float(np.median(errs)),
                            "ratio_median": float(np.median(ratios))})
    verdicts = []
    if len(medians) >= 2:
        vals = [row["weighted_error_median"] for row in medians]
        decreasing = all(b < a for a, b in zip(vals, vals[1:]))
        verdicts.append({"name": "weighted_error_decreasing",
                         "values": vals, "band_source":
                         "strict decrease along coupled refinement",
                         "band": 0.0, "pass": bool(decreasing)})
    all_ratios = [c["record"]["domination_ratio"] for c in cells]
    if all_ratios:
        mid = float(np.median(all_ratios))
        spread = max(abs(r - mid) for r in all_ratios) / mid if mid > 0 \
            else math.inf
        verdicts.append({"name": "domination_ratio_stable",
                         "value": spread, "target": 0.0, "band": 0.25,
                         "band_source": "config ratio stability band",
                         "pass": bool(spread <= 0.25)})

    record = {
        "schema": RUN_SCHEMA, "kind": "marginal_record",
        "title": cfg.title, "config_hash": config_hash(cfg),
        "env": env_fingerprint(),
        "plan": [[N, h] for N, h in plan],
        "study": {"t": mg.t, "p": mg.p, "c": mg.c,
                  "particle_index": mg.particle_index,
                  "replicas": mg.replicas, "min_count": mg.min_count},
        "pde": {"dt": cfg.pde_dt, "self_convergence": sol.self_convergence,
                "drift_sup": sol.drift_sup},
        "cells": cells, "quarantined": quarantined,
        "medians": medians, "verdicts": verdicts,
        "status": "complete" if not quarantined else "partial",
    }
    record["timestamps"] = {"started": started, "finished": utc_now()}
    record["wall_seconds"] = time.perf_counter() - t_wall
    with open(os.path.join(outdir, "thm2_record.json"), "w") as out:
        json.dump(record, out, sort_keys=True, indent=1)
    return record


def _thm2_cell(cfg, seed, N, h, u_t) -> dict:
    mg = cfg.marginal
    t0 = time.perf_counter()
    m = _mollifier_for(cfg, N)
    tab = get_tabulated_kernel(cfg.kernel, m,
                               cells_per_radius=cfg.cells_per_radius)
    sim = SimConfig(N=N, d=cfg.d, h=h, T=mg.t, A=cfg.cutoff_A,
                    kernel=cfg.kernel, mollifier=m,
                    initial_law=cfg.initial_law, seed=seed, replica=0,
                    snapshot_times=(mg.t,), h_base=cfg.h_base,
                    cells_per_radius=cfg.cells_per_radius)
    est = replica_density_estimate(sim, mg.particle_index, mg.replicas,
                                   mg.t, mg.grid, tab=tab)
    werr = weighted_marginal_error(est, u_t, cfg.initial_law, mg.t,
                                   mg.c, mg.p, min_count=mg.min_count)
    dom = gaussian_domination_check(est, cfg.initial_law, mg.t, mg.c,
                                    min_count=mg.min_count)
    eligible = int(np.count_nonzero(
        np.asarray(est.meta["counts"]) >= mg.min_count))
    return {"seed": seed, "N": N, "h": h,
            "weighted_error": float(werr),
            "domination_ratio": float(dom["ratio"]),
            "eligible_cells": eligible,
            "degenerate": bool(dom.get("degenerate", False)),
            "runtime_seconds": time.perf_counter() - t0}


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def load_record(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def report(record: dict, outdir=None, check: bool = False):
    """Human-readable summary plus plot-data files.

    Returns (text, exit_code): 0 ok, 3 empty record, 4 when check is
    set and a verdict failed.
    """
    lines = []
    add = lines.append
    kind = record.get("kind", "run_record")
    add("%s  [%s]" % (record.get("title", "untitled"), kind))
    add("config %s  status %s  engine %s"
        % (record.get("config_hash", "?"), record.get("status", "?"),
           record.get("env", {}).get("engine", "?")))
    cells = record.get("cells", [])
    if not cells:
        add("no cells: the record holds no completed results")
        return "\n".join(lines) + "\n", 3

    if kind == "run_record":
        exp = record.get("exponents", {})
        add("")
        add("exponents: alpha=%s rho=%s v1=%s v2=%s v3=%s (r=%s zeta=%s)"
            % tuple(str(exp.get(k)) for k in
                    ("alpha", "rho", "v1", "v2", "v3", "r", "zeta")))
        summ = record.get("exponent_summary", {})
        if summ:
            add("at alpha*: alpha*=%s v1=%s cost=%s coupled h exponent=%s"
                % (summ.get("alpha_star"), summ.get("rho"),
                   summ.get("cost_exponent"), summ.get("coupled_exponent")))
            for note in summ.get("annotations", []):
                add("note: %s" % note)
        add("")
        add("%-6s %-8s %-12s %-14s %-24s %s"
            % ("seed", "N", "h", "moment", "ci", "init"))
        for row in record.get("aggregates", []):
            m_keys = [k for k in row if k.startswith("moment_m")
                      and not k.endswith("_ci")]
            m0 = sorted(m_keys)[0]
            ci = row.get(m0 + "_ci", [float("nan")] * 2)
            add("%-6d %-8d %-12.6g %-14.6g [%.6g, %.6g]  %.3g"
                % (row["seed"], row["N"], row["h"], row[m0], ci[0], ci[1],
                   row.get("init_error_mean", float("nan"))))
        add("")
        for name, fit in record.get("fits", {}).items():
            add("fit %s: slope=%.4f stderr=%.4f R2=%.4f"
                % (name, fit["slope"], fit["stderr"], fit["r_squared"]))
    else:
        add("")
        add("%-6s %-8s %-12s %-16s %s"
            % ("seed", "N", "h", "weighted_error", "ratio"))
        for c in cells:
            r = c["record"]
            add("%-6d %-8d %-12.6g %-16.6g %.4g"
                % (r["seed"], r["N"], r["h"], r["weighted_error"],
                   r["domination_ratio"]))
        add("")
        for row in record.get("medians", []):
            add("median N=%-8d weighted_error=%.6g ratio=%.4g"
                % (row["N"], row["weighted_error_median"],
                   row["ratio_median"]))

    add("")
    failed = False
    for v in record.get("verdicts", []):
        ok = v.get("pass", False)
        failed = failed or not ok
        if v.get("value") is not None and v.get("target") is not None:
            add("[%s] %s: value=%.4f target=%.4f band=+/-%.3g (%s)"
                % ("PASS" if ok else "FAIL", v["name"], v["value"],
                   v["target"], v["band"], v.get("band_source", "")))
        else:
            add("[%s] %s: %s (%s)"
                % ("PASS" if ok else "FAIL", v["name"],
                   v.get("values", v.get("note", "")),
                   v.get("band_source", "")))
    if record.get("quarantined"):
        add("")
        add("quarantined cells:")
        for q in record["quarantined"]:
            add("  %s: %s" % (q["key"], q["error"]))

    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        for name, fit in record.get("fits", {}).items():
            path = os.path.join(outdir, "plot_%s.csv" % name)
            with open(path, "w") as fh:
                fh.write("log10_x,log10_error,fit_line\n")
                for x, y in fit["points"]:
                    ly = math.log10(y)
                    pred = (fit["intercept"] + fit["slope"] * math.log(x)) \
                        / math.log(10.0)
                    fh.write("%.10g,%.10g,%.10g\n"
                             % (math.log10(x), ly, pred))

    code = 4 if (check and failed) else 0
    if record.get("status") == "partial" and code == 0:
        code = 3
    return "\n".join(lines) + "\n", code
