"""Command line interface.

Subcommands: validate, solve-pde, simulate, sweep, thm2, rates, report.
Exit codes: 0 success, 2 validation failure, 3 partial results,
4 acceptance-band failure under `report --check`.
"""

import argparse
import copy
import json
import math
import os
import sys
from dataclasses import replace

from . import harness, rates
from .config import ConfigError, load_config, validate_config, config_hash
from .grids import write_field
from .kernels import assumptions_for
from .particles import SimConfig, dump_snapshots, simulate
from .pde import PdeAbort


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        raw = copy.deepcopy(cfg.raw)
        raw.setdefault("sweep", {})["seeds"] = [args.seed]
        cfg = replace(cfg, seeds=(args.seed,), raw=raw)
    return cfg


def cmd_validate(args) -> int:
    try:
        cfg = _load(args)
    except ConfigError as ex:
        print(str(ex), file=sys.stderr)
        return 2
    problems = validate_config(cfg)
    if problems:
        print("invalid config (%d problems):" % len(problems))
        for p in problems:
            print("  - %s" % p)
        return 2
    print("config ok: %s (hash %s, %d sweep cells, ~%.3g pair ops)"
          % (cfg.title, config_hash(cfg),
             len(cfg.plan()) * cfg.replicas * len(cfg.seeds),
             cfg.estimated_ops()))
    return 0


def cmd_solve_pde(args) -> int:
    try:
        cfg = _load(args)
        problems = validate_config(cfg)
        if problems:
            raise ConfigError(problems)
    except ConfigError as ex:
        print(str(ex), file=sys.stderr)
        return 2
    try:
        sol = harness.reference_solution(cfg)
    except PdeAbort as ex:
        print("solver aborted: %s" % ex, file=sys.stderr)
        return 1
    last = sol.snapshots[-1]
    print("solved to T=%g on n=%d grid (dt=%g)"
          % (cfg.T, cfg.measure_n, cfg.pde_dt))
    print("self-convergence (L1 at T, dt vs dt/2): %.3e" %
          sol.self_convergence)
    print("sup |K conv u| over [0,T]: %.6g" % sol.drift_sup)
    print("min u over run: %.3e   mass at T: %.12f"
          % (sol.min_value, last.integral()))
    if args.out:
        write_field(args.out, last)
        print("final snapshot written to %s" % args.out)
    return 0


def cmd_simulate(args) -> int:
    try:
        cfg = _load(args)
        problems = validate_config(cfg)
        if problems:
            raise ConfigError(problems)
    except ConfigError as ex:
        print(str(ex), file=sys.stderr)
        return 2
    N = args.N if args.N is not None else cfg.sweep_N[0]
    if args.h is not None:
        h = args.h
    elif cfg.coupled:
        h = cfg.coupled_h_for(N)
    else:
        h = cfg.sweep_h[0]
    seed = cfg.seeds[0]
    sim = SimConfig(N=N, d=cfg.d, h=h, T=cfg.T, A=cfg.cutoff_A,
                    kernel=cfg.kernel,
                    mollifier=harness._mollifier_for(cfg, N),
                    initial_law=cfg.initial_law, seed=seed,
                    replica=args.replica,
                    snapshot_times=(0.0,) + cfg.snapshot_times(),
                    cells_per_radius=cfg.cells_per_radius)
    snaps = simulate(sim)
    os.makedirs(cfg.output_dir, exist_ok=True)
    out = args.out or os.path.join(
        cfg.output_dir, "trajectory_N%d_r%d.csv" % (N, args.replica))
    meta = {"config_hash": config_hash(cfg), "master_seed": seed,
            "replica": args.replica, "N": N, "h": h, "T": cfg.T,
            "d": cfg.d, "A": cfg.cutoff_A,
            "kernel": cfg.kernel.kernel_id,
            "alpha": str(cfg.alpha)}
    dump_snapshots(out, config_hash(cfg), args.replica, snaps, meta)
    print("wrote %d snapshots of N=%d particles to %s"
          % (len(snaps), N, out))
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = _load(args)
        record = harness.run_sweep(cfg, resume=args.resume,
                                   workers=args.workers,
                                   log=print if args.verbose else None)
    except ConfigError as ex:
        print(str(ex), file=sys.stderr)
        return 2
    except RuntimeError as ex:
        print(str(ex), file=sys.stderr)
        return 1
    text, _ = harness.report(record)
    print(text)
    print("record: %s" % os.path.join(cfg.output_dir, "run_record.json"))
    return 0 if record["status"] == "complete" else 3


def cmd_thm2(args) -> int:
    try:
        cfg = _load(args)
        record = harness.run_thm2(cfg, resume=args.resume,
                                  log=print if args.verbose else None)
    except ConfigError as ex:
        print(str(ex), file=sys.stderr)
        return 2
    except RuntimeError as ex:
        print(str(ex), file=sys.stderr)
        return 1
    text, _ = harness.report(record)
    print(text)
    print("record: %s" % os.path.join(cfg.output_dir, "thm2_record.json"))
    return 0 if record["status"] == "complete" else 3


_RATES_KERNELS = ("bounded_demo", "keller_segel", "riesz", "truncated_riesz")


def _exactify(x):
    """Integer-valued floats back to exact rationals for table output."""
    if isinstance(x, float) and math.isfinite(x) and x == int(x):
        from fractions import Fraction
        return Fraction(int(x))
    return x


def cmd_rates(args) -> int:
    if args.kernel is not None:
        from .config import _KERNELS
        tbl = {"chi": args.chi, "s": args.s, "alpha_sing": args.alpha_sing,
               "sign": "attractive"}
        tbl = {k: v for k, v in tbl.items() if v is not None}
        try:
            kern = _KERNELS[args.kernel](args.d, tbl)
            a = assumptions_for(kern)
        except (KeyError, ValueError, TypeError) as ex:
            print("bad kernel parameters: %s" % ex, file=sys.stderr)
            return 2
        r, zeta = _exactify(a.r), _exactify(a.zeta)
        title = "%s (d=%d)" % (args.kernel, args.d)
    else:
        r = math.inf if args.r in ("inf", "infinity") else args.r
        zeta = args.zeta
        title = "d=%d r=%s zeta=%s" % (args.d, r, zeta)
    try:
        rec = rates.summary(args.d, r, zeta, args.slack)
    except (ValueError, ZeroDivisionError) as ex:
        print("bad rate parameters: %s" % ex, file=sys.stderr)
        return 2
    ex = rec["exact"]
    print("rate exponents for %s" % title)
    print("  %-22s %-12s %s" % ("quantity", "exact", "float"))
    rows = [("chi_r", ex["chi_r"], rec["chi_r"]),
            ("alpha*", ex["alpha_star"], rec["alpha_star"]),
            ("rho = v1 (slack 0)", ex["rho"], rec["rho"]),
            ("v2", ex["v2"], rec["v2"]),
            ("v2 (conservative)", "2*v2", rec["v2_conservative"]),
            ("v3", ex["v3"], rec["v3"]),
            ("coupled h exponent", ex["coupled_exponent"],
             rec["coupled_exponent"]),
            ("cost exponent", ex["cost_exponent"], rec["cost_exponent"])]
    for name, exact, flt in rows:
        print("  %-22s %-12s %.6g" % (name, exact, flt))
    for note in rec["annotations"]:
        print("  note: %s" % note)
    line = {k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
            for k, v in rec.items()}
    print(json.dumps(line, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    try:
        record = harness.load_record(args.record)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print("report: cannot load %s: %s" % (args.record, exc))
        return 2
    text, code = harness.report(record, outdir=args.plots, check=args.check)
    print(text)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mollsim",
        description="particle and spectral solvers for aggregation-"
                    "diffusion dynamics, with convergence-rate checks")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p, seed=True):
        p.add_argument("config", help="TOML experiment config")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="override the master seed list")

    p = sub.add_parser("validate", help="check a config, report all problems")
    with_config(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("solve-pde", help="run the reference solver only")
    with_config(p)
    p.add_argument("--out", default=None, help="write final snapshot here")
    p.set_defaults(fn=cmd_solve_pde)

    p = sub.add_parser("simulate", help="run one particle trajectory cell")
    with_config(p)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--replica", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="run the full (N, h, replica) sweep")
    with_config(p)
    p.add_argument("--resume", action="store_true",
                   help="skip cells already in the results file")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("thm2", help="replica-marginal weighted-error study")
    with_config(p)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_thm2)

    p = sub.add_parser("rates", help="print the exponent table")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--kernel", choices=_RATES_KERNELS, default=None)
    p.add_argument("--r", default="inf",
                   help="norm parameter (number, ratio, or inf)")
    p.add_argument("--zeta", default="1")
    p.add_argument("--slack", default="0")
    p.add_argument("--chi", type=float, default=None)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--alpha-sing", dest="alpha_sing", type=float,
                   default=None)
    p.set_defaults(fn=cmd_rates)

    p = sub.add_parser("report", help="summarize a run record")
    p.add_argument("record", help="run_record.json or thm2_record.json")
    p.add_argument("--check", action="store_true",
                   help="exit 4 when any verdict failed")
    p.add_argument("--plots", default=None,
                   help="directory for plot-data CSV files")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
