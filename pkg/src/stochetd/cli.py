"""Command-line entry point: convergence, efficiency, simulate, phi-check."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, models
from .errors import InvalidConfig, StochEtdError
from .noise import generate_paths
from .phi_functions import COEFFICIENT_TABLE, ContourConfig, etd_coefficient_set
from .schemes import integrate_path

log = logging.getLogger("stochetd")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP = 0, 2, 3


def _all_blown(records):
    return all(r.n_success == 0 for r in records)


def cmd_convergence(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    records = harness.run_strong_convergence(cfg)
    fits = harness.fit_all(records, cfg.fit_window)
    csv_path, _ = harness.emit_report(records, fits, Path(args.out) / "convergence", cfg)
    for f in fits:
        log.info("%s slope %.3f over %d levels", f.scheme, f.slope, len(f.levels_used))
    print(csv_path)
    return EXIT_BLOWUP if _all_blown(records) else EXIT_OK


def cmd_efficiency(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    records = harness.run_efficiency(cfg, repeats=args.repeats)
    fits = harness.fit_all(records, cfg.fit_window)
    csv_path, _ = harness.emit_report(records, fits, Path(args.out) / "efficiency", cfg,
                                      extra={"repeats": args.repeats})
    print(csv_path)
    return EXIT_BLOWUP if _all_blown(records) else EXIT_OK


def cmd_simulate(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    grid = cfg.model.grid()
    problem = models.build_problem(grid, cfg.model.coeffs(), cfg.model.basis_spec())
    u0 = cfg.model.initial_state(grid)
    dt = cfg.dts[0]
    n_steps = int(round(cfg.t_max / dt))
    if args.snapshots < 1 or n_steps % args.snapshots:
        raise InvalidConfig(f"--snapshots must divide the {n_steps} steps")
    paths = generate_paths(cfg.seed, 0, problem.channels, n_steps, dt)
    traj = integrate_path(problem, cfg.schemes[0], u0, 0.0, paths,
                          options=cfg.scheme_options(), snapshot_every=n_steps // args.snapshots)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    models.write_snapshots_csv(out / "snapshots.csv", grid, traj.times, traj.snapshots)
    models.write_snapshots_binary(out / "snapshots.bin", grid, traj.times, traj.snapshots)
    meta = {"scheme": cfg.schemes[0], "dt": dt, "seed": cfg.seed,
            "blowup_step": traj.blowup_step, "W_final": paths.endpoint().tolist()}
    (out / "simulate.json").write_text(json.dumps(meta, indent=2))
    print(out / "snapshots.csv")
    return EXIT_OK if traj.ok else EXIT_BLOWUP


def cmd_phi_check(args):
    cfg = harness.ModelConfig(equation=args.model, n_x=args.nx, length=args.length)
    grid = cfg.grid()
    lam = models.linear_symbol(cfg.coeffs(), grid)
    contour = ContourConfig(n_points=args.points, radius=args.radius)
    cs = etd_coefficient_set(args.scheme, lam, args.dt, contour)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "eigenvalue_re", "eigenvalue_im", "coeff_name", "value_re", "value_im"])
        names = list(COEFFICIENT_TABLE[cs.scheme_id]) + list(cs.propagators)
        for i, k in enumerate(grid.k):
            for name in names:
                v = complex(np.asarray(cs[name])[i])
                w.writerow(["%.17g" % k, "%.17g" % lam[i].real, "%.17g" % lam[i].imag, name,
                            "%.17g" % v.real, "%.17g" % v.imag])
    print(args.out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="stochetd", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("convergence", help="strong convergence sweep")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convergence)

    e = sub.add_parser("efficiency", help="timed convergence sweep")
    e.add_argument("--config", required=True)
    e.add_argument("--repeats", type=int, default=5)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_efficiency)

    s = sub.add_parser("simulate", help="one trajectory with snapshots")
    s.add_argument("--config", required=True)
    s.add_argument("--snapshots", type=int, default=10)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("phi-check", help="dump exponential coefficient tables")
    f.add_argument("--scheme", default="setdrk4")
    f.add_argument("--model", default="kdv")
    f.add_argument("--nx", type=int, default=256)
    f.add_argument("--length", type=float, default=1.0)
    f.add_argument("--dt", type=float, default=1e-4)
    f.add_argument("--points", type=int, default=64)
    f.add_argument("--radius", type=float, default=1.0)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_phi_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StochEtdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
