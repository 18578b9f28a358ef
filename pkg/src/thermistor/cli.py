"""Command-line entry point: ``thermistor {run, check, iv-curve, converge}``.

Exit status: 0 success, 1 failed checks or runs, 2 usage or configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import checks, io
from .config import ConfigError, load_config, serialize_config
from .constitutive import ConstitutiveSpec, Profile, iv_characteristic
from .converge import refinement_study
from .coupling import eps_continuation
from .errors import ConfigurationError, SingularEvaluationError, ThermistorError
from .estimates import CheckResult, verify_ledger

log = logging.getLogger("thermistor")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
OUT_ENV = "THERMISTOR_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def build_parser():
    parser = _Parser(prog="thermistor", description="Finite-element thermistor simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="eps-continuation run with estimate verification")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, else output.directory)")

    chk = sub.add_parser("check", help="seeded property suites")
    chk.add_argument("--suite", required=True, choices=sorted(checks.SUITES))
    chk.add_argument("--samples", type=int)
    chk.add_argument("--seed", type=int, default=0)

    iv = sub.add_parser("iv-curve", help="current-voltage characteristic as CSV (V, I)")
    iv.add_argument("--p", type=float, required=True)
    iv.add_argument("--delta", type=float, required=True)
    iv.add_argument("--sigma0", type=float, required=True)
    iv.add_argument("--vmax", type=float, required=True)
    iv.add_argument("--steps", type=int, required=True)
    iv.add_argument("--u", type=float, default=0.0, help="temperature (only matters for non-constant sigma0)")
    iv.add_argument("-o", "--output", help="write CSV here instead of stdout")

    conv = sub.add_parser("converge", help="refinement study on the built-in manufactured cases")
    conv.add_argument("--config", required=True)
    conv.add_argument("--levels", type=int, required=True)
    conv.add_argument("-o", "--output", help="write CSV here instead of stdout")
    return parser


def _emit(header, rows, path):
    if path:
        io.write_table(path, header, rows)
    else:
        sys.stdout.write(",".join(header) + "\n")
        for row in rows:
            sys.stdout.write(",".join(io.format_value(v) for v in row) + "\n")


# ------------------------------------------------------------------ run

def _decay_check(cfg, mesh, ledger):
    """Closed-form check when the source vanishes and u0 is constant:
    u(T) = h + (u0 - h) exp(-g |dOmega| T / |Omega|), backward-Euler error at
    most k^2 T dt / 2 |u0 - h| with k = g |dOmega| / |Omega|."""
    u0 = cfg.initial.nodal(mesh)
    if cfg.spec.eta1 != 0 or np.ptp(u0) != 0:
        return []
    lx, ly = cfg.mesh.lx, cfg.mesh.ly
    spec, T, dt = cfg.spec, cfg.coupling.T_final, cfg.coupling.dt
    k = spec.g * 2 * (lx + ly) / (lx * ly)
    c0 = float(u0[0]) - spec.h
    exact = spec.h + c0 * math.exp(-k * T)
    bound = k * k * T * dt / 2 * abs(c0)
    out = []
    for traj in ledger.trajectories:
        if traj is None:
            continue
        err = float(np.max(np.abs(traj.u[-1] - exact)))
        out.append(CheckResult(f"decay[eps={traj.eps:g}]", err <= bound,
                               f"terminal max error {err:.6e} vs exp(-{k:g} T) bound {bound:.6e}"))
    return out


def cmd_run(args):
    cfg = load_config(args.config)
    out = args.out or os.environ.get(OUT_ENV) or cfg.output.directory
    os.makedirs(out, exist_ok=True)
    mesh = cfg.mesh.build()
    phi_D = cfg.boundary.data()
    ledger = eps_continuation(mesh, cfg.coupling, cfg.spec, phi_D, cfg.initial.nodal(mesh))

    with open(os.path.join(out, "config.resolved.cfg"), "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg))
    io.write_mesh_text(mesh, os.path.join(out, "mesh.txt"))
    for i, traj in enumerate(ledger.trajectories):
        if traj is None:
            continue
        tag = f"eps{i:02d}"
        if "csv" in cfg.output.formats:
            io.write_trajectory_csv(traj, cfg.spec, os.path.join(out, f"trajectory_{tag}.csv"))
        if "vtk" in cfg.output.formats:
            vdir = os.path.join(out, f"vtk_{tag}")
            os.makedirs(vdir, exist_ok=True)
            io.write_vtk_series(traj, vdir, stride=cfg.output.stride)
    io.write_ledger_csv(ledger, os.path.join(out, "ledger.csv"))

    report = verify_ledger(ledger)
    results = list(report.checks) + _decay_check(cfg, mesh, ledger)
    passed = all(c.passed for c in results)
    lines = [f"config: {os.path.abspath(args.config)}",
             f"mesh: {cfg.mesh.nx} x {cfg.mesh.ny} on [0, {cfg.mesh.lx:g}] x [0, {cfg.mesh.ly:g}]",
             f"steps: {cfg.coupling.steps}, T = {cfg.coupling.T_final:g}",
             "eps schedule: " + ", ".join(f"{e:g}" for e in cfg.coupling.eps_schedule)]
    for i, row in enumerate(ledger.rows):
        if row.failed:
            lines.append(f"eps[{i}] = {row.eps:g} FAILED: {row.message}")
    lines += [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in results]
    lines.append("RESULT: " + ("PASS" if passed else "FAIL"))
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if passed else EXIT_FAIL


# ------------------------------------------------------------ other commands

def cmd_check(args):
    if args.samples is not None and args.samples < 1:
        raise _UsageError("--samples must be >= 1")
    results, elapsed = checks.run_suite(args.suite, samples=args.samples, seed=args.seed)
    for c in results:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    ok = all(c.passed for c in results)
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f} s)")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_iv_curve(args):
    if args.steps < 1 or not args.vmax >= 0:
        raise _UsageError("--steps must be >= 1 and --vmax >= 0")
    spec = ConstitutiveSpec(p=args.p, delta=args.delta, sigma0=Profile("constant", (args.sigma0,)))
    V = np.linspace(0.0, args.vmax, args.steps + 1)
    current = iv_characteristic(args.u, V, spec)
    _emit(("V", "I"), zip(V, current), args.output)
    return EXIT_OK


def cmd_converge(args):
    if args.levels < 2:
        raise _UsageError("--levels must be >= 2 to report a rate")
    cfg = load_config(args.config)
    rows = refinement_study(cfg, args.levels)
    _emit(("case", "level", "h", "dt", "error", "rate"),
          [(r.case, r.level, r.h, r.dt, r.error, r.rate) for r in rows], args.output)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "iv-curve": cmd_iv_curve, "converge": cmd_converge}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"thermistor {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"{args.config}: invalid configuration", file=sys.stderr)
        for p in exc.problems:
            print(f"  {p}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"thermistor {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE if args.command in ("run", "converge") and not os.path.exists(args.config) else EXIT_FAIL
    except (ConfigurationError, SingularEvaluationError) as exc:
        print(f"thermistor {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ThermistorError as exc:
        print(f"thermistor {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
