"""Command line interface: ``sitfem run|threshold|converge|ode|list``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .linalg import SolverError
from .model import (
    BracketError,
    IntegrationError,
    ModelParams,
    NotViableError,
    lambda_crit,
    ode_solve_rk4,
    positive_equilibrium,
)
from .output import fmt
from .scenarios import (
    catalog,
    convergence_study,
    resolve,
    run_config,
    variant_dir,
    write_convergence_report,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
OUT_ENV = "SITFEM_OUTPUT_DIR"

log = logging.getLogger("sitfem")


def _outdir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "sitfem-out")


def _param_overrides(items) -> ModelParams:
    p = ModelParams()
    changes = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"params.{key}", "override must look like key=value")
        try:
            changes[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"params.{key}", f"not a number: {val!r}") from None
    try:
        return p.replace(**changes)
    except (KeyError, ValueError) as exc:
        raise ConfigError("params", str(exc)) from None


def _load_configs(target: str, T=None):
    path = Path(target)
    if path.suffix == ".toml" or path.is_file():
        if not path.is_file():
            raise ConfigError("", f"no such config file: {target}")
        cfg = parse_config(path.read_text())
        return [cfg], False
    try:
        return resolve(target, T), True
    except KeyError as exc:
        raise ConfigError("", exc.args[0]) from None
    except ValueError as exc:
        raise ConfigError("scheme", str(exc)) from None


def cmd_run(args) -> int:
    if args.target.split("/")[0] == "convergence-study":
        return cmd_converge(args)
    configs, from_catalog = _load_configs(args.target, args.T)
    root = _outdir(args)
    for cfg in configs:
        try:
            cfg = cfg.with_overrides(dt=args.dt, theta=args.theta, T=args.T, n=args.n, sample_every=args.sample_every)
        except ValueError as exc:
            raise ConfigError("scheme", str(exc)) from None
        outdir = variant_dir(root, cfg) if (from_catalog or not cfg.output.directory) else Path(cfg.output.directory)
        if args.out and not from_catalog:
            outdir = root
        try:
            rec = run_config(cfg, outdir)
        except (SolverError, FloatingPointError) as exc:
            outdir.mkdir(parents=True, exist_ok=True)
            (outdir / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n" + traceback.format_exc())
            print(f"solver failure in {cfg.name}: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        last = rec.series[-1]
        print(
            f"{cfg.name}: t={fmt(last.t)} int_M={fmt(last.integral[0])} "
            f"int_F={fmt(last.integral[1])} int_Ms={fmt(last.integral[2])} -> {outdir}"
        )
    return EXIT_OK


def cmd_threshold(args) -> int:
    p = _param_overrides(args.set)
    try:
        lc = lambda_crit(p)
        eq0 = positive_equilibrium(p, 0.0)
    except NotViableError as exc:
        print(f"not viable: {exc}")
        return EXIT_CONFIG
    except BracketError as exc:
        raise ConfigError("params", str(exc)) from None
    print(f"Lambda_crit = {lc:.6f}")
    print(f"M* = {eq0.M:.4f}")
    print(f"F* = {eq0.F:.4f}")
    lams = args.lambdas if args.lambdas else [f * lc for f in (0.0, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1)]
    print("Lambda,M_stable,F_stable,M_saddle,F_saddle,M_S")
    for lam in lams:
        hi = positive_equilibrium(p, lam, "stable")
        lo = positive_equilibrium(p, lam, "saddle") if lam > 0 else None
        if hi is None:
            row = [lam, 0.0, 0.0, "", "", lam / p.mu_S]
        else:
            row = [lam, hi.M, hi.F, lo.M if lo else "", lo.F if lo else "", hi.M_S]
        print(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return EXIT_OK


def cmd_converge(args) -> int:
    rep = convergence_study()
    outdir = _outdir(args) / "convergence-study"
    write_convergence_report(rep, outdir)
    print(rep.to_markdown())
    return EXIT_OK


def cmd_ode(args) -> int:
    p = _param_overrides(args.set)
    lam = args.Lambda if args.Lambda is not None else args.lambda_factor * lambda_crit(p)
    impulses = []
    if args.pulse:
        k = 0
        while k * args.period <= args.T + 1e-9:
            impulses.append((k * args.period, args.pulse))
            k += 1
    try:
        traj = ode_solve_rk4((args.M0, args.F0, args.MS0), lam, p, args.dt, args.T, impulses)
    except IntegrationError as exc:
        print(f"integration failure at t={exc.t}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        raise ConfigError("ode", str(exc)) from None
    stride = max(1, int(round(args.sample_every / args.dt)))
    lines = ["t,M,F,Ms"] + [
        ",".join(fmt(v) for v in (t, *y)) for t, y in zip(traj.t[::stride], traj.y[::stride])
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "ode.csv").write_text(text)
        print(f"wrote {d / 'ode.csv'}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_list(args) -> int:
    for name, variants in catalog().items():
        print(name)
        for cfg in variants:
            if cfg.name != name:
                print(f"  {cfg.name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sitfem", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a config file or catalog scenario")
    r.add_argument("target", help="path to a .toml config or a catalog name (optionally name/variant)")
    r.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./sitfem-out)")
    r.add_argument("--dt", type=float)
    r.add_argument("--n", type=int)
    r.add_argument("--theta", type=float)
    r.add_argument("--T", type=float)
    r.add_argument("--sample-every", type=float)
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("threshold", help="critical release and equilibria")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a model parameter")
    t.add_argument("--lambdas", type=float, nargs="+", help="release rates for the equilibrium table")
    t.set_defaults(func=cmd_threshold)

    c = sub.add_parser("converge", help="temporal and spatial convergence study")
    c.add_argument("--out")
    c.set_defaults(func=cmd_converge)

    o = sub.add_parser("ode", help="homogeneous RK4 reference")
    o.add_argument("--M0", type=float, default=80.0)
    o.add_argument("--F0", type=float, default=80.0)
    o.add_argument("--MS0", type=float, default=0.0)
    g = o.add_mutually_exclusive_group()
    g.add_argument("--Lambda", type=float)
    g.add_argument("--lambda-factor", type=float, default=0.0)
    o.add_argument("--pulse", type=float, default=0.0, help="impulse size added to M_S every --period days")
    o.add_argument("--period", type=float, default=20.0)
    o.add_argument("--dt", type=float, default=0.01)
    o.add_argument("--T", type=float, default=500.0)
    o.add_argument("--sample-every", type=float, default=1.0)
    o.add_argument("--set", action="append", metavar="KEY=VALUE")
    o.add_argument("--out")
    o.set_defaults(func=cmd_ode)

    ls = sub.add_parser("list", help="list catalog scenarios")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
