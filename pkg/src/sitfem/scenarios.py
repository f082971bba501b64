"""Catalog of the reference experiments and the drivers that run them."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .analysis import EocFit, fit_eoc, l2_norm
from .config import OutputConfig, ScenarioConfig, render_config
from .mesh import build_mesh
from .model import ModelParams, lambda_crit
from .output import fmt, write_snapshot, write_timeseries
from .release import (
    CENTER,
    Gaussian,
    ReleaseSchedule,
    Sinusoidal,
    Uniform,
    periodic_impulses,
    scaled_release,
)
from .stepper import Discretization, SchemeConfig, SimulationRecord, State, run_simulation

log = logging.getLogger(__name__)

SNAPSHOT_TIMES = (0.0, 2.0, 4.0, 5.0, 10.0, 20.0, 25.0, 40.0, 45.0, 50.0, 150.0, 500.0)
STRATEGIES = {"a": "uniform", "b": "gaussian_center", "c": "gaussian_topright"}
IMPULSE_SIZE = 33000.0
IMPULSE_PERIOD = 20.0


def _snaps(T: float) -> tuple[float, ...]:
    return tuple(t for t in SNAPSHOT_TIMES if t <= T)


def _near_equilibrium_gaussian_ic():
    return (scaled_release("gaussian_center", 5000.0), scaled_release("gaussian_center", 6700.0), Uniform(0.0))


def homogeneous(factor: float, ic: float, p: ModelParams = ModelParams(), T: float = 500.0,
                n: int = 64, dt: float = 0.5) -> ScenarioConfig:
    lam = factor * lambda_crit(p)
    return ScenarioConfig(
        name=f"homogeneous-bistability/lambda{factor:g}-ic{ic:g}",
        n=n,
        scheme=SchemeConfig(1.0, dt, T),
        params=p,
        initial=(Uniform(ic), Uniform(ic), Uniform(0.0)),
        schedule=ReleaseSchedule(Uniform(lam)),
        output=OutputConfig(1.0, (), None, profiles=False),
    )


def gaussian_release(n: int = 64, dt: float = 0.5, T: float = 500.0, theta: float = 1.0) -> ScenarioConfig:
    return ScenarioConfig(
        name="gaussian-release",
        n=n,
        scheme=SchemeConfig(theta, dt, T),
        initial=(Uniform(100.0), Uniform(100.0), Uniform(0.0)),
        schedule=ReleaseSchedule(Gaussian(CENTER, 2000.0)),
        output=OutputConfig(1.0 if _fits(1.0, dt) else dt, _snaps(T)),
    )


def _fits(x, dt):
    return abs(x / dt - round(x / dt)) < 1e-9


def theta_comparison(theta: float, dt: float, T: float = 50.0) -> ScenarioConfig:
    return ScenarioConfig(
        name=f"theta-comparison/theta{theta:g}-dt{dt:g}",
        scheme=SchemeConfig(theta, dt, T),
        initial=(Uniform(5000.0), Uniform(6700.0), Uniform(0.0)),
        schedule=ReleaseSchedule(Gaussian(CENTER, 2000.0)),
        output=OutputConfig(dt if dt > 1 else 1.0, tuple(t for t in _snaps(T) if _fits(t, dt))),
    )


def initial_conditions(case: str, T: float = 500.0) -> ScenarioConfig:
    shapes = {
        "a": lambda A: Uniform(A),
        "b": lambda A: Sinusoidal(A, A, 10.0),
        "c": lambda A: scaled_release("gaussian_center", A),
    }
    g = shapes[case]
    return ScenarioConfig(
        name=f"initial-conditions/{case}",
        scheme=SchemeConfig(1.0, 0.5, T),
        initial=(g(5000.0), g(6700.0), Uniform(0.0)),
        schedule=ReleaseSchedule(Uniform(0.9 * lambda_crit(ModelParams()))),
        output=OutputConfig(1.0, _snaps(T)),
    )


def control_location(strategy: str, T: float = 500.0) -> ScenarioConfig:
    total = 1.1 * lambda_crit(ModelParams())
    return ScenarioConfig(
        name=f"control-location/{strategy}",
        scheme=SchemeConfig(1.0, 0.5, T),
        initial=_near_equilibrium_gaussian_ic(),
        schedule=ReleaseSchedule(scaled_release(STRATEGIES[strategy], total)),
        output=OutputConfig(1.0, _snaps(T)),
    )


def impulsive_control(strategy: str, T: float = 500.0) -> ScenarioConfig:
    pulse = scaled_release(STRATEGIES[strategy], IMPULSE_SIZE)
    return ScenarioConfig(
        name=f"impulsive-control/{strategy}",
        scheme=SchemeConfig(1.0, 0.5, T),
        initial=_near_equilibrium_gaussian_ic(),
        schedule=ReleaseSchedule(Uniform(0.0), periodic_impulses(pulse, IMPULSE_PERIOD, T)),
        output=OutputConfig(1.0, _snaps(T)),
    )


def _builders(kw: dict) -> dict[str, Callable[[], list[ScenarioConfig]]]:
    return {
        "homogeneous-bistability": lambda: [homogeneous(f, ic, **kw) for f in (0.9, 1.1) for ic in (80.0, 85.0)],
        "gaussian-release": lambda: [gaussian_release(**kw)],
        "convergence-study": lambda: [],  # a study, see convergence_study()
        "theta-comparison": lambda: [theta_comparison(th, dt, **kw) for dt in (0.5, 2.0) for th in (0.5, 1.0)],
        "initial-conditions": lambda: [initial_conditions(c, **kw) for c in "abc"],
        "control-location": lambda: [control_location(s, **kw) for s in "abc"],
        "impulsive-control": lambda: [impulsive_control(s, **kw) for s in "abc"],
    }


def catalog(T: Optional[float] = None) -> dict[str, list[ScenarioConfig]]:
    """All reference scenarios; ``T`` replaces each scenario's final time."""
    return {name: build() for name, build in _builders({} if T is None else {"T": T}).items()}


def resolve(name: str, T: Optional[float] = None) -> list[ScenarioConfig]:
    """Catalog entry by name, or a single variant as ``name/variant``."""
    builders = _builders({} if T is None else {"T": T})
    base, _, variant = name.partition("/")
    if base not in builders:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(builders)}")
    entries = builders[base]()
    if variant:
        entries = [c for c in entries if c.name == name]
        if not entries:
            raise KeyError(f"unknown variant {name!r}")
    return entries


# --- running ---------------------------------------------------------------

def simulate(cfg: ScenarioConfig, stop_when=None, observers=()) -> tuple[SimulationRecord, Discretization]:
    mesh = build_mesh(cfg.n)
    disc = Discretization(mesh, cfg.params, cfg.scheme)
    initial = State.from_fields(mesh, *cfg.initial)
    rec = run_simulation(
        initial, cfg.schedule, disc,
        sample_every=cfg.output.sample_every,
        snapshot_times=cfg.output.snapshot_times,
        observers=observers,
        stop_when=stop_when,
    )
    return rec, disc


def manifest_text(cfg: ScenarioConfig, extra: Optional[dict] = None) -> str:
    from . import __version__

    head = [f"# sitfem {__version__} run manifest", f"# lambda_crit = {fmt(lambda_crit(cfg.params)) if cfg.params.viable else 'n/a'}",
            f"# steps = {cfg.scheme.nsteps}", f"# nodes = {(cfg.n + 1) ** 2}"]
    for k, v in (extra or {}).items():
        head.append(f"# {k} = {v}")
    return "\n".join(head) + "\n" + render_config(cfg)


def run_config(cfg: ScenarioConfig, outdir: Path) -> SimulationRecord:
    """Run one scenario configuration and write its files into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "manifest.toml").write_text(manifest_text(cfg))
    log.info("running %s (%d steps on n=%d)", cfg.name, cfg.scheme.nsteps, cfg.n)
    rec, disc = simulate(cfg)
    write_timeseries(outdir / "timeseries.csv", rec.series)
    if cfg.output.profiles or cfg.output.fields:
        for label, st in rec.snapshots.items():
            write_snapshot(outdir, label, st, disc.mesh, cfg.output.profiles, cfg.output.fields)
    return rec


def variant_dir(root: Path, cfg: ScenarioConfig) -> Path:
    return Path(root).joinpath(*cfg.name.split("/"))


# --- convergence study -----------------------------------------------------

@dataclass
class ConvergenceReport:
    time_rows: list  # (dt, ||M||, ||F||, ||M_S||) at fixed n
    space_rows: list  # (h, ||M||, ||F||, ||M_S||) at fixed dt
    time_fits: tuple[EocFit, EocFit, EocFit]
    space_fits: tuple[EocFit, EocFit, EocFit]

    def to_markdown(self) -> str:
        def table(label, rows, fits):
            lines = [f"| {label} | ||M|| | ||F|| | ||M_S|| |", "|---|---|---|---|"]
            for r in rows:
                lines.append(f"| 1/{round(1 / r[0])} | " + " | ".join(f"{v:.2f}" for v in r[1:]) + " |")
            lines.append("| eoc | " + " | ".join(f"{f.q:.2f}" for f in fits) + " |")
            return "\n".join(lines)

        return (
            "# L2 norms at t=10, Gaussian release\n\n"
            "## Varying time step (h = 1/64)\n\n" + table("dt", self.time_rows, self.time_fits)
            + "\n\n## Varying mesh width (dt = 1/80)\n\n" + table("h", self.space_rows, self.space_fits) + "\n"
        )


def _norms_at_end(n: int, dt: float, t_end: float) -> tuple[float, float, float]:
    cfg = replace(gaussian_release(n=n, dt=dt, T=t_end), output=OutputConfig(t_end, ()))
    rec, disc = simulate(cfg)
    return tuple(l2_norm(u, disc.mass) for u in rec.final.species())


def convergence_study(
    dts: Sequence[float] = (1 / 10, 1 / 20, 1 / 40, 1 / 80),
    ns: Sequence[int] = (16, 32, 64, 128),
    n_time: int = 64,
    dt_space: float = 1 / 80,
    t_end: float = 10.0,
) -> ConvergenceReport:
    cache: dict[tuple[int, float], tuple] = {}
    keys = sorted({(n_time, dt) for dt in dts} | {(n, dt_space) for n in ns})
    for n, dt in keys:
        log.info("convergence run n=%d dt=%g", n, dt)
        cache[(n, dt)] = _norms_at_end(n, dt, t_end)
    time_rows = [(dt, *cache[(n_time, dt)]) for dt in sorted(dts, reverse=True)]
    space_rows = [(1.0 / n, *cache[(n, dt_space)]) for n in sorted(ns)]
    tf = tuple(fit_eoc([(r[0], r[k]) for r in time_rows]) for k in (1, 2, 3))
    sf = tuple(fit_eoc([(r[0], r[k]) for r in space_rows]) for k in (1, 2, 3))
    return ConvergenceReport(time_rows, space_rows, tf, sf)


def write_convergence_report(rep: ConvergenceReport, outdir: Path) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for fname, col, rows, fits in (
        ("convergence_time.csv", "dt", rep.time_rows, rep.time_fits),
        ("convergence_space.csv", "h", rep.space_rows, rep.space_fits),
    ):
        lines = [f"{col},l2_M,l2_F,l2_Ms"] + [",".join(fmt(v) for v in r) for r in rows]
        lines.append("eoc," + ",".join(fmt(f.q) for f in fits))
        (outdir / fname).write_text("\n".join(lines) + "\n")
    (outdir / "report.md").write_text(rep.to_markdown())
