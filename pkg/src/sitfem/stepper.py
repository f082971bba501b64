"""theta-IMEX time stepping of the P1 finite element system.

Reaction is explicit (evaluated nodewise at the previous level and tested
with the consistent mass matrix); diffusion and linear mortality are
weighted by theta. Each step therefore solves three independent SPD
systems.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .analysis import integrate, l2_norm
from .linalg import CGConfig, SolverError, cg_solve
from .mesh import Mesh, assemble_mass, assemble_stiffness
from .model import ModelParams, reaction_G
from .release import ReleaseSchedule, apply_impulse, evaluate_on_mesh

log = logging.getLogger(__name__)

SPECIES = ("M", "F", "M_S")


@dataclass(frozen=True)
class SchemeConfig:
    theta: float = 1.0
    dt: float = 0.5
    T: float = 500.0

    def __post_init__(self):
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [1/2, 1], got {self.theta}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < 0:
            raise ValueError(f"T must be nonnegative, got {self.T}")
        if abs(self.T / self.dt - round(self.T / self.dt)) > 1e-9 * max(1.0, self.T / self.dt):
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")

    @property
    def nsteps(self) -> int:
        return int(round(self.T / self.dt))

    def step_of(self, t: float, what: str = "time") -> int:
        m = round(t / self.dt)
        if abs(m * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"{what} {t} is not a multiple of dt={self.dt}")
        return int(m)


@dataclass
class State:
    M: np.ndarray
    F: np.ndarray
    M_S: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        n = len(self.M)
        if len(self.F) != n or len(self.M_S) != n:
            raise ValueError("species vectors differ in length")
        for name in SPECIES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite values in {name}")

    def copy(self) -> "State":
        return State(self.M.copy(), self.F.copy(), self.M_S.copy(), self.t)

    def species(self):
        return (self.M, self.F, self.M_S)

    @classmethod
    def from_fields(cls, mesh: Mesh, M0, F0, MS0, t: float = 0.0) -> "State":
        return cls(evaluate_on_mesh(M0, mesh), evaluate_on_mesh(F0, mesh), evaluate_on_mesh(MS0, mesh), t)


class Discretization:
    """Mesh matrices plus the per-species implicit/explicit operators for
    a fixed (theta, dt, params). Built once per run and reused every step."""

    def __init__(self, mesh: Mesh, p: ModelParams, cfg: SchemeConfig, cg: CGConfig = CGConfig(),
                 mass=None, stiffness=None):
        self.mesh = mesh
        self.p = p
        self.cfg = cfg
        self.cg = cg
        self.mass = assemble_mass(mesh) if mass is None else mass
        self.stiffness = assemble_stiffness(mesh) if stiffness is None else stiffness
        th, dt = cfg.theta, cfg.dt
        coeffs = {"M": (p.alpha_M, p.mu_M), "F": (p.alpha_F, p.mu_F), "M_S": (p.alpha_S, p.mu_S)}
        self.lhs = {}
        self.rhs_op = {}
        for s, (alpha, mu) in coeffs.items():
            L = (alpha * self.stiffness + mu * self.mass).tocsr()
            self.lhs[s] = (self.mass / dt + th * L).tocsr()
            self.rhs_op[s] = (self.mass / dt - (1.0 - th) * L).tocsr()


@dataclass
class StepInfo:
    iterations: dict


def imex_step(state: State, disc: Discretization, Lambda_nodal: np.ndarray,
              mass_lambda: Optional[np.ndarray] = None, step_index: int = 0) -> tuple[State, StepInfo]:
    """Advance ``state`` by one step of size ``disc.cfg.dt``.

    ``mass_lambda`` (Mass @ Lambda) may be supplied to avoid recomputing the
    constant release load every step.
    """
    p = disc.p
    G = reaction_G(state.M, state.F, state.M_S, p)
    if mass_lambda is None:
        mass_lambda = disc.mass @ Lambda_nodal
    MG = disc.mass @ G
    loads = {"M": p.r * p.rho * MG, "F": (1.0 - p.r) * p.rho * MG, "M_S": mass_lambda}
    new = {}
    iters = {}
    for s, u in zip(SPECIES, state.species()):
        b = disc.rhs_op[s] @ u + loads[s]
        try:
            res = cg_solve(disc.lhs[s], b, u, disc.cg)
        except SolverError as exc:
            raise SolverError(
                f"species {s}, step {step_index} (t={state.t + disc.cfg.dt:g}): {exc}",
                exc.residual, exc.iterations,
            ) from exc
        new[s] = res.x
        iters[s] = res.iterations
    out = State(new["M"], new["F"], new["M_S"], state.t + disc.cfg.dt)
    return out, StepInfo(iters)


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    l2: tuple[float, float, float]
    integral: tuple[float, float, float]
    minimum: tuple[float, float, float]
    maximum: tuple[float, float, float]
    cg_iterations: int


def record_state(state: State, mass, cg_iterations: int = 0) -> TimeSeriesRecord:
    us = state.species()
    return TimeSeriesRecord(
        t=state.t,
        l2=tuple(l2_norm(u, mass) for u in us),
        integral=tuple(integrate(u, mass) for u in us),
        minimum=tuple(float(u.min()) for u in us),
        maximum=tuple(float(u.max()) for u in us),
        cg_iterations=int(cg_iterations),
    )


@dataclass
class SimulationRecord:
    series: list = field(default_factory=list)
    # keyed by label: "t" formatted, with "-" suffix for pre-impulse states
    snapshots: dict = field(default_factory=dict)
    final: Optional[State] = None
    min_ratio: float = 0.0  # worst min/max over species and steps (negativity diagnostic)

    def series_array(self, what: str = "integral") -> tuple[np.ndarray, np.ndarray]:
        t = np.array([r.t for r in self.series])
        return t, np.array([getattr(r, what) for r in self.series])


def time_label(t: float, pre: bool = False) -> str:
    s = f"{t:.10g}"
    return s + "-" if pre else s


Observer = Callable[[State, str], None]


def run_simulation(
    initial: State,
    schedule: ReleaseSchedule,
    disc: Discretization,
    sample_every: Optional[float] = 1.0,
    snapshot_times: Iterable[float] = (),
    observers: Sequence[Observer] = (),
    stop_when: Optional[Callable[[State], bool]] = None,
) -> SimulationRecord:
    """Run steps 1..N with the continuous release and timed impulses.

    An impulse whose time coincides with t_m is added to M_S after the step
    ending at t_m; the t^- state is kept as snapshot "<t>-" when requested.
    An impulse at t=0 is folded into the initial state. Observers are called
    with (state, label) for every sample and snapshot.
    """
    cfg = disc.cfg
    mesh = disc.mesh
    mass = disc.mass
    kicks = {m: evaluate_on_mesh(f, mesh) for m, f in schedule.step_indices(cfg.dt).items()}
    if any(m > cfg.nsteps for m in kicks):
        raise ValueError("impulse scheduled after the final time")
    sample_stride = None if sample_every is None else cfg.step_of(sample_every, "sampling interval")
    if sample_stride == 0:
        raise ValueError("sampling interval must be positive")
    snap_steps = {cfg.step_of(t, "snapshot time") for t in snapshot_times}

    Lambda = evaluate_on_mesh(schedule.continuous, mesh)
    mass_lambda = mass @ Lambda
    state = initial.copy()
    state.t = 0.0
    if 0 in kicks:
        state.M_S = apply_impulse(state.M_S, kicks[0])

    rec = SimulationRecord()

    def emit(s: State, m: int, iters: int, pre: bool = False):
        label = time_label(s.t, pre)
        if not pre and sample_stride is not None and m % sample_stride == 0:
            rec.series.append(record_state(s, mass, iters))
            for ob in observers:
                ob(s, label)
        if m in snap_steps:
            rec.snapshots[label] = s.copy()
            if pre or sample_stride is None or m % sample_stride:
                for ob in observers:
                    ob(s, label)

    def track_negativity(s: State):
        for u in s.species():
            top = float(np.max(np.abs(u)))
            if top > 0:
                rec.min_ratio = min(rec.min_ratio, float(u.min()) / top)

    emit(state, 0, 0)
    for m in range(1, cfg.nsteps + 1):
        state, info = imex_step(state, disc, Lambda, mass_lambda, m)
        state.t = m * cfg.dt  # avoid accumulating round-off in t
        iters = max(info.iterations.values())
        if m in kicks:
            if m in snap_steps:
                emit(state, m, iters, pre=True)
            state.M_S = apply_impulse(state.M_S, kicks[m])
        track_negativity(state)
        emit(state, m, iters)
        if stop_when is not None and stop_when(state):
            break
    rec.final = state
    return rec
