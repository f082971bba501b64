"""Sex-structured SIT model with Ricker recruitment: reaction terms,
homogeneous ODE reference and equilibrium / threshold computations."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

EPS_DEN = 1e-12


class NotViableError(ValueError):
    """Wild population cannot persist even without releases."""


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class ModelParams:
    rho: float = 4.55
    r: float = 0.5
    sigma: float = 1.0 / 2800.0
    mu_M: float = 0.04
    mu_F: float = 0.03
    mu_S: float = 0.04
    gamma: float = 1.0
    alpha_M: float = 0.01
    alpha_F: float = 0.01
    alpha_S: float = 0.01

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ValueError(f"parameter {f.name} must be a finite number, got {v!r}")
            if f.name == "r":
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"r must lie in [0, 1], got {v}")
            elif v <= 0:
                raise ValueError(f"parameter {f.name} must be positive, got {v}")
        if self.gamma > 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")

    def replace(self, **changes) -> "ModelParams":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        unknown = set(changes) - set(d)
        if unknown:
            raise KeyError(f"unknown parameter(s): {sorted(unknown)}")
        d.update(changes)
        return ModelParams(**d)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def sex_ratio_factor(self) -> float:
        """kappa = F*/M* at any positive equilibrium."""
        return self.mu_M * (1.0 - self.r) / (self.mu_F * self.r)

    @property
    def viable(self) -> bool:
        return (1.0 - self.r) * self.rho > self.mu_F


class OdeState(NamedTuple):
    M: float
    F: float
    M_S: float


def reaction_G(M, F, M_S, p: ModelParams):
    """Mating-limited Ricker recruitment F M/(M + gamma M_S) exp(-sigma(M+F)).

    Works on scalars and nodal arrays alike. Where the denominator falls below
    ``EPS_DEN`` the value is 0.
    """
    M = np.asarray(M, dtype=float)
    F = np.asarray(F, dtype=float)
    M_S = np.asarray(M_S, dtype=float)
    den = M + p.gamma * M_S
    ok = den >= EPS_DEN
    safe = np.where(ok, den, 1.0)
    G = np.where(ok, F * M / safe * np.exp(-p.sigma * (M + F)), 0.0)
    return G[()] if G.ndim == 0 else G


def _check_nonnegative(*vals):
    for v in vals:
        if np.any(np.asarray(v) < 0):
            raise ValueError("state components must be nonnegative")


def reaction_g_checked(M, F, M_S, p: ModelParams):
    _check_nonnegative(M, F, M_S)
    return reaction_G(M, F, M_S, p)


def reaction_f(state: Sequence[float], Lambda: float, p: ModelParams) -> tuple[float, float, float]:
    """Right-hand side (dM, dF, dM_S) of the homogeneous system."""
    M, F, M_S = state
    _check_nonnegative(M, F, M_S, Lambda)
    G = reaction_G(M, F, M_S, p)
    return (
        p.r * p.rho * G - p.mu_M * M,
        (1.0 - p.r) * p.rho * G - p.mu_F * F,
        Lambda - p.mu_S * M_S,
    )


def lipschitz_L(M, F, M_S, p: ModelParams):
    """Local Lipschitz modulus L(X) of G, to be divided by M + gamma M_S."""
    return p.sigma * F * M + F + p.gamma**2 * (F + M_S) + 1.0


# --- homogeneous ODE reference -------------------------------------------

def _rhs(y: np.ndarray, lam: float, p: ModelParams) -> np.ndarray:
    M, F, M_S = y
    den = M + p.gamma * M_S
    G = F * M / den * math.exp(-p.sigma * (M + F)) if den >= EPS_DEN else 0.0
    return np.array(
        [p.r * p.rho * G - p.mu_M * M, (1.0 - p.r) * p.rho * G - p.mu_F * F, lam - p.mu_S * M_S]
    )


@dataclass
class OdeTrajectory:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), 3): columns M, F, M_S

    @property
    def M(self):
        return self.y[:, 0]

    @property
    def F(self):
        return self.y[:, 1]

    @property
    def M_S(self):
        return self.y[:, 2]

    def at(self, t: float) -> OdeState:
        k = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not on the trajectory grid")
        return OdeState(*self.y[k])


def ode_solve_rk4(
    initial: Sequence[float],
    Lambda: Union[float, Callable[[float], float]],
    p: ModelParams,
    dt: float,
    T: float,
    impulses: Iterable[tuple[float, float]] = (),
) -> OdeTrajectory:
    """Classical RK4 for the homogeneous model.

    ``Lambda`` is a constant rate or a function of time. ``impulses`` are
    ``(t_k, amount)`` pairs added to M_S right after the step ending at t_k;
    an impulse at t=0 is added to the initial state. Impulse times must lie
    on the step grid.
    """
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    y = np.array(initial, dtype=float)
    if y.shape != (3,) or np.any(y < 0):
        raise ValueError("initial state must be three nonnegative numbers")
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    lam = Lambda if callable(Lambda) else (lambda t, c=float(Lambda): c)

    kicks: dict[int, float] = {}
    for tk, amount in impulses:
        m = int(round(tk / dt))
        if abs(m * dt - tk) > 1e-9 * max(1.0, tk):
            raise ValueError(f"impulse time {tk} is not a multiple of dt={dt}")
        kicks[m] = kicks.get(m, 0.0) + float(amount)
    y[2] += kicks.pop(0, 0.0)

    out = np.empty((nsteps + 1, 3))
    out[0] = y
    for m in range(1, nsteps + 1):
        t0 = (m - 1) * dt
        k1 = _rhs(y, lam(t0), p)
        k2 = _rhs(y + 0.5 * dt * k1, lam(t0 + 0.5 * dt), p)
        k3 = _rhs(y + 0.5 * dt * k2, lam(t0 + 0.5 * dt), p)
        k4 = _rhs(y + dt * k3, lam(t0 + dt), p)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = m * dt
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={t}", t)
        if np.any(y < -1e-9):
            raise IntegrationError(f"negative state {y} at t={t}", t)
        y = np.maximum(y, 0.0)
        if m in kicks:
            y[2] += kicks[m]
        out[m] = y
    return OdeTrajectory(np.arange(nsteps + 1) * dt, out)


# --- equilibria and release threshold ------------------------------------

def _mating_profile(M, c: float, a: float):
    """phi(M) = M/(M+c) * exp(-a M); equilibrium needs phi = mu_F/((1-r) rho)."""
    return M / (M + c) * np.exp(-a * M)


def _profile_argmax(c: float, a: float) -> float:
    """Positive root of M^2 + c M - c/a = 0, the maximizer of phi."""
    return 0.5 * (-c + math.sqrt(c * c + 4.0 * c / a))


def _require_viable(p: ModelParams):
    if not p.viable:
        raise NotViableError(
            f"population not viable: (1-r)*rho = {(1 - p.r) * p.rho:g} <= mu_F = {p.mu_F:g}"
        )


class Equilibrium(NamedTuple):
    M: float
    F: float
    M_S: float


def positive_equilibrium(
    p: ModelParams, Lambda: float = 0.0, branch: str = "stable"
) -> Optional[Equilibrium]:
    """Positive equilibrium under a constant release ``Lambda``.

    Returns ``None`` when no positive equilibrium exists. For ``Lambda > 0``
    two roots may exist; ``branch="stable"`` gives the larger one and
    ``branch="saddle"`` the smaller.
    """
    _require_viable(p)
    if Lambda < 0:
        raise ValueError("Lambda must be nonnegative")
    if branch not in ("stable", "saddle"):
        raise ValueError(f"unknown branch {branch!r}")
    kappa = p.sex_ratio_factor
    a = p.sigma * (1.0 + kappa)
    target = p.mu_F / ((1.0 - p.r) * p.rho)
    M_S = Lambda / p.mu_S
    if Lambda == 0:
        M = math.log(1.0 / target) / a
        return Equilibrium(M, kappa * M, 0.0)
    c = p.gamma * M_S
    Mhat = _profile_argmax(c, a)
    g = lambda M: _mating_profile(M, c, a) - target
    peak = g(Mhat)
    if peak < 0:
        return None
    if peak == 0:
        return Equilibrium(Mhat, kappa * Mhat, M_S)
    if branch == "stable":
        M = brentq(g, Mhat, math.log(1.0 / target) / a, xtol=1e-12, rtol=1e-14)
    else:
        M = brentq(g, 0.0, Mhat, xtol=1e-12, rtol=1e-14)
    return Equilibrium(M, kappa * M, M_S)


def max_mating_profile(p: ModelParams, Lambda: float) -> tuple[float, float]:
    """(argmax, max) over M > 0 of (1-r) rho phi(M) at release ``Lambda``."""
    a = p.sigma * (1.0 + p.sex_ratio_factor)
    c = p.gamma * Lambda / p.mu_S
    Mhat = _profile_argmax(c, a)
    return Mhat, (1.0 - p.r) * p.rho * float(_mating_profile(Mhat, c, a))


class BracketError(ValueError):
    pass


def lambda_crit(p: ModelParams, lo: float = 1.0, hi: float = 1e6, rtol: float = 1e-6) -> float:
    """Critical constant release: the saddle-node where the positive
    equilibria merge. Bisection on the monotone map Lambda -> max profile."""
    _require_viable(p)
    excess = lambda lam: max_mating_profile(p, lam)[1] - p.mu_F
    if not (excess(lo) > 0 > excess(hi)):
        raise BracketError(f"threshold not bracketed by [{lo:g}, {hi:g}]")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
