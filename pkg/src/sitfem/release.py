"""Spatial release / initial-condition fields and impulsive release schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

# integral of exp(-100|x - (3/4, 3/4)|^2) over the unit square (reference constant)
TOPRIGHT_GAUSSIAN_INTEGRAL = 0.0314031
CENTER = (0.5, 0.5)
TOP_RIGHT = (0.75, 0.75)


class FieldValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Uniform:
    value: float

    def __call__(self, x, y):
        return np.full(np.broadcast(x, y).shape, float(self.value))


@dataclass(frozen=True)
class Gaussian:
    """amplitude * exp(-100 |(x,y) - center|^2)"""

    center: tuple[float, float] = CENTER
    amplitude: float = 1.0

    def __call__(self, x, y):
        cx, cy = self.center
        return self.amplitude * np.exp(-100.0 * ((x - cx) ** 2 + (y - cy) ** 2))


@dataclass(frozen=True)
class Sinusoidal:
    """base + amplitude * sin(k pi x) sin(k pi y)"""

    base: float = 1.0
    amplitude: float = 1.0
    k: float = 10.0

    def __call__(self, x, y):
        return self.base + self.amplitude * np.sin(self.k * np.pi * x) * np.sin(self.k * np.pi * y)


@dataclass(frozen=True)
class Sum:
    terms: tuple = ()

    def __call__(self, x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for t in self.terms:
            out = out + t(x, y)
        return out


SpatialField = Union[Uniform, Gaussian, Sinusoidal, Sum]


def evaluate_on_mesh(fld: SpatialField, mesh, allow_negative: bool = False) -> np.ndarray:
    """Nodal (P1 interpolation) values of ``fld``."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    v = np.asarray(fld(x, y), dtype=float)
    if not allow_negative:
        bad = np.flatnonzero(v < 0)
        if bad.size:
            k = int(bad[0])
            raise FieldValidationError(
                f"field is negative ({v[k]:.6g}) at node {k} = ({x[k]:g}, {y[k]:g})"
            )
    return v


def scaled_release(kind: str, total: float) -> SpatialField:
    """Release shape of the given kind with domain integral ``total``."""
    if total < 0:
        raise ValueError("release total must be nonnegative")
    if kind == "uniform":
        return Uniform(total)
    if kind == "gaussian_center":
        return Gaussian(CENTER, 100.0 / math.pi * total)
    if kind == "gaussian_topright":
        return Gaussian(TOP_RIGHT, total / TOPRIGHT_GAUSSIAN_INTEGRAL)
    raise ValueError(f"unknown release kind {kind!r}")


def apply_impulse(M_S: np.ndarray, impulse: np.ndarray) -> np.ndarray:
    M_S = np.asarray(M_S, dtype=float)
    impulse = np.asarray(impulse, dtype=float)
    if M_S.shape != impulse.shape:
        raise ValueError(f"impulse has shape {impulse.shape}, state has {M_S.shape}")
    if np.any(impulse < 0):
        raise FieldValidationError("impulse must be nonnegative")
    return M_S + impulse


@dataclass(frozen=True)
class Impulse:
    t: float
    field: SpatialField


@dataclass(frozen=True)
class ReleaseSchedule:
    continuous: SpatialField = Uniform(0.0)
    impulses: tuple[Impulse, ...] = field(default_factory=tuple)

    def __post_init__(self):
        times = [imp.t for imp in self.impulses]
        if any(t < 0 for t in times):
            raise ValueError("impulse times must be nonnegative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("impulse times must be strictly increasing")

    def step_indices(self, dt: float) -> dict[int, SpatialField]:
        """Map step index m (t_m = m*dt) to impulse field; rejects misaligned times."""
        out = {}
        for imp in self.impulses:
            m = round(imp.t / dt)
            if abs(m * dt - imp.t) > 1e-9 * max(1.0, imp.t):
                raise ValueError(f"impulse time {imp.t} is not a multiple of dt={dt}")
            out[int(m)] = imp.field
        return out


def periodic_impulses(fld: SpatialField, period: float, T: float, start: float = 0.0) -> tuple[Impulse, ...]:
    n = int(math.floor((T - start) / period + 1e-9))
    return tuple(Impulse(start + k * period, fld) for k in range(n + 1))
