"""Post-processing: norms, integrals, diagonal profiles, order-of-convergence fits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar


def _quad(u, A) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape[0] != A.shape[0]:
        raise ValueError(f"vector of length {u.shape[0]} vs matrix {A.shape}")
    return float(u @ (A @ u))


def l2_norm(u, mass) -> float:
    q = _quad(u, mass)
    if q < -1e-12 * max(1.0, float(np.dot(u, u))):
        raise ValueError(f"negative quadratic form u'Mu = {q:g}; mass matrix corrupted?")
    return float(np.sqrt(max(q, 0.0)))


def integrate(u, mass) -> float:
    """Domain integral of the P1 field with nodal values ``u``."""
    return float(np.sum(mass @ np.asarray(u, dtype=float)))


def energy_norm(state, mass, stiffness, p) -> float:
    """sqrt(sum over species of mu ||u||^2 + alpha |u|_1^2)."""
    total = 0.0
    for u, mu, alpha in (
        (state.M, p.mu_M, p.alpha_M),
        (state.F, p.mu_F, p.alpha_F),
        (state.M_S, p.mu_S, p.alpha_S),
    ):
        total += mu * _quad(u, mass) + alpha * _quad(u, stiffness)
    if total < 0:
        raise ValueError("negative energy; matrices corrupted?")
    return float(np.sqrt(total))


@dataclass(frozen=True)
class DiagonalProfile:
    x: np.ndarray
    values: np.ndarray


def diagonal_profile(u, mesh) -> DiagonalProfile:
    idx = mesh.diagonal_nodes()
    return DiagonalProfile(mesh.nodes[idx, 0].copy(), np.asarray(u, dtype=float)[idx].copy())


class EocFit(NamedTuple):
    f0: float
    c: float
    q: float
    degenerate: bool = False


def _inner_lsq(r, v, q):
    A = np.column_stack([np.ones_like(r), r**q])
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    res = A @ coef - v
    return coef, float(res @ res)


def fit_eoc(pairs: Sequence[tuple[float, float]], qmin: float = 0.1, qmax: float = 4.0) -> EocFit:
    """Least-squares fit of value = f0 + c * resolution**q.

    Scans q on a 1e-3 grid (with (f0, c) solved linearly for each q), then
    refines the best grid point with a bounded scalar minimization.
    """
    if len(pairs) < 3:
        raise ValueError("need at least 3 (resolution, value) pairs")
    r = np.array([float(a) for a, _ in pairs])
    v = np.array([float(b) for _, b in pairs])
    if np.any(r <= 0) or len(np.unique(r)) != len(r):
        raise ValueError("resolutions must be positive and distinct")
    if np.all(v == v[0]):
        return EocFit(float(v[0]), 0.0, float("nan"), True)
    # normalise to keep the inner problems well scaled
    rs = r / r.max()
    qs = np.arange(qmin, qmax + 5e-4, 1e-3)
    sse = np.array([_inner_lsq(rs, v, q)[1] for q in qs])
    k = int(np.argmin(sse))
    lo, hi = qs[max(k - 1, 0)], qs[min(k + 1, len(qs) - 1)]
    res = minimize_scalar(
        lambda q: _inner_lsq(rs, v, q)[1], bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-10},
    )
    q = float(res.x) if res.fun <= sse[k] else float(qs[k])
    (f0, cs), _ = _inner_lsq(rs, v, q)
    return EocFit(float(f0), float(cs / r.max() ** q), q, False)
