"""Preconditioned conjugate gradients for the SPD systems of the implicit step."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp


class SolverError(RuntimeError):
    """CG did not converge, or the matrix turned out not to be SPD."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NotSPDError(SolverError):
    pass


@dataclass(frozen=True)
class CGConfig:
    rtol: float = 1e-10
    atol: float = 1e-14
    maxiter: Optional[int] = None  # None -> 10 * dimension
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("CG tolerances must be positive")
        if self.maxiter is not None and self.maxiter < 1:
            raise ValueError("CG maxiter must be >= 1")
        if self.preconditioner not in ("jacobi", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


def cg_solve(A, b, x0=None, cfg: CGConfig = CGConfig()) -> CGResult:
    """Solve ``A x = b`` for SPD ``A``.

    Converged when ``||b - A x||_2 <= max(rtol*||b||_2, atol)``; the recursive
    residual is used during iteration and confirmed against the true residual
    before returning. Raises :class:`NotSPDError` on non-positive curvature
    and :class:`SolverError` when ``maxiter`` is hit.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match rhs length {n}")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    maxiter = 10 * n if cfg.maxiter is None else cfg.maxiter

    if cfg.preconditioner == "jacobi":
        d = A.diagonal() if sp.issparse(A) else np.diag(A)
        if np.any(d <= 0):
            raise NotSPDError("matrix has a non-positive diagonal entry")
        dinv = 1.0 / d
    else:
        dinv = None

    tol = max(cfg.rtol * np.linalg.norm(b), cfg.atol)
    r = b - A @ x
    k = 0
    while True:
        rnorm = np.linalg.norm(r)
        if rnorm <= tol:
            return CGResult(x, k, float(rnorm))
        z = r * dinv if dinv is not None else r
        p = z.copy()
        rz = r @ z
        while k < maxiter:
            k += 1
            Ap = A @ p
            curv = p @ Ap
            if curv <= 0:
                raise NotSPDError(
                    f"non-positive curvature p'Ap={curv:.3e} at iteration {k}",
                    float(np.linalg.norm(r)),
                    k,
                )
            alpha = rz / curv
            x += alpha * p
            r -= alpha * Ap
            if np.linalg.norm(r) <= tol:
                break
            z = r * dinv if dinv is not None else r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        # restart from the true residual; guards against recursive drift
        r = b - A @ x
        if k >= maxiter and np.linalg.norm(r) > tol:
            res = float(np.linalg.norm(r))
            raise SolverError(
                f"CG did not converge in {maxiter} iterations (residual {res:.3e})", res, k
            )
