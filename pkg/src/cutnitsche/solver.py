"""Linear solvers for the reduced SPD system.

Conjugate gradients with Jacobi preconditioning is the default; a
dense Cholesky factorisation serves as fallback and cross-check on
small systems.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .assembly import SparseSystem

__all__ = [
    "SolveStats", "SolverError", "NotSPDError", "MaxIterationsError",
    "StagnationError", "solve",
]

DENSE_LIMIT = 3000


class SolverError(RuntimeError):
    pass


class NotSPDError(SolverError):
    """Negative curvature encountered: matrix not SPD, check gamma."""


class MaxIterationsError(SolverError):
    def __init__(self, message, stats):
        super().__init__(message)
        self.stats = stats


class StagnationError(SolverError):
    """True residual stopped improving above tol (round-off floor)."""

    def __init__(self, message, stats, x):
        super().__init__(message)
        self.stats = stats
        self.x = x


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    relative_residual: float
    method: str


def solve(system: SparseSystem, tol: float = 1e-12, max_iter: int | None = None,
          method: str = "cg") -> tuple[np.ndarray, SolveStats]:
    """Solve the reduced system to a relative residual <= tol."""
    if method == "cg":
        return _pcg(system, tol, max_iter)
    if method == "dense":
        return _dense_cholesky(system, tol)
    raise ValueError(f"unknown solver method {method!r} (use 'cg' or 'dense')")


def _pcg(system: SparseSystem, tol: float, max_iter: int | None):
    a = system.matrix
    b = system.rhs
    n = b.shape[0]
    if max_iter is None:
        max_iter = 20 * n
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveStats(0, 0.0, "cg_jacobi")

    diag = a.diagonal()
    if np.any(diag <= 0.0):
        raise NotSPDError("matrix not SPD (nonpositive diagonal) - check gamma")
    inv_diag = 1.0 / diag

    x = np.zeros(n)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    it = 0
    best_true = np.inf
    stalls = 0
    while it < max_iter:
        it += 1
        ap = a @ p
        pap = float(p @ ap)
        if pap <= 0.0:
            raise NotSPDError("matrix not SPD (negative curvature in CG) - check gamma")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm:
            true_r = float(np.linalg.norm(b - a @ x))
            if true_r <= tol * bnorm:
                return x, SolveStats(it, true_r / bnorm, "cg_jacobi")
            # Recurrence residual converged but the true residual did not:
            # restart from the exact residual.  Two consecutive restarts
            # without improvement mean the round-off floor is reached and
            # more iterations cannot help.
            if true_r >= 0.5 * best_true:
                stalls += 1
            else:
                stalls = 0
            best_true = min(best_true, true_r)
            if stalls >= 2:
                raise StagnationError(
                    f"CG stagnated at relative residual {true_r / bnorm:.3e} "
                    f"above tol={tol:g} (round-off floor, {it} iterations)",
                    SolveStats(it, true_r / bnorm, "cg_jacobi"),
                    x,
                )
            r = b - a @ x
            rnorm = float(np.linalg.norm(r))
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
            continue
        z = inv_diag * r
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    true_r = float(np.linalg.norm(b - a @ x)) / bnorm
    raise MaxIterationsError(
        f"CG did not reach tol={tol:g} in {max_iter} iterations "
        f"(relative residual {true_r:.3e})",
        SolveStats(it, true_r, "cg_jacobi"),
    )


def _dense_cholesky(system: SparseSystem, tol: float):
    a = system.matrix
    b = system.rhs
    dense = a.toarray()
    try:
        factor = scipy.linalg.cho_factor(dense, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPDError(f"matrix not SPD (Cholesky failed: {exc}) - check gamma") from exc
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    bnorm = float(np.linalg.norm(b))
    scale = bnorm if bnorm > 0.0 else 1.0
    steps = 1
    for _ in range(3):  # iterative refinement
        r = b - a @ x
        if float(np.linalg.norm(r)) <= tol * scale:
            break
        x = x + scipy.linalg.cho_solve(factor, r, check_finite=False)
        steps += 1
    rel = float(np.linalg.norm(b - a @ x)) / scale
    return x, SolveStats(steps, rel, "dense_cholesky")
