"""
Preconditioned CG and restarted, right-preconditioned GMRES.

Residuals are relative to ||b||. Inner products go through np.sum, whose
pairwise reduction has a fixed shape for a given length, so iteration counts
repeat exactly from run to run.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from errors import GmresStagnation, Mis2Error, SolverBreakdown
from mis2 import xorshift64star_many

logger = logging.getLogger(__name__)

Preconditioner = Callable[[np.ndarray], np.ndarray]

DEFAULT_RESTART = 50


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    final_relative_residual: float = float('nan')
    residual_history: list = field(default_factory=list)

    def to_dict(self):
        final = self.final_relative_residual
        return {
            'iterations': self.iterations,
            'converged': self.converged,
            # JSON has no inf/nan
            'final_relative_residual': final if np.isfinite(final) else None,
            'residual_history': [r if np.isfinite(r) else None for r in self.residual_history],
        }


def _dot(x, y):
    return float(np.sum(x * y))


def _norm(x):
    return float(np.sqrt(_dot(x, x)))


def _identity(r):
    return r.copy()


def _prepare(a, b, x0):
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (a.num_rows,):
        raise Mis2Error(f"right-hand side has shape {b.shape}, matrix has {a.num_rows} rows")
    x = np.zeros(a.num_rows) if x0 is None else np.array(x0, dtype=np.float64, copy=True)
    return a.to_scipy(), b, x


def _report(history, converged):
    return SolveReport(len(history) - 1, converged, history[-1], list(history))


def pcg(a, b, precond: Optional[Preconditioner] = None, tol=1e-12, max_iter=1000,
        x0=None, callback=None):
    """
    Preconditioned conjugate gradient for SPD systems.

    Args:
        a: SparseMatrix, assumed symmetric positive definite
        b: Right-hand side
        precond: Callable r -> M^-1 r (identity if None)
        tol: Relative residual target ||b - Ax|| / ||b||
        max_iter: Iteration cap; hitting it returns converged=False
        callback: Called with the iterate after every iteration

    Returns:
        (x, SolveReport)

    Raises:
        SolverBreakdown: p.Ap or r.z nonpositive (A or M not SPD)
    """
    op, b, x = _prepare(a, b, x0)
    apply = precond or _identity
    b_norm = _norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b), SolveReport(0, True, 0.0, [0.0])

    r = b - op @ x
    history = [_norm(r) / b_norm]
    if history[-1] <= tol:
        return x, _report(history, True)

    z = apply(r)
    rz = _dot(r, z)
    p = z.copy()
    for _ in range(max_iter):
        if not rz > 0.0:
            raise SolverBreakdown(f"r.z = {rz!r} is not positive; the preconditioner is not SPD",
                                  _report(history, False))
        ap = op @ p
        pap = _dot(p, ap)
        if not pap > 0.0:
            raise SolverBreakdown(f"p.Ap = {pap!r} is not positive; the matrix is not SPD",
                                  _report(history, False))
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        history.append(_norm(r) / b_norm)
        if callback is not None:
            callback(x)
        if history[-1] <= tol:
            # the recurrence drifts from b - Ax; only the true residual may stop the loop
            r = b - op @ x
            history[-1] = _norm(r) / b_norm
            if history[-1] <= tol:
                break
        z = apply(r)
        rz_next = _dot(r, z)
        p = z + (rz_next / rz) * p
        rz = rz_next
    else:
        history[-1] = _norm(b - op @ x) / b_norm

    report = _report(history, history[-1] <= tol)
    logger.info("pcg: %s after %d iterations, relative residual %.3e",
                'converged' if report.converged else 'stopped', report.iterations,
                report.final_relative_residual)
    return x, report


def _least_squares(h, g):
    """min ||g - h y|| through a Householder QR of the small Hessenberg block"""
    q, r = np.linalg.qr(h, mode='reduced')
    y = solve_triangular(r, q.T @ g)
    return y, float(np.linalg.norm(g - h @ y))


def gmres(a, b, precond: Optional[Preconditioner] = None, tol=1e-8, restart=DEFAULT_RESTART,
          max_iter=800, x0=None, callback=None):
    """
    Right-preconditioned restarted GMRES: solves A M^-1 u = b, x = M^-1 u, so
    the monitored residual is the true residual of x.

    Inner iterations record the least-squares residual; at the end of every
    restart cycle the last entry is replaced by the recomputed true residual
    and `callback(x)` is called with the updated iterate.

    Raises:
        GmresStagnation: a whole restart cycle did not reduce the residual
    """
    if restart < 1:
        raise Mis2Error(f"restart must be >= 1, got {restart}")
    op, b, x = _prepare(a, b, x0)
    apply = precond or _identity
    b_norm = _norm(b)
    if b_norm == 0.0:
        return np.zeros_like(b), SolveReport(0, True, 0.0, [0.0])

    r = b - op @ x
    beta = _norm(r)
    history = [beta / b_norm]
    n = a.num_rows
    iterations = 0

    while history[-1] > tol and iterations < max_iter:
        cycle_start = history[-1]
        steps = min(restart, max_iter - iterations)
        basis = np.zeros((steps + 1, n))
        hess = np.zeros((steps + 1, steps))
        g = np.zeros(steps + 1)
        g[0] = beta
        basis[0] = r / beta
        y = np.zeros(0)

        for j in range(steps):
            w = op @ apply(basis[j])
            # modified Gram-Schmidt
            for i in range(j + 1):
                hess[i, j] = _dot(w, basis[i])
                w -= hess[i, j] * basis[i]
            hess[j + 1, j] = _norm(w)
            iterations += 1

            try:
                y, residual = _least_squares(hess[:j + 2, :j + 1], g[:j + 2])
            except np.linalg.LinAlgError:
                raise SolverBreakdown(f"singular least-squares block at iteration {iterations}",
                                      _report(history + [history[-1]], False))
            history.append(residual / b_norm)
            if hess[j + 1, j] <= np.finfo(np.float64).eps * np.linalg.norm(hess[:j + 2, j]):
                logger.debug("gmres: Krylov space exhausted after %d steps", j + 1)
                break
            if history[-1] <= tol:
                break
            basis[j + 1] = w / hess[j + 1, j]

        x += apply(basis[:len(y)].T @ y)
        r = b - op @ x
        beta = _norm(r)
        if not np.isfinite(beta):
            raise SolverBreakdown("residual is no longer finite", _report(history, False))
        history[-1] = beta / b_norm
        if callback is not None:
            callback(x)
        logger.debug("gmres: %d iterations, relative residual %.3e", iterations, history[-1])

        if history[-1] > tol and history[-1] >= cycle_start:
            raise GmresStagnation(
                f"restart cycle ending at iteration {iterations} did not reduce the residual "
                f"({cycle_start:.3e} -> {history[-1]:.3e})", _report(history, False))

    report = _report(history, history[-1] <= tol)
    logger.info("gmres: %s after %d iterations, relative residual %.3e",
                'converged' if report.converged else 'stopped', report.iterations,
                report.final_relative_residual)
    return x, report


def deterministic_rhs(n, seed=0):
    """Reproducible vector in [-1, 1): xorshift64* of (i + 1) ^ seed, top 53 bits"""
    words = xorshift64star_many(np.arange(1, n + 1, dtype=np.uint64) ^ np.uint64(seed))
    unit = (words >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return 2.0 * unit - 1.0
