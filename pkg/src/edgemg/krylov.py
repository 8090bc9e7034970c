"""Flexible GMRES and preconditioned CG on the regularized normal equations.

Both solvers use an *absolute* stopping test on the 2-norm of the
normal-equations residual ``b - K x``, so a good initial guess translates
directly into fewer iterations.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolveReport", "fgmres", "cg_normal", "pcg_steps", "write_reports_csv"]

DEFAULT_MAX_ITER = 300
_REORTH = 0.7071


@dataclass
class SolveReport:
    iterations: int
    final_residual_norm: float
    residual_history: np.ndarray = field(repr=False)
    converged: bool

    def __post_init__(self):
        self.residual_history = np.asarray(self.residual_history, dtype=np.float64)


def _identity(v):
    return v


def fgmres(apply_normal, precond, b, x0=None, abs_tol=1e-6, max_iter=DEFAULT_MAX_ITER):
    """Right-preconditioned flexible GMRES, never restarted.

    Parameters
    ----------
    apply_normal : callable
        ``x -> K x`` for the SPD normal operator.
    precond : callable or None
        ``r -> z`` approximately solving ``K z = r``.  May change from call
        to call (e.g. a V-cycle with Krylov relaxation).
    b : ndarray
        Right-hand side.
    x0 : ndarray, optional
        Initial guess; zero if omitted.
    abs_tol : float
        Stop once ``||b - K x|| <= abs_tol``.
    max_iter : int
        Maximum Arnoldi steps (one preconditioner application each).

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    if abs_tol <= 0:
        raise ValueError("abs_tol must be positive")
    precond = precond or _identity
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)

    r = b - apply_normal(x)
    beta = np.linalg.norm(r)
    history = [beta]
    if beta <= abs_tol or max_iter == 0:
        return x, SolveReport(0, beta, history, beta <= abs_tol)

    bnorm = np.linalg.norm(b)
    breakdown_tol = 1e-14 * (bnorm if bnorm > 0 else beta)

    V = np.zeros((max_iter + 1, n))
    Z = np.zeros((max_iter, n))
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta
    V[0] = r / beta

    x_base = x
    true_res = beta
    converged = False
    j = 0
    for j in range(max_iter):
        Z[j] = precond(V[j])
        w = np.array(apply_normal(Z[j]), dtype=np.float64)  # callers may return views
        w_norm = np.linalg.norm(w)
        for i in range(j + 1):
            H[i, j] = V[i] @ w
            w -= H[i, j] * V[i]
        h_next = np.linalg.norm(w)
        if h_next < _REORTH * w_norm:
            for i in range(j + 1):
                c = V[i] @ w
                H[i, j] += c
                w -= c * V[i]
            h_next = np.linalg.norm(w)
        H[j + 1, j] = h_next
        breakdown = h_next < breakdown_tol
        if not breakdown:
            V[j + 1] = w / h_next

        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        rho = np.hypot(H[j, j], H[j + 1, j])
        if rho == 0.0:
            cs[j], sn[j] = 1.0, 0.0
        else:
            cs[j], sn[j] = H[j, j] / rho, H[j + 1, j] / rho
        H[j, j] = rho
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        est = abs(g[j + 1])

        history.append(est)
        if est <= abs_tol or breakdown or j + 1 == max_iter:
            # the Givens estimate can drift from the true residual; trust only the latter
            x = x_base + _update(H, g, Z, j + 1)
            true_res = np.linalg.norm(b - apply_normal(x))
            if true_res <= abs_tol:
                converged = True
                break
            if breakdown:
                break

    history[-1] = true_res
    return x, SolveReport(j + 1, true_res, history, converged)


def _update(H, g, Z, k):
    y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
    return y @ Z[:k]


def pcg_steps(apply_normal, inv_diag, b, x, steps, abs_tol=0.0, residual=None, return_residual=False):
    """Run up to ``steps`` iterations of diagonally preconditioned CG from ``x``.

    Returns the iterate and the list of residual norms (initial one first),
    plus the final recursively updated residual if ``return_residual``.
    ``x=None`` means a zero initial guess.  A known initial residual can be
    passed as ``residual`` to save one operator application.  Stops early
    only when the residual falls to ``abs_tol`` (exactly zero by default).
    """
    if x is None:
        x = np.zeros_like(b, dtype=np.float64)
        r = np.array(b, dtype=np.float64)
    else:
        x = np.array(x, dtype=np.float64)
        r = b - apply_normal(x) if residual is None else np.array(residual, dtype=np.float64)
    rnorm = np.linalg.norm(r)
    history = [rnorm]
    if steps > 0 and rnorm > abs_tol:
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        for _ in range(steps):
            q = apply_normal(p)
            pq = p @ q
            if pq <= 0.0:
                break
            alpha = rz / pq
            x += alpha * p
            r -= alpha * q
            rnorm = np.linalg.norm(r)
            history.append(rnorm)
            if rnorm <= abs_tol:
                break
            z = inv_diag * r
            rz_new = r @ z
            p *= rz_new / rz
            p += z
            rz = rz_new
    if return_residual:
        return x, history, r
    return x, history


def cg_normal(apply_normal, diag_precond, b, x0=None, abs_tol=1e-6, max_iter=DEFAULT_MAX_ITER):
    """Preconditioned CG baseline on the SPD normal operator.

    ``diag_precond`` holds the diagonal to invert (``None`` means no
    preconditioning).  The stopping test uses the recursively updated
    residual; the reported final residual is recomputed explicitly.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=np.float64)
    if diag_precond is None:
        inv_diag = np.ones_like(b)
    else:
        d = np.asarray(diag_precond, dtype=np.float64)
        if np.any(d == 0):
            raise ValueError("zero entry in diagonal preconditioner")
        inv_diag = 1.0 / d
    x, history = pcg_steps(apply_normal, inv_diag, b, x, max_iter, abs_tol)
    final = np.linalg.norm(b - apply_normal(x))
    history[-1] = final
    return x, SolveReport(len(history) - 1, final, history, final <= abs_tol)


def write_reports_csv(path, rows):
    """Write ``(outer_iter, lambda, iterations, final_residual)`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["outer_iter", "lambda", "iterations", "final_residual"])
        for ell, lam, rep in rows:
            w.writerow([ell, repr(float(lam)), rep.iterations, repr(float(rep.final_residual_norm))])
