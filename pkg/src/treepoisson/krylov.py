"""Conjugate gradients and restarted GMRES for the loop Gram system."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np


class ConvergenceError(RuntimeError):
    """Iteration limit reached before the residual tolerance."""

    def __init__(self, message: str, history: List[float]):
        self.history = history
        super().__init__(message)


class MatrixPropertyError(ValueError):
    """The operator lacks a property the method requires."""


@dataclass
class IterSettings:
    """Stopping rule: ``||b - A x|| <= tol * ||b||``.

    ``maxiter=None`` allows ``max(100, 10 n)`` iterations.  ``restart`` is the
    GMRES cycle length.  ``preconditioner`` may be ``None`` or ``"jacobi"``.
    """

    tol: float = 0.01
    maxiter: Optional[int] = None
    restart: int = 60
    preconditioner: Optional[str] = None

    def __post_init__(self):
        if not 0.0 < self.tol < 1.0:
            raise ValueError(f"tolerance must lie in (0, 1), got {self.tol}")
        if self.restart < 1:
            raise ValueError(f"restart must be >= 1, got {self.restart}")
        if self.maxiter is not None and self.maxiter < 1:
            raise ValueError(f"maxiter must be >= 1, got {self.maxiter}")
        if self.preconditioner not in (None, "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")

    def limit(self, n: int) -> int:
        return self.maxiter if self.maxiter is not None else max(100, 10 * n)


@dataclass
class SolverStats:
    method: str
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list)


def _jacobi(A, settings):
    if settings.preconditioner != "jacobi":
        return None
    diag = np.asarray(A.diagonal(), dtype=float)
    if (diag <= 0).any():
        raise MatrixPropertyError("Jacobi preconditioner needs a positive diagonal")
    return 1.0 / diag


def cg_solve(A, b, settings: Optional[IterSettings] = None, callback=None):
    """Conjugate gradients from a zero start vector.

    ``stats.history`` holds the relative residual norm after every
    iteration, starting with 1.0 for the initial guess.  ``callback(x)`` is
    called with the iterate after each step.
    """
    settings = settings or IterSettings()
    b = np.asarray(b, dtype=float)
    n = len(b)
    if A.shape != (n, n):
        raise ValueError(f"operator shape {A.shape} does not match rhs length {n}")
    x = np.zeros(n)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, SolverStats("cg", 0, 0.0, [0.0])
    minv = _jacobi(A, settings)

    r = b.copy()
    z = r if minv is None else minv * r
    p = z.copy()
    rz = r @ z
    history = [1.0]
    for it in range(1, settings.limit(n) + 1):
        ap = A @ p
        curv = p @ ap
        if not curv > 0.0:
            raise MatrixPropertyError(
                f"nonpositive curvature {curv:.3g} at iteration {it}: operator is not SPD")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * ap
        rel = np.linalg.norm(r) / bnorm
        history.append(rel)
        if callback is not None:
            callback(x)
        if rel <= settings.tol:
            return x, SolverStats("cg", it, rel, history)
        z = r if minv is None else minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach tol {settings.tol:g} in {len(history) - 1} iterations "
        f"(residual {history[-1]:.3g})", history)


def gmres_solve(A, b, settings: Optional[IterSettings] = None):
    """Restarted GMRES(m) from a zero start vector.

    Arnoldi with modified Gram-Schmidt and Givens rotations; the true
    residual is recomputed at the end of every cycle.  ``stats.iterations``
    counts inner (Arnoldi) steps over all cycles.
    """
    settings = settings or IterSettings()
    b = np.asarray(b, dtype=float)
    n = len(b)
    if A.shape != (n, n):
        raise ValueError(f"operator shape {A.shape} does not match rhs length {n}")
    x = np.zeros(n)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, SolverStats("gmres", 0, 0.0, [0.0])
    minv = _jacobi(A, settings)

    def op(v):
        w = A @ v
        return w if minv is None else minv * w

    m = min(settings.restart, n)
    limit = settings.limit(n)
    history = [1.0]
    total = 0
    r = b.copy()
    # the preconditioned residual drives the Arnoldi process, the true one the stop test
    while total < limit:
        z = r if minv is None else minv * r
        beta = np.linalg.norm(z)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = z / beta
        k = 0
        for k in range(m):
            w = op(V[k])
            for j in range(k + 1):
                H[j, k] = w @ V[j]
                w -= H[j, k] * V[j]
            hnext = np.linalg.norm(w)
            H[k + 1, k] = hnext
            if hnext > 0.0:
                V[k + 1] = w / hnext
            for j in range(k):
                hj = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = hj
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                raise MatrixPropertyError(f"GMRES breakdown at iteration {total + 1}: singular operator")
            cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] *= cs[k]
            total += 1
            est = abs(g[k + 1]) / beta * (np.linalg.norm(r) / bnorm)
            history.append(est)
            if est <= settings.tol or total >= limit or hnext == 0.0:
                break
        y = np.linalg.solve(np.triu(H[:k + 1, :k + 1]), g[:k + 1])
        x += V[:k + 1].T @ y
        r = b - A @ x
        rel = np.linalg.norm(r) / bnorm
        history[-1] = rel
        if rel <= settings.tol:
            return x, SolverStats("gmres", total, rel, history)
    raise ConvergenceError(
        f"GMRES({m}) did not reach tol {settings.tol:g} in {total} iterations "
        f"(residual {history[-1]:.3g})", history)
