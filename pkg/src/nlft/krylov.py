"""
Krylov solver for real-linear operators on complex arrays.

An operator ``A`` with ``A(x + y) = A(x) + A(y)`` and ``A(t x) = t A(x)`` for
real ``t`` only (typically because it involves ``conj(x)``) is an ordinary
linear map on the realified space ``R^{2N}``. Restarted GMRES is run there
directly: vectors stay complex arrays, the inner product is
``Re(vdot(a, b))`` and every Krylov coefficient is real. This is the same
iteration as GMRES on the stacked ``(Re x, Im x)`` system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class SolverError(RuntimeError):
    """Raised when an iterative solve does not reach its tolerance."""

    def __init__(self, message: str, report: "RLinearSolveReport | None" = None):
        super().__init__(message)
        self.report = report


@dataclass
class RLinearSolveReport:
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    tolerance: float = 0.0
    iterations: int = 0
    reason: str = ""

    @property
    def residual(self) -> float:
        """Final relative residual."""
        return self.residual_history[-1] if self.residual_history else 0.0


def _real_dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def rlinear_krylov(
    apply: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 500,
    restart: int = 50,
    x0: np.ndarray | None = None,
    method: str = "gmres",
) -> tuple[np.ndarray, RLinearSolveReport]:
    """
    Solve ``apply(x) = rhs`` for a real-linear ``apply``.

    Stops when ``||apply(x) - rhs|| <= tol * ||rhs||``. The residual history in
    the report is relative to ``||rhs||``. Never raises on non-convergence;
    the caller inspects ``report.converged``.

    ``method="fixed-point"`` runs the plain iteration
    ``x <- x + (rhs - apply(x))``, which converges when ``I - apply`` is a
    contraction.
    """
    rhs = np.asarray(rhs, dtype=np.complex128)
    shape = rhs.shape
    b = rhs.ravel()
    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=np.complex128).ravel().copy()

    def op(v: np.ndarray) -> np.ndarray:
        # copy: apply may hand back a view of its argument
        return np.array(apply(v.reshape(shape)), dtype=np.complex128).ravel()

    if bnorm == 0.0:
        x[:] = 0.0
        return x.reshape(shape), RLinearSolveReport(True, [0.0], tol, 0, "zero right-hand side")

    if method == "fixed-point":
        return _fixed_point(op, b, bnorm, x, tol, max_iter, shape)
    if method != "gmres":
        raise ValueError(f"unknown method {method!r}")

    target = tol * bnorm
    r = b - op(x)
    beta = float(np.linalg.norm(r))
    history = [beta / bnorm]
    iterations = 0
    restart = max(1, min(restart, max_iter))
    reason = ""
    while beta > target and iterations < max_iter:
        basis = np.empty((restart + 1, b.size), dtype=np.complex128)
        hess = np.zeros((restart + 1, restart))
        cs = np.zeros(restart)
        sn = np.zeros(restart)
        g = np.zeros(restart + 1)
        g[0] = beta
        basis[0] = r / beta
        # float view: Re(vdot) becomes a plain real dot product
        rbasis = basis.view(np.float64)
        j_used = 0
        breakdown = False
        for j in range(restart):
            w = op(basis[j])
            iterations += 1
            # classical Gram-Schmidt, applied twice
            rw = w.view(np.float64)
            for _ in range(2):
                coeffs = rbasis[: j + 1] @ rw
                rw -= coeffs @ rbasis[: j + 1]
                hess[: j + 1, j] += coeffs
            hnext = float(np.linalg.norm(w))
            hess[j + 1, j] = hnext
            for i in range(j):
                t = cs[i] * hess[i, j] + sn[i] * hess[i + 1, j]
                hess[i + 1, j] = -sn[i] * hess[i, j] + cs[i] * hess[i + 1, j]
                hess[i, j] = t
            denom = np.hypot(hess[j, j], hess[j + 1, j])
            if denom == 0.0:
                breakdown = True
                j_used = j
                break
            cs[j] = hess[j, j] / denom
            sn[j] = hess[j + 1, j] / denom
            hess[j, j] = denom
            hess[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            j_used = j + 1
            history.append(abs(g[j + 1]) / bnorm)
            if abs(g[j + 1]) <= target or iterations >= max_iter:
                break
            if hnext <= 1e-14 * beta:
                breakdown = True
                break
            basis[j + 1] = w / hnext
        if j_used == 0:
            reason = "breakdown"
            break
        y = _back_substitute(hess[:j_used, :j_used], g[:j_used])
        x += y @ basis[:j_used]
        r = b - op(x)
        new_beta = float(np.linalg.norm(r))
        history.append(new_beta / bnorm)
        if new_beta > target and new_beta >= 0.999 * beta and not breakdown:
            reason = "stagnation"
            beta = new_beta
            break
        beta = new_beta
        if breakdown and beta > target:
            reason = "breakdown"
            break
    converged = beta <= target
    if not converged and not reason:
        reason = "max_iter reached"
    return x.reshape(shape), RLinearSolveReport(converged, history, tol, iterations, reason)


def _back_substitute(upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = rhs.size
    y = np.zeros(n)
    for i in range(n - 1, -1, -1):
        y[i] = (rhs[i] - upper[i, i + 1 :] @ y[i + 1 :]) / upper[i, i]
    return y


def _fixed_point(op, b, bnorm, x, tol, max_iter, shape):
    history = []
    for it in range(1, max_iter + 1):
        r = b - op(x)
        res = float(np.linalg.norm(r)) / bnorm
        history.append(res)
        if res <= tol:
            return x.reshape(shape), RLinearSolveReport(True, history, tol, it - 1, "")
        x = x + r
    r = b - op(x)
    history.append(float(np.linalg.norm(r)) / bnorm)
    ok = history[-1] <= tol
    return x.reshape(shape), RLinearSolveReport(ok, history, tol, max_iter, "" if ok else "max_iter reached")


def realify(apply: Callable[[np.ndarray], np.ndarray], size: int) -> np.ndarray:
    """Dense ``2N x 2N`` real matrix of a real-linear map on ``C^N``."""
    mat = np.empty((2 * size, 2 * size))
    for j in range(size):
        for part, unit in ((0, 1.0), (1, 1j)):
            e = np.zeros(size, dtype=np.complex128)
            e[j] = unit
            col = np.asarray(apply(e)).ravel()
            mat[:size, part * size + j] = col.real
            mat[size:, part * size + j] = col.imag
    return mat
