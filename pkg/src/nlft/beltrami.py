"""
Complex geometrical optics (CGO) solutions of the Beltrami equation

    dbar f = mu * conj(d f),    f(z, k) = exp(ikz) (c + omega(z, k)),

with ``omega = O(1/z)`` at infinity and ``c = 1`` for the usual CGO solution.
Substituting the ansatz gives ``dbar omega = rho(omega)`` with

    rho(omega) = mu * e_{-k} * (conj(d omega) - i conj(k) (conj(c) + conj(omega))),

which is real-linear in ``omega``. It is solved in the fixed-point form
``omega = C rho(omega)``, ``C`` the Cauchy transform applied as a torus
convolution with a cut-off ``1/(pi z)`` kernel, and ``d omega`` taken
spectrally.

The same routine solves the frequency-domain equations of the transport
method (variables swapped: the field lives in ``k`` and the oscillation
parameter is ``z - z0``), which is why the constant ``c`` is exposed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .grid import ComplexField, Grid2D, cauchy_kernel, kernel_transform, plane_wave
from .krylov import RLinearSolveReport, rlinear_krylov
from .phantom import BeltramiCoefficient

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
DEFAULT_RESTART = 50


@lru_cache(maxsize=16)
def _cauchy_hat(grid: Grid2D, support_radius: float) -> np.ndarray:
    return kernel_transform(cauchy_kernel(grid, support_radius))


@dataclass(eq=False)
class CgoSolution:
    """Solved remainder ``omega`` for one spectral parameter ``k``."""

    k: complex
    omega: ComplexField = field(repr=False)
    rho: ComplexField = field(repr=False)
    const: complex
    report: RLinearSolveReport = field(repr=False)
    residual: float = 0.0

    @property
    def iterations(self) -> int:
        return self.report.iterations

    @property
    def converged(self) -> bool:
        return self.report.converged

    @property
    def grid(self) -> Grid2D:
        return self.omega.grid

    def f_values(self) -> np.ndarray:
        """``f = exp(ikz) (c + omega)`` on the grid."""
        z = self.grid.points
        return np.exp(1j * self.k * z) * (self.const + self.omega.values)

    def omega_at(self, points) -> np.ndarray:
        """
        ``omega`` at arbitrary points off the support of ``mu``, from the
        plane Cauchy integral ``omega(z) = (1/pi) int rho(w) / (z - w) dA(w)``.
        """
        points = np.atleast_1d(np.asarray(points, dtype=np.complex128))
        rho = self.rho.values
        mask = rho != 0
        src = self.grid.points[mask]
        dens = rho[mask] * (self.grid.step**2 / np.pi)
        out = np.empty(points.shape, dtype=np.complex128)
        flat = points.ravel()
        res = out.ravel()
        for start in range(0, flat.size, 256):
            chunk = flat[start : start + 256]
            res[start : start + 256] = (dens[None, :] / (chunk[:, None] - src[None, :])).sum(axis=1)
        return out

    def f_at(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.complex128)
        return np.exp(1j * self.k * points) * (self.const + self.omega_at(points).reshape(points.shape))


def cgo_rhs_array(
    mu: np.ndarray, k: complex, omega: np.ndarray, grid: Grid2D, const: complex = 1.0
) -> np.ndarray:
    d_omega = sfft.ifft2(grid.d_multiplier * sfft.fft2(omega))
    mu_e = mu * plane_wave(-k, grid.points)
    return mu_e * (np.conj(d_omega) - 1j * np.conj(k) * (np.conj(const) + np.conj(omega)))


def cgo_rhs_operator(
    mu: BeltramiCoefficient, k: complex, omega: ComplexField, const: complex = 1.0
) -> ComplexField:
    """The field ``rho`` with ``dbar omega = rho`` (see module docstring)."""
    if mu.grid != omega.grid:
        raise ValueError(f"grid mismatch: {mu.grid} vs {omega.grid}")
    return ComplexField(omega.grid, cgo_rhs_array(mu.values, k, omega.values, omega.grid, const))


def solve_cgo(
    mu: BeltramiCoefficient,
    k: complex,
    tol: float = DEFAULT_TOL,
    *,
    const: complex = 1.0,
    support_radius: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    restart: int = DEFAULT_RESTART,
    method: str = "gmres",
    x0: np.ndarray | None = None,
) -> CgoSolution:
    """
    Solve for ``omega(., k)``.

    ``support_radius`` bounds the support of ``mu`` (default: the unit disc,
    or the actual support if larger); the grid half-width must exceed twice
    that. ``x0`` is an optional initial guess for ``omega`` (warm start).
    On return ``solution.residual`` is
    ``||omega - C rho(omega)|| / ||c + omega||``; check ``solution.converged``.
    """
    grid = mu.grid
    k = complex(k)
    const = complex(const)
    r_supp = max(1.0, mu.support_radius) if support_radius is None else float(support_radius)
    values = mu.values
    if np.any(np.abs(values) >= 1.0):
        raise ValueError("|mu| must be < 1 everywhere")
    k_hat = _cauchy_hat(grid, r_supp)
    h2 = grid.step**2
    mu_e = values * plane_wave(-k, grid.points)
    d_mult = grid.d_multiplier
    ck = np.conj(k)

    def cauchy(rho: np.ndarray) -> np.ndarray:
        return h2 * sfft.ifft2(k_hat * sfft.fft2(rho))

    def apply(w: np.ndarray) -> np.ndarray:
        dw = sfft.ifft2(d_mult * sfft.fft2(w))
        return w - cauchy(mu_e * (np.conj(dw) - 1j * ck * np.conj(w)))

    rho0 = mu_e * (-1j * ck * np.conj(const))
    zero = np.zeros(grid.shape, dtype=np.complex128)
    if not np.any(rho0) and not np.any(values):
        report = RLinearSolveReport(True, [0.0], tol, 1, "trivial")
        return CgoSolution(k, ComplexField(grid, zero), ComplexField(grid, zero), const, report, 0.0)

    rhs = cauchy(rho0)
    # GMRES residual is relative to ||rhs||; rescale so the stopping rule is
    # relative to ||c + omega|| ~ |c| * n instead.
    scale = abs(const) * grid.n if const != 0 else 1.0
    rhs_norm = float(np.linalg.norm(rhs))
    inner_tol = tol if rhs_norm == 0 else min(tol, 0.5 * tol * scale / rhs_norm)
    omega, report = rlinear_krylov(
        apply, rhs, tol=inner_tol, max_iter=max_iter, restart=restart, x0=x0, method=method
    )
    rho = mu_e * (np.conj(sfft.ifft2(d_mult * sfft.fft2(omega))) - 1j * ck * (np.conj(const) + np.conj(omega)))
    resid = float(np.linalg.norm(omega - cauchy(rho)) / np.linalg.norm(const + omega))
    report.tolerance = tol
    if report.converged and resid > tol:
        report.converged = False
        report.reason = "residual above tolerance"
    return CgoSolution(k, ComplexField(grid, omega), ComplexField(grid, rho), const, report, resid)


def beltrami_residual(solution: CgoSolution, mu: BeltramiCoefficient) -> np.ndarray:
    """``dbar f - mu conj(d f)`` evaluated spectrally from ``f = exp(ikz)(c + omega)``."""
    grid = solution.grid
    # spectral derivatives of exp(ikz) * g with g periodic: differentiate g only
    g = solution.const + solution.omega.values
    e = np.exp(1j * solution.k * grid.points)
    dbar_g = sfft.ifft2(grid.dbar_multiplier * sfft.fft2(g))
    d_g = sfft.ifft2(grid.d_multiplier * sfft.fft2(g))
    dbar_f = e * dbar_g
    d_f = e * (1j * solution.k * g + d_g)
    return dbar_f - mu.values * np.conj(d_f)
