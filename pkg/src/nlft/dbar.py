"""
Shortcut inverse transform: for each ``z`` solve the D-bar equation

    dbar_k m(z, k) = -i tau_R(k) e_{-z}(k) conj(m(z, k)),   m(z, .) - 1 -> 0,

and set ``sigma(z) = m(z, 0)**2``. The plane problem is replaced by its
periodisation on the torus ``[-s, s)^2`` with ``s = 2R + 3 eps``:

    m = 1 + E chi_{|k| < R + eps} (beta * (chi_{|k| < R} F conj(m))),

``beta = eta / (pi k)`` with a smooth cutoff ``eta`` and ``*`` the torus
convolution. The periodic solution coincides with the plane one on
``|k| < R``, so the torus grid only has to resolve the data disc.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .grid import (
    ComplexField,
    Grid2D,
    cauchy_kernel_eps,
    cutoff,
    interpolate,
    kernel_transform,
    make_grid,
    plane_wave,
)
from .krylov import RLinearSolveReport, SolverError, rlinear_krylov
from .nft import ScatteringData
from .parallel import chunked, parallel_sweep

DEFAULT_TOL = 1e-10
EPS_FRACTION = 0.05


@dataclass(frozen=True, eq=False)
class PeriodizedKernel:
    R: float
    eps: float
    grid: Grid2D
    eta: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    beta_hat: np.ndarray = field(repr=False)

    @property
    def s(self) -> float:
        return self.grid.half_width


def build_kernel(R: float, eps: float | None, m_k: int) -> PeriodizedKernel:
    """Kernel on the torus of half-width ``2R + 3 eps`` with ``2**m_k`` points per axis."""
    if R <= 0:
        raise ValueError("R must be positive")
    if eps is None:
        eps = EPS_FRACTION * R
    if eps <= 0:
        raise ValueError("eps must be positive")
    if m_k < 4:
        raise ValueError("m_k must be >= 4")
    grid = make_grid(m_k, 2.0 * R + 3.0 * eps)
    eta = cutoff(np.abs(grid.points), 2.0 * R + eps, eps)
    beta = cauchy_kernel_eps(grid, 2.0 * R + eps, eps)
    return PeriodizedKernel(float(R), float(eps), grid, eta, beta, kernel_transform(beta))


@dataclass(eq=False)
class DbarSolution:
    z: complex
    m_field: ComplexField = field(repr=False)
    m_at_zero: complex
    report: RLinearSolveReport = field(repr=False)
    smooth_part: np.ndarray = field(repr=False, default=None)
    restrict_radius: float = np.inf

    def m_at(self, points) -> np.ndarray:
        """
        ``m`` at arbitrary points inside the disc ``|k| < R + eps``, by cubic
        spline interpolation of the (smooth, untruncated) convolution term.
        """
        points = np.asarray(points, dtype=np.complex128)
        vals = 1.0 + interpolate(self.smooth_part, self.m_field.grid, points, order=3)
        return np.where(np.abs(points) < self.restrict_radius, vals, 1.0)


class _DbarProblem:
    """Per-data precomputation shared by every ``z``."""

    def __init__(self, kernel: PeriodizedKernel, tau_R: ScatteringData):
        self.kernel = kernel
        grid = kernel.grid
        pts = grid.points
        self.grid = grid
        self.data_mask = np.abs(pts) < kernel.R
        tau = np.asarray(tau_R.values_at(pts))
        self.tau = np.where(self.data_mask, tau, 0.0)
        self.restrict = np.abs(pts) < kernel.R + kernel.eps
        self.h2 = grid.step**2

    def coefficient(self, z: complex) -> np.ndarray:
        # F(z, k) = -i tau(k) e_{-k}(z), restricted to |k| < R
        return -1j * self.tau * plane_wave(-complex(z), self.grid.points)

    def convolve(self, values: np.ndarray) -> np.ndarray:
        return self.h2 * sfft.ifft2(self.kernel.beta_hat * sfft.fft2(values))

    def operator(self, z: complex, m: np.ndarray) -> np.ndarray:
        F = self.coefficient(z)
        return 1.0 + np.where(self.restrict, self.convolve(F * np.conj(m)), 0.0)

    def solve(self, z: complex, tol: float, max_iter: int, restart: int, method: str) -> DbarSolution:
        z = complex(z)
        F = self.coefficient(z)
        grid = self.grid
        o = grid.origin_index
        if not np.any(F):
            ones = np.ones(grid.shape, dtype=np.complex128)
            report = RLinearSolveReport(True, [0.0], tol, 0, "zero data")
            return DbarSolution(z, ComplexField(grid, ones), 1 + 0j, report, np.zeros(grid.shape), self.kernel.R + self.kernel.eps)

        def apply(u):
            return u - np.where(self.restrict, self.convolve(F * np.conj(u)), 0.0)

        rhs = np.where(self.restrict, self.convolve(F), 0.0)
        u, report = rlinear_krylov(apply, rhs, tol=tol, max_iter=max_iter, restart=restart, method=method)
        m = 1.0 + u
        smooth = self.convolve(F * np.conj(m))
        return DbarSolution(
            z, ComplexField(grid, m), complex(m[o, o]), report, smooth, self.kernel.R + self.kernel.eps
        )


def dbar_operator(kernel: PeriodizedKernel, tau_R: ScatteringData, z: complex, m_field: ComplexField) -> ComplexField:
    """Right-hand side ``1 + C~ F~_R c~ m`` of the periodic fixed-point equation."""
    if m_field.grid != kernel.grid:
        raise ValueError("m_field must live on the kernel's torus grid")
    prob = _DbarProblem(kernel, tau_R)
    return ComplexField(kernel.grid, prob.operator(z, m_field.values))


def solve_dbar_at(
    kernel: PeriodizedKernel,
    tau_R: ScatteringData,
    z: complex,
    tol: float = DEFAULT_TOL,
    *,
    max_iter: int = 500,
    restart: int = 50,
    method: str = "gmres",
) -> DbarSolution:
    """Periodic solution ``m~_R(z, .)`` and its value at ``k = 0``."""
    sol = _DbarProblem(kernel, tau_R).solve(z, tol, max_iter, restart, method)
    if not sol.report.converged:
        raise SolverError(f"D-bar solve did not converge at z={z}: {sol.report.reason}", sol.report)
    return sol


def direct_dbar_oracle(
    tau_R: ScatteringData,
    z: complex,
    n: int = 24,
    *,
    R: float | None = None,
    extrapolate: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Dense solve of the plane integral equation

        m(k) = 1 + (1/pi) int_{|k'| < R} F(z, k') conj(m(k')) / (k - k') dk'

    by punctured-cell quadrature on the ``n x n`` lattice ``-R + j h``,
    ``h = 2R / n``, restricted to the disc. With ``extrapolate`` the solve is
    repeated on the ``2n x 2n`` refinement and the two are combined by
    Richardson extrapolation (the punctured rule has an ``h**2`` leading
    error for smooth data).

    Returns ``(nodes, m)`` for the nodes of the base lattice inside the disc.
    """
    if n > 32:
        raise ValueError("oracle base grid is limited to 32 x 32")
    R = tau_R.R if R is None else float(R)
    nodes, m = _dense_solve(tau_R, z, n, R)
    if not extrapolate:
        return nodes, m
    fine_nodes, fine_m = _dense_solve(tau_R, z, 2 * n, R)
    lookup = {(round(p.real / R * 4 * n), round(p.imag / R * 4 * n)): v for p, v in zip(fine_nodes, fine_m)}
    fine_on_coarse = np.array([lookup[(round(p.real / R * 4 * n), round(p.imag / R * 4 * n))] for p in nodes])
    return nodes, (4.0 * fine_on_coarse - m) / 3.0


def _dense_solve(tau_R: ScatteringData, z: complex, n: int, R: float):
    h = 2.0 * R / n
    axis = -R + h * np.arange(n)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    pts = (x + 1j * y).ravel()
    pts = pts[np.abs(pts) < R]
    F = -1j * tau_R.values_at(pts) * plane_wave(-complex(z), pts)
    diff = pts[:, None] - pts[None, :]
    np.fill_diagonal(diff, 1.0)
    K = h**2 / (np.pi * diff)
    np.fill_diagonal(K, 0.0)
    a = K * F[None, :]
    b = a.sum(axis=1)
    N = pts.size
    ar, ai = a.real, a.imag
    eye = np.eye(N)
    mat = np.block([[eye - ar, -ai], [-ai, eye + ar]])
    try:
        sol = np.linalg.solve(mat, np.concatenate([b.real, b.imag]))
    except np.linalg.LinAlgError as err:
        raise SolverError(f"oracle system is singular: {err}") from err
    return pts, 1.0 + sol[:N] + 1j * sol[N:]


@dataclass(eq=False)
class Reconstruction:
    """Recovered conductivity at a set of z-points, plus diagnostics."""

    z_points: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)
    grid: Grid2D | None = None
    mask: np.ndarray | None = field(default=None, repr=False)

    @property
    def max_imag(self) -> float:
        return float(np.max(np.abs(self.sigma.imag))) if self.sigma.size else 0.0

    def to_field(self) -> ComplexField:
        if self.grid is None or self.mask is None:
            raise ValueError("reconstruction was not computed on a grid")
        out = np.ones(self.grid.shape, dtype=np.complex128)
        out[self.mask] = self.sigma
        return ComplexField(self.grid, out)


def _dbar_chunk(args):
    kernel, tau_R, zs, tol = args
    prob = _DbarProblem(kernel, tau_R)
    out = []
    for z in zs:
        sol = prob.solve(z, tol, 500, 50, "gmres")
        out.append((sol.m_at_zero, sol.report.converged, sol.report.residual, sol.report.iterations))
    return out


def reconstruct_shortcut(
    tau_R: ScatteringData,
    z_points,
    R: float,
    m_k: int,
    tol: float = DEFAULT_TOL,
    *,
    eps: float | None = None,
    workers: int = 1,
    grid: Grid2D | None = None,
    mask: np.ndarray | None = None,
) -> Reconstruction:
    """``sigma~(z) = m_R(z, 0)**2`` at every z-point (each solved independently)."""
    z_points = np.asarray(z_points, dtype=np.complex128).ravel()
    if np.any(np.abs(z_points) > 1.0 + 1e-12):
        raise ValueError("z-points must lie in the closed unit disc")
    if R > tau_R.R:
        raise ValueError(f"cutoff R={R} exceeds the data radius {tau_R.R}")
    from .nft import truncate

    data = truncate(tau_R, R) if R < tau_R.R else tau_R
    kernel = build_kernel(R, eps, m_k)
    start = time.perf_counter()
    tasks = [(kernel, data, c, tol) for c in chunked(list(z_points), 16)]
    results = [r for part in parallel_sweep(_dbar_chunk, tasks, workers) for r in part]
    wall = time.perf_counter() - start
    failed = [z for z, r in zip(z_points, results) if not r[1]]
    if failed:
        raise SolverError(f"D-bar solve failed at {len(failed)} z-points: {failed[:5]}")
    m0 = np.array([r[0] for r in results], dtype=np.complex128)
    sigma = m0**2
    diag = {
        "method": "shortcut",
        "R": float(R),
        "m_k": m_k,
        "eps": kernel.eps,
        "s_k": kernel.s,
        "tol": tol,
        "n_points": int(z_points.size),
        "max_re": float(sigma.real.max()) if sigma.size else float("nan"),
        "min_re": float(sigma.real.min()) if sigma.size else float("nan"),
        "max_abs_imag": float(np.abs(sigma.imag).max()) if sigma.size else 0.0,
        "max_residual": float(max((r[2] for r in results), default=0.0)),
        "max_iterations": int(max((r[3] for r in results), default=0)),
        "wall_time": wall,
    }
    return Reconstruction(z_points, sigma, diag, grid, mask)
