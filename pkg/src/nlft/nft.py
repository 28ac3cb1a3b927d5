"""
Forward nonlinear Fourier transforms.

``tau(k)`` is obtained from the pair of CGO solves for ``mu`` and ``-mu``:

    conj(tau(k)) = (1 / 2pi) * integral of dbar(omega - omega^-)

where the integrand is the operator right-hand side ``rho`` (no numerical
differentiation of ``omega``). ``t(k) = -4 pi i conj(k) tau(k)`` is the
Nachman-normalised transform, and ``nu_{z0}(k) = i h_-(z0, k) / h_+(z0, k)``
is the frequency-domain coefficient used by the transport method.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .beltrami import DEFAULT_TOL, solve_cgo
from .grid import ComplexField, Grid2D, RadialRay, make_grid
from .krylov import SolverError
from .parallel import chunked, parallel_sweep
from .phantom import BeltramiCoefficient, Phantom, get_phantom

logger = logging.getLogger(__name__)

DEFAULT_SZ = 2.1


@dataclass(frozen=True, eq=False)
class ScatteringData:
    """Samples of ``tau`` on a k-grid (``ComplexField``) or a ``RadialRay``."""

    samples: ComplexField | RadialRay = field(repr=False)
    R: float
    provenance: dict = field(default_factory=dict)

    @property
    def is_radial(self) -> bool:
        return isinstance(self.samples, RadialRay)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples.values)))

    def values_at(self, k) -> np.ndarray:
        """
        ``tau`` at arbitrary points, zero for ``|k| >= R``.

        Radial data use ``tau(k) = (k / |k|) tau(|k|)``; grid data are
        interpolated bilinearly.
        """
        from .grid import interpolate

        k = np.asarray(k, dtype=np.complex128)
        r = np.abs(k)
        if self.is_radial:
            with np.errstate(invalid="ignore", divide="ignore"):
                phase = np.where(r > 0, k / np.where(r > 0, r, 1.0), 0.0)
            vals = phase * self.samples(r)
        else:
            grid = self.samples.grid
            inside = (np.abs(k.real) <= grid.half_width) & (np.abs(k.imag) <= grid.half_width)
            vals = np.where(inside, interpolate(self.samples.values, grid, k, order=1), 0.0)
        return np.where(r < self.R, vals, 0.0)


@dataclass(frozen=True, eq=False)
class PivotData:
    """``h_+``, ``h_-`` and ``nu`` at a fixed pivot ``z0`` over a k-grid."""

    z0: complex
    grid: Grid2D
    hplus: np.ndarray = field(repr=False)
    hminus: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    R: float

    def negated(self) -> "PivotData":
        """Pivot data for ``-mu``: ``h_-`` and ``nu`` change sign."""
        return replace(self, hminus=-self.hminus, nu=-self.nu)


def _tau_from_pair(sol_plus, sol_minus) -> complex:
    h2 = sol_plus.grid.step**2
    return complex(np.conj(h2 / (2.0 * np.pi) * np.sum(sol_plus.rho.values - sol_minus.rho.values)))


def _solve_pair(mu: BeltramiCoefficient, k: complex, tol: float):
    plus = solve_cgo(mu, k, tol)
    minus = solve_cgo(-mu, k, tol)
    for sol in (plus, minus):
        if not sol.converged:
            raise SolverError(f"CGO solve did not converge at k={k}: {sol.report.reason}", sol.report)
    return plus, minus


def tau_at(mu: BeltramiCoefficient, k: complex, tol: float = DEFAULT_TOL) -> complex:
    """Scattering transform at one ``k``."""
    if mu.is_zero():
        return 0j
    return _tau_from_pair(*_solve_pair(mu, complex(k), tol))


def t_from_tau(k, tau):
    """``t(k) = -4 pi i conj(k) tau(k)``."""
    return -4j * np.pi * np.conj(k) * np.asarray(tau)


def _tau_chunk(args) -> list[complex]:
    mu, ks, tol = args
    return [tau_at(mu, k, tol) for k in ks]


def _tau_values(mu: BeltramiCoefficient, ks, tol: float, workers: int, chunk: int = 8) -> np.ndarray:
    ks = [complex(k) for k in ks]
    tasks = [(mu, c, tol) for c in chunked(ks, chunk)]
    results = parallel_sweep(_tau_chunk, tasks, workers)
    return np.array([v for part in results for v in part], dtype=np.complex128)


def radial_transform(
    phantom: Phantom | str,
    R_max: float,
    step: float,
    m_z: int,
    tol: float = DEFAULT_TOL,
    *,
    s_z: float = DEFAULT_SZ,
    workers: int = 1,
) -> ScatteringData:
    """``tau`` on the ray ``{0, step, ..., R_max}`` for a radial phantom."""
    if isinstance(phantom, str):
        phantom = get_phantom(phantom)
    if not phantom.radial:
        raise ValueError(f"phantom {phantom.id!r} is not radial")
    grid = make_grid(m_z, s_z)
    mu = BeltramiCoefficient.from_phantom(phantom, grid)
    ray = RadialRay.uniform(R_max, step)
    values = _tau_values(mu, ray.radii, tol, workers)
    prov = {"phantom": phantom.id, "m_z": m_z, "s_z": s_z, "tol": tol, "step": step}
    return ScatteringData(RadialRay(ray.radii, values), float(R_max), prov)


def tau_grid(
    mu: BeltramiCoefficient,
    k_grid: Grid2D,
    R: float,
    tol: float = DEFAULT_TOL,
    *,
    workers: int = 1,
    provenance: dict | None = None,
) -> ScatteringData:
    """``tau`` at every k-grid point with ``|k| < R``; zero elsewhere."""
    if k_grid.half_width < R:
        raise ValueError("k-grid half-width must be >= R")
    mask = k_grid.disc_mask(R)
    ks = k_grid.points[mask]
    failures = []
    try:
        vals = _tau_values(mu, ks, tol, workers)
    except SolverError as err:
        failures.append(str(err))
        raise SolverError("tau_grid failed: " + "; ".join(failures)) from err
    out = np.zeros(k_grid.shape, dtype=np.complex128)
    out[mask] = vals
    prov = {"m_z": mu.grid.size_param, "s_z": mu.grid.half_width, "tol": tol, "m_k": k_grid.size_param}
    prov.update(provenance or {})
    return ScatteringData(ComplexField(k_grid, out), float(R), prov)


def truncate(data: ScatteringData, R_new: float) -> ScatteringData:
    """Zero every sample with ``|k| >= R_new``."""
    if R_new > data.R:
        raise ValueError(f"cannot truncate data with R={data.R} at larger radius {R_new}")
    if data.is_radial:
        ray = data.samples
        vals = np.where(ray.radii < R_new, ray.values, 0.0)
        samples = RadialRay(ray.radii, vals)
    else:
        field_ = data.samples
        vals = np.where(np.abs(field_.grid.points) < R_new, field_.values, 0.0)
        samples = ComplexField(field_.grid, vals)
    return ScatteringData(samples, float(R_new), dict(data.provenance))


def laurent_coefficient(values: np.ndarray, r0: float, order: int = 1) -> complex:
    """
    Coefficient ``a_n`` of ``1/z**n`` from samples on the circle ``|z| = r0``
    taken at the equispaced nodes ``r0 * exp(2 pi i j / N)`` (trapezoid rule).
    """
    values = np.asarray(values)
    nodes = r0 * np.exp(2j * np.pi * np.arange(values.size) / values.size)
    return complex(np.mean(values * nodes**order))


def shortcut_tau_from_traces(
    mu: BeltramiCoefficient,
    k: complex,
    tol: float = DEFAULT_TOL,
    *,
    r0: float = 1.5,
    nodes: int = 256,
) -> complex:
    """
    ``tau(k) = (conj(a1+) - conj(a1-)) / 2`` with ``a1`` the ``1/z``
    coefficients of ``1 + omega`` outside the unit disc, read off a circle of
    radius ``r0``.
    """
    if not 1.0 < r0 < mu.grid.half_width:
        raise ValueError(f"r0 must lie in (1, {mu.grid.half_width}), got {r0}")
    if mu.is_zero():
        return 0j
    plus, minus = _solve_pair(mu, complex(k), tol)
    circle = r0 * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    a_plus = laurent_coefficient(plus.omega_at(circle), r0)
    a_minus = laurent_coefficient(minus.omega_at(circle), r0)
    return 0.5 * (np.conj(a_plus) - np.conj(a_minus))


def _pivot_chunk(args):
    mu, z0, ks, tol = args
    out = []
    for k in ks:
        plus, minus = _solve_pair(mu, k, tol)
        out.append((complex(plus.f_at(z0)[()]), complex(minus.f_at(z0)[()])))
    return out


def pivot_data(
    mu: BeltramiCoefficient,
    z0: complex,
    k_grid: Grid2D,
    R: float,
    tol: float = DEFAULT_TOL,
    *,
    workers: int = 1,
) -> PivotData:
    """
    ``h_+(z0, k)``, ``h_-(z0, k)`` and ``nu(k) = i h_- / h_+`` for ``|k| < R``;
    ``nu = 0`` elsewhere.
    """
    z0 = complex(z0)
    if abs(z0) <= 1.0:
        raise ValueError("pivot point must lie outside the closed unit disc")
    hw = mu.grid.half_width
    if abs(z0.real) >= hw or abs(z0.imag) >= hw:
        raise ValueError("pivot point must lie inside the z-grid square")
    mask = k_grid.disc_mask(R)
    ks = k_grid.points[mask]
    hplus = np.zeros(k_grid.shape, dtype=np.complex128)
    hminus = np.zeros(k_grid.shape, dtype=np.complex128)
    if mu.is_zero():
        f_pairs = [(np.exp(1j * k * z0),) * 2 for k in ks]
    else:
        tasks = [(mu, z0, c, tol) for c in chunked([complex(k) for k in ks], 8)]
        f_pairs = [p for part in parallel_sweep(_pivot_chunk, tasks, workers) for p in part]
    f_plus = np.array([p[0] for p in f_pairs], dtype=np.complex128)
    f_minus = np.array([p[1] for p in f_pairs], dtype=np.complex128)
    hplus[mask] = 0.5 * (f_plus + f_minus)
    hminus[mask] = 0.5j * (np.conj(f_plus) - np.conj(f_minus))
    bad = mask & (hplus == 0)
    if np.any(bad):
        raise ZeroDivisionError(f"h_+(z0, k) vanishes at k = {k_grid.points[bad][0]}")
    nu = np.zeros(k_grid.shape, dtype=np.complex128)
    nu[mask] = 1j * hminus[mask] / hplus[mask]
    return PivotData(z0, k_grid, hplus, hminus, nu, float(R))
