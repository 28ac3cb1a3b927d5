"""
Low-pass transport matrix reconstruction.

CGO values known at a pivot ``z0`` outside the unit disc are carried to a
point ``z`` inside it by the truncated frequency-domain Beltrami equation

    dbar_k alpha = nu(k) conj(d_k alpha),   nu = i h_-(z0, .) / h_+(z0, .) on |k| < R,

whose solutions ``alpha ~ exp(ik(z - z0))`` define a 2x2 real transport
matrix. The transported ``u1, u2`` give ``f_mu(z, k0)``, and
``mu = dbar f / conj(d f)`` closes the loop.

The k-equations are solved with :func:`nlft.beltrami.solve_cgo`, variables
swapped: the field lives on a k-torus of half-width ``2.15 R`` and the
oscillation parameter is ``z - z0``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .beltrami import CgoSolution, solve_cgo
from .grid import Grid2D, centered_differences, interpolate, make_grid
from .krylov import SolverError
from .nft import PivotData, pivot_data
from .parallel import chunked, parallel_sweep
from .phantom import DEFAULT_PIVOTS, BeltramiCoefficient, Phantom, get_phantom, sigma_from_mu

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
MU_CLAMP = 1.0 - 1e-9
DENOM_FLOOR = 1e-12
# torus half-width over R: 2R + 3 eps with eps = 0.05 R
TORUS_FACTOR = 2.15


def frequency_grid(R: float, m_k: int) -> Grid2D:
    """
    k-torus for cutoff ``R``: half-width ``2.15 R`` with ``2**(m_k + 1)``
    points per axis, so the step is close to ``R / 2**(m_k - 1)``.
    """
    return make_grid(m_k + 1, TORUS_FACTOR * R)


@dataclass(eq=False)
class TruncatedCgo:
    """``exp(ik zeta) * factor(k)`` on the k-torus, ``factor`` bounded."""

    zeta: complex
    grid: Grid2D
    factor: np.ndarray = field(repr=False)

    @property
    def values(self) -> np.ndarray:
        return np.exp(1j * self.zeta * self.grid.points) * self.factor

    def at(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.complex128)
        return np.exp(1j * self.zeta * k) * interpolate(self.factor, self.grid, k, order=3)

    def at_zero(self) -> complex:
        o = self.grid.origin_index
        return complex(self.factor[o, o])

    def __mul__(self, c: complex) -> "TruncatedCgo":
        return TruncatedCgo(self.zeta, self.grid, self.factor * complex(c))

    __rmul__ = __mul__


@dataclass(eq=False)
class FreqCgoPair:
    z: complex
    z0: complex
    eta1: CgoSolution = field(repr=False)
    eta2: CgoSolution = field(repr=False)

    @property
    def converged(self) -> bool:
        return self.eta1.converged and self.eta2.converged

    @property
    def iterations(self) -> int:
        return self.eta1.iterations + self.eta2.iterations

    def field(self, which: int) -> TruncatedCgo:
        sol = self.eta1 if which == 1 else self.eta2
        return TruncatedCgo(self.z - self.z0, sol.grid, sol.const + sol.omega.values)


def _nu_coefficient(pivot: PivotData) -> BeltramiCoefficient:
    try:
        return BeltramiCoefficient(pivot.grid, pivot.nu)
    except ValueError as err:
        raise SolverError(f"pivot coefficient is not a Beltrami coefficient: {err}") from err


def solve_freq_cgo(
    pivot: PivotData,
    z: complex,
    tol: float = DEFAULT_TOL,
    *,
    warm: tuple[np.ndarray, np.ndarray] | None = None,
    nu: BeltramiCoefficient | None = None,
) -> FreqCgoPair:
    """
    ``eta1 ~ exp(ik(z - z0))`` and ``eta2 ~ i exp(ik(z - z0))`` solving the
    truncated k-plane Beltrami equation. ``warm`` holds initial guesses for
    the two remainders.
    """
    z = complex(z)
    if z == pivot.z0:
        raise ValueError("z must differ from the pivot point")
    nu = _nu_coefficient(pivot) if nu is None else nu
    zeta = z - pivot.z0
    x1, x2 = warm if warm is not None else (None, None)
    eta1 = solve_cgo(nu, zeta, tol, const=1.0, support_radius=pivot.R, x0=x1)
    eta2 = solve_cgo(nu, zeta, tol, const=1j, support_radius=pivot.R, x0=x2)
    pair = FreqCgoPair(z, pivot.z0, eta1, eta2)
    if not pair.converged:
        bad = eta1 if not eta1.converged else eta2
        raise SolverError(f"frequency solve failed at z={z}: {bad.report.reason}", bad.report)
    return pair


def normalize_alpha(pair: FreqCgoPair) -> TruncatedCgo:
    """Real combination ``A eta1 + B eta2`` equal to 1 at ``k = 0``."""
    e1, e2 = pair.field(1), pair.field(2)
    return _normalize(e1, e2)


def _normalize(e1: TruncatedCgo, e2: TruncatedCgo) -> TruncatedCgo:
    a, b = e1.at_zero(), e2.at_zero()
    # the factor and the field coincide at k = 0
    mat = np.array([[a.real, b.real], [a.imag, b.imag]])
    if abs(np.linalg.det(mat)) < 1e-14 * max(1.0, np.abs(mat).max() ** 2):
        raise SolverError(f"eta1(0) = {a} and eta2(0) = {b} are real-linearly dependent")
    A, B = np.linalg.solve(mat, [1.0, 0.0])
    out = TruncatedCgo(e1.zeta, e1.grid, A * e1.factor + B * e2.factor)
    o = out.grid.origin_index
    out.factor[o, o] = 1.0  # removes the last-bit rounding of the 2x2 solve
    return out


def beta_from_alpha(alpha_minus_mu: TruncatedCgo) -> TruncatedCgo:
    """``beta_mu = i alpha_{-mu}``."""
    return 1j * alpha_minus_mu


@dataclass(frozen=True)
class TransportMatrix:
    z: complex
    z0: complex
    k0: complex
    a1: float
    a2: float
    b1: float
    b2: float

    @classmethod
    def from_values(cls, z, z0, k0, alpha: complex, beta: complex) -> "TransportMatrix":
        alpha, beta = complex(alpha), complex(beta)
        return cls(complex(z), complex(z0), complex(k0), alpha.real, alpha.imag, beta.real, beta.imag)

    @classmethod
    def from_fields(cls, z, z0, k0, alpha: TruncatedCgo, beta: TruncatedCgo) -> "TransportMatrix":
        return cls.from_values(z, z0, k0, alpha.at(k0)[()], beta.at(k0)[()])

    def as_array(self) -> np.ndarray:
        return np.array([[self.a1, self.a2], [self.b1, self.b2]])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_array())))


def transport(matrix: TransportMatrix, u1_at_z0, u2_at_z0):
    """``(u1(z), u2(z)) = T (u1(z0), u2(z0))`` with real matrix entries."""
    u1 = matrix.a1 * u1_at_z0 + matrix.a2 * u2_at_z0
    u2 = matrix.b1 * u1_at_z0 + matrix.b2 * u2_at_z0
    return u1, u2


def u_from_f(f_mu, f_minus_mu):
    """``u1 = Re f_mu + i Im f_-mu``, ``u2 = -Im f_mu + i Re f_-mu``."""
    f_mu, f_minus_mu = np.asarray(f_mu), np.asarray(f_minus_mu)
    return f_mu.real + 1j * f_minus_mu.imag, -f_mu.imag + 1j * f_minus_mu.real


def recover_f_fields(u1, u2):
    """Invert :func:`u_from_f` through ``h_+`` and ``h_-``."""
    u1, u2 = np.asarray(u1), np.asarray(u2)
    hplus = 0.5 * (u1 - 1j * u2)
    hminus = 0.5 * (1j * u1 - u2)
    return hplus + 1j * np.conj(hminus), hplus - 1j * np.conj(hminus)


@dataclass(eq=False)
class MuEstimate:
    mu: np.ndarray = field(repr=False)
    flagged: np.ndarray = field(repr=False)
    clamped: int = 0


def mu_via_differentiation(
    f_values: np.ndarray,
    mask: np.ndarray,
    grid: Grid2D,
    k0: complex,
    *,
    order: int = 2,
) -> MuEstimate:
    """
    ``mu = dbar f / conj(d f)`` on the masked points of ``grid``.

    The known factor is split off, ``f = exp(i k0 z) g``, and only ``g`` is
    differenced: ``dbar f = exp(i k0 z) dbar g`` and
    ``d f = exp(i k0 z) (i k0 g + d g)``. Points with ``|d f| < 1e-12`` or no
    stencil are flagged and take the nearest unflagged value. The result is
    clamped to ``|mu| <= 1 - 1e-9``.
    """
    k0 = complex(k0)
    z = grid.points
    e = np.exp(1j * k0 * z)
    g = np.where(mask, np.asarray(f_values) / e, 0.0)
    dbar_g, d_g = centered_differences(g, mask, grid.step, order=order)
    num = e * dbar_g
    den = np.conj(e * (1j * k0 * g + d_g))
    flagged = mask & (~np.isfinite(num) | ~np.isfinite(den) | (np.abs(den) < DENOM_FLOOR))
    mu = np.zeros(grid.shape, dtype=np.complex128)
    good = mask & ~flagged
    mu[good] = num[good] / den[good]
    if flagged.any():
        if not good.any():
            raise SolverError("no point admits a derivative quotient")
        _, (ix, iy) = ndimage.distance_transform_edt(~good, return_indices=True)
        mu[flagged] = mu[ix[flagged], iy[flagged]]
    mag = np.abs(mu)
    over = mag > MU_CLAMP
    mu[over] *= MU_CLAMP / mag[over]
    return MuEstimate(mu, flagged, int(over.sum()))


@dataclass(eq=False)
class TransportReconstruction:
    """Recovered ``sigma`` and transported CGO fields on the masked z-grid points."""

    grid: Grid2D
    mask: np.ndarray = field(repr=False)
    sigma_field: np.ndarray = field(repr=False)
    f_mu_field: np.ndarray = field(repr=False)
    f_minus_mu_field: np.ndarray = field(repr=False)
    flagged: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def z_points(self) -> np.ndarray:
        return self.grid.points[self.mask]

    @property
    def sigma(self) -> np.ndarray:
        return self.sigma_field[self.mask]


def _transport_chunk(args):
    pivot_p, pivot_m, zs, k0, u0, tol = args
    nu_p, nu_m = _nu_coefficient(pivot_p), _nu_coefficient(pivot_m)
    out = []
    warm_p = warm_m = None
    for z in zs:
        pp = solve_freq_cgo(pivot_p, z, tol, warm=warm_p, nu=nu_p)
        pm = solve_freq_cgo(pivot_m, z, tol, warm=warm_m, nu=nu_m)
        warm_p = (pp.eta1.omega.values, pp.eta2.omega.values)
        warm_m = (pm.eta1.omega.values, pm.eta2.omega.values)
        alpha = normalize_alpha(pp)
        beta = beta_from_alpha(normalize_alpha(pm))
        T = TransportMatrix.from_fields(z, pivot_p.z0, k0, alpha, beta)
        if not T.is_finite():
            raise SolverError(f"non-finite transport matrix at z={z}")
        u1, u2 = transport(T, *u0)
        out.append((u1, u2, pp.iterations + pm.iterations))
    return out


def _solver_grid_for(out_grid: Grid2D, min_half_width: float = 2.1) -> Grid2D:
    """Same step as ``out_grid`` but wide enough for the CGO solver; output points stay grid points."""
    m, s = out_grid.size_param, out_grid.half_width
    while s < min_half_width:
        m, s = m + 1, 2 * s
    return make_grid(m, s)


def transported_f(
    mu: BeltramiCoefficient,
    z0: complex,
    k0: complex,
    R: float,
    m_k: int,
    z_points,
    tol: float = DEFAULT_TOL,
    *,
    forward_tol: float = 1e-8,
    workers: int = 1,
    chunk: int = 32,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Transported ``f_mu(z, k0)`` and ``f_-mu(z, k0)`` at ``z_points``."""
    z0, k0 = complex(z0), complex(k0)
    if k0 == 0:
        raise ValueError("k0 must be nonzero")
    z_points = np.asarray(z_points, dtype=np.complex128).ravel()
    kgrid = frequency_grid(R, m_k)
    t0 = time.perf_counter()
    pivot_p = pivot_data(mu, z0, kgrid, R, forward_tol, workers=workers)
    pivot_m = pivot_p.negated()
    t1 = time.perf_counter()
    fp = solve_cgo(mu, k0, forward_tol)
    fm = solve_cgo(-mu, k0, forward_tol)
    u0 = u_from_f(fp.f_at(z0)[()], fm.f_at(z0)[()])
    tasks = [(pivot_p, pivot_m, c, k0, u0, tol) for c in chunked(list(z_points), chunk)]
    res = [r for part in parallel_sweep(_transport_chunk, tasks, workers) for r in part]
    t2 = time.perf_counter()
    u1 = np.array([r[0] for r in res], dtype=np.complex128)
    u2 = np.array([r[1] for r in res], dtype=np.complex128)
    f_mu, f_minus = recover_f_fields(u1, u2)
    diag = {
        "R": float(R),
        "m_k": m_k,
        "s_k": kgrid.half_width,
        "h_k": kgrid.step,
        "z0": [z0.real, z0.imag],
        "k0": [k0.real, k0.imag],
        "tol": tol,
        "max_abs_nu": float(np.abs(pivot_p.nu).max()),
        "max_freq_iterations": int(max((r[2] for r in res), default=0)),
        "pivot_time": t1 - t0,
        "transport_time": t2 - t1,
    }
    return f_mu, f_minus, diag


def _prepare(phantom, z0, m_z, s_z, solver_m_z, solver_s_z):
    if isinstance(phantom, str):
        phantom = get_phantom(phantom)
    if z0 is None:
        z0 = DEFAULT_PIVOTS.get(phantom.id)
        if z0 is None:
            raise ValueError(f"no default pivot for phantom {phantom.id!r}")
    z0 = complex(z0)
    if abs(z0) <= 1:
        raise ValueError("pivot point must lie outside the closed unit disc")
    out_grid = make_grid(m_z, s_z)
    mask = out_grid.disc_mask(1.0)
    mu = BeltramiCoefficient.from_phantom(phantom, make_grid(solver_m_z, solver_s_z))
    return phantom, z0, out_grid, mask, mu


def reconstruct_transport(
    phantom: Phantom | str,
    z0: complex | None = None,
    k0: complex = 1.0,
    R: float = 10.0,
    m_k: int = 7,
    m_z: int = 7,
    tol: float = DEFAULT_TOL,
    *,
    s_z: float = 1.5,
    solver_m_z: int = 7,
    solver_s_z: float = 2.1,
    order: int = 2,
    workers: int = 1,
) -> TransportReconstruction:
    """
    End-to-end transport reconstruction on the points of the
    ``(m_z, s_z)`` grid inside the unit disc. Pivot CGO values come from
    direct solves on a ``(solver_m_z, solver_s_z)`` z-grid.
    """
    phantom, z0, out_grid, mask, mu = _prepare(phantom, z0, m_z, s_z, solver_m_z, solver_s_z)
    start = time.perf_counter()
    f_mu, f_minus, diag = transported_f(mu, z0, k0, R, m_k, out_grid.points[mask], tol, workers=workers)
    f_mu_field = np.full(out_grid.shape, np.nan + 0j)
    f_minus_field = np.full(out_grid.shape, np.nan + 0j)
    f_mu_field[mask] = f_mu
    f_minus_field[mask] = f_minus
    est = mu_via_differentiation(f_mu_field, mask, out_grid, k0, order=order)
    sigma = np.full(out_grid.shape, np.nan + 0j)
    sigma[mask] = sigma_from_mu(est.mu[mask])
    diag.update(
        {
            "method": "transport",
            "phantom": phantom.id,
            "m_z": m_z,
            "s_z": s_z,
            "order": order,
            "flagged_fraction": float(est.flagged[mask].mean()) if mask.any() else 0.0,
            "clamped": est.clamped,
            "wall_time": time.perf_counter() - start,
        }
    )
    return TransportReconstruction(out_grid, mask, sigma, f_mu_field, f_minus_field, est.flagged, diag)


def compare_transported_cgo(
    phantom: Phantom | str,
    z0: complex | None = None,
    k0: complex = 1.0,
    R: float = 20.0,
    m_k: int = 7,
    m_z: int = 7,
    tol: float = DEFAULT_TOL,
    *,
    s_z: float = 1.5,
    solver_m_z: int = 7,
    solver_s_z: float = 2.1,
    workers: int = 1,
) -> dict:
    """
    Relative sup and l2 errors (percent) between the directly computed
    ``f_mu(., k0)`` and its transported approximation on the disc points of
    the ``(m_z, s_z)`` grid. Returns the fields as well.
    """
    from .metrics import relative_errors

    phantom, z0, out_grid, mask, mu = _prepare(phantom, z0, m_z, s_z, solver_m_z, solver_s_z)
    zs = out_grid.points[mask]
    f_tilde, _, diag = transported_f(mu, z0, k0, R, m_k, zs, tol, workers=workers)
    # the reference solve uses a grid containing every output point
    ref_grid = _solver_grid_for(out_grid)
    mu_ref = BeltramiCoefficient.from_phantom(phantom, ref_grid)
    ref = solve_cgo(mu_ref, complex(k0), 1e-8)
    if not ref.converged:
        raise SolverError("reference CGO solve failed", ref.report)
    idx = np.rint((zs.real + ref_grid.half_width) / ref_grid.step).astype(int)
    idy = np.rint((zs.imag + ref_grid.half_width) / ref_grid.step).astype(int)
    f_true = ref.f_values()[idx, idy]
    sup, sqr = relative_errors(f_tilde, f_true)
    diag.update({"sup": sup, "sqr": sqr})
    return {"sup": sup, "sqr": sqr, "z": zs, "f_true": f_true, "f_transported": f_tilde, "diagnostics": diag}


def half_disc_errors(z_points, error, z0: complex) -> tuple[float, float]:
    """
    Mean of ``error`` over the half of the disc facing ``z0`` and over the
    opposite half (split by the line through 0 perpendicular to ``z0``).
    """
    z_points = np.asarray(z_points)
    error = np.asarray(error)
    side = (z_points * np.conj(complex(z0))).real
    near, far = side > 0, side < 0
    return float(error[near].mean()), float(error[far].mean())
