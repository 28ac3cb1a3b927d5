"""
Square power-of-two lattices, complex fields on them, and the FFT machinery
(cyclic convolution, Fourier-multiplier derivatives, interpolation) shared by
every solver in the package.

Layout: a field on a ``Grid2D`` is an ``(n, n)`` complex array indexed
``[j1, j2]`` with ``x = axis[j1]`` and ``y = axis[j2]``; the point is
``x + 1j*y``. ``axis[n // 2] == 0`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy import ndimage


@dataclass(frozen=True)
class Grid2D:
    """
    Origin-centred lattice of ``2**m x 2**m`` points covering ``[-s, s)^2``.

    Parameters
    ----------
    size_param : int
        ``m``; the grid has ``2**m`` points per axis.
    half_width : float
        ``s``; the step is ``s / 2**(m-1)``.
    """

    size_param: int
    half_width: float

    def __post_init__(self) -> None:
        if int(self.size_param) != self.size_param or self.size_param < 1:
            raise ValueError(f"size_param must be an integer >= 1, got {self.size_param!r}")
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")
        object.__setattr__(self, "size_param", int(self.size_param))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def n(self) -> int:
        return 2**self.size_param

    @property
    def step(self) -> float:
        return self.half_width / 2 ** (self.size_param - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def origin_index(self) -> int:
        return self.n // 2

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.step * np.arange(self.n)

    @cached_property
    def points(self) -> np.ndarray:
        """Complex coordinates of every grid point, shape ``(n, n)``."""
        x, y = np.meshgrid(self.axis, self.axis, indexing="ij")
        return x + 1j * y

    @cached_property
    def frequencies(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular frequencies ``(xi1, xi2)`` of the torus of period ``2s``, fft order."""
        xi = 2.0 * np.pi * sfft.fftfreq(self.n, d=self.step)
        return np.meshgrid(xi, xi, indexing="ij")

    @cached_property
    def dbar_multiplier(self) -> np.ndarray:
        # Nyquist row/column zeroed so the multiplier is odd on the lattice.
        xi1, xi2 = self.frequencies
        mult = 0.5j * (xi1 + 1j * xi2)
        nyq = self.n // 2
        mult[nyq, :] = 0
        mult[:, nyq] = 0
        return mult

    @cached_property
    def d_multiplier(self) -> np.ndarray:
        xi1, xi2 = self.frequencies
        mult = 0.5j * (xi1 - 1j * xi2)
        nyq = self.n // 2
        mult[nyq, :] = 0
        mult[:, nyq] = 0
        return mult

    def index_of(self, point: complex) -> tuple[int, int]:
        """Indices of a point that lies exactly on the grid (to rounding)."""
        j1 = (point.real + self.half_width) / self.step
        j2 = (point.imag + self.half_width) / self.step
        i1, i2 = int(round(j1)), int(round(j2))
        if abs(j1 - i1) > 1e-9 or abs(j2 - i2) > 1e-9 or not (0 <= i1 < self.n and 0 <= i2 < self.n):
            raise ValueError(f"{point!r} is not a point of {self}")
        return i1, i2

    def disc_mask(self, radius: float, *, closed: bool = False) -> np.ndarray:
        r = np.abs(self.points)
        return r <= radius if closed else r < radius


def make_grid(size_param: int, half_width: float) -> Grid2D:
    """Build a :class:`Grid2D`; raises ``ValueError`` on invalid parameters."""
    return Grid2D(size_param, half_width)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples attached to a grid."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid2D, func) -> "ComplexField":
        return cls(grid, func(grid.points))

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ComplexField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values))


@dataclass(frozen=True)
class RadialRay:
    """Samples on ``{0, h, 2h, ...}`` along the positive real axis."""

    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        radii = np.asarray(self.radii, dtype=float)
        values = np.asarray(self.values, dtype=np.complex128)
        if radii.ndim != 1 or radii.shape != values.shape:
            raise ValueError("radii and values must be 1-D arrays of equal length")
        if radii.size == 0 or radii[0] != 0.0:
            raise ValueError("a radial ray starts at radius 0")
        if radii.size > 1:
            steps = np.diff(radii)
            if np.any(np.abs(steps - steps[0]) > 1e-9 * max(1.0, radii[-1])) or steps[0] <= 0:
                raise ValueError("radii must be uniformly spaced and ascending")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)

    @property
    def step(self) -> float:
        return float(self.radii[1] - self.radii[0]) if self.radii.size > 1 else 0.0

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    @classmethod
    def uniform(cls, r_max: float, step: float, values=None) -> "RadialRay":
        count = int(round(r_max / step)) + 1
        radii = step * np.arange(count)
        if values is None:
            values = np.zeros(count, dtype=np.complex128)
        return cls(radii, values)

    def __call__(self, r) -> np.ndarray:
        """Linear interpolation in radius; zero beyond the last sample."""
        r = np.asarray(r, dtype=float)
        re = np.interp(r, self.radii, self.values.real, right=0.0)
        im = np.interp(r, self.radii, self.values.imag, right=0.0)
        return re + 1j * im


def _check_same_grid(*fields: ComplexField) -> Grid2D:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


def kernel_transform(kernel: np.ndarray) -> np.ndarray:
    """FFT of a kernel sampled with its origin at index ``n // 2``."""
    return sfft.fft2(sfft.ifftshift(kernel))


def convolve_array(kernel_hat: np.ndarray, values: np.ndarray, step: float) -> np.ndarray:
    return step**2 * sfft.ifft2(kernel_hat * sfft.fft2(values))


def periodic_convolve(kernel: ComplexField, field: ComplexField) -> ComplexField:
    """
    Cyclic convolution on the torus, weighted by the cell area ``h**2``:

    ``out[i] = h**2 * sum_j kernel(x_i - x_j) * field[j]``.
    """
    grid = _check_same_grid(kernel, field)
    out = convolve_array(kernel_transform(kernel.values), field.values, grid.step)
    return ComplexField(grid, out)


def apply_multiplier(values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    return sfft.ifft2(multiplier * sfft.fft2(values))


def dbar_derivative(field: ComplexField) -> ComplexField:
    """Spectral ``(d/dx + i d/dy) / 2`` of a periodic field."""
    return ComplexField(field.grid, apply_multiplier(field.values, field.grid.dbar_multiplier))


def d_derivative(field: ComplexField) -> ComplexField:
    """Spectral ``(d/dx - i d/dy) / 2`` of a periodic field."""
    return ComplexField(field.grid, apply_multiplier(field.values, field.grid.d_multiplier))


def plane_wave(k: complex, z) -> np.ndarray:
    """``e_k(z) = exp(i(kz + conj(k z)))``, a unimodular oscillation."""
    return np.exp(2j * np.real(k * np.asarray(z)))


def smooth_step(u) -> np.ndarray:
    """C-infinity transition from 1 (``u <= 0``) to 0 (``u >= 1``)."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u < 1.0, np.exp(-1.0 / np.where(u < 1.0, 1.0 - u, 1.0)), 0.0)
        b = np.where(u > 0.0, np.exp(-1.0 / np.where(u > 0.0, u, 1.0)), 0.0)
    return a / (a + b)


def cutoff(radius, inner: float, width: float) -> np.ndarray:
    """Radial bump: 1 for ``r < inner``, 0 for ``r >= inner + width``, smooth between."""
    return smooth_step((np.asarray(radius, dtype=float) - inner) / width)


def cauchy_kernel(grid: Grid2D, support_radius: float) -> np.ndarray:
    """
    Periodised Cauchy kernel ``eta(z) / (pi z)`` for densities supported in the
    disc of radius ``support_radius``; the origin sample is 0.

    With ``eps = (s - 2r) / 3`` the cutoff equals 1 on ``|z| < 2r + eps`` and
    vanishes for ``|z| >= 2r + 2eps``, so the torus convolution reproduces the
    plane Cauchy transform at every point within ``r + eps`` of the origin.
    """
    eps = (grid.half_width - 2.0 * support_radius) / 3.0
    if eps <= 0:
        raise ValueError(
            f"torus half-width {grid.half_width} too small for support radius {support_radius}"
        )
    return cauchy_kernel_eps(grid, 2.0 * support_radius + eps, eps)


def cauchy_kernel_eps(grid: Grid2D, inner: float, eps: float) -> np.ndarray:
    pts = grid.points
    eta = cutoff(np.abs(pts), inner, eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = eta / (np.pi * pts)
    kern[grid.origin_index, grid.origin_index] = 0.0
    return kern


def interpolate(values: np.ndarray, grid: Grid2D, points, order: int = 1) -> np.ndarray:
    """Interpolate a periodic grid array at arbitrary complex points."""
    points = np.asarray(points, dtype=np.complex128)
    coords = np.stack(
        [(points.real + grid.half_width) / grid.step, (points.imag + grid.half_width) / grid.step]
    ).reshape(2, -1)
    re = ndimage.map_coordinates(values.real, coords, order=order, mode="grid-wrap")
    im = ndimage.map_coordinates(values.imag, coords, order=order, mode="grid-wrap")
    return (re + 1j * im).reshape(points.shape)


def centered_differences(
    values: np.ndarray, mask: np.ndarray, step: float, order: int = 2
) -> tuple[np.ndarray, np.ndarray]:
    """
    ``(dbar f, d f)`` by finite differences on the points where ``mask`` is
    true.

    ``order=2`` uses the three-point centred stencil, one-sided three-point
    stencils where a neighbour is missing and a two-point stencil where only
    one neighbour exists on that side. ``order=4`` switches to the five-point
    centred stencil wherever both neighbours on each side are available and
    falls back to the second-order rules elsewhere.

    Returns NaN at points where an axis has no usable stencil.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    dx = _axis_difference(values, mask, step, axis=0, order=order)
    dy = _axis_difference(values, mask, step, axis=1, order=order)
    return 0.5 * (dx + 1j * dy), 0.5 * (dx - 1j * dy)


def _axis_difference(values: np.ndarray, mask: np.ndarray, step: float, axis: int, order: int = 2) -> np.ndarray:
    v = np.moveaxis(values, axis, 0)
    m = np.moveaxis(mask, axis, 0)
    out = np.full(v.shape, np.nan + 0j)

    def shifted(arr, s, fill):
        res = np.full_like(arr, fill)
        if s > 0:
            res[:-s] = arr[s:]
        else:
            res[-s:] = arr[:s]
        return res

    vp1, vm1 = shifted(v, 1, 0), shifted(v, -1, 0)
    vp2, vm2 = shifted(v, 2, 0), shifted(v, -2, 0)
    mp1, mm1 = shifted(m, 1, False), shifted(m, -1, False)
    mp2, mm2 = shifted(m, 2, False), shifted(m, -2, False)

    central = m & mp1 & mm1
    fwd3 = m & ~mm1 & mp1 & mp2
    bwd3 = m & ~mp1 & mm1 & mm2
    fwd2 = m & ~mm1 & mp1 & ~mp2
    bwd2 = m & ~mp1 & mm1 & ~mm2

    out[central] = (vp1 - vm1)[central] / (2 * step)
    out[fwd3] = (-3 * v + 4 * vp1 - vp2)[fwd3] / (2 * step)
    out[bwd3] = (3 * v - 4 * vm1 + vm2)[bwd3] / (2 * step)
    out[fwd2] = (vp1 - v)[fwd2] / step
    out[bwd2] = (v - vm1)[bwd2] / step
    if order == 4:
        wide = central & mp2 & mm2
        out[wide] = (8 * (vp1 - vm1) - (vp2 - vm2))[wide] / (12 * step)
    return np.moveaxis(out, 0, axis)
