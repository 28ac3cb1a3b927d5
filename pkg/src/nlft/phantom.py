"""
Piecewise-constant test conductivities and the conductivity <-> Beltrami
coefficient maps.

All shipped phantoms equal 1 outside the unit disc. Jump circles use the
half-open convention: the inner region is strict (``|z| < r``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import ComplexField, Grid2D


@dataclass(frozen=True)
class Phantom:
    id: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    radial: bool
    support_note: str
    contrast: float
    bound: float
    conj_symmetric: bool = False

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128)
        return np.asarray(self.func(z), dtype=float)


def _sigma1(z):
    return np.where(np.abs(z) < 0.5, 2.0, 1.0)


def _sigma2(z):
    r = np.abs(z)
    inside = (r < 0.1) | ((r > 0.2) & (r < 0.3)) | ((r > 0.4) & (r < 0.5))
    return np.where(inside, 2.0, 1.0)


def checkerboard(tiles: int, low: float, high: float, clip_radius: float = 0.9):
    """Alternating tiles on ``[-1, 1]^2``; tile (0, 0) at the lower-left corner is ``high``."""
    width = 2.0 / tiles

    def func(z):
        i = np.clip(np.floor((z.real + 1.0) / width), 0, tiles - 1)
        j = np.clip(np.floor((z.imag + 1.0) / width), 0, tiles - 1)
        vals = np.where((i + j) % 2 == 0, high, low)
        return np.where(np.abs(z) < clip_radius, vals, 1.0)

    return func


def _unit(z):
    return np.ones(np.shape(z))


PHANTOMS: dict[str, Phantom] = {
    "unit": Phantom("unit", _unit, True, "no jumps", 0.0, 1.0, True),
    "sigma1": Phantom("sigma1", _sigma1, True, "circle |z| = 0.5", 1.0, 2.0, True),
    "sigma2": Phantom(
        "sigma2", _sigma2, True, "circles |z| = 0.1, 0.2, 0.3, 0.4, 0.5", 1.0, 2.0, True
    ),
    "sigma3": Phantom(
        "sigma3",
        checkerboard(4, 1.0, 2.5),
        False,
        "4x4 checkerboard (tile 0.5) clipped to |z| < 0.9",
        1.5,
        2.5,
    ),
    "sigma4": Phantom(
        "sigma4",
        checkerboard(6, 1.0, 3.8),
        False,
        "6x6 checkerboard (tile 1/3) clipped to |z| < 0.9",
        2.8,
        3.8,
    ),
}

# Pivot points used with the checkerboard phantoms.
DEFAULT_PIVOTS = {
    "sigma3": complex(-0.88594, -0.88594),
    "sigma4": complex(0.0, 1.2656),
}


def get_phantom(name: str) -> Phantom:
    try:
        return PHANTOMS[name]
    except KeyError:
        raise ValueError(f"unknown phantom {name!r}; choose from {sorted(PHANTOMS)}") from None


def eval_sigma(phantom: Phantom | str, z) -> np.ndarray:
    if isinstance(phantom, str):
        phantom = get_phantom(phantom)
    out = phantom(z)
    return out.item() if out.ndim == 0 else out


def load_phantom(path: str | Path, name: str | None = None) -> Phantom:
    """
    Read a custom piecewise-constant phantom.

    Each non-blank, non-``#`` line is ``shape params... value``::

        circle  cx cy r  value
        rect    x0 y0 x1 y1  value

    Later records override earlier ones; the background is 1 and everything
    outside the unit disc is forced to 1.
    """
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        shape, nums = parts[0].lower(), parts[1:]
        try:
            vals = [float(v) for v in nums]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric parameter") from None
        expected = {"circle": 4, "rect": 5}.get(shape)
        if expected is None:
            raise ValueError(f"{path}:{lineno}: unknown shape {shape!r}")
        if len(vals) != expected:
            raise ValueError(f"{path}:{lineno}: {shape} takes {expected} numbers, got {len(vals)}")
        if vals[-1] <= 0:
            raise ValueError(f"{path}:{lineno}: conductivity must be positive")
        records.append((shape, vals))

    def func(z):
        out = np.ones(z.shape)
        for shape, v in records:
            if shape == "circle":
                inside = np.abs(z - complex(v[0], v[1])) < v[2]
            else:
                inside = (z.real >= v[0]) & (z.real < v[2]) & (z.imag >= v[1]) & (z.imag < v[3])
            out = np.where(inside, v[-1], out)
        return np.where(np.abs(z) < 1.0, out, 1.0)

    values = [1.0] + [v[-1] for _, v in records]
    return Phantom(
        name or path.stem,
        func,
        False,
        f"{len(records)} records from {path.name}",
        max(values) - min(values),
        max(max(values), 1.0 / min(values)),
    )


def mu_from_sigma(sigma):
    """``mu = (1 - sigma) / (1 + sigma)``, pointwise; accepts arrays or fields."""
    if isinstance(sigma, ComplexField):
        return ComplexField(sigma.grid, mu_from_sigma(sigma.values))
    sigma = np.asarray(sigma)
    if np.any(np.real(sigma) <= 0) and np.isrealobj(sigma):
        raise ValueError("conductivity must be positive")
    return (1.0 - sigma) / (1.0 + sigma)


def sigma_from_mu(mu):
    """``sigma = (1 - mu) / (1 + mu)``, pointwise."""
    if isinstance(mu, ComplexField):
        return ComplexField(mu.grid, sigma_from_mu(mu.values))
    mu = np.asarray(mu)
    if np.any(mu == -1):
        raise ValueError("mu = -1 has no conductivity")
    return (1.0 - mu) / (1.0 + mu)


@dataclass(frozen=True, eq=False)
class BeltramiCoefficient:
    """``mu`` sampled on a z-grid, zero outside the unit disc."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.complex128).copy()
        if values.shape != self.grid.shape:
            raise ValueError("values do not match grid")
        if np.any(np.abs(values) >= 1.0):
            raise ValueError("|mu| must be < 1 everywhere")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def kappa(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def support_radius(self) -> float:
        """Radius of the smallest origin-centred disc holding every nonzero sample."""
        nz = self.values != 0
        return float(np.abs(self.grid.points[nz]).max()) if nz.any() else 0.0

    def __neg__(self) -> "BeltramiCoefficient":
        return BeltramiCoefficient(self.grid, -self.values)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    @classmethod
    def from_phantom(
        cls, phantom: Phantom | str, grid: Grid2D, supersample: int = 8
    ) -> "BeltramiCoefficient":
        """
        Cell averages of ``mu`` over ``supersample**2`` sub-points per cell.

        Point sampling puts the jump curves on a staircase and costs first-order
        accuracy in the scattering transform; averaging restores it. The
        sub-point pattern is symmetric, so grid symmetries are preserved.
        """
        if isinstance(phantom, str):
            phantom = get_phantom(phantom)
        offsets = grid.step * ((np.arange(supersample) + 0.5) / supersample - 0.5)
        acc = np.zeros(grid.shape)
        for a in offsets:
            for b in offsets:
                pts = grid.points + complex(a, b)
                acc += np.where(np.abs(pts) < 1.0, mu_from_sigma(phantom(pts)), 0.0)
        return cls(grid, acc / supersample**2)
