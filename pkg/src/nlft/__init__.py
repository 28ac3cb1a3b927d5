"""Two-dimensional nonlinear Fourier transform and D-bar reconstruction tools."""

__version__ = "0.1.0"

from .grid import ComplexField, Grid2D, RadialRay, make_grid
from .phantom import BeltramiCoefficient, Phantom, eval_sigma, get_phantom
from .beltrami import CgoSolution, solve_cgo
from .nft import ScatteringData, radial_transform, tau_at, tau_grid, truncate
from .dbar import Reconstruction, reconstruct_shortcut

__all__ = [
    "BeltramiCoefficient",
    "CgoSolution",
    "ComplexField",
    "Grid2D",
    "Phantom",
    "RadialRay",
    "Reconstruction",
    "ScatteringData",
    "eval_sigma",
    "get_phantom",
    "make_grid",
    "radial_transform",
    "reconstruct_shortcut",
    "solve_cgo",
    "tau_at",
    "tau_grid",
    "truncate",
]
