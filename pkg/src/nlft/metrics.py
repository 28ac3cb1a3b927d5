"""Error metrics and the synthetic noise study."""

from __future__ import annotations

import numpy as np

from .grid import ComplexField, RadialRay
from .nft import ScatteringData

NOISE_GAMMA = 1.5


def band_discrepancy(data_a: RadialRay, data_b: RadialRay, band: tuple[float, float]) -> float:
    """
    ``max |Im(a - b)| / max |Im b| * 100`` over the samples with ``|k|`` in
    the closed band; ``b`` is the reference.
    """
    if data_a.radii.shape != data_b.radii.shape or not np.allclose(data_a.radii, data_b.radii):
        raise ValueError("rays must share their radii")
    lo, hi = band
    sel = (data_a.radii >= lo) & (data_a.radii <= hi)
    if not sel.any():
        raise ValueError(f"no samples in band {band}")
    den = np.abs(data_b.values[sel].imag).max()
    if den == 0:
        raise ValueError("reference imaginary part vanishes on the band")
    return float(100.0 * np.abs((data_a.values[sel] - data_b.values[sel]).imag).max() / den)


def modulus_discrepancy(a: np.ndarray, b: np.ndarray) -> float:
    """Non-radial analogue of :func:`band_discrepancy` using moduli."""
    den = np.abs(b).max()
    if den == 0:
        raise ValueError("reference vanishes")
    return float(100.0 * np.abs(a - b).max() / den)


def imag_error(recon) -> float:
    """``max |Im sigma~|`` over the reconstruction points."""
    sigma = np.asarray(recon.sigma)
    return float(np.abs(sigma.imag).max()) if sigma.size else 0.0


def relative_errors(approx, truth, mask=None) -> tuple[float, float]:
    """Relative l-infinity and l2 errors in percent over the (unmasked) points."""
    approx, truth = np.asarray(approx), np.asarray(truth)
    if approx.shape != truth.shape:
        raise ValueError("shape mismatch")
    if mask is not None:
        approx, truth = approx[mask], truth[mask]
    diff = approx - truth
    sup = 100.0 * np.abs(diff).max() / np.abs(truth).max()
    sqr = 100.0 * np.linalg.norm(diff) / np.linalg.norm(truth)
    return float(sup), float(sqr)


def sup_sqr(recon_field, truth_field, mask=None) -> tuple[float, float]:
    """``(sup, sqr)`` of a reconstruction against the true conductivity."""
    return relative_errors(recon_field, truth_field, mask)


def _abs_diff_by_radius(tau_clean: ScatteringData, tau_noisy: ScatteringData):
    a, b = tau_clean.samples, tau_noisy.samples
    if isinstance(a, ComplexField):
        if not isinstance(b, ComplexField) or a.grid != b.grid:
            raise ValueError("scattering data must share one k-grid")
        return np.abs(a.grid.points).ravel(), np.abs(a.values - b.values).ravel()
    if not isinstance(b, RadialRay) or not np.array_equal(a.radii, b.radii):
        raise ValueError("scattering data must share one k-grid")
    return a.radii, np.abs(a.values - b.values)


def noise_radius_profile(tau_clean: ScatteringData, tau_noisy: ScatteringData, radii) -> np.ndarray:
    """``E_p(r) = max_{|k| <= r} |tau - tau_p|`` for each ``r``."""
    r, d = _abs_diff_by_radius(tau_clean, tau_noisy)
    order = np.argsort(r, kind="stable")
    r, running = r[order], np.maximum.accumulate(d[order])
    out = []
    for rad in np.asarray(radii, dtype=float):
        n = np.searchsorted(r, rad, side="right")
        out.append(running[n - 1] if n else 0.0)
    return np.array(out)


def add_noise(data: ScatteringData, p: float, seed: int, gamma: float = NOISE_GAMMA) -> ScatteringData:
    """
    Additive complex Gaussian noise with standard deviation
    ``p / 100 * (1 + |k|)**gamma`` on every sample with ``|k| < R``.
    """
    rng = np.random.default_rng(seed)
    samples = data.samples
    if isinstance(samples, ComplexField):
        k = np.abs(samples.grid.points)
    else:
        k = samples.radii
    scale = p / 100.0 * (1.0 + k) ** gamma / np.sqrt(2.0)
    noise = scale * (rng.standard_normal(k.shape) + 1j * rng.standard_normal(k.shape))
    noisy = np.where(k < data.R, samples.values + noise, 0.0)
    if isinstance(samples, ComplexField):
        new = ComplexField(samples.grid, noisy)
    else:
        new = RadialRay(samples.radii, noisy)
    prov = dict(data.provenance, noise_p=p, noise_seed=seed, noise_gamma=gamma)
    return ScatteringData(new, data.R, prov)


def first_crossing(radii, profile, level: float) -> float:
    """Smallest radius where ``profile > level``; ``inf`` if never."""
    radii, profile = np.asarray(radii), np.asarray(profile)
    hit = np.nonzero(profile > level)[0]
    return float(radii[hit[0]]) if hit.size else float("inf")
