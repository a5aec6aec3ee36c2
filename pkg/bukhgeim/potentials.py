"""
Potential and test-field families.

Compact C-infinity bumps and Gaussian bumps for the reconstruction and
stability studies, plus fractional-regularity families (white noise filtered
by (1 + |xi|^2)^{-(s+1)/2}) whose W^s_2 smoothness is prescribed, used to
recover the stationary-phase rates.
"""

import logging
from typing import Sequence, Tuple

import numpy as np

from bukhgeim.errors import ConfigError
from bukhgeim.grid import Field, Grid2D, Potential, Support, frequencies

LOGGER = logging.getLogger(__name__)


def compact_bump(
    grid: Grid2D,
    center: Tuple[float, float] = (0.0, 0.0),
    radius: float = 0.5,
    amplitude: complex = 1.0,
) -> np.ndarray:
    """a * exp(1 - 1 / (1 - r^2/rho^2)) inside the disk of radius rho, zero outside."""
    x1, x2 = grid.coords
    r2 = ((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2) / radius ** 2
    inside = r2 < 1.0
    values = np.zeros(grid.shape, dtype=complex)
    values[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return values


def gaussian_bump(
    grid: Grid2D,
    center: Tuple[float, float] = (0.0, 0.0),
    width: float = 0.2,
    amplitude: complex = 1.0,
) -> np.ndarray:
    x1, x2 = grid.coords
    r2 = (x1 - center[0]) ** 2 + (x2 - center[1]) ** 2
    return amplitude * np.exp(-r2 / (2.0 * width ** 2)) + 0j


def spectral_field(grid: Grid2D, s: float, seed: int, taper_radius: float = None) -> np.ndarray:
    """
    Random real field with W^s_2 regularity (and no more).

    White noise is filtered by (1 + |xi|^2)^{-(s+1)/2}, tapered by
    (1 - |x|^2/rho^2)^3 so it vanishes at the domain boundary, and normalized
    to unit L^2 norm.
    """
    rho = grid.domain.extent if taper_radius is None else taper_radius
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(grid.shape)
    xi1, xi2 = frequencies(grid)
    filt = (1.0 + xi1 ** 2 + xi2 ** 2) ** (-(s + 1.0) / 2.0)
    smooth = np.real(np.fft.ifft2(np.fft.fft2(noise) * filt))

    x1, x2 = grid.coords
    taper = np.clip(1.0 - (x1 ** 2 + x2 ** 2) / rho ** 2, 0.0, None) ** 3
    values = smooth * taper
    norm = np.sqrt(np.sum(values ** 2) * grid.spacing ** 2)
    return (values / norm if norm > 0 else values) + 0j


def make_potential(
    grid: Grid2D,
    kind: str = "bump",
    center: Sequence[float] = (0.0, 0.0),
    radius: float = 0.5,
    amplitude: complex = 1.0,
    s: float = 1.0,
    p: float = 4.0,
    seed: int = 0,
    M: float = None,
    label: str = None,
) -> Potential:
    """
    Build a Potential from a family name.

    Args:
        grid: target lattice
        kind: ``bump`` (compact C-infinity), ``gaussian``, ``constant`` or
            ``spectral``
        center: bump centre
        radius: bump radius (``bump``) or standard deviation (``gaussian``)
        amplitude: peak value (``spectral``: L^2 norm)
        s: declared smoothness; for ``spectral`` also the realized regularity
        p: declared integrability exponent
        seed: random seed for the ``spectral`` family
        M: a-priori W^s_2 bound, if any
        label: name used in logs and CSV rows

    Returns:
        X-supported Potential
    """
    center = (float(center[0]), float(center[1]))
    if kind == "bump":
        values = compact_bump(grid, center, radius, amplitude)
    elif kind == "gaussian":
        values = gaussian_bump(grid, center, radius, amplitude)
    elif kind == "constant":
        values = np.full(grid.shape, amplitude, dtype=complex)
    elif kind == "spectral":
        values = amplitude * spectral_field(grid, s, seed)
    else:
        raise ConfigError(f"unknown potential family '{kind}'")

    potential = Potential(
        Field(grid, values, Support.X), s=s, p=p, M=M, label=label or kind
    )
    LOGGER.debug("potential %s: L^p=%.4g", potential.label, potential.lp_norm())
    return potential
