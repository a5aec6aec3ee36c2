"""
Cauchy transforms over X.

``dbar_inv`` and ``d_inv`` are area integrals against 1/(pi w) and its
conjugate, evaluated as exact discrete linear convolutions by zero-padded FFT
(size 2N, so no periodic wrap-around). ``dbar`` and ``d`` are the centered
Wirtinger differences used for residuals.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from bukhgeim.errors import ExponentError, ProbeError
from bukhgeim.grid import Field, Grid2D, Support, lp_norm

LOGGER = logging.getLogger(__name__)

Operator = Callable[[Field], Field]


@dataclass(frozen=True, eq=False)
class CauchyKernelTable:
    """
    Kernel samples on the padded offset lattice (FFT wrap order).

    ``kernel_dbar[k, l]`` is 1/(pi w) at the offset w = (k h, l h), with
    negative offsets stored in the upper halves. The singular cell holds the
    exact cell mean, which vanishes because the kernel is odd.
    """

    grid: Grid2D
    kernel_dbar: np.ndarray = field(repr=False)
    kernel_d: np.ndarray = field(repr=False)
    origin_cell_value: complex
    spectrum_dbar: np.ndarray = field(repr=False)
    spectrum_d: np.ndarray = field(repr=False)


@lru_cache(maxsize=8)
def kernel_table(grid: Grid2D) -> CauchyKernelTable:
    n = grid.resolution
    h = grid.spacing
    idx = np.arange(2 * n)
    offsets = np.where(idx < n, idx, idx - 2 * n) * h
    w = offsets[:, None] + 1j * offsets[None, :]
    origin = 0.0 + 0.0j
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = 1.0 / (np.pi * w)
    kernel[0, 0] = origin
    conj_kernel = np.conj(kernel)
    cell = h ** 2
    LOGGER.debug("Cauchy kernel table built for N=%d", n)
    return CauchyKernelTable(
        grid=grid,
        kernel_dbar=kernel,
        kernel_d=conj_kernel,
        origin_cell_value=origin,
        spectrum_dbar=cell * np.fft.fft2(kernel),
        spectrum_d=cell * np.fft.fft2(conj_kernel),
    )


def _convolve(g: Field, spectrum: np.ndarray) -> Field:
    grid = g.grid
    n = grid.resolution
    padded = np.zeros((2 * n, 2 * n), dtype=complex)
    padded[:n, :n] = np.where(grid.interior_mask, g.values, 0.0)
    out = np.fft.ifft2(np.fft.fft2(padded) * spectrum)[:n, :n]
    return Field(grid, out, Support.WHOLE)


def dbar_inv(g: Field) -> Field:
    """
    Solid Cauchy transform -(1/pi) int_X g(zeta) / (zeta - z) dA(zeta).

    Only the samples of ``g`` inside X contribute; the result lives on the
    whole lattice.
    """
    return _convolve(g, kernel_table(g.grid).spectrum_dbar)


def d_inv(g: Field) -> Field:
    """Conjugate transform -(1/pi) int_X g / (conj(zeta) - conj(z)); d_inv(g) = conj(dbar_inv(conj g))."""
    return _convolve(g, kernel_table(g.grid).spectrum_d)


def _wirtinger(f: Field, sign: int) -> Field:
    if f.support == Support.SPECTRAL:
        raise ProbeError("Wirtinger derivatives act on spatial fields")
    h = f.grid.spacing
    g1, g2 = np.gradient(f.values, h, h)
    return Field(f.grid, 0.5 * (g1 + sign * 1j * g2), Support.WHOLE)


def dbar(f: Field) -> Field:
    """Centered difference of d/dz-bar = (d1 + i d2) / 2."""
    return _wirtinger(f, +1)


def d(f: Field) -> Field:
    """Centered difference of d/dz = (d1 - i d2) / 2."""
    return _wirtinger(f, -1)


OPERATORS = {"dbar_inv": dbar_inv, "d_inv": d_inv}


def admissible(p_in: float, q_out: Union[float, str]) -> bool:
    """
    Boundedness ranges of the Cauchy transforms on X.

    Part A: L^p -> L^gamma for 1 <= p <= 2 and 1 < gamma < 2p / (2 - p)
    (any finite gamma when p = 2). Part B: L^p -> W^1_p for 1 < p < inf,
    with ``q_out="W1"``.
    """
    if q_out == "W1":
        return 1.0 < p_in < np.inf
    gamma = float(q_out)
    if not 1.0 <= p_in <= 2.0 or not gamma > 1.0 or np.isinf(gamma):
        return False
    if p_in == 2.0:
        return True
    return gamma < 2.0 * p_in / (2.0 - p_in)


def _w1_surrogate(v: Field, p: float) -> float:
    """L^p of v plus L^p of its centered gradient, over X."""
    h = v.grid.spacing
    g1, g2 = np.gradient(v.values, h, h)
    parts = [v.values, g1, g2]
    return sum(lp_norm(Field(v.grid, a, Support.X), p) for a in parts)


def _probe_field(grid: Grid2D, rng: np.random.Generator, family: str) -> Field:
    rho = grid.domain.extent
    radius = 0.6 * rho * np.sqrt(rng.uniform())
    angle = rng.uniform(0.0, 2.0 * np.pi)
    c = radius * np.exp(1j * angle)
    if family == "smooth":
        width = rng.uniform(0.15, 0.4) * rho
    elif family == "singular":
        width = grid.spacing * rng.uniform(1.0, 2.0)
    else:
        raise ProbeError(f"unknown probe family '{family}'")
    amp = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    values = amp * np.exp(-np.abs(grid.z - c) ** 2 / (2.0 * width ** 2))
    return Field(grid, values, Support.X)


def operator_norm_probe(
    grid: Grid2D,
    op: Union[str, Operator],
    p_in: float,
    q_out: Union[float, str],
    trials: int,
    seed: int = 0,
    family: str = "smooth",
    allow_inadmissible: bool = False,
) -> float:
    """
    Randomized lower estimate of ||op||_{L^p(X) -> L^gamma(X)}.

    Args:
        grid: lattice
        op: ``"dbar_inv"``, ``"d_inv"`` or a callable Field -> Field
        p_in: input exponent p
        q_out: output exponent gamma, or ``"W1"`` for the gradient surrogate
        trials: number of random Gaussian probes (> 0)
        seed: RNG seed, the estimate is deterministic given it
        family: ``smooth`` (fixed physical widths, resolution independent)
            or ``singular`` (widths of one to two cells)
        allow_inadmissible: evaluate exponent pairs outside the boundedness
            range, for unboundedness evidence

    Returns:
        max over probes of ||op g|| / ||g||_p
    """
    if trials <= 0:
        raise ProbeError("operator_norm_probe needs at least one trial")
    if not allow_inadmissible and not admissible(p_in, q_out):
        raise ExponentError(
            f"(p={p_in}, gamma={q_out}) is outside the boundedness range "
            "1<=p<=2, 1<gamma<2p/(2-p) (or W1 with 1<p<inf)"
        )
    apply = OPERATORS[op] if isinstance(op, str) else op
    rng = np.random.default_rng(seed)

    best = 0.0
    for _ in range(trials):
        g = _probe_field(grid, rng, family)
        v = apply(g)
        if q_out == "W1":
            num = _w1_surrogate(v, p_in)
        else:
            num = lp_norm(Field(grid, v.values, Support.X), float(q_out))
        den = lp_norm(g, p_in)
        if den > 0:
            best = max(best, num / den)
    LOGGER.debug("probe %s p=%s gamma=%s family=%s -> %.4g", op, p_in, q_out, family, best)
    return best
