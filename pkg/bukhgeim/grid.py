"""
**Grids, fields and discrete norms**

Everything else in the package is computed on a uniform N x N lattice of the
square [-L, L]^2 that contains the domain X (a disk by default). This module
owns that lattice together with the boundary ring used by the forward solver,
the scaled Fourier pair, and the discrete norms (L^p, fractional Sobolev,
boundary Sobolev, W^1_2) every experiment reports.

Node ordering is ``indexing='ij'``: axis 0 runs along x1, axis 1 along x2,
and the complex coordinate of node (i, j) is ``z = x1 + i x2``.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Tuple, Union

import numpy as np
from scipy import linalg

from bukhgeim.errors import FieldError, GridError

LOGGER = logging.getLogger(__name__)

# Lattice constants
MIN_RESOLUTION = 16
MARGIN_CELLS = 4
ANGLE_FLOOR = 1e-12


class Support(str, Enum):
    """Where a field's samples live."""

    WHOLE = "whole"
    X = "X"
    SPECTRAL = "spectral"


class DomainKind(str, Enum):
    DISK = "disk"
    SQUARE = "square"


@dataclass(frozen=True)
class Domain:
    """
    The physical domain X.

    Args:
        kind: ``disk`` (default, smooth boundary) or ``square`` (corners are
            outside the smooth-boundary hypotheses and only kept for
            comparison runs)
        size: disk radius, or side length of the square
    """

    kind: DomainKind = DomainKind.DISK
    size: float = 1.0

    @property
    def extent(self) -> float:
        """Radius of the smallest origin-centred disk containing X."""
        if self.kind == DomainKind.DISK:
            return self.size
        return self.size / np.sqrt(2.0)

    def contains(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Strict interior test."""
        if self.kind == DomainKind.DISK:
            return x1 ** 2 + x2 ** 2 < self.size ** 2
        half = self.size / 2.0
        return (np.abs(x1) < half) & (np.abs(x2) < half)

    def normal(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Outward unit normal (as a complex number) at the boundary point nearest each node."""
        z = np.asarray(x1) + 1j * np.asarray(x2)
        if self.kind == DomainKind.DISK:
            return z / np.abs(z)
        ax, ay = np.abs(np.real(z)), np.abs(np.imag(z))
        nx = np.where(ax >= ay - 1e-12, np.sign(np.real(z)), 0.0)
        ny = np.where(ay >= ax - 1e-12, np.sign(np.imag(z)), 0.0)
        nu = nx + 1j * ny
        return nu / np.abs(nu)


@dataclass(frozen=True, eq=False)
class Grid2D:
    """
    Uniform lattice of [-L, L]^2 carrying the domain X.

    Instances are built by :func:`make_grid`, which validates the margin and
    resolution rules. Equality is identity, so a grid can key ``lru_cache``
    tables (kernels, factorizations, trace constants).
    """

    half_width: float
    resolution: int
    domain: Domain
    enclosing_radius: float

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.resolution

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.resolution, self.resolution)

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.resolution)

    @cached_property
    def coords(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis, self.axis, indexing="ij")

    @cached_property
    def z(self) -> np.ndarray:
        x1, x2 = self.coords
        return x1 + 1j * x2

    @cached_property
    def interior_mask(self) -> np.ndarray:
        x1, x2 = self.coords
        return self.domain.contains(x1, x2)

    @cached_property
    def _ring(self) -> dict:
        """Boundary ring: non-interior nodes with a 4-neighbour in X, ordered by polar angle."""
        mask = self.interior_mask
        neighbours = np.zeros_like(mask, dtype=int)
        neighbours[1:, :] += mask[:-1, :]
        neighbours[:-1, :] += mask[1:, :]
        neighbours[:, 1:] += mask[:, :-1]
        neighbours[:, :-1] += mask[:, 1:]
        ring = (~mask) & (neighbours > 0)

        idx = np.argwhere(ring)
        pts = self.z[idx[:, 0], idx[:, 1]]
        angles = np.mod(np.angle(pts), 2.0 * np.pi)
        order = np.lexsort((np.abs(pts), angles))
        idx, pts, angles = idx[order], pts[order], angles[order]

        # Flux weights: h * sum over interior edges of |e . nu|
        x1, x2 = np.real(pts), np.imag(pts)
        nu = self.domain.normal(x1, x2)
        h = self.spacing
        weights = np.zeros(len(idx))
        degree = np.zeros(len(idx), dtype=int)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = idx[:, 0] + di, idx[:, 1] + dj
            inside = mask[ni, nj]
            # edge direction from the interior neighbour to the ring node
            e = -(di + 1j * dj)
            weights += np.where(inside, h * np.abs(np.real(e * np.conj(nu))), 0.0)
            degree += inside.astype(int)
        return {
            "index": idx,
            "points": pts,
            "angles": angles,
            "normals": nu,
            "weights": weights,
            "degree": degree,
        }

    @property
    def boundary_index(self) -> np.ndarray:
        """(nb, 2) lattice indices of the ordered boundary ring."""
        return self._ring["index"]

    @property
    def boundary_points(self) -> np.ndarray:
        return self._ring["points"]

    @property
    def boundary_angles(self) -> np.ndarray:
        return self._ring["angles"]

    @property
    def boundary_normals(self) -> np.ndarray:
        return self._ring["normals"]

    @property
    def boundary_weights(self) -> np.ndarray:
        return self._ring["weights"]

    @property
    def boundary_degree(self) -> np.ndarray:
        return self._ring["degree"]

    @property
    def boundary_count(self) -> int:
        return len(self._ring["index"])

    @cached_property
    def closure_mask(self) -> np.ndarray:
        mask = self.interior_mask.copy()
        idx = self.boundary_index
        mask[idx[:, 0], idx[:, 1]] = True
        return mask

    @cached_property
    def curve_length(self) -> float:
        return float(np.sum(self.boundary_weights))

    @cached_property
    def boundary_spectrum(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Generalized eigenpairs of the boundary curve Laplacian.

        The stiffness is the periodic difference form in the polar angle,
        scaled by curve_length / 2pi so that a pure circular mode k has
        eigenvalue close to k^2; the mass matrix is ``diag(boundary_weights)``.

        Returns:
            (eigenvalues, eigenvectors) with ``V.T @ W @ V = I``
        """
        t = self.boundary_angles
        nb = len(t)
        gaps = np.mod(np.roll(t, -1) - t, 2.0 * np.pi)
        gaps = np.maximum(gaps, ANGLE_FLOOR)
        scale = self.curve_length / (2.0 * np.pi)
        k = scale / gaps
        stiffness = np.zeros((nb, nb))
        nxt = np.roll(np.arange(nb), -1)
        stiffness[np.arange(nb), np.arange(nb)] += k
        stiffness[nxt, nxt] += k
        stiffness[np.arange(nb), nxt] -= k
        stiffness[nxt, np.arange(nb)] -= k
        lam, vecs = linalg.eigh(stiffness, np.diag(self.boundary_weights))
        return np.clip(lam, 0.0, None), vecs

    def nearest_node(self, z0: complex) -> Tuple[int, int]:
        """Lattice index of the node closest to the point ``z0``."""
        h = self.spacing
        i = int(round((np.real(z0) + self.half_width) / h))
        j = int(round((np.imag(z0) + self.half_width) / h))
        n = self.resolution - 1
        return min(max(i, 0), n), min(max(j, 0), n)

    def same_as(self, other: "Grid2D") -> bool:
        """Structural equality (used where identity is too strict, e.g. after file I/O)."""
        return (
            self is other
            or (
                self.resolution == other.resolution
                and np.isclose(self.half_width, other.half_width, rtol=0, atol=1e-14)
                and self.domain == other.domain
            )
        )


def make_grid(
    L: float,
    N: int,
    domain: Union[Domain, float] = 1.0,
    R: float = None,
) -> Grid2D:
    """
    Build and validate a lattice.

    Args:
        L: half width of the computational square
        N: nodes per axis, a power of two >= 16
        domain: a :class:`Domain`, or a float read as the radius of a disk
        R: enclosing radius with X inside B(0, R); defaults to the domain extent

    Returns:
        Validated Grid2D

    Raises:
        GridError: non power-of-two N, domain outside B(0, R), or a padding
            margin below four cells
    """
    if not isinstance(domain, Domain):
        domain = Domain(DomainKind.DISK, float(domain))
    if R is None:
        R = domain.extent
    if not isinstance(N, (int, np.integer)) or N < MIN_RESOLUTION or (N & (N - 1)) != 0:
        raise GridError(f"resolution must be a power of two >= {MIN_RESOLUTION}, got {N}")
    if L <= 0 or domain.size <= 0:
        raise GridError("half width and domain size must be positive")

    h = 2.0 * L / N
    if domain.extent > R + 1e-12:
        raise GridError(f"domain extent {domain.extent:g} exceeds enclosing radius R={R:g}")
    if R + MARGIN_CELLS * h > L + 1e-12:
        raise GridError(
            f"padding margin too small: R + {MARGIN_CELLS}h = {R + MARGIN_CELLS * h:g} > L = {L:g}"
        )

    grid = Grid2D(half_width=float(L), resolution=int(N), domain=domain, enclosing_radius=float(R))
    if not grid.interior_mask.any():
        raise GridError("no lattice node falls inside the domain; refine the grid")

    # Consecutive ring nodes must be lattice neighbours (closed curve)
    pts = grid.boundary_points
    gaps = np.abs(np.roll(pts, -1) - pts)
    if gaps.max() > 2.0 * h + 1e-12:
        raise GridError("boundary ring is not a closed lattice curve")

    LOGGER.debug(
        "grid N=%d L=%g h=%g interior=%d ring=%d",
        N, L, h, int(grid.interior_mask.sum()), grid.boundary_count,
    )
    return grid


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid, tagged with their support."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)
    support: Support = Support.WHOLE

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise FieldError(f"field shape {values.shape} does not match grid {self.grid.shape}")
        if self.support == Support.X:
            values = np.where(self.grid.interior_mask, values, 0.0)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, support: Support = None) -> "Field":
        return Field(self.grid, values, self.support if support is None else support)

    def conj(self) -> "Field":
        return self.with_values(np.conj(self.values))

    def scaled(self, c: complex) -> "Field":
        return self.with_values(c * self.values)

    def restrict(self) -> "Field":
        """Restriction to X (values outside the interior mask dropped)."""
        return Field(self.grid, self.values, Support.X)

    def boundary_trace(self) -> np.ndarray:
        idx = self.grid.boundary_index
        return self.values[idx[:, 0], idx[:, 1]].copy()

    def at(self, z0: complex) -> complex:
        return complex(self.values[self.grid.nearest_node(z0)])


def zeros(grid: Grid2D, support: Support = Support.WHOLE) -> Field:
    return Field(grid, np.zeros(grid.shape, dtype=complex), support)


def from_function(
    grid: Grid2D,
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    support: Support = Support.WHOLE,
) -> Field:
    """Sample ``fn(x1, x2)`` at every node."""
    x1, x2 = grid.coords
    return Field(grid, np.broadcast_to(fn(x1, x2), grid.shape), support)


def extend_zero(f: Field) -> Field:
    """Zero extension of an X-supported field to the whole lattice."""
    if f.support != Support.X:
        raise FieldError("extend_zero expects an X-supported field")
    return Field(f.grid, f.values, Support.WHOLE)


def frequencies(grid: Grid2D, pad: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Angular frequency lattice (``ij`` layout) of an FFT of size ``pad * N``."""
    xi = 2.0 * np.pi * np.fft.fftfreq(pad * grid.resolution, d=grid.spacing)
    return np.meshgrid(xi, xi, indexing="ij")


def _require_whole(f: Field, op: str):
    if f.support == Support.X:
        raise FieldError(f"{op} expects a whole-grid field; apply extend_zero first")
    if f.support == Support.SPECTRAL:
        raise FieldError(f"{op} expects a spatial field")


def dft(f: Field) -> Field:
    """
    Scaled transform approximating (Ff)(xi) = int f(x) e^{-i x.xi} dx.

    Samples are returned in FFT order on the lattice of :func:`frequencies`.
    """
    _require_whole(f, "dft")
    grid = f.grid
    xi1, xi2 = frequencies(grid)
    shift = np.exp(1j * grid.half_width * (xi1 + xi2))
    return Field(grid, grid.spacing ** 2 * shift * np.fft.fft2(f.values), Support.SPECTRAL)


def idft(f: Field) -> Field:
    """Exact inverse of :func:`dft`."""
    if f.support != Support.SPECTRAL:
        raise FieldError("idft expects a spectral field")
    grid = f.grid
    xi1, xi2 = frequencies(grid)
    shift = np.exp(-1j * grid.half_width * (xi1 + xi2))
    return Field(grid, np.fft.ifft2(shift * f.values) / grid.spacing ** 2, Support.WHOLE)


def sobolev_norm(f: Field, s: float) -> float:
    """
    Weighted spectral norm ||(1 + |xi|^2)^{s/2} Ff||, Plancherel-scaled.

    Args:
        f: whole-grid field (apply extend_zero first for X-supported data)
        s: smoothness index in [0, 1]
    """
    if not 0.0 <= s <= 1.0:
        raise FieldError(f"Sobolev index must lie in [0, 1], got {s}")
    _require_whole(f, "sobolev_norm")
    grid = f.grid
    xi1, xi2 = frequencies(grid)
    spectrum = np.abs(np.fft.fft2(f.values)) ** 2
    weight = (1.0 + xi1 ** 2 + xi2 ** 2) ** s
    n2 = grid.resolution ** 2
    return float(np.sqrt(np.sum(weight * spectrum) * grid.spacing ** 2 / n2))


def lp_norm(f: Field, p: float) -> float:
    """Riemann-sum L^p norm over the field's support; p = inf is the max modulus."""
    if not p >= 1.0:
        raise FieldError(f"L^p exponent must be >= 1, got {p}")
    values = np.abs(f.values)
    if f.support == Support.X:
        values = values[f.grid.interior_mask]
    if np.isinf(p):
        return float(values.max(initial=0.0))
    cell = f.grid.spacing ** 2
    return float((np.sum(values ** p) * cell) ** (1.0 / p))


def boundary_sobolev_norm(grid: Grid2D, g: np.ndarray, order: float) -> float:
    """
    Norm of a boundary trace with weight (1 + k^2)^{order/2} on curve mode k.

    Args:
        grid: lattice whose boundary ring samples ``g``
        g: values on the ordered boundary ring
        order: Sobolev order, typically +1/2 or -1/2

    Returns:
        sqrt(sum_k (1 + lambda_k)^order |<g, v_k>_W|^2)
    """
    g = np.asarray(g, dtype=complex)
    if g.shape != (grid.boundary_count,):
        raise FieldError(
            f"trace has {g.shape} samples, boundary ring has {grid.boundary_count}"
        )
    lam, vecs = grid.boundary_spectrum
    coeffs = vecs.T @ (grid.boundary_weights * g)
    return float(np.sqrt(np.sum((1.0 + lam) ** order * np.abs(coeffs) ** 2)))


def w12_norm(u: Field) -> float:
    """
    Discrete W^1_2(X) norm.

    Mass over interior nodes plus the squared differences along every lattice
    edge with at least one interior endpoint (ring values act as traces).
    """
    grid = u.grid
    mask = grid.interior_mask
    v = np.where(grid.closure_mask, u.values, 0.0)
    mass = grid.spacing ** 2 * np.sum(np.abs(v[mask]) ** 2)
    d1 = np.abs(v[1:, :] - v[:-1, :]) ** 2
    d2 = np.abs(v[:, 1:] - v[:, :-1]) ** 2
    e1 = mask[1:, :] | mask[:-1, :]
    e2 = mask[:, 1:] | mask[:, :-1]
    energy = np.sum(d1[e1]) + np.sum(d2[e2])
    return float(np.sqrt(mass + energy))


@dataclass(frozen=True, eq=False)
class Potential:
    """
    An X-supported potential with its a-priori data.

    Args:
        field: X-supported samples of q
        s: smoothness index in [0, 1]
        p: integrability exponent (> 2)
        M: declared bound on the W^s_2 norm, or None
        label: free-form name used in logs and CSV rows
    """

    field: Field
    s: float = 1.0
    p: float = 4.0
    M: float = None
    label: str = "q"

    def __post_init__(self):
        if self.field.support != Support.X:
            object.__setattr__(self, "field", self.field.restrict())
        if not 0.0 <= self.s <= 1.0:
            raise FieldError(f"smoothness index must lie in [0, 1], got {self.s}")
        if not self.p > 2.0:
            raise FieldError(f"integrability exponent must exceed 2, got {self.p}")

    @property
    def grid(self) -> Grid2D:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @cached_property
    def is_zero(self) -> bool:
        return not np.any(self.field.values)

    @cached_property
    def is_real(self) -> bool:
        return not np.any(np.imag(self.field.values))

    def sobolev_norm(self) -> float:
        return sobolev_norm(extend_zero(self.field), self.s)

    def lp_norm(self) -> float:
        return lp_norm(self.field, self.p)

    def check_bound(self) -> bool:
        """True when the measured W^s_2 norm respects the declared bound."""
        if self.M is None:
            return np.isfinite(self.lp_norm())
        return self.sobolev_norm() <= self.M and np.isfinite(self.lp_norm())

    def __sub__(self, other: "Potential") -> "Potential":
        if other.grid is not self.grid:
            raise FieldError("potentials live on different grids")
        return Potential(
            Field(self.grid, self.values - other.values, Support.X),
            s=min(self.s, other.s),
            p=min(self.p, other.p),
            label=f"{self.label}-{other.label}",
        )

    def scaled(self, c: float) -> "Potential":
        return Potential(self.field.scaled(c), self.s, self.p, None, f"{c:g}*{self.label}")


def zero_potential(grid: Grid2D) -> Potential:
    return Potential(zeros(grid, Support.X), label="zero")
