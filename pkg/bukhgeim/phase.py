"""
The quadratic phase, its weights, and the stationary-phase operator.

With Phi(z; z0) = (z - z0)^2 the weight e^{i tau (Phi + conj Phi)} is a real
chirp of unit modulus. Convolution with (2 tau / pi) e^{+-i tau (z^2 + conj z^2)}
is the Fourier multiplier exp(-+i (xi1^2 - xi2^2) / (8 tau)), which tends to
the identity as tau grows; ``stat_phase_apply`` evaluates it either through
that multiplier on the 2N-padded lattice or by direct quadrature.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from bukhgeim.cauchy import d_inv, dbar_inv
from bukhgeim.errors import FieldError, PhaseError, PropertyViolation
from bukhgeim.grid import Field, Grid2D, Support, lp_norm

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhaseParams:
    """
    Args:
        tau: large parameter, tau >= 0 (tau = 0 collapses every weight to 1)
        z0: stationary point, identified with x0
        sign: +1 or -1, the orientation of the chirp
    """

    tau: float
    z0: complex = 0j
    sign: int = 1

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau < 0:
            raise PhaseError(f"tau must be a finite nonnegative number, got {self.tau}")
        if self.sign not in (1, -1):
            raise PhaseError(f"sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "z0", complex(self.z0))

    def validate(self, grid: Grid2D) -> "PhaseParams":
        """Check that z0 lies strictly inside X."""
        if not grid.domain.contains(np.real(self.z0), np.imag(self.z0)):
            raise PhaseError(f"z0={self.z0} is not inside the domain")
        return self


def phi(grid: Grid2D, z0: complex) -> Field:
    """Phi(z) = (z - z0)^2."""
    return Field(grid, (grid.z - z0) ** 2, Support.WHOLE)


def _real_phase(grid: Grid2D, z0: complex) -> np.ndarray:
    """Phi + conj Phi = 2 Re (z - z0)^2."""
    return 2.0 * np.real((grid.z - z0) ** 2)


def weight(grid: Grid2D, params: PhaseParams) -> Field:
    """e^{i sign tau (Phi + conj Phi)}, unit modulus."""
    w = np.exp(1j * params.sign * params.tau * _real_phase(grid, params.z0))
    return Field(grid, w, Support.WHOLE)


def r_tilde(g: Field, params: PhaseParams) -> Field:
    """R g = 1/2 e^{-i tau (Phi + conj Phi)} d_inv(g e^{i tau (Phi + conj Phi)})."""
    w = weight(g.grid, params).values
    inner = d_inv(Field(g.grid, g.values * w, Support.WHOLE))
    return Field(g.grid, 0.5 * np.conj(w) * inner.values, Support.WHOLE)


def r_tilde_bar(g: Field, params: PhaseParams) -> Field:
    """Mirror of :func:`r_tilde` built on dbar_inv, used on the conjugate-phase side."""
    w = weight(g.grid, params).values
    inner = dbar_inv(Field(g.grid, g.values * w, Support.WHOLE))
    return Field(g.grid, 0.5 * np.conj(w) * inner.values, Support.WHOLE)


def _padded_spectrum(Q: Field) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    grid = Q.grid
    n = grid.resolution
    padded = np.zeros((2 * n, 2 * n), dtype=complex)
    padded[:n, :n] = Q.values
    xi = 2.0 * np.pi * np.fft.fftfreq(2 * n, d=grid.spacing)
    xi1, xi2 = np.meshgrid(xi, xi, indexing="ij")
    return np.fft.fft2(padded), xi1, xi2


def stat_phase_multiplier(xi1: np.ndarray, xi2: np.ndarray, tau: float, sign: int = 1) -> np.ndarray:
    return np.exp(-1j * sign * (xi1 ** 2 - xi2 ** 2) / (8.0 * tau))


def _check_input(Q: Field, tau: float):
    if not tau > 0:
        raise PhaseError(f"stationary-phase operator needs tau > 0, got {tau}")
    if Q.support != Support.WHOLE:
        raise FieldError("stationary-phase operator expects a whole-grid field; apply extend_zero first")


def stat_phase_apply(Q: Field, tau: float, sign: int = 1, mode: str = "multiplier") -> Field:
    """
    x0 -> (2 tau / pi) int e^{i sign tau ((z - z0)^2 + conj)} Q(x) dx.

    Args:
        Q: whole-grid field
        tau: parameter, > 0
        sign: chirp orientation
        mode: ``multiplier`` (closed-form Fourier multiplier on the padded
            lattice) or ``quadrature`` (direct Riemann sum, separable in
            x1 and x2)

    Returns:
        Field of x0 on the same lattice
    """
    _check_input(Q, tau)
    grid = Q.grid
    n = grid.resolution

    if mode == "multiplier":
        spectrum, xi1, xi2 = _padded_spectrum(Q)
        out = np.fft.ifft2(spectrum * stat_phase_multiplier(xi1, xi2, tau, sign))[:n, :n]
        return Field(grid, out, Support.WHOLE)

    if mode == "quadrature":
        # (z - z0)^2 + conj = 2((x1 - y1)^2 - (x2 - y2)^2) splits into two chirp matrices
        x = grid.axis
        diff2 = (x[:, None] - x[None, :]) ** 2
        a = np.exp(2j * sign * tau * diff2)
        b = np.exp(-2j * sign * tau * diff2)
        out = (2.0 * tau / np.pi) * grid.spacing ** 2 * (a @ Q.values @ b.T)
        return Field(grid, out, Support.WHOLE)

    raise PhaseError(f"unknown stationary-phase mode '{mode}'")


@dataclass(frozen=True)
class StatPhaseError:
    measured: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.measured / self.bound if self.bound > 0 else 0.0


def stat_phase_error(Q: Field, tau: float, s: float, sign: int = 1) -> StatPhaseError:
    """
    ||Q - T_tau Q||_{L^2(dx0)} next to the bound 2 tau^{-s/2} ||Q||_{W^s_2}.

    Both sides are evaluated on the same 2N-padded frequency lattice.
    """
    _check_input(Q, tau)
    if not 0.0 <= s <= 1.0:
        raise FieldError(f"Sobolev index must lie in [0, 1], got {s}")
    grid = Q.grid
    spectrum, xi1, xi2 = _padded_spectrum(Q)
    power = np.abs(spectrum) ** 2 * grid.spacing ** 2 / (4 * grid.resolution ** 2)
    defect = np.abs(1.0 - stat_phase_multiplier(xi1, xi2, tau, sign)) ** 2
    measured = np.sqrt(np.sum(defect * power))
    sobolev = np.sqrt(np.sum((1.0 + xi1 ** 2 + xi2 ** 2) ** s * power))
    return StatPhaseError(float(measured), float(2.0 * tau ** (-s / 2.0) * sobolev))


def _bound_sides(xi: np.ndarray, s: float) -> Tuple[np.ndarray, np.ndarray]:
    xi1, xi2 = xi[..., 0], xi[..., 1]
    # |1 - e^{-2ia}|^2 = 4 sin^2 a
    lhs = 2.0 * np.abs(np.sin(xi1 ** 2 - xi2 ** 2))
    rhs = 2.0 ** (1.0 + s / 2.0) * np.hypot(xi1, xi2) ** s
    return lhs, rhs


def multiplier_bound_check(
    xi: Union[Sequence[float], np.ndarray], s: float
) -> Tuple[Union[float, np.ndarray], Union[float, np.ndarray]]:
    """
    Pointwise multiplier bound |1 - e^{-2i(xi1^2 - xi2^2)}| <= 2^{1+s/2} |xi|^s.

    Args:
        xi: one frequency ``(xi1, xi2)`` or an array of shape (..., 2)
        s: index in [0, 1]

    Returns:
        (lhs, rhs), scalars for a single frequency

    Raises:
        PropertyViolation: when some lhs exceeds its rhs
    """
    if not 0.0 <= s <= 1.0:
        raise FieldError(f"index must lie in [0, 1], got {s}")
    xi = np.asarray(xi, dtype=float)
    lhs, rhs = _bound_sides(xi, s)
    bad = lhs > rhs * (1.0 + 1e-12)
    if np.any(bad):
        raise PropertyViolation(f"multiplier bound fails at {int(np.sum(bad))} frequencies for s={s}")
    if xi.ndim == 1:
        return float(lhs), float(rhs)
    return lhs, rhs


def multiplier_bound_sweep(
    n_points: int = 1_000_000,
    s_values: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    seed: int = 0,
) -> Dict[float, int]:
    """
    Randomized frequency sweep of the multiplier bound.

    Radii are log-uniform on [1e-3, 1e3], angles uniform.

    Returns:
        violation count per s (all zero when the bound holds)
    """
    rng = np.random.default_rng(seed)
    radius = 10.0 ** rng.uniform(-3.0, 3.0, n_points)
    angle = rng.uniform(0.0, 2.0 * np.pi, n_points)
    xi = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    violations = {}
    for s in s_values:
        lhs, rhs = _bound_sides(xi, s)
        violations[s] = int(np.sum(lhs > rhs * (1.0 + 1e-12)))
    return violations


def r_tilde_decay(
    g: Field, z0: complex, taus: Sequence[float], sign: int = 1
) -> Dict[str, np.ndarray]:
    """
    L^2(X) and L^inf(X) norms of R_tau g across a tau sweep.

    Returns:
        dict with ``tau``, ``l2`` and ``sup`` arrays
    """
    l2, sup = [], []
    for tau in taus:
        v = r_tilde(g, PhaseParams(tau, z0, sign)).restrict()
        l2.append(lp_norm(v, 2.0))
        sup.append(lp_norm(v, np.inf))
    return {"tau": np.asarray(taus, dtype=float), "l2": np.array(l2), "sup": np.array(sup)}


def r_tilde_sup_decay(g: Field, z0: complex, taus: Sequence[float], p: float = 4.0) -> np.ndarray:
    """tau^{1/p} ||R_tau g||_{L^inf(X)} for each tau (bounded when the sup norm decays like tau^{-1/p})."""
    data = r_tilde_decay(g, z0, taus)
    return data["tau"] ** (1.0 / p) * data["sup"]


def max_resolved_tau(grid: Grid2D, diameter: float = None) -> float:
    """
    Largest tau whose chirp is resolved by the lattice.

    The local frequency of e^{i tau (Phi + conj Phi)} is at most
    4 tau |z - z0| <= 4 tau * diameter, which must stay below pi / h.
    """
    if diameter is None:
        diameter = 2.0 * grid.domain.extent
    return np.pi / (4.0 * grid.spacing * diameter)
