"""
**Complex geometric optics solutions**

u = e^{i tau Phi} sum_j (-1)^j U_j with U_0 = 1,

    U_1 = R(1/2 (dbar_inv q - dbar_inv q(x0))),
    U_j = R(1/2 dbar_inv(q U_{j-1})),   j >= 2,

where R is the phase-conjugated transform of :mod:`bukhgeim.phase`. The
conjugate side swaps dbar_inv and d_inv, uses ``r_tilde_bar`` and the phase
conj(Phi). The series is truncated once the terms are negligible and the
assembled solution lives on the closure of X (the phase weight is never
evaluated far from X, where it would overflow).

**Process Flow:**
1. **Build**: iterate the recursion, recording per-term L^2 norms and ratios.
2. **Verify**: discrete residual of Delta u + q u away from the boundary.
3. **Report**: remainder decay fits and the e^{4 R^2 tau} growth check across
   a tau sweep.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from bukhgeim.cauchy import d_inv, dbar_inv
from bukhgeim.errors import CGOConvergenceError, PhaseError, SweepError
from bukhgeim.fits import loglog_slope
from bukhgeim.grid import Field, Potential, Support, lp_norm, w12_norm
from bukhgeim.phase import PhaseParams, r_tilde, r_tilde_bar

LOGGER = logging.getLogger(__name__)

# Series control
TAIL_TOLERANCE = 1e-10
MAX_TERMS = 40
DIVERGENCE_WINDOW = 3
DECAY_RATIO = 0.5


class Side(str, Enum):
    PHASE = "phase"
    CONJUGATE = "conjugate"


@dataclass(frozen=True, eq=False)
class CGOSolution:
    """
    A truncated CGO series and its diagnostics.

    ``terms[0]`` is U_0 = 1; ``norms[j]`` is ||U_j||_{L^2(X)} and
    ``ratios[j - 2]`` is norms[j] / norms[j - 1] for j >= 2.
    """

    params: PhaseParams
    side: Side
    terms: Tuple[Field, ...] = field(repr=False)
    remainder: Field = field(repr=False)
    u: Field = field(repr=False)
    norms: Tuple[float, ...]
    ratios: Tuple[float, ...]
    geometric_decay: bool

    @property
    def truncation(self) -> int:
        return len(self.terms) - 1

    @property
    def grid(self):
        return self.u.grid

    @property
    def leading_correction(self) -> Field:
        """U_1, the explicit first correction of the series."""
        return self.terms[1]

    @property
    def p_function(self) -> Field:
        """p = r - U_1, so that u = e^{i tau Phi} (1 + p)."""
        return self.remainder.with_values(self.remainder.values - self.terms[1].values)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def trace(self) -> np.ndarray:
        """Values of u on the boundary ring."""
        return self.u.boundary_trace()

    def to_diagnostics(self, residual: float = None) -> dict:
        """JSON-ready record of the build."""
        rem = self.remainder.restrict()
        return {
            "tau": self.params.tau,
            "z0": [float(np.real(self.params.z0)), float(np.imag(self.params.z0))],
            "side": self.side.value,
            "J": self.truncation,
            "norms": [float(v) for v in self.norms],
            "ratios": [float(v) for v in self.ratios],
            "geometric_decay": bool(self.geometric_decay),
            "residual": residual,
            "remainder": {"l2": lp_norm(rem, 2.0), "l4": lp_norm(rem, 4.0)},
        }


def _phase_factor(grid, params: PhaseParams, side: Side) -> np.ndarray:
    """e^{i sign tau Phi} (or conj Phi) on the closure of X, zero elsewhere."""
    closure = grid.closure_mask
    w = grid.z[closure] - params.z0
    phase = w ** 2 if side == Side.PHASE else np.conj(w) ** 2
    out = np.zeros(grid.shape, dtype=complex)
    try:
        with np.errstate(over="raise", invalid="raise"):
            out[closure] = np.exp(1j * params.sign * params.tau * phase)
    except FloatingPointError:
        raise PhaseError(f"phase weight overflows at tau={params.tau:g}; lower tau") from None
    return out


def build_cgo(
    q: Potential,
    params: PhaseParams,
    side: Side = Side.PHASE,
    tail_tolerance: float = TAIL_TOLERANCE,
    max_terms: int = MAX_TERMS,
    transform: Optional[Field] = None,
) -> CGOSolution:
    """
    Neumann-series CGO solution of Delta u + q u = 0 in X.

    Args:
        q: potential
        params: phase parameters; tau > 0 and z0 inside X
        side: ``PHASE`` (e^{i tau Phi}) or ``CONJUGATE`` (e^{i tau conj Phi})
        tail_tolerance: stop once ||U_J|| <= tail_tolerance * ||U_1||
        max_terms: hard cap on J
        transform: precomputed dbar_inv(q) (``d_inv(q)`` on the conjugate
            side), reused across x0 scans

    Returns:
        CGOSolution

    Raises:
        CGOConvergenceError: term ratios >= 1 for three consecutive j
    """
    grid = q.grid
    if not params.tau > 0:
        raise PhaseError("CGO construction needs tau > 0")
    params.validate(grid)

    if side == Side.PHASE:
        inner_inv, conj_op = dbar_inv, r_tilde
    else:
        inner_inv, conj_op = d_inv, r_tilde_bar

    a = transform if transform is not None else inner_inv(q.field)
    c = a.values[grid.nearest_node(params.z0)]

    one = Field(grid, np.ones(grid.shape), Support.WHOLE)
    terms: List[Field] = [one]
    norms: List[float] = [lp_norm(one.restrict(), 2.0)]
    ratios: List[float] = []

    first = conj_op(a.with_values(0.5 * (a.values - c)), params)
    terms.append(first)
    norms.append(lp_norm(first.restrict(), 2.0))

    rising = 0
    j = 1
    while norms[j] > tail_tolerance * norms[1] and j < max_terms:
        prev = terms[j]
        nxt = conj_op(inner_inv(Field(grid, q.values * prev.values, Support.WHOLE)).scaled(0.5), params)
        terms.append(nxt)
        norms.append(lp_norm(nxt.restrict(), 2.0))
        j += 1
        ratio = norms[j] / norms[j - 1] if norms[j - 1] > 0 else 0.0
        ratios.append(ratio)
        rising = rising + 1 if ratio >= 1.0 else 0
        if rising >= DIVERGENCE_WINDOW:
            hint = params.tau * 2.0 * max(ratios[-DIVERGENCE_WINDOW:])
            raise CGOConvergenceError(
                f"Neumann series not contracting at tau={params.tau:g} "
                f"(ratios {', '.join(f'{r:.3g}' for r in ratios[-DIVERGENCE_WINDOW:])}); "
                f"try tau >= {hint:.3g}",
                tau_hint=hint,
            )

    if j == max_terms and norms[j] > tail_tolerance * norms[1]:
        LOGGER.warning(
            "CGO series truncated at J=%d with ||U_J||/||U_1||=%.2e (tau=%g)",
            j, norms[j] / norms[1], params.tau,
        )

    signs = np.array([(-1.0) ** k for k in range(len(terms))])
    stack = np.stack([t.values for t in terms])
    series = np.tensordot(signs, stack, axes=1)
    tail = np.tensordot(signs[2:], stack[2:], axes=1)

    phase = _phase_factor(grid, params, side)
    u = Field(grid, np.where(grid.closure_mask, phase * series, 0.0), Support.WHOLE)
    remainder = Field(grid, tail, Support.WHOLE)
    decay = all(r <= DECAY_RATIO for r in ratios)

    LOGGER.debug(
        "CGO %s tau=%g z0=%s J=%d max ratio=%.3g",
        side.value, params.tau, params.z0, len(terms) - 1, max(ratios) if ratios else 0.0,
    )
    return CGOSolution(
        params=params,
        side=side,
        terms=tuple(terms),
        remainder=remainder,
        u=u,
        norms=tuple(norms),
        ratios=tuple(ratios),
        geometric_decay=decay,
    )


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """5-point Laplacian on the nodes one cell away from the lattice edge (zero on the edge)."""
    out = np.zeros_like(values)
    out[1:-1, 1:-1] = (
        values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:] + values[1:-1, :-2]
        - 4.0 * values[1:-1, 1:-1]
    ) / h ** 2
    return out


def residual(sol: CGOSolution, q: Potential, margin: int = 2) -> float:
    """
    ||Delta_h u + q u|| / ||u|| over interior nodes at least ``margin`` cells inside X.
    """
    grid = sol.grid
    inner = ndimage.binary_erosion(grid.interior_mask, iterations=margin)
    u = sol.u.values
    res = laplacian(u, grid.spacing) + q.values * u
    den = np.sqrt(np.sum(np.abs(u[inner]) ** 2))
    if den == 0:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(res[inner]) ** 2)) / den)


@dataclass(frozen=True)
class RemainderReport:
    taus: Tuple[float, ...]
    l2: Tuple[float, ...]
    l4: Tuple[float, ...]
    l2_slope: float
    l4_slope: float
    p: float
    degenerate: bool

    @property
    def l4_threshold(self) -> float:
        return -(0.5 + 1.0 / (2.0 * self.p)) + 0.1

    @property
    def l2_pass(self) -> bool:
        return self.degenerate or self.l2_slope <= -1.4

    @property
    def l4_pass(self) -> bool:
        return self.degenerate or self.l4_slope <= self.l4_threshold

    @property
    def passed(self) -> bool:
        return self.l2_pass and self.l4_pass


def remainder_report(solutions: Sequence[CGOSolution], p: float = 4.0) -> RemainderReport:
    """
    Remainder decay across a tau sweep.

    For each tau the sup over the supplied x0 of ||r||_{L^2(X)} and
    ||r||_{L^4(X)} is taken, then log-log slopes are fitted (smallest tau
    dropped). An identically vanishing remainder gives slopes flagged zero.
    """
    by_tau = defaultdict(lambda: [0.0, 0.0])
    for sol in solutions:
        rem = sol.remainder.restrict()
        entry = by_tau[sol.params.tau]
        entry[0] = max(entry[0], lp_norm(rem, 2.0))
        entry[1] = max(entry[1], lp_norm(rem, 4.0))
    if len(by_tau) < 4:
        raise SweepError(f"remainder fits need at least 4 tau values, got {len(by_tau)}")

    taus = sorted(by_tau)
    l2 = [by_tau[t][0] for t in taus]
    l4 = [by_tau[t][1] for t in taus]
    degenerate = max(l2) == 0.0
    if degenerate:
        l2_slope = l4_slope = 0.0
    else:
        l2_slope = loglog_slope(taus, l2)
        l4_slope = loglog_slope(taus, l4)
    return RemainderReport(tuple(taus), tuple(l2), tuple(l4), l2_slope, l4_slope, p, degenerate)


@dataclass(frozen=True)
class GrowthReport:
    taus: Tuple[float, ...]
    norms: Tuple[float, ...]
    log_calibration: float
    passed: bool


def growth_check(solutions: Sequence[CGOSolution], R: float) -> GrowthReport:
    """
    ||u||_{W^1_2} <= C e^{4 R^2 tau} with C calibrated at the smallest tau.

    Comparisons are done in logarithms so large tau cannot overflow.
    """
    ordered = sorted(solutions, key=lambda s: s.params.tau)
    taus = tuple(s.params.tau for s in ordered)
    norms = tuple(w12_norm(s.u) for s in ordered)
    if not ordered:
        raise SweepError("growth check needs at least one solution")
    log_c = np.log(norms[0]) - 4.0 * R ** 2 * taus[0]
    passed = all(
        np.log(n) <= log_c + 4.0 * R ** 2 * t + 1e-9 for n, t in zip(norms, taus)
    )
    return GrowthReport(taus, norms, float(log_c), bool(passed))
