"""
**Reconstruction of a potential difference**

For CGO solutions u1 (phase side, q1) and u2 (conjugate side, q2) built at
the same x0, with e = e^{i tau (Phi + conj Phi)} and c = 2 tau / pi,

    (q1 - q2)(x0) = [(q1 - q2)(x0) - c int e (q1 - q2)]        statphase_defect
                  + c int u1 (q1 - q2) u2                      central_pairing
                  - c/4 int dbar_inv(q1 - q2) (d_inv q2 - d_inv q2(x0)) e    corr_dbar
                  - c/4 int d_inv(q1 - q2) (dbar_inv q1 - dbar_inv q1(x0)) e corr_d
                  - c int e (q1 - q2) (p1 p2 + r1 + r2)        tail

with all integrals taken as the same Riemann sums over X, so the identity holds
on the lattice to round-off. The central pairing equals a boundary pairing of
DN maps, which is what makes the reconstruction data-driven.

**Process Flow:**
1. **Scan**: interior nodes at least ``collar`` cells from the boundary.
2. **Build**: one CGO pair (or free-CGO traces) per scan node.
3. **Reduce**: per-term values merged in scan order; L^2 summaries.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import ndimage

from bukhgeim.cauchy import d_inv, dbar_inv
from bukhgeim.cgo import Side, build_cgo
from bukhgeim.errors import GridMismatchError, ParameterError
from bukhgeim.forward import DNMap, boundary_pairing_many
from bukhgeim.grid import Field, Grid2D, Potential, Support, lp_norm
from bukhgeim.phase import PhaseParams, stat_phase_apply, weight

LOGGER = logging.getLogger(__name__)

TERM_NAMES = ("statphase_defect", "central_pairing", "corr_dbar", "corr_d", "tail")
COLLAR_CELLS = 4
SCAN_CHUNK = 16


def scan_nodes(
    grid: Grid2D, collar: int = COLLAR_CELLS, stride: int = 1, scan_radius: float = None
) -> np.ndarray:
    """
    Reconstruction points: interior nodes at distance >= ``collar`` cells from
    the complement of X, thinned to every ``stride``-th lattice row/column and
    optionally restricted to |x0| <= ``scan_radius``.

    Returns:
        (m, 2) lattice indices in row-major order
    """
    depth = ndimage.distance_transform_edt(grid.interior_mask)
    keep = grid.interior_mask & (depth >= collar)
    if stride > 1:
        rows = np.arange(grid.resolution) % stride == 0
        keep &= rows[:, None] & rows[None, :]
    if scan_radius is not None:
        keep &= np.abs(grid.z) <= scan_radius
    return np.argwhere(keep)


def _scan_field(grid: Grid2D, nodes: np.ndarray, values: np.ndarray) -> Field:
    out = np.zeros(grid.shape, dtype=complex)
    out[nodes[:, 0], nodes[:, 1]] = values
    return Field(grid, out, Support.X)


def _scan_l2(values: np.ndarray, grid: Grid2D, stride: int) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2)) * stride * grid.spacing)


@dataclass(frozen=True, eq=False)
class ReconReport:
    """
    Per-term magnitudes of the reconstruction identity at one tau.

    ``terms`` holds L^2(dx0) norms over the scan; ``term_values`` the complex
    values at the scan nodes. ``recon_field`` is the central pairing, the
    part of the identity that Cauchy data determine.
    """

    tau: float
    terms: Dict[str, float]
    recon_field: Field = field(repr=False)
    l2_error: Optional[float]
    identity_defect: Optional[float]
    nodes: np.ndarray = field(repr=False)
    term_values: Dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    uniqueness: bool = False

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "terms": {k: float(v) for k, v in self.terms.items()},
            "l2_error": self.l2_error,
            "identity_defect": self.identity_defect,
            "scan_points": int(len(self.nodes)),
            "uniqueness_variant": self.uniqueness,
        }


def _identity_terms(
    q1: Potential,
    q2: Potential,
    tau: float,
    node: Tuple[int, int],
    pre: dict,
) -> np.ndarray:
    grid = q1.grid
    mask = grid.interior_mask
    cell = grid.spacing ** 2
    c = 2.0 * tau / np.pi
    i, j = node
    params = PhaseParams(tau, grid.z[i, j], 1)
    e = weight(grid, params).values
    dq = pre["dq"]

    sol1 = build_cgo(q1, params, Side.PHASE, transform=pre["A1"])
    sol2 = build_cgo(q2, params, Side.CONJUGATE, transform=pre["A2"])
    u1, u2 = sol1.u.values, sol2.u.values
    p1, p2 = sol1.p_function.values, sol2.p_function.values
    r1, r2 = sol1.remainder.values, sol2.remainder.values

    def integral(values: np.ndarray) -> complex:
        return cell * np.sum(values[mask])

    lhs = dq[i, j]
    statphase = lhs - c * integral(e * dq)
    central = c * integral(u1 * dq * u2)
    corr_dbar = -0.25 * c * integral(pre["B_dbar"] * (pre["A2"].values - pre["A2"].values[i, j]) * e)
    corr_d = -0.25 * c * integral(pre["B_d"] * (pre["A1"].values - pre["A1"].values[i, j]) * e)
    tail = -c * integral(e * dq * (p1 * p2 + r1 + r2))
    return np.array([lhs, statphase, central, corr_dbar, corr_d, tail])


def identity_check(
    q1: Potential,
    q2: Potential,
    tau: float,
    collar: int = COLLAR_CELLS,
    stride: int = 1,
    scan_radius: float = None,
    workers: int = 1,
    uniqueness: bool = False,
) -> ReconReport:
    """
    Evaluate every term of the reconstruction identity over an x0 scan.

    Args:
        q1, q2: known potentials on the same grid
        tau: CGO parameter (above both series thresholds)
        collar: boundary collar in cells
        stride: scan thinning
        scan_radius: optional restriction |x0| <= scan_radius
        workers: joblib threads over scan chunks
        uniqueness: equal-Cauchy-data variant; the central pairing is dropped
            from the right-hand side and the residual equals the pairing

    Returns:
        ReconReport with per-term L^2 norms and the relative identity defect
    """
    if q1.grid is not q2.grid:
        raise GridMismatchError("potentials live on different grids")
    grid = q1.grid
    dq_field = q1 - q2
    dq = dq_field.values
    pre = {
        "dq": dq,
        "A1": dbar_inv(q1.field),
        "A2": d_inv(q2.field),
        "B_dbar": dbar_inv(dq_field.field).values,
        "B_d": d_inv(dq_field.field).values,
    }
    nodes = scan_nodes(grid, collar, stride, scan_radius)
    LOGGER.info("identity check tau=%g over %d scan points", tau, len(nodes))

    chunks = [nodes[k:k + SCAN_CHUNK] for k in range(0, len(nodes), SCAN_CHUNK)]

    def run(chunk: np.ndarray) -> np.ndarray:
        return np.array([_identity_terms(q1, q2, tau, tuple(n), pre) for n in chunk])

    if workers == 1:
        parts = [run(ch) for ch in chunks]
    else:
        parts = Parallel(n_jobs=workers, prefer="threads")(delayed(run)(ch) for ch in chunks)
    table = np.vstack(parts) if parts else np.zeros((0, 6), dtype=complex)

    lhs = table[:, 0]
    values = {name: table[:, k + 1] for k, name in enumerate(TERM_NAMES)}
    rhs_names = [n for n in TERM_NAMES if not (uniqueness and n == "central_pairing")]
    residual = lhs - sum(values[n] for n in rhs_names)

    terms = {"lhs": _scan_l2(lhs, grid, stride)}
    terms.update({name: _scan_l2(v, grid, stride) for name, v in values.items()})
    scale = lp_norm(dq_field.field, 2.0)
    defect = _scan_l2(residual, grid, stride)
    if uniqueness:
        terms["uniqueness_residual"] = defect
    identity_defect = defect / scale if scale > 0 else defect
    l2_error = (
        _scan_l2(values["central_pairing"] - lhs, grid, stride) / terms["lhs"]
        if terms["lhs"] > 0 else None
    )
    return ReconReport(
        tau=float(tau),
        terms=terms,
        recon_field=_scan_field(grid, nodes, values["central_pairing"]),
        l2_error=l2_error,
        identity_defect=float(identity_defect),
        nodes=nodes,
        term_values=dict(values, lhs=lhs),
        uniqueness=uniqueness,
    )


def _free_traces(grid: Grid2D, tau: float, z0: complex) -> Tuple[np.ndarray, np.ndarray]:
    """Traces of e^{i tau Phi} and e^{i tau conj Phi} (the CGO solutions for q = 0)."""
    w = grid.boundary_points - z0
    return np.exp(1j * tau * w ** 2), np.exp(1j * tau * np.conj(w) ** 2)


def _correction(
    grid: Grid2D, estimate: Field, q_ref: Potential, tau: float, nodes: np.ndarray
) -> np.ndarray:
    """corr_dbar + corr_d at the scan nodes, with the current estimate standing in for q - q_ref."""
    mask = grid.interior_mask

    def T(values: np.ndarray) -> np.ndarray:
        masked = Field(grid, np.where(mask, values, 0.0), Support.WHOLE)
        return stat_phase_apply(masked, tau, 1, mode="quadrature").values

    a1 = dbar_inv(q_ref.field).values
    a2 = d_inv(q_ref.field).values
    b_dbar = dbar_inv(estimate).values
    b_d = d_inv(estimate).values
    corr = -0.25 * (T(b_dbar * a2) - a2 * T(b_dbar)) - 0.25 * (T(b_d * a1) - a1 * T(b_d))
    return corr[nodes[:, 0], nodes[:, 1]]


def reconstruct_from_dn(
    dn_q: DNMap,
    dn_ref: DNMap,
    q_ref: Potential,
    tau: float,
    collar: int = COLLAR_CELLS,
    stride: int = 1,
    scan_radius: float = None,
    workers: int = 1,
    correct: bool = True,
) -> Field:
    """
    Approximate (q - q_ref)(x0) from boundary data.

    At each scan point the traces of the q_ref CGO pair are fed to the
    boundary pairing of the two DN maps, scaled by 2 tau / pi. For q_ref = 0
    the traces are the exact free solutions. For q_ref != 0 one correction
    step adds the computable terms involving q_ref (requires ``stride=1``).

    Returns:
        X-supported field, zero outside the scan
    """
    grid = q_ref.grid
    for dn in (dn_q, dn_ref):
        if not dn.grid.same_as(grid) or dn.grid.boundary_count != grid.boundary_count:
            raise GridMismatchError("DN maps and reference potential live on different grids")
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")

    nodes = scan_nodes(grid, collar, stride, scan_radius)
    z0s = grid.z[nodes[:, 0], nodes[:, 1]]
    LOGGER.info("reconstruction tau=%g over %d scan points", tau, len(nodes))

    if q_ref.is_zero:
        pairs = [_free_traces(grid, tau, z0) for z0 in z0s]
    else:
        a1 = dbar_inv(q_ref.field)
        a2 = d_inv(q_ref.field)

        def traces(z0: complex) -> Tuple[np.ndarray, np.ndarray]:
            params = PhaseParams(tau, z0, 1)
            u1 = build_cgo(q_ref, params, Side.PHASE, transform=a1)
            u2 = build_cgo(q_ref, params, Side.CONJUGATE, transform=a2)
            return u1.trace(), u2.trace()

        if workers == 1:
            pairs = [traces(z0) for z0 in z0s]
        else:
            pairs = Parallel(n_jobs=workers, prefer="threads")(delayed(traces)(z0) for z0 in z0s)

    if not pairs:
        return Field(grid, np.zeros(grid.shape), Support.X)
    T1 = np.stack([p[0] for p in pairs], axis=1)
    T2 = np.stack([p[1] for p in pairs], axis=1)
    values = (2.0 * tau / np.pi) * boundary_pairing_many(dn_q, dn_ref, T1, T2)

    if correct and not q_ref.is_zero:
        if stride != 1:
            LOGGER.warning("correction step skipped: it needs the full scan (stride=1)")
        else:
            estimate = _scan_field(grid, nodes, values)
            values = values + _correction(grid, estimate, q_ref, tau, nodes)
    return _scan_field(grid, nodes, values)


def reconstruction_error(recon: Field, truth: Field, nodes: np.ndarray) -> float:
    """||recon - truth|| / ||truth|| over the scan nodes."""
    r = recon.values[nodes[:, 0], nodes[:, 1]]
    t = truth.values[nodes[:, 0], nodes[:, 1]]
    den = np.linalg.norm(t)
    return float(np.linalg.norm(r - t) / den) if den > 0 else float(np.linalg.norm(r))


@dataclass(frozen=True)
class TauSchedule:
    """Case 1 carries the tau of the stability argument; case 2 (d >= 1) has none."""

    case: int
    tau: Optional[float]
    R0: float
    trivial_bound: Optional[float] = None


def tau_schedule(d: float, R: float, alpha: float, M: float = None) -> TauSchedule:
    """
    tau = (alpha / R0)(1 + ln(1/d)) with R0 = 8 R^2 + 1 when d < 1.

    For d >= 1 the trivial estimate 2 M d is returned instead (when M is given).
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if d < 0:
        raise ParameterError(f"distance must be nonnegative, got {d}")
    R0 = 8.0 * R ** 2 + 1.0
    if d >= 1.0:
        return TauSchedule(2, None, R0, None if M is None else 2.0 * M * d)
    if d == 0.0:
        return TauSchedule(1, np.inf, R0)
    return TauSchedule(1, alpha / R0 * (1.0 + np.log(1.0 / d)), R0)


def stability_bound(d: float, s: float, C: float) -> float:
    """C (1 + ln(1/d))^{-s/2} for d < 1, C d for d >= 1."""
    if s == 0.5:
        raise ParameterError("s = 1/2 is excluded from the stability estimate")
    if not 0.0 < s <= 1.0:
        raise ParameterError(f"s must lie in (0, 1], got {s}")
    if d < 0:
        raise ParameterError(f"distance must be nonnegative, got {d}")
    if d >= 1.0:
        return C * d
    if d == 0.0:
        return 0.0
    return C * (1.0 + np.log(1.0 / d)) ** (-s / 2.0)
