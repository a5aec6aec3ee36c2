"""
**Desk-scale studies**

Each ``run_*`` function computes one study from a :class:`RunConfig` and
returns an :class:`ExperimentResult` (a table, named pass/fail checks, a
summary and figure data). ``emit_result`` writes the CSV/SVG/JSON files.

**Process Flow:**
1. **Build**: grid and potentials from the configuration.
2. **Sweep**: sweep points in parallel (joblib threads), collected in
   submission order so the output does not depend on the worker count.
3. **Check**: fits and property checks against ``cfg.tolerances``.
4. **Emit**: CSV rows tagged with the config hash, SVG curves and heatmaps.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from bukhgeim.cgo import build_cgo, growth_check, remainder_report, residual
from bukhgeim.charts import save_curves_svg, save_heatmap_svg
from bukhgeim.config import RunConfig
from bukhgeim.errors import CGOConvergenceError, SweepError
from bukhgeim.fits import loglog_slope
from bukhgeim.forward import (
    assemble_dn,
    cauchy_distance_data,
    dirichlet_eigenvalue,
    distance_probe_check,
    dn_operator_norm,
    eigenvalue_guard,
    probe_traces,
)
from bukhgeim.grid import Field, Potential, Support, lp_norm
from bukhgeim.io_formats import guard_path, write_field, write_json
from bukhgeim.phase import (
    PhaseParams,
    max_resolved_tau,
    multiplier_bound_sweep,
    stat_phase_error,
)
from bukhgeim.potentials import spectral_field
from bukhgeim.recon import (
    identity_check,
    reconstruct_from_dn,
    reconstruction_error,
    scan_nodes,
    stability_bound,
    tau_schedule,
)

LOGGER = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.10e"
MULTIPLIER_SWEEP_POINTS = 1_000_000


@dataclass(eq=False)
class ExperimentResult:
    """
    Outcome of one study.

    ``curves`` maps a figure name to named (x, y) series; ``heatmaps`` maps a
    name to a field drawn on the configured colour scale.
    """

    name: str
    table: pd.DataFrame
    checks: Dict[str, bool]
    summary: Dict[str, Any] = field(default_factory=dict)
    curves: Dict[str, Dict[str, Tuple[Sequence[float], Sequence[float]]]] = field(default_factory=dict)
    heatmaps: Dict[str, Field] = field(default_factory=dict)
    x_label: str = "tau"
    outputs: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failed_checks(self) -> List[str]:
        return [k for k, ok in self.checks.items() if not ok]


def _parallel(workers: int, fn, items: Sequence) -> list:
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return Parallel(n_jobs=workers, prefer="threads")(delayed(fn)(item) for item in items)


def _shifted(q: Potential, bump: Potential, eps: float) -> Potential:
    """q + eps * bump on the grid of q."""
    return Potential(
        Field(q.grid, q.values + eps * bump.values, Support.X),
        s=min(q.s, bump.s), p=min(q.p, bump.p), label=f"{q.label}+{eps:g}*{bump.label}",
    )


# =============================================================================
# Stationary phase
# =============================================================================

def run_statphase_rate(cfg: RunConfig, workers: int = 1) -> ExperimentResult:
    """
    Stationary-phase error against 2 tau^{-s/2} ||Q||_{W^s_2} over spectral test fields.

    Rows: one per (field, tau). The slope column is the family fit (RMS of
    the measured error over the fields of one s, smallest tau dropped).
    """
    sp = cfg.statphase
    tol = cfg.tolerances
    grid = cfg.grid.build(sp.resolution)
    families = [(si, s, k) for si, s in enumerate(sp.s_values) for k in range(sp.fields_per_s)]

    def sweep(item) -> List[dict]:
        si, s, k = item
        Q = Field(grid, spectral_field(grid, s, cfg.seed + 1000 * si + k), Support.WHOLE)
        rows = []
        for tau in sp.taus:
            err = stat_phase_error(Q, tau, s)
            rows.append({
                "family": f"s={s:g}", "field": k, "s": s, "tau": tau,
                "measured_error": err.measured, "bound": err.bound, "ratio": err.ratio,
            })
        LOGGER.info("stationary phase s=%g field %d: max ratio %.3f", s, k, max(r["ratio"] for r in rows))
        return rows

    rows = [r for part in _parallel(workers, sweep, families) for r in part]
    table = pd.DataFrame(rows)

    slopes: Dict[str, float] = {}
    curves: Dict[str, Tuple[list, list]] = {}
    for s in sp.s_values:
        fam = table[table["s"] == s]
        rms = fam.groupby("tau", sort=True)["measured_error"].apply(lambda v: float(np.sqrt(np.mean(v ** 2))))
        slopes[f"s={s:g}"] = loglog_slope(rms.index.values, rms.values)
        curves[f"s={s:g}"] = (list(rms.index.values), list(rms.values))
    table["slope"] = table["family"].map(slopes)

    violations = multiplier_bound_sweep(MULTIPLIER_SWEEP_POINTS, seed=cfg.seed)
    checks = {
        "ratio_within_tolerance": bool(table["ratio"].max() <= tol.statphase_ratio),
        "multiplier_bound": all(v == 0 for v in violations.values()),
    }
    for s in sp.s_values:
        checks[f"slope_s={s:g}"] = abs(slopes[f"s={s:g}"] + s / 2.0) <= tol.slope_window

    return ExperimentResult(
        name="statphase",
        table=table,
        checks=checks,
        summary={
            "slopes": slopes,
            "max_ratio": float(table["ratio"].max()),
            "multiplier_violations": {f"{k:g}": v for k, v in violations.items()},
            "resolution": sp.resolution,
        },
        curves={"statphase_error": curves},
    )


# =============================================================================
# CGO threshold
# =============================================================================

def _contracts(q: Potential, tau: float, z0s: Sequence[complex], cfg: RunConfig) -> bool:
    """True when every term ratio is <= 1/2 for all configured x0."""
    for z0 in z0s:
        try:
            sol = build_cgo(q, PhaseParams(tau, z0, 1), tail_tolerance=cfg.cgo.tail_tolerance,
                            max_terms=cfg.cgo.max_terms)
        except CGOConvergenceError:
            return False
        if not sol.geometric_decay:
            return False
    return True


def cgo_threshold(q: Potential, cfg: RunConfig, z0s: Sequence[complex] = None) -> float:
    """
    Smallest tau in the configured bracket at which the series contracts.

    Log-scale bisection; 0 for the zero potential, inf when the upper end of
    the bracket does not contract either.
    """
    if q.is_zero:
        return 0.0
    z0s = cfg.cgo.z0 if z0s is None else z0s
    lo, hi = cfg.cgo.threshold_bracket
    if _contracts(q, lo, z0s, cfg):
        return lo
    if not _contracts(q, hi, z0s, cfg):
        LOGGER.warning("%s: no contraction up to tau=%g", q.label, hi)
        return float("inf")
    for _ in range(cfg.cgo.bisection_steps):
        mid = float(np.sqrt(lo * hi))
        if _contracts(q, mid, z0s, cfg):
            hi = mid
        else:
            lo = mid
    return hi


def run_cgo_threshold(cfg: RunConfig, workers: int = 1) -> ExperimentResult:
    """
    Contraction threshold per amplitude, plus the remainder and growth study
    for the configured bump over ``cgo.taus``.
    """
    grid = cfg.grid.build()
    amplitudes = [0.0] + [a for a in cfg.cgo.amplitudes if a != 0.0]
    potentials = [cfg.potential("bump", grid, amplitude=a) for a in amplitudes]

    def threshold(q: Potential) -> float:
        t = cgo_threshold(q, cfg)
        LOGGER.info("CGO threshold for %s: tau=%g", q.label, t)
        return t

    thresholds = _parallel(workers, threshold, potentials)
    limit = max_resolved_tau(grid)
    table = pd.DataFrame({
        "amplitude": amplitudes,
        "lp_norm": [q.lp_norm() for q in potentials],
        "tau_threshold": thresholds,
        "resolved": [t <= limit for t in thresholds],
    })

    ordered = thresholds[1:]
    monotone = all(b >= a for a, b in zip(ordered, ordered[1:]))
    doubling = [
        thresholds[j] > thresholds[i]
        for i, a in enumerate(amplitudes) for j, b in enumerate(amplitudes)
        if a > 0 and b == 2 * a
    ]

    bump = cfg.potential("bump", grid)
    sweep = [(tau, z0) for tau in cfg.cgo.taus for z0 in cfg.cgo.z0]

    def build(item):
        tau, z0 = item
        sol = build_cgo(bump, PhaseParams(tau, z0, 1), tail_tolerance=cfg.cgo.tail_tolerance,
                        max_terms=cfg.cgo.max_terms)
        return sol, residual(sol, bump)

    built = _parallel(workers, build, sweep)
    solutions = [b[0] for b in built]
    remainder = remainder_report(solutions, p=bump.p)
    growth = growth_check([s for s in solutions if s.params.z0 == cfg.cgo.z0[0]], grid.enclosing_radius)

    checks = {
        "zero_amplitude_trivial": thresholds[0] == 0.0,
        "threshold_monotone": monotone,
        "threshold_doubling_strict": all(doubling),
        "remainder_l2_decay": remainder.l2_pass,
        "remainder_l4_decay": remainder.l4_pass,
        "growth": growth.passed,
    }
    if max(cfg.cgo.taus) > limit:
        LOGGER.warning("cgo.taus reach %g, beyond the lattice resolution limit %.3g", max(cfg.cgo.taus), limit)
    return ExperimentResult(
        name="cgo",
        table=table,
        checks=checks,
        summary={
            "remainder": {
                "taus": list(remainder.taus), "l2": list(remainder.l2), "l4": list(remainder.l4),
                "l2_slope": remainder.l2_slope, "l4_slope": remainder.l4_slope,
                "l4_threshold": remainder.l4_threshold,
            },
            "growth": {"norms": list(growth.norms), "log_calibration": growth.log_calibration},
            "max_resolved_tau": limit,
            "diagnostics": [s.to_diagnostics(r) for s, r in built],
        },
        curves={"cgo_remainder": {
            "L2": (list(remainder.taus), list(remainder.l2)),
            "L4": (list(remainder.taus), list(remainder.l4)),
        }},
    )


# =============================================================================
# Forward problem
# =============================================================================

def run_forward(cfg: RunConfig, workers: int = 1, potential: str = "bump", noise: float = None):
    """
    DN map of one configured potential with its solver diagnostics.

    Returns:
        (ExperimentResult, DNMap) so the caller can emit the map
    """
    grid = cfg.grid.build()
    fc = cfg.forward
    q = cfg.potential(potential, grid)
    q_ref = cfg.potential("reference", grid)
    dn = assemble_dn(q, workers)
    dn_ref = assemble_dn(q_ref, workers) if not np.array_equal(q.values, q_ref.values) else dn

    traces = probe_traces(grid, fc.probe_degree, fc.probe_taus, fc.probe_centers)
    probe = distance_probe_check(q, q_ref, traces, dn, dn_ref)
    level = fc.noise if noise is None else noise
    emitted = dn.with_noise(level, cfg.seed)

    summary = {
        "potential": q.label,
        "boundary_nodes": grid.boundary_count,
        "symmetry_defect": dn.symmetry_defect(),
        "dirichlet_eigenvalue": dirichlet_eigenvalue(grid),
        "guard": eigenvalue_guard(q, fc.guard_rtol),
        "dn_norm": dn_operator_norm(dn, dn_ref),
        "distance": probe.distance,
        "probe_sup_pairing": probe.sup_pairing,
        "noise": level,
        "q_fingerprint": dn.q_fingerprint,
    }
    table = pd.DataFrame([{k: v for k, v in summary.items() if k != "q_fingerprint"}])
    checks = {
        "symmetry": summary["symmetry_defect"] <= 1e-6,
        "distance_bound": probe.sup_pairing <= 1.05 * probe.distance,
    }
    LOGGER.info("forward %s: symmetry defect %.2e, d=%.3e", q.label, summary["symmetry_defect"], probe.distance)
    return ExperimentResult("forward", table, checks, summary), emitted


# =============================================================================
# Stability curve
# =============================================================================

def run_stability_curve(cfg: RunConfig, workers: int = 1) -> ExperimentResult:
    """
    Data distance against the true difference for q2 = q1 + eps * bump.

    C is calibrated at the largest eps (the anchor) and frozen; the bound
    must hold within ``tolerances.stability_factor`` at every other eps.
    """
    st = cfg.stability
    grid = cfg.grid.build()
    q1 = cfg.potential("reference", grid)
    bump = cfg.potential("bump", grid, amplitude=1.0)
    dn1 = assemble_dn(q1, workers)

    rows = []
    for k, eps in enumerate(st.epsilons):
        q2 = _shifted(q1, bump, eps)
        dn2 = assemble_dn(q2, workers).with_noise(st.noise, cfg.seed + k)
        d = cauchy_distance_data(dn1, dn2)
        schedule = tau_schedule(d, grid.enclosing_radius, st.alpha)
        rows.append({
            "epsilon": eps,
            "distance": d,
            "dn_norm": dn_operator_norm(dn1, dn2),
            "l2_difference": lp_norm((q2 - q1).field, 2.0),
            "case": schedule.case,
            "theoretical_tau": schedule.tau if schedule.tau is not None else np.nan,
        })
        LOGGER.info("stability eps=%g: d=%.3e", eps, d)

    table = pd.DataFrame(rows)
    anchor = table.iloc[0]
    C = anchor["l2_difference"] / stability_bound(anchor["distance"], st.s, 1.0)
    table["bound"] = [stability_bound(d, st.s, C) for d in table["distance"]]
    table["ratio"] = table["l2_difference"] / table["bound"]
    table["anchor"] = [k == 0 for k in range(len(table))]

    others = table[~table["anchor"]]
    distances = table["distance"].values
    checks = {
        "bound_holds": bool((others["ratio"] <= cfg.tolerances.stability_factor).all()),
        "distance_decreasing": bool(np.all(np.diff(distances) < 0)),
    }
    return ExperimentResult(
        name="stability",
        table=table,
        checks=checks,
        summary={"C": float(C), "s": st.s, "alpha": st.alpha, "noise": st.noise},
        curves={"stability_curve": {
            "distance": (list(table["epsilon"]), list(table["distance"])),
            "L2 difference": (list(table["epsilon"]), list(table["l2_difference"])),
            "bound": (list(table["epsilon"]), list(table["bound"])),
        }},
        x_label="epsilon",
    )


# =============================================================================
# Uniqueness sweep
# =============================================================================

def nonincreasing_to_floor(errors: Sequence[float], slack: float) -> bool:
    """Nonincreasing (up to ``slack``) until the smallest error is reached."""
    errors = list(errors)
    if not errors:
        return True
    floor_at = int(np.argmin(errors))
    return all(errors[i + 1] <= errors[i] * (1.0 + slack) for i in range(floor_at))


def run_uniqueness(cfg: RunConfig, workers: int = 1) -> ExperimentResult:
    """Data-driven reconstruction error over the tau grid, per bump amplitude."""
    rc = cfg.recon
    tol = cfg.tolerances
    grid = cfg.grid.build()
    q_ref = cfg.potential("reference", grid)
    bump = cfg.potential("bump", grid, amplitude=1.0)
    dn_ref = assemble_dn(q_ref, workers)
    nodes = scan_nodes(grid, rc.collar, rc.stride, rc.scan_radius)
    if len(nodes) == 0:
        raise SweepError("the reconstruction scan is empty; widen recon.scan_radius or lower recon.collar")

    rows, finals, checks = [], {}, {}
    curves: Dict[str, Tuple[list, list]] = {}
    recon_norms: Dict[float, float] = {}
    for a in cfg.uniqueness_amplitudes:
        q = _shifted(q_ref, bump, a)
        truth = (q - q_ref).field
        dn_q = assemble_dn(q, workers)
        errors = []
        for tau in rc.taus:
            recon = reconstruct_from_dn(dn_q, dn_ref, q_ref, tau, rc.collar, rc.stride,
                                        rc.scan_radius, workers, rc.correct)
            err = reconstruction_error(recon, truth, nodes)
            errors.append(err)
            rows.append({
                "amplitude": a, "tau": tau, "l2_error": err,
                "recon_l2": float(np.linalg.norm(recon.values[nodes[:, 0], nodes[:, 1]])) * grid.spacing,
                "truth_l2": float(np.linalg.norm(truth.values[nodes[:, 0], nodes[:, 1]])) * grid.spacing,
            })
            LOGGER.info("uniqueness amplitude=%g tau=%g: error %.4f", a, tau, err)
        recon_norms[a] = rows[-1]["recon_l2"]
        finals[f"recon_a{a:g}"] = recon
        finals[f"truth_a{a:g}"] = truth
        curves[f"amplitude {a:g}"] = (list(rc.taus), errors)
        checks[f"nonincreasing_a{a:g}"] = nonincreasing_to_floor(errors, tol.monotone_slack)
        checks[f"reduction_a{a:g}"] = errors[0] >= tol.uniqueness_reduction * min(errors)

    linearity = {
        f"{b:g}/{a:g}": recon_norms[b] / recon_norms[a]
        for a in recon_norms for b in recon_norms if b == 2 * a and recon_norms[a] > 0
    }
    for key, ratio in linearity.items():
        checks[f"linearity_{key}"] = 1.8 <= ratio <= 2.2

    return ExperimentResult(
        name="uniqueness",
        table=pd.DataFrame(rows),
        checks=checks,
        summary={"scan_points": int(len(nodes)), "linearity": linearity,
                 "max_resolved_tau": max_resolved_tau(grid)},
        curves={"uniqueness_error": curves},
        heatmaps=finals,
    )


# =============================================================================
# Reconstruction identity and data-driven reconstruction
# =============================================================================

def run_identity(cfg: RunConfig, taus: Sequence[float], workers: int = 1) -> ExperimentResult:
    """Term-by-term reconstruction identity for the (bump, reference) pair."""
    rc = cfg.recon
    grid = cfg.grid.build()
    q1 = cfg.potential("bump", grid)
    q2 = cfg.potential("reference", grid)
    dq_norm = lp_norm((q1 - q2).field, 2.0)

    rows, reports = [], []
    for tau in taus:
        report = identity_check(q1, q2, tau, rc.collar, rc.stride, rc.scan_radius, workers)
        reports.append(report.to_json())
        rows.append({"tau": tau, **report.terms, "identity_defect": report.identity_defect,
                     "l2_error": report.l2_error})
    table = pd.DataFrame(rows)
    checks = {
        "identity": bool((table["identity_defect"] <= 0.02).all()),
        "tail_half": bool((table["tail"] <= 0.5 * dq_norm).all()),
    }
    curves = {name: (list(table["tau"]), list(table[name]))
              for name in ("statphase_defect", "corr_dbar", "corr_d", "tail")}
    return ExperimentResult(
        name="identity",
        table=table,
        checks=checks,
        summary={"reports": reports, "dq_l2": dq_norm},
        curves={"identity_terms": curves},
        heatmaps={"central_pairing": report.recon_field} if taus else {},
    )


def run_reconstruction(cfg: RunConfig, dn_q, dn_ref, taus: Sequence[float], workers: int = 1) -> ExperimentResult:
    """Reconstruct q - q_ref from two DN maps at each tau (no truth available)."""
    rc = cfg.recon
    q_ref = cfg.potential("reference", dn_ref.grid)
    grid = q_ref.grid
    nodes = scan_nodes(grid, rc.collar, rc.stride, rc.scan_radius)
    rows, fields = [], {}
    for tau in taus:
        recon = reconstruct_from_dn(dn_q, dn_ref, q_ref, tau, rc.collar, rc.stride,
                                    rc.scan_radius, workers, rc.correct)
        rows.append({"tau": tau, "recon_l2": lp_norm(recon, 2.0),
                     "recon_max": lp_norm(recon, np.inf), "scan_points": len(nodes)})
        fields[f"recon_tau{tau:g}"] = recon
    return ExperimentResult(
        name="recon",
        table=pd.DataFrame(rows),
        checks={},
        summary={"q_fingerprint": dn_q.q_fingerprint, "reference_fingerprint": dn_ref.q_fingerprint},
        curves={"recon_norm": {"L2": ([r["tau"] for r in rows], [r["recon_l2"] for r in rows])}},
        heatmaps=fields,
    )


# =============================================================================
# Output
# =============================================================================

def write_table(table: pd.DataFrame, path: Path, config_hash: str) -> Path:
    """CSV with a config_hash column, fixed float format and LF line endings."""
    out = table.copy()
    out["config_hash"] = config_hash
    path.parent.mkdir(parents=True, exist_ok=True)
    out.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


def emit_result(result: ExperimentResult, cfg: RunConfig, out_dir: Optional[Path] = None) -> List[Path]:
    """Write the table, SVG figures, binary fields and a JSON summary under the output directory."""
    out_dir = Path(out_dir or cfg.output_dir)
    digest = cfg.hash
    paths = [write_table(result.table, guard_path(out_dir, f"{result.name}.csv"), digest)]
    for name, series in result.curves.items():
        paths.append(save_curves_svg(guard_path(out_dir, f"{name}.svg"), series,
                                     name.replace("_", " "), "value", digest, x_label=result.x_label))
    for name, f in result.heatmaps.items():
        paths.append(save_heatmap_svg(guard_path(out_dir, f"{result.name}_{name}.svg"), f,
                                      name.replace("_", " "), cfg.output.color_scale, digest))
        paths.append(write_field(guard_path(out_dir, f"{result.name}_{name}.bfld"), f))
    paths.append(write_json(guard_path(out_dir, f"{result.name}_summary.json"), {
        "name": result.name,
        "passed": result.passed,
        "checks": result.checks,
        "summary": result.summary,
        "config_hash": digest,
    }))
    result.outputs.extend(paths)
    return paths
