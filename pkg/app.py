"""
Command line entry point.

    python app.py <statphase|cgo|forward|recon|stability|uniqueness> [options]

Exit codes: 0 when every property check passes, 2 on a property or
acceptance violation, 1 on any other error. Messages go to standard error,
data only to files under the output directory.
"""

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import cpu_count

# Local imports
from bukhgeim import __version__
from bukhgeim.config import RunConfig, canonical_json, config_hash, load_config_file
from bukhgeim.errors import BukhgeimError, CGOConvergenceError, ParameterError, PropertyViolation
from bukhgeim.experiments import (
    ExperimentResult,
    emit_result,
    run_cgo_threshold,
    run_forward,
    run_identity,
    run_reconstruction,
    run_stability_curve,
    run_statphase_rate,
    run_uniqueness,
)
from bukhgeim.io_formats import guard_path, read_dn, write_dn, write_json, write_text
from bukhgeim.report import write_report

LOGGER = logging.getLogger("bukhgeim.cli")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2

PACKAGES = ("numpy", "scipy", "pandas", "matplotlib", "plotly", "joblib")


@dataclass
class RunManifest:
    """Provenance record written atomically at the end of every run."""

    subcommand: str
    config_path: Optional[str]
    config_hash: str
    outputs: List[str] = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    versions: Dict[str, str] = field(default_factory=dict)
    passed: bool = True
    failed_checks: List[str] = field(default_factory=list)


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version(), "bukhgeim": __version__}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def parse_tau_sweep(text: str) -> List[float]:
    """``a:b:n`` -> n logarithmically spaced values from a to b."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise ParameterError(f"--tau-sweep expects a:b:n, got '{text}'") from None
    if not (0 < a < b) or n < 2:
        raise ParameterError(f"--tau-sweep needs 0 < a < b and n >= 2, got '{text}'")
    return [float(t) for t in np.geomspace(a, b, n)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file (merged over the defaults)")
    common.add_argument("--out", help="output directory (overrides the configuration and BUKHGEIM_OUT)")
    common.add_argument("--workers", type=int, default=cpu_count(), help="parallel worker threads")
    common.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(
        prog="app.py",
        description="CGO solutions, DN maps and potential reconstruction studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("statphase", parents=[common], help="stationary-phase rate study")
    sub.add_parser("cgo", parents=[common], help="CGO threshold, remainder and growth study")

    fwd = sub.add_parser("forward", parents=[common], help="assemble a DN map with diagnostics")
    fwd.add_argument("--potential", default="bump", help="name of a configured potential")
    fwd.add_argument("--emit-dn", metavar="PATH", help="write the DN map (inside the output directory)")
    fwd.add_argument("--noise", type=float, help="relative Frobenius noise level added to the emitted map")

    rec = sub.add_parser("recon", parents=[common], help="reconstruction identity or reconstruction from DN files")
    rec.add_argument("--dn", metavar="PATH", help="DN map of the unknown potential")
    rec.add_argument("--dn-ref", metavar="PATH", help="DN map of the reference potential")
    taus = rec.add_mutually_exclusive_group()
    taus.add_argument("--tau", type=float, help="single tau")
    taus.add_argument("--tau-sweep", metavar="A:B:N", help="N log-spaced tau values from A to B")

    sub.add_parser("stability", parents=[common], help="stability curve")
    sub.add_parser("uniqueness", parents=[common], help="data-driven uniqueness sweep")
    return parser


def configure_logging(level: str):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level)


def _run_recon(args, cfg: RunConfig, out_dir: Path) -> List[ExperimentResult]:
    if args.tau is not None:
        taus = [args.tau]
    elif args.tau_sweep:
        taus = parse_tau_sweep(args.tau_sweep)
    else:
        taus = list(cfg.recon.taus)
    if any(t <= 0 for t in taus):
        raise ParameterError("tau must be positive")

    if args.dn or args.dn_ref:
        if not (args.dn and args.dn_ref):
            raise ParameterError("--dn and --dn-ref must be given together")
        grid = cfg.grid.build()
        dn_q = read_dn(args.dn, grid)
        dn_ref = read_dn(args.dn_ref, grid)
        return [run_reconstruction(cfg, dn_q, dn_ref, taus, args.workers)]
    return [run_identity(cfg, taus, args.workers)]


def run_command(args, cfg: RunConfig, out_dir: Path) -> List[ExperimentResult]:
    """Dispatch a subcommand; returns the results to emit."""
    workers = max(1, args.workers)
    if args.command == "statphase":
        return [run_statphase_rate(cfg, workers)]
    if args.command == "cgo":
        return [run_cgo_threshold(cfg, workers)]
    if args.command == "forward":
        result, dn = run_forward(cfg, workers, args.potential, args.noise)
        if args.emit_dn:
            result.outputs.append(write_dn(guard_path(out_dir, args.emit_dn), dn))
        return [result]
    if args.command == "recon":
        args.workers = workers
        return _run_recon(args, cfg, out_dir)
    if args.command == "stability":
        return [run_stability_curve(cfg, workers)]
    if args.command == "uniqueness":
        return [run_uniqueness(cfg, workers)]
    raise ParameterError(f"unknown subcommand '{args.command}'")


def main(argv: Sequence[str] = None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    started = time.perf_counter()

    try:
        # 1. Resolve configuration (--out beats BUKHGEIM_OUT beats the file)
        resolved = load_config_file(args.config)
        if args.out:
            resolved["output"]["directory"] = args.out
        if args.print_config:
            print(json.dumps(resolved, indent=2, sort_keys=True))
            return EXIT_OK
        cfg = RunConfig.from_dict(resolved)
        digest = config_hash(resolved)
        out_dir = Path(cfg.output.directory)
        out_dir.mkdir(parents=True, exist_ok=True)
        LOGGER.info("%s: config hash %s, output %s", args.command, digest[:12], out_dir)

        # 2. Run and emit
        results = run_command(args, cfg, out_dir)
        outputs = [write_text(guard_path(out_dir, "config.resolved.json"), canonical_json(resolved))]
        for result in results:
            emit_result(result, cfg, out_dir)
            outputs.extend(result.outputs)
        if cfg.output.report:
            outputs.append(write_report(guard_path(out_dir, f"{args.command}_report.html"), results,
                                        digest, cfg.output.color_scale))

        # 3. Manifest
        failed = [f"{r.name}.{c}" for r in results for c in r.failed_checks]
        manifest = RunManifest(
            subcommand=args.command,
            config_path=args.config,
            config_hash=digest,
            outputs=[str(p) for p in outputs],
            wall_clock_seconds=round(time.perf_counter() - started, 3),
            versions=package_versions(),
            passed=not failed,
            failed_checks=failed,
        )
        write_json(guard_path(out_dir, "run_manifest.json"), asdict(manifest))
    except (PropertyViolation, CGOConvergenceError) as e:
        LOGGER.error("%s", e)
        return EXIT_VIOLATION
    except BukhgeimError as e:
        LOGGER.error("%s", e)
        return EXIT_ERROR
    except OSError as e:
        LOGGER.error("IO_ERROR: %s", e)
        return EXIT_ERROR

    if failed:
        LOGGER.error("PROPERTY_VIOLATION: failed checks: %s", ", ".join(failed))
        return EXIT_VIOLATION
    LOGGER.info("%s passed in %.1f s", args.command, manifest.wall_clock_seconds)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
