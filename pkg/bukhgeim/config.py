"""
Run configuration.

A JSON file is merged over ``DEFAULT_CONFIG`` and loaded into frozen
dataclasses. Unknown keys, wrong types and out-of-range values raise
ConfigError naming the offending key path. ``config_hash`` is the SHA-256 of
the canonical JSON (sorted keys, compact separators) of the resolved
configuration.
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from bukhgeim.errors import ConfigError
from bukhgeim.grid import Domain, DomainKind, Grid2D, make_grid

LOGGER = logging.getLogger(__name__)

OUTPUT_ENV = "BUKHGEIM_OUT"

# Default run configuration (every experiment re-runnable from one file)
DEFAULT_CONFIG: Dict[str, Any] = {
    "seed": 20240601,
    "grid": {
        "half_width": 1.5,
        "resolution": 128,
        "domain": "disk",
        "size": 1.0,
        "enclosing_radius": 1.0,
    },
    "potentials": {
        "reference": {"kind": "constant", "center": [0.0, 0.0], "radius": 0.5,
                      "amplitude": 0.0, "s": 1.0, "p": 4.0, "seed": 0},
        "bump": {"kind": "bump", "center": [0.0, 0.0], "radius": 0.9,
                 "amplitude": 0.2, "s": 1.0, "p": 4.0, "seed": 0},
    },
    "cgo": {
        "tail_tolerance": 1e-10,
        "max_terms": 40,
        "taus": [1.0, 2.0, 4.0, 8.0, 16.0],
        "z0": [[0.0, 0.0], [0.25, -0.15]],
        "amplitudes": [4.0, 8.0, 16.0],
        "threshold_bracket": [0.05, 128.0],
        "bisection_steps": 14,
    },
    "forward": {
        "guard_rtol": 1e-8,
        "noise": 0.0,
        "probe_degree": 3,
        "probe_taus": [1.0, 2.0],
        "probe_centers": [[0.0, 0.0], [0.3, 0.2]],
    },
    "recon": {
        "collar": 4,
        "stride": 1,
        "scan_radius": 0.5,
        "correct": True,
        "taus": [0.5, 1.0, 2.0, 4.0],
    },
    "statphase": {
        "resolution": 256,
        "taus": [4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0],
        "s_values": [0.25, 0.75, 1.0],
        "fields_per_s": 5,
    },
    "stability": {
        "epsilons": [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
        "s": 1.0,
        "alpha": 0.5,
        "noise": 0.0,
    },
    "uniqueness": {
        "amplitudes": [0.1, 0.2],
    },
    "tolerances": {
        "statphase_ratio": 1.25,
        "slope_window": 0.15,
        "decay_ratio": 0.5,
        "stability_factor": 3.0,
        "uniqueness_reduction": 3.0,
        "monotone_slack": 0.05,
    },
    "output": {
        "directory": "results",
        "report": True,
        "color_scale": [-0.25, 0.25],
    },
}

POTENTIAL_TEMPLATE = DEFAULT_CONFIG["potentials"]["bump"]


def _type_ok(default: Any, value: Any) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, (int, float)):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, list)
    return isinstance(value, type(default))


def _merge(default: Dict[str, Any], override: Dict[str, Any], path: str) -> Dict[str, Any]:
    if not isinstance(override, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    merged = copy.deepcopy(default)
    for key, value in override.items():
        key_path = f"{path}.{key}" if path else key
        if path == "potentials":
            merged[key] = _merge(POTENTIAL_TEMPLATE if key not in default else default[key], value, key_path)
            continue
        if key not in default:
            raise ConfigError(f"{key_path}: unknown key")
        if isinstance(default[key], dict):
            merged[key] = _merge(default[key], value, key_path)
        elif default[key] is None or _type_ok(default[key], value):
            merged[key] = value
        else:
            raise ConfigError(
                f"{key_path}: expected {type(default[key]).__name__}, got {type(value).__name__}"
            )
    return merged


def resolve_config(override: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Defaults merged with ``override`` (validated); the environment may redirect the output directory."""
    resolved = _merge(DEFAULT_CONFIG, override or {}, "")
    env_out = os.environ.get(OUTPUT_ENV)
    if env_out:
        resolved["output"]["directory"] = env_out
    return resolved


def load_config_file(path: Union[str, Path, None]) -> Dict[str, Any]:
    """Read a JSON configuration file and resolve it."""
    if path is None:
        return resolve_config()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration '{path}': {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"'{path}' is not valid JSON: {e.msg} (line {e.lineno})") from e
    return resolve_config(data)


def canonical_json(resolved: Dict[str, Any]) -> str:
    return json.dumps(resolved, sort_keys=True, separators=(",", ":"))


def config_hash(resolved: Dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(resolved).encode("utf-8")).hexdigest()


def _increasing(values: List[float], path: str):
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{path}: values must be strictly increasing")
    if any(v <= 0 for v in values):
        raise ConfigError(f"{path}: values must be positive")


def _points(values: List[List[float]], path: str) -> Tuple[complex, ...]:
    try:
        return tuple(complex(float(p[0]), float(p[1])) for p in values)
    except (TypeError, IndexError, ValueError) as e:
        raise ConfigError(f"{path}: expected a list of [x1, x2] pairs") from e


@dataclass(frozen=True)
class GridSpec:
    half_width: float
    resolution: int
    domain: str
    size: float
    enclosing_radius: float

    def __post_init__(self):
        if self.domain not in {k.value for k in DomainKind}:
            raise ConfigError(f"grid.domain: expected 'disk' or 'square', got '{self.domain}'")

    def build(self, resolution: int = None) -> Grid2D:
        return make_grid(
            self.half_width,
            resolution or self.resolution,
            Domain(DomainKind(self.domain), self.size),
            self.enclosing_radius,
        )


@dataclass(frozen=True)
class PotentialSpec:
    kind: str
    center: Tuple[float, float]
    radius: float
    amplitude: float
    s: float
    p: float
    seed: int

    def __post_init__(self):
        if self.kind not in ("bump", "gaussian", "constant", "spectral"):
            raise ConfigError(f"potentials: unknown family '{self.kind}'")
        if not 0.0 <= self.s <= 1.0 or not self.p > 2.0 or self.radius <= 0:
            raise ConfigError("potentials: need 0<=s<=1, p>2 and radius>0")

    def build(self, grid: Grid2D, label: str, amplitude: float = None):
        from bukhgeim.potentials import make_potential

        return make_potential(
            grid, self.kind, self.center, self.radius,
            self.amplitude if amplitude is None else amplitude,
            s=self.s, p=self.p, seed=self.seed, label=label,
        )


@dataclass(frozen=True)
class CGOSpec:
    tail_tolerance: float
    max_terms: int
    taus: Tuple[float, ...]
    z0: Tuple[complex, ...]
    amplitudes: Tuple[float, ...]
    threshold_bracket: Tuple[float, float]
    bisection_steps: int


@dataclass(frozen=True)
class ForwardSpec:
    guard_rtol: float
    noise: float
    probe_degree: int
    probe_taus: Tuple[float, ...]
    probe_centers: Tuple[complex, ...]


@dataclass(frozen=True)
class ReconSpec:
    collar: int
    stride: int
    scan_radius: Optional[float]
    correct: bool
    taus: Tuple[float, ...]


@dataclass(frozen=True)
class StatPhaseSpec:
    resolution: int
    taus: Tuple[float, ...]
    s_values: Tuple[float, ...]
    fields_per_s: int


@dataclass(frozen=True)
class StabilitySpec:
    epsilons: Tuple[float, ...]
    s: float
    alpha: float
    noise: float

    def __post_init__(self):
        if self.s == 0.5 or not 0.0 < self.s <= 1.0:
            raise ConfigError("stability.s: must lie in (0, 1] and differ from 1/2")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("stability.alpha: must lie in (0, 1)")


@dataclass(frozen=True)
class Tolerances:
    statphase_ratio: float
    slope_window: float
    decay_ratio: float
    stability_factor: float
    uniqueness_reduction: float
    monotone_slack: float


@dataclass(frozen=True)
class OutputSpec:
    directory: str
    report: bool
    color_scale: Tuple[float, float]


@dataclass(frozen=True)
class RunConfig:
    """Typed view of a resolved configuration; ``raw`` keeps the dict that was hashed."""

    seed: int
    grid: GridSpec
    potentials: Dict[str, PotentialSpec]
    cgo: CGOSpec
    forward: ForwardSpec
    recon: ReconSpec
    statphase: StatPhaseSpec
    stability: StabilitySpec
    uniqueness_amplitudes: Tuple[float, ...]
    tolerances: Tolerances
    output: OutputSpec
    raw: Dict[str, Any] = field(repr=False, compare=False, default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    @property
    def output_dir(self) -> Path:
        return Path(self.output.directory)

    def potential(self, name: str, grid: Grid2D, amplitude: float = None):
        if name not in self.potentials:
            raise ConfigError(f"potentials.{name}: not defined")
        return self.potentials[name].build(grid, name, amplitude)

    @classmethod
    def from_dict(cls, resolved: Dict[str, Any]) -> "RunConfig":
        c = resolved
        try:
            cgo = c["cgo"]
            _increasing(cgo["taus"], "cgo.taus")
            _increasing(c["recon"]["taus"], "recon.taus")
            _increasing(c["statphase"]["taus"], "statphase.taus")
            _increasing(sorted(c["stability"]["epsilons"]), "stability.epsilons")
            if len(set(c["stability"]["epsilons"])) != len(c["stability"]["epsilons"]):
                raise ConfigError("stability.epsilons: values must be distinct")
            lo, hi = cgo["threshold_bracket"]
            if not 0 < lo < hi:
                raise ConfigError("cgo.threshold_bracket: need 0 < low < high")
            return cls(
                seed=int(c["seed"]),
                grid=GridSpec(**c["grid"]),
                potentials={
                    name: PotentialSpec(**{**spec, "center": tuple(spec["center"])})
                    for name, spec in c["potentials"].items()
                },
                cgo=CGOSpec(
                    tail_tolerance=float(cgo["tail_tolerance"]),
                    max_terms=int(cgo["max_terms"]),
                    taus=tuple(cgo["taus"]),
                    z0=_points(cgo["z0"], "cgo.z0"),
                    amplitudes=tuple(cgo["amplitudes"]),
                    threshold_bracket=(float(lo), float(hi)),
                    bisection_steps=int(cgo["bisection_steps"]),
                ),
                forward=ForwardSpec(
                    guard_rtol=float(c["forward"]["guard_rtol"]),
                    noise=float(c["forward"]["noise"]),
                    probe_degree=int(c["forward"]["probe_degree"]),
                    probe_taus=tuple(c["forward"]["probe_taus"]),
                    probe_centers=_points(c["forward"]["probe_centers"], "forward.probe_centers"),
                ),
                recon=ReconSpec(
                    collar=int(c["recon"]["collar"]),
                    stride=int(c["recon"]["stride"]),
                    scan_radius=c["recon"]["scan_radius"],
                    correct=bool(c["recon"]["correct"]),
                    taus=tuple(c["recon"]["taus"]),
                ),
                statphase=StatPhaseSpec(
                    resolution=int(c["statphase"]["resolution"]),
                    taus=tuple(c["statphase"]["taus"]),
                    s_values=tuple(c["statphase"]["s_values"]),
                    fields_per_s=int(c["statphase"]["fields_per_s"]),
                ),
                stability=StabilitySpec(
                    epsilons=tuple(sorted(c["stability"]["epsilons"], reverse=True)),
                    s=float(c["stability"]["s"]),
                    alpha=float(c["stability"]["alpha"]),
                    noise=float(c["stability"]["noise"]),
                ),
                uniqueness_amplitudes=tuple(c["uniqueness"]["amplitudes"]),
                tolerances=Tolerances(**{k: float(v) for k, v in c["tolerances"].items()}),
                output=OutputSpec(
                    directory=str(c["output"]["directory"]),
                    report=bool(c["output"]["report"]),
                    color_scale=tuple(c["output"]["color_scale"]),
                ),
                raw=copy.deepcopy(resolved),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid configuration value: {e}") from e


def load_run_config(path: Union[str, Path, None] = None, override: Dict[str, Any] = None) -> RunConfig:
    """Resolve a configuration file (or the defaults) plus an in-memory override."""
    resolved = load_config_file(path)
    if override:
        resolved = resolve_config(_merge(resolved, override, ""))
    return RunConfig.from_dict(resolved)
