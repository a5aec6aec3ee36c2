"""
Binary field / DN-map files, atomic JSON writes and the output-directory guard.

BFLD: little-endian header {magic "BFLD", version u32, N u32, L f64,
support u8} followed by N*N complex values (f64 re, f64 im), row-major.

DNMP: little-endian header {magic "DNMP", version u32, boundary count u32,
N u32, L f64, potential fingerprint (64 ASCII hex chars)} followed by the
nb*nb complex matrix, row-major.
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import numpy as np

from bukhgeim.errors import FormatError, GridMismatchError, OutputPathError
from bukhgeim.forward import DNMap
from bukhgeim.grid import Field, Grid2D, Support

LOGGER = logging.getLogger(__name__)

FORMAT_VERSION = 1

FIELD_HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("resolution", "<u4"),
    ("half_width", "<f8"),
    ("support", "u1"),
])

DN_HEADER = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("boundary_count", "<u4"),
    ("resolution", "<u4"),
    ("half_width", "<f8"),
    ("fingerprint", "S64"),
])

SUPPORT_TAGS = {Support.WHOLE: 0, Support.X: 1, Support.SPECTRAL: 2}
TAG_SUPPORTS = {v: k for k, v in SUPPORT_TAGS.items()}

PathLike = Union[str, Path]


def guard_path(directory: PathLike, target: PathLike) -> Path:
    """
    Resolve ``target`` against ``directory`` and refuse anything outside it.

    Raises:
        OutputPathError: the resolved path escapes the output directory
    """
    root = Path(directory).resolve()
    path = Path(target)
    resolved = (path if path.is_absolute() else root / path).resolve()
    if resolved != root and root not in resolved.parents:
        raise OutputPathError(f"'{target}' lies outside the output directory '{root}'")
    return resolved


def _atomic_bytes(path: Path, payload: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: PathLike, data: Any) -> Path:
    """Write JSON atomically (temp file in the same directory, then os.replace)."""
    path = Path(path)
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"
    _atomic_bytes(path, text.encode("utf-8"))
    LOGGER.debug("wrote %s", path)
    return path


def write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    _atomic_bytes(path, text.encode("utf-8"))
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _read_header(raw: bytes, dtype: np.dtype, magic: bytes, path: PathLike) -> np.void:
    if len(raw) < dtype.itemsize:
        raise FormatError(f"'{path}' is truncated (no complete header)")
    header = np.frombuffer(raw, dtype=dtype, count=1)[0]
    if header["magic"] != magic:
        raise FormatError(f"'{path}' is not a {magic.decode()} file")
    if int(header["version"]) != FORMAT_VERSION:
        raise FormatError(f"'{path}': unsupported version {int(header['version'])}")
    return header


def _check_grid(header: np.void, grid: Grid2D, path: PathLike):
    n, L = int(header["resolution"]), float(header["half_width"])
    if n != grid.resolution or not np.isclose(L, grid.half_width, rtol=0, atol=1e-12):
        raise GridMismatchError(
            f"'{path}' was written for N={n}, L={L:g}; "
            f"the current grid is N={grid.resolution}, L={grid.half_width:g}"
        )


def write_field(path: PathLike, f: Field) -> Path:
    header = np.zeros(1, dtype=FIELD_HEADER)
    header["magic"] = b"BFLD"
    header["version"] = FORMAT_VERSION
    header["resolution"] = f.grid.resolution
    header["half_width"] = f.grid.half_width
    header["support"] = SUPPORT_TAGS[f.support]
    body = np.ascontiguousarray(f.values, dtype="<c16")
    _atomic_bytes(Path(path), header.tobytes() + body.tobytes())
    return Path(path)


def read_field(path: PathLike, grid: Grid2D) -> Field:
    """
    Read a BFLD file onto ``grid``.

    Raises:
        FormatError: bad magic, version, support tag or length
        GridMismatchError: the file was written for another lattice
    """
    raw = Path(path).read_bytes()
    header = _read_header(raw, FIELD_HEADER, b"BFLD", path)
    _check_grid(header, grid, path)
    tag = int(header["support"])
    if tag not in TAG_SUPPORTS:
        raise FormatError(f"'{path}': unknown support tag {tag}")
    n = grid.resolution
    body = raw[FIELD_HEADER.itemsize:]
    if len(body) != n * n * 16:
        raise FormatError(f"'{path}': expected {n * n} complex values")
    values = np.frombuffer(body, dtype="<c16").reshape(n, n)
    return Field(grid, values, TAG_SUPPORTS[tag])


def write_dn(path: PathLike, dn: DNMap) -> Path:
    grid = dn.grid
    header = np.zeros(1, dtype=DN_HEADER)
    header["magic"] = b"DNMP"
    header["version"] = FORMAT_VERSION
    header["boundary_count"] = grid.boundary_count
    header["resolution"] = grid.resolution
    header["half_width"] = grid.half_width
    header["fingerprint"] = dn.q_fingerprint[:64].encode("ascii")
    body = np.ascontiguousarray(dn.matrix, dtype="<c16")
    _atomic_bytes(Path(path), header.tobytes() + body.tobytes())
    LOGGER.info("wrote DN map (%d boundary nodes) to %s", grid.boundary_count, path)
    return Path(path)


def read_dn(path: PathLike, grid: Grid2D) -> DNMap:
    """
    Read a DNMP file for ``grid``.

    Raises:
        FormatError: bad magic, version or length
        GridMismatchError: lattice or boundary ring differs from ``grid``
    """
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read DN map '{path}': {e.strerror}") from e
    header = _read_header(raw, DN_HEADER, b"DNMP", path)
    _check_grid(header, grid, path)
    nb = int(header["boundary_count"])
    if nb != grid.boundary_count:
        raise GridMismatchError(
            f"'{path}' has {nb} boundary nodes, the current grid has {grid.boundary_count}"
        )
    body = raw[DN_HEADER.itemsize:]
    if len(body) != nb * nb * 16:
        raise FormatError(f"'{path}': expected a {nb}x{nb} complex matrix")
    matrix = np.frombuffer(body, dtype="<c16").reshape(nb, nb).copy()
    return DNMap(grid, matrix, header["fingerprint"].decode("ascii"))
