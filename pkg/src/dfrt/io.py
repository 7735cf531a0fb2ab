"""CSV/JSON readers and writers for fields, coefficients, trajectories and spectra.

Floats are written with ``repr`` (shortest round-trip form), so identical
arrays always produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from pathlib import Path

import numpy as np

from .basis import ModeSet, build_mode_set
from .dynamics import TrajectoryRecord
from .errors import ConfigurationError, DimensionError
from .transform import CoefficientVector, QuadratureGrid, build_grid

__all__ = [
    "FIELD_HEADER",
    "COEFF_HEADER",
    "file_sha256",
    "field_sidecar_path",
    "write_field_csv",
    "read_field_csv",
    "check_field_on_grid",
    "read_points_csv",
    "write_points_csv",
    "write_coeffs_csv",
    "read_coeffs_csv",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_rows_csv",
    "write_json",
]

FIELD_HEADER = ["x", "y", "z", "ux_re", "ux_im", "uy_re", "uy_im", "uz_re", "uz_im"]
COEFF_HEADER = ["ell", "m", "n", "a_re", "a_im"]
_COEFF_COLUMN = re.compile(r"a_(re|im)_(-?\d+)_(-?\d+)_(-?\d+)$")


def _complex(re_part, im_part):
    # assemble component-wise so signed zeros survive a round trip
    out = np.empty(np.shape(re_part), complex)
    out.real, out.imag = re_part, im_part
    return out


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_rows_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _read_table(path, expected=None):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigurationError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    if expected is not None and header != list(expected):
        raise ConfigurationError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric or ragged row ({exc})") from None
    return header, data


# ---------------------------------------------------------------------------
# Fields


def field_sidecar_path(path) -> Path:
    """``field.csv`` -> ``field.json``."""
    return Path(path).with_suffix(".json")


def write_field_csv(path, points, values, grid: QuadratureGrid | None = None) -> Path:
    """Rows ``x,y,z`` plus real/imaginary parts of each component.

    With ``grid`` the points must be its nodes and the grid metadata is
    written to the sidecar ``<stem>.json``.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=complex)
    if points.shape != values.shape or points.ndim != 2 or points.shape[1] != 3:
        raise DimensionError(f"points {points.shape} and values {values.shape} must both be (N, 3)")
    rows = (
        (*p, v[0].real, v[0].imag, v[1].real, v[1].imag, v[2].real, v[2].imag)
        for p, v in zip(points, values)
    )
    write_rows_csv(path, FIELD_HEADER, rows)
    if grid is not None:
        write_json(field_sidecar_path(path), grid.spec())
    return Path(path)


def read_field_csv(path):
    """Return ``(points, values, grid)``; ``grid`` is None without a sidecar."""
    _, data = _read_table(path, FIELD_HEADER)
    points = data[:, :3]
    values = _complex(data[:, 3::2], data[:, 4::2])
    sidecar = field_sidecar_path(path)
    grid = None
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        unknown = set(meta) - {"n_r", "n_theta", "n_phi", "radius"}
        if unknown:
            raise ConfigurationError(f"{sidecar}: unknown key {sorted(unknown)[0]!r}")
        grid = build_grid(meta["n_r"], meta["n_theta"], meta["n_phi"], meta.get("radius", 1.0))
        check_field_on_grid(points, grid, path)
    return points, values, grid


def check_field_on_grid(points, grid, label="field"):
    if points.shape != grid.points.shape:
        raise DimensionError(f"{label}: {points.shape[0]} rows, grid {grid.shape} has {grid.size} nodes")
    gap = float(np.max(np.abs(points - grid.points)))
    if gap > 1e-9 * grid.radius:
        raise DimensionError(f"{label}: rows are not the grid nodes in r, theta, phi order (gap {gap:.3g})")


def read_points_csv(path) -> np.ndarray:
    _, data = _read_table(path, ["x", "y", "z"])
    return data


def write_points_csv(path, points) -> Path:
    return write_rows_csv(path, ["x", "y", "z"], np.asarray(points, dtype=float))


# ---------------------------------------------------------------------------
# Coefficients


def write_coeffs_csv(path, coeffs: CoefficientVector) -> Path:
    rows = ((md.ell, md.m, md.n, v.real, v.imag) for md, v in zip(coeffs.mode_set.modes, coeffs.values))
    return write_rows_csv(path, COEFF_HEADER, rows)


def read_coeffs_csv(path, radius=1.0) -> CoefficientVector:
    """Coefficient file in mode-set order; ``l_max``/``n_max`` are inferred from the rows."""
    _, data = _read_table(path, COEFF_HEADER)
    if data.shape[0] == 0:
        raise ConfigurationError(f"{path}: no coefficient rows")
    idx = data[:, :3]
    if np.any(idx != np.round(idx)):
        raise ConfigurationError(f"{path}: ell, m, n must be integers")
    idx = idx.astype(int)
    ms = build_mode_set(int(idx[:, 0].max()), int(idx[:, 2].max()), radius)
    expected = np.array([tuple(md) for md in ms.modes])
    if idx.shape != expected.shape or np.any(idx != expected):
        raise ConfigurationError(
            f"{path}: rows must list every (ell, m, n) of l_max={ms.l_max}, n_max={ms.n_max} in order"
        )
    return CoefficientVector(ms, _complex(data[:, 3], data[:, 4]))


# ---------------------------------------------------------------------------
# Trajectories


def _coeff_columns(mode_set: ModeSet):
    cols = []
    for md in mode_set.modes:
        cols += [f"a_re_{md.ell}_{md.m}_{md.n}", f"a_im_{md.ell}_{md.m}_{md.n}"]
    return cols


def write_trajectory_csv(path, traj: TrajectoryRecord) -> Path:
    header = ["t", "E", "D"] + _coeff_columns(traj.mode_set)
    c = traj.coefficients
    inter = np.empty((c.shape[0], 2 * c.shape[1]))
    inter[:, 0::2] = c.real
    inter[:, 1::2] = c.imag
    rows = (
        (t, e, d, *vals)
        for t, e, d, vals in zip(traj.times, traj.energy, traj.dissipation, inter)
    )
    return write_rows_csv(path, header, rows)


def read_trajectory_csv(path, radius=1.0) -> TrajectoryRecord:
    header, data = _read_table(path)
    if header[:3] != ["t", "E", "D"]:
        raise ConfigurationError(f"{path}: trajectory header must start with t,E,D")
    modes = []
    for name in header[3::2]:
        match = _COEFF_COLUMN.match(name)
        if not match or match.group(1) != "re":
            raise ConfigurationError(f"{path}: unexpected column {name!r}")
        modes.append(tuple(int(g) for g in match.groups()[1:]))
    if not modes:
        raise ConfigurationError(f"{path}: no coefficient columns")
    ms = build_mode_set(max(m[0] for m in modes), max(m[2] for m in modes), radius)
    if header[3:] != _coeff_columns(ms):
        raise ConfigurationError(f"{path}: coefficient columns do not follow the mode-set order")
    coeffs = _complex(data[:, 3::2], data[:, 4::2])
    return TrajectoryRecord(ms, data[:, 0], coeffs, data[:, 1], data[:, 2])
