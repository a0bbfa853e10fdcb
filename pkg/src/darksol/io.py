"""CSV and JSON readers/writers with fixed, reproducible number formatting."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .curve import CurvePoint
from .dynamics import TrajectorySummary
from .fields import ComplexField, HydroField, reconstruct_complex
from .grid import make_grid

__all__ = [
    "fmt",
    "FIELD_HEADER",
    "CURVE_HEADER",
    "TRAJECTORY_HEADER",
    "write_fields_csv",
    "read_fields_csv",
    "write_curve_csv",
    "read_curve_csv",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_dispersion_csv",
    "read_dispersion_csv",
    "to_jsonable",
    "write_json",
]

FIELD_HEADER = ["x", "eta", "w", "re_u", "im_u"]
CURVE_HEADER = ["q", "E", "c_est", "residual", "converged", "iterations"]
TRAJECTORY_HEADER = ["t", "E", "p", "min_modulus", "dist"]
DISPERSION_HEADER = ["xi", "omega"]


def fmt(v) -> str:
    """17 significant digits for floats; booleans as true/false."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _parse_bool(s: str) -> bool:
    if s not in ("true", "false"):
        raise ValueError(f"bad boolean {s!r}")
    return s == "true"


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])


def _read_rows(path, header: Sequence[str]) -> list[list[str]]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        got = next(rd)
        if got != list(header):
            raise ValueError(f"{path}: expected header {list(header)}, got {got}")
        return [row for row in rd]


def write_fields_csv(path, field) -> None:
    """Dump a hydrodynamic or complex field in ascending x."""
    if isinstance(field, HydroField):
        h = field
        u = reconstruct_complex(h).values
        eta, w = h.eta, h.w
    elif isinstance(field, ComplexField):
        u = field.values
        mod2 = np.abs(u) ** 2
        eta = 1.0 - mod2
        if np.min(mod2) > 0:
            from .fields import hydro_from_complex

            w = hydro_from_complex(field).w
        else:
            w = np.full_like(eta, np.nan)
    else:
        raise TypeError("expected HydroField or ComplexField")
    x = field.grid.x
    _write_rows(path, FIELD_HEADER, zip(x, eta, w, u.real, u.imag))


def read_fields_csv(path) -> tuple[HydroField, np.ndarray]:
    """Read a field dump; returns the hydrodynamic field and the complex samples."""
    rows = np.array(_read_rows(path, FIELD_HEADER), dtype=float)
    x = rows[:, 0]
    n = x.size
    length = -2.0 * x[0]
    grid = make_grid(n, length)
    if not np.allclose(x, grid.x, rtol=0, atol=1e-12 * max(1.0, length)):
        raise ValueError(f"{path}: x column is not a centered uniform grid")
    return HydroField(grid, rows[:, 1], rows[:, 2]), rows[:, 3] + 1j * rows[:, 4]


def write_curve_csv(path, points: Sequence[CurvePoint]) -> None:
    _write_rows(path, CURVE_HEADER,
                ((p.q, p.E, p.c_est, p.residual_norm, bool(p.converged), int(p.iterations)) for p in points))


def read_curve_csv(path) -> list[CurvePoint]:
    out = []
    for r in _read_rows(path, CURVE_HEADER):
        out.append(CurvePoint(float(r[0]), float(r[1]), float(r[2]), float(r[3]), _parse_bool(r[4]), int(r[5])))
    return out


def write_trajectory_csv(path, tr: TrajectorySummary) -> None:
    _write_rows(path, TRAJECTORY_HEADER,
                zip(tr.times, tr.energies, tr.momenta, tr.min_modulus, tr.distances))


def read_trajectory_csv(path) -> TrajectorySummary:
    rows = np.array(_read_rows(path, TRAJECTORY_HEADER), dtype=float).reshape(-1, 5)
    return TrajectorySummary(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4])


def write_dispersion_csv(path, xi, omega) -> None:
    _write_rows(path, DISPERSION_HEADER, zip(xi, omega))


def read_dispersion_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = np.array(_read_rows(path, DISPERSION_HEADER), dtype=float).reshape(-1, 2)
    return rows[:, 0], rows[:, 1]


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
