"""Canonical file formats: mesh JSON, result records, report CSV.

All JSON is emitted with sorted keys and floats formatted %.17g, so a value
round-trips bit-exactly and identical runs produce byte-identical files.
Volatile data (wall times) lives in a separate timing file.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import subprocess

import numpy as np

from .bubbles import sharp_constant
from .errors import InputError
from .fem import SimplicialMesh, _boundary_of

FLOAT_FMT = "%.17g"


def _canon(obj, out: list):
    if isinstance(obj, dict):
        out.append("{")
        for k, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise InputError("JSON object keys must be strings")
            if k:
                out.append(", ")
            out.append(json.dumps(key))
            out.append(": ")
            _canon(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for k, item in enumerate(obj):
            if k:
                out.append(", ")
            _canon(item, out)
        out.append("]")
    elif isinstance(obj, np.ndarray):
        _canon(obj.tolist(), out)
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise InputError(f"non-finite float {x} cannot be serialized")
        out.append(FLOAT_FMT % x)
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise InputError(f"cannot serialize object of type {type(obj)!r}")


def canonical_json(obj) -> str:
    parts: list = []
    _canon(obj, parts)
    parts.append("\n")
    return "".join(parts)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))


def load_json(path):
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(
            f"{path}: parse error at byte offset {exc.pos}: {exc.msg}"
        ) from exc


def mesh_to_dict(mesh: SimplicialMesh) -> dict:
    return {
        "dim": 3,
        "vertices": mesh.vertices,
        "cells": mesh.cells,
        "boundary_faces": mesh.boundary_faces,
    }


def mesh_from_dict(data: dict, source: str = "<mesh>") -> SimplicialMesh:
    try:
        dim = data["dim"]
        vertices = np.asarray(data["vertices"], dtype=np.float64)
        cells = np.asarray(data["cells"], dtype=np.int64)
        faces = np.asarray(data["boundary_faces"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{source}: malformed mesh object: {exc}") from exc
    if dim != 3:
        raise InputError(f"{source}: unsupported mesh dim {dim}")
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise InputError(f"{source}: vertices must be an array of 3-vectors")
    if cells.ndim != 2 or cells.shape[1] != 4:
        raise InputError(f"{source}: cells must be an array of 4-tuples")
    nv = vertices.shape[0]
    if cells.min(initial=0) < 0 or cells.max(initial=-1) >= nv:
        raise InputError(f"{source}: cell vertex index out of range")
    if faces.min(initial=0) < 0 or faces.max(initial=-1) >= nv:
        raise InputError(f"{source}: boundary face index out of range")
    derived_faces, derived_verts = _boundary_of(cells, nv)
    sorted_rows = np.sort(faces, axis=1)
    order = np.lexsort((sorted_rows[:, 2], sorted_rows[:, 1], sorted_rows[:, 0]))
    if not np.array_equal(sorted_rows[order], derived_faces):
        raise InputError(f"{source}: boundary_faces do not match the cell complex")
    mesh = SimplicialMesh(
        vertices=vertices, cells=cells,
        boundary_faces=derived_faces, boundary_vertices=derived_verts,
    )
    if np.any(mesh.cell_volumes() <= 0):
        bad = int(np.argmin(mesh.cell_volumes()))
        raise InputError(f"{source}: cell {bad} has non-positive volume")
    return mesh


def write_mesh(path, mesh: SimplicialMesh):
    write_json(path, mesh_to_dict(mesh))


def read_mesh(path) -> SimplicialMesh:
    return mesh_from_dict(load_json(path), source=str(path))


def build_identifier() -> dict:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        ).stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        rev = "unknown"
    from . import __version__

    return {"version": __version__, "git": rev}


REPORT_COLUMNS = [
    "level", "h", "E_value", "I_value", "mu_estimate",
    "sharp_constant", "relative_error", "order_estimate",
]


def report_rows(records: list[dict]) -> list[dict]:
    """Convergence table rows from per-level records, sorted by level."""
    sharp = sharp_constant(3)
    rows = []
    prev_err = None
    for rec in sorted(records, key=lambda r: r["level"]):
        err = abs(rec["mu_estimate"] - sharp) / sharp
        order = math.log2(prev_err / err) if prev_err not in (None, 0.0) and err > 0 else float("nan")
        rows.append({
            "level": rec["level"],
            "h": rec["h"],
            "E_value": rec["E_value"],
            "I_value": rec["I_value"],
            "mu_estimate": rec["mu_estimate"],
            "sharp_constant": sharp,
            "relative_error": err,
            "order_estimate": order,
        })
        prev_err = err
    return rows


def emit_report(records: list[dict], csv_path, json_path=None) -> list[dict]:
    """Write the convergence table as CSV (and JSON); returns the rows."""
    rows = report_rows(records)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow({
            k: (FLOAT_FMT % v if isinstance(v, float) else v) for k, v in row.items()
        })
    with open(csv_path, "w") as fh:
        fh.write(buf.getvalue())
    if json_path is not None:
        write_json(json_path, {"rows": rows})
    return rows
