"""CSV, manifest and legacy VTK serialization.

CSV files are UTF-8 with LF line endings, a header row and a fixed column
order. Floats are written with ``repr`` so a round trip is bit-exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .mesh import TriMesh, build_mesh, tag_delta_zone
from .synthetic import BoundaryDataSet


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
    if not rows:
        raise ValueError(f"{path}: empty file")
    return rows[0], rows[1:]


# ------------------------------------------------------------------ meshes

def write_mesh(mesh: TriMesh, directory) -> tuple[Path, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    nodes = write_csv(d / "nodes.csv", ["id", "x", "y", "tag"],
                      ((i, x, y, int(t)) for i, ((x, y), t) in enumerate(zip(mesh.nodes, mesh.node_tags))))
    elems = write_csv(d / "elements.csv", ["id", "n0", "n1", "n2"],
                      ((i, *map(int, tri)) for i, tri in enumerate(mesh.triangles)))
    return nodes, elems


def read_mesh(directory, delta: float = 0.0) -> TriMesh:
    d = Path(directory)
    _, node_rows = read_csv(d / "nodes.csv")
    _, elem_rows = read_csv(d / "elements.csv")
    nodes = np.array([[float(r[1]), float(r[2])] for r in node_rows])
    tris = np.array([[int(v) for v in r[1:4]] for r in elem_rows], dtype=np.int64)
    mesh = build_mesh(nodes, tris)
    return tag_delta_zone(mesh, delta) if delta > 0 else mesh


# ------------------------------------------------------------------ data

def write_boundary_data(path, data: BoundaryDataSet) -> Path:
    n = len(data)
    header = ["angle"] + [f"{k}_{m}" for m in range(1, n + 1) for k in ("f", "g")]
    rows = ([phi] + [v for m in range(n) for v in (data.f[m, i], data.g[m, i])]
            for i, phi in enumerate(data.angles))
    return write_csv(path, header, rows)


def read_boundary_data(path) -> BoundaryDataSet:
    header, rows = read_csv(path)
    if header[0] != "angle" or (len(header) - 1) % 2:
        raise ValueError(f"{path}: expected columns angle, f_1, g_1, ...")
    arr = np.array([[float(v) for v in r] for r in rows])
    return BoundaryDataSet(arr[:, 0], arr[:, 1::2].T, arr[:, 2::2].T)


def write_nodal(path, name: str, values) -> Path:
    return write_csv(path, ["id", name], enumerate(np.asarray(values, dtype=float)))


def read_nodal(path) -> np.ndarray:
    _, rows = read_csv(path)
    return np.array([float(r[1]) for r in rows])


# ------------------------------------------------------------------ history

HISTORY_COLUMNS = ["n", "J", "data", "reference", "regularization", "alpha_in", "alpha_out",
                   "omega_min", "omega_low_fraction", "inner_iterations", "inner_evaluations",
                   "projected_gradient", "reason"]


def write_history(path, history) -> Path:
    rows = ([r.n, r.J, r.terms["data"], r.terms["reference"], r.terms["regularization"],
             r.alpha_in, r.alpha_out, r.omega_min, r.omega_low_fraction,
             r.report.iterations, r.report.evaluations, r.report.projected_gradient, r.report.reason]
            for r in history)
    return write_csv(path, HISTORY_COLUMNS, rows)


def read_history(path) -> list[dict]:
    header, rows = read_csv(path)
    return [dict(zip(header, r)) for r in rows]


def write_manifest(path, manifest: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


# ------------------------------------------------------------------ VTK

def write_vtk(path, mesh: TriMesh, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "bvtomo") -> Path:
    """Legacy 3.0 ASCII UNSTRUCTURED_GRID with scalar point and cell fields."""
    path = Path(path)
    n, t = mesh.n_nodes, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.nodes.astype(float)]
    lines.append(f"CELLS {t} {4 * t}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {t}")
    lines += ["5"] * t
    for section, size, fields in (("POINT_DATA", n, point_data), ("CELL_DATA", t, cell_data)):
        if not fields:
            continue
        lines.append(f"{section} {size}")
        for name, values in fields.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (size,):
                raise ValueError(f"{section} field {name!r} must have {size} values")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [repr(float(v)) for v in values]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
