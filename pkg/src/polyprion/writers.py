"""CSV and legacy-VTK output, plus the run.json provenance record."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dgspace import DGSpace

UNITS = {
    "t": "year", "p_avg": "ug/g", "q_avg": "ug/g", "c_avg": "-",
    "p_min": "ug/g", "p_delta": "ug/g", "q_max": "ug/g", "q_max_star": "ug/g", "root": "ug/g",
    "a": "-", "b": "g/ug", "mean": "ug/g", "variance": "ug^2/g^2", "ks": "-", "band": "-",
}


def fmt(x) -> str:
    """Shortest text that parses back to the same double (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def header(name: str, unit: str | None = None) -> str:
    unit = unit if unit is not None else UNITS.get(name)
    return f"{name} [{unit}]" if unit else name


def column_name(label: str) -> str:
    """Strip a trailing ``[unit]`` from a header label."""
    return label.split(" [", 1)[0]


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], units: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    units = units or {}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([header(c, units.get(c)) for c in columns])
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Column names (units stripped) and raw string rows."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], []
    return [column_name(c) for c in rows[0]], rows[1:]


def read_numeric_csv(path) -> tuple[list[str], np.ndarray]:
    cols, rows = read_csv(path)
    data = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(len(rows), len(cols))
    return cols, data


def write_trajectory(path, times, series: dict[str, np.ndarray]) -> Path:
    cols = ["t", *series]
    data = np.column_stack([times, *series.values()])
    return write_csv(path, cols, data.tolist())


def vertex_average(space: DGSpace, u: np.ndarray) -> np.ndarray:
    """Mean over incident elements of the element polynomials at each vertex."""
    mesh = space.mesh
    acc = np.zeros(len(mesh.vertices))
    cnt = np.zeros(len(mesh.vertices))
    for k, poly in enumerate(mesh.elements):
        vals = space.evaluate(u, k, mesh.vertices[poly])
        np.add.at(acc, poly, vals)
        np.add.at(cnt, poly, 1.0)
    out = np.zeros_like(acc)
    used = cnt > 0
    out[used] = acc[used] / cnt[used]
    return out


def write_vtk(path, space: DGSpace, fields: dict[str, np.ndarray], title: str = "polyprion",
              point_data: bool = True) -> Path:
    """Legacy ASCII unstructured grid of polygons with cell (and vertex) averages."""
    mesh = space.mesh
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nv = len(mesh.vertices)
    ne = mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.vertices]
    size = sum(len(p) + 1 for p in mesh.elements)
    lines.append(f"CELLS {ne} {size}")
    lines += [" ".join(str(int(v)) for v in (len(p), *p)) for p in mesh.elements]
    lines.append(f"CELL_TYPES {ne}")
    lines += ["7"] * ne
    lines.append(f"CELL_DATA {ne}")
    lines += ["SCALARS region int 1", "LOOKUP_TABLE default"]
    lines += [str(int(r)) for r in mesh.element_region]
    for name, u in fields.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [fmt(v) for v in space.element_means(u)]
    lines += ["VECTORS axonal double"]
    lines += [f"{fmt(a)} {fmt(b)} 0" for a, b in mesh.axonal]
    if point_data and fields:
        lines.append(f"POINT_DATA {nv}")
        for name, u in fields.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [fmt(v) for v in vertex_average(space, u)]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_provenance(path, record: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return path


def read_provenance(path) -> dict:
    return json.loads(Path(path).read_text())
