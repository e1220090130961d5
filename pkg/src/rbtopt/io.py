"""File output: run logs, density snapshots, and legacy ASCII VTK."""

import csv
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .density import DensityField
from .mesh import Mesh
from .optimizer import LogRow

_VTK_CELL_TYPE = {2: 5, 3: 10}  # triangle, tetrahedron

CONVERGENCE_COLUMNS = [
    "iteration", "objective", "batch_compliance", "volume_fraction",
    "pf_estimate", "pf_provenance", "t_star", "tilt_fallback", "penalty",
]


def _fmt(x) -> str:
    # shortest round-trip decimal; plain float repr, not numpy's
    return repr(float(x))


def write_convergence_csv(path, rows: List[LogRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONVERGENCE_COLUMNS)
        for r in rows:
            writer.writerow([
                r.iteration, _fmt(r.objective), _fmt(r.batch_compliance),
                _fmt(r.volume_fraction), _fmt(r.pf_estimate),
                r.pf_provenance, _fmt(r.t_star), r.tilt_fallback,
                _fmt(r.penalty),
            ])


def write_density_csv(path, field: DensityField) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["element_id", "rho", "rho_f", "rho_t"])
        for i in range(field.rho.shape[0]):
            writer.writerow([i, _fmt(field.rho[i]), _fmt(field.rho_f[i]),
                             _fmt(field.rho_t[i])])


def read_density_csv(path) -> Tuple[NDArray, NDArray, NDArray]:
    rho, rho_f, rho_t = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["element_id", "rho", "rho_f", "rho_t"]:
            raise ValueError(f"unexpected density csv header: {header}")
        for row in reader:
            rho.append(float(row[1]))
            rho_f.append(float(row[2]))
            rho_t.append(float(row[3]))
    return np.asarray(rho), np.asarray(rho_f), np.asarray(rho_t)


def write_vtk(path, mesh: Mesh,
              cell_fields: Sequence[Tuple[str, NDArray]] = ()) -> None:
    """Legacy ASCII unstructured-grid file with optional element scalars."""
    lines = ["# vtk DataFile Version 3.0", "rbtopt export", "ASCII",
             "DATASET UNSTRUCTURED_GRID"]
    n_nodes = mesh.n_nodes
    lines.append(f"POINTS {n_nodes} double")
    coords = mesh.nodes
    if mesh.dimension == 2:
        coords = np.column_stack([coords, np.zeros(n_nodes)])
    for p in coords:
        lines.append(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}")
    npe = mesh.elements.shape[1]
    lines.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (npe + 1)}")
    for ele in mesh.elements:
        lines.append(str(npe) + " " + " ".join(str(v) for v in ele))
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    ctype = _VTK_CELL_TYPE[mesh.dimension]
    lines.extend([str(ctype)] * mesh.n_elements)
    if cell_fields:
        lines.append(f"CELL_DATA {mesh.n_elements}")
        for name, values in cell_fields:
            values = np.asarray(values)
            if values.shape != (mesh.n_elements,):
                raise ValueError(f"field {name} has shape {values.shape}")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.9g}" for v in values)
    Path(path).write_text("\n".join(lines) + "\n")


def write_density_vtk(path, mesh: Mesh, field: DensityField) -> None:
    write_vtk(path, mesh, [("rho", field.rho), ("rho_f", field.rho_f),
                           ("rho_t", field.rho_t)])
