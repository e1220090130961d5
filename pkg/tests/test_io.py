"""Round trips and format checks for the CSV and VTK writers."""

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbtopt import io
from rbtopt.density import DensityField
from rbtopt.mesh import build_box_cantilever
from rbtopt.optimizer import LogRow


def _field(rng, n):
    return DensityField(rho=rng.uniform(0.0, 1.0, n),
                        rho_f=rng.uniform(0.0, 1.0, n),
                        rho_t=rng.uniform(0.0, 1.0, n),
                        radius=1.5, beta=8.0, eta_thr=0.5)


def _rows():
    return [
        LogRow(iteration=1, objective=12.5, batch_compliance=3.0625,
               volume_fraction=1.0, pf_estimate=0.1, pf_provenance="ldt",
               t_star=0.25, tilt_fallback="none", penalty=0.0),
        LogRow(iteration=2, objective=11.03125, batch_compliance=2.9,
               volume_fraction=0.875, pf_estimate=2.5e-4,
               pf_provenance="subset_sim", t_star=float("nan"),
               tilt_fallback="history", penalty=13.25),
    ]


class TestFmt:
    def test_plain_repr_for_numpy_scalar(self):
        # numpy 2.x reprs scalars as np.float64(0.1); the writer must
        # emit the plain decimal form instead
        assert io._fmt(np.float64(0.1)) == "0.1"
        assert io._fmt(np.float32(2.0)) == "2.0"

    def test_integers_keep_float_form(self):
        assert io._fmt(3) == "3.0"

    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_round_trip_exact(self, x):
        assert float(io._fmt(x)) == x


class TestConvergenceCsv:
    def test_header_and_row_count(self, tmp_path):
        path = tmp_path / "convergence.csv"
        io.write_convergence_csv(path, _rows())
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == io.CONVERGENCE_COLUMNS
        assert len(rows) == 3

    def test_values_round_trip(self, tmp_path):
        path = tmp_path / "convergence.csv"
        written = _rows()
        io.write_convergence_csv(path, written)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            back = list(reader)
        for src, row in zip(written, back):
            assert int(row["iteration"]) == src.iteration
            assert float(row["objective"]) == src.objective
            assert float(row["batch_compliance"]) == src.batch_compliance
            assert float(row["volume_fraction"]) == src.volume_fraction
            assert float(row["pf_estimate"]) == src.pf_estimate
            assert row["pf_provenance"] == src.pf_provenance
            assert row["tilt_fallback"] == src.tilt_fallback
            assert float(row["penalty"]) == src.penalty
        assert np.isnan(float(back[1]["t_star"]))
        assert float(back[0]["t_star"]) == 0.25


class TestDensityCsv:
    def test_round_trip_bitwise(self, tmp_path, rng):
        field = _field(rng, 17)
        path = tmp_path / "density.csv"
        io.write_density_csv(path, field)
        rho, rho_f, rho_t = io.read_density_csv(path)
        assert np.array_equal(rho, field.rho)
        assert np.array_equal(rho_f, field.rho_f)
        assert np.array_equal(rho_t, field.rho_t)

    def test_header_line(self, tmp_path, rng):
        path = tmp_path / "density.csv"
        io.write_density_csv(path, _field(rng, 3))
        first = path.read_text().splitlines()[0]
        assert first == "element_id,rho,rho_f,rho_t"

    def test_element_ids_sequential(self, tmp_path, rng):
        path = tmp_path / "density.csv"
        io.write_density_csv(path, _field(rng, 5))
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            ids = [int(row[0]) for row in reader]
        assert ids == [0, 1, 2, 3, 4]

    def test_reader_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("element,density\n0,0.5\n")
        with pytest.raises(ValueError, match="header"):
            io.read_density_csv(path)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1,
                    max_size=40))
    def test_round_trip_property(self, tmp_path_factory, values):
        arr = np.asarray(values)
        field = DensityField(rho=arr, rho_f=arr, rho_t=arr,
                             radius=1.0, beta=8.0, eta_thr=0.5)
        path = tmp_path_factory.mktemp("io") / "d.csv"
        io.write_density_csv(path, field)
        rho, _, _ = io.read_density_csv(path)
        assert np.array_equal(rho, arr)


def _section(lines, keyword):
    for i, ln in enumerate(lines):
        if ln.startswith(keyword):
            return i
    raise AssertionError(f"{keyword} not found")


class TestVtk:
    def test_legacy_header(self, tmp_path, eight_tri_mesh):
        path = tmp_path / "mesh.vtk"
        io.write_vtk(path, eight_tri_mesh)
        lines = path.read_text().splitlines()
        assert lines[0] == "# vtk DataFile Version 3.0"
        assert lines[2] == "ASCII"
        assert lines[3] == "DATASET UNSTRUCTURED_GRID"

    def test_2d_points_padded_with_zero_z(self, tmp_path, eight_tri_mesh):
        path = tmp_path / "mesh.vtk"
        io.write_vtk(path, eight_tri_mesh)
        lines = path.read_text().splitlines()
        i = _section(lines, "POINTS")
        assert lines[i] == f"POINTS {eight_tri_mesh.n_nodes} double"
        pts = [ln.split() for ln in lines[i + 1:i + 1 + eight_tri_mesh.n_nodes]]
        assert all(len(p) == 3 for p in pts)
        assert all(float(p[2]) == 0.0 for p in pts)
        xy = np.array([[float(p[0]), float(p[1])] for p in pts])
        np.testing.assert_allclose(xy, eight_tri_mesh.nodes, rtol=1e-8)

    def test_triangle_cells_and_types(self, tmp_path, eight_tri_mesh):
        mesh = eight_tri_mesh
        path = tmp_path / "mesh.vtk"
        io.write_vtk(path, mesh)
        lines = path.read_text().splitlines()
        i = _section(lines, "CELLS")
        assert lines[i] == f"CELLS {mesh.n_elements} {mesh.n_elements * 4}"
        cells = lines[i + 1:i + 1 + mesh.n_elements]
        for ln, ele in zip(cells, mesh.elements):
            parts = [int(v) for v in ln.split()]
            assert parts[0] == 3
            assert parts[1:] == list(ele)
        j = _section(lines, "CELL_TYPES")
        assert lines[j] == f"CELL_TYPES {mesh.n_elements}"
        assert lines[j + 1:j + 1 + mesh.n_elements] == ["5"] * mesh.n_elements

    def test_tet_cells_use_type_10(self, tmp_path):
        mesh = build_box_cantilever(6.0, 1, 1, 1)
        path = tmp_path / "box.vtk"
        io.write_vtk(path, mesh)
        lines = path.read_text().splitlines()
        j = _section(lines, "CELL_TYPES")
        assert lines[j + 1:j + 1 + mesh.n_elements] == ["10"] * mesh.n_elements
        i = _section(lines, "POINTS")
        zs = [float(ln.split()[2])
              for ln in lines[i + 1:i + 1 + mesh.n_nodes]]
        assert max(zs) > 0.0

    def test_cell_data_scalars(self, tmp_path, eight_tri_mesh, rng):
        mesh = eight_tri_mesh
        field = _field(rng, mesh.n_elements)
        path = tmp_path / "density.vtk"
        io.write_density_vtk(path, mesh, field)
        lines = path.read_text().splitlines()
        i = _section(lines, "CELL_DATA")
        assert lines[i] == f"CELL_DATA {mesh.n_elements}"
        for name, expect in (("rho", field.rho), ("rho_f", field.rho_f),
                             ("rho_t", field.rho_t)):
            j = _section(lines, f"SCALARS {name} double 1")
            assert lines[j + 1] == "LOOKUP_TABLE default"
            vals = np.array([float(v)
                             for v in lines[j + 2:j + 2 + mesh.n_elements]])
            np.testing.assert_allclose(vals, expect, rtol=1e-8)

    def test_rejects_wrong_field_shape(self, tmp_path, eight_tri_mesh):
        with pytest.raises(ValueError, match="shape"):
            io.write_vtk(tmp_path / "x.vtk", eight_tri_mesh,
                         [("rho", np.zeros(3))])

    def test_no_cell_data_without_fields(self, tmp_path, eight_tri_mesh):
        path = tmp_path / "bare.vtk"
        io.write_vtk(path, eight_tri_mesh)
        assert "CELL_DATA" not in path.read_text()
