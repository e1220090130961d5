"""Mesh construction: counts, areas, boundary metadata, orientation."""
import numpy as np
import pytest

from rbtopt.mesh import (Mesh, build_box_cantilever, build_l_beam,
                         build_rect_half_beam, simplex_volumes,
                         structured_rectangle)


def edge_multiset(elements):
    """Sorted-edge counts for watertightness checks on triangle meshes."""
    counts = {}
    for tri in elements:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = tuple(sorted((tri[a], tri[b])))
            counts[key] = counts.get(key, 0) + 1
    return counts


def test_half_beam_small_counts():
    m = build_rect_half_beam(120.0, 2, 2)
    assert m.n_nodes == 9
    assert m.n_elements == 8
    assert m.char_length == pytest.approx(30.0)


def test_half_beam_desk_count_near_reference():
    # 2 * 47 * 47 = 4418, within 5% of the 4427 reference resolution
    m = build_rect_half_beam(120.0, 47, 47)
    assert m.n_elements == 4418
    assert abs(m.n_elements / 4427.0 - 1.0) < 0.05


def test_half_beam_area_exact():
    m = build_rect_half_beam(120.0, 5, 4)
    # half beam spans (L/2) x (L/6)
    assert m.total_volume == pytest.approx(120.0 ** 2 / 12.0, rel=1e-12)


def test_half_beam_boundary_layout():
    m = build_rect_half_beam(120.0, 3, 3)
    xs = m.nodes[:, 0]
    ys = m.nodes[:, 1]
    sym_nodes = np.nonzero(xs == 0.0)[0]
    # all x dofs on the symmetry edge are rollers
    for n in sym_nodes:
        assert 2 * n in m.fixed_dofs
    corner = np.nonzero((xs == xs.max()) & (ys == 0.0))[0]
    assert corner.size == 1
    assert 2 * corner[0] + 1 in m.fixed_dofs
    # single vertical load dof at the top of the symmetry edge
    top = np.nonzero((xs == 0.0) & (ys == ys.max()))[0]
    assert m.load_dofs.tolist() == [2 * top[0] + 1]
    assert m.load_weights.sum() == pytest.approx(1.0)


def test_l_beam_small_counts():
    m = build_l_beam(120.0, 3)
    # 9 blocks minus the removed 4 leaves 5 cells, 2 triangles each
    assert m.n_elements == 10


def test_l_beam_reference_resolution_count():
    m = build_l_beam(120.0, 129)
    assert m.n_elements == 18490
    assert abs(m.n_elements / 18492.0 - 1.0) < 0.05


def test_l_beam_area_exact():
    m = build_l_beam(120.0, 6)
    assert m.total_volume == pytest.approx(5.0 * 120.0 ** 2 / 9.0, rel=1e-12)


def test_l_beam_top_edge_fully_fixed():
    m = build_l_beam(120.0, 3)
    top = np.nonzero(m.nodes[:, 1] == 120.0)[0]
    assert top.size > 0
    for n in top:
        assert 2 * n in m.fixed_dofs
        assert 2 * n + 1 in m.fixed_dofs


def test_l_beam_load_on_right_edge():
    m = build_l_beam(36.0, 6)
    load_nodes = np.unique(m.load_dofs // 2)
    assert np.allclose(m.nodes[load_nodes, 0], 36.0)
    # vertical dofs only
    assert np.all(m.load_dofs % 2 == 1)
    assert m.load_weights.sum() == pytest.approx(1.0)


def test_l_beam_rejects_bad_resolution():
    with pytest.raises(ValueError):
        build_l_beam(120.0, 4)


def test_box_single_cell_split():
    m = build_box_cantilever(60.0, 1, 1, 1)
    assert m.n_nodes == 8
    assert m.n_elements == 6


def test_box_desk_count():
    m = build_box_cantilever(60.0, 15, 5, 3)
    assert m.n_elements == 6 * 15 * 5 * 3 == 1350


def test_box_volume_exact():
    m = build_box_cantilever(60.0, 3, 2, 2)
    assert m.total_volume == pytest.approx(60.0 ** 3 / 15.0, rel=1e-12)


def test_box_left_face_fixed_and_load_patch_weights():
    m = build_box_cantilever(60.0, 3, 2, 2)
    left = np.nonzero(m.nodes[:, 0] == 0.0)[0]
    for n in left:
        for c in range(3):
            assert 3 * n + c in m.fixed_dofs
    load_nodes = np.unique(m.load_dofs // 3)
    assert np.allclose(m.nodes[load_nodes, 0], m.nodes[:, 0].max())
    assert m.load_weights.sum() == pytest.approx(1.0)
    assert np.all(m.load_weights > 0)


@pytest.mark.parametrize("mesh", [
    build_rect_half_beam(120.0, 4, 3),
    build_l_beam(120.0, 6),
    build_box_cantilever(60.0, 3, 2, 2),
], ids=["rect", "l", "box"])
def test_all_volumes_positive(mesh):
    assert np.all(mesh.volumes > 0.0)


def test_loaded_dofs_never_fixed():
    for mesh in (build_rect_half_beam(120.0, 4, 3), build_l_beam(120.0, 6),
                 build_box_cantilever(60.0, 2, 2, 2)):
        assert np.intersect1d(mesh.load_dofs, mesh.fixed_dofs).size == 0


def test_rect_triangulation_watertight():
    m = build_rect_half_beam(120.0, 4, 3)
    counts = edge_multiset(m.elements)
    # interior edges shared by exactly two triangles, boundary by one
    assert set(counts.values()) == {1, 2}
    n_boundary = sum(1 for v in counts.values() if v == 1)
    assert n_boundary == 2 * (4 + 3)


def test_l_triangulation_watertight():
    counts = edge_multiset(build_l_beam(120.0, 6).elements)
    assert set(counts.values()) == {1, 2}


def test_box_tets_tile_each_cell():
    m = build_box_cantilever(60.0, 2, 1, 1)
    # per-cell tet volumes must add up to the hex cell volume
    cell_vol = m.total_volume / 2.0
    assert m.volumes[:6].sum() == pytest.approx(cell_vol, rel=1e-12)
    assert m.volumes[6:].sum() == pytest.approx(cell_vol, rel=1e-12)


def test_structured_rectangle_rejects_nonpositive():
    with pytest.raises(ValueError):
        structured_rectangle(0.0, 1.0, 2, 2)
    with pytest.raises(ValueError):
        build_rect_half_beam(120.0, 0, 2)


def test_simplex_volumes_hand_values():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    assert simplex_volumes(nodes, tris)[0] == pytest.approx(0.5, rel=1e-15)
    tet_nodes = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                          [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    tets = np.array([[0, 1, 2, 3]])
    assert simplex_volumes(tet_nodes, tets)[0] == pytest.approx(1.0 / 6.0,
                                                               rel=1e-15)


def test_mesh_rejects_degenerate_element():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        Mesh(dimension=2, nodes=nodes,
             elements=np.array([[0, 1, 1]]),
             fixed_dofs=np.array([0]),
             load_dofs=np.array([5]),
             load_weights=np.array([1.0]),
             char_length=1.0)


def test_mesh_rejects_inverted_element():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        Mesh(dimension=2, nodes=nodes,
             elements=np.array([[0, 2, 1]]),  # clockwise
             fixed_dofs=np.array([0]),
             load_dofs=np.array([5]),
             load_weights=np.array([1.0]),
             char_length=1.0)
