import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import grid, two_blocks
from ftrcontact.mesh import (DIRICHLET, MORTAR, NONMORTAR, DofMap, Mesh, MeshError, MeshHierarchy,
                             boundary_length, deformed_boundary, prolongation, refine_uniform)


def single_triangle():
    return Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], [[0, 1]], [NONMORTAR], [1])


def test_refine_single_triangle_counts():
    fine = refine_uniform(single_triangle())
    assert len(fine.triangles) == 4
    assert fine.n_vertices == 6


def test_refine_unit_square_counts():
    v, t, _ = grid(0, 1, 0, 1, 1, 1)
    fine = refine_uniform(Mesh(v, t, np.zeros((0, 2)), [], [1, 1]))
    assert len(fine.triangles) == 8
    assert fine.n_vertices == 9


def test_refine_splits_contact_edge_into_two_contact_edges():
    fine = refine_uniform(single_triangle())
    assert fine.markers == (NONMORTAR, NONMORTAR)
    assert sorted(map(tuple, fine.segments.tolist())) == [(0, 3), (3, 1)]


def test_refinement_preserves_boundary_length_and_positive_areas():
    mesh = two_blocks()
    length = boundary_length(mesh)
    for _ in range(3):
        mesh = refine_uniform(mesh)
        assert boundary_length(mesh) == pytest.approx(length, rel=1e-14)
        assert np.all(mesh.areas() > 0)
        mesh.validate()


def test_prolongation_reproduces_coarse_values_and_linears():
    coarse = two_blocks()
    fine = refine_uniform(coarse)
    P = prolongation(coarse, fine)
    v = np.random.default_rng(0).normal(size=coarse.n_vertices)
    assert np.array_equal((P @ v)[:coarse.n_vertices], v)
    lin = 2.0 * coarse.vertices[:, 0] - 3.0 * coarse.vertices[:, 1] + 0.5
    assert np.allclose(P @ lin, 2.0 * fine.vertices[:, 0] - 3.0 * fine.vertices[:, 1] + 0.5, atol=1e-14)


def test_hierarchy_block_prolongations_interleave_components():
    h = MeshHierarchy.uniform(two_blocks(), 2)
    assert len(h.levels) == 3
    (P0, P1) = h.block_prolongations()
    assert P1.shape == (h.finest.n_dofs, h.levels[1].n_dofs)
    x = h.levels[0].vertices
    fine = P1 @ (P0 @ x.ravel())
    assert np.allclose(fine, h.finest.vertices.ravel(), atol=1e-14)


def test_deformed_boundary_identity_translation_and_single_move():
    mesh = two_blocks()
    nm = mesh.polyline(NONMORTAR)
    z = mesh.identity()
    assert np.array_equal(deformed_boundary(mesh, z, NONMORTAR), mesh.vertices[nm])
    t = np.array([0.3, -0.2])
    zt = (mesh.vertices + t).ravel()
    assert np.allclose(deformed_boundary(mesh, zt, NONMORTAR), mesh.vertices[nm] + t)
    z2 = z.copy()
    z2[2 * nm[1]:2 * nm[1] + 2] += [0.01, 0.02]
    out = deformed_boundary(mesh, z2, NONMORTAR)
    moved = np.flatnonzero(np.any(out != mesh.vertices[nm], axis=1))
    assert moved.tolist() == [1]


def test_absent_marker_gives_empty_polyline():
    mesh = single_triangle()
    assert deformed_boundary(mesh, mesh.identity(), MORTAR).shape == (0, 2)


def test_polyline_is_ordered_with_body_on_left():
    mesh = two_blocks()
    nm = mesh.vertices[mesh.polyline(NONMORTAR)]
    mo = mesh.vertices[mesh.polyline(MORTAR)]
    # block top runs right to left (body below), pipe bottom left to right (body above)
    assert np.all(np.diff(nm[:, 0]) < 0)
    assert np.all(np.diff(mo[:, 0]) > 0)


def test_validate_rejects_bad_markers_and_missing_dirichlet():
    mesh = two_blocks()
    swapped = [MORTAR if m == NONMORTAR else NONMORTAR if m == MORTAR else m for m in mesh.markers]
    with pytest.raises(MeshError):
        Mesh(mesh.vertices, mesh.triangles, mesh.segments, swapped, mesh.body).validate()
    no_dir = ["neumann" if m == DIRICHLET else m for m in mesh.markers]
    with pytest.raises(MeshError):
        Mesh(mesh.vertices, mesh.triangles, mesh.segments, no_dir, mesh.body).validate()
    with pytest.raises(MeshError):
        Mesh(mesh.vertices, mesh.triangles, mesh.segments, ["bogus"] * len(mesh.markers), mesh.body)


def test_dofmap_partition_is_a_permutation():
    mesh = two_blocks()
    dm = DofMap.from_mesh(mesh)
    assert dm.m1 == 5 and dm.m2 == 7
    perm = dm.permutation
    assert np.array_equal(np.sort(perm), np.arange(mesh.n_dofs))
    assert np.array_equal(perm[:2 * dm.m1], dm.dofs(mesh.polyline(NONMORTAR)))
    assert np.array_equal(dm.permutation, DofMap.from_mesh(mesh).permutation)


@settings(max_examples=25, deadline=None)
@given(nx=st.integers(1, 5), ny=st.integers(1, 5), levels=st.integers(0, 2))
def test_refinement_vertex_count_and_area_invariants(nx, ny, levels):
    v, t, _ = grid(0, 1.5, 0, 1, nx, ny)
    mesh = Mesh(v, t, np.zeros((0, 2)), [], np.ones(len(t), int))
    area = mesh.areas().sum()
    for _ in range(levels):
        n_edges = len({tuple(sorted(e)) for tri in mesh.triangles for e in
                       ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))})
        expected = mesh.n_vertices + n_edges
        mesh = refine_uniform(mesh)
        assert mesh.n_vertices == expected
    assert np.all(mesh.areas() > 0)
    assert mesh.areas().sum() == pytest.approx(area, rel=1e-13)
