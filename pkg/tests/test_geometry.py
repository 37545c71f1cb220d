import numpy as np
import pytest

from nimlab.geometry import (
    MeshLocator,
    build_annular_mesh,
    embed_disk_inclusions,
    max_edge_length,
    triangle_areas,
    triangle_centroids,
)


def test_conforming_circles_and_positive_areas():
    mesh = build_annular_mesh(10.0, [1, 2, 4, 8], 64)
    assert mesh.interface_circles == (1.0, 2.0, 4.0, 8.0)
    assert triangle_areas(mesh).min() > 0
    vr = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])[mesh.triangles]
    for rho in mesh.interface_circles:
        tol = 1e-9 * rho
        straddle = (vr.min(axis=1) < rho - tol) & (vr.max(axis=1) > rho + tol)
        assert not straddle.any()


def test_plain_disk_degenerate_case():
    mesh = build_annular_mesh(1.0, [], 16)
    assert mesh.num_triangles > 0
    assert mesh.interface_circles == ()


def test_area_sum_matches_inscribed_polygon():
    mesh = build_annular_mesh(3.0, [1.0, 2.0], 48, radial_grading=1.7)
    polygon = 0.5 * 48 * 3.0**2 * np.sin(2 * np.pi / 48)
    assert abs(triangle_areas(mesh).sum() - polygon) <= 1e-12 * polygon


def test_h_halves_with_angular_count():
    h1 = max_edge_length(build_annular_mesh(10.0, [1, 2, 4, 8], 64))
    h2 = max_edge_length(build_annular_mesh(10.0, [1, 2, 4, 8], 128))
    assert abs(h2 / h1 - 0.5) <= 0.1  # halves within 20%


def test_determinism_bitwise():
    a = build_annular_mesh(5.0, [1.0, 2.5], 32, radial_grading=1.5)
    b = build_annular_mesh(5.0, [1.0, 2.5], 32, radial_grading=1.5)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)
    ar = embed_disk_inclusions(a, [(1.0, 0.0)], 0.2)
    br = embed_disk_inclusions(b, [(1.0, 0.0)], 0.2)
    assert np.array_equal(ar.vertices, br.vertices)
    assert np.array_equal(ar.triangles, br.triangles)
    assert np.array_equal(ar.inclusion_tag, br.inclusion_tag)


def test_invalid_inputs_raise():
    with pytest.raises(ValueError):
        build_annular_mesh(10.0, [2.0, 1.0], 64)  # non-increasing
    with pytest.raises(ValueError):
        build_annular_mesh(10.0, [2.0, 12.0], 64)  # beyond outer radius
    with pytest.raises(ValueError):
        build_annular_mesh(10.0, [1.0], 8)  # too few sectors


def test_region_tags_partition_annuli():
    mesh = build_annular_mesh(10.0, [1, 2, 4, 8], 48)
    r = mesh.element_radii()
    expected = np.searchsorted(np.array([1.0, 2.0, 4.0, 8.0]), r)
    assert np.array_equal(mesh.region_tag, expected)


def test_inclusion_tagging_point_in_disk_oracle():
    # Two objects hugging the lens circles: tags must match an independent
    # centroid-in-disk test and stay disjoint.
    r1, r2, r0 = 2.0, 4.0, 0.1
    x1, x2 = (r1, 0.0), (0.0, r2)
    mesh = build_annular_mesh(10.0, [r1, r2, 8.0], 96)
    refined = embed_disk_inclusions(mesh, [x1, x2], r0, levels=1)
    cent = triangle_centroids(refined)
    in1 = np.hypot(cent[:, 0] - x1[0], cent[:, 1] - x1[1]) < r0
    in2 = np.hypot(cent[:, 0] - x2[0], cent[:, 1] - x2[1]) < r0
    assert np.array_equal(refined.inclusion_tag == 0, in1)
    assert np.array_equal(refined.inclusion_tag == 1, in2)
    assert not (in1 & in2).any()
    assert (refined.inclusion_tag == 0).sum() > 0
    assert (refined.inclusion_tag == 1).sum() > 0


def test_inclusion_zero_radius_is_noop_and_errors():
    mesh = build_annular_mesh(10.0, [2.0], 32)
    assert embed_disk_inclusions(mesh, [(2.0, 0.0)], 0.0) is mesh
    with pytest.raises(ValueError):
        embed_disk_inclusions(mesh, [(1.5, 0.0)], 0.1)  # not on a circle
    with pytest.raises(ValueError):
        embed_disk_inclusions(mesh, [(2.0, 0.0)], 5.0)  # reaches next layer


def test_refinement_keeps_conformity_and_boundary():
    mesh = build_annular_mesh(10.0, [2.0, 4.0], 64)
    refined = embed_disk_inclusions(mesh, [(2.0, 0.0), (0.0, 4.0)], 0.15, levels=2)
    assert triangle_areas(refined).min() > 0
    bverts = refined.boundary_vertices()
    vr = np.hypot(refined.vertices[bverts, 0], refined.vertices[bverts, 1])
    assert np.allclose(vr, 10.0, rtol=1e-9)
    # edge counts: every boundary edge appears once
    assert len(refined.boundary_edges) >= len(mesh.boundary_edges)


def test_locator_interpolates_linear_fields_exactly():
    mesh = build_annular_mesh(2.0, [1.0], 32)
    loc = MeshLocator(mesh)
    values = 3.0 * mesh.vertices[:, 0] - 2.0 * mesh.vertices[:, 1] + 1.0
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1.2, 1.2, size=(200, 2))
    got = loc.interpolate(values, pts)
    want = 3.0 * pts[:, 0] - 2.0 * pts[:, 1] + 1.0
    assert np.max(np.abs(got - want)) < 1e-12
