import numpy as np
import pytest

from dunkkit import geometry as geo
from dunkkit.assembly import p2_basis
from dunkkit.mesh import (Mesh, MeshError, check_area, graded_points, mesh_domain, prolong, rectangle_mesh,
                          refine, refine_times, refine_to, triangulate)


@pytest.fixture
def tri():
    return triangulate(geo.right_triangle(0.25))


def test_triangulate_conserves_area():
    for d in (geo.right_triangle(0.25), geo.gear_halftooth(32, 0.4), geo.regular_polygon(40), geo.gear(8, 1.6)):
        m = triangulate(d)
        m.validate()
        assert check_area(m, d) < 1e-12
        assert m.robin_length == pytest.approx(d.boundary, rel=1e-12)


def test_refine_quadruples(tri):
    f = refine(tri)
    f.validate()
    assert len(f.triangles) == 4 * len(tri.triangles)
    assert len(f.boundary) == 2 * len(tri.boundary)
    assert f.area == pytest.approx(tri.area, rel=1e-14)
    assert f.h_max == pytest.approx(tri.h_max / 2)


def test_refine_to(tri):
    m = refine_to(tri, tri.h_max / 5)
    assert m.h_max <= tri.h_max / 5
    assert m.level == 3
    with pytest.raises(MeshError):
        refine_to(tri, 0.0)


def test_p2_dof_count(tri):
    m = refine_times(tri, 2)
    assert m.n_dofs == m.n_vertices + len(m.edges)


def test_prolong_reproduces_quadratics(tri):
    coarse = refine(tri)
    fine = refine_times(coarse, 2)

    def f(p):
        return 1 + 2 * p[:, 0] - p[:, 1] + 3 * p[:, 0] * p[:, 1] - p[:, 1] ** 2

    u = prolong(coarse, fine, f(coarse.p2_points))
    assert np.allclose(u, f(fine.p2_points), atol=1e-12)


def test_prolong_rejects_unrelated_meshes(tri):
    other = refine(triangulate(geo.right_triangle(0.5)))
    with pytest.raises((MeshError, ValueError)):
        prolong(refine(tri), other, np.zeros(refine(tri).n_dofs))


def test_rectangle_mesh_regions_and_tags():
    m = rectangle_mesh(graded_points([0, 0.5, 1], 0.25), graded_points([0, 1], 0.5),
                       region_of=lambda x, y: int(x > 0.5))
    m.validate()
    assert set(np.unique(m.regions)) == {0, 1}
    a = m.areas
    assert a[m.regions == 1].sum() == pytest.approx(0.5)
    assert m.robin_length == pytest.approx(4.0)


def test_graded_points_contains_breaks():
    p = graded_points([0.0, 0.3, 1.0], 0.25)
    assert 0.3 in p
    assert np.max(np.diff(p)) <= 0.25 + 1e-12


def test_rectangle_mesher_is_structured():
    m = mesh_domain(geo.rectangle(0.25, 0.99), 0.125)
    m.validate()
    assert m.area == pytest.approx(0.2475)


def test_json_roundtrip(tmp_path, tri):
    m = refine(tri).retagged(lambda a, b: "neumann" if abs(a[0]) < 1e-12 and abs(b[0]) < 1e-12 else "robin")
    path = tmp_path / "m.json"
    m.save(str(path))
    import json
    back = Mesh.from_json(json.loads(path.read_text()))
    assert np.array_equal(back.triangles, m.triangles)
    assert back.boundary_tags == m.boundary_tags
    assert back.robin_length == pytest.approx(m.robin_length)
    assert back.robin_length == pytest.approx(m.boundary_lengths.sum() - 1.0)


def test_validate_catches_flipped_triangle(tri):
    bad = Mesh(tri.vertices, tri.triangles[:, ::-1].copy(), tri.regions, tri.boundary, tri.boundary_tags)
    with pytest.raises(MeshError):
        bad.validate()


def test_basis_partition_of_unity():
    xi, eta = np.random.default_rng(0).random((2, 50)) / 2
    assert np.allclose(p2_basis(xi, eta).sum(axis=-1), 1.0)


def test_ring_mesh_quality_and_exactness():
    from dunkkit.mesh import ring_mesh
    from dunkkit.sensitivity import solve_sensitivity
    d = geo.regular_polygon(32)
    m = ring_mesh(d)
    m.validate()
    assert check_area(m, d) < 1e-12
    ang = [np.degrees(np.arccos(np.clip(np.dot(q - p, r - p) / np.linalg.norm(q - p) / np.linalg.norm(r - p), -1, 1)))
           for tri in m.vertices[m.triangles] for p, q, r in (tri, np.roll(tri, 1, 0), np.roll(tri, 2, 0))]
    assert min(ang) > 25.0
    # an n-gon has an incircle, so the sensitivity is quadratic and both meshes are exact
    assert solve_sensitivity(m).phi == pytest.approx(solve_sensitivity(triangulate(d)).phi, rel=1e-10)
    with pytest.raises(MeshError):
        ring_mesh(geo.right_triangle(1.0))
