import numpy as np
import pytest

import meshgen
from curvforge import (IntrinsicMetric, MeshError, SurfaceMesh,
                       TriangleInequalityError, conformal_rescale,
                       discrete_curvatures, euler_characteristic, load_mesh)
from curvforge.elliptic import assemble


def test_single_triangle():
    mesh, metric = meshgen.build([(0, 0, 0), (1, 0, 0), (0.5, np.sqrt(3) / 2, 0)],
                                 [(0, 1, 2)])
    assert mesh.vertex_count == 3
    assert mesh.face_count == 1
    assert len(mesh.boundary_loops) == 1
    assert len(mesh.boundary_loops[0]) == 3
    assert euler_characteristic(mesh) == 1
    np.testing.assert_allclose(metric.edge_lengths, 1.0, rtol=1e-15)


def test_equilateral_turning_angles():
    mesh, metric = meshgen.build([(0, 0, 0), (1, 0, 0), (0.5, np.sqrt(3) / 2, 0)],
                                 [(0, 1, 2)])
    curv = discrete_curvatures(mesh, metric)
    np.testing.assert_allclose(curv.boundary_turning, 2 * np.pi / 3, rtol=1e-14)
    assert abs(curv.total_turning - 2 * np.pi) < 1e-14


def test_annulus_two_loops():
    mesh, _ = meshgen.annulus(2, 12)
    assert len(mesh.boundary_loops) == 2
    assert euler_characteristic(mesh) == 0


def test_euler_characteristics():
    disk, _ = meshgen.hex_disk(3)
    assert euler_characteristic(disk) == 1
    pants, _ = meshgen.pants()
    assert euler_characteristic(pants) == -1
    assert len(pants.boundary_loops) == 3


def test_non_manifold_edge_rejected():
    with pytest.raises(MeshError, match="non-manifold"):
        SurfaceMesh([(0, 1, 2), (1, 0, 3), (0, 1, 4)])


def test_inconsistent_orientation_rejected():
    with pytest.raises(MeshError, match="orientation"):
        SurfaceMesh([(0, 1, 2), (1, 2, 3)])


def test_disconnected_rejected():
    with pytest.raises(MeshError, match="disconnected"):
        SurfaceMesh([(0, 1, 2), (3, 4, 5)])


def test_closed_surface_rejected():
    # tetrahedron, consistently oriented
    with pytest.raises(MeshError, match="boundary"):
        SurfaceMesh([(0, 1, 2), (0, 2, 3), (0, 3, 1), (1, 3, 2)])


def test_degenerate_triangle_rejected():
    with pytest.raises((MeshError, TriangleInequalityError)):
        meshgen.build([(0, 0, 0), (1, 0, 0), (2, 0, 0)], [(0, 1, 2)])


def test_pinched_boundary_rejected():
    # two triangles sharing only one vertex would be disconnected; make a
    # bowtie connected through vertex 2
    with pytest.raises(MeshError):
        SurfaceMesh([(0, 1, 2), (2, 3, 4)])


def test_flat_disk_zero_interior_defect():
    mesh, metric = meshgen.hex_disk(5)
    curv = discrete_curvatures(mesh, metric)
    inner = ~mesh.is_boundary_vertex
    assert np.max(np.abs(curv.interior_defect[inner])) < 1e-12
    assert abs(curv.total_turning - 2 * np.pi) < 1e-12


def test_icosahedron_cap_gauss_bonnet_against_direct_angle_sum():
    mesh, metric = meshgen.icosahedron_cap()
    curv = discrete_curvatures(mesh, metric)
    total = curv.total_defect + curv.total_turning
    assert abs(total - 2 * np.pi) < 1e-12

    # oracle: angles recomputed from positions with dot products
    pos = mesh.vertex_positions
    angle_sum = np.zeros(mesh.vertex_count)
    for t in mesh.triangles:
        for k in range(3):
            a, b, c = pos[t[k]], pos[t[(k + 1) % 3]], pos[t[(k + 2) % 3]]
            v1, v2 = b - a, c - a
            cosang = v1 @ v2 / (np.linalg.norm(v1) * np.linalg.norm(v2))
            angle_sum[t[k]] += np.arccos(np.clip(cosang, -1, 1))
    bd = mesh.is_boundary_vertex
    direct = np.sum(2 * np.pi - angle_sum[~bd]) + np.sum(np.pi - angle_sum[bd])
    assert abs(total - direct) < 1e-12


def test_dual_measures():
    mesh, metric = meshgen.build(
        [(0, 0, 0), (1, 0, 0), (0.5, np.sqrt(3) / 2, 0)], [(0, 1, 2)])
    curv = discrete_curvatures(mesh, metric)
    area = np.sqrt(3) / 4
    np.testing.assert_allclose(curv.dual_area, area / 3, rtol=1e-14)
    np.testing.assert_allclose(curv.boundary_dual_length, 1.0, rtol=1e-14)


def test_conformal_rescale_identity_and_constant():
    mesh, metric = meshgen.annulus(2, 12)
    same = conformal_rescale(mesh, metric, np.zeros(mesh.vertex_count))
    np.testing.assert_array_equal(same.edge_lengths, metric.edge_lengths)
    doubled = conformal_rescale(mesh, metric,
                                np.full(mesh.vertex_count, np.log(2.0)))
    np.testing.assert_allclose(doubled.edge_lengths, 2 * metric.edge_lengths,
                               rtol=1e-15)


def test_conformal_rescale_composition():
    mesh, metric = meshgen.hex_disk(4)
    pos = mesh.vertex_positions
    u1 = 0.3 * np.sin(pos[:, 0]) * np.cos(pos[:, 1])
    u2 = 0.2 * pos[:, 0] * pos[:, 1]
    two_step = conformal_rescale(mesh, conformal_rescale(mesh, metric, u1), u2)
    one_step = conformal_rescale(mesh, metric, u1 + u2)
    np.testing.assert_allclose(two_step.edge_lengths, one_step.edge_lengths,
                               rtol=1e-14)


def test_conformal_rescale_triangle_inequality_error():
    mesh, metric = meshgen.hex_disk(3)
    u = np.zeros(mesh.vertex_count)
    u[1] = u[2] = 12.0  # stretches one edge of triangle (0,1,2) only
    with pytest.raises(TriangleInequalityError):
        conformal_rescale(mesh, metric, u)


def test_relabeling_invariance():
    mesh, metric = meshgen.hex_disk(3)
    curv = discrete_curvatures(mesh, metric)
    rng = np.random.default_rng(3)
    perm = rng.permutation(mesh.vertex_count)
    inv = np.argsort(perm)
    pos = mesh.vertex_positions[inv]
    tris = perm[mesh.triangles]
    mesh2, metric2 = meshgen.build(pos, tris)
    curv2 = discrete_curvatures(mesh2, metric2)
    np.testing.assert_allclose(np.sort(curv2.interior_defect),
                               np.sort(curv.interior_defect), atol=1e-13)
    np.testing.assert_allclose(np.sort(curv2.boundary_turning),
                               np.sort(curv.boundary_turning), atol=1e-13)


def test_rescaled_defect_matches_fem_prediction():
    # defects of the rescaled metric ~ exp(-2u) (K_g + Lap_h u) * dual_area,
    # with the flat disk contributing K_g = 0; O(h^2) per vertex
    errs = []
    for n in (8, 16, 32):
        mesh, metric = meshgen.hex_disk(n)
        ops = assemble(mesh, metric)
        pos = mesh.vertex_positions
        u = 0.3 * np.sin(pos[:, 0]) * np.cos(1.5 * pos[:, 1])
        curv_new = discrete_curvatures(mesh, conformal_rescale(mesh, metric, u))
        inner = ~mesh.is_boundary_vertex
        predicted_defect = (np.exp(-2 * u) * (ops.stiffness @ u) / ops.mass
                            * curv_new.dual_area)
        errs.append(np.max(
            np.abs(predicted_defect - curv_new.interior_defect)[inner]))
    assert errs[1] < 0.35 * errs[0]
    assert errs[2] < 0.35 * errs[1]


def test_off_obj_roundtrip(tmp_path):
    mesh, metric = meshgen.annulus(2, 10)
    path = meshgen.write_off(tmp_path / "a.off", mesh)
    mesh2, metric2 = load_mesh(str(path))
    assert mesh2.vertex_count == mesh.vertex_count
    np.testing.assert_allclose(metric2.edge_lengths, metric.edge_lengths,
                               rtol=1e-15)

    obj = tmp_path / "a.obj"
    with open(obj, "w") as fh:
        for p in mesh.vertex_positions:
            fh.write("v %.17g %.17g %.17g\n" % tuple(p))
        for t in mesh.triangles:
            fh.write("f %d %d %d\n" % tuple(t + 1))
    mesh3, metric3 = load_mesh(str(obj))
    np.testing.assert_allclose(metric3.edge_lengths, metric.edge_lengths,
                               rtol=1e-15)


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.off"
    bad.write_text("OFz\n")
    with pytest.raises(MeshError):
        load_mesh(str(bad))
    quad = tmp_path / "quad.off"
    quad.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
    with pytest.raises(MeshError, match="non-triangular"):
        load_mesh(str(quad))
    with pytest.raises(MeshError, match="format"):
        load_mesh(str(tmp_path / "mesh.stl"))


def test_metric_validation():
    mesh, _ = meshgen.build([(0, 0, 0), (1, 0, 0), (0.5, 1, 0)], [(0, 1, 2)])
    with pytest.raises(MeshError):
        IntrinsicMetric.from_lengths(mesh, [1.0, 1.0])  # wrong count
    with pytest.raises(MeshError):
        IntrinsicMetric.from_lengths(mesh, [1.0, -1.0, 1.0])
    with pytest.raises(TriangleInequalityError):
        IntrinsicMetric.from_lengths(mesh, [1.0, 1.0, 2.5])
