"""Mesh construction, invariants, diagnostics and failure modes."""

import math

import numpy as np
import pytest

from hho_stokes.geometry import Circle
from hho_stokes.mesh import (
    FaceUse,
    MeshBuildError,
    MeshTopologyError,
    build_cartesian_cut_mesh,
    dump_mesh,
    validate_mesh,
)


def test_plain_grid_combinatorics(mesh_plain4):
    assert len(mesh_plain4.elements) == 16
    internal = [f for f in mesh_plain4.faces if f.kind == "internal"]
    assert len(internal) == 24
    # element diameter is the cell diagonal
    assert mesh_plain4.h == pytest.approx(0.25 * math.sqrt(2.0), rel=1e-14)


def test_cut_mesh_area(mesh_r01_n8):
    total = sum(e.area for e in mesh_r01_n8.elements)
    exact = 1.0 - 0.01 * math.pi
    assert total == pytest.approx(exact, rel=1e-10)


def test_tiny_cylinder_classification(mesh_r001_n8):
    # brute force: the disc of radius 0.01 at the centre only meets the
    # four cells that touch (0.5, 0.5)
    touched = {(3, 3), (4, 3), (3, 4), (4, 4)}
    for el in mesh_r001_n8.elements:
        arcs = [u for u in el.faces if u.face.kind == "cylinder_boundary"]
        if el.cell in touched:
            assert el.cut_by == (0,)
            assert len(arcs) == 1
            assert len(el.faces) == 5
        else:
            assert el.cut_by == ()
            assert not arcs
            assert len(el.faces) == 4
    assert len(mesh_r001_n8.elements) == 64


def test_validate_uniform_chunkiness(mesh_plain4):
    d = validate_mesh(mesh_plain4)
    assert d.min_chunkiness == pytest.approx(d.max_chunkiness, rel=1e-12)
    assert np.all(d.area_fractions == 1.0)


def test_validate_cut_mesh(mesh_r01_n8):
    d = validate_mesh(mesh_r01_n8)
    assert np.all(d.area_fractions > 0.0)
    assert np.all(d.area_fractions <= 1.0 + 1e-14)
    assert d.area_defect < 1e-12


def test_validate_detects_corrupted_orientation(mesh_plain4):
    import copy

    bad = copy.deepcopy(mesh_plain4)
    use = bad.elements[5].faces[0]
    bad.elements[5].faces[0] = FaceUse(use.face, -use.orientation)
    with pytest.raises(MeshTopologyError, match="orientation|loop"):
        validate_mesh(bad)


def test_validate_detects_dangling_face(mesh_plain4):
    import copy

    from hho_stokes.geometry import Segment
    from hho_stokes.mesh import Face

    bad = copy.deepcopy(mesh_plain4)
    bad.faces.append(Face(len(bad.faces), Segment(0.1, 0.1, 0.2, 0.1), "internal"))
    with pytest.raises(MeshTopologyError, match="dangling"):
        validate_mesh(bad)


def test_face_partition_counts(mesh_r01_n8):
    uses = sum(len(owners) for owners in mesh_r01_n8.face_elements)
    per_element = sum(len(el.faces) for el in mesh_r01_n8.elements)
    assert uses == per_element


def test_internal_faces_have_opposite_orientations(mesh_r01_n8):
    for f in mesh_r01_n8.faces:
        owners = mesh_r01_n8.face_elements[f.id]
        if f.kind == "internal":
            assert len(owners) == 2
            assert owners[0][1] + owners[1][1] == 0
        else:
            assert len(owners) == 1


def test_arc_outward_normal_points_at_center(mesh_r01_n8):
    c = mesh_r01_n8.cylinders[0]
    for el in mesh_r01_n8.elements:
        for use in el.faces:
            if use.face.kind != "cylinder_boundary":
                continue
            geom = use.face.geom
            th = np.linspace(geom.theta0, geom.theta1, 7)[1:-1]
            pts = geom.circle.point_at(th)
            n = use.orientation * geom.normal(pts)
            expected = (c.center - pts) / c.radius
            assert np.abs(n - expected).max() < 1e-13


def test_arc_faces_subtend_less_than_pi():
    # a cylinder crossing a single gridline produces two half-disc cut
    # cells whose arcs must be bisected
    mesh = build_cartesian_cut_mesh(10, [Circle(0.4, 0.275, 0.01)])
    arcs = [f for f in mesh.faces if f.kind == "cylinder_boundary"]
    assert arcs
    assert sum(f.geom.span for f in arcs) == pytest.approx(2.0 * math.pi, rel=1e-12)
    for f in arcs:
        assert f.geom.span < math.pi


def test_rejects_boundary_touching_cylinder():
    with pytest.raises(MeshBuildError, match="square boundary"):
        build_cartesian_cut_mesh(8, [Circle(0.1, 0.5, 0.11)])


def test_rejects_tangent_cylinder():
    with pytest.raises(MeshBuildError, match="tangent"):
        build_cartesian_cut_mesh(8, [Circle(0.5, 0.5, 0.125)])


def test_rejects_vertex_crossing():
    r = math.hypot(0.25, 0.25)
    with pytest.raises(MeshBuildError, match="vertex"):
        build_cartesian_cut_mesh(4, [Circle(0.5, 0.5, r)])


def test_rejects_cylinder_inside_single_cell():
    with pytest.raises(MeshBuildError, match="simply connected"):
        build_cartesian_cut_mesh(4, [Circle(0.3701, 0.3703, 0.01)])


def test_rejects_overlapping_cylinders():
    with pytest.raises(MeshBuildError, match="intersect"):
        build_cartesian_cut_mesh(8, [Circle(0.4, 0.5, 0.1), Circle(0.55, 0.5, 0.1)])


def test_rejects_tiny_grid():
    with pytest.raises(MeshBuildError):
        build_cartesian_cut_mesh(1, [])


def test_locate_points(mesh_r01_n8):
    assert mesh_r01_n8.locate([0.51, 0.5]) == -1  # inside the cylinder
    eid = mesh_r01_n8.locate([0.05, 0.05])
    assert eid >= 0
    assert mesh_r01_n8.elements[eid].cell == (0, 0)
    eid = mesh_r01_n8.locate([0.615, 0.615])  # in a cut cell, fluid side
    assert eid >= 0
    assert mesh_r01_n8.elements[eid].cell == (4, 4)
    assert mesh_r01_n8.locate([1.2, 0.5]) == -1


def test_dump_mesh(tmp_path, mesh_r001_n8):
    path = tmp_path / "mesh.txt"
    dump_mesh(mesh_r001_n8, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "hho-mesh v1"
    assert lines[1] == "n 8"
    assert lines[2] == "cylinders 1"
    nfaces = len(mesh_r001_n8.faces)
    assert f"faces {nfaces}" in lines
    assert f"elements {len(mesh_r001_n8.elements)}" in lines
    # segment and arc face lines are present
    assert any(ln.startswith("S ") for ln in lines)
    assert any(ln.startswith("A ") for ln in lines)


def test_four_cylinder_meshes_build():
    from hho_stokes.experiments import FOUR_CYLINDERS

    for n in (10, 20):
        mesh = build_cartesian_cut_mesh(n, list(FOUR_CYLINDERS))
        exact = mesh.fluid_area_exact()
        total = sum(e.area for e in mesh.elements)
        assert total == pytest.approx(exact, rel=1e-10)
        validate_mesh(mesh)


def test_random_cylinder_configurations_build_consistently():
    # randomized sweep: every accepted configuration conserves area and
    # passes the topology checks; degenerate ones are rejected loudly
    rng = np.random.default_rng(1234)
    built = rejected = 0
    for _ in range(60):
        n = int(rng.integers(4, 17))
        r = float(10 ** rng.uniform(-1.8, -0.75))
        cx = float(0.3 + 0.4 * rng.random())
        cy = float(0.3 + 0.4 * rng.random())
        try:
            mesh = build_cartesian_cut_mesh(n, [Circle(cx, cy, r)])
        except MeshBuildError:
            rejected += 1
            continue
        built += 1
        exact = mesh.fluid_area_exact()
        total = sum(e.area for e in mesh.elements)
        assert abs(total - exact) < 1e-11 * exact, (n, cx, cy, r)
        d = validate_mesh(mesh)
        assert d.min_chunkiness > 0.0
    assert built >= 30  # most random configurations are regular
    assert built + rejected == 60


def test_element_loops_closed(mesh_r01_n8):
    for el in mesh_r01_n8.elements:
        pts = []
        for use in el.faces:
            g = use.face.geom
            a, b = g.point_at(0.0), g.point_at(1.0)
            if use.orientation < 0:
                a, b = b, a
            pts.append((a, b))
        for (_, pb), (qa, _) in zip(pts, pts[1:] + pts[:1]):
            assert np.hypot(*(pb - qa)) < 1e-12
