"""Experiment drivers, table emission, dumps, CLI, and the scheme-level
properties (scale invariance, DOF accounting, no-slip imposition)."""

import subprocess
import sys

import numpy as np
import pytest

from hho_stokes.assembly import assemble, condense_and_solve
from hho_stokes.cli import main as cli_main, parse_config_file
from hho_stokes.experiments import (
    FOUR_CYLINDERS,
    ExperimentConfig,
    _test_b_problem,
    dof_count,
    dump_enrichment_map,
    dump_fields,
    emit_table,
    run_test_a,
    run_test_b,
    sample_fields,
    solve_test_b,
)
from hho_stokes.geometry import Circle
from hho_stokes.mesh import build_cartesian_cut_mesh
from hho_stokes.spaces import EnrichmentConfig


@pytest.fixture(scope="module")
def small_report():
    cfg = ExperimentConfig(test="A", k=0, gamma=0.1, radius=0.1, meshes=(4, 8))
    return run_test_a(cfg)


def test_table_shape(tmp_path, small_report):
    path = tmp_path / "table.dat"
    emit_table(small_report, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 3  # header + one row per mesh
    assert lines[0] == "MeshTitle MeshSize NbCells NbInternalEdges DOFs L2Error EnergyError PressureError"


def test_table_deterministic(tmp_path):
    cfg = ExperimentConfig(test="A", k=0, gamma=0.1, radius=0.1, meshes=(4,))
    p1, p2 = tmp_path / "a.dat", tmp_path / "b.dat"
    emit_table(run_test_a(cfg), p1)
    emit_table(run_test_a(cfg), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_report_rejected(tmp_path):
    from hho_stokes.experiments import ErrorReport, TEST_A_COLUMNS

    with pytest.raises(ValueError):
        emit_table(ErrorReport("A", TEST_A_COLUMNS), tmp_path / "x.dat")


def test_dof_accounting(small_report):
    # recompute the formula independently: element count plus the summed
    # internal-face dimensions
    cfg = ExperimentConfig(test="A", k=0, gamma=0.1, radius=0.1, meshes=(8,))
    mesh = build_cartesian_cut_mesh(8, [Circle(0.5, 0.5, 0.1)])
    from hho_stokes.experiments import _test_a_problem

    problem, _, _ = _test_a_problem(mesh, cfg)
    sol = condense_and_solve(assemble(problem))
    expected = len(mesh.elements)
    factory_dims = {}
    for ops in sol.locals:
        for i, use in enumerate(ops.element.faces):
            factory_dims[use.face.id] = ops.layout.face_dims[i]
    expected += sum(factory_dims[f.id] for f in mesh.internal_faces)
    assert dof_count(sol) == expected
    row = next(r for r in small_report.rows if r.nb_cells == len(mesh.elements))
    assert row.dofs == expected


def test_dofs_strictly_increasing(small_report):
    dofs = small_report.values("DOFs")
    assert np.all(np.diff(dofs) > 0)


def test_scale_invariance_of_relative_errors():
    # multiplying the data by ten leaves relative errors unchanged
    from hho_stokes.analytic import CylinderFlow, ManufacturedSolution
    from hho_stokes.assembly import StokesProblem
    from hho_stokes.experiments import measure_test_a_errors

    mesh = build_cartesian_cut_mesh(4, [Circle(0.5, 0.5, 0.1)])
    cfg = EnrichmentConfig(0.2, tuple(mesh.cylinders))
    ms = ManufacturedSolution(CylinderFlow(mesh.cylinders[0]))
    results = []
    for scale in (1.0, 10.0):
        pb = StokesProblem(
            mesh,
            0,
            cfg,
            body_force=lambda p, s=scale: s * ms.body_force(p),
            dirichlet=lambda face, p, s=scale: s * ms.velocity(p),
        )
        sol = condense_and_solve(assemble(pb))
        errs = measure_test_a_errors(
            sol,
            lambda p, s=scale: s * ms.velocity(p, fluid_only=False),
            lambda p, s=scale: s * ms.pressure(p, fluid_only=False),
        )
        results.append(errs)
    for key in results[0]:
        assert results[0][key] == pytest.approx(results[1][key], rel=1e-9)


def test_monotone_refinement(small_report):
    for col in ("L2Error", "EnergyError", "PressureError"):
        vals = small_report.values(col)
        assert np.all(np.diff(vals) < 0)


def test_run_test_a_reports_failing_mesh():
    cfg = ExperimentConfig(test="A", k=0, gamma=0.0, radius=0.125, meshes=(8,))
    with pytest.raises(RuntimeError, match="mesh 1"):
        run_test_a(cfg)  # R = 0.125 is tangent to gridlines at n = 8


def test_enrichment_gain_grows_with_refinement():
    # near-singular cylinder: the enriched scheme wins by a factor that
    # grows along the mesh sequence
    non = run_test_a(ExperimentConfig(test="A", k=0, gamma=0.0, radius=0.01, meshes=(8, 16)))
    enr = run_test_a(ExperimentConfig(test="A", k=0, gamma=0.2, radius=0.01, meshes=(8, 16)))
    factors = [
        n.metrics["EnergyError"] / e.metrics["EnergyError"]
        for n, e in zip(non.rows, enr.rows)
    ]
    assert factors[0] > 1.0
    assert factors[1] > factors[0]


@pytest.fixture(scope="module")
def reference_b20():
    return solve_test_b(20, 1, 0.2)


def test_no_slip_exact_on_cylinder_faces(reference_b20):
    sol = reference_b20
    mesh = sol.problem.mesh
    for f in mesh.faces:
        if f.kind == "cylinder_boundary":
            assert np.abs(sol.face_coeffs[f.id]).max() == 0.0
        elif f.kind == "square_boundary":
            # boundary dofs carry the projection of the far-field e_x
            fs = sol.locals[mesh.face_elements[f.id][0][0]]
            spaces = fs.spaces
            i = next(
                j for j, use in enumerate(fs.element.faces) if use.face.id == f.id
            )
            ex = np.zeros(spaces.faces[i].rule.points.shape)
            ex[:, 0] = 1.0
            proj = spaces.faces[i].project(ex)
            assert np.abs(sol.face_coeffs[f.id] - proj).max() < 1e-13


def test_test_b_enriched_beats_non_enriched(reference_b20):
    non = run_test_b(
        ExperimentConfig(test="B", k=0, gamma=0.0, meshes=(10,), reference_n=20),
        reference=reference_b20,
    )
    enr = run_test_b(
        ExperimentConfig(test="B", k=0, gamma=0.1, meshes=(10,), reference_n=20),
        reference=reference_b20,
    )
    assert enr.rows[0].metrics["H1Error"] < non.rows[0].metrics["H1Error"]
    assert enr.rows[0].metrics["PressureError"] < non.rows[0].metrics["PressureError"]


def test_test_b_converges_toward_reference(reference_b20):
    rep = run_test_b(
        ExperimentConfig(test="B", k=0, gamma=0.1, meshes=(10, 20), reference_n=20),
        reference=reference_b20,
    )
    h1 = rep.values("H1Error")
    pe = rep.values("PressureError")
    assert h1[1] < h1[0]
    assert pe[1] < pe[0]


def test_test_b_reference_row_omitted():
    ref = solve_test_b(10, 1, 0.2)
    rep = run_test_b(
        ExperimentConfig(test="B", k=1, gamma=0.2, meshes=(10,), reference_n=10),
        reference=ref,
    )
    assert rep.rows == []


def test_field_dump_format(tmp_path):
    mesh = build_cartesian_cut_mesh(4, [Circle(0.5, 0.5, 0.1)])
    from hho_stokes.analytic import CylinderFlow
    from hho_stokes.assembly import StokesProblem, uniform_dirichlet

    flow = CylinderFlow(mesh.cylinders[0])
    pb = StokesProblem(mesh, 0, None, dirichlet=uniform_dirichlet(flow.velocity))
    sol = condense_and_solve(assemble(pb))
    path = tmp_path / "fields.dat"
    dump_fields(sol, path, resolution=20)
    lines = path.read_text().splitlines()
    assert lines[0] == "x y u_x u_y p mask"
    assert len(lines) == 1 + 20 * 20
    data = np.loadtxt(path, skiprows=1)
    mask = data[:, 5].astype(int)
    assert set(mask) == {0, 1}
    # masked rows carry zero fields; the cylinder occupies the centre
    assert np.all(data[mask == 0, 2:5] == 0.0)
    center = data[np.argmin((data[:, 0] - 0.5) ** 2 + (data[:, 1] - 0.5) ** 2)]
    assert center[5] == 0


def test_sampled_velocity_matches_boundary_data():
    mesh = build_cartesian_cut_mesh(4, [])
    from hho_stokes.assembly import StokesProblem, uniform_dirichlet

    c = np.array([0.4, 0.1])
    pb = StokesProblem(
        mesh, 0, None,
        dirichlet=uniform_dirichlet(lambda p: np.broadcast_to(c, p.shape[:-1] + (2,)).copy()),
    )
    sol = condense_and_solve(assemble(pb))
    _, _, U, P, M = sample_fields(sol, resolution=10)
    assert np.all(M == 1)
    assert np.abs(U - c).max() < 1e-9


def test_enrichment_map_dump(tmp_path):
    mesh = build_cartesian_cut_mesh(10, list(FOUR_CYLINDERS))
    cfg = EnrichmentConfig(0.2, tuple(mesh.cylinders))
    path = tmp_path / "enrich.dat"
    dump_enrichment_map(mesh, cfg, path)
    data = np.loadtxt(path, skiprows=1)
    assert len(data) == len(mesh.elements)
    assert set(data[:, 2].astype(int)) >= {0, 1}


def test_config_file_parsing(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(
        """# comment
test A
k = 1
gamma 0.2
radius 0.1
meshes 4,8
out {0}
""".format(tmp_path)
    )
    settings = parse_config_file(cfgfile)
    assert settings == {
        "test": "A",
        "k": 1,
        "gamma": 0.2,
        "radius": 0.1,
        "meshes": "4,8",
        "out": str(tmp_path),
    }


def test_config_file_rejects_unknown_key(tmp_path):
    cfgfile = tmp_path / "bad.cfg"
    cfgfile.write_text("bogus 1\n")
    with pytest.raises(ValueError, match="unknown key"):
        parse_config_file(cfgfile)


def test_cli_run_and_override(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(f"test A\nk 0\ngamma 0.2\nradius 0.1\nmeshes 4,8\nout {tmp_path}\n")
    rc = cli_main(["run", "--config", str(cfgfile), "--meshes", "4"])
    assert rc == 0
    table = tmp_path / "testA_R0.1_k0_gamma0.2.dat"
    assert table.exists()
    assert len(table.read_text().splitlines()) == 2  # cli --meshes overrode the file


def test_cli_reports_errors(tmp_path, capsys):
    rc = cli_main(["run", "--test", "A", "--radius", "0.125", "--meshes", "8", "--out", str(tmp_path)])
    assert rc != 0
    assert "error:" in capsys.readouterr().err


def test_cli_dump_mesh(tmp_path):
    out = tmp_path / "mesh.txt"
    rc = cli_main(["dump-mesh", "-n", "4", "--radius", "0.1", "--out", str(out)])
    assert rc == 0
    assert out.read_text().startswith("hho-mesh v1")


def test_cli_dump_fields(tmp_path):
    rc = cli_main(
        [
            "run", "--test", "A", "--k", "0", "--gamma", "0.2", "--radius", "0.1",
            "--meshes", "4", "--out", str(tmp_path), "--dump-fields",
            "--resolution", "20", "--label", "dumped",
        ]
    )
    assert rc == 0
    fields = tmp_path / "dumped_fields_n4.dat"
    assert fields.read_text().startswith("x y u_x u_y p mask")
    enrich = tmp_path / "dumped_enrichment_n4.dat"
    assert enrich.read_text().startswith("x y dim")
    assert (tmp_path / "dumped.dat").exists()


def test_cli_entry_point_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "hho_stokes.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "run" in proc.stdout
