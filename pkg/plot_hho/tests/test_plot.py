"""Plot pipeline tests against synthetic tables and dumps."""

import numpy as np
import pytest

from plot_hho import (
    load_field_dump,
    load_table,
    plot_convergence,
    plot_enrichment_map,
    plot_fields,
    pressure_difference,
    velocity_difference,
)
from plot_hho.cli import main as cli_main

HEADER = "MeshTitle MeshSize NbCells NbInternalEdges DOFs L2Error EnergyError PressureError"


def write_table(path, rows):
    lines = [HEADER] + [" ".join(f"{v:.17g}" for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def synthetic_tables(tmp_path, count=3):
    paths = []
    for s, name in zip((1.0, 0.5, 0.25), ("a", "b", "c")):
        rows = [
            [i + 1, 0.35 / 2**i, 16 * 4**i, 24 * 4**i, 64 * 4**i,
             s * 0.2 / 4**i, s * 0.5 / 2**i, s * 0.4 / 2**i]
            for i in range(4)
        ]
        p = tmp_path / f"{name}.dat"
        write_table(p, rows)
        paths.append(p)
    return paths[:count]


def write_dump(path, n=16, scale=1.0):
    xs = (np.arange(n) + 0.5) / n
    lines = ["x y u_x u_y p mask"]
    for i in range(n):
        for j in range(n):
            x, y = xs[i], xs[j]
            mask = 0 if (x - 0.5) ** 2 + (y - 0.5) ** 2 < 0.04 else 1
            ux = scale * np.sin(3 * x) * mask
            uy = scale * np.cos(2 * y) * mask
            p = scale * (x - 0.5) * mask
            lines.append(f"{x:.17g} {y:.17g} {ux:.17g} {uy:.17g} {p:.17g} {mask}")
    path.write_text("\n".join(lines) + "\n")


def test_convergence_three_series(tmp_path):
    tables = synthetic_tables(tmp_path)
    out = tmp_path / "conv.png"
    got = plot_convergence(
        [str(t) for t in tables],
        labels=["Non-enriched", "gamma=0.1", "gamma=0.2"],
        slope=0.5,
        out_path=str(out),
    )
    assert got.exists() and got.stat().st_size > 0


def test_convergence_missing_column(tmp_path):
    tables = synthetic_tables(tmp_path, count=1)
    out = tmp_path / "conv.png"
    with pytest.raises(KeyError, match="NoSuchColumn"):
        plot_convergence([str(tables[0])], y_column="NoSuchColumn", out_path=str(out))
    assert not out.exists()


def test_empty_table_rejected(tmp_path):
    p = tmp_path / "empty.dat"
    p.write_text(HEADER + "\n")
    with pytest.raises(ValueError, match="no data rows"):
        load_table(p)
    out = tmp_path / "conv.png"
    with pytest.raises(ValueError):
        plot_convergence([str(p)], out_path=str(out))
    assert not out.exists()


def test_render_deterministic(tmp_path):
    tables = synthetic_tables(tmp_path)
    p1, p2 = tmp_path / "one.png", tmp_path / "two.png"
    plot_convergence([str(t) for t in tables], slope=1.0, out_path=str(p1))
    plot_convergence([str(t) for t in tables], slope=1.0, out_path=str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_field_dump_roundtrip(tmp_path):
    p = tmp_path / "dump.dat"
    write_dump(p)
    dump = load_field_dump(p)
    assert dump.u.shape == (16, 16, 2)
    assert set(np.unique(dump.mask)) == {0, 1}
    # masked region sits at the centre
    assert dump.mask[8, 8] == 0


def test_difference_of_self_is_zero(tmp_path):
    p = tmp_path / "dump.dat"
    write_dump(p)
    a, b = load_field_dump(p), load_field_dump(p)
    assert np.all(velocity_difference(a, b) == 0.0)
    assert np.all(pressure_difference(a, b) == 0.0)


def test_difference_detects_shape_mismatch(tmp_path):
    pa, pb = tmp_path / "a.dat", tmp_path / "b.dat"
    write_dump(pa, n=16)
    write_dump(pb, n=8)
    with pytest.raises(ValueError, match="different shapes|comparable"):
        velocity_difference(load_field_dump(pa), load_field_dump(pb))


def test_plot_fields_outputs(tmp_path):
    pa, pb = tmp_path / "a.dat", tmp_path / "b.dat"
    write_dump(pa, scale=1.0)
    write_dump(pb, scale=1.1)
    made = plot_fields(str(pa), other_path=str(pb), out_prefix=str(tmp_path / "f"))
    assert [m.name for m in made] == ["f_stream.png", "f_pressure.png", "f_udiff.png", "f_pdiff.png"]
    assert all(m.stat().st_size > 0 for m in made)


def test_difference_map_peaks_where_fields_differ(tmp_path):
    # difference magnitude localises where the two runs disagree
    pa, pb = tmp_path / "a.dat", tmp_path / "b.dat"
    write_dump(pa, scale=1.0)
    n = 16
    xs = (np.arange(n) + 0.5) / n
    lines = ["x y u_x u_y p mask"]
    for i in range(n):
        for j in range(n):
            x, y = xs[i], xs[j]
            mask = 0 if (x - 0.5) ** 2 + (y - 0.5) ** 2 < 0.04 else 1
            bump = 0.5 if (x - 0.5) ** 2 + (y - 0.5) ** 2 < 0.09 else 0.0
            ux = (np.sin(3 * x) + bump) * mask
            uy = np.cos(2 * y) * mask
            lines.append(f"{x:.17g} {y:.17g} {ux:.17g} {uy:.17g} {(x - 0.5) * mask:.17g} {mask}")
    pb.write_text("\n".join(lines) + "\n")
    a, b = load_field_dump(pa), load_field_dump(pb)
    delta = velocity_difference(a, b)
    peak = np.unravel_index(np.argmax(delta), delta.shape)
    dist = np.hypot(a.x[peak] - 0.5, a.y[peak] - 0.5)
    assert dist < 0.3  # concentrated near the masked cylinder


def test_enrichment_map(tmp_path):
    p = tmp_path / "map.dat"
    rng = np.random.default_rng(3)
    rows = ["x y dim"] + [
        f"{x:.6f} {y:.6f} {d}"
        for x, y, d in zip(rng.random(30), rng.random(30), rng.integers(0, 3, 30))
    ]
    p.write_text("\n".join(rows) + "\n")
    out = plot_enrichment_map(str(p), out_path=str(tmp_path / "map.png"))
    assert out.exists() and out.stat().st_size > 0


def test_cli_conv_and_fields(tmp_path):
    tables = synthetic_tables(tmp_path)
    out = tmp_path / "cli.png"
    rc = cli_main(
        ["conv", *map(str, tables), "--labels", "a,b,c", "--slope", "0.5", "--out", str(out)]
    )
    assert rc == 0 and out.exists()
    dump = tmp_path / "d.dat"
    write_dump(dump)
    rc = cli_main(["fields", str(dump), "--out", str(tmp_path / "cli_fields")])
    assert rc == 0
    rc = cli_main(["conv", str(tmp_path / "missing.dat"), "--out", str(out)])
    assert rc != 0
