"""Command-line front end.

``hho-stokes run`` executes a configured experiment and writes the
whitespace-delimited error table (plus optional field and enrichment
dumps); ``hho-stokes dump-mesh`` writes the plain-text mesh format.
Configuration comes from a flat key-value file, command-line flags
override file entries.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import (
    FOUR_CYLINDERS,
    TEST_A_MESHES,
    TEST_B_MESHES,
    ExperimentConfig,
    dump_enrichment_map,
    dump_fields,
    emit_table,
    run_test_a,
    run_test_b,
)
from .geometry import Circle
from .mesh import build_cartesian_cut_mesh, dump_mesh
from .spaces import EnrichmentConfig

_CONFIG_KEYS = {
    "test": str,
    "k": int,
    "gamma": float,
    "radius": float,
    "meshes": str,
    "solution": str,
    "nu": float,
    "reference_n": int,
    "out": str,
    "label": str,
    "dump_fields": lambda s: s.lower() in ("1", "true", "yes"),
    "resolution": int,
}


def parse_config_file(path) -> dict:
    """Flat ``key value`` (or ``key = value``) lines, # comments."""
    out = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p for p in line.replace("=", " ", 1).split(None, 1)]
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected 'key value', got {raw!r}")
        key, value = parts[0], parts[1].strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{ln}: unknown key {key!r}")
        out[key] = _CONFIG_KEYS[key](value)
    return out


def _parse_meshes(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hho-stokes")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and emit its table")
    run.add_argument("--config", help="flat key-value config file")
    run.add_argument("--test", choices=["A", "B", "a", "b"])
    run.add_argument("--k", type=int)
    run.add_argument("--gamma", type=float)
    run.add_argument("--radius", type=float)
    run.add_argument("--meshes", help="comma-separated resolutions, e.g. 4,8,16")
    run.add_argument("--solution", choices=["manufactured", "cylinder"])
    run.add_argument("--nu", type=float)
    run.add_argument("--reference-n", dest="reference_n", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--label", help="basename for output files")
    run.add_argument("--dump-fields", dest="dump_fields", action="store_true", default=None)
    run.add_argument("--resolution", type=int, help="field dump grid resolution")

    dm = sub.add_parser("dump-mesh", help="write the plain-text mesh dump")
    dm.add_argument("-n", type=int, required=True)
    dm.add_argument("--radius", type=float, help="single centred cylinder radius")
    dm.add_argument("--four-cylinders", action="store_true", help="use the multi-cylinder layout")
    dm.add_argument("--out", required=True)
    return ap


def _run(args) -> int:
    settings: dict = {}
    if args.config:
        settings.update(parse_config_file(args.config))
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val

    test = str(settings.get("test", "A")).upper()
    meshes = settings.get("meshes")
    if isinstance(meshes, str):
        meshes = _parse_meshes(meshes)
    if meshes is None:
        meshes = TEST_A_MESHES if test == "A" else TEST_B_MESHES
    cfg = ExperimentConfig(
        test=test,
        k=int(settings.get("k", 0)),
        gamma=float(settings.get("gamma", 0.0)),
        radius=float(settings.get("radius", 0.1)),
        meshes=meshes,
        solution=settings.get("solution", "manufactured"),
        viscosity=float(settings.get("nu", 1.0)),
        reference_n=int(settings.get("reference_n", 45)),
        out_dir=settings.get("out", "."),
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label = settings.get("label", cfg.label())

    want_dumps = bool(settings.get("dump_fields", False))
    resolution = int(settings.get("resolution", 200))
    if want_dumps:
        # re-solve per mesh to keep the runner simple; dumps are rare
        from .assembly import assemble, condense_and_solve
        from .experiments import _test_a_problem, _test_b_problem

        for n in cfg.meshes:
            if test == "A":
                mesh = build_cartesian_cut_mesh(n, [Circle(0.5, 0.5, cfg.radius)])
                problem, _, _ = _test_a_problem(mesh, cfg)
            else:
                mesh = build_cartesian_cut_mesh(n, list(FOUR_CYLINDERS))
                problem = _test_b_problem(mesh, cfg.k, cfg.gamma, cfg.viscosity)
            sol = condense_and_solve(assemble(problem))
            dump_fields(sol, out_dir / f"{label}_fields_n{n}.dat", resolution)
            if cfg.gamma > 0:
                config = EnrichmentConfig(cfg.gamma, tuple(mesh.cylinders))
                dump_enrichment_map(mesh, config, out_dir / f"{label}_enrichment_n{n}.dat")

    report = run_test_a(cfg) if test == "A" else run_test_b(cfg)
    table_path = out_dir / f"{label}.dat"
    emit_table(report, table_path)
    if report.reference is not None:
        print(
            f"reference (n={cfg.reference_n}, k=1, gamma=0.2): "
            f"pressure norm {report.reference['pressure_l2']:.8g}, "
            f"velocity seminorm {report.reference['velocity_h1']:.8g}"
        )
    print(f"wrote {table_path}")
    return 0


def _dump_mesh(args) -> int:
    if args.four_cylinders:
        cylinders = list(FOUR_CYLINDERS)
    elif args.radius:
        cylinders = [Circle(0.5, 0.5, args.radius)]
    else:
        cylinders = []
    mesh = build_cartesian_cut_mesh(args.n, cylinders)
    dump_mesh(mesh, args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        return _dump_mesh(args)
    except Exception as exc:  # diagnostics, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
