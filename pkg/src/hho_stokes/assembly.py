"""Global saddle-point assembly and solves.

Velocity unknowns live on faces and elements, pressure unknowns on
elements; Dirichlet data is imposed by projecting onto boundary face
spaces and eliminating those dofs, and the zero-mean pressure constraint
is a single Lagrange multiplier coupling the per-element constant
pressure modes.  ``condense_and_solve`` eliminates element velocity dofs
and all non-constant pressure dofs element by element before the sparse
solve; ``solve_full`` keeps everything coupled (used to verify the
condensation is exact).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .local_ops import LocalOperators, build_local_operators
from .mesh import Mesh
from .spaces import EnrichmentConfig, SpaceFactory

__all__ = [
    "StokesProblem",
    "GlobalDofMap",
    "DiscreteSolution",
    "AssembledProblem",
    "assemble",
    "condense_and_solve",
    "solve_full",
    "reconstruct_fields",
    "divergence_residual",
]


@dataclass
class StokesProblem:
    """Stokes flow with Dirichlet data on every boundary (square sides and
    cylinder surfaces).

    ``body_force`` maps points (n, 2) to values (n, 2) or is None for
    zero load.  ``dirichlet`` maps (face, points) to boundary velocity
    values; the helper ``uniform_dirichlet`` adapts plain callables.
    """

    mesh: Mesh
    degree: int
    enrichment: EnrichmentConfig | None
    viscosity: float = 1.0
    body_force: object = None
    dirichlet: object = None

    def __post_init__(self):
        if not self.viscosity > 0.0:
            raise ValueError("viscosity must be positive")


def uniform_dirichlet(fn):
    return lambda face, points: fn(points)


@dataclass
class GlobalDofMap:
    face_offsets: np.ndarray  # per face id, offset into the velocity block
    face_dims: np.ndarray
    cell_offsets: np.ndarray  # per element id
    cell_dims: np.ndarray
    pressure_offsets: np.ndarray  # per element id, offset into pressure block
    pressure_dims: np.ndarray
    n_velocity: int
    n_pressure: int
    boundary_faces: list[int]

    @property
    def n_total(self) -> int:
        # velocity + pressure + zero-mean multiplier
        return self.n_velocity + self.n_pressure + 1

    def condensed_count(self, mesh: Mesh) -> int:
        """Globally coupled dofs after condensation and boundary
        elimination: internal face dofs plus one pressure per element."""
        internal = sum(
            self.face_dims[f.id] for f in mesh.faces if f.kind == "internal"
        )
        return int(internal + len(mesh.elements))


@dataclass
class AssembledProblem:
    problem: StokesProblem
    dof_map: GlobalDofMap
    locals: list[LocalOperators]
    rhs_cells: list[np.ndarray]
    boundary_values: dict[int, np.ndarray]  # face id -> projected data
    matrix: scipy.sparse.csc_matrix
    rhs: np.ndarray
    unknown: np.ndarray  # global indices kept after boundary elimination
    known: np.ndarray
    known_values: np.ndarray


@dataclass
class DiscreteSolution:
    problem: StokesProblem
    dof_map: GlobalDofMap
    locals: list[LocalOperators]
    face_coeffs: dict[int, np.ndarray]
    cell_coeffs: list[np.ndarray]
    pressure_coeffs: list[np.ndarray]
    multiplier: float
    recon_coeffs: list[np.ndarray] = field(default_factory=list)

    def local_velocity_dofs(self, element_id: int) -> np.ndarray:
        ops = self.locals[element_id]
        el = ops.element
        out = np.zeros(ops.layout.total)
        out[ops.layout.cell_slice] = self.cell_coeffs[element_id]
        for i, use in enumerate(el.faces):
            out[ops.layout.face_slice(i)] = self.face_coeffs[use.face.id]
        return out

    def pressure_mean(self) -> float:
        return sum(
            float(ops.pressure_integrals @ self.pressure_coeffs[ops.element.id])
            for ops in self.locals
        )

    def pressure_l2(self) -> float:
        return float(np.sqrt(sum(p @ p for p in self.pressure_coeffs)))

    def velocity_h1_broken(self) -> float:
        total = 0.0
        for ops in self.locals:
            r = self.recon_coeffs[ops.element.id]
            total += float(r @ ops.stiffness @ r)
        return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# assembly


def _build_locals(problem: StokesProblem):
    factory = SpaceFactory(problem.mesh, problem.degree, problem.enrichment)
    locals_, rhs_cells = [], []
    for el in problem.mesh.elements:
        spaces = factory.local_spaces(el)
        ops = build_local_operators(spaces)
        locals_.append(ops)
        if problem.body_force is None:
            rhs_cells.append(np.zeros(spaces.cell.dim))
        else:
            rule = spaces.rule
            fv = np.asarray(problem.body_force(rule.points))
            rhs_cells.append(spaces.cell.project(fv))
    return locals_, rhs_cells


def _dof_map(problem: StokesProblem, locals_) -> GlobalDofMap:
    mesh = problem.mesh
    face_dims = np.zeros(len(mesh.faces), dtype=int)
    for ops in locals_:
        for i, use in enumerate(ops.element.faces):
            face_dims[use.face.id] = ops.layout.face_dims[i]
    face_offsets = np.concatenate([[0], np.cumsum(face_dims)])[:-1]
    nface = int(face_dims.sum())
    cell_dims = np.array([ops.layout.cell_dim for ops in locals_])
    cell_offsets = nface + np.concatenate([[0], np.cumsum(cell_dims)])[:-1]
    n_velocity = nface + int(cell_dims.sum())
    pressure_dims = np.array([ops.layout.pressure_dim for ops in locals_])
    pressure_offsets = n_velocity + np.concatenate([[0], np.cumsum(pressure_dims)])[:-1]
    n_pressure = int(pressure_dims.sum())
    boundary = [f.id for f in mesh.faces if f.is_boundary]
    return GlobalDofMap(
        face_offsets,
        face_dims,
        cell_offsets,
        cell_dims,
        pressure_offsets,
        pressure_dims,
        n_velocity,
        n_pressure,
        boundary,
    )


def _element_global_indices(dof_map: GlobalDofMap, ops: LocalOperators):
    """Global indices of [cell block | face blocks | pressure block]."""
    el = ops.element
    idx = []
    idx.extend(range(dof_map.cell_offsets[el.id], dof_map.cell_offsets[el.id] + ops.layout.cell_dim))
    for i, use in enumerate(el.faces):
        off = dof_map.face_offsets[use.face.id]
        idx.extend(range(off, off + ops.layout.face_dims[i]))
    poff = dof_map.pressure_offsets[el.id]
    idx.extend(range(poff, poff + ops.layout.pressure_dim))
    return np.asarray(idx, dtype=int)


def _local_saddle(problem: StokesProblem, ops: LocalOperators, rhs_cell: np.ndarray):
    """Local block [[nu A, B^T], [B, 0]] in the order [velocity | pressure]
    with the velocity ordering [cell | faces], plus its right-hand side."""
    N = ops.layout.total
    P = ops.layout.pressure_dim
    K = np.zeros((N + P, N + P))
    K[:N, :N] = problem.viscosity * ops.energy
    K[:N, N:] = ops.div_form.T
    K[N:, :N] = ops.div_form
    rhs = np.zeros(N + P)
    rhs[ops.layout.cell_slice] = rhs_cell
    return K, rhs


def _boundary_projection(problem: StokesProblem, locals_, dof_map: GlobalDofMap):
    """L2 projections of the Dirichlet data onto boundary face spaces."""
    mesh = problem.mesh
    if problem.dirichlet is None:
        data = lambda face, points: np.zeros(points.shape[:-1] + (2,))
    else:
        data = problem.dirichlet
    spaces_by_face = {}
    for ops in locals_:
        for i, use in enumerate(ops.element.faces):
            spaces_by_face.setdefault(use.face.id, ops.spaces.faces[i])
    out = {}
    for fid in dof_map.boundary_faces:
        fs = spaces_by_face[fid]
        g = np.asarray(data(mesh.faces[fid], fs.rule.points))
        out[fid] = fs.project(g)
    return out


def assemble(problem: StokesProblem) -> AssembledProblem:
    """Assemble the full (uncondensed) saddle-point system with the
    zero-mean multiplier, and split known boundary dofs from unknowns."""
    locals_, rhs_cells = _build_locals(problem)
    dof_map = _dof_map(problem, locals_)
    n = dof_map.n_total
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for ops, rc in zip(locals_, rhs_cells):
        K, r = _local_saddle(problem, ops, rc)
        gidx = _element_global_indices(dof_map, ops)
        rr, cc = np.meshgrid(gidx, gidx, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(K.ravel())
        rhs[gidx] += r
        # zero-mean multiplier column/row against the pressure integrals
        poff = dof_map.pressure_offsets[ops.element.id]
        pidx = np.arange(poff, poff + ops.layout.pressure_dim)
        rows.append(pidx)
        cols.append(np.full(len(pidx), n - 1))
        vals.append(ops.pressure_integrals)
        rows.append(np.full(len(pidx), n - 1))
        cols.append(pidx)
        vals.append(ops.pressure_integrals)
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()

    boundary_values = _boundary_projection(problem, locals_, dof_map)
    known_idx, known_vals = [], []
    for fid, g in boundary_values.items():
        off = dof_map.face_offsets[fid]
        known_idx.extend(range(off, off + dof_map.face_dims[fid]))
        known_vals.extend(g)
    known = np.asarray(known_idx, dtype=int)
    mask = np.ones(n, dtype=bool)
    mask[known] = False
    unknown = np.nonzero(mask)[0]
    return AssembledProblem(
        problem,
        dof_map,
        locals_,
        rhs_cells,
        boundary_values,
        matrix,
        rhs,
        unknown,
        known,
        np.asarray(known_vals),
    )


def _solution_from_vector(asm: AssembledProblem, full: np.ndarray) -> DiscreteSolution:
    dof_map = asm.dof_map
    face_coeffs = {
        f.id: full[dof_map.face_offsets[f.id] : dof_map.face_offsets[f.id] + dof_map.face_dims[f.id]]
        for f in asm.problem.mesh.faces
    }
    cell_coeffs = [
        full[dof_map.cell_offsets[e] : dof_map.cell_offsets[e] + dof_map.cell_dims[e]]
        for e in range(len(asm.problem.mesh.elements))
    ]
    pressure_coeffs = [
        full[dof_map.pressure_offsets[e] : dof_map.pressure_offsets[e] + dof_map.pressure_dims[e]]
        for e in range(len(asm.problem.mesh.elements))
    ]
    sol = DiscreteSolution(
        asm.problem,
        dof_map,
        asm.locals,
        face_coeffs,
        cell_coeffs,
        pressure_coeffs,
        multiplier=float(full[-1]),
    )
    reconstruct_fields(sol)
    return sol


def solve_full(asm: AssembledProblem) -> DiscreteSolution:
    """Direct solve of the uncondensed system."""
    n = asm.dof_map.n_total
    full = np.zeros(n)
    full[asm.known] = asm.known_values
    K = asm.matrix
    rhs = asm.rhs[asm.unknown] - K[np.ix_(asm.unknown, asm.known)] @ asm.known_values
    Kuu = K[np.ix_(asm.unknown, asm.unknown)].tocsc()
    sol = scipy.sparse.linalg.spsolve(Kuu, rhs)
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("singular saddle-point system (bad mesh or spaces)")
    full[asm.unknown] = sol
    return _solution_from_vector(asm, full)


def condense_and_solve(asm: AssembledProblem) -> DiscreteSolution:
    """Static condensation: eliminate element velocity dofs and all
    pressure dofs except the constant mode element by element, solve the
    reduced sparse system, then back-substitute."""
    problem = asm.problem
    mesh = problem.mesh
    dof_map = asm.dof_map

    # condensed dof numbering: all face dofs, then one pressure per
    # element, then the multiplier
    nfacedofs = int(dof_map.face_dims.sum())
    ncond = nfacedofs + len(mesh.elements) + 1
    rows, cols, vals = [], [], []
    rhs_c = np.zeros(ncond)
    backsub = []

    for ops, rc in zip(asm.locals, asm.rhs_cells):
        el = ops.element
        K, r = _local_saddle(problem, ops, rc)
        N = ops.layout.total
        nt = ops.layout.cell_dim
        P = ops.layout.pressure_dim
        interior = list(range(nt)) + list(range(N + 1, N + P))
        keep = list(range(nt, N)) + [N]
        Kii = K[np.ix_(interior, interior)]
        Kib = K[np.ix_(interior, keep)]
        Kbi = K[np.ix_(keep, interior)]
        Kbb = K[np.ix_(keep, keep)]
        lu = scipy.linalg.lu_factor(Kii)
        Y = scipy.linalg.lu_solve(lu, np.column_stack([Kib, r[interior]]))
        S = Kbb - Kbi @ Y[:, :-1]
        g = r[keep] - Kbi @ Y[:, -1]
        backsub.append((interior, keep, lu, Kib, r))

        gidx = []
        for i, use in enumerate(el.faces):
            off = dof_map.face_offsets[use.face.id]
            gidx.extend(range(off, off + ops.layout.face_dims[i]))
        gidx.append(nfacedofs + el.id)
        gidx = np.asarray(gidx, dtype=int)
        rr, cc = np.meshgrid(gidx, gidx, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(S.ravel())
        rhs_c[gidx] += g
        # multiplier couples to the constant pressure mode
        c0 = ops.pressure_integrals[0]
        rows.append(np.array([nfacedofs + el.id, ncond - 1]))
        cols.append(np.array([ncond - 1, nfacedofs + el.id]))
        vals.append(np.array([c0, c0]))

    Kc = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ncond, ncond),
    ).tocsc()

    known_idx, known_vals = [], []
    for fid, g in asm.boundary_values.items():
        off = dof_map.face_offsets[fid]
        known_idx.extend(range(off, off + dof_map.face_dims[fid]))
        known_vals.extend(g)
    known = np.asarray(known_idx, dtype=int)
    known_vals = np.asarray(known_vals)
    mask = np.ones(ncond, dtype=bool)
    mask[known] = False
    unknown = np.nonzero(mask)[0]
    rhs_u = rhs_c[unknown] - Kc[np.ix_(unknown, known)] @ known_vals
    sol_u = scipy.sparse.linalg.spsolve(Kc[np.ix_(unknown, unknown)].tocsc(), rhs_u)
    if not np.all(np.isfinite(sol_u)):
        raise RuntimeError("singular condensed system (bad mesh or spaces)")
    cond_full = np.zeros(ncond)
    cond_full[known] = known_vals
    cond_full[unknown] = sol_u

    # expand back to the full dof vector
    full = np.zeros(dof_map.n_total)
    full[-1] = cond_full[-1]
    for f in mesh.faces:
        off = dof_map.face_offsets[f.id]
        full[off : off + dof_map.face_dims[f.id]] = cond_full[off : off + dof_map.face_dims[f.id]]
    for ops, (interior, keep, lu, Kib, r) in zip(asm.locals, backsub):
        el = ops.element
        xb = []
        for i, use in enumerate(el.faces):
            off = dof_map.face_offsets[use.face.id]
            xb.extend(cond_full[off : off + ops.layout.face_dims[i]])
        xb.append(cond_full[nfacedofs + el.id])
        xb = np.asarray(xb)
        xi = scipy.linalg.lu_solve(lu, r[interior] - Kib @ xb)
        nt = ops.layout.cell_dim
        coff = dof_map.cell_offsets[el.id]
        full[coff : coff + nt] = xi[:nt]
        poff = dof_map.pressure_offsets[el.id]
        full[poff] = xb[-1]
        full[poff + 1 : poff + ops.layout.pressure_dim] = xi[nt:]
    return _solution_from_vector(asm, full)


def reconstruct_fields(sol: DiscreteSolution) -> None:
    sol.recon_coeffs = [
        ops.recon @ sol.local_velocity_dofs(ops.element.id) for ops in sol.locals
    ]


def divergence_residual(sol: DiscreteSolution) -> float:
    """max over pressure test functions of the discrete mass equation
    residual, including the multiplier contribution."""
    worst = 0.0
    for ops in sol.locals:
        el = ops.element
        dofs = sol.local_velocity_dofs(el.id)
        r = ops.div_form @ dofs + sol.multiplier * ops.pressure_integrals
        worst = max(worst, float(np.abs(r).max()))
    return worst
