"""Per-element operators: the extended elliptic projector, the local
interpolator, the velocity reconstruction, the divergence reconstruction,
the stabilisation, and the local bilinear forms, all as matrices acting
on the flat local degree-of-freedom vector [cell block | face blocks].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .spaces import LocalSpaces

__all__ = [
    "LocalDofLayout",
    "LocalOperators",
    "build_local_operators",
    "elliptic_project",
    "interpolate",
]


@dataclass(frozen=True)
class LocalDofLayout:
    cell_dim: int
    face_dims: tuple[int, ...]
    pressure_dim: int

    @property
    def total(self) -> int:
        return self.cell_dim + sum(self.face_dims)

    @property
    def cell_slice(self) -> slice:
        return slice(0, self.cell_dim)

    def face_slice(self, i: int) -> slice:
        off = self.cell_dim + sum(self.face_dims[:i])
        return slice(off, off + self.face_dims[i])


@dataclass
class LocalOperators:
    """Matrices of one element's discrete operators.

    recon: (dim recon x N) velocity reconstruction
    div: (dim pressure x N) divergence reconstruction
    stab: (N x N) stabilisation form
    energy: (N x N) gradient-plus-stabilisation form (viscosity-free)
    div_form: (dim pressure x N) divergence bilinear form (minus div)
    stiffness: (dim recon x dim recon) gradient Gram of the recon space
    interp_recon: (N x dim recon) interpolants of the recon basis
    pressure_integrals: integrals of the pressure basis (first entry is
        sqrt(area) for the constant mode, the rest vanish)
    """

    spaces: LocalSpaces
    layout: LocalDofLayout
    recon: np.ndarray
    div: np.ndarray
    stab: np.ndarray
    energy: np.ndarray
    div_form: np.ndarray
    stiffness: np.ndarray
    interp_recon: np.ndarray
    pressure_integrals: np.ndarray
    stab_factors: list  # (weight, mismatch matrix) pairs; stab = sum w E^T E
    _bordered_lu: tuple

    @property
    def element(self):
        return self.spaces.element


def _bordered_solve(lu, rhs_top: np.ndarray, rhs_mean: np.ndarray) -> np.ndarray:
    """Solve the stiffness system with the mean-value closure rows."""
    nr = rhs_top.shape[0]
    rhs = np.vstack([rhs_top, rhs_mean]) if rhs_top.ndim == 2 else np.concatenate(
        [rhs_top, rhs_mean]
    )
    sol = scipy.linalg.lu_solve(lu, rhs)
    return sol[:nr]


def build_local_operators(spaces: LocalSpaces) -> LocalOperators:
    el = spaces.element
    rule = spaces.rule
    pts, w = rule.points, rule.weights
    recon, cell, pressure = spaces.recon, spaces.cell, spaces.pressure

    Wv = recon.eval_value(pts)  # (nr, nq, 2)
    Wg = recon.eval_gradient(pts)  # (nr, nq, 2, 2)
    Wl = recon.eval_laplacian(pts)  # (nr, nq, 2)
    Tv = cell.eval_value(pts)  # (nt, nq, 2)
    Qv = pressure.eval_value(pts)  # (npr, nq)
    Qg = pressure.eval_gradient(pts)  # (npr, nq, 2)

    nr = recon.dim
    layout = LocalDofLayout(cell.dim, tuple(fs.dim for fs in spaces.faces), pressure.dim)
    N = layout.total

    stiffness = np.einsum("iqab,jqab,q->ij", Wg, Wg, w)
    mean_recon = np.einsum("iqc,q->ci", Wv, w)  # (2, nr)
    mean_cell = np.einsum("iqc,q->ci", Tv, w)  # (2, nt)

    # reconstruction right-hand side: integration by parts against the
    # recon basis
    M = np.zeros((nr, N))
    M[:, layout.cell_slice] = -np.einsum("iqc,mqc,q->im", Wl, Tv, w)
    div = np.zeros((pressure.dim, N))
    div[:, layout.cell_slice] = -np.einsum("mqa,tqa,q->mt", Qg, Tv, w)
    X_cell = np.einsum("mqc,iqc,q->mi", Tv, Wv, w)  # projection of recon onto cell
    interp_recon = np.zeros((N, nr))
    interp_recon[layout.cell_slice] = X_cell

    face_proj = []  # (dim V_F x nr) per face
    for i, use in enumerate(el.faces):
        fs = spaces.faces[i]
        frule = fs.rule
        fpts, fw = frule.points, frule.weights
        n_out = use.orientation * use.face.geom.normal(fpts)  # (nqf, 2)
        Fv = fs.eval_value(fpts)  # (nf, nqf, 2)
        Wfv = recon.eval_value(fpts)
        Wfg = recon.eval_gradient(fpts)
        Wfn = np.einsum("iqab,qb->iqa", Wfg, n_out)
        M[:, layout.face_slice(i)] = np.einsum("iqc,mqc,q->im", Wfn, Fv, fw)
        Qfv = pressure.eval_value(fpts)
        div[:, layout.face_slice(i)] = np.einsum(
            "mq,fqc,qc,q->mf", Qfv, Fv, n_out, fw
        )
        X_f = np.einsum("mqc,iqc,q->mi", Fv, Wfv, fw)
        face_proj.append(X_f)
        interp_recon[layout.face_slice(i)] = X_f

    # bordered reconstruction system: gradients fixed up to constants, the
    # vector mean supplies the closure.  The gradient Gram is assembled by
    # applying the right-hand-side pairing to interpolants of the recon
    # basis itself; this is a consistent discretisation of the same Gram
    # and makes "reconstruct after interpolate" the identity on the recon
    # space to machine precision, independent of quadrature error in the
    # enrichment integrals.
    bordered = np.zeros((nr + 2, nr + 2))
    bordered[:nr, :nr] = M @ interp_recon
    bordered[:nr, nr:] = mean_recon.T
    bordered[nr:, :nr] = mean_recon
    lu = scipy.linalg.lu_factor(bordered)
    pivots = np.abs(np.diag(lu[0]))
    if pivots.min() <= 1e-14 * pivots.max():
        raise RuntimeError(
            f"singular reconstruction system on element {el.id} "
            "(mean closure failed)"
        )

    # reconstruction: solve the bordered system column by column, the
    # closure matching the cell-block mean
    mean_rhs = np.zeros((2, N))
    mean_rhs[:, layout.cell_slice] = mean_cell
    R = _bordered_solve(lu, M, mean_rhs)

    # stabilisation with the enriched projections
    hT = el.diameter
    E_cell = np.zeros((cell.dim, N))
    E_cell[:, layout.cell_slice] = np.eye(cell.dim)
    E_cell -= X_cell @ R
    stab_factors = [(hT**-2, E_cell)]
    for i in range(len(el.faces)):
        E_f = np.zeros((layout.face_dims[i], N))
        E_f[:, layout.face_slice(i)] = np.eye(layout.face_dims[i])
        E_f -= face_proj[i] @ R
        stab_factors.append((1.0 / hT, E_f))
    stab = sum(wgt * (E.T @ E) for wgt, E in stab_factors)

    energy = R.T @ stiffness @ R + stab
    press_ints = np.einsum("mq,q->m", Qv, w)

    return LocalOperators(
        spaces=spaces,
        layout=layout,
        recon=R,
        div=div,
        stab=stab,
        energy=energy,
        div_form=-div,
        stiffness=stiffness,
        interp_recon=interp_recon,
        pressure_integrals=press_ints,
        stab_factors=stab_factors,
        _bordered_lu=lu,
    )


def elliptic_project(ops: LocalOperators, value_fn, gradient_fn) -> np.ndarray:
    """Coefficients in the recon space of the extended elliptic projection
    (gradient-orthogonal with mean-value closure)."""
    rule = ops.spaces.rule
    pts, w = rule.points, rule.weights
    Wg = ops.spaces.recon.eval_gradient(pts)
    g = np.asarray(gradient_fn(pts))
    rhs = np.einsum("iqab,qab,q->i", Wg, g, w)
    v = np.asarray(value_fn(pts))
    mean = np.einsum("qc,q->c", v, w)
    return _bordered_solve(ops._bordered_lu, rhs, mean)


def interpolate(spaces: LocalSpaces, value_fn, ops: LocalOperators | None = None) -> np.ndarray:
    """Local interpolator: L2 projections onto the cell space and each
    face space, stacked into a dof vector."""
    layout = (
        ops.layout
        if ops is not None
        else LocalDofLayout(
            spaces.cell.dim, tuple(fs.dim for fs in spaces.faces), spaces.pressure.dim
        )
    )
    out = np.zeros(layout.total)
    rule = spaces.rule
    out[layout.cell_slice] = spaces.cell.project(np.asarray(value_fn(rule.points)))
    for i, fs in enumerate(spaces.faces):
        out[layout.face_slice(i)] = fs.project(np.asarray(value_fn(fs.rule.points)))
    return out


def l2_project_recon(spaces: LocalSpaces, value_fn) -> np.ndarray:
    """Coefficients of the L2 projection onto the recon space."""
    return spaces.recon.project(np.asarray(value_fn(spaces.rule.points)))


def discrete_seminorm_sq(ops: LocalOperators, dofs: np.ndarray) -> float:
    """The squared coupled seminorm evaluated directly from its definition
    (gradient of the reconstruction plus scaled projection mismatches)."""
    spaces = ops.spaces
    el = spaces.element
    r = ops.recon @ dofs
    total = float(r @ ops.stiffness @ r)
    hT = el.diameter
    rule = spaces.rule
    rv = np.tensordot(r, spaces.recon.eval_value(rule.points), axes=(0, 0))
    mismatch = np.tensordot(
        dofs[ops.layout.cell_slice] - spaces.cell.project(rv),
        spaces.cell.eval_value(rule.points),
        axes=(0, 0),
    )
    total += float(np.einsum("qc,qc,q->", mismatch, mismatch, rule.weights)) / hT**2
    for i, fs in enumerate(spaces.faces):
        fr = fs.rule
        rvf = np.tensordot(r, spaces.recon.eval_value(fr.points), axes=(0, 0))
        mism = np.tensordot(
            dofs[ops.layout.face_slice(i)] - fs.project(rvf),
            fs.eval_value(fr.points),
            axes=(0, 0),
        )
        total += float(np.einsum("qc,qc,q->", mism, mism, fr.weights)) / hT
    return total
