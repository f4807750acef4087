"""Local function spaces: polynomial bases on elements, the curved-face
velocity space, cylinder enrichment driven by a distance cutoff, and the
enriched reconstruction/element/face/pressure spaces, each pruned to an
independent, orthonormalised basis.

Orthonormality is with respect to the quadrature inner product of the
rule stored on each space; every downstream operator uses that same rule,
which is what makes projections drop exactly in the commutation algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import CylinderFlow
from .fields import (
    CombinedField,
    CylinderPressureField,
    CylinderVelocityField,
    FaceMonomial,
    FaceVectorMonomial,
    NormalMonomial,
    PressureGradientField,
    PressureNormalTrace,
    VelocityGradientNormalTrace,
    scalar_monomials,
    vector_monomials,
)
from .geometry import Arc, Circle, Segment
from .mesh import Element, Face, Mesh
from .quadrature import QuadratureRule, element_rule, face_rule

__all__ = [
    "EnrichmentConfig",
    "FunctionSpace",
    "LocalSpaces",
    "SpaceFactory",
    "SpaceError",
    "prune_dependent",
    "element_poly_basis",
    "curved_face_basis",
    "enrichment_sets",
    "build_local_spaces",
]

# functions whose residual norm (relative to a unit-normalised spanning
# set) falls below this are pruned as linearly dependent
PRUNE_REL_TOL = 1e-10
# measurable floor: residuals below sqrt of this are quadrature noise
_RESIDUAL2_FLOOR = 1e-13

# polynomial assembly degree: 2(k+2) with a floor of 8 so that smooth
# (trigonometric) data is integrated well below the consistency
# tolerances; enriched terms start higher and are refined by doubling
# until the Gram stabilises
_MIN_BASE_DEGREE = 8
_ENRICHED_EXTRA_DEGREE = 4
_CALIBRATION_TOL = 1e-13
_MAX_CALIBRATION_DOUBLINGS = 6


class SpaceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnrichmentConfig:
    """Cutoff-driven enrichment: an element is enriched with a cylinder's
    flow when its centroid lies within ``gamma`` of the cylinder surface."""

    gamma: float
    cylinders: tuple[Circle, ...]
    speed: float = 1.0

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError("gamma must be nonnegative")
        object.__setattr__(self, "cylinders", tuple(self.cylinders))

    def flows(self) -> list[CylinderFlow]:
        return [CylinderFlow(c, speed=self.speed) for c in self.cylinders]

    def active_indices(self, element: Element) -> list[int]:
        if self.gamma <= 0.0:
            return []
        out = []
        for i, c in enumerate(self.cylinders):
            dist = np.hypot(*(element.centroid - c.center)) - c.radius
            if dist <= self.gamma:
                out.append(i)
        return out


@dataclass
class FunctionSpace:
    """Orthonormal basis spanned by linear combinations of ``fields``.

    ``own_values`` are the basis values at the space's own rule nodes,
    orthonormal to machine precision there; evaluation at those nodes
    short-circuits to them so that ill-conditioned spanning sets do not
    contaminate the operator assembly.
    """

    domain: object
    fields: list
    coeff: np.ndarray  # (dim, n_span)
    rule: QuadratureRule
    kept: list[int]
    pruned: list[int]
    gram_cond: float
    rank: str
    own_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.coeff.shape[0]

    @property
    def basis(self) -> list[CombinedField]:
        return [CombinedField(self.fields, row) for row in self.coeff]

    def _stack(self, attr, points):
        return np.stack([getattr(f, attr)(points) for f in self.fields])

    def eval_value(self, points) -> np.ndarray:
        if points is self.rule.points:
            return self.own_values
        return np.tensordot(self.coeff, self._stack("value", points), axes=(1, 0))

    def eval_gradient(self, points) -> np.ndarray:
        return np.tensordot(self.coeff, self._stack("gradient", points), axes=(1, 0))

    def eval_laplacian(self, points) -> np.ndarray:
        return np.tensordot(self.coeff, self._stack("laplacian", points), axes=(1, 0))

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of the L2 projection from nodal values on the
        space's own rule."""
        B = self.own_values
        if self.rank == "vector":
            return np.einsum("mqc,qc,q->m", B, values, self.rule.weights)
        return np.einsum("mq,q,q->m", B, values, self.rule.weights)


def _dot(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Quadrature inner product of stacked nodal values."""
    if a.ndim == 3:  # (n, q, 2)
        return np.einsum("aqc,bqc,q->ab", a, b, weights)
    return np.einsum("aq,bq,q->ab", a, b, weights)


def _orthonormal_coeff(values: np.ndarray, weights: np.ndarray, rel_tol: float):
    """Greedy in-order modified Gram-Schmidt in value space, with
    reorthogonalisation.  Returns (coeff, basis_values, kept, pruned, cond).

    Working on nodal values keeps the produced basis orthonormal to
    machine precision in the rule's inner product even when the spanning
    set is numerically rank deficient (short arcs, distant enrichment
    traces), which the downstream operator algebra relies on.
    """
    n = len(values)
    norms2 = _dot(values, values, weights).diagonal().copy()
    scale2 = norms2.max()
    if not scale2 > 0.0:
        raise SpaceError("all spanning functions vanish on the domain")
    keep_tol2 = max(rel_tol * rel_tol, _RESIDUAL2_FLOOR)

    kept: list[int] = []
    pruned: list[int] = []
    Q = np.zeros((0,) + values.shape[1:])
    C = np.zeros((0, n))
    for j in range(n):
        if norms2[j] <= rel_tol * rel_tol * scale2:
            pruned.append(j)
            continue
        nj = np.sqrt(norms2[j])
        v = values[j] / nj
        c = np.zeros(n)
        c[j] = 1.0 / nj
        for _ in range(2):  # twice-is-enough reorthogonalisation
            h = _dot(Q, v[None], weights).ravel() if len(kept) else np.zeros(0)
            v = v - np.tensordot(h, Q, axes=(0, 0))
            c = c - h @ C
        r2 = float(_dot(v[None], v[None], weights)[0, 0])
        if r2 <= keep_tol2:
            pruned.append(j)
            continue
        r = np.sqrt(r2)
        Q = np.concatenate([Q, (v / r)[None]])
        C = np.concatenate([C, (c / r)[None]])
        kept.append(j)
    if not kept:
        raise SpaceError("pruning removed every spanning function")
    cond = float(np.linalg.norm(C, 2) ** 2 * scale2)
    return C, Q, kept, pruned, cond


def _orthonormal_space(domain, fields, rule, rank, rel_tol=PRUNE_REL_TOL) -> FunctionSpace:
    values = np.stack([f.value(rule.points) for f in fields])
    coeff, basis_vals, kept, pruned, cond = _orthonormal_coeff(values, rule.weights, rel_tol)
    return FunctionSpace(
        domain, list(fields), coeff, rule, kept, pruned, cond, rank, basis_vals
    )


def prune_dependent(fields, domain, rule=None, *, rel_tol=PRUNE_REL_TOL, degree=None) -> FunctionSpace:
    """Prune a spanning list to an independent, orthonormalised basis."""
    if not fields:
        raise SpaceError("empty spanning set")
    if rule is None:
        if degree is None:
            degree = 8
        rule = _default_rule(domain, degree)
    rank = fields[0].rank
    if any(f.rank != rank for f in fields):
        raise SpaceError("mixed scalar/vector spanning set")
    return _orthonormal_space(domain, fields, rule, rank, rel_tol)


def _default_rule(domain, degree):
    if isinstance(domain, (Segment, Arc)) or isinstance(getattr(domain, "geom", None), (Segment, Arc)):
        return face_rule(domain, degree)
    return element_rule(domain, degree)


# ---------------------------------------------------------------------------
# polynomial bases


def element_poly_basis(element: Element, degree: int, rank: str = "scalar", rule=None) -> FunctionSpace:
    """L2-orthonormalised polynomial basis on an element."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    center = element.centroid
    scale = 0.5 * element.diameter
    if rank == "scalar":
        fields = scalar_monomials(center, scale, degree)
    elif rank == "vector":
        fields = vector_monomials(center, scale, degree)
    else:
        raise ValueError("rank must be 'scalar' or 'vector'")
    if rule is None:
        rule = element_rule(element, 2 * degree + 2)
    return _orthonormal_space(element, fields, rule, rank)


def _segment_poly_fields(seg: Segment, k: int):
    out = []
    for p in range(k + 1):
        m = FaceMonomial(seg, p)
        out.append(FaceVectorMonomial(m, 0))
        out.append(FaceVectorMonomial(m, 1))
    return out


def _arc_poly_fields(arc: Arc, k: int):
    # constants plus all tensor monomials of total degree <= k applied to
    # the face normal
    mid = arc.midpoint
    scale = max(0.5 * arc.diameter, 0.25 * arc.circle.radius)
    consts = scalar_monomials(mid, scale, 0)
    out = [FaceVectorMonomial(consts[0], 0), FaceVectorMonomial(consts[0], 1)]
    for m in scalar_monomials(mid, scale, k):
        for i in (0, 1):
            for j in (0, 1):
                out.append(NormalMonomial(arc, m, i, j))
    return out


def curved_face_basis(face, k: int, rule=None, extra_fields=()) -> FunctionSpace:
    """Velocity polynomial space on a face.

    Straight faces carry componentwise polynomials of degree <= k (the
    planar reduction); arcs carry the constant fields plus tensor-valued
    monomials applied to the face normal, pruned to an independent set.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    geom = getattr(face, "geom", face)
    if isinstance(geom, Segment):
        fields = _segment_poly_fields(geom, k)
    else:
        fields = _arc_poly_fields(geom, k)
    fields = fields + list(extra_fields)
    if rule is None:
        rule = face_rule(geom, 2 * (k + 2))
    return _orthonormal_space(face, fields, rule, "vector")


# ---------------------------------------------------------------------------
# enrichment


def enrichment_sets(element: Element, config: EnrichmentConfig | None):
    """Velocity and pressure enrichment fields active on an element."""
    if config is None:
        return [], []
    psi, phi = [], []
    for i in config.active_indices(element):
        flow = CylinderFlow(config.cylinders[i], speed=config.speed)
        psi.append(CylinderVelocityField(flow))
        phi.append(CylinderPressureField(flow))
    return psi, phi


# ---------------------------------------------------------------------------
# the full local space collection


@dataclass
class LocalSpaces:
    element: Element
    k: int
    recon: FunctionSpace  # velocity reconstruction space P^{k+1} + enrichment
    cell: FunctionSpace  # element unknowns P^k + Laplacians/pressure gradients
    pressure: FunctionSpace  # P^k + pressure enrichment
    faces: list[FunctionSpace]  # aligned with element.faces
    rule: QuadratureRule  # element rule shared by all element-side integrals
    enriched: bool


class SpaceFactory:
    """Builds and caches the element and (shared) face spaces of a mesh.

    Element rules are calibrated by doubling the quadrature degree until
    the spanning Gram matrices stabilise, then adopting one further
    doubling; faces are handled the same way.  Purely polynomial elements
    skip calibration since their rules are exact by construction.

    Per-element construction is pure and order-independent; the produced
    spaces are immutable, so elements may be built concurrently as long
    as each shared face space is created once.
    """

    def __init__(self, mesh: Mesh, k: int, config: EnrichmentConfig | None = None):
        if config is not None and tuple(config.cylinders) != tuple(mesh.cylinders):
            raise ValueError("enrichment cylinders must match the mesh cylinders")
        self.mesh = mesh
        self.k = k
        self.config = config
        self.base_degree = max(2 * (k + 2), _MIN_BASE_DEGREE)
        self._face_cache: dict[int, FunctionSpace] = {}
        self._local_cache: dict[int, LocalSpaces] = {}
        self._flows = config.flows() if config is not None else []
        self._active = {
            el.id: (config.active_indices(el) if config is not None else [])
            for el in mesh.elements
        }

    # -- faces --------------------------------------------------------------

    def _face_enrichment_fields(self, face: Face):
        out = []
        seen = set()
        for el_id, _orient in self.mesh.face_elements[face.id]:
            for ic in self._active[el_id]:
                if ic in seen:
                    continue
                seen.add(ic)
                flow = self._flows[ic]
                out.append(VelocityGradientNormalTrace(flow, face.geom))
                out.append(PressureNormalTrace(flow, face.geom))
        return out

    def face_space(self, face: Face) -> FunctionSpace:
        cached = self._face_cache.get(face.id)
        if cached is not None:
            return cached
        extra = self._face_enrichment_fields(face)
        if extra:
            base = self.base_degree + _ENRICHED_EXTRA_DEGREE

            def build(d):
                return curved_face_basis(face, self.k, rule=face_rule(face, d), extra_fields=extra)

            space = _calibrate(build, base, lambda sp: _gram_signature(sp))
        else:
            space = curved_face_basis(face, self.k, rule=face_rule(face, self.base_degree))
        self._face_cache[face.id] = space
        return space

    # -- elements -----------------------------------------------------------

    def _element_fields(self, element: Element):
        center = element.centroid
        scale = 0.5 * element.diameter
        psi = [self._flows[i] for i in self._active[element.id]]
        recon = vector_monomials(center, scale, self.k + 1) + [
            CylinderVelocityField(f) for f in psi
        ]
        # the velocity Laplacian and the pressure gradient coincide for the
        # cylinder pair; both are listed and pruning removes the duplicate
        cell = (
            vector_monomials(center, scale, self.k)
            + [PressureGradientField(f) for f in psi]
            + [PressureGradientField(f) for f in psi]
        )
        pressure = scalar_monomials(center, scale, self.k) + [
            CylinderPressureField(f) for f in psi
        ]
        return recon, cell, pressure

    def local_spaces(self, element: Element) -> LocalSpaces:
        cached = self._local_cache.get(element.id)
        if cached is not None:
            return cached
        recon_f, cell_f, press_f = self._element_fields(element)
        enriched = bool(self._active[element.id])

        def build(degree):
            rule = element_rule(element, degree)
            recon = _orthonormal_space(element, recon_f, rule, "vector")
            cell = _orthonormal_space(element, cell_f, rule, "vector")
            pressure = _orthonormal_space(element, press_f, rule, "scalar")
            return rule, recon, cell, pressure

        if enriched:
            base = self.base_degree + _ENRICHED_EXTRA_DEGREE
            rule, recon, cell, pressure = _calibrate(
                build,
                base,
                lambda t: np.concatenate(
                    [_gram_signature(t[1]), _gram_signature(t[2]), _gram_signature(t[3])]
                ),
            )
        else:
            rule, recon, cell, pressure = build(self.base_degree)
        faces = [self.face_space(use.face) for use in element.faces]
        out = LocalSpaces(element, self.k, recon, cell, pressure, faces, rule, enriched)
        self._local_cache[element.id] = out
        return out


def build_local_spaces(element: Element, mesh: Mesh, k: int, config: EnrichmentConfig | None = None) -> LocalSpaces:
    """One-off construction of all local spaces of a single element."""
    return SpaceFactory(mesh, k, config).local_spaces(element)


# ---------------------------------------------------------------------------
# calibration helpers


def _gram_signature(space: FunctionSpace) -> np.ndarray:
    values = np.stack([f.value(space.rule.points) for f in space.fields])
    return _dot(values, values, space.rule.weights).ravel()


def _calibrate(build, base_degree: int, signature):
    """Increase the quadrature degree until the signature stabilises, then
    adopt the refined result."""
    degree = base_degree
    result = build(degree)
    sig = signature(result)
    for _ in range(_MAX_CALIBRATION_DOUBLINGS):
        refined = build(2 * degree)
        rsig = signature(refined)
        scale = max(np.max(np.abs(rsig)), 1.0)
        if np.max(np.abs(rsig - sig)) <= _CALIBRATION_TOL * scale:
            return refined
        degree *= 2
        result, sig = refined, rsig
    raise SpaceError("quadrature calibration did not converge")
