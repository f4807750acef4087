"""Curved cut-cell meshes: uniform Cartesian grids over the unit square
with circular cylinders removed.

Cells fully inside a cylinder are deleted; cells crossed by a cylinder
boundary become curved elements whose boundary mixes straight segment
portions with circular-arc faces.  Arcs are split at every gridline
crossing (so each arc face is owned by one element) and bisected until
they subtend less than pi.

All cut geometry (gridline crossing points, arc subdivision angles) is
computed once per cylinder and shared, so neighbouring elements reference
bit-identical face geometry.  Degenerate configurations (tangency to a
gridline, a crossing collapsing onto a grid vertex, a cylinder contained
in a single cell) are rejected rather than perturbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GEOM_TOL, Arc, Circle, Segment
from .quadrature import region_rule

__all__ = [
    "Face",
    "FaceUse",
    "Element",
    "Mesh",
    "MeshBuildError",
    "MeshTopologyError",
    "MeshDiagnostics",
    "build_cartesian_cut_mesh",
    "validate_mesh",
    "dump_mesh",
]

INTERNAL = "internal"
SQUARE_BOUNDARY = "square_boundary"
CYLINDER_BOUNDARY = "cylinder_boundary"

# cut cells with a smaller fluid fraction signal an ill-posed cut
MIN_AREA_FRACTION = 1e-8


class MeshBuildError(ValueError):
    pass


class MeshTopologyError(RuntimeError):
    pass


@dataclass
class Face:
    id: int
    geom: Segment | Arc
    kind: str
    cylinder: int | None = None  # index into mesh.cylinders for arcs

    @property
    def length(self) -> float:
        return self.geom.length

    @property
    def diameter(self) -> float:
        return self.geom.diameter

    @property
    def is_boundary(self) -> bool:
        return self.kind != INTERNAL

    def normal(self, points=None):
        return self.geom.normal(points)


@dataclass
class FaceUse:
    face: Face
    orientation: int  # +1 if the element traverses the canonical direction

    def outward_normal(self, points):
        return self.orientation * self.face.geom.normal(points)


@dataclass
class Element:
    id: int
    faces: list[FaceUse]
    cell: tuple[int, int]
    area: float
    centroid: np.ndarray
    diameter: float
    area_fraction: float
    cut_by: tuple[int, ...] = ()


@dataclass
class MeshDiagnostics:
    area_fractions: np.ndarray
    chunkiness: np.ndarray
    min_chunkiness: float
    max_chunkiness: float
    area_defect: float  # |sum areas - exact fluid area| / exact
    face_use_balanced: bool


@dataclass
class Mesh:
    """Construction is single-threaded; the result is treated as
    immutable and is safe to share across threads for read-only queries."""

    n: int
    cylinders: list[Circle]
    elements: list[Element]
    faces: list[Face]
    face_elements: list[list[tuple[int, int]]]  # face id -> [(element id, orientation)]
    h: float = field(init=False)

    def __post_init__(self):
        self.h = max(e.diameter for e in self.elements)
        self._cell_index: dict[tuple[int, int], list[int]] | None = None

    @property
    def internal_faces(self) -> list[Face]:
        return [f for f in self.faces if f.kind == INTERNAL]

    def fluid_area_exact(self) -> float:
        return 1.0 - sum(math.pi * c.radius**2 for c in self.cylinders)

    def elements_by_cell(self) -> dict[tuple[int, int], list[int]]:
        if self._cell_index is None:
            out: dict[tuple[int, int], list[int]] = {}
            for el in self.elements:
                out.setdefault(el.cell, []).append(el.id)
            self._cell_index = out
        return self._cell_index

    def locate(self, point) -> int:
        """Element id containing the point, or -1 outside the fluid."""
        p = np.asarray(point, dtype=float)
        if not (0.0 <= p[0] <= 1.0 and 0.0 <= p[1] <= 1.0):
            return -1
        for c in self.cylinders:
            if c.contains(p):
                return -1
        i = min(int(p[0] * self.n), self.n - 1)
        j = min(int(p[1] * self.n), self.n - 1)
        cand = self.elements_by_cell().get((i, j), [])
        if len(cand) == 1:
            return cand[0]
        for eid in cand:
            if _winding_contains(self.elements[eid], p):
                return eid
        return -1


def _winding_contains(element: Element, p: np.ndarray) -> bool:
    """Winding-number membership supporting arc faces."""
    total = 0.0
    for use in element.faces:
        g = use.face.geom
        if isinstance(g, Segment):
            samples = np.array([0.0, 1.0])
        else:
            # subdivide so each angular increment stays below pi
            k = max(2, int(np.ceil(g.span / (0.25 * math.pi))) + 1)
            samples = np.linspace(0.0, 1.0, k)
        pts = g.point_at(samples)
        if use.orientation < 0:
            pts = pts[::-1]
        rel = pts - p
        ang = np.arctan2(rel[:, 1], rel[:, 0])
        d = np.diff(ang)
        d = (d + math.pi) % (2.0 * math.pi) - math.pi
        total += float(d.sum())
    return abs(total) > math.pi


# ---------------------------------------------------------------------------
# cut geometry shared between cells


@dataclass
class _Crossing:
    theta: float  # normalised to [0, 2 pi)
    point: tuple[float, float]
    axis: int  # 0: vertical gridline (x const), 1: horizontal
    line: int


class _CircleCuts:
    """All gridline crossings and arc subdivision angles of one circle."""

    def __init__(self, index: int, circle: Circle, n: int):
        self.index = index
        self.circle = circle
        self.crossings: list[_Crossing] = []
        self.by_line: dict[tuple[int, int], list[_Crossing]] = {}
        c = (circle.cx, circle.cy)
        for axis in (0, 1):
            for line in range(n + 1):
                coord = line / n
                d = coord - c[axis]
                if abs(abs(d) - circle.radius) <= GEOM_TOL:
                    raise MeshBuildError(
                        f"cylinder {index} tangent to gridline "
                        f"{'x' if axis == 0 else 'y'}={coord}"
                    )
                if abs(d) >= circle.radius:
                    continue
                half = math.sqrt(circle.radius**2 - d * d)
                for other in (c[1 - axis] - half, c[1 - axis] + half):
                    if abs(other * n - round(other * n)) <= GEOM_TOL * n:
                        raise MeshBuildError(
                            f"cylinder {index} boundary passes through a grid vertex"
                        )
                    pt = (coord, other) if axis == 0 else (other, coord)
                    theta = math.atan2(pt[1] - c[1], pt[0] - c[0]) % (2.0 * math.pi)
                    cr = _Crossing(theta, pt, axis, line)
                    self.crossings.append(cr)
                    self.by_line.setdefault((axis, line), []).append(cr)
        for lst in self.by_line.values():
            lst.sort(key=lambda cr: cr.point)
        self.crossings.sort(key=lambda cr: cr.theta)
        self.crossing_angles = {cr.theta for cr in self.crossings}
        self.crossing_by_angle = {cr.theta: cr for cr in self.crossings}
        # subdivision angles: crossings plus bisection points of wide gaps
        angles = sorted(self.crossing_angles)
        refined: list[float] = []
        m = len(angles)
        for k, a in enumerate(angles):
            refined.append(a)
            b = angles[(k + 1) % m] + (2.0 * math.pi if k + 1 == m else 0.0)
            if b - a >= math.pi - 1e-9:
                refined.append(0.5 * (a + b))
        self.angles = sorted(a % (2.0 * math.pi) for a in refined)

    def crossings_on_edge(self, axis: int, line: int, lo: float, hi: float):
        out = [
            cr
            for cr in self.by_line.get((axis, line), [])
            if lo < cr.point[1 - axis] < hi
        ]
        return out


# ---------------------------------------------------------------------------
# build


def build_cartesian_cut_mesh(n: int, cylinders: list[Circle] | None = None) -> Mesh:
    """Cut the given cylinders out of an n-by-n grid over (0, 1)^2."""
    if n < 2:
        raise MeshBuildError("need at least 2 subdivisions per side")
    cylinders = list(cylinders or [])
    for i, c in enumerate(cylinders):
        margin = min(c.cx, c.cy, 1.0 - c.cx, 1.0 - c.cy) - c.radius
        if margin <= GEOM_TOL:
            raise MeshBuildError(f"cylinder {i} touches the square boundary")
    for i in range(len(cylinders)):
        for j in range(i + 1, len(cylinders)):
            a, b = cylinders[i], cylinders[j]
            gap = math.hypot(a.cx - b.cx, a.cy - b.cy) - a.radius - b.radius
            if gap <= GEOM_TOL:
                raise MeshBuildError(f"cylinders {i} and {j} intersect or touch")

    cuts = [_CircleCuts(i, c, n) for i, c in enumerate(cylinders)]
    builder = _MeshBuilder(n, cylinders, cuts)
    return builder.build()


class _MeshBuilder:
    def __init__(self, n, cylinders, cuts):
        self.n = n
        self.cylinders = cylinders
        self.cuts = cuts
        self.faces: list[Face] = []
        self.face_keys: dict = {}
        self.elements: list[Element] = []

    # -- face registry ----------------------------------------------------

    def _grid(self, k: int) -> float:
        return k / self.n

    def _segment_face(self, p, q) -> tuple[Face, int]:
        """Register/fetch the gridline segment through p-q (traversal p->q)."""
        if abs(p[0] - q[0]) <= 0.0:  # vertical line, canonical direction +y
            lo, hi = (p, q) if p[1] < q[1] else (q, p)
            orient = 1 if p[1] < q[1] else -1
            on_square = p[0] in (0.0, 1.0)
        else:
            lo, hi = (p, q) if p[0] < q[0] else (q, p)
            orient = 1 if p[0] < q[0] else -1
            on_square = p[1] in (0.0, 1.0)
        key = ("s", lo, hi)
        face = self.face_keys.get(key)
        if face is None:
            geom = Segment(lo[0], lo[1], hi[0], hi[1])
            kind = SQUARE_BOUNDARY if on_square else INTERNAL
            face = Face(len(self.faces), geom, kind)
            self.faces.append(face)
            self.face_keys[key] = face
        return face, orient

    def _arc_face(self, cyl_index: int, th0: float, th1: float) -> Face:
        key = ("a", cyl_index, th0, th1)
        face = self.face_keys.get(key)
        if face is None:
            geom = Arc(self.cylinders[cyl_index], th0, th1)
            face = Face(len(self.faces), geom, CYLINDER_BOUNDARY, cylinder=cyl_index)
            self.faces.append(face)
            self.face_keys[key] = face
        return face

    # -- cell classification ----------------------------------------------

    def _classify(self):
        n = self.n
        status = {}  # (i, j) -> ("plain",) | ("deleted",) | ("cut", cut_obj)
        for i in range(n):
            for j in range(n):
                x0, x1 = self._grid(i), self._grid(i + 1)
                y0, y1 = self._grid(j), self._grid(j + 1)
                cutters = []
                deleted = False
                for cut in self.cuts:
                    edges = (
                        cut.crossings_on_edge(0, i, y0, y1)
                        or cut.crossings_on_edge(0, i + 1, y0, y1)
                        or cut.crossings_on_edge(1, j, x0, x1)
                        or cut.crossings_on_edge(1, j + 1, x0, x1)
                    )
                    if edges:
                        cutters.append(cut)
                        continue
                    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
                    inside = cut.circle.contains(corners)
                    if inside.all():
                        deleted = True
                        break
                    if inside.any():
                        raise MeshTopologyError(
                            "inconsistent cut classification (corners inside "
                            "without boundary crossings)"
                        )
                    if x0 < cut.circle.cx < x1 and y0 < cut.circle.cy < y1:
                        raise MeshBuildError(
                            f"element not simply connected: cylinder {cut.index} "
                            f"lies strictly inside cell {(i, j)}"
                        )
                if deleted:
                    status[i, j] = ("deleted",)
                elif not cutters:
                    status[i, j] = ("plain",)
                elif len(cutters) > 1:
                    raise MeshBuildError(
                        f"cell {(i, j)} is cut by {len(cutters)} cylinders; "
                        "only one cutting cylinder per cell is supported"
                    )
                else:
                    status[i, j] = ("cut", cutters[0])
        return status

    # -- plain cells --------------------------------------------------------

    def _add_plain_cell(self, i: int, j: int):
        x0, x1 = self._grid(i), self._grid(i + 1)
        y0, y1 = self._grid(j), self._grid(j + 1)
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        uses = []
        for k in range(4):
            face, orient = self._segment_face(corners[k], corners[(k + 1) % 4])
            uses.append(FaceUse(face, orient))
        side = x1 - x0
        self.elements.append(
            Element(
                id=len(self.elements),
                faces=uses,
                cell=(i, j),
                area=side * side,
                centroid=np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)]),
                diameter=side * math.sqrt(2.0),
                area_fraction=1.0,
            )
        )

    # -- cut cells ----------------------------------------------------------

    def _add_cut_cell(self, i: int, j: int, cut: _CircleCuts):
        n = self.n
        x0, x1 = self._grid(i), self._grid(i + 1)
        y0, y1 = self._grid(j), self._grid(j + 1)
        circle = cut.circle

        # ordered boundary subsegments (split at crossings), CCW traversal
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        edge_lines = [(1, j), (0, i + 1), (1, j + 1), (0, i)]
        subs = []  # (p, q, outside)
        for e in range(4):
            p, q = corners[e], corners[(e + 1) % 4]
            axis, line = edge_lines[e]
            lo, hi = (x0, x1) if axis == 1 else (y0, y1)
            crs = cut.crossings_on_edge(axis, line, lo, hi)
            pts = sorted(
                (cr.point for cr in crs),
                key=lambda pt: pt[1 - axis],
                reverse=p[1 - axis] > q[1 - axis],
            )
            chain = [p, *pts, q]
            for a, b in zip(chain[:-1], chain[1:]):
                mid = (0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))
                outside = not circle.contains(np.array(mid))
                subs.append((a, b, outside))

        start_of = {sub[0]: k for k, sub in enumerate(subs)}
        crossing_at = {cr.point: cr for cr in cut.crossings}
        angles = cut.angles
        m = len(angles)
        index_of_angle = {a: k for k, a in enumerate(angles)}

        consumed = [False] * len(subs)
        loops = []
        for start in range(len(subs)):
            if consumed[start] or not subs[start][2]:
                continue
            loop: list[FaceUse] = []
            k = start
            while True:
                p, q, outside = subs[k]
                if consumed[k]:
                    raise MeshTopologyError(f"marching revisited a subsegment in cell {(i, j)}")
                consumed[k] = True
                if not outside:
                    raise MeshTopologyError(f"marching entered the cylinder in cell {(i, j)}")
                face, orient = self._segment_face(p, q)
                loop.append(FaceUse(face, orient))
                nxt = start_of.get(q, None)
                if nxt is not None and subs[nxt][2]:
                    k = nxt  # q is a corner or a crossing where we stay outside
                else:
                    # q is an entry crossing; walk the circle clockwise
                    cr = crossing_at.get(q)
                    if cr is None:
                        raise MeshTopologyError(f"lost boundary traversal in cell {(i, j)}")
                    cur = index_of_angle[cr.theta]
                    while True:
                        prev = (cur - 1) % m
                        th0, th1 = angles[prev], angles[cur]
                        if prev == m - 1:  # wrapped below angle zero
                            th1 += 2.0 * math.pi
                        mid = circle.point_at(0.5 * (th0 + th1))
                        if not (x0 < mid[0] < x1 and y0 < mid[1] < y1):
                            raise MeshTopologyError(
                                f"arc walk left cell {(i, j)}; inconsistent cut geometry"
                            )
                        loop.append(FaceUse(self._arc_face(cut.index, th0, th1), -1))
                        cur = prev
                        exit_cr = cut.crossing_by_angle.get(angles[cur])
                        if exit_cr is not None:
                            break
                    nxt = start_of.get(exit_cr.point)
                    if nxt is None or not subs[nxt][2]:
                        raise MeshTopologyError(
                            f"arc walk exited at a point off the boundary of cell {(i, j)}"
                        )
                    k = nxt
                if k == start:
                    break
            loops.append(loop)

        for loop in loops:
            self._finish_cut_element(i, j, cut, loop)

    def _finish_cut_element(self, i: int, j: int, cut: _CircleCuts, loop):
        pieces = [(use.face.geom, use.orientation) for use in loop]
        # provisional apex: mean of straight endpoints and arc endpoints
        pts = []
        for geom, orient in pieces:
            if isinstance(geom, Segment):
                pts.extend([geom.a, geom.b])
            else:
                pts.extend([geom.point_at(0.0), geom.point_at(1.0)])
        apex = np.mean(np.asarray(pts), axis=0)
        rule = region_rule(apex, pieces, degree=2)
        area = rule.measure
        cell_area = 1.0 / (self.n * self.n)
        if area <= 0.0:
            raise MeshTopologyError(f"non-positive fluid area in cell {(i, j)}")
        if area / cell_area < MIN_AREA_FRACTION:
            raise MeshBuildError(
                f"cut cell {(i, j)} keeps an area fraction below {MIN_AREA_FRACTION}"
            )
        centroid = np.array(
            [
                float(rule.points[:, 0] @ rule.weights) / area,
                float(rule.points[:, 1] @ rule.weights) / area,
            ]
        )
        # diameter: boundary vertices plus axis-extremal arc points
        diam_pts = list(pts)
        for geom, _ in pieces:
            if isinstance(geom, Arc):
                k0 = math.ceil(geom.theta0 / (0.5 * math.pi))
                th = 0.5 * math.pi * k0
                while th <= geom.theta1:
                    diam_pts.append(geom.circle.point_at(th))
                    th += 0.5 * math.pi
        P = np.asarray(diam_pts)
        d2 = np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=-1)
        self.elements.append(
            Element(
                id=len(self.elements),
                faces=loop,
                cell=(i, j),
                area=area,
                centroid=centroid,
                diameter=float(math.sqrt(d2.max())),
                area_fraction=area / cell_area,
                cut_by=(cut.index,),
            )
        )

    # -- assembly of the Mesh ------------------------------------------------

    def build(self) -> Mesh:
        status = self._classify()
        for j in range(self.n):
            for i in range(self.n):
                st = status[i, j]
                if st[0] == "plain":
                    self._add_plain_cell(i, j)
                elif st[0] == "cut":
                    self._add_cut_cell(i, j, st[1])
        if not self.elements:
            raise MeshBuildError("mesh has no fluid elements")

        face_elements = [[] for _ in self.faces]
        for el in self.elements:
            for use in el.faces:
                face_elements[use.face.id].append((el.id, use.orientation))
        for f in self.faces:
            uses = face_elements[f.id]
            if f.kind == INTERNAL:
                if len(uses) != 2 or uses[0][1] + uses[1][1] != 0:
                    raise MeshTopologyError(
                        f"internal face {f.id} has inconsistent element uses {uses}"
                    )
            else:
                if len(uses) != 1:
                    raise MeshTopologyError(
                        f"boundary face {f.id} is used by {len(uses)} elements"
                    )

        mesh = Mesh(self.n, self.cylinders, self.elements, self.faces, face_elements)
        exact = mesh.fluid_area_exact()
        total = sum(e.area for e in self.elements)
        if abs(total - exact) > 1e-12 * exact:
            raise MeshTopologyError(
                f"fluid area defect {abs(total - exact):.3e} exceeds tolerance"
            )
        return mesh


# ---------------------------------------------------------------------------
# validation and export


def _distance_to_face(point: np.ndarray, geom) -> float:
    if isinstance(geom, Segment):
        a, b = geom.a, geom.b
        t = np.clip(np.dot(point - a, b - a) / np.dot(b - a, b - a), 0.0, 1.0)
        return float(np.hypot(*(point - (a + t * (b - a)))))
    th = math.atan2(point[1] - geom.circle.cy, point[0] - geom.circle.cx)
    # lift into the arc's angular range if possible
    for shift in (-2.0 * math.pi, 0.0, 2.0 * math.pi):
        if geom.theta0 <= th + shift <= geom.theta1:
            d = math.hypot(point[0] - geom.circle.cx, point[1] - geom.circle.cy)
            return abs(d - geom.circle.radius)
    ends = [geom.point_at(0.0), geom.point_at(1.0)]
    return min(float(np.hypot(*(point - e))) for e in ends)


def validate_mesh(mesh: Mesh) -> MeshDiagnostics:
    """Topological checks (hard failures) plus shape-quality diagnostics."""
    uses = [[] for _ in mesh.faces]
    for el in mesh.elements:
        for use in el.faces:
            uses[use.face.id].append((el.id, use.orientation))
    for f in mesh.faces:
        u = uses[f.id]
        if not u:
            raise MeshTopologyError(f"dangling face {f.id}")
        if f.kind == INTERNAL:
            if len(u) != 2:
                raise MeshTopologyError(f"internal face {f.id} used {len(u)} times")
            if u[0][1] + u[1][1] != 0:
                raise MeshTopologyError(f"inconsistent orientation on face {f.id}")
        elif len(u) != 1:
            raise MeshTopologyError(f"boundary face {f.id} used {len(u)} times")

    # closed loops: traversal endpoints must chain up
    for el in mesh.elements:
        pts = []
        for use in el.faces:
            g = use.face.geom
            a, b = (g.point_at(0.0), g.point_at(1.0))
            if use.orientation < 0:
                a, b = b, a
            pts.append((a, b))
        for (pa, pb), (qa, qb) in zip(pts, pts[1:] + pts[:1]):
            if np.hypot(*(pb - qa)) > 1e-9:
                raise MeshTopologyError(f"element {el.id} boundary loop is not closed")

    fractions = np.array([el.area_fraction for el in mesh.elements])
    chunk = np.array(
        [
            min(_distance_to_face(el.centroid, use.face.geom) for use in el.faces)
            / el.diameter
            for el in mesh.elements
        ]
    )
    exact = mesh.fluid_area_exact()
    defect = abs(sum(e.area for e in mesh.elements) - exact) / exact
    return MeshDiagnostics(
        area_fractions=fractions,
        chunkiness=chunk,
        min_chunkiness=float(chunk.min()),
        max_chunkiness=float(chunk.max()),
        area_defect=defect,
        face_use_balanced=True,
    )


def dump_mesh(mesh: Mesh, path) -> None:
    """Plain-text mesh dump, header line ``hho-mesh v1``.

    Sections: cylinders (cx cy R), faces (S ax ay bx by kind | A cyl th0
    th1 kind), elements (face:orient pairs).
    """
    lines = ["hho-mesh v1", f"n {mesh.n}", f"cylinders {len(mesh.cylinders)}"]
    for c in mesh.cylinders:
        lines.append(f"{c.cx:.17g} {c.cy:.17g} {c.radius:.17g}")
    lines.append(f"faces {len(mesh.faces)}")
    for f in mesh.faces:
        g = f.geom
        if isinstance(g, Segment):
            lines.append(f"S {g.ax:.17g} {g.ay:.17g} {g.bx:.17g} {g.by:.17g} {f.kind}")
        else:
            lines.append(f"A {f.cylinder} {g.theta0:.17g} {g.theta1:.17g} {f.kind}")
    lines.append(f"elements {len(mesh.elements)}")
    for el in mesh.elements:
        lines.append(" ".join(f"{u.face.id}:{u.orientation:+d}" for u in el.faces))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
