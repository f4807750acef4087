"""Numerical integration on segment faces, arc faces and arc-bounded
elements.

Element rules fan the element from its centroid: one signed affine
triangle per straight face and one signed curved cone per arc face, the
latter integrated in (angle, radial) coordinates with the exact Jacobian.
Signed Jacobians make the decomposition valid for non-convex elements.

Degrees are polynomial target degrees.  Straight pieces are exact for
polynomials up to the target degree; arc pieces are exact for integrands
polynomial in the angle up to the Gauss order used and spectrally
accurate otherwise.  ``adaptive_integrate`` doubles the degree until two
successive values agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Arc, Segment

__all__ = [
    "QuadratureRule",
    "QuadratureError",
    "face_rule",
    "element_rule",
    "region_rule",
    "adaptive_integrate",
    "integrate",
]


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes in world coordinates with (possibly signed) weights."""

    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)
    target_degree: int

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Contract an array of nodal values over the node axis."""
        return np.tensordot(np.asarray(values), self.weights, axes=(axis, 0))


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _npts_poly(degree: int) -> int:
    # n-point Gauss is exact through degree 2n - 1
    return max(1, degree // 2 + 1)


def _npts_arc(degree: int) -> int:
    # trigonometric integrands: generous fixed floor plus growth with degree
    return max(16, degree + 6)


def segment_rule(seg: Segment, degree: int) -> QuadratureRule:
    t, w = gauss_legendre(_npts_poly(degree))
    return QuadratureRule(seg.point_at(t), w * seg.length, degree)


def arc_rule(arc: Arc, degree: int) -> QuadratureRule:
    t, w = gauss_legendre(_npts_arc(degree))
    return QuadratureRule(arc.point_at(t), w * arc.length, degree)


def face_rule(face, degree: int) -> QuadratureRule:
    """Rule on a face geometry (Segment or Arc) or mesh face wrapper."""
    geom = getattr(face, "geom", face)
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    if isinstance(geom, Segment):
        return segment_rule(geom, degree)
    if isinstance(geom, Arc):
        return arc_rule(geom, degree)
    raise TypeError(f"not a face geometry: {type(geom)!r}")


def _triangle_rule(p0, p1, p2, degree: int):
    """Signed Duffy-type rule on the triangle (p0, p1, p2)."""
    n = _npts_poly(degree + 1)
    u, wu = gauss_legendre(n)
    v, wv = gauss_legendre(_npts_poly(degree))
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv)
    e1 = np.asarray(p1) - np.asarray(p0)
    e2 = np.asarray(p2) - np.asarray(p1)
    pts = np.asarray(p0) + uu[..., None] * (e1 + vv[..., None] * e2)
    det = e1[0] * (np.asarray(p2) - np.asarray(p0))[1] - e1[1] * (np.asarray(p2) - np.asarray(p0))[0]
    wts = ww * uu * det
    return pts.reshape(-1, 2), wts.ravel()


def _cone_arc_rule(apex, arc: Arc, degree: int, sense: int):
    """Signed rule on the cone from ``apex`` to the arc.

    Points x(s, t) = apex + s (A(t) - apex) with A the arc point at angle
    t; the Jacobian s * cross(A - apex, A') is exact.  ``sense`` is +1
    when the arc is traversed in canonical (increasing-angle) direction.
    """
    apex = np.asarray(apex, dtype=float)
    ns = _npts_poly(degree + 1)
    s, ws = gauss_legendre(ns)
    t, wt = gauss_legendre(_npts_arc(degree))
    th = arc.theta0 + t * arc.span
    A = arc.circle.point_at(th)  # (nt, 2)
    R = arc.circle.radius
    dA = np.stack([-R * np.sin(th), R * np.cos(th)], axis=-1) * arc.span
    rel = A - apex
    cross = rel[:, 0] * dA[:, 1] - rel[:, 1] * dA[:, 0]  # (nt,)
    pts = apex + s[:, None, None] * rel[None, :, :]  # (ns, nt, 2)
    wts = (ws[:, None] * s[:, None]) * (wt[None, :] * cross[None, :]) * sense
    return pts.reshape(-1, 2), wts.ravel()


def region_rule(apex, pieces, degree: int) -> QuadratureRule:
    """Fan rule over a region bounded by ordered, oriented pieces.

    ``pieces`` is an iterable of (geom, orientation) traversing the region
    boundary counterclockwise; orientation is +1 when the traversal
    matches the geometry's canonical direction.
    """
    all_pts, all_wts = [], []
    for geom, orient in pieces:
        if isinstance(geom, Segment):
            a, b = (geom.a, geom.b) if orient > 0 else (geom.b, geom.a)
            pts, wts = _triangle_rule(apex, a, b, degree)
        elif isinstance(geom, Arc):
            pts, wts = _cone_arc_rule(apex, geom, degree, orient)
        else:
            raise TypeError(f"not a face geometry: {type(geom)!r}")
        all_pts.append(pts)
        all_wts.append(wts)
    return QuadratureRule(np.concatenate(all_pts), np.concatenate(all_wts), degree)


def element_rule(element, degree: int) -> QuadratureRule:
    """Rule over a mesh element (anything with .centroid and oriented .faces)."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    pieces = [(use.face.geom, use.orientation) for use in element.faces]
    return region_rule(element.centroid, pieces, degree)


def _rule_for(domain, degree: int) -> QuadratureRule:
    if isinstance(domain, (Segment, Arc)):
        return face_rule(domain, degree)
    if hasattr(domain, "geom"):
        return face_rule(domain.geom, degree)
    return element_rule(domain, degree)


def integrate(domain, integrand, degree: int) -> float:
    rule = _rule_for(domain, degree)
    return float(np.asarray(integrand(rule.points)) @ rule.weights)


def adaptive_integrate(
    domain,
    integrand,
    base_degree: int,
    *,
    rel_tol: float = 1e-11,
    abs_tol: float = 1e-13,
    max_doublings: int = 6,
) -> float:
    """Integrate, doubling the rule degree until two successive values
    agree to ``rel_tol`` relative (or ``abs_tol`` absolute for values
    below 1e-2)."""
    degree = max(1, base_degree)
    prev = integrate(domain, integrand, degree)
    for _ in range(max_doublings):
        degree *= 2
        cur = integrate(domain, integrand, degree)
        err = abs(cur - prev)
        if err < rel_tol * abs(cur) or (abs(cur) < 1e-2 and err < abs_tol):
            return cur
        prev = cur
    raise QuadratureError("quadrature not converged")
