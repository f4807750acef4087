"""Callable fields: scaled monomials, cylinder-flow enrichment wrappers,
normal-weighted face spanning functions, and linear combinations.

Element-space fields provide values plus the derivatives the operators
need (gradients for pressure and reconstruction candidates, Laplacians
for reconstruction candidates).  Face-space fields only ever need values.
"""

from __future__ import annotations

import numpy as np

from .analytic import CylinderFlow
from .geometry import Arc, Segment

__all__ = [
    "ScalarMonomial",
    "VectorMonomial",
    "FaceMonomial",
    "FaceVectorMonomial",
    "NormalMonomial",
    "CylinderVelocityField",
    "CylinderPressureField",
    "PressureGradientField",
    "VelocityGradientNormalTrace",
    "PressureNormalTrace",
    "CombinedField",
    "scalar_monomials",
    "vector_monomials",
]


class ScalarMonomial:
    """((x - cx)/s)^px ((y - cy)/s)^py, centred and scaled for conditioning."""

    rank = "scalar"
    kind = "monomial"

    def __init__(self, center, scale: float, px: int, py: int):
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.px = px
        self.py = py

    def _uv(self, points):
        pts = np.asarray(points, dtype=float)
        return (pts[..., 0] - self.center[0]) / self.scale, (
            pts[..., 1] - self.center[1]
        ) / self.scale

    def value(self, points):
        u, v = self._uv(points)
        return u**self.px * v**self.py

    def gradient(self, points):
        u, v = self._uv(points)
        out = np.zeros(u.shape + (2,))
        if self.px > 0:
            out[..., 0] = self.px * u ** (self.px - 1) * v**self.py / self.scale
        if self.py > 0:
            out[..., 1] = self.py * u**self.px * v ** (self.py - 1) / self.scale
        return out

    def laplacian(self, points):
        u, v = self._uv(points)
        out = np.zeros(u.shape)
        s2 = self.scale * self.scale
        if self.px > 1:
            out += self.px * (self.px - 1) * u ** (self.px - 2) * v**self.py / s2
        if self.py > 1:
            out += self.py * (self.py - 1) * u**self.px * v ** (self.py - 2) / s2
        return out


class VectorMonomial:
    """A scalar monomial times a coordinate unit vector."""

    rank = "vector"
    kind = "monomial"

    def __init__(self, scalar: ScalarMonomial, component: int):
        self.scalar = scalar
        self.component = component

    def value(self, points):
        s = self.scalar.value(points)
        out = np.zeros(s.shape + (2,))
        out[..., self.component] = s
        return out

    def gradient(self, points):
        g = self.scalar.gradient(points)
        out = np.zeros(g.shape[:-1] + (2, 2))
        out[..., self.component, :] = g
        return out

    def laplacian(self, points):
        s = self.scalar.laplacian(points)
        out = np.zeros(s.shape + (2,))
        out[..., self.component] = s
        return out


def scalar_monomials(center, scale: float, degree: int) -> list[ScalarMonomial]:
    """Total-degree monomial basis, constant first, graded order."""
    out = []
    for d in range(degree + 1):
        for px in range(d, -1, -1):
            out.append(ScalarMonomial(center, scale, px, d - px))
    return out


def vector_monomials(center, scale: float, degree: int) -> list[VectorMonomial]:
    out = []
    for m in scalar_monomials(center, scale, degree):
        out.append(VectorMonomial(m, 0))
        out.append(VectorMonomial(m, 1))
    return out


class FaceMonomial:
    """Monomial in the arclength parameter of a straight face."""

    rank = "scalar"
    kind = "monomial"

    def __init__(self, seg: Segment, power: int):
        self.mid = seg.midpoint
        t = seg.b - seg.a
        self.dir = t / np.hypot(*t)
        self.scale = 0.5 * seg.length
        self.power = power

    def value(self, points):
        pts = np.asarray(points, dtype=float)
        t = ((pts[..., 0] - self.mid[0]) * self.dir[0] + (pts[..., 1] - self.mid[1]) * self.dir[1]) / self.scale
        return t**self.power


class FaceVectorMonomial:
    rank = "vector"
    kind = "monomial"

    def __init__(self, scalar, component: int):
        self.scalar = scalar
        self.component = component

    def value(self, points):
        s = self.scalar.value(points)
        out = np.zeros(s.shape + (2,))
        out[..., self.component] = s
        return out


class NormalMonomial:
    """m(x) * n_j(x) * e_i on a curved face: one tensor monomial applied
    to the face normal."""

    rank = "vector"
    kind = "monomial"

    def __init__(self, geom: Arc, scalar: ScalarMonomial, i: int, j: int):
        self.geom = geom
        self.scalar = scalar
        self.i = i
        self.j = j

    def value(self, points):
        s = self.scalar.value(points)
        n = self.geom.normal(points)
        out = np.zeros(s.shape + (2,))
        out[..., self.i] = s * n[..., self.j]
        return out


class CylinderVelocityField:
    rank = "vector"
    kind = "enrichment:velocity"

    def __init__(self, flow: CylinderFlow):
        self.flow = flow

    def value(self, points):
        return self.flow.velocity(points, fluid_only=False)

    def gradient(self, points):
        return self.flow.velocity_gradient(points, fluid_only=False)

    def laplacian(self, points):
        return self.flow.velocity_laplacian(points, fluid_only=False)


class CylinderPressureField:
    rank = "scalar"
    kind = "enrichment:pressure"

    def __init__(self, flow: CylinderFlow):
        self.flow = flow

    def value(self, points):
        return self.flow.pressure(points, fluid_only=False)

    def gradient(self, points):
        return self.flow.pressure_gradient(points, fluid_only=False)

    def laplacian(self, points):
        # the cylinder pressure is harmonic away from the centre
        pts = np.asarray(points, dtype=float)
        return np.zeros(pts.shape[:-1])


class PressureGradientField:
    """Gradient of the cylinder pressure; equals the velocity Laplacian."""

    rank = "vector"
    kind = "enrichment:pressure-gradient"

    def __init__(self, flow: CylinderFlow):
        self.flow = flow

    def value(self, points):
        return self.flow.pressure_gradient(points, fluid_only=False)

    def gradient(self, points):
        # Hessian of the pressure; uses harmonicity for the (1,1) entry
        f = self.flow
        pts = np.asarray(points, dtype=float)
        s = pts[..., 0] - f.circle.cx
        t = pts[..., 1] - f.circle.cy
        r2 = s * s + t * t
        r4 = r2 * r2
        r6 = r4 * r2
        pss = 12.0 * s / r4 - 16.0 * s**3 / r6
        pst = 4.0 * t / r4 - 16.0 * s * s * t / r6
        out = np.empty(s.shape + (2, 2))
        out[..., 0, 0] = pss
        out[..., 0, 1] = pst
        out[..., 1, 0] = pst
        out[..., 1, 1] = -pss
        return f.speed * out

    def laplacian(self, points):
        pts = np.asarray(points, dtype=float)
        return np.zeros(pts.shape[:-1] + (2,))


class VelocityGradientNormalTrace:
    """(grad u_cyl) n_F on a face, with the face's canonical normal."""

    rank = "vector"
    kind = "trace:velocity-gradient-normal"

    def __init__(self, flow: CylinderFlow, geom):
        self.flow = flow
        self.geom = geom

    def value(self, points):
        g = self.flow.velocity_gradient(points, fluid_only=False)
        n = self.geom.normal(points)
        return np.einsum("...ab,...b->...a", g, n)


class PressureNormalTrace:
    """p_cyl * n_F on a face."""

    rank = "vector"
    kind = "trace:pressure-normal"

    def __init__(self, flow: CylinderFlow, geom):
        self.flow = flow
        self.geom = geom

    def value(self, points):
        p = self.flow.pressure(points, fluid_only=False)
        return p[..., None] * self.geom.normal(points)


class CombinedField:
    """Linear combination of spanning fields (an orthonormal basis member)."""

    kind = "combination"

    def __init__(self, fields, weights):
        self.fields = fields
        self.weights = np.asarray(weights, dtype=float)
        self.rank = fields[0].rank

    def _combine(self, attr, points):
        parts = np.stack([getattr(f, attr)(points) for f in self.fields])
        return np.tensordot(self.weights, parts, axes=(0, 0))

    def value(self, points):
        return self._combine("value", points)

    def gradient(self, points):
        return self._combine("gradient", points)

    def laplacian(self, points):
        return self._combine("laplacian", points)
