"""Closed-form fields: creeping flow past a circular cylinder, the
manufactured solution used by the single-cylinder study, and far-field
boundary data for the multi-cylinder study.

All evaluators are vectorised: they accept points of shape (n, 2) and
return arrays whose leading dimension is n.  Derivatives were derived
offline with computer algebra and are guarded by finite-difference tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Circle

__all__ = [
    "CylinderFlow",
    "ManufacturedSolution",
    "stream_zeta1",
    "stream_zeta2",
    "stream_zeta_finite",
    "constant_field",
]


def _split(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=float)
    return pts[..., 0], pts[..., 1]


@dataclass(frozen=True)
class CylinderFlow:
    """Asymptotic Stokes flow past a cylinder, unit viscosity.

    In coordinates relative to the cylinder centre, with r = |x| and the
    no-slip circle of radius R,

        u = (R^2 - r^2)/(2 r^4) * ((x^2 - y^2) e_x + 2 x y e_y) + ln(r/R) e_x
        p = C - 2 x / r^2

    The pair solves -laplace(u) + grad(p) = 0, div(u) = 0 away from the
    origin, with u = 0 on the circle.  The velocity Laplacian equals the
    pressure gradient identically.
    """

    circle: Circle
    speed: float = 1.0
    pressure_offset: float = 0.0

    # smallest admissible radius (relative); evaluation closer to the
    # centre than (1 - tol) R is a caller bug
    _rel_tol: float = 1e-12

    def _rel(self, points, fluid_only: bool):
        x, y = _split(points)
        s = x - self.circle.cx
        t = y - self.circle.cy
        r2 = s * s + t * t
        if fluid_only:
            rmin = (1.0 - self._rel_tol) * self.circle.radius
            if np.any(r2 < rmin * rmin):
                raise ValueError("cylinder flow evaluated inside the cylinder")
        else:
            # smooth extension inside the annulus is fine for quadrature
            # cones; only the neighbourhood of the singular centre is out
            rmin = 0.05 * self.circle.radius
            if np.any(r2 < rmin * rmin):
                raise ValueError("cylinder flow evaluated too close to the centre")
        return s, t, r2

    def velocity(self, points, *, fluid_only: bool = True) -> np.ndarray:
        R = self.circle.radius
        s, t, r2 = self._rel(points, fluid_only)
        g = (R * R - r2) / (2.0 * r2 * r2)
        out = np.empty(np.shape(s) + (2,))
        out[..., 0] = g * (s * s - t * t) + 0.5 * np.log(r2 / (R * R))
        out[..., 1] = g * (2.0 * s * t)
        return self.speed * out

    def velocity_gradient(self, points, *, fluid_only: bool = True) -> np.ndarray:
        """Total derivative, [i, j] = d u_i / d x_j, shape (n, 2, 2)."""
        R = self.circle.radius
        s, t, r2 = self._rel(points, fluid_only)
        r4 = r2 * r2
        g = (R * R - r2) / (2.0 * r4)
        gr = -2.0 * R * R / (r4 * r2) + 1.0 / r4  # (dg/dr)/r
        d = s * s - t * t
        out = np.empty(np.shape(s) + (2, 2))
        out[..., 0, 0] = gr * s * d + 2.0 * g * s + s / r2
        out[..., 0, 1] = gr * t * d - 2.0 * g * t + t / r2
        out[..., 1, 0] = 2.0 * gr * s * s * t + 2.0 * g * t
        out[..., 1, 1] = 2.0 * gr * s * t * t + 2.0 * g * s
        return self.speed * out

    def velocity_laplacian(self, points, *, fluid_only: bool = True) -> np.ndarray:
        # identical to the pressure gradient (unit viscosity, zero force)
        return self.pressure_gradient(points, fluid_only=fluid_only)

    def pressure(self, points, *, fluid_only: bool = True) -> np.ndarray:
        s, t, r2 = self._rel(points, fluid_only)
        return self.pressure_offset + self.speed * (-2.0 * s / r2)

    def pressure_gradient(self, points, *, fluid_only: bool = True) -> np.ndarray:
        s, t, r2 = self._rel(points, fluid_only)
        r4 = r2 * r2
        out = np.empty(np.shape(s) + (2,))
        out[..., 0] = -2.0 / r2 + 4.0 * s * s / r4
        out[..., 1] = 4.0 * s * t / r4
        return self.speed * out


def stream_zeta1(r, radius: float, speed: float = 1.0):
    """Radial profile of the dominant stream-function mode.

    zeta1(r) = (r^2 - R^2)/(2 r) - r ln(r/R); the flow field of
    CylinderFlow is induced by the stream function zeta1(r) sin(theta).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < radius * (1.0 - 1e-12)):
        raise ValueError("zeta1 evaluated inside the cylinder")
    return speed * ((r * r - radius * radius) / (2.0 * r) - r * np.log(r / radius))


def stream_zeta2(r, radius: float, speed: float = 1.0):
    """Subdominant profile (r^2 - R^2)^2 / (2 r); test oracle only."""
    r = np.asarray(r, dtype=float)
    d = r * r - radius * radius
    return speed * d * d / (2.0 * r)


def stream_zeta_finite(r, radius: float, r_far: float, speed: float = 1.0):
    """Profile of the exact solution with the far condition imposed at
    a finite radius r_far.  Test oracle for the asymptotic split."""
    r = np.asarray(r, dtype=float)
    R2, F2 = radius * radius, r_far * r_far
    denom = R2 - F2 + (R2 + F2) * np.log(r_far / radius)
    amp = (R2 + F2) * speed / denom
    d = r * r - R2
    return amp * (d / (2.0 * r) - r * np.log(r / radius) + d * d / (2.0 * r * (R2 + F2)))


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact Stokes solution on the unit square minus one cylinder.

    Velocity = cylinder flow + a divergence-free sine product; pressure =
    cylinder pressure + (x - 1/2)(y - 1/2)^2.  Unit viscosity.  The
    cylinder pair is residual-free, so the body force comes from the
    smooth parts alone.
    """

    flow: CylinderFlow

    def velocity(self, points, *, fluid_only: bool = True) -> np.ndarray:
        x, y = _split(points)
        a = 2.0 * np.pi * x
        b = 2.0 * np.pi * y
        out = self.flow.velocity(points, fluid_only=fluid_only)
        out[..., 0] += (1.0 - np.cos(a)) * np.sin(b) / 4.0
        out[..., 1] += -np.sin(a) * (1.0 - np.cos(b)) / 4.0
        return out

    def velocity_gradient(self, points, *, fluid_only: bool = True) -> np.ndarray:
        x, y = _split(points)
        a = 2.0 * np.pi * x
        b = 2.0 * np.pi * y
        out = self.flow.velocity_gradient(points, fluid_only=fluid_only)
        half_pi = 0.5 * np.pi
        out[..., 0, 0] += half_pi * np.sin(a) * np.sin(b)
        out[..., 0, 1] += half_pi * (1.0 - np.cos(a)) * np.cos(b)
        out[..., 1, 0] += -half_pi * np.cos(a) * (1.0 - np.cos(b))
        out[..., 1, 1] += -half_pi * np.sin(a) * np.sin(b)
        return out

    def pressure(self, points, *, fluid_only: bool = True) -> np.ndarray:
        x, y = _split(points)
        return self.flow.pressure(points, fluid_only=fluid_only) + (x - 0.5) * (y - 0.5) ** 2

    def pressure_gradient(self, points, *, fluid_only: bool = True) -> np.ndarray:
        x, y = _split(points)
        out = self.flow.pressure_gradient(points, fluid_only=fluid_only)
        out[..., 0] += (y - 0.5) ** 2
        out[..., 1] += 2.0 * (x - 0.5) * (y - 0.5)
        return out

    def body_force(self, points) -> np.ndarray:
        """-laplace(u) + grad(p) of the smooth parts (cylinder parts cancel)."""
        x, y = _split(points)
        a = 2.0 * np.pi * x
        b = 2.0 * np.pi * y
        pi2 = np.pi * np.pi
        out = np.empty(np.shape(x) + (2,))
        out[..., 0] = -pi2 * np.sin(b) * (2.0 * np.cos(a) - 1.0) + (y - 0.5) ** 2
        out[..., 1] = -pi2 * np.sin(a) * (1.0 - 2.0 * np.cos(b)) + 2.0 * (x - 0.5) * (y - 0.5)
        return out


def constant_field(vec) -> "callable":
    """Velocity data with a constant value (e.g. the far-field e_x)."""
    v = np.asarray(vec, dtype=float)

    def value(points):
        pts = np.asarray(points, dtype=float)
        out = np.empty(pts.shape[:-1] + (2,))
        out[...] = v
        return out

    return value
