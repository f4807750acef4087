"""Elementary planar geometry shared by the mesh and quadrature layers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Circle", "Segment", "Arc", "GEOM_TOL"]

# absolute tolerance for degenerate-configuration detection (tangency,
# intersections collapsing onto grid vertices)
GEOM_TOL = 1e-12


@dataclass(frozen=True)
class Circle:
    """Circle of positive radius; the fluid lives outside it."""

    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and np.isfinite(self.radius)):
            raise ValueError("circle radius must be positive and finite")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError("circle centre must be finite")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def point_at(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.stack(
            [self.cx + self.radius * np.cos(theta), self.cy + self.radius * np.sin(theta)],
            axis=-1,
        )

    def contains(self, points, *, tol: float = 0.0) -> np.ndarray:
        """Strict interior test, shrunk/grown by ``tol``."""
        pts = np.asarray(points, dtype=float)
        d2 = (pts[..., 0] - self.cx) ** 2 + (pts[..., 1] - self.cy) ** 2
        r = self.radius + tol
        return d2 < r * r

    def signed_distance(self, points) -> np.ndarray:
        """Positive outside the circle, negative inside."""
        pts = np.asarray(points, dtype=float)
        d = np.hypot(pts[..., 0] - self.cx, pts[..., 1] - self.cy)
        return d - self.radius


@dataclass(frozen=True)
class Segment:
    """Straight face with canonical direction a -> b.

    The canonical unit normal is the tangent rotated by -90 degrees, so an
    element traversing the segment in canonical direction has it as the
    outward normal.
    """

    ax: float
    ay: float
    bx: float
    by: float

    @property
    def a(self) -> np.ndarray:
        return np.array([self.ax, self.ay])

    @property
    def b(self) -> np.ndarray:
        return np.array([self.bx, self.by])

    @property
    def length(self) -> float:
        return float(np.hypot(self.bx - self.ax, self.by - self.ay))

    @property
    def diameter(self) -> float:
        return self.length

    @property
    def midpoint(self) -> np.ndarray:
        return np.array([0.5 * (self.ax + self.bx), 0.5 * (self.ay + self.by)])

    def normal(self, points=None) -> np.ndarray:
        tx = self.bx - self.ax
        ty = self.by - self.ay
        ln = np.hypot(tx, ty)
        n = np.array([ty / ln, -tx / ln])
        if points is None:
            return n
        pts = np.asarray(points, dtype=float)
        out = np.empty(pts.shape[:-1] + (2,))
        out[...] = n
        return out

    def point_at(self, t) -> np.ndarray:
        """Affine parametrisation, t in [0, 1]."""
        t = np.asarray(t, dtype=float)
        return np.stack(
            [self.ax + t * (self.bx - self.ax), self.ay + t * (self.by - self.ay)], axis=-1
        )


@dataclass(frozen=True)
class Arc:
    """Circular-arc face, canonical direction of increasing angle.

    theta0 < theta1 always; the canonical normal points radially out of
    the generating circle, so an element of the fluid region (outside the
    circle) traverses the arc with orientation -1 and outward normal
    (c - x)/R.
    """

    circle: Circle
    theta0: float
    theta1: float

    def __post_init__(self):
        if not self.theta1 > self.theta0:
            raise ValueError("arc requires theta1 > theta0")

    @property
    def span(self) -> float:
        return self.theta1 - self.theta0

    @property
    def length(self) -> float:
        return self.circle.radius * self.span

    @property
    def diameter(self) -> float:
        # chord for spans below pi, full diameter otherwise
        if self.span >= np.pi:
            return 2.0 * self.circle.radius
        return float(2.0 * self.circle.radius * np.sin(0.5 * self.span))

    @property
    def midpoint(self) -> np.ndarray:
        return self.circle.point_at(0.5 * (self.theta0 + self.theta1))

    def angles_of(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.arctan2(pts[..., 1] - self.circle.cy, pts[..., 0] - self.circle.cx)

    def normal(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        dx = pts[..., 0] - self.circle.cx
        dy = pts[..., 1] - self.circle.cy
        d = np.hypot(dx, dy)
        return np.stack([dx / d, dy / d], axis=-1)

    def point_at(self, t) -> np.ndarray:
        """Angular parametrisation, t in [0, 1]."""
        t = np.asarray(t, dtype=float)
        return self.circle.point_at(self.theta0 + t * self.span)
