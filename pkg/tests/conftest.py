import numpy as np
import pytest

from hho_stokes.geometry import Circle
from hho_stokes.mesh import build_cartesian_cut_mesh


@pytest.fixture(scope="session")
def mesh_plain4():
    return build_cartesian_cut_mesh(4, [])


@pytest.fixture(scope="session")
def mesh_r01_n8():
    return build_cartesian_cut_mesh(8, [Circle(0.5, 0.5, 0.1)])


@pytest.fixture(scope="session")
def mesh_r001_n8():
    return build_cartesian_cut_mesh(8, [Circle(0.5, 0.5, 0.01)])


def trig_velocity(pts):
    """Smooth non-polynomial vector test field with known derivatives."""
    x, y = pts[..., 0], pts[..., 1]
    return np.stack(
        [np.sin(np.pi * x) * np.sin(np.pi * y), np.cos(x) * y * y], axis=-1
    )


def trig_velocity_gradient(pts):
    x, y = pts[..., 0], pts[..., 1]
    out = np.empty(pts.shape[:-1] + (2, 2))
    out[..., 0, 0] = np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
    out[..., 0, 1] = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    out[..., 1, 0] = -np.sin(x) * y * y
    out[..., 1, 1] = 2.0 * np.cos(x) * y
    return out


def trig_velocity_divergence(pts):
    x, y = pts[..., 0], pts[..., 1]
    return np.pi * np.cos(np.pi * x) * np.sin(np.pi * y) + 2.0 * np.cos(x) * y


def random_polynomial_field(rng, degree, center=(0.5, 0.5), scale=1.0):
    """Random bivariate polynomial (value, gradient, divergence) closures."""
    terms = [(px, d - px) for d in range(degree + 1) for px in range(d + 1)]
    cx = rng.standard_normal(len(terms))
    cy = rng.standard_normal(len(terms))

    def value(pts):
        x = (pts[..., 0] - center[0]) / scale
        y = (pts[..., 1] - center[1]) / scale
        out = np.zeros(pts.shape[:-1] + (2,))
        for (px, py), ax, ay in zip(terms, cx, cy):
            m = x**px * y**py
            out[..., 0] += ax * m
            out[..., 1] += ay * m
        return out

    def gradient(pts):
        x = (pts[..., 0] - center[0]) / scale
        y = (pts[..., 1] - center[1]) / scale
        out = np.zeros(pts.shape[:-1] + (2, 2))
        for (px, py), ax, ay in zip(terms, cx, cy):
            gx = px * x ** max(px - 1, 0) * y**py / scale if px else 0.0
            gy = py * x**px * y ** max(py - 1, 0) / scale if py else 0.0
            out[..., 0, 0] += ax * gx
            out[..., 0, 1] += ax * gy
            out[..., 1, 0] += ay * gx
            out[..., 1, 1] += ay * gy
        return out

    def divergence(pts):
        g = gradient(pts)
        return g[..., 0, 0] + g[..., 1, 1]

    return value, gradient, divergence
