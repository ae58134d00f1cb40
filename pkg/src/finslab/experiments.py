"""Canonical experiment geometry on the product of a time line with a round
sphere, shared by the command-line harness and the test suite.

The chart is (t, theta, phi) with the sphere embedded in R^3 as
(sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)).  Spatial geodesics are
great circles; their null lifts are lightlike geodesics of the product.
Everything here is built to stay away from the chart poles.
"""

from __future__ import annotations

import numpy as np

from .variational import SubmanifoldPatch

__all__ = [
    "embed", "chart", "tilted_null_data", "exact_tilted_circle",
    "great_circle_patch",
]


def embed(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi),
                     np.sin(theta) * np.sin(phi),
                     np.cos(theta)])


def chart(q: np.ndarray) -> np.ndarray:
    return np.array([np.arccos(np.clip(q[2], -1.0, 1.0)),
                     np.arctan2(q[1], q[0])])


def _spatial_frame(x0, v0) -> tuple[np.ndarray, np.ndarray, float]:
    """Embedded start point, embedded unit tangent, and the spatial speed."""
    theta, phi = float(x0[1]), float(x0[2])
    p = embed(theta, phi)
    d_theta = np.array([np.cos(theta) * np.cos(phi),
                        np.cos(theta) * np.sin(phi),
                        -np.sin(theta)])
    d_phi = np.array([-np.sin(theta) * np.sin(phi),
                      np.sin(theta) * np.cos(phi),
                      0.0])
    tangent = v0[1] * d_theta + v0[2] * d_phi
    speed = float(np.linalg.norm(tangent))
    return p, tangent / speed, speed


def tilted_null_data(theta_c: float, speed: float = 1.0
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Lightlike initial data whose spatial track is the great circle through
    colatitude theta_c heading along the chart-east direction."""
    x0 = np.array([0.0, theta_c, 0.0])
    v0 = np.array([speed, 0.0, speed / np.sin(theta_c)])
    return x0, v0


def exact_tilted_circle(x0, v0):
    """Closed-form chart solution of the null lift of a great circle.

    Returns callables t -> position, t -> embedded spatial point."""
    p, tangent, speed = _spatial_frame(x0, v0)
    t0 = float(x0[0])
    yt = float(v0[0])

    def spatial(t):
        s = speed * t
        return np.cos(s) * p + np.sin(s) * tangent

    def position(t):
        th, ph = chart(spatial(t))
        return np.array([t0 + yt * t, th, ph])

    return position, spatial


def great_circle_patch(x0, v0, rho: float, t_slice: float | None = None
                       ) -> SubmanifoldPatch:
    """Geodesic circle of radius rho on the sphere factor, centered at the
    point at spatial distance rho ahead of (x0, v0) along its great circle.

    The circle passes through x0's spatial point orthogonally to the track,
    so the null lift of the track leaves it orthogonally and focuses at the
    center after arc rho.  Embedded at a fixed time slice (default x0's)."""
    p, tangent, _ = _spatial_frame(x0, v0)
    t_slice = float(x0[0]) if t_slice is None else float(t_slice)
    center = np.cos(rho) * p + np.sin(rho) * tangent
    u = (p - np.cos(rho) * center) / np.sin(rho)
    w = np.cross(center, u)

    def immersion(alpha):
        a = float(np.atleast_1d(alpha)[0])
        q = (np.cos(rho) * center
             + np.sin(rho) * (np.cos(a) * u + np.sin(a) * w))
        th, ph = chart(q)
        return np.array([t_slice, th, ph])

    return SubmanifoldPatch(1, immersion, [0.0], name=f"circle(rho={rho:g})")
