"""Quadrature on polygonal cells and straight faces.

Cell rules come from a conical-product construction on the reference
triangle (Gauss-Jacobi in the collapsed direction times Gauss-Legendre),
mapped onto a centroid fan of the polygon.  All weights are positive and
a rule of declared degree d integrates every bivariate monomial of total
degree <= d exactly.  Face rules are plain Gauss-Legendre on the segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .mesh import polygon_centroid

__all__ = [
    "QuadratureError",
    "UnsupportedDegreeError",
    "QuadratureRule",
    "MAX_TRIANGLE_DEGREE",
    "MAX_FACE_DEGREE",
    "triangle_rule",
    "cell_quadrature",
    "face_quadrature",
]

MAX_TRIANGLE_DEGREE = 20
MAX_FACE_DEGREE = 41


class QuadratureError(Exception):
    """A quadrature rule could not be built for the given geometry."""


class UnsupportedDegreeError(QuadratureError):
    """The requested exactness degree exceeds the supported range."""


@dataclass(frozen=True)
class QuadratureRule:
    """Points, positive weights, and the polynomial degree integrated exactly."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, f):
        """Integral of ``f``; the callback takes an (n, 2) array of points."""
        return self.weights @ np.asarray(f(self.points))


@lru_cache(maxsize=None)
def _reference_triangle(degree):
    """Conical-product rule on the triangle (0,0), (1,0), (0,1).

    The square [0,1]^2 collapses onto the triangle through
    (u, v) -> (u (1 - v), v) with Jacobian (1 - v); Gauss-Jacobi nodes with
    weight (1 - v) absorb the Jacobian, so n points per direction are exact
    for total degree 2n - 1.
    """
    n = max(1, (degree + 2) // 2)
    xg, wg = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (xg + 1.0)
    wu = 0.5 * wg
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    v = 0.5 * (xj + 1.0)
    wv = 0.25 * wj
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack(((U * (1.0 - V)).ravel(), V.ravel()))
    wts = np.outer(wu, wv).ravel()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def triangle_rule(degree):
    """Rule on the reference triangle, exact for total degree <= ``degree``."""
    if not 0 <= degree <= MAX_TRIANGLE_DEGREE:
        raise UnsupportedDegreeError(
            f"triangle rules support degrees 0..{MAX_TRIANGLE_DEGREE}, got {degree}")
    pts, wts = _reference_triangle(degree)
    return QuadratureRule(pts, wts, degree)


def _map_rule(ref_pts, ref_wts, v0, v1, v2):
    """Affine map of a reference-triangle rule onto the triangle (v0, v1, v2)."""
    e1 = v1 - v0
    e2 = v2 - v0
    det = e1[0] * e2[1] - e1[1] * e2[0]
    pts = v0 + np.outer(ref_pts[:, 0], e1) + np.outer(ref_pts[:, 1], e2)
    return pts, ref_wts * det


def cell_quadrature(vertices, degree):
    """Rule over the polygon with counterclockwise corners ``vertices``.

    Triangles are mapped directly; larger polygons are fan-triangulated from
    the area centroid, which must see every edge positively (star-shaped
    cell), otherwise a :class:`QuadratureError` is raised.
    """
    if not 0 <= degree <= MAX_TRIANGLE_DEGREE:
        raise UnsupportedDegreeError(
            f"cell rules support degrees 0..{MAX_TRIANGLE_DEGREE}, got {degree}")
    v = np.asarray(vertices, dtype=float)
    ref_pts, ref_wts = _reference_triangle(degree)
    if len(v) == 3:
        pts, wts = _map_rule(ref_pts, ref_wts, v[0], v[1], v[2])
        if wts[0] <= 0.0:
            raise QuadratureError("triangle is degenerate or clockwise")
        return QuadratureRule(pts, wts, degree)
    c = polygon_centroid(v)
    all_pts = []
    all_wts = []
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        det = (a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0])
        if det <= 0.0:
            raise QuadratureError(
                "cell is not star-shaped with respect to its centroid "
                f"(edge {i} subtends a nonpositive triangle)")
        pts, wts = _map_rule(ref_pts, ref_wts, c, a, b)
        all_pts.append(pts)
        all_wts.append(wts)
    return QuadratureRule(np.vstack(all_pts), np.concatenate(all_wts), degree)


def face_quadrature(endpoints, degree):
    """Gauss-Legendre rule on the segment from ``endpoints[0]`` to ``endpoints[1]``."""
    if not 0 <= degree <= MAX_FACE_DEGREE:
        raise UnsupportedDegreeError(
            f"face rules support degrees 0..{MAX_FACE_DEGREE}, got {degree}")
    a, b = np.asarray(endpoints, dtype=float)
    n = max(1, (degree + 2) // 2)
    xg, wg = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (xg + 1.0)
    length = float(np.hypot(*(b - a)))
    pts = a + np.outer(t, b - a)
    wts = 0.5 * wg * length
    return QuadratureRule(pts, wts, degree)
