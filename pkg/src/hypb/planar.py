"""Euclidean 2D predicates for Klein-chart work.

Klein geodesics are straight chords, so incidence and transversality
reduce to segment arithmetic here.
"""

from __future__ import annotations

import numpy as np


def cross2(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def signed_area(pts) -> float:
    """Shoelace area of a closed polygon given as an (n, 2) array."""
    p = np.asarray(pts, dtype=float)
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def seg_intersection(a, b, c, d, tol=0.0):
    """Intersection parameters of segments a-b and c-d.

    Returns (t, u) with the crossing at a + t (b - a) = c + u (d - c),
    or None when the segments are parallel or miss each other. With
    tol > 0 the parameter window [0, 1] is widened by tol on each end.
    """
    r = (b[0] - a[0], b[1] - a[1])
    s = (d[0] - c[0], d[1] - c[1])
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0.0:
        return None
    w = (c[0] - a[0], c[1] - a[1])
    t = (w[0] * s[1] - w[1] * s[0]) / denom
    u = (w[0] * r[1] - w[1] * r[0]) / denom
    if -tol <= t <= 1.0 + tol and -tol <= u <= 1.0 + tol:
        return t, u
    return None


def ray_segment_hits(origin, direction, segs):
    """Ray-versus-segment crossing parameters, vectorized over segments.

    segs is an (m, 2, 2) array of endpoint pairs. Returns (t, u) arrays
    where t is the ray parameter (nan if no crossing) and u the position
    along the segment in [0, 1].
    """
    a = segs[:, 0, :]
    d = segs[:, 1, :] - a
    denom = direction[0] * d[:, 1] - direction[1] * d[:, 0]
    w = a - np.asarray(origin, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[:, 0] * d[:, 1] - w[:, 1] * d[:, 0]) / denom
        u = (w[:, 0] * direction[1] - w[:, 1] * direction[0]) / denom
    bad = (denom == 0.0) | (u < 0.0) | (u > 1.0)
    t = np.where(bad, np.nan, t)
    return t, u


def point_in_polygon(pt, verts) -> bool:
    """Even-odd test; boundary points are not guaranteed either way."""
    x, y = float(pt[0]), float(pt[1])
    inside = False
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xs = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if xs > x:
                inside = not inside
    return inside


def dist_point_segment(pt, a, b) -> float:
    """Euclidean distance from pt to segment a-b."""
    p = np.asarray(pt, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    L2 = float(d @ d)
    if L2 == 0.0:
        return float(np.hypot(*(p - a)))
    t = np.clip(float((p - a) @ d) / L2, 0.0, 1.0)
    return float(np.hypot(*(p - (a + t * d))))
