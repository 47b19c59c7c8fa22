"""Billiard trajectories inside a labeled hyperbolic polygon.

A trajectory is a piecewise geodesic that reflects off the sides with equal
angles of incidence and reflection. Side crossings are found in the Klein
chart, where both the trajectory leg and the sides are straight segments.
Hits closer than EPS_VERTEX to a vertex stop the run: the events up to that
point are kept and the step number is recorded in Trajectory.vertex_hit, so
callers can discard grazing runs without losing the prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import kernel as K
from . import planar
from .errors import HypbError, InvalidData, NotInterior, NotUltraparallel
from .polygon import LabeledPolygon

# hyperbolic clearance below which a hit counts as striking a vertex
EPS_VERTEX = 1e-8
# minimum Euclidean ray parameter, so a leg never re-hits its own side
TRAVEL_MIN = 1e-10
# hyperbolic distance from a position to its direction-encoding point
DIR_STEP = 1e-3
# cadence for re-projecting hit points onto the exact side geodesics
REPROJECT_EVERY = 256


@dataclass(frozen=True)
class BounceEvent:
    """One reflection: which side, where, and after how much arc length."""

    side_label: int
    hit_point: K.HPoint
    arc_param: float
    time: float


@dataclass(frozen=True)
class Trajectory:
    start: K.HPoint
    direction: K.HPoint
    events: tuple
    vertex_hit: Optional[int] = None
    final_point: Optional[K.HPoint] = None
    final_direction: Optional[K.HPoint] = None

    @property
    def grazing(self) -> bool:
        return self.vertex_hit is not None


def bounce_word(traj: Trajectory) -> tuple:
    """Project a trajectory to its sequence of side labels."""
    return tuple(e.side_label for e in traj.events)


def direction_point(start: K.HPoint, theta: float) -> K.HPoint:
    """Point at distance DIR_STEP from start, bearing theta in the
    canonical frame at start (theta = 0 points along the first frame leg)."""
    b = K._frame_at(start)
    u = math.cos(theta) * b[:, 0] + math.sin(theta) * b[:, 1]
    return K.geodesic_point(start, u, DIR_STEP)


def distance_to_boundary(poly: LabeledPolygon, p: K.HPoint) -> float:
    """Hyperbolic distance from p to the nearest point of the boundary."""
    best = math.inf
    n = poly.n
    for k in range(n):
        g = poly.side(k)
        foot = K.foot_of_perpendicular(p, g)
        a, b = poly.vertices[k], poly.vertices[(k + 1) % n]
        side_len = K.distance(a, b)
        if K.distance(a, foot) <= side_len and K.distance(foot, b) <= side_len:
            d = abs(K.signed_distance(p, g))
        else:
            d = min(K.distance(p, a), K.distance(p, b))
        best = min(best, d)
    return best


def _coerce_direction(start: K.HPoint, direction) -> K.HPoint:
    if isinstance(direction, K.HPoint):
        u = K.tangent_toward(start, direction)
        return K.geodesic_point(start, u, DIR_STEP)
    return direction_point(start, float(direction))


def simulate(
    poly: LabeledPolygon,
    start: K.HPoint,
    direction: Union[float, K.HPoint],
    bounces: int,
) -> Trajectory:
    """Run a billiard trajectory for up to `bounces` reflections.

    `direction` is either a bearing in radians or a second HPoint to aim at.
    Raises NotInterior unless start is strictly inside the polygon with more
    than EPS_VERTEX of boundary clearance.
    """
    if bounces < 1:
        raise InvalidData("bounces must be at least 1")
    if not planar.point_in_polygon(start.klein(), poly.klein_vertices):
        raise NotInterior("start point is outside the polygon")
    if distance_to_boundary(poly, start) <= EPS_VERTEX:
        raise NotInterior("start point is too close to the boundary")

    q0 = _coerce_direction(start, direction)
    segs = np.asarray(poly.side_segments, dtype=float)
    verts = poly.vertices
    n = poly.n
    side_lens = [K.distance(verts[k], verts[(k + 1) % n]) for k in range(n)]

    p, q = start, q0
    events = []
    vertex_hit = None
    t_total = 0.0
    for step in range(1, bounces + 1):
        u0 = p.klein()
        d = q.klein() - u0
        norm = float(np.hypot(d[0], d[1]))
        if norm == 0.0:
            raise HypbError("degenerate direction")
        d = d / norm
        t, _ = planar.ray_segment_hits(u0, d, segs)
        t = np.where(t > TRAVEL_MIN, t, np.nan)
        if np.all(np.isnan(t)):
            raise HypbError("trajectory leg found no exit side")
        k = int(np.nanargmin(t))
        hit = K.from_klein(u0 + float(t[k]) * d)
        if step % REPROJECT_EVERY == 0:
            hit = K.foot_of_perpendicular(hit, poly.side(k))
        d0 = K.distance(hit, verts[k])
        d1 = K.distance(hit, verts[(k + 1) % n])
        if d0 < EPS_VERTEX or d1 < EPS_VERTEX:
            vertex_hit = step
            break
        t_total += K.distance(p, hit)
        events.append(BounceEvent(k + 1, hit, d0 / side_lens[k], t_total))
        leg = K.geodesic_through(p, hit)
        ahead = K.geodesic_point(hit, K.geodesic_tangent(leg, hit), DIR_STEP)
        q = K.reflect(poly.side(k)).apply(ahead)
        p = hit

    return Trajectory(
        start=start,
        direction=q0,
        events=tuple(events),
        vertex_hit=vertex_hit,
        final_point=p,
        final_direction=q,
    )


@dataclass(frozen=True)
class PeriodicSeed:
    """Common perpendicular between the lines of two sides.

    valid means both feet land on the open side segments, in which case the
    perpendicular segment is a 2-periodic billiard orbit bouncing i, j."""

    i: int
    j: int
    feet: tuple
    length: float
    valid: bool
    axis: K.HGeodesic


def common_perpendicular(poly: LabeledPolygon, i: int, j: int) -> PeriodicSeed:
    """Common perpendicular of the full geodesics of sides i and j (1-based)."""
    n = poly.n
    if not (1 <= i <= n and 1 <= j <= n):
        raise InvalidData(f"side labels must be in 1..{n}")
    if i == j:
        raise InvalidData("need two distinct sides")
    gi, gj = poly.side(i - 1), poly.side(j - 1)
    if K.intersect(gi, gj).kind != "disjoint":
        raise NotUltraparallel(f"sides {i} and {j} do not have disjoint lines")
    w = K.MINKOWSKI_J @ np.cross(gi.n, gj.n)
    axis = K.HGeodesic(w)
    fi = K.intersect(axis, gi).point
    fj = K.intersect(axis, gj).point

    def on_open_side(foot, k):
        a, b = poly.vertices[k], poly.vertices[(k + 1) % n]
        da, db = K.distance(a, foot), K.distance(foot, b)
        side_len = K.distance(a, b)
        if da < EPS_VERTEX or db < EPS_VERTEX:
            return False
        return abs(da + db - side_len) < 1e-9

    valid = on_open_side(fi, i - 1) and on_open_side(fj, j - 1)
    return PeriodicSeed(i, j, (fi, fj), K.distance(fi, fj), valid, axis)
