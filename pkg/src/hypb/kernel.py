"""Hyperboloid-model kernel for plane hyperbolic geometry.

Points live on the upper sheet of x^2 + y^2 - z^2 = -1 (z >= 1) with the
Minkowski form Q(p, q) = p.x q.x + p.y q.y - p.z q.z. Geodesics are stored
as spacelike unit normals n (Q(n, n) = +1); the positive side of a geodesic
is {p : Q(p, n) > 0} and lies to the left when travelling along the
orientation induced by geodesic_through(p, q).

The Klein disk (u, v) = (x/z, y/z) is the chart used for incidence and
transversality work, because geodesics become straight chords there. The
Poincare disk (x, y)/(1 + z) is conformal and is used only for rendering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoincidentPoints, NotConcurrent

# Minkowski signature (+, +, -).
MINKOWSKI_J = np.diag([1.0, 1.0, -1.0])
MINKOWSKI_J.setflags(write=False)

# Algebraic invariants (norms, orthogonality) are held to 1e-9; incidence
# and angle measurements to 1e-8; coincidence of points to 1e-12. Double
# precision supports this for diameters up to a few tens.
ALGEBRAIC_TOL = 1e-9
INCIDENCE_TOL = 1e-8
COINCIDENCE_TOL = 1e-12

# Isometry products are re-orthonormalized on this cadence to keep drift
# below 1e-6 over million-step compositions.
RENORM_EVERY = 64


def minkowski(u, v):
    """Minkowski pairing of two raw 3-vectors (or stacks of them)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] - u[..., 2] * v[..., 2]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HPoint:
    """Point on the upper hyperboloid sheet."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        q = minkowski(v, v)
        if q >= 0 or v[2] <= 0:
            raise ValueError(f"not a future timelike vector: {v}")
        # re-scale onto the sheet so constructed points satisfy Q = -1 exactly
        object.__setattr__(self, "v", _frozen(v / np.sqrt(-q)))

    @property
    def x(self):
        return self.v[0]

    @property
    def y(self):
        return self.v[1]

    @property
    def z(self):
        return self.v[2]

    @classmethod
    def origin(cls):
        return cls(np.array([0.0, 0.0, 1.0]))

    @classmethod
    def unchecked(cls, v):
        """Trusted constructor for numerically extreme points.

        The sheet test computes x^2 + y^2 - z^2 in doubles, which loses
        all significance once coordinates reach ~1e8 (points deep in an
        unfolded corridor). Callers whose vectors are timelike by
        construction use this to skip the test; chart projections stay
        meaningful, metric quantities do not.
        """
        p = object.__new__(cls)
        object.__setattr__(p, "v", _frozen(np.asarray(v, dtype=float)))
        return p

    def klein(self):
        """Klein chart coordinates (x/z, y/z)."""
        return np.array([self.v[0] / self.v[2], self.v[1] / self.v[2]])

    def poincare(self):
        """Poincare chart coordinates (x, y)/(1 + z)."""
        return np.array([self.v[0] / (1.0 + self.v[2]), self.v[1] / (1.0 + self.v[2])])

    def __repr__(self):
        return f"HPoint({self.v[0]:.12g}, {self.v[1]:.12g}, {self.v[2]:.12g})"


def from_klein(uv):
    """Lift Klein coordinates to the hyperboloid. Requires |uv| < 1."""
    u, v = float(uv[0]), float(uv[1])
    s = 1.0 - u * u - v * v
    if s <= 0:
        raise ValueError(f"Klein point outside the open disk: {(u, v)}")
    r = 1.0 / np.sqrt(s)
    return HPoint(np.array([u * r, v * r, r]))


def from_poincare(uv):
    """Lift Poincare coordinates to the hyperboloid. Requires |uv| < 1."""
    u, v = float(uv[0]), float(uv[1])
    s = u * u + v * v
    if s >= 1.0:
        raise ValueError(f"Poincare point outside the open disk: {(u, v)}")
    d = 1.0 - s
    return HPoint(np.array([2.0 * u / d, 2.0 * v / d, (1.0 + s) / d]))


def distance(p: HPoint, q: HPoint) -> float:
    """Hyperbolic distance between two points.

    Uses 2*asinh(|p - q|_Q / 2) rather than arccosh(-Q(p, q)); the two agree
    exactly but arccosh near 1 turns coordinate roundoff eps into sqrt(eps).
    """
    d = p.v - q.v
    s2 = max(float(minkowski(d, d)), 0.0)
    return 2.0 * math.asinh(0.5 * math.sqrt(s2))


@dataclass(frozen=True)
class HGeodesic:
    """Geodesic stored as a spacelike unit normal."""

    n: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float)
        q = minkowski(n, n)
        if q <= 0:
            raise ValueError(f"not a spacelike vector: {n}")
        object.__setattr__(self, "n", _frozen(n / np.sqrt(q)))

    def reversed(self):
        """Same line with the opposite positive side."""
        return HGeodesic(-self.n)

    def side(self, p: HPoint) -> float:
        """Q(p, n); equals sinh of the signed distance to the line."""
        return float(minkowski(p.v, self.n))

    def contains(self, p: HPoint, tol=INCIDENCE_TOL) -> bool:
        return abs(self.side(p)) <= tol

    def __repr__(self):
        return f"HGeodesic({self.n[0]:.12g}, {self.n[1]:.12g}, {self.n[2]:.12g})"


def geodesic_through(p: HPoint, q: HPoint) -> HGeodesic:
    """Oriented geodesic through two points.

    The positive side lies to the left when travelling from p to q;
    swapping the arguments reverses the orientation. Raises
    CoincidentPoints when the points are within 1e-12 of each other.
    """
    if distance(p, q) <= COINCIDENCE_TOL:
        raise CoincidentPoints(f"{p} and {q}")
    n = MINKOWSKI_J @ np.cross(p.v, q.v)
    return HGeodesic(n)


@dataclass(frozen=True)
class KleinChord:
    """Straight-chord image of a geodesic in the Klein disk.

    Endpoints a, b sit on the unit circle, ordered so that a -> b agrees
    with the geodesic's orientation (positive side on the left).
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "b", _frozen(self.b))


def klein_chord(g: HGeodesic) -> KleinChord:
    """Ideal endpoints of a geodesic as a Klein chord."""
    nx, ny, nz = g.n
    m2 = nx * nx + ny * ny  # = 1 + nz^2 > 0
    c0 = np.array([nx, ny]) * (nz / m2)
    half = np.sqrt(max(1.0 - nz * nz / m2, 0.0))
    d = np.array([ny, -nx]) / np.sqrt(m2)  # travel direction, positive side left
    return KleinChord(c0 - half * d, c0 + half * d)


def tangent_toward(p: HPoint, q: HPoint) -> np.ndarray:
    """Unit tangent at p pointing toward q."""
    w = q.v + minkowski(q.v, p.v) * p.v
    s = minkowski(w, w)
    if s <= 0:
        raise CoincidentPoints(f"{p} and {q}")
    return w / np.sqrt(s)


def geodesic_point(p: HPoint, u: np.ndarray, s: float) -> HPoint:
    """Point at arc length s from p along unit tangent u."""
    return HPoint(p.v * np.cosh(s) + u * np.sinh(s))


def geodesic_tangent(g: HGeodesic, at: HPoint) -> np.ndarray:
    """Unit tangent of g at a point of g, following g's orientation."""
    t = MINKOWSKI_J @ np.cross(g.n, at.v)
    return t / np.sqrt(minkowski(t, t))


def angle_at(g1: HGeodesic, g2: HGeodesic, at: HPoint) -> float:
    """Unsigned angle in (0, pi) between two geodesics at a common point.

    The angle is measured between the oriented tangent directions, so it
    depends on the orientations of the normals. Raises NotConcurrent if
    `at` is not on both lines within 1e-8, or if the lines coincide.
    """
    if not (g1.contains(at) and g2.contains(at)):
        raise NotConcurrent(f"{at} is not on both geodesics")
    if min(np.abs(g1.n - g2.n).max(), np.abs(g1.n + g2.n).max()) < ALGEBRAIC_TOL:
        raise NotConcurrent("identical geodesics, angle undefined")
    t1 = geodesic_tangent(g1, at)
    t2 = geodesic_tangent(g2, at)
    c = np.clip(minkowski(t1, t2), -1.0, 1.0)
    return float(np.arccos(c))


@dataclass(frozen=True)
class Intersection:
    """Outcome of intersecting two geodesics.

    kind is one of "point", "asymptotic", "equal", "disjoint"; point is
    set only for kind == "point".
    """

    kind: str
    point: HPoint | None = None


def intersect(g1: HGeodesic, g2: HGeodesic) -> Intersection:
    """Classify the intersection of two geodesics.

    Equal lines are detected by parallel normals; asymptotic pairs by a
    shared ideal endpoint (unit-circle coordinates within 1e-9); crossing
    pairs via |Q(n1, n2)| < 1 with the crossing point J(n1 x n2)
    normalized onto the sheet.
    """
    n1, n2 = g1.n, g2.n
    if min(np.abs(n1 - n2).max(), np.abs(n1 + n2).max()) < ALGEBRAIC_TOL:
        return Intersection("equal")
    c1, c2 = klein_chord(g1), klein_chord(g2)
    shared = 0
    for e1 in (c1.a, c1.b):
        for e2 in (c2.a, c2.b):
            if np.abs(e1 - e2).max() < ALGEBRAIC_TOL:
                shared += 1
    if shared >= 1:
        return Intersection("asymptotic")
    c = minkowski(n1, n2)
    if abs(c) < 1.0:
        w = MINKOWSKI_J @ np.cross(n1, n2)
        if w[2] < 0:
            w = -w
        return Intersection("point", HPoint(w))
    return Intersection("disjoint")


def signed_distance(p: HPoint, g: HGeodesic) -> float:
    """Signed distance from p to g, positive on the positive side."""
    return float(np.arcsinh(g.side(p)))


def foot_of_perpendicular(p: HPoint, g: HGeodesic) -> HPoint:
    """Closest point of g to p."""
    w = p.v - g.side(p) * g.n
    return HPoint(w)


def _renormalize(m):
    """Minkowski Gram-Schmidt on the columns (c1, c2 spacelike, c3 timelike)."""
    c3 = m[:, 2]
    c3 = c3 / np.sqrt(-minkowski(c3, c3))
    c1 = m[:, 0] + minkowski(m[:, 0], c3) * c3
    c1 = c1 / np.sqrt(minkowski(c1, c1))
    c2 = m[:, 1] + minkowski(m[:, 1], c3) * c3
    c2 = c2 - minkowski(c2, c1) * c1
    c2 = c2 / np.sqrt(minkowski(c2, c2))
    return np.column_stack([c1, c2, c3])


@dataclass(frozen=True)
class HIsometry:
    """Isometry of the hyperbolic plane as a 3x3 Minkowski-orthogonal matrix.

    orientation is +1 (rotations, translations) or -1 (reflections, glides).
    age counts compositions since the last re-orthonormalization; compose()
    renormalizes whenever it reaches RENORM_EVERY.
    """

    m: np.ndarray
    orientation: int = 1
    age: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "m", _frozen(self.m))

    @classmethod
    def identity(cls):
        return cls(np.eye(3), 1, 0)

    def compose(self, other: "HIsometry") -> "HIsometry":
        """self after other: (self * other)(p) = self(other(p))."""
        m = self.m @ other.m
        age = self.age + other.age + 1
        if age >= RENORM_EVERY:
            m = _renormalize(m)
            age = 0
        return HIsometry(m, self.orientation * other.orientation, age)

    def __matmul__(self, other):
        return self.compose(other)

    def inverse(self) -> "HIsometry":
        return HIsometry(MINKOWSKI_J @ self.m.T @ MINKOWSKI_J, self.orientation, self.age)

    def apply(self, p: HPoint) -> HPoint:
        return HPoint(self.m @ p.v)

    def apply_geodesic(self, g: HGeodesic) -> HGeodesic:
        # normals transform covariantly under Minkowski-orthogonal maps
        return HGeodesic(self.m @ g.n)

    def defect(self) -> float:
        """Max-norm deviation of m^T J m from J."""
        return float(np.abs(self.m.T @ MINKOWSKI_J @ self.m - MINKOWSKI_J).max())


def reflect(g: HGeodesic) -> HIsometry:
    """Reflection across a geodesic: I - 2 n n^T J."""
    n = g.n.reshape(3, 1)
    return HIsometry(np.eye(3) - 2.0 * n @ (n.T @ MINKOWSKI_J), -1)


def _frame_at(center: HPoint):
    """Orthonormal frame (u1, u2, center) with positive orientation."""
    c = center.v
    u1 = np.array([1.0, 0.0, 0.0]) + minkowski(np.array([1.0, 0.0, 0.0]), c) * c
    u1 = u1 / np.sqrt(minkowski(u1, u1))
    u2 = np.array([0.0, 1.0, 0.0]) + minkowski(np.array([0.0, 1.0, 0.0]), c) * c
    u2 = u2 - minkowski(u2, u1) * u1
    u2 = u2 / np.sqrt(minkowski(u2, u2))
    b = np.column_stack([u1, u2, c])
    if np.linalg.det(b) < 0:
        b = np.column_stack([u1, -u2, c])
    return b


def rotation(center: HPoint, angle: float) -> HIsometry:
    """Rotation by `angle` (counterclockwise) about a point."""
    ca, sa = np.cos(angle), np.sin(angle)
    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    b = _frame_at(center)
    binv = MINKOWSKI_J @ b.T @ MINKOWSKI_J
    return HIsometry(b @ rz @ binv, 1)


def translation_x(length: float) -> HIsometry:
    """Translation by `length` along the x-axis geodesic."""
    c, s = np.cosh(length), np.sinh(length)
    return HIsometry(np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]]), 1)
