"""Labeled hyperbolic polygons and angle-preserving deformations.

Conventions: vertices are listed counterclockwise; side k (labels are
1-based in the public API, 0-based internally) joins vertex k to vertex
k+1 mod n; angles[k] is the interior angle between sides k and k+1,
which sits at vertex k+1 mod n. Non-convex (reflex) vertices are
allowed, so interior angles live in (0, 2 pi).

An angle is "rational" when it equals p pi / q exactly; undeclared
angles are reconstructed by continued fractions with denominators up to
1000 at tolerance 1e-9, and anything that fails reconstruction is
treated as irrational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import kernel as K
from . import planar
from .errors import AngleSumViolation, InfeasibleParams, InvalidData, NoConvergence

# declared rational angles must match their numeric value to 1e-9;
# numeric angles must match the measured geometry to 1e-8
ANGLE_DECL_TOL = 1e-9
ANGLE_MEAS_TOL = 1e-8
QMAX = 1000

# closure solver: Frobenius residual target, finite-difference step,
# iteration cap
CLOSURE_TOL = 1e-10
CLOSURE_FD_STEP = 1e-6
CLOSURE_MAX_ITER = 100

EVEN_SUBMULTIPLE = "even_submultiple"
ODD_SUBMULTIPLE = "odd_submultiple"
RATIONAL_OTHER = "rational_other"
IRRATIONAL = "irrational"

ALL_EVEN_SUBMULTIPLE = "all_even_submultiple"
NONE_EVEN_SUBMULTIPLE = "none_even_submultiple"
MIXED = "mixed"
HAS_IRRATIONAL = "has_irrational"


def reconstruct_fraction(angle: float):
    """Best (p, q) with angle = p pi / q, q <= 1000, within 1e-9; else None."""
    if not 0.0 < angle < 2.0 * math.pi:
        return None
    f = Fraction(angle / math.pi).limit_denominator(QMAX)
    if f.numerator <= 0:
        return None
    if abs(angle - math.pi * f.numerator / f.denominator) < ANGLE_DECL_TOL:
        return (f.numerator, f.denominator)
    return None


@dataclass(frozen=True)
class RationalAngle:
    """Interior angle, optionally declared as an exact multiple p pi / q."""

    numeric: float
    declared: tuple[int, int] | None = None

    def __post_init__(self):
        if not 0.0 < self.numeric < 2.0 * math.pi:
            raise InvalidData(f"angle out of range (0, 2pi): {self.numeric}")
        if self.declared is not None:
            p, q = self.declared
            if p <= 0 or q <= 0:
                raise InvalidData(f"bad declared angle {self.declared}")
            g = math.gcd(p, q)
            object.__setattr__(self, "declared", (p // g, q // g))
            p, q = self.declared
            if abs(self.numeric - math.pi * p / q) >= ANGLE_DECL_TOL:
                raise InvalidData(
                    f"declared {p}pi/{q} differs from numeric {self.numeric}"
                )

    @classmethod
    def from_fraction(cls, p: int, q: int) -> "RationalAngle":
        return cls(math.pi * p / q, (p, q))

    @classmethod
    def from_numeric(cls, x: float) -> "RationalAngle":
        """Attach a declaration when continued fractions recover one."""
        return cls(x, reconstruct_fraction(x))

    def classify(self):
        """Return (kind, k) where k is set for even submultiples pi/2k."""
        pq = self.declared or reconstruct_fraction(self.numeric)
        if pq is None:
            return (IRRATIONAL, None)
        p, q = pq
        if p == 1 and q % 2 == 0:
            return (EVEN_SUBMULTIPLE, q // 2)
        if p == 1:
            return (ODD_SUBMULTIPLE, None)
        return (RATIONAL_OTHER, None)


def summarize_angle_classes(angles) -> str:
    kinds = [a.classify()[0] for a in angles]
    if IRRATIONAL in kinds:
        return HAS_IRRATIONAL
    if all(k == EVEN_SUBMULTIPLE for k in kinds):
        return ALL_EVEN_SUBMULTIPLE
    if not any(k == EVEN_SUBMULTIPLE for k in kinds):
        return NONE_EVEN_SUBMULTIPLE
    return MIXED


def measure_angles(vertices) -> list[float]:
    """Interior angle at each vertex of a ccw vertex loop.

    The magnitude comes from hyperboloid tangents; the reflex/convex
    decision comes from the turn sign in the Klein chart, which
    preserves orientation even though it distorts angles.
    """
    n = len(vertices)
    kv = [p.klein() for p in vertices]
    out = []
    for i in range(n):
        w = vertices[i]
        prev_ = vertices[(i - 1) % n]
        next_ = vertices[(i + 1) % n]
        t_in = -K.tangent_toward(w, prev_)
        t_out = K.tangent_toward(w, next_)
        turn = math.acos(float(np.clip(K.minkowski(t_in, t_out), -1.0, 1.0)))
        s = planar.cross2(kv[i] - kv[(i - 1) % n], kv[(i + 1) % n] - kv[i])
        if s < 0:
            turn = -turn
        out.append(math.pi - turn)
    return out


@dataclass(frozen=True, eq=False)
class LabeledPolygon:
    """Compact polygon with labeled sides and per-vertex angle data."""

    vertices: tuple
    angles: tuple
    name: str | None = None

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise InvalidData("polygon needs at least 3 vertices")
        if len(self.angles) != len(self.vertices):
            raise InvalidData("need one angle per vertex")
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "angles", tuple(self.angles))

    @property
    def n(self) -> int:
        return len(self.vertices)

    @classmethod
    def from_vertices(cls, vertices, declared=None, name=None) -> "LabeledPolygon":
        """Build from a ccw vertex loop, measuring angles from the geometry.

        declared, when given, is a list over sides (angle k between sides
        k and k+1): entries are (p, q) pairs or None. Declared entries
        replace the measured numeric with the exact p pi / q; validate()
        checks the two against each other.
        """
        vertices = tuple(vertices)
        n = len(vertices)
        at_vertex = measure_angles(vertices)
        angles = []
        for k in range(n):
            measured = at_vertex[(k + 1) % n]
            decl = declared[k] if declared is not None else None
            if decl is not None:
                p, q = decl
                exact = math.pi * p / q
                if abs(exact - measured) > ANGLE_MEAS_TOL:
                    raise InvalidData(
                        f"declared angle {p}pi/{q} for sides {k + 1},{k + 2} "
                        f"is {abs(exact - measured):.2e} from the geometry"
                    )
                angles.append(RationalAngle(exact, (p, q)))
            else:
                angles.append(RationalAngle.from_numeric(measured))
        return cls(vertices, tuple(angles), name)

    def side(self, k: int) -> K.HGeodesic:
        """Oriented geodesic of side k (0-based), interior on the left."""
        return self._sides[k % self.n]

    @cached_property
    def _sides(self):
        n = self.n
        return tuple(
            K.geodesic_through(self.vertices[k], self.vertices[(k + 1) % n])
            for k in range(n)
        )

    @cached_property
    def klein_vertices(self):
        return np.array([p.klein() for p in self.vertices])

    @cached_property
    def side_segments(self):
        """(n, 2, 2) array of Klein endpoint pairs, one per side."""
        kv = self.klein_vertices
        return np.stack([kv, np.roll(kv, -1, axis=0)], axis=1)

    @cached_property
    def interior_point(self):
        """Klein coordinates of a point strictly inside the polygon."""
        kv = self.klein_vertices
        c = kv.mean(axis=0)
        if planar.point_in_polygon(c, kv):
            return c
        n = self.n
        for i in range(n):
            mid = (kv[i - 1] + kv[(i + 1) % n]) / 2.0
            if planar.point_in_polygon(mid, kv):
                return mid
        raise InvalidData("polygon admits no obvious interior point")

    def angle_at_vertex(self, i: int) -> RationalAngle:
        """Angle stored for vertex i (i.e. between sides i-1 and i)."""
        return self.angles[(i - 1) % self.n]

    def area(self) -> float:
        """Gauss-Bonnet defect (n - 2) pi - sum of angles."""
        return (self.n - 2) * math.pi - sum(a.numeric for a in self.angles)

    def angle_summary(self) -> str:
        return summarize_angle_classes(self.angles)

    def rotated_labels(self, shift: int) -> "LabeledPolygon":
        """Same geometry with labels shifted: new side k is old side k+shift."""
        n = self.n
        verts = tuple(self.vertices[(k + shift) % n] for k in range(n))
        angs = tuple(self.angles[(k + shift) % n] for k in range(n))
        return LabeledPolygon(verts, angs, self.name)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<LabeledPolygon{tag} n={self.n}>"


@dataclass(frozen=True)
class ValidationReport:
    n_ok: bool
    simple: bool
    ccw: bool
    angle_sum_ok: bool
    angles_consistent: bool
    messages: tuple

    @property
    def ok(self) -> bool:
        return (
            self.n_ok
            and self.simple
            and self.ccw
            and self.angle_sum_ok
            and self.angles_consistent
        )

    def to_json_dict(self):
        return {
            "ok": self.ok,
            "n_ok": self.n_ok,
            "simple": self.simple,
            "ccw": self.ccw,
            "angle_sum_ok": self.angle_sum_ok,
            "angles_consistent": self.angles_consistent,
            "messages": list(self.messages),
        }


def validate(poly: LabeledPolygon) -> ValidationReport:
    """Structured validity report; collects failures instead of raising."""
    msgs = []
    n = poly.n
    n_ok = n >= 3
    kv = poly.klein_vertices

    simple = True
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            hit = planar.seg_intersection(kv[i], kv[(i + 1) % n], kv[j], kv[(j + 1) % n])
            if hit is not None:
                simple = False
                msgs.append(f"sides {i + 1} and {j + 1} cross")

    ccw = planar.signed_area(kv) > 0
    if not ccw:
        msgs.append("vertices are not counterclockwise")

    total = sum(a.numeric for a in poly.angles)
    angle_sum_ok = total < (n - 2) * math.pi
    if not angle_sum_ok:
        msgs.append(
            f"angle sum {total:.6f} is not below (n-2)pi = {(n - 2) * math.pi:.6f}"
        )

    angles_consistent = True
    if simple and ccw:
        measured = measure_angles(poly.vertices)
        for k in range(n):
            m = measured[(k + 1) % n]
            if abs(m - poly.angles[k].numeric) > ANGLE_MEAS_TOL:
                angles_consistent = False
                msgs.append(
                    f"angle between sides {k + 1},{k + 2}: stored "
                    f"{poly.angles[k].numeric:.9f}, measured {m:.9f}"
                )
    elif not (simple and ccw):
        angles_consistent = False

    return ValidationReport(n_ok, simple, ccw, angle_sum_ok, angles_consistent, tuple(msgs))


def regular_side_length(n: int, angle: float) -> float:
    """Side length of the regular n-gon with the given interior angle."""
    c = math.cos(math.pi / n) / math.sin(angle / 2.0)
    if c <= 1.0:
        raise AngleSumViolation(f"no hyperbolic regular {n}-gon with angle {angle}")
    return 2.0 * math.acosh(c)


def build_regular(n: int, angle) -> LabeledPolygon:
    """Regular n-gon with the given interior angle, centered at the origin.

    Exists iff n * angle < (n - 2) pi; the circumradius r satisfies
    cosh r = cot(pi/n) cot(angle/2), which makes the half side obey
    cosh(s/2) = cos(pi/n) / sin(angle/2).
    """
    if isinstance(angle, RationalAngle):
        a = angle
    else:
        a = RationalAngle.from_numeric(float(angle))
    if n * a.numeric >= (n - 2) * math.pi:
        raise AngleSumViolation(
            f"{n} * {a.numeric:.6f} >= (n-2)pi, no such regular polygon"
        )
    r = math.acosh(1.0 / (math.tan(math.pi / n) * math.tan(a.numeric / 2.0)))
    verts = []
    for k in range(n):
        th = 2.0 * math.pi * k / n
        verts.append(
            K.HPoint(
                np.array(
                    [math.sinh(r) * math.cos(th), math.sinh(r) * math.sin(th), math.cosh(r)]
                )
            )
        )
    return LabeledPolygon(tuple(verts), tuple(a for _ in range(n)), f"regular-{n}")


@dataclass(frozen=True)
class DeformationParams:
    """Angle-preserving family coordinates: fixed angles, free side lengths.

    free_sides are 1-based side labels; the remaining three lengths are
    solved from the closure condition. Triangles take no free lengths.
    """

    target_angles: tuple
    free_lengths: tuple
    free_sides: tuple | None = None

    def __post_init__(self):
        n = len(self.target_angles)
        if n < 3:
            raise InvalidData("need at least 3 angles")
        expect = 0 if n == 3 else n - 3
        if len(self.free_lengths) != expect:
            raise InvalidData(f"need {expect} free lengths for n = {n}")
        if any(L <= 0 for L in self.free_lengths):
            raise InvalidData("free lengths must be positive")
        sides = self.free_sides
        if sides is None:
            sides = tuple(range(1, expect + 1))
        sides = tuple(int(s) for s in sides)
        if len(sides) != expect or len(set(sides)) != expect:
            raise InvalidData("free_sides must name distinct sides")
        if any(not 1 <= s <= n for s in sides):
            raise InvalidData("free_sides out of range")
        object.__setattr__(self, "target_angles", tuple(self.target_angles))
        object.__setattr__(self, "free_lengths", tuple(float(L) for L in self.free_lengths))
        object.__setattr__(self, "free_sides", sides)


def _loop_matrix(lengths, turns):
    """Holonomy of the side-turn-side boundary loop."""
    m = np.eye(3)
    for L, th in zip(lengths, turns):
        c, s = math.cosh(L), math.sinh(L)
        ca, sa = math.cos(th), math.sin(th)
        t = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]])
        r = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
        m = m @ t @ r
    return m


def _closure_residual(x, free_vals, free_idx, solved_idx, n, turns):
    lengths = np.empty(n)
    lengths[list(free_idx)] = free_vals
    lengths[list(solved_idx)] = x
    # lengths beyond ~50 are outside desk scale and overflow cosh anyway
    if np.any(lengths <= 0) or np.any(lengths > 50.0):
        return None, lengths
    f = _loop_matrix(lengths, turns) - np.eye(3)
    return f.ravel(), lengths


def _newton_closure(x0, free_vals, free_idx, solved_idx, n, turns):
    """Damped Gauss-Newton on the closure residual; returns x or None."""
    x = np.array(x0, dtype=float)
    r, _ = _closure_residual(x, free_vals, free_idx, solved_idx, n, turns)
    if r is None:
        return None, math.inf, 0
    best = float(np.linalg.norm(r))
    for it in range(CLOSURE_MAX_ITER):
        if best < CLOSURE_TOL:
            return x, best, it
        jac = np.empty((9, len(x)))
        for j in range(len(x)):
            xp = x.copy()
            xp[j] += CLOSURE_FD_STEP
            rp, _ = _closure_residual(xp, free_vals, free_idx, solved_idx, n, turns)
            if rp is None:
                return None, best, it
            jac[:, j] = (rp - r) / CLOSURE_FD_STEP
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        accepted = False
        for _halving in range(30):
            xc = x + step
            rc, _ = _closure_residual(xc, free_vals, free_idx, solved_idx, n, turns)
            if rc is not None:
                fc = float(np.linalg.norm(rc))
                if fc < best:
                    x, r, best = xc, rc, fc
                    accepted = True
                    break
            step = step / 2.0
        if not accepted:
            return x, best, it
    return (x, best, CLOSURE_MAX_ITER) if best < CLOSURE_TOL else (None, best, CLOSURE_MAX_ITER)


def _polygon_from_lengths(lengths, turns, target_angles):
    """Walk the boundary loop and assemble the (possibly invalid) polygon."""
    n = len(lengths)
    verts = [np.array([0.0, 0.0, 1.0])]
    g = np.eye(3)
    for k in range(n - 1):
        L, th = lengths[k], turns[k]
        c, s = math.cosh(L), math.sinh(L)
        ca, sa = math.cos(th), math.sin(th)
        g = g @ np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]])
        verts.append(g[:, 2].copy())
        g = g @ np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])

    # center the polygon so the Klein chart is well conditioned
    centroid = np.sum(verts, axis=0)
    centroid = K.HPoint(centroid / math.sqrt(-K.minkowski(centroid, centroid)))
    move = K.HIsometry(K._frame_at(centroid)).inverse()
    points = tuple(move.apply(K.HPoint(v)) for v in verts)
    return LabeledPolygon(points, tuple(target_angles))


def solve_closure(params: DeformationParams) -> LabeledPolygon:
    """Polygon with the prescribed angles and free side lengths.

    Parameterizes the boundary loop by side lengths with fixed turning
    angles pi - alpha_k and Newton-solves the three dependent lengths so
    the loop holonomy is the identity. The closure condition has
    spurious self-crossing branches, so the solve starts from the
    regular polygon of the mean target angle (exactly closed and
    simple) and walks the free lengths to their targets, re-Newtoning
    at each step; failed or invalid endpoints retry on finer schedules.
    """
    n = len(params.target_angles)
    alphas = [a.numeric for a in params.target_angles]
    if sum(alphas) >= (n - 2) * math.pi:
        raise InfeasibleParams("angle sum admits no compact hyperbolic polygon")
    turns = [math.pi - a for a in alphas]
    free_idx = tuple(s - 1 for s in params.free_sides)
    solved_idx = tuple(k for k in range(n) if k not in free_idx)
    mean = sum(alphas) / n
    seed = regular_side_length(n, mean)
    target = np.array(params.free_lengths, dtype=float)

    def attempt(steps):
        x = np.array([seed] * 3, dtype=float)
        last_best = math.inf
        for k in range(1, steps + 1):
            frac = k / steps
            vals = (1.0 - frac) * seed + frac * target
            x, last_best, _its = _newton_closure(
                x, vals, free_idx, solved_idx, n, turns
            )
            if x is None:
                return None, last_best
        return x, last_best

    report = None
    best = math.inf
    for steps in (1, 8, 32, 128):
        if n == 3 and steps > 1:
            break
        x, best = attempt(steps)
        if x is None:
            continue
        if np.any(x <= 1e-9):
            report = ValidationReport(
                True, True, True, True, False,
                (f"solved lengths not positive: {x.tolist()}",),
            )
            continue
        lengths = np.empty(n)
        lengths[list(free_idx)] = target
        lengths[list(solved_idx)] = x
        poly = _polygon_from_lengths(lengths, turns, params.target_angles)
        report = validate(poly)
        if report.ok:
            return poly
    if report is not None:
        raise InfeasibleParams("; ".join(report.messages) or "invalid polygon")
    raise NoConvergence(CLOSURE_MAX_ITER, best)


def frame_at_side(p: K.HPoint, toward: K.HPoint) -> K.HIsometry:
    """Isometry taking the origin to p with +x pointing toward `toward`."""
    t = K.tangent_toward(p, toward)
    u2 = K.MINKOWSKI_J @ np.cross(p.v, t)
    u2 = u2 / math.sqrt(K.minkowski(u2, u2))
    b = np.column_stack([t, u2, p.v])
    if np.linalg.det(b) < 0:
        b = np.column_stack([t, -u2, p.v])
    return K.HIsometry(b)


def align_label_preserving(a: LabeledPolygon, b: LabeledPolygon) -> K.HIsometry:
    """Isometry matching a's vertex-1 frame to b's, labels preserved."""
    fa = frame_at_side(a.vertices[0], a.vertices[1])
    fb = frame_at_side(b.vertices[0], b.vertices[1])
    return fb.compose(fa.inverse())


def load_polygon(data: dict) -> LabeledPolygon:
    """Polygon from its JSON document form.

    Schema: {"model": "klein"|"poincare", "vertices": [[u, v], ...],
    "angles": [[p, q] | null, ...] (optional), "name": ... (optional)}.
    """
    if not isinstance(data, dict):
        raise InvalidData("polygon document must be a JSON object")
    model = data.get("model", "klein")
    if model not in ("klein", "poincare"):
        raise InvalidData(f"unknown model {model!r}")
    verts_raw = data.get("vertices")
    if not isinstance(verts_raw, list) or len(verts_raw) < 3:
        raise InvalidData("vertices must be a list of at least 3 [u, v] pairs")
    lift = K.from_klein if model == "klein" else K.from_poincare
    verts = []
    for entry in verts_raw:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise InvalidData(f"bad vertex entry {entry!r}")
        try:
            verts.append(lift((float(entry[0]), float(entry[1]))))
        except (ValueError, TypeError) as e:
            raise InvalidData(str(e))
    declared = data.get("angles")
    if declared is not None:
        if not isinstance(declared, list) or len(declared) != len(verts):
            raise InvalidData("angles must list one entry per side")
        cleaned = []
        for entry in declared:
            if entry is None:
                cleaned.append(None)
            elif isinstance(entry, (list, tuple)) and len(entry) == 2:
                cleaned.append((int(entry[0]), int(entry[1])))
            else:
                raise InvalidData(f"bad angle entry {entry!r}")
        declared = cleaned
    name = data.get("name")
    return LabeledPolygon.from_vertices(verts, declared, name)


def dump_polygon(poly: LabeledPolygon, model: str = "klein") -> dict:
    if model not in ("klein", "poincare"):
        raise InvalidData(f"unknown model {model!r}")
    chart = (lambda p: p.klein()) if model == "klein" else (lambda p: p.poincare())
    out = {
        "model": model,
        "vertices": [[float(c) for c in chart(p)] for p in poly.vertices],
        "angles": [list(a.declared) if a.declared else None for a in poly.angles],
    }
    if poly.name:
        out["name"] = poly.name
    return out
