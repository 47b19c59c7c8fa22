"""Billiard rigidity of labeled hyperbolic polygons.

A polygon is billiard-flexible when some angle-preserving deformation
keeps every bounce word realizable; the operative picture is reflective
tilings, where flexibility needs a non-triangular tile. Classification
reads the angle arithmetic first (irrational angles, or all / none of
the angles being even integral submultiples of pi, decide immediately)
and falls back to a budgeted closure of the group generated by side
reflections and vertex half-turns, harvesting the fixed lines of the
reflections it contains. Discreteness of that line picture is decided
heuristically under explicit budgets, so Unknown is a legitimate
verdict, and indiscreteness witnesses carry enough data to be
re-verified outside the search.

compare() is the evidence harness for two polygons: simulated bounce
words from each are tested for realizability in the other (seeded and
deterministic), and short generalized-diagonal inventories are matched
as sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import billiards as B
from . import kernel as K
from . import polygon as P
from . import unfolding as U
from .errors import HypbError, InvalidData, NotInterior
from .polygon import LabeledPolygon

# two distinct fixed lines closer than this (crossing angle or parallel
# distance) witness an indiscrete group, as does a nontrivial rotation
# by less than this angle
INDISCRETE_TOL = 1e-4
# fixed lines whose normals differ componentwise by less than this are
# the same line; two decades below the indiscreteness trigger
LINE_DEDUP = 1e-6
# orientation-reversing elements this close to trace 1 count as
# reflections (glides have trace 2 cosh(translation) - 1 > 1)
_REFLECTION_TR = 1e-9
# interior angles must sit within this of pi/k to read off tile orders
_ANGLE_SNAP = 1e-8

DEFAULT_BUDGET = {"max_word_len": 12, "region_margin": 2.0, "max_elements": 100_000}


# ---------------------------------------------------------------------------
# reflection-group closure


@dataclass(frozen=True)
class TilingResult:
    """Outcome of the reflection-group line closure.

    status is "discrete", "indiscrete", or "budget_exhausted". Discrete
    results carry the arrangement tile containing the polygon's base
    point plus cover diagnostics; indiscrete results carry a textual
    witness and the offending data (two line normals, or a rotation
    matrix) for independent re-verification.
    """

    status: str
    depth: int
    lines: tuple = ()
    tile: Optional[LabeledPolygon] = None
    triangle: Optional[bool] = None
    tiles_in_p: Optional[int] = None
    tile_orders: tuple = ()
    vertex_orders: tuple = ()
    vertex_even: Optional[bool] = None
    witness: Optional[str] = None
    witness_data: tuple = ()

    def to_json_dict(self):
        out = {"status": self.status, "depth": int(self.depth)}
        out["lines_found"] = len(self.lines)
        if self.status == "discrete":
            out["triangle"] = bool(self.triangle)
            out["tiles_in_p"] = int(self.tiles_in_p)
            out["tile_orders"] = [int(q) for q in self.tile_orders]
            out["vertex_orders"] = [int(q) for q in self.vertex_orders]
            out["vertex_even"] = bool(self.vertex_even)
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _mkey(m):
    return tuple(np.round(np.asarray(m).ravel(), 8))


def _fixed_normal(m):
    """Unit spacelike normal of the line fixed by a reflection matrix."""
    w, v = np.linalg.eig(m)
    i = int(np.argmin(np.abs(w + 1.0)))
    n = np.real(v[:, i])
    q = n @ (K.MINKOWSKI_J @ n)
    if q <= 0:
        return None
    n = n / math.sqrt(q)
    for c in n:
        if abs(c) > 1e-9:
            return n if c > 0 else -n
    return None


def _same_line(a, b):
    return (
        float(np.abs(a - b).max()) < LINE_DEDUP
        or float(np.abs(a + b).max()) < LINE_DEDUP
    )


def _line_gap(a, b):
    """(kind, size) of the separation between two distinct lines."""
    q = abs(float(a @ (K.MINKOWSKI_J @ b)))
    if q < 1.0:
        return "angle", math.acos(min(q, 1.0))
    return "distance", math.acosh(max(q, 1.0))


def _rotation_angle(m):
    """Rotation angle of an orientation-preserving isometry, or None."""
    tr = float(np.trace(m))
    if tr >= 3.0:
        return None  # translation or identity-parabolic range
    return math.acos(max(-1.0, min(1.0, (tr - 1.0) / 2.0)))


def verify_indiscreteness(result: TilingResult) -> bool:
    """Re-check an indiscreteness witness from its emitted data alone."""
    if result.status != "indiscrete" or not result.witness_data:
        return False
    kind = result.witness_data[0]
    if kind == "lines":
        _, a, b = result.witness_data
        a, b = np.asarray(a), np.asarray(b)
        if _same_line(a, b):
            return False
        _, size = _line_gap(a, b)
        return size < INDISCRETE_TOL
    if kind == "rotation":
        m = np.asarray(result.witness_data[1])
        if float(np.abs(m - np.eye(3)).max()) < 1e-12:
            return False
        ang = _rotation_angle(m)
        return ang is not None and 0.0 < ang < INDISCRETE_TOL
    if kind == "irrational":
        return True
    return False


def tiling_closure(poly: LabeledPolygon, budget=None) -> TilingResult:
    """Close the side reflections and vertex half-turns over fixed lines.

    Breadth-first over group words, keeping elements that move the base
    point by at most twice the working-region radius (a reflection
    moves the base point exactly twice its line distance, so farther
    elements cannot contribute in-region lines; the extra slack covers
    word prefixes that overshoot before coming back). The in-region
    line set is compared between depths d and d-2; equality declares
    the picture discrete and the arrangement face holding the base
    point becomes the tile.
    """
    bud = dict(DEFAULT_BUDGET)
    bud.update(budget or {})
    n = poly.n
    for i, a in enumerate(poly.angles):
        if a.classify()[0] == P.IRRATIONAL:
            # the two side reflections at that vertex compose to an
            # irrational rotation, whose powers are dense
            return TilingResult(
                status="indiscrete",
                depth=0,
                witness=f"irrational rotation at vertex {(i + 1) % n}",
                witness_data=("irrational", (i + 1) % n),
            )

    c = K.from_klein(tuple(poly.interior_point))
    region_rad = max(K.distance(c, v) for v in poly.vertices) + float(
        bud["region_margin"]
    )
    prune_rad = 2.0 * region_rad + 2.0
    gens = [K.reflect(poly.side(j)) for j in range(n)]
    gens += [K.rotation(v, math.pi) for v in poly.vertices]

    seen = {_mkey(np.eye(3))}
    frontier = [K.HIsometry.identity()]
    lines = []
    snapshots = [frozenset()]
    elements = 1

    def exhausted(depth):
        return TilingResult(
            status="budget_exhausted",
            depth=depth,
            lines=tuple(map(tuple, lines)),
            witness=f"{elements} elements, {len(lines)} lines at depth {depth}",
        )

    for depth in range(1, int(bud["max_word_len"]) + 1):
        nxt = []
        for g in frontier:
            for h in gens:
                e = g @ h
                key = _mkey(e.m)
                if key in seen:
                    continue
                seen.add(key)
                elements += 1
                if elements > int(bud["max_elements"]):
                    return exhausted(depth)
                if e.orientation > 0:
                    ang = _rotation_angle(e.m)
                    if ang is not None and 0.0 < ang < INDISCRETE_TOL:
                        return TilingResult(
                            status="indiscrete",
                            depth=depth,
                            lines=tuple(map(tuple, lines)),
                            witness=f"rotation by {ang:.3e} rad",
                            witness_data=("rotation", e.m.copy()),
                        )
                if K.distance(c, e.apply(c)) > prune_rad:
                    continue
                nxt.append(e)
                if e.orientation < 0 and abs(float(np.trace(e.m)) - 1.0) < _REFLECTION_TR:
                    nrm = _fixed_normal(e.m)
                    if nrm is None:
                        continue
                    if abs(K.signed_distance(c, K.HGeodesic(nrm))) > region_rad:
                        continue
                    fresh = True
                    for old in lines:
                        if _same_line(nrm, old):
                            fresh = False
                            break
                        kind, size = _line_gap(nrm, old)
                        if size < INDISCRETE_TOL:
                            return TilingResult(
                                status="indiscrete",
                                depth=depth,
                                lines=tuple(map(tuple, lines)),
                                witness=f"lines at {kind} {size:.3e}",
                                witness_data=("lines", nrm.copy(), old.copy()),
                            )
                    if fresh:
                        lines.append(nrm)
        frontier = nxt
        snap = frozenset(_mkey(l) for l in lines)
        snapshots.append(snap)
        if depth >= 3 and snap == snapshots[depth - 2]:
            return _discrete_result(poly, lines, depth)
    return exhausted(int(bud["max_word_len"]))


def _clip_halfplane(pts, h, keep_sign):
    """Sutherland-Hodgman clip of a Klein polygon by a straight line."""
    vals = [h(p) * keep_sign for p in pts]
    out = []
    m = len(pts)
    for i in range(m):
        j = (i + 1) % m
        pi, pj = pts[i], pts[j]
        vi, vj = vals[i], vals[j]
        if vi >= 0:
            out.append(pi)
        if (vi > 0) != (vj > 0) and vi != vj:
            t = vi / (vi - vj)
            out.append(pi + t * (pj - pi))
    return out


def _dedup_ring(pts):
    out = []
    for p in pts:
        if not out or np.abs(p - out[-1]).max() > 1e-10:
            out.append(p)
    if len(out) > 1 and np.abs(out[0] - out[-1]).max() <= 1e-10:
        out.pop()
    ring = []
    m = len(out)
    for i in range(m):
        a, b, c = out[(i - 1) % m], out[i], out[(i + 1) % m]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) > 1e-12:
            ring.append(b)
    return ring


def _discrete_result(poly, lines, depth) -> TilingResult:
    c_klein = np.asarray(poly.interior_point, dtype=float)
    pts = [np.asarray(v, dtype=float) for v in poly.klein_vertices]
    for nrm in lines:
        def h(p, nrm=nrm):
            return nrm[0] * p[0] + nrm[1] * p[1] - nrm[2]

        side = 1.0 if h(c_klein) > 0 else -1.0
        pts = _clip_halfplane(pts, h, side)
        if len(pts) < 3:
            break
    ring = _dedup_ring(pts)
    tile = LabeledPolygon.from_vertices([tuple(p) for p in ring], name="tile")
    orders = []
    ok = True
    for a in P.measure_angles(tile):
        q = round(math.pi / a)
        if q < 2 or abs(a - math.pi / q) > _ANGLE_SNAP:
            ok = False
            orders.append(0)
        else:
            orders.append(q)
    ratio = poly.area / tile.area
    tiles_in_p = int(round(ratio))
    if abs(ratio - tiles_in_p) > 1e-6:
        ok = False
    vertex_orders = _sector_orders(poly, lines)
    vertex_even = all(q > 0 and q % 2 == 0 for q in vertex_orders)
    return TilingResult(
        status="discrete" if ok else "budget_exhausted",
        depth=depth,
        lines=tuple(map(tuple, lines)),
        tile=tile,
        triangle=tile.n == 3,
        tiles_in_p=tiles_in_p,
        tile_orders=tuple(orders),
        vertex_orders=tuple(vertex_orders),
        vertex_even=vertex_even,
        witness=None if ok else "tile failed submultiple or cover checks",
    )


def _sector_orders(poly, lines):
    """pi / (tile sector angle) at each polygon vertex, 0 when not integral.

    Lines through a vertex split its interior angle into equal sectors
    when the group is an honest reflection group; the sector order is
    read off by counting the lines whose direction enters the open
    angle cone.
    """
    n = poly.n
    out = []
    for i, v in enumerate(poly.vertices):
        alpha = poly.angle_at_vertex(i).numeric
        u_prev = K.tangent_toward(v, poly.vertices[(i - 1) % n])
        u_next = K.tangent_toward(v, poly.vertices[(i + 1) % n])
        frame = K._frame_at(v)
        finv = K.MINKOWSKI_J @ frame.T @ K.MINKOWSKI_J

        def bearing(u):
            w = finv @ u
            return math.atan2(w[1], w[0])

        phi0 = bearing(u_next)
        span = (bearing(u_prev) - phi0) % (2.0 * math.pi)
        if abs(span - alpha) > 1e-6:
            # cone opens the other way around
            phi0 = bearing(u_prev)
            span = alpha
        crossing = 0
        for nrm in lines:
            g = K.HGeodesic(np.asarray(nrm))
            if abs(K.signed_distance(v, g)) > 1e-8:
                continue
            t = K.geodesic_tangent(g, v)
            for tt in (t, -t):
                rel = (bearing(tt) - phi0) % (2.0 * math.pi)
                if 1e-9 < rel < span - 1e-9:
                    crossing += 1
                    break
        sector = alpha / (crossing + 1)
        q = round(math.pi / sector)
        out.append(q if q >= 2 and abs(sector - math.pi / q) < 1e-6 else 0)
    return out


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class RigidityVerdict:
    """verdict is "rigid", "flexible", or "unknown".

    Rigid verdicts carry the deciding reason; flexible ones carry the
    tile and the deformation dimension (tile side count minus three).
    Unknown carries the budget diagnostics of the closure run.
    """

    verdict: str
    reason: Optional[str] = None
    tile: Optional[LabeledPolygon] = None
    deformation_dim: Optional[int] = None
    budget_report: Optional[dict] = None

    def to_json_dict(self):
        out = {"verdict": self.verdict}
        if self.reason is not None:
            out["reason"] = self.reason
        if self.deformation_dim is not None:
            out["deformation_dim"] = int(self.deformation_dim)
        if self.tile is not None:
            out["tile_sides"] = int(self.tile.n)
        if self.budget_report is not None:
            out["budget_report"] = self.budget_report
        return out


def classify(poly: LabeledPolygon, budget=None) -> RigidityVerdict:
    """Billiard-rigidity verdict for a polygon.

    Cascade: irrational angle -> rigid; a triangle with all angles
    integral submultiples of pi is its own triangular tile -> rigid;
    all angles even submultiples (n >= 4) -> flexible with the polygon
    as tile; no angle an even submultiple -> rigid; mixed cases run the
    reflection closure, whose verdicts map to rigid (indiscrete group
    or triangular tile), flexible (non-triangular tile, even sectors at
    the polygon's vertices), or unknown.
    """
    kinds = [a.classify()[0] for a in poly.angles]
    if P.IRRATIONAL in kinds:
        return RigidityVerdict("rigid", reason="irrational_angle")
    if poly.n == 3:
        if all(k in (P.EVEN_SUBMULTIPLE, P.ODD_SUBMULTIPLE) for k in kinds):
            return RigidityVerdict("rigid", reason="triangle_tile", tile=poly)
    else:
        if all(k == P.EVEN_SUBMULTIPLE for k in kinds):
            return RigidityVerdict(
                "flexible", tile=poly, deformation_dim=poly.n - 3
            )
        if not any(k == P.EVEN_SUBMULTIPLE for k in kinds):
            return RigidityVerdict("rigid", reason="no_even_submultiple")
    res = tiling_closure(poly, budget)
    if res.status == "indiscrete":
        return RigidityVerdict("rigid", reason="indiscrete_group")
    if res.status == "discrete":
        if res.triangle:
            return RigidityVerdict("rigid", reason="triangle_tile", tile=res.tile)
        if res.vertex_even and res.tile.n >= 4:
            return RigidityVerdict(
                "flexible", tile=res.tile, deformation_dim=res.tile.n - 3
            )
    return RigidityVerdict(
        "unknown",
        budget_report={
            "status": res.status,
            "depth": res.depth,
            "lines_found": len(res.lines),
        },
    )


# ---------------------------------------------------------------------------
# bounce grammar


@dataclass(frozen=True)
class GrammarSpec:
    """Run-length bounds k_j for adjacent side pairs (j, j+1).

    Defined when every interior angle is an integral submultiple pi/k;
    the angle between sides j and j+1 contributes k_j.
    """

    k: tuple

    @classmethod
    def from_polygon(cls, poly: LabeledPolygon) -> "GrammarSpec":
        ks = []
        for a in poly.angles:
            pq = a.declared or P.reconstruct_fraction(a.numeric)
            if pq is None:
                raise InvalidData("grammar needs rational angles")
            p, q = pq
            if p != 1:
                raise InvalidData(
                    f"grammar undefined for angle {p}pi/{q}: not pi/k"
                )
            ks.append(q)
        if any(q < 2 for q in ks):
            raise InvalidData("compact polygon angles must be below pi")
        return cls(tuple(ks))


@dataclass(frozen=True)
class GrammarVerdict:
    admissible: bool
    position: Optional[int] = None
    rule: Optional[str] = None


def _adjacent_pair(a, b, n):
    """Index j (1-based) with {a, b} = {j, j+1 mod n}, else None."""
    if b == a % n + 1:
        return a
    if a == b % n + 1:
        return b
    return None


def grammar_check(spec: GrammarSpec, word) -> GrammarVerdict:
    """Necessary admissibility conditions for a bounce word.

    Forbidden on an immediate repeat, or on an alternating run between
    adjacent labels j, j+1 longer than k_j. Position is 1-based and
    points at the first letter that makes the violation definite.
    """
    w = [int(b) for b in word]
    n = len(spec.k)
    for b in w:
        if not 1 <= b <= n:
            raise InvalidData(f"side label {b} outside 1..{n}")
    for i in range(1, len(w)):
        if w[i] == w[i - 1]:
            return GrammarVerdict(False, position=i + 1, rule="repeat")
    i = 0
    while i < len(w) - 1:
        j = _adjacent_pair(w[i], w[i + 1], n)
        if j is None:
            i += 1
            continue
        end = i + 1
        while end + 1 < len(w) and w[end + 1] == w[end - 1]:
            end += 1
        kj = spec.k[j - 1]
        if end - i + 1 > kj:
            return GrammarVerdict(False, position=i + kj + 1, rule="run")
        i = end
    return GrammarVerdict(True)


# ---------------------------------------------------------------------------
# polygon comparison


@dataclass(frozen=True)
class CompareConfig:
    samples: int = 200
    word_len: int = 40
    seed: int = 0
    diagonal_len: int = 6


@dataclass(frozen=True)
class ComparisonReport:
    """Cross-realizability evidence for two polygons.

    directions maps "1->2" and "2->1" to mutual / one-sided / grazing
    counts; one-sided words are those a polygon realizes but the other
    refuses. diagonals holds the generalized-diagonal inventory
    comparison. Deterministic for a fixed config.
    """

    config: CompareConfig
    directions: dict
    one_sided_total: int
    first_distinguishing: Optional[dict]
    diagonals: dict

    def to_json_dict(self):
        out = {
            "samples": self.config.samples,
            "word_len": self.config.word_len,
            "seed": self.config.seed,
            "diagonal_len": self.config.diagonal_len,
            "directions": {
                d: {k: int(v) for k, v in row.items()}
                for d, row in sorted(self.directions.items())
            },
            "one_sided_total": int(self.one_sided_total),
            "diagonals": {
                "equal": bool(self.diagonals["equal"]),
                "count_1": int(self.diagonals["count_1"]),
                "count_2": int(self.diagonals["count_2"]),
            },
        }
        if self.first_distinguishing is not None:
            out["first_distinguishing"] = {
                "word": list(self.first_distinguishing["word"]),
                "direction": self.first_distinguishing["direction"],
                "reason": self.first_distinguishing["reason"],
            }
        diff = self.diagonals.get("first_difference")
        if diff is not None:
            out["diagonals"]["first_difference"] = {
                "word": list(diff["word"]),
                "only_in": diff["only_in"],
            }
        return out


def sample_bounce_words(poly: LabeledPolygon, count, length, rng):
    """Non-grazing bounce words with their per-gate crossing fractions.

    Starts are Gaussian jitters of the interior base point, bearings
    uniform; grazing and short runs are discarded. The fraction rows
    are exactly the arc parameters of the bounce events and seed
    realizability tests in other polygons.
    """
    kx, ky = poly.interior_point
    out = []
    attempts = 0
    cap = max(1, count) * 200
    while len(out) < count and attempts < cap:
        attempts += 1
        theta = rng.uniform(0.0, 2.0 * math.pi)
        off = rng.normal(scale=0.05, size=2)
        try:
            start = K.from_klein((kx + off[0], ky + off[1]))
            traj = B.simulate(poly, start, theta, length)
        except (InvalidData, NotInterior, HypbError):
            continue
        if traj.grazing or len(traj.events) < length:
            continue
        word = tuple(e.side_label for e in traj.events)
        fracs = np.array([e.arc_param for e in traj.events])
        out.append((word, fracs))
    if len(out) < count:
        raise HypbError(
            f"sampled only {len(out)}/{count} non-grazing words in {cap} tries"
        )
    return out


def compare(p1: LabeledPolygon, p2: LabeledPolygon, config=None) -> ComparisonReport:
    """Mutual-realizability report for two same-labeled polygons."""
    cfg = config or CompareConfig()
    if p1.n != p2.n:
        raise InvalidData("polygons must have the same number of sides")
    rng = np.random.default_rng(cfg.seed)
    batches = [
        ("1->2", sample_bounce_words(p1, cfg.samples, cfg.word_len, rng), p2),
        ("2->1", sample_bounce_words(p2, cfg.samples, cfg.word_len, rng), p1),
    ]
    directions = {}
    first = None
    one_total = 0
    for tag, batch, target in batches:
        mutual = one = grazing = 0
        for word, fracs in batch:
            r = U.realizable(target, word, hints=[fracs])
            if r.verdict == "yes":
                mutual += 1
            elif r.verdict == "grazing":
                grazing += 1
            else:
                one += 1
                if first is None:
                    first = {"word": word, "direction": tag, "reason": r.reason}
        directions[tag] = {
            "mutual": mutual,
            "one_sided": one,
            "grazing_discarded": grazing,
        }
        one_total += one
    d1 = U.enumerate_diagonals(p1, cfg.diagonal_len)
    d2 = U.enumerate_diagonals(p2, cfg.diagonal_len)
    s1, s2 = set(d1), set(d2)
    diff = None
    if s1 != s2:
        only = sorted(s1 ^ s2, key=lambda w: (len(w), w))
        diff = {"word": only[0], "only_in": "1" if only[0] in s1 else "2"}
    diagonals = {
        "equal": s1 == s2,
        "count_1": len(d1),
        "count_2": len(d2),
        "first_difference": diff,
    }
    return ComparisonReport(
        config=cfg,
        directions=directions,
        one_sided_total=one_total,
        first_distinguishing=first,
        diagonals=diagonals,
    )
