"""Corridor unfolding and bounce-word realizability.

Unfolding a polygon along a word b_1..b_m lays out m+1 reflected copies:
copy 0 is the polygon itself and copy i is copy i-1 reflected in its
side b_i. The shared sides of consecutive copies are the gates. A word
is realizable exactly when one geodesic chord crosses every gate
strictly, in order, leaving each copy through its gate and staying
inside the copies between crossings (corridors can overlap themselves,
so neither the order nor the containment comes for free).

Deep copies crowd exponentially close to the ideal boundary, and a
geodesic's k-th crossing depends on its starting data with sensitivity
growing like e^(k * leg length), so no fixed-precision chord description
can pin down deep crossings. A transversal is therefore represented by
its chain of per-gate crossing fractions, each living in that gate's own
copy frame, where the gate is literally a side of the base polygon at
unit scale. Local consistency of the chain (each crossing on the
geodesic through its two neighbors, neighbors carried across one gate by
the fixed local reflection) is a stable certificate: a chain with small
local residuals everywhere is shadowed by a true geodesic at comparable
distance, uniformly in the word length. Chains are computed by relaxing
each interior crossing onto the geodesic through its neighbors, a
contraction in negative curvature, and searched over the two free end
fractions, which parametrize all candidates. The strictness margin of a
crossing is the Euclidean Klein clearance of the gate endpoints from the
chord, measured in the gate's own frame.

The no side rests on the weak relaxation being a convex cone: an
oriented chord crosses gate k in the forward sense exactly when its
anchor-frame normal puts the gate's endpoints on prescribed sides (two
homogeneous half-space conditions, with signs alternating because
reflections reverse orientation), and forward crossings of consecutive
sides of one convex copy are automatically ordered. Sliding windows of
gates are clipped in double precision, conservatively widened, so
emptiness is trusted only at depths where accumulated transfer error
stays below the slack; a full-depth pass runs in software arbitrary
precision sized to the corridor's total expansion. An empty cone
certifies that no transversal exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from . import kernel as K
from . import planar
from .errors import BudgetExceeded, ImmediateRepeat, InvalidData
from .polygon import LabeledPolygon

# A crossing is strict when both gate endpoints clear the chord by
# EPS_GATE in the gate's frame; margins between GRAZE_FLOOR and EPS_GATE
# are reported as grazing rather than forced into yes or no.
EPS_GATE = 1e-9
GRAZE_FLOOR = 1e-12

# Diagonal enumeration is limited to words of this length.
MAX_ENUM_LEN = 12

# Weak-cone windows in double precision: transferring a constraint row
# across a gate multiplies its rounding error by that reflection's
# norm, i.e. the row loses lognorm decimal digits per step. A window
# extends only while the accumulated loss keeps the error a factor ten
# under the WEAK_TOL widening that absorbs it; WINDOW_DEPTH caps the
# gate count for cheap polygons.
WINDOW_DEPTH = 14
_WINDOW_LOG_BUDGET = 6.0
WEAK_TOL = 1e-9

# Direct chord-normal pulls (fraction extraction) run in doubles while
# the accumulated decimal loss stays under this budget; deeper
# corridors switch to mpmath at a precision sized the same way. The
# budget is looser than the window one because pulled fractions only
# seed a relaxation that re-derives them.
_PULL_LOG_BUDGET = 6.5

_RES_TOL = 1e-9  # max chain straightness residual accepted for a verdict
_LEG_TOL = 1e-10  # pad when testing legs against non-gate sides
_END_PAD = 1e-9  # pad around diagonal endpoints in end-leg tests
_COLD_SWEEPS = 2000
_WARM_SWEEPS = 240
_FINAL_SWEEPS = 4000
_SEARCH_TOL = 5e-10
_FINAL_TOL = 1e-13
_DEGENERATE_Q = 1e-24  # reject chord normals with smaller Minkowski norm
_SNAP_TOL = 1e-7  # witness walk: largest per-gate correction tolerated
_WITNESS_RES = 1e-11  # witness chains must be this straight
_CONSIST_TOL = 1e-8  # chord / params agreement with the witness chain
_EARLY_YES = 1e-6  # margin at which the search stops polishing
_GRID = (0.12, 0.31, 0.5, 0.69, 0.88)
_TOP_SEEDS = 3
_POLISH_ROUNDS = 26
_PATTERN = np.array(
    [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]],
    dtype=float,
)
_J = np.array([1.0, 1.0, -1.0])


def _mdot(a, b):
    """Rowwise Minkowski pairing."""
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2]


def _jcross(a, b):
    """Rowwise J(a x b): line through two points, or meet of two lines."""
    # spelled out componentwise; np.cross's axis shuffling dominates the
    # relaxation inner loop otherwise
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack(
        (ay * bz - az * by, az * bx - ax * bz, ay * bx - ax * by), axis=-1
    )


def _unit_space(a):
    """Normalize spacelike rows to unit norm; returns (rows, validity)."""
    q = _mdot(a, a)
    good = q > _DEGENERATE_Q
    s = np.sqrt(np.where(good, q, 1.0))
    return a / s[..., None], good


def _unit_time(a):
    """Normalize timelike rows onto the upper hyperboloid sheet."""
    q = -_mdot(a, a)
    s = np.sqrt(np.clip(q, 1e-300, None))
    out = a / s[..., None]
    flip = out[..., 2] < 0
    out[flip] = -out[flip]
    return out


def _rescale_rows(a):
    """Divide rows by their max magnitude; projective overflow guard."""
    s = np.abs(a).max(axis=-1)
    return a / np.clip(s, 1e-300, None)[..., None]


def _leg_len(p, q):
    """Hyperbolic distance between hyperboloid points, stable for small gaps."""
    d = q - p
    return 2.0 * math.asinh(0.5 * math.sqrt(max(float(_mdot(d, d)), 0.0)))


class _SideData:
    """Per-side numeric caches shared by every corridor over one polygon."""

    def __init__(self, poly: LabeledPolygon):
        n = poly.n
        verts = poly.vertices
        self.n = n
        self.vh = np.array([v.v for v in verts])
        self.jv = self.vh * _J
        self.ns = np.array([poly.side(k).n for k in range(n)])
        self.jns = self.ns * _J
        self.ka = np.array([verts[k].klein() for k in range(n)])
        self.kb = np.array([verts[(k + 1) % n].klein() for k in range(n)])
        self.refl = np.array([K.reflect(poly.side(k)).m for k in range(n)])
        self.slen = np.empty(n)
        t0 = []
        for k in range(n):
            a, b = verts[k], verts[(k + 1) % n]
            t0.append(K.tangent_toward(a, b))
            self.slen[k] = K.distance(a, b)
        self.t0 = np.array(t0)
        # log10 of each reflection's operator norm, for precision budgets
        self.lognorm = np.array(
            [math.log10(np.linalg.norm(self.refl[k], 2)) for k in range(n)]
        )
        turns = [
            planar.cross2(
                self.kb[k] - self.ka[k],
                self.kb[(k + 1) % n] - self.ka[(k + 1) % n],
            )
            for k in range(n)
        ]
        self.convex = all(t > 0 for t in turns) or all(t < 0 for t in turns)

    def lift(self, side_idx, f):
        """Hyperboloid rows at arc-length fractions f along sides."""
        side_idx = np.asarray(side_idx)
        f = np.asarray(f, dtype=float)
        s = f * self.slen[side_idx]
        return (
            self.vh[side_idx] * np.cosh(s)[..., None]
            + self.t0[side_idx] * np.sinh(s)[..., None]
        )

    def frac_of(self, side_idx, pts):
        """Arc-length fractions of on-side points; inverse of lift."""
        side_idx = np.asarray(side_idx)
        return np.arcsinh(_mdot(pts, self.t0[side_idx])) / self.slen[side_idx]


def _validate_word(poly: LabeledPolygon, word) -> list:
    steps = []
    prev = None
    for i, b in enumerate(word):
        b = int(b)
        if not 1 <= b <= poly.n:
            raise InvalidData(f"side label {b} outside 1..{poly.n}")
        if prev == b:
            raise ImmediateRepeat(i + 1)
        steps.append(b - 1)
        prev = b
    return steps


def _build(poly: LabeledPolygon, word):
    """Side data, 0-based steps, copy isometries, and placement matrices."""
    steps = _validate_word(poly, word)
    sides = _SideData(poly)
    mats = [np.eye(3)]
    for j in steps:
        # g_i = g_{i-1} o R_{b_i}: reflecting in the g_{i-1}-image of the
        # side is the same map, but this form only ever multiplies by
        # unit-scale factors on the right
        mats.append(mats[-1] @ sides.refl[j])
    copies = [K.HIsometry(m, -1 if k % 2 else 1, 0) for k, m in enumerate(mats)]
    return steps, sides, copies, mats


@dataclass(frozen=True)
class Corridor:
    """Unfolded copies along a word, with the shared gate sides.

    copies[i] maps the base polygon onto copy i; gates[k] is the common
    side of copies k and k+1 as a pair of HPoints; vertices0 and
    verticesM are the vertex rings of the two end copies.
    """

    word: tuple
    copies: tuple
    gates: tuple
    vertices0: tuple
    verticesM: tuple

    @property
    def m(self) -> int:
        return len(self.gates)


def unfold(poly: LabeledPolygon, word) -> Corridor:
    """Lay out the corridor of a bounce word.

    Raises ImmediateRepeat on a doubled letter and InvalidData on labels
    outside 1..n. The empty word gives a single copy and no gates.
    """
    steps, sides, copies, mats = _build(poly, word)
    gates = []
    for k, j in enumerate(steps):
        # images of deep copies have coordinates far beyond what the
        # sheet test can check, but they are timelike by construction
        a = K.HPoint.unchecked(mats[k] @ sides.vh[j])
        b = K.HPoint.unchecked(mats[k] @ sides.vh[(j + 1) % sides.n])
        gates.append((a, b))
    v0 = tuple(K.HPoint(v) for v in sides.vh)
    vm = tuple(K.HPoint.unchecked(mats[-1] @ v) for v in sides.vh)
    corr = Corridor(tuple(int(b) for b in word), tuple(copies), tuple(gates), v0, vm)
    object.__setattr__(corr, "_steps", tuple(steps))
    object.__setattr__(corr, "_sides", sides)
    return corr


# ---------------------------------------------------------------------------
# chains of crossing fractions


def _relax(sd: _SideData, steps, f, *, start=None, end=None, sweeps, tol):
    """Pull each crossing onto the geodesic through its neighbors.

    f has shape (B, m); neighbors are carried across one gate by that
    gate's reflection, so every update runs at unit scale. With start /
    end anchor rows (diagonal mode) the end crossings are relaxed
    against the anchors; otherwise f[:, 0] and f[:, -1] stay fixed.
    Red-black sweeps of a contraction, so the fixed point is the genuine
    chord chain through the held data.
    """
    stepsA = np.asarray(steps)
    m = len(stepsA)
    f = np.array(f, dtype=float)
    if m == 0:
        return f
    Rs = sd.refl[stepsA]
    anchored = start is not None
    lo = 0 if anchored else 1
    hi = m if anchored else m - 1
    base = np.arange(lo, hi)
    if len(base) == 0:
        return f
    groups = [base[base % 2 == 1], base[base % 2 == 0]]
    pts = sd.lift(stepsA, f)
    for _ in range(sweeps):
        delta = 0.0
        for idx in groups:
            if len(idx) == 0:
                continue
            aa = np.empty((f.shape[0], len(idx), 3))
            bb = np.empty_like(aa)
            inner = idx > 0
            if inner.any():
                ii = idx[inner]
                aa[:, inner] = np.einsum("nij,bnj->bni", Rs[ii - 1], pts[:, ii - 1])
            if anchored and not inner.all():
                aa[:, ~inner] = start[:, None, :]
            outer = idx < m - 1
            if outer.any():
                ii = idx[outer]
                bb[:, outer] = np.einsum("nij,bnj->bni", Rs[ii], pts[:, ii + 1])
            if anchored and not outer.all():
                bb[:, ~outer] = end[:, None, :]
            nrm, good = _unit_space(_jcross(aa, bb))
            x = _unit_time(_jcross(nrm, sd.ns[stepsA[idx]]))
            fn = np.clip(sd.frac_of(stepsA[idx], x), 0.0, 1.0)
            fn = np.where(good, fn, f[:, idx])
            diff = np.abs(fn - f[:, idx])
            finite = np.isfinite(diff)
            if finite.any():
                delta = max(delta, float(diff[finite].max()))
            f[:, idx] = fn
            pts[:, idx] = sd.lift(stepsA[idx], fn)
        if delta < tol:
            break
    return f


def _chain_residuals(sd: _SideData, steps, f, *, start=None, end=None):
    """Signed straightness residuals of chains at their junctions.

    Shape (B, m-2) without anchors (interior junctions only; the end
    fractions are free chart parameters), (B, m) with them. Junctions
    whose neighbor chord degenerates come back NaN.
    """
    stepsA = np.asarray(steps)
    m = len(stepsA)
    B = f.shape[0]
    anchored = start is not None
    lo = 0 if anchored else 1
    hi = m if anchored else m - 1
    if hi <= lo:
        return np.zeros((B, 0))
    Rs = sd.refl[stepsA]
    pts = sd.lift(stepsA, f)
    ks = np.arange(lo, hi)
    na = np.empty((B, len(ks), 3))
    nb = np.empty_like(na)
    inner = ks > 0
    if inner.any():
        ii = ks[inner]
        na[:, inner] = np.einsum("nij,bnj->bni", Rs[ii - 1], pts[:, ii - 1])
    if anchored and not inner.all():
        na[:, ~inner] = start[:, None, :]
    outer = ks < m - 1
    if outer.any():
        ii = ks[outer]
        nb[:, outer] = np.einsum("nij,bnj->bni", Rs[ii], pts[:, ii + 1])
    if anchored and not outer.all():
        nb[:, ~outer] = end[:, None, :]
    nn, good = _unit_space(_jcross(na, nb))
    r = _mdot(pts[:, lo:hi], nn)
    return np.where(good, r, np.nan)


def _newton_chain(sd: _SideData, steps, f, *, start=None, end=None,
                  iters=24, tol=_FINAL_TOL):
    """Straighten chains by damped Newton on the junction residuals.

    Each junction couples three consecutive fractions, so the Jacobian
    is tridiagonal and three-coloring the columns recovers all of it
    from three extra residual passes. This closes out the stiff chains
    the sweep relaxation cannot: a crossing pair hugging a vertex makes
    legs short and the sweep contraction 1 - O(leg^2), while Newton is
    insensitive to it. Rows that stop improving keep their best state.
    """
    stepsA = np.asarray(steps)
    m = len(stepsA)
    anchored = start is not None
    lo = 0 if anchored else 1
    hi = m if anchored else m - 1
    neq = hi - lo
    f = np.array(f, dtype=float)
    if neq <= 0:
        return f
    B = f.shape[0]
    # column reached by each (color, junction): the unique perturbed
    # fraction among the junction's three, or -1
    colof = np.full((3, neq), -1)
    for c in range(3):
        for k in range(lo, hi):
            for j in (k - 1, k, k + 1):
                if lo <= j < hi and j % 3 == c:
                    colof[c, k - lo] = j - lo
    h = 1e-7
    eye = np.eye(neq) * 1e-13
    for _ in range(iters):
        r0 = _chain_residuals(sd, steps, f, start=start, end=end)
        worst = np.abs(r0).max(axis=1)
        if not np.isfinite(worst).any() or np.nanmax(worst) < tol:
            break
        J = np.zeros((B, neq, neq))
        unknowns = np.arange(lo, hi)
        for c in range(3):
            cols = colof[c]
            rows = np.nonzero(cols >= 0)[0]
            if len(rows) == 0:
                continue
            fp = f.copy()
            fp[:, unknowns[unknowns % 3 == c]] += h
            rc = _chain_residuals(sd, steps, fp, start=start, end=end)
            dr = (rc - r0) / h
            J[:, rows, cols[rows]] = dr[:, rows]
        try:
            step = np.linalg.solve(
                J + eye, np.nan_to_num(r0, nan=0.0)[..., None]
            )[..., 0]
        except np.linalg.LinAlgError:
            break
        step = np.clip(step, -0.2, 0.2)
        improved = False
        damp = 1.0
        for _ in range(3):
            fn = f.copy()
            fn[:, lo:hi] = np.clip(f[:, lo:hi] - damp * step, 1e-12, 1.0 - 1e-12)
            rn = _chain_residuals(sd, steps, fn, start=start, end=end)
            wn = np.abs(rn).max(axis=1)
            better = np.nan_to_num(wn, nan=np.inf) <= np.nan_to_num(worst, nan=np.inf)
            if better.any():
                f[better] = fn[better]
                improved = True
                break
            damp *= 0.5
        if not improved:
            break
    return f


def _eval_chains(sd: _SideData, steps, f, *, start=None, end=None):
    """Margins and residuals of chains, as shape-(B,) arrays.

    Returns (margin, residual, ok). ok requires every gate crossed in
    the forward sense: the local travel-oriented chord normal must put
    the gate's tail vertex on its right and head vertex on its left.
    margin is the least Klein clearance of a gate endpoint from the
    local chord, residual the worst straightness defect; chains failing
    the side tests get margin -inf.
    """
    stepsA = np.asarray(steps)
    m = len(stepsA)
    B = f.shape[0]
    Rs = sd.refl[stepsA]
    pts = sd.lift(stepsA, f)
    anchored = start is not None
    margin = np.full(B, np.inf)
    residual = np.zeros(B)
    ok = np.ones(B, dtype=bool)
    lo = 0 if anchored else 1
    hi = m if anchored else m - 1
    for k in range(m):
        j = int(stepsA[k])
        if k < m - 1:
            a = pts[:, k]
            b = np.einsum("ij,bj->bi", Rs[k], pts[:, k + 1])
        elif m >= 2:
            a = np.einsum("ij,bj->bi", Rs[k - 1], pts[:, k - 1])
            b = pts[:, k]
        else:
            a = start
            b = end
        nrm, good = _unit_space(_jcross(a, b))
        ok &= good
        ok &= (nrm @ sd.jv[j] <= 0.0) & (nrm @ sd.jv[(j + 1) % sd.n] >= 0.0)
        ak = a[:, :2] / a[:, 2:]
        bk = b[:, :2] / b[:, 2:]
        seg = bk - ak
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        ok &= seg_len > 1e-300
        seg_len = np.clip(seg_len, 1e-300, None)
        for v in (sd.ka[j], sd.kb[j]):
            rel = v[None, :] - ak
            clr = np.abs(seg[:, 0] * rel[:, 1] - seg[:, 1] * rel[:, 0]) / seg_len
            margin = np.minimum(margin, clr)
        if lo <= k < hi:
            if k > 0:
                na = np.einsum("ij,bj->bi", Rs[k - 1], pts[:, k - 1])
            else:
                na = start
            if k < m - 1:
                nb = np.einsum("ij,bj->bi", Rs[k], pts[:, k + 1])
            else:
                nb = end
            nn, good2 = _unit_space(_jcross(na, nb))
            ok &= good2
            residual = np.maximum(residual, np.abs(_mdot(pts[:, k], nn)))
    margin = np.where(ok, margin, -np.inf)
    return margin, residual, ok


def _legs_clear(sd: _SideData, steps, frow, *, start=None, end=None):
    """Check one chain's legs against the non-gate sides of each copy.

    A convex copy cannot be escaped between two boundary points, so
    everything passes outright for convex polygons. Otherwise each leg
    is tested in the frame of the copy containing it; diagonal end legs
    are padded around their end vertices, which sit on two sides.
    """
    if sd.convex:
        return True
    stepsA = np.asarray(steps)
    m = len(stepsA)
    pts = sd.lift(stepsA, frow[None, :])[0] if m else np.empty((0, 3))

    def blocked(p, q, open_sides, pad):
        pk, qk = p[:2] / p[2], q[:2] / q[2]
        for jj in range(sd.n):
            if jj in open_sides:
                continue
            cut = planar.seg_intersection(pk, qk, sd.ka[jj], sd.kb[jj], tol=0.0)
            if cut is not None and pad < cut[0] < 1.0 - pad:
                return True
        return False

    for k in range(m - 1):
        j0 = int(stepsA[k])
        j1 = int(stepsA[k + 1])
        # leg between crossings k and k+1, in the frame of copy k+1
        if blocked(sd.refl[j0] @ pts[k], pts[k + 1], {j0, j1}, _LEG_TOL):
            return False
    if start is not None and m >= 1:
        if blocked(start, pts[0], {int(stepsA[0])}, _END_PAD):
            return False
        R = sd.refl[int(stepsA[-1])]
        if blocked(R @ end, R @ pts[-1], {int(stepsA[-1])}, _END_PAD):
            return False
    return True


# ---------------------------------------------------------------------------
# weak-cone certificates


def _chart_square():
    return [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]


def _clip(poly, a, b, c):
    """Keep the part of a convex chart polygon with a*u + b*v + c >= 0."""
    if not poly:
        return poly
    vals = [a * u + b * v + c for (u, v) in poly]
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        vi, vj = vals[i], vals[j]
        if vi >= 0:
            out.append(poly[i])
        if (vi >= 0) != (vj >= 0):
            t = vi / (vi - vj)
            out.append(
                (
                    poly[i][0] + t * (poly[j][0] - poly[i][0]),
                    poly[i][1] + t * (poly[j][1] - poly[i][1]),
                )
            )
    return out


# normals are scanned on all six faces of the sup-norm cube
_AXES = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


def _cone_step(charts, row, slack):
    """Clip all six chart polygons by row . n + slack >= 0."""
    alive = False
    for ci, (cax, pax, qax) in enumerate(_AXES):
        for si, sg in enumerate((1.0, -1.0)):
            idx = ci * 2 + si
            if charts[idx]:
                charts[idx] = _clip(
                    charts[idx], row[pax], row[qax], sg * row[cax] + slack
                )
                alive = alive or bool(charts[idx])
    return alive


def _window_empty(sd: _SideData, steps, a, b) -> bool:
    """Double-precision emptiness of the weak cone for gates a..b-1.

    Sound only when the summed lognorm of the reflections inside the
    window stays under _WINDOW_LOG_BUDGET, so that transfer error is
    below the conservative WEAK_TOL widening of every half-space.
    Callers size windows accordingly.
    """
    charts = [_chart_square() for _ in range(6)]
    M = np.eye(3)
    for k in range(a, b):
        j = steps[k]
        s = 1.0 if (k - a) % 2 == 0 else -1.0
        va = M @ sd.vh[j]
        vb = M @ sd.vh[(j + 1) % sd.n]
        for row in ((-s) * (va * _J), s * (vb * _J)):
            row = row / np.abs(row).max()
            slack = WEAK_TOL * (abs(row[0]) + abs(row[1]) + abs(row[2]))
            if not _cone_step(charts, row, slack):
                return True
        M = M @ sd.refl[j]
        M = M / np.abs(M).max()
    return False


def _weak_scan(sd: _SideData, steps):
    """Sliding-window cone scan; returns an empty window (a, b) or None.

    Each window is grown gate by gate while the accumulated decimal
    loss of row transfers fits the double-precision budget, then the
    start advances by half the achieved depth so consecutive windows
    overlap.
    """
    m = len(steps)
    a = 0
    while a < m - 1:
        lg = 0.0
        b = a + 1
        while b < m and b - a < WINDOW_DEPTH:
            step = sd.lognorm[steps[b - 1]]
            if lg + step > _WINDOW_LOG_BUDGET:
                break
            lg += step
            b += 1
        if b - a >= 2 and _window_empty(sd, steps, a, b):
            return a, b
        if b >= m:
            break
        a += max(1, (b - a) // 2)
    return None


def _weak_full(sd: _SideData, steps):
    """Arbitrary-precision full-depth cone test.

    Precision is sized to the corridor's total expansion so the clipped
    charts stay faithful at any length. The slack makes emptiness a
    certificate; a surviving chart only means the weak cone could not be
    refuted. Returns (feasible, gates processed).
    """
    total = sum(sd.lognorm[j] for j in steps)
    dps = 40 + int(1.2 * total)
    with mpmath.workdps(dps):
        tol = mpmath.mpf(10) ** (15 - dps)
        charts = [
            [tuple(map(mpmath.mpf, p)) for p in _chart_square()] for _ in range(6)
        ]
        M = mpmath.eye(3)
        for k, j in enumerate(steps):
            s = 1 if k % 2 == 0 else -1
            for vv, sgn in ((sd.vh[j], -s), (sd.vh[(j + 1) % sd.n], s)):
                w = [mpmath.mpf(float(x)) for x in vv]
                row = [
                    sgn * (M[0, 0] * w[0] + M[0, 1] * w[1] + M[0, 2] * w[2]),
                    sgn * (M[1, 0] * w[0] + M[1, 1] * w[1] + M[1, 2] * w[2]),
                    -sgn * (M[2, 0] * w[0] + M[2, 1] * w[1] + M[2, 2] * w[2]),
                ]
                big = max(abs(row[0]), abs(row[1]), abs(row[2]))
                row = [r / big for r in row]
                slack = tol * (abs(row[0]) + abs(row[1]) + abs(row[2]))
                if not _cone_step(charts, row, slack):
                    return False, k + 1
            M = M * mpmath.matrix(sd.refl[j].tolist())
        return True, len(steps)


# ---------------------------------------------------------------------------
# witnesses


@dataclass(frozen=True)
class TransversalWitness:
    """Certificate of realizability: a chord and where it crosses.

    chord holds the ideal Klein endpoints of the geodesic; the crossing
    parameters are hyperbolic arc positions along it measured from the
    first gate crossing, strictly increasing; margin is the least Klein
    clearance of any gate endpoint, taken in that gate's frame.

    gate_fracs are the crossing fractions along each gate in its own
    frame. They repeat what chord and crossing_params already determine,
    but in a representation that stays checkable: double-precision chord
    data blurs by e^(k * leg) at the k-th crossing, so deep witnesses
    can only be validated through their per-gate chain.
    """

    chord: K.KleinChord
    crossing_params: tuple
    margin: float
    gate_fracs: tuple | None = None

    def to_json_dict(self):
        out = {
            "chord": {
                "a": [float(self.chord.a[0]), float(self.chord.a[1])],
                "b": [float(self.chord.b[0]), float(self.chord.b[1])],
            },
            "crossing_params": [float(t) for t in self.crossing_params],
            "margin": float(self.margin),
        }
        if self.gate_fracs is not None:
            out["gate_fracs"] = [float(x) for x in self.gate_fracs]
        return out


@dataclass(frozen=True)
class Realizability:
    """Outcome of the transversal search for one word."""

    verdict: str  # "yes" | "no" | "grazing"
    witness: TransversalWitness | None
    margin: float
    reason: str | None = None

    @property
    def yes(self) -> bool:
        return self.verdict == "yes"

    def to_json_dict(self):
        out = {"verdict": self.verdict}
        if self.margin is not None and math.isfinite(self.margin):
            out["margin"] = float(self.margin)
        if self.witness is not None:
            out["witness"] = self.witness.to_json_dict()
        if self.reason:
            out["reason"] = self.reason
        return out


def _as_vec3(p):
    if isinstance(p, K.HPoint):
        return p.v
    a = np.asarray(p, dtype=float)
    if a.shape == (2,):
        s = 1.0 - a[0] ** 2 - a[1] ** 2
        if s <= 0:
            raise InvalidData("Klein point outside the unit disk")
        r = 1.0 / math.sqrt(s)
        return np.array([a[0] * r, a[1] * r, r])
    if a.shape == (3,):
        return a
    raise InvalidData("expected an HPoint, Klein pair, or 3-vector")


def _chord_fracs(sd: _SideData, steps, va, vb):
    """Fraction row of the frame-0 chord spanned by points va, vb.

    Doubles while the pull's decimal loss fits the budget, mpmath
    beyond it; None when the two points do not span a chord. NaN
    entries mark gates whose lines the chord misses.
    """
    if _pull_loss(sd, steps) <= _PULL_LOG_BUDGET:
        nrm, good = _unit_space(_jcross(va[None, :], vb[None, :]))
        if not good[0]:
            return None
        return _pull_fracs_rows(sd, steps, nrm)[0]
    with mpmath.workdps(_mp_dps(sd, steps)):
        Rs = {j: mpmath.matrix(sd.refl[j].tolist()) for j in set(steps)}
        u = [mpmath.mpf(float(c)) for c in va]
        w = [mpmath.mpf(float(c)) for c in vb]
        n = _mp_jcross(u, w)
        if _mp_mdot(n, n) <= 0:
            return None
        return np.array(_mp_pull_chain(sd, steps, n, Rs))


def _hint_fracs(sd: _SideData, steps, hints):
    """Crossing-fraction chains read off hints, one row per usable hint.

    Three hint shapes are understood: a witness for the same word
    (possibly of a deformed polygon) contributes its gate fractions
    directly; a bare sequence of m scalars is taken as a fraction row
    as-is; a pair of points contributes the fractions of the chord they
    span. All rows are only seeds for the relaxation, which repairs any
    drift or deformation mismatch.
    """
    rows = []
    m = len(steps)

    def add(row):
        rows.append(np.clip(np.nan_to_num(row, nan=0.5), 0.0, 1.0))

    for hint in hints:
        if isinstance(hint, TransversalWitness):
            if hint.gate_fracs is not None and len(hint.gate_fracs) == m:
                add(np.asarray(hint.gate_fracs, dtype=float))
            elif hint.chord is not None:
                va = _rescale_rows(_as_vec3(hint.chord.a)[None, :])[0]
                vb = _rescale_rows(_as_vec3(hint.chord.b)[None, :])[0]
                row = _chord_fracs(sd, steps, va, vb)
                if row is not None:
                    add(row)
            continue
        try:
            arr = np.asarray(hint, dtype=float)
        except (TypeError, ValueError):
            arr = None
        if arr is not None and arr.ndim == 1 and arr.size == m:
            add(arr)
            continue
        a, b = hint
        va = _rescale_rows(_as_vec3(a)[None, :])[0]
        vb = _rescale_rows(_as_vec3(b)[None, :])[0]
        row = _chord_fracs(sd, steps, va, vb)
        if row is not None:
            add(row)
    return rows


def _normal_chord_points(sd: _SideData, j):
    """Two points spanning the chord through side j's midpoint, headed out."""
    mid = sd.lift(np.array([j]), np.array([0.5]))[0]
    out_dir = -sd.ns[j]
    a = mid * math.cosh(0.5) - out_dir * math.sinh(0.5)
    b = mid * math.cosh(0.5) + out_dir * math.sinh(0.5)
    return a, b


def _chain_witness(sd: _SideData, steps, frow, margin):
    """Witness data from a converged chain."""
    stepsA = np.asarray(steps)
    pts = sd.lift(stepsA, frow[None, :])[0]
    m = len(stepsA)
    if m >= 2:
        b1 = sd.refl[int(stepsA[0])] @ pts[1]
        nrm, _ = _unit_space(_jcross(pts[0][None, :], b1[None, :]))
        n0 = nrm[0]
    else:
        a, b = _normal_chord_points(sd, int(stepsA[0]))
        nrm, _ = _unit_space(_jcross(a[None, :], b[None, :]))
        n0 = nrm[0]
    params = [0.0]
    for k in range(m - 1):
        a = sd.refl[int(stepsA[k])] @ pts[k]
        params.append(params[-1] + _leg_len(a, pts[k + 1]))
    chord = K.klein_chord(K.HGeodesic(n0))
    return TransversalWitness(
        chord, tuple(params), float(margin), tuple(float(x) for x in frow)
    )


def _witness_walk(sd: _SideData, steps, witness: TransversalWitness):
    """Independent re-check of a witness: walk gate to gate and re-snap.

    The chord's first crossing and direction start the walk; each step
    advances along the geodesic by the stored arc increment, transfers
    across the gate, and snaps back onto the next gate's line. A snap
    beyond _SNAP_TOL means the stored data is not locally consistent
    with any nearby geodesic. Returns (ok, recomputed margin).
    """
    m = len(steps)
    if len(witness.crossing_params) != m or m == 0:
        return False, 0.0
    t = np.asarray(witness.crossing_params, dtype=float)
    if m >= 2 and np.any(np.diff(t) <= 0):
        return False, 0.0
    a3 = np.array([witness.chord.a[0], witness.chord.a[1], 1.0])
    b3 = np.array([witness.chord.b[0], witness.chord.b[1], 1.0])
    nrm, good = _unit_space(_jcross(a3[None, :], b3[None, :]))
    if not good[0]:
        return False, 0.0
    n = nrm[0]
    j0 = steps[0]
    x = _jcross(n[None, :], sd.ns[j0][None, :])
    if -_mdot(x, x)[0] <= _DEGENERATE_Q:
        return False, 0.0
    p = _unit_time(x)[0]
    d = _jcross(n[None, :], p[None, :])[0]
    d /= math.sqrt(max(float(_mdot(d, d)), 1e-300))
    if float(d @ (sd.ns[j0] * _J)) > 0:
        d = -d
    margin = math.inf
    for k, j in enumerate(steps):
        f = float(sd.frac_of(j, p))
        if not 0.0 < f < 1.0:
            return False, 0.0
        if float(d @ (sd.ns[j] * _J)) >= 0:
            return False, 0.0
        pk = p[:2] / p[2]
        ahead = p + d
        dk = ahead[:2] / ahead[2] - pk
        dl = math.hypot(dk[0], dk[1])
        if dl <= 1e-300:
            return False, 0.0
        for v in (sd.ka[j], sd.kb[j]):
            clr = abs(dk[0] * (v[1] - pk[1]) - dk[1] * (v[0] - pk[0])) / dl
            margin = min(margin, clr)
        if k == m - 1:
            break
        dt = float(t[k + 1] - t[k])
        q = p * math.cosh(dt) + d * math.sinh(dt)
        dq = p * math.sinh(dt) + d * math.cosh(dt)
        R = sd.refl[j]
        q = R @ q
        dq = R @ dq
        jn = steps[k + 1]
        aq = float(q @ (sd.ns[jn] * _J))
        bq = float(dq @ (sd.ns[jn] * _J))
        if abs(bq) <= 1e-300:
            return False, 0.0
        r = -aq / bq
        if abs(r) >= 1.0:
            return False, 0.0
        ts = math.atanh(r)
        if abs(ts) > _SNAP_TOL:
            return False, 0.0
        p = q * math.cosh(ts) + dq * math.sinh(ts)
        d = q * math.sinh(ts) + dq * math.cosh(ts)
        # Minkowski re-orthonormalization against rounding drift
        p = _unit_time(p[None, :])[0]
        d = d + float(_mdot(d, p)) * p
        d /= math.sqrt(max(float(_mdot(d, d)), 1e-300))
    return True, margin


def _witness_check(sd: _SideData, steps, witness: TransversalWitness):
    """Re-check a witness through its gate-fraction chain.

    The chain is re-evaluated from scratch: forward crossing signs,
    straightness residuals, clearances, and legs, none of which the
    search path computes the same way. The chord and arc parameters must
    agree with what the chain implies; every comparison is a local
    unit-scale computation, so the check stays sound at any depth.
    Returns (ok, recomputed margin). Witnesses without gate fractions
    fall back to the walking check, whose reach shrinks exponentially
    with the word length.
    """
    m = len(steps)
    if witness.gate_fracs is None or m <= 1:
        return _witness_walk(sd, steps, witness)
    if len(witness.gate_fracs) != m or len(witness.crossing_params) != m:
        return False, 0.0
    f = np.asarray(witness.gate_fracs, dtype=float)
    if np.any(f <= 0.0) or np.any(f >= 1.0):
        return False, 0.0
    margin, residual, ok = _eval_chains(sd, steps, f[None, :])
    if not bool(ok[0]) or residual[0] > _WITNESS_RES:
        return False, 0.0
    if not _legs_clear(sd, steps, f):
        return False, 0.0
    ref = _chain_witness(sd, steps, f, float(margin[0]))
    t_ref = np.asarray(ref.crossing_params)
    t_got = np.asarray(witness.crossing_params, dtype=float)
    if np.any(np.abs(t_ref - t_got) > _CONSIST_TOL * (1.0 + np.abs(t_ref))):
        return False, 0.0
    for got, want in ((witness.chord.a, ref.chord.a), (witness.chord.b, ref.chord.b)):
        if math.hypot(got[0] - want[0], got[1] - want[1]) > _CONSIST_TOL:
            return False, 0.0
    return True, float(margin[0])


def verify_witness(
    poly: LabeledPolygon, corr: Corridor, witness: TransversalWitness
) -> bool:
    """Independently re-check a transversal witness against its corridor."""
    sd = getattr(corr, "_sides", None)
    steps = getattr(corr, "_steps", None)
    if sd is None or steps is None:
        steps = _validate_word(poly, corr.word)
        sd = _SideData(poly)
    ok, margin = _witness_check(sd, list(steps), witness)
    return bool(ok and margin >= EPS_GATE * 0.98)


# ---------------------------------------------------------------------------
# search


def _search_chains(sd: _SideData, steps, seed_rows):
    """Best-margin chain over the two free end fractions.

    A transversal is pinned down by its first and last crossings, so the
    (f_first, f_last) unit square is a complete chart of candidates; the
    interior is always the relaxed chain between the ends. A coarse grid
    plus any seed chains feeds a pattern search on the square, with warm
    relaxation of every probe. Returns (fractions, margin) of the best
    chain found; margin is -inf when nothing crossed forward.
    """
    m = len(steps)
    ends = [(u, v) for u in _GRID for v in _GRID]
    rows = [np.linspace(u, v, m) for (u, v) in ends]
    for r in seed_rows:
        rows.append(np.asarray(r, dtype=float))
        ends.append((float(r[0]), float(r[-1])))
    f = np.array(rows)
    f = _relax(sd, steps, f, sweeps=_COLD_SWEEPS, tol=_SEARCH_TOL)
    margin, _, _ = _eval_chains(sd, steps, f)
    order = np.argsort(margin)[::-1][:_TOP_SEEDS]
    best_f = f[order[0]].copy()
    best_m = float(margin[order[0]])
    if best_m >= _EARLY_YES:
        return best_f, best_m
    centers = [
        (float(f[i, 0]), float(f[i, -1]), f[i].copy(), float(margin[i])) for i in order
    ]
    h = 0.05
    per = len(_PATTERN)
    for rnd in range(_POLISH_ROUNDS):
        probes = []
        prows = []
        for (u, v, base, _bm) in centers:
            for du, dv in _PATTERN * h:
                uu = min(max(u + du, 0.0), 1.0)
                vv = min(max(v + dv, 0.0), 1.0)
                probes.append((uu, vv))
                row = base.copy()
                row[0] = uu
                row[-1] = vv
                prows.append(row)
        fp = _relax(sd, steps, np.array(prows), sweeps=_WARM_SWEEPS, tol=_SEARCH_TOL)
        mg, _, _ = _eval_chains(sd, steps, fp)
        improved = False
        new_centers = []
        for ci, (u, v, base, bm) in enumerate(centers):
            sl = slice(ci * per, (ci + 1) * per)
            loc = int(np.argmax(mg[sl]))
            gi = ci * per + loc
            if mg[gi] > bm + 1e-15 and loc != 0:
                improved = True
                new_centers.append(
                    (probes[gi][0], probes[gi][1], fp[gi].copy(), float(mg[gi]))
                )
            else:
                new_centers.append((u, v, base, bm))
            if mg[gi] > best_m:
                best_m = float(mg[gi])
                best_f = fp[gi].copy()
        centers = new_centers
        # a comfortable strict margin settles the verdict, no need to
        # keep maximizing it
        if best_m >= _EARLY_YES:
            break
        # nothing has ever crossed forward: the feasible set, if any,
        # is beyond this chart's resolution, and the weak-cone pass
        # downstream owns the verdict
        if rnd >= 6 and best_m == -np.inf:
            break
        if not improved:
            h *= 0.45
            if h < 1e-11:
                break
    return best_f, best_m


def _converge(sd: _SideData, steps, frow):
    """Drive the best chain to full convergence and certify it.

    Newton closes out straightness; the sweep relaxation alone stalls
    on chains with a short leg (a crossing pair hugging a vertex), so it
    only smooths the seed and backstops a Newton failure. Returns
    (fractions or None, margin); None means the chain failed the
    straightness, side, or leg tests, and the margin is then zeroed
    because clearances of a bent chain certify nothing.
    """
    f0 = _relax(sd, steps, frow[None, :], sweeps=24, tol=_FINAL_TOL)
    f = _newton_chain(sd, steps, f0)
    margin, residual, ok = _eval_chains(sd, steps, f)
    if not bool(ok[0]) or residual[0] > _RES_TOL:
        # Newton left its basin; restart the sweeps from the pre-Newton
        # state, then let Newton close out whatever straightness the
        # sweeps leave unfinished (they stall around 1e-10 on stiff
        # chains, above what the witness check accepts)
        f = _relax(sd, steps, f0, sweeps=_FINAL_SWEEPS, tol=_FINAL_TOL)
        f = _newton_chain(sd, steps, f)
        margin, residual, ok = _eval_chains(sd, steps, f)
    mg = float(margin[0])
    if not bool(ok[0]) or residual[0] > _RES_TOL:
        return None, 0.0
    if not _legs_clear(sd, steps, f[0]):
        return None, 0.0
    return f[0], mg


def realizable(poly: LabeledPolygon, word, hints=()) -> Realizability:
    """Decide whether a bounce word is realized by a billiard chord.

    hints seed the search and come in three shapes: a TransversalWitness
    for the same word (its gate fractions transfer across angle-
    preserving deformations), a bare sequence of one crossing fraction
    per gate (a simulated trajectory's bounce arc parameters are exactly
    that), or a (start, end) point pair (HPoints, Klein pairs, or
    homogeneous 3-vectors) whose chord is read off gate by gate;
    simulated trajectories provide one via chord_from_trajectory. Yes
    verdicts carry an independently re-checked witness; certified no
    verdicts name the gate range whose weak chord cone is empty. Doubled
    letters give no (reason immediate_repeat); bad labels raise
    InvalidData.
    """
    try:
        steps = _validate_word(poly, word)
    except ImmediateRepeat:
        return Realizability("no", None, 0.0, "immediate_repeat")
    m = len(steps)
    sd = _SideData(poly)
    if m == 0:
        return Realizability("yes", None, math.inf, "empty word")
    if m == 1:
        a, b = _normal_chord_points(sd, steps[0])
        f = np.array([[0.5]])
        margin, _, _ = _eval_chains(sd, steps, f, start=a[None, :], end=b[None, :])
        witness = _chain_witness(sd, steps, f[0], float(margin[0]))
        return Realizability("yes", witness, float(margin[0]), None)

    # the window scan is cheap and spares infeasible words the whole
    # seeded-search machinery
    hole = _weak_scan(sd, steps)
    if hole is not None:
        a, b = hole
        return Realizability(
            "no", None, 0.0, f"no weakly feasible chord through gates {a + 1}..{b}"
        )

    seed_rows = _hint_fracs(sd, steps, hints)
    weak_checked = False
    if seed_rows:
        f = _relax(sd, steps, np.array(seed_rows), sweeps=_WARM_SWEEPS, tol=_SEARCH_TOL)
        margin, _, _ = _eval_chains(sd, steps, f)
        i = int(np.argmax(margin))
        if margin[i] >= EPS_GATE:
            frow, mg = _converge(sd, steps, f[i])
            if frow is not None and mg >= EPS_GATE:
                witness = _chain_witness(sd, steps, frow, mg)
                wok, wmg = _witness_check(sd, steps, witness)
                if wok and wmg >= EPS_GATE * 0.98:
                    return Realizability("yes", witness, mg, None)
                if mg < 100.0 * EPS_GATE:
                    # certification noise is of the margin's own order
                    # here; searching harder cannot settle it
                    return Realizability(
                        "grazing", None, mg,
                        "margin within verification noise of the "
                        "strictness threshold",
                    )
        else:
            # a provided witness that stalls this far under threshold
            # usually means the word is infeasible; settle the weak
            # cone exactly before paying for a blind search
            feasible, depth = _weak_full(sd, steps)
            weak_checked = True
            if not feasible:
                return Realizability(
                    "no", None, 0.0,
                    f"no weakly feasible chord (refuted at gate {depth})",
                )
        seed_rows = [f[i]]

    best_f, best_m = _search_chains(sd, steps, seed_rows)
    if best_m >= EPS_GATE:
        frow, mg = _converge(sd, steps, best_f)
        if frow is not None and mg >= EPS_GATE:
            witness = _chain_witness(sd, steps, frow, mg)
            wok, wmg = _witness_check(sd, steps, witness)
            if wok and wmg >= EPS_GATE * 0.98:
                return Realizability("yes", witness, mg, None)
            if mg < 100.0 * EPS_GATE:
                reason = (
                    "margin within verification noise of the strictness "
                    "threshold"
                )
            else:
                reason = "verifier disagreed with search margin"
            return Realizability("grazing", None, mg, reason)
        best_m = mg
    if best_m > GRAZE_FLOOR:
        return Realizability(
            "grazing", None, max(best_m, 0.0), "margin below strictness threshold"
        )
    if not weak_checked:
        feasible, depth = _weak_full(sd, steps)
        if not feasible:
            return Realizability(
                "no", None, 0.0, f"no weakly feasible chord (refuted at gate {depth})"
            )
    return Realizability("no", None, max(best_m, 0.0), "no strict transversal found")


# ---------------------------------------------------------------------------
# generalized diagonals


@dataclass(frozen=True)
class DiagonalResult:
    """Vertex-to-vertex chord search outcome for a bounce word."""

    verdict: str  # "yes" | "no" | "grazing"
    from_vertex: int | None
    to_vertex: int | None
    chord: K.KleinChord | None
    crossing_params: tuple
    margin: float
    reason: str | None = None

    @property
    def yes(self) -> bool:
        return self.verdict == "yes"

    def to_json_dict(self):
        out = {"verdict": self.verdict, "margin": float(self.margin)}
        if self.from_vertex is not None:
            out["from_vertex"] = int(self.from_vertex)
            out["to_vertex"] = int(self.to_vertex)
        if self.chord is not None:
            out["chord"] = {
                "a": [float(self.chord.a[0]), float(self.chord.a[1])],
                "b": [float(self.chord.b[0]), float(self.chord.b[1])],
            }
        if self.crossing_params:
            out["crossing_params"] = [float(t) for t in self.crossing_params]
        if self.reason:
            out["reason"] = self.reason
        return out


def _pull_fracs_rows(sd: _SideData, steps, n):
    """Crossing fractions at every gate for frame-0 chord normal rows n.

    Each normal is carried frame to frame in doubles; the drift of a
    pulled normal grows like e^(k * leg), so this is only accurate within
    the same depth horizon as the windowed cone test. Degenerate gates
    come back as NaN.
    """
    f = np.empty((n.shape[0], len(steps)))
    for k, j in enumerate(steps):
        x = _jcross(n, np.broadcast_to(sd.ns[j], n.shape))
        # pulled normals alternate orientation, so x alternates sheet
        up = np.where(x[:, 2] < 0, -1.0, 1.0)
        f[:, k] = np.arcsinh(up * _mdot(x, np.broadcast_to(sd.t0[j], x.shape))
                             / np.sqrt(np.clip(-_mdot(x, x), 1e-300, None))) / sd.slen[j]
        n = _rescale_rows(n @ sd.refl[j].T)
    return f


def _mp_jcross(u, v):
    return [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        -(u[0] * v[1] - u[1] * v[0]),
    ]


def _mp_mdot(u, v):
    return u[0] * v[0] + u[1] * v[1] - u[2] * v[2]


def _mp_pull_chain(sd: _SideData, steps, n, Rs):
    """One mp normal pulled along the corridor; NaN tail past a degeneracy.

    Must run inside an mpmath.workdps context sized to the corridor.
    """
    out = [math.nan] * len(steps)
    for k, j in enumerate(steps):
        ns = [mpmath.mpf(float(c)) for c in sd.ns[j]]
        t0 = [mpmath.mpf(float(c)) for c in sd.t0[j]]
        x = _mp_jcross(n, ns)
        q = -_mp_mdot(x, x)
        if q <= 0:
            break
        up = -1 if x[2] < 0 else 1
        out[k] = float(
            mpmath.asinh(up * _mp_mdot(x, t0) / mpmath.sqrt(q)) / sd.slen[j]
        )
        n = [sum(Rs[j][i, c] * n[c] for c in range(3)) for i in range(3)]
        big = max(abs(n[0]), abs(n[1]), abs(n[2]))
        n = [c / big for c in n]
    return out


def _mp_dps(sd: _SideData, steps) -> int:
    """Working precision that keeps a full-corridor pull meaningful."""
    return 30 + int(1.2 * sum(sd.lognorm[j] for j in steps))


def _pull_loss(sd: _SideData, steps) -> float:
    """Decimal digits lost pulling the deepest gate's side to frame 0."""
    return float(sum(sd.lognorm[j] for j in steps[:-1]))


def _diag_fracs_direct(sd: _SideData, steps, A, W):
    """Crossing fractions of the chords from rows of A to M(rows of W)."""
    M = np.eye(3)
    for j in steps:
        M = M @ sd.refl[j]
    far = np.einsum("ij,bj->bi", M, W)
    nrm, good = _unit_space(_jcross(A, _rescale_rows(far)))
    n = np.where(good[:, None], nrm, np.nan)
    return _pull_fracs_rows(sd, steps, n)


def _diag_fracs_mp(sd: _SideData, steps, A, W):
    """High-precision variant of _diag_fracs_direct for long words."""
    f = np.empty((A.shape[0], len(steps)))
    with mpmath.workdps(_mp_dps(sd, steps)):
        Rs = {j: mpmath.matrix(sd.refl[j].tolist()) for j in set(steps)}
        M = mpmath.eye(3)
        for j in steps:
            M = M * Rs[j]
        for b in range(A.shape[0]):
            u = [mpmath.mpf(float(c)) for c in A[b]]
            w = [mpmath.mpf(float(c)) for c in W[b]]
            far = [sum(M[i, c] * w[c] for c in range(3)) for i in range(3)]
            n = _mp_jcross(u, far)
            if _mp_mdot(n, n) <= 0:
                f[b] = np.nan
                continue
            f[b] = _mp_pull_chain(sd, steps, n, Rs)
    return f


def _diagonal_impl(sd: _SideData, steps) -> DiagonalResult:
    m = len(steps)
    if m == 0:
        return DiagonalResult(
            "no", None, None, None, (), 0.0, "empty word has no gates"
        )
    n = sd.n
    # end vertices of copy m pulled into frame m-1, the chain's last frame
    Rlast = sd.refl[steps[-1]]
    starts = np.repeat(np.arange(n), n)
    stops = np.tile(np.arange(n), n)
    A = sd.vh[starts]
    B = np.einsum("ij,bj->bi", Rlast, sd.vh[stops])
    W = sd.vh[stops]
    # each pair has a unique geodesic, so its fractions are read off the
    # chord directly; a few relaxation sweeps mop up extraction rounding
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        if _pull_loss(sd, steps) <= _PULL_LOG_BUDGET:
            f = _diag_fracs_direct(sd, steps, A, W)
        else:
            f = _diag_fracs_mp(sd, steps, A, W)
        f = np.clip(f, 0.0, 1.0)
        f = _relax(sd, steps, f, start=A, end=B, sweeps=6, tol=_FINAL_TOL)
        margin, residual, ok = _eval_chains(sd, steps, f, start=A, end=B)
    margin = np.where(ok & (residual <= _RES_TOL), margin, -np.inf)
    for i in np.argsort(margin)[::-1]:
        if not np.isfinite(margin[i]) or margin[i] <= GRAZE_FLOOR:
            break
        if not _legs_clear(sd, steps, f[i], start=A[i], end=B[i]):
            continue
        mg = float(margin[i])
        verdict = "yes" if mg >= EPS_GATE else "grazing"
        pts = sd.lift(np.asarray(steps), f[i][None, :])[0]
        nrm, good = _unit_space(_jcross(A[i][None, :], pts[0][None, :]))
        chord = K.klein_chord(K.HGeodesic(nrm[0])) if good[0] else None
        params = []
        prev = A[i]
        t = 0.0
        for k in range(m):
            t += _leg_len(prev, pts[k])
            params.append(t)
            prev = sd.refl[steps[k]] @ pts[k]
        reason = None if verdict == "yes" else "margin below strictness threshold"
        return DiagonalResult(
            verdict, int(starts[i]), int(stops[i]), chord, tuple(params), mg, reason
        )
    return DiagonalResult(
        "no", None, None, None, (), 0.0, "no vertex pair admits a strict chord"
    )


def generalized_diagonal(poly: LabeledPolygon, word) -> DiagonalResult:
    """Search for a vertex-to-vertex chord realizing the word.

    The chord must run from a vertex of copy 0 to a vertex of copy m and
    cross every gate strictly in between. All n^2 ordered vertex pairs
    are tried, each against the unique geodesic through its endpoints,
    so the per-word decision is exhaustive. Doubled letters give no
    (reason immediate_repeat); the empty word gives no by convention,
    since a diagonal must bounce at least once.
    """
    try:
        steps = _validate_word(poly, word)
    except ImmediateRepeat:
        return DiagonalResult("no", None, None, None, (), 0.0, "immediate_repeat")
    return _diagonal_impl(_SideData(poly), steps)


def enumerate_diagonals(poly: LabeledPolygon, max_len: int, with_results=False):
    """All generalized diagonals with words of up to max_len letters.

    Depth-first over repeat-free words, pruning prefixes whose weak
    chord cone is already empty (extensions only add constraints).
    Returns the realized words sorted by length then word, or (word,
    DiagonalResult) pairs in that order when with_results is set.
    Raises BudgetExceeded beyond MAX_ENUM_LEN.
    """
    if max_len < 0:
        raise InvalidData("max_len must be nonnegative")
    if max_len > MAX_ENUM_LEN:
        raise BudgetExceeded(f"max_len {max_len} exceeds supported {MAX_ENUM_LEN}")
    sd = _SideData(poly)
    found = []

    def descend(word, steps):
        if steps:
            if len(steps) >= 2 and _weak_scan(sd, steps) is not None:
                return
            result = _diagonal_impl(sd, steps)
            if result.yes:
                found.append((tuple(word), result))
        if len(word) >= max_len:
            return
        for b in range(1, sd.n + 1):
            if word and word[-1] == b:
                continue
            descend(word + [b], steps + [b - 1])

    descend([], [])
    found.sort(key=lambda item: (len(item[0]), item[0]))
    if with_results:
        return found
    return [w for w, _ in found]


def chord_from_trajectory(poly: LabeledPolygon, traj) -> tuple:
    """Hint pair (start, unfolded continuation) for a simulated trajectory.

    The continuation of the final leg is mapped by the last corridor
    isometry, so the pair spans the straightened chord of the
    trajectory's bounce word; feed it to realizable() via hints.
    """
    word = tuple(ev.side_label for ev in traj.events)
    if not word:
        raise InvalidData("trajectory has no bounce events")
    _, _, _, mats = _build(poly, word)
    far = mats[-1] @ traj.final_direction.v
    return traj.start.v.copy(), _rescale_rows(far[None, :])[0]
