"""Dense chord-space oracle for short corridors.

Independent re-implementation of realizability for words of length <= 4,
used to cross-check the production search. The corridor is laid out in a
single global Klein chart (fine at this depth, where all copies stay
well inside the disk) and candidate chords are parameterized by
(direction, offset). For each direction on a dense grid the offset is
optimized in closed form: with a unit normal, the clearance of the chord
from the gate endpoints is a concave piecewise-linear function of the
offset, and the in-order crossing constraints are linear in it, so the
exact optimum over offsets is available per direction. That dominates
any fixed offset grid. Directions are then refined by local zoom around
the incumbent, with resolution escalation when the verdict is close.

Margins are perpendicular Euclidean distances from gate endpoints to the
chord line in the global chart; the production engine measures
clearances per copy frame, so numeric values agree with it only up to
the chart distortion and comparisons must be made on verdicts, not
margins.

A caller may pass a hint chord. The hint only focuses direction
resolution near that chord; every crossing, ordering, and clearance
computation is this module's own.
"""

import math
from dataclasses import dataclass

import numpy as np

N_DIRECTIONS = 10_000
EPS_GATE = 1e-9
_ZOOM_POINTS = 2001
_ZOOM_ROUNDS = 3
_CHUNK = 200_000


def corridor_gates(poly, word):
    """Gate segments of the unfolded corridor, in global Klein coordinates.

    Returns an (m, 2, 2) array: gate index, endpoint, xy.
    """
    kv = np.asarray(poly.klein_vertices, dtype=float)
    n = len(kv)
    s = np.sqrt(1.0 - (kv**2).sum(axis=1))
    V = np.column_stack([kv[:, 0] / s, kv[:, 1] / s, 1.0 / s])
    J = np.diag([1.0, 1.0, -1.0])
    refl = []
    for j in range(n):
        a, b = V[j], V[(j + 1) % n]
        nrm = J @ np.array(
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        )
        nrm = nrm / math.sqrt(nrm @ J @ nrm)
        refl.append(np.eye(3) - 2.0 * np.outer(nrm, nrm) @ J)
    g = np.eye(3)
    gates = []
    for lab in word:
        j = int(lab) - 1
        a = g @ V[j]
        b = g @ V[(j + 1) % n]
        gates.append(((a[0] / a[2], a[1] / a[2]), (b[0] / b[2], b[1] / b[2])))
        g = g @ refl[j]
    return np.asarray(gates)


def _scan(gates, thetas):
    """Best clearance per direction, offsets optimized exactly.

    Returns (margins, offsets) arrays over thetas. Margins are signed:
    negative values measure how far the common crossing interval is from
    opening up, which keeps the objective continuous for zooming.
    """
    A = gates[:, 0, :]
    B = gates[:, 1, :]
    m = len(gates)
    best_v = np.full(thetas.shape, -np.inf)
    best_d = np.zeros_like(thetas)
    step = max(1, _CHUNK // max(m, 1))
    for s0 in range(0, len(thetas), step):
        th = thetas[s0 : s0 + step]
        ct, st = np.cos(th), np.sin(th)
        pA = A[:, 0, None] * ct + A[:, 1, None] * st
        pB = B[:, 0, None] * ct + B[:, 1, None] * st
        tA = -A[:, 0, None] * st + A[:, 1, None] * ct
        tB = -B[:, 0, None] * st + B[:, 1, None] * ct
        L = np.minimum(pA, pB).max(axis=0)
        H = np.maximum(pA, pB).min(axis=0)
        den = pA - pB
        safe = np.where(np.abs(den) < 1e-300, 1.0, den)
        slope = -(tB - tA) / safe
        inter = tA + pA * (tB - tA) / safe
        alpha = np.diff(inter, axis=0)
        beta = np.diff(slope, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            root = -alpha / beta
        out = np.full(th.shape, -np.inf)
        dout = np.zeros_like(th)
        # crossing params must be strictly monotone along the chord;
        # either traversal direction realizes the word
        for sgn in (1.0, -1.0):
            a_, b_ = sgn * alpha, sgn * beta
            loO = np.where(b_ > 0, root, -np.inf).max(axis=0, initial=-np.inf)
            hiO = np.where(b_ < 0, root, np.inf).min(axis=0, initial=np.inf)
            dead = ((b_ == 0) & (a_ <= 0)).any(axis=0) if m > 1 else False
            Lp = np.maximum(L, loO)
            Hp = np.minimum(H, hiO)
            dmid = np.clip(0.5 * (L + H), Lp, Hp)
            val = np.minimum(dmid - L, H - dmid)
            val = np.where((Lp <= Hp) & ~dead, val, -np.inf)
            take = val > out
            out = np.where(take, val, out)
            dout = np.where(take, dmid, dout)
        sel = slice(s0, s0 + len(th))
        best_v[sel] = out
        best_d[sel] = dout
    return best_v, best_d


def _best_over(gates, thetas):
    v, d = _scan(gates, thetas)
    i = int(np.argmax(v))
    return float(v[i]), float(thetas[i]), float(d[i])


def _refine(gates, theta0, span):
    v = -np.inf
    th, dd = theta0, 0.0
    for _ in range(_ZOOM_ROUNDS):
        thetas = np.linspace(th - span, th + span, _ZOOM_POINTS)
        v, th, dd = _best_over(gates, thetas)
        span = 2.0 * (2.0 * span / (_ZOOM_POINTS - 1))
    return v, th, dd


@dataclass(frozen=True)
class OracleVerdict:
    verdict: str
    margin: float
    theta: float
    offset: float


BAND = 1e-6


def comparable(engine_verdict, engine_margin, orc: "OracleVerdict") -> bool:
    """True when an engine/oracle pair is outside the ambiguity band.

    Margins below BAND are tolerance-ambiguous between the two margin
    charts (per-frame vs global), as are grazing verdicts on either
    side; such pairs carry no agreement obligation.
    """
    if engine_verdict == "grazing" or orc.verdict == "grazing":
        return False
    if engine_verdict == "yes" and engine_margin < BAND:
        return False
    if orc.verdict == "yes" and orc.margin < BAND:
        return False
    return True


def _hint_theta(hint):
    (ax, ay), (bx, by) = hint
    ux, uy = bx - ax, by - ay
    nn = math.hypot(ux, uy)
    if nn == 0.0:
        return None
    nx, ny = uy / nn, -ux / nn
    th = math.atan2(ny, nx)
    if th < 0.0:
        th += math.pi
    return th % math.pi


def decide(poly, word, hint=None):
    """Grid verdict for a bounce word of length <= 4.

    hint, if given, is a chord ((ax, ay), (bx, by)) in Klein
    coordinates whose direction receives extra local resolution.
    """
    if len(word) > 4:
        raise ValueError("oracle only handles words of length <= 4")
    gates = corridor_gates(poly, word)
    coarse = np.linspace(0.0, math.pi, N_DIRECTIONS, endpoint=False)
    v, th, dd = _best_over(gates, coarse)
    rv, rth, rdd = _refine(gates, th, 2.0 * math.pi / N_DIRECTIONS)
    if rv > v:
        v, th, dd = rv, rth, rdd
    for n_dir, floor in ((100_000, 1e-3), (1_000_000, 1e-4)):
        if v >= floor:
            break
        dense = np.linspace(0.0, math.pi, n_dir, endpoint=False)
        nv, nth, ndd = _best_over(gates, dense)
        nv, nth, ndd = _refine(gates, nth, 2.0 * math.pi / n_dir)
        if nv > v:
            v, th, dd = nv, nth, ndd
    if hint is not None:
        hth = _hint_theta(hint)
        if hth is not None:
            hv, hth2, hdd = _refine(gates, hth, 5e-4)
            if hv > v:
                v, th, dd = hv, hth2, hdd
    if v >= EPS_GATE:
        verdict = "yes"
    elif v > 0.0:
        verdict = "grazing"
    else:
        verdict = "no"
    return OracleVerdict(verdict, v, th, dd)
