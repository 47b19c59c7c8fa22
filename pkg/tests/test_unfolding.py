import math

import numpy as np
import pytest

import _grid_oracle as G
from hypb import billiards as B
from hypb import kernel as K
from hypb import polygon as P
from hypb import unfolding as U
from hypb.errors import BudgetExceeded, ImmediateRepeat, InvalidData, NotInterior


def _simulate_words(poly, count, length, seed, with_fracs=False):
    """Non-grazing bounce words sampled from random interior launches."""
    rng = np.random.default_rng(seed)
    kx, ky = poly.interior_point
    out = []
    guard = 0
    while len(out) < count and guard < count * 80:
        guard += 1
        ang = rng.uniform(0.0, 2.0 * math.pi)
        dx, dy = rng.normal(scale=0.05, size=2)
        try:
            start = K.from_klein((kx + dx, ky + dy))
            traj = B.simulate(poly, start, ang, length)
        except (InvalidData, NotInterior):
            continue
        if traj.grazing or len(traj.events) < length:
            continue
        word = tuple(e.side_label for e in traj.events)
        if with_fracs:
            out.append((word, np.array([e.arc_param for e in traj.events])))
        else:
            out.append(word)
    assert len(out) == count, "sampler starved"
    return out


def _random_word(rng, n, length):
    word = [int(rng.integers(1, n + 1))]
    while len(word) < length:
        b = int(rng.integers(1, n + 1))
        if b != word[-1]:
            word.append(b)
    return tuple(word)


# ---------------------------------------------------------------------------
# corridor construction


def test_corridor_copy_and_gate_counts(right_pentagon):
    corr = U.unfold(right_pentagon, (1, 3))
    assert len(corr.copies) == 3
    assert len(corr.gates) == 2
    assert corr.word == (1, 3)
    origin = K.HPoint.origin()
    assert K.distance(corr.copies[0].apply(origin), origin) < 1e-12


def test_corridor_empty_word(right_pentagon):
    corr = U.unfold(right_pentagon, ())
    assert len(corr.copies) == 1
    assert corr.gates == ()
    assert len(corr.vertices0) == 5
    assert len(corr.verticesM) == 5


def test_gates_are_shared_sides(right_pentagon):
    word = (1, 3, 2, 4)
    corr = U.unfold(right_pentagon, word)
    for k, lab in enumerate(word):
        va = right_pentagon.vertices[lab - 1]
        vb = right_pentagon.vertices[lab % 5]
        for v in (va, vb):
            lo = corr.copies[k].apply(v)
            hi = corr.copies[k + 1].apply(v)
            # the gate side is fixed pointwise by the step reflection
            assert K.distance(lo, hi) < 1e-9
    # copies embed isometrically: pairwise vertex distances survive
    base = [
        K.distance(right_pentagon.vertices[i], right_pentagon.vertices[j])
        for i in range(5)
        for j in range(i + 1, 5)
    ]
    for g in corr.copies:
        imgs = [g.apply(v) for v in right_pentagon.vertices]
        got = [
            K.distance(imgs[i], imgs[j]) for i in range(5) for j in range(i + 1, 5)
        ]
        assert max(abs(a - b) for a, b in zip(base, got)) < 1e-8


def test_gates_match_independent_chart(right_pentagon):
    word = (2, 4, 1, 3)
    corr = U.unfold(right_pentagon, word)
    ref = G.corridor_gates(right_pentagon, word)
    for k, (a, b) in enumerate(corr.gates):
        assert np.allclose(a.klein(), ref[k, 0], atol=1e-9)
        assert np.allclose(b.klein(), ref[k, 1], atol=1e-9)


def test_unfold_rejects_immediate_repeat(right_pentagon):
    with pytest.raises(ImmediateRepeat) as exc:
        U.unfold(right_pentagon, (1, 1))
    assert exc.value.position == 2
    with pytest.raises(ImmediateRepeat) as exc:
        U.unfold(right_pentagon, (2, 1, 1))
    assert exc.value.position == 3


def test_bad_labels_raise(right_pentagon):
    for word in ((0,), (6,), (1, 7)):
        with pytest.raises(InvalidData):
            U.unfold(right_pentagon, word)
        with pytest.raises(InvalidData):
            U.realizable(right_pentagon, word)
        with pytest.raises(InvalidData):
            U.generalized_diagonal(right_pentagon, word)


# ---------------------------------------------------------------------------
# realizability verdicts


def test_periodic_word_realizable(right_pentagon):
    r = U.realizable(right_pentagon, (1, 3, 1, 3, 1, 3))
    assert r.verdict == "yes"
    assert r.margin >= U.EPS_GATE
    w = r.witness
    diffs = np.diff(w.crossing_params)
    assert (diffs > 0).all()
    assert w.gate_fracs is not None and len(w.gate_fracs) == 6
    assert all(0.0 <= f <= 1.0 for f in w.gate_fracs)
    corr = U.unfold(right_pentagon, (1, 3, 1, 3, 1, 3))
    assert U.verify_witness(right_pentagon, corr, w)


def test_empty_and_single_letter_words(right_pentagon):
    assert U.realizable(right_pentagon, ()).verdict == "yes"
    for lab in range(1, 6):
        r = U.realizable(right_pentagon, (lab,))
        assert r.verdict == "yes"
        assert r.margin > 0.1


def test_right_angle_alternation_unrealizable(right_pentagon):
    # a run alternating between two perpendicular adjacent sides has no
    # transversal; at length 3 the weak cone degenerates to the pencil
    # through the shared vertex (certification is within rounding of the
    # slack there), at length 5 it is robustly empty and must certify
    for word in ((1, 2, 1), (3, 4, 3)):
        r = U.realizable(right_pentagon, word)
        assert r.verdict == "no"
        assert r.margin < U.GRAZE_FLOOR
    for word in ((1, 2, 1, 2, 1), (3, 4, 3, 4, 3)):
        r = U.realizable(right_pentagon, word)
        assert r.verdict == "no"
        assert "no weakly feasible chord" in r.reason


def test_immediate_repeat_is_a_no_verdict(right_pentagon):
    r = U.realizable(right_pentagon, (1, 1))
    assert r.verdict == "no"
    assert r.reason == "immediate_repeat"
    assert r.margin == 0.0


def test_hint_shapes_all_reach_yes(right_pentagon):
    word, fracs = _simulate_words(right_pentagon, 1, 12, seed=5, with_fracs=True)[0]
    plain = U.realizable(right_pentagon, word)
    assert plain.verdict == "yes"
    by_witness = U.realizable(right_pentagon, word, hints=[plain.witness])
    assert by_witness.verdict == "yes"
    by_fracs = U.realizable(right_pentagon, word, hints=[fracs])
    assert by_fracs.verdict == "yes"
    rng = np.random.default_rng(5)
    kx, ky = right_pentagon.interior_point
    traj = None
    while traj is None:
        try:
            start = K.from_klein((kx + rng.normal(scale=0.05), ky + rng.normal(scale=0.05)))
            cand = B.simulate(right_pentagon, start, rng.uniform(0, 2 * math.pi), 12)
        except (InvalidData, NotInterior):
            continue
        if not cand.grazing and len(cand.events) == 12:
            traj = cand
    word2 = tuple(e.side_label for e in traj.events)
    pair = U.chord_from_trajectory(right_pentagon, traj)
    by_pair = U.realizable(right_pentagon, word2, hints=[pair])
    assert by_pair.verdict == "yes"


def test_bogus_hints_do_not_change_verdicts(right_pentagon):
    # wrong-shaped or junk hints may cost time but never flip a verdict
    junk = [np.full(6, 0.999), np.zeros(6)]
    r = U.realizable(right_pentagon, (1, 3, 1, 3, 1, 3), hints=junk)
    assert r.verdict == "yes"
    r = U.realizable(right_pentagon, (1, 2, 1, 2, 1), hints=[np.full(5, 0.5)])
    assert r.verdict == "no"


def test_no_is_monotone_under_extension(right_pentagon):
    base = (1, 2, 1)
    assert U.realizable(right_pentagon, base).verdict == "no"
    for ext in (2, 3, 4, 5):
        r = U.realizable(right_pentagon, base + (ext,))
        assert r.verdict == "no"
    r = U.realizable(right_pentagon, base + (5, 3, 1))
    assert r.verdict == "no"


# ---------------------------------------------------------------------------
# generalized diagonals


def test_single_letter_diagonals(right_pentagon):
    for lab in range(1, 6):
        d = U.generalized_diagonal(right_pentagon, (lab,))
        assert d.verdict == "yes"
        assert d.from_vertex is not None and d.to_vertex is not None
        assert d.chord is not None
        assert d.margin > 0.1


def test_diagonal_conventions(right_pentagon):
    d = U.generalized_diagonal(right_pentagon, (1, 1))
    assert d.verdict == "no"
    assert d.reason == "immediate_repeat"
    d = U.generalized_diagonal(right_pentagon, ())
    assert d.verdict == "no"
    assert "empty word" in d.reason


def test_diagonal_reversal_symmetry(right_pentagon):
    for word in ((1, 2), (1, 3), (1, 3, 1), (2, 4, 1), (1, 2, 3)):
        fwd = U.generalized_diagonal(right_pentagon, word)
        rev = U.generalized_diagonal(right_pentagon, word[::-1])
        assert fwd.verdict == rev.verdict


def test_diagonal_json_round_trip(right_pentagon):
    import json

    d = U.generalized_diagonal(right_pentagon, (1, 3))
    blob = json.dumps(d.to_json_dict(), sort_keys=True)
    back = json.loads(blob)
    assert back["verdict"] == "yes"
    assert len(back["crossing_params"]) == 2


# ---------------------------------------------------------------------------
# diagonal enumeration


def test_enumerate_budget_guards(right_pentagon):
    assert U.enumerate_diagonals(right_pentagon, 0) == []
    with pytest.raises(BudgetExceeded):
        U.enumerate_diagonals(right_pentagon, 13)
    with pytest.raises(InvalidData):
        U.enumerate_diagonals(right_pentagon, -1)


def test_enumerate_is_canonically_sorted(right_pentagon):
    words = U.enumerate_diagonals(right_pentagon, 3)
    assert words == sorted(words, key=lambda w: (len(w), w))
    assert len(set(words)) == len(words)


def test_enumerate_len2_symmetries(right_pentagon):
    words = set(U.enumerate_diagonals(right_pentagon, 2))
    assert words, "expected some short diagonals"
    assert {w[::-1] for w in words} == words
    for k in range(5):
        rot = {tuple(((b - 1 + k) % 5) + 1 for b in w) for w in words}
        assert rot == words
        ref = {tuple(((k - (b - 1)) % 5) + 1 for b in w) for w in words}
        assert ref == words


def test_enumerate_relabel_equivariance(triangle_237):
    # a scalene triangle pins the label shift uniquely
    rot = triangle_237.rotated_labels(1)
    e0 = U.enumerate_diagonals(triangle_237, 4)
    e1 = U.enumerate_diagonals(rot, 4)
    shift = (3 - 1) % 3
    translated = {tuple(((b - 1 + shift) % 3) + 1 for b in w) for w in e0}
    assert translated == set(e1)


def test_enumerate_three_on_right_pentagon(right_pentagon):
    words = U.enumerate_diagonals(right_pentagon, 3)
    assert len(words) == 75
    two = U.enumerate_diagonals(right_pentagon, 2)
    assert set(two) <= set(words)
    rng = np.random.default_rng(7)
    for w in rng.choice(len(words), size=8, replace=False):
        assert U.generalized_diagonal(right_pentagon, words[int(w)]).verdict == "yes"


def test_enumerate_with_results(right_pentagon):
    pairs = U.enumerate_diagonals(right_pentagon, 2, with_results=True)
    assert all(res.verdict == "yes" for _, res in pairs)
    assert [w for w, _ in pairs] == U.enumerate_diagonals(right_pentagon, 2)


def test_enumerate_excludes_unrealizable_prefix_words(right_pentagon):
    words = set(U.enumerate_diagonals(right_pentagon, 3))
    assert (1, 2, 1) not in words
    assert (2, 3, 2) not in words


# ---------------------------------------------------------------------------
# properties


def test_simulated_words_are_self_realizable(right_pentagon):
    for word in _simulate_words(right_pentagon, 20, 14, seed=11):
        r = U.realizable(right_pentagon, word)
        assert r.verdict == "yes", (word, r.reason)
        assert r.margin >= U.EPS_GATE
        corr = U.unfold(right_pentagon, word)
        assert U.verify_witness(right_pentagon, corr, r.witness)


def test_deep_simulated_words_with_hints(right_pentagon):
    for word, fracs in _simulate_words(
        right_pentagon, 6, 40, seed=13, with_fracs=True
    ):
        r = U.realizable(right_pentagon, word, hints=[fracs])
        assert r.verdict == "yes", (word, r.reason)


def test_reversal_symmetry_random(right_pentagon):
    rng = np.random.default_rng(17)
    words = list(_simulate_words(right_pentagon, 8, 10, seed=17))
    words += [_random_word(rng, 5, int(rng.integers(2, 7))) for _ in range(12)]
    for word in words:
        fwd = U.realizable(right_pentagon, word)
        rev = U.realizable(right_pentagon, word[::-1])
        assert fwd.verdict == rev.verdict, word


def test_no_monotonicity_random(right_pentagon):
    rng = np.random.default_rng(19)
    found = 0
    while found < 8:
        word = _random_word(rng, 5, int(rng.integers(3, 6)))
        if U.realizable(right_pentagon, word).verdict != "no":
            continue
        found += 1
        suffix = []
        last = word[-1]
        for _ in range(int(rng.integers(1, 4))):
            b = int(rng.integers(1, 6))
            if b == last:
                b = b % 5 + 1
            suffix.append(b)
            last = b
        r = U.realizable(right_pentagon, word + tuple(suffix))
        assert r.verdict == "no", (word, suffix)


def test_grid_oracle_agreement_short_words(right_pentagon, pi3_pentagon):
    rng = np.random.default_rng(29)
    cases = [(right_pentagon, (a, b)) for a in range(1, 6) for b in range(1, 6) if a != b]
    for _ in range(20):
        cases.append((right_pentagon, _random_word(rng, 5, int(rng.integers(3, 5)))))
    for _ in range(10):
        cases.append((pi3_pentagon, _random_word(rng, 5, int(rng.integers(2, 5)))))
    compared = 0
    for poly, word in cases:
        eng = U.realizable(poly, word)
        hint = None
        if eng.witness is not None:
            hint = (eng.witness.chord.a, eng.witness.chord.b)
        orc = G.decide(poly, word, hint=hint)
        if not G.comparable(eng.verdict, eng.margin, orc):
            continue
        compared += 1
        assert eng.verdict == orc.verdict, (word, eng.verdict, orc.verdict, orc.margin)
    assert compared >= int(0.7 * len(cases))
