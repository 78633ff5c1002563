import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import brute_eer
from adu.errors import DataError, DegenerateDetError, TimeBaseMismatchError
from adu.metrics import (
    GroundTruth,
    PrecisionWarning,
    align_confusion,
    average_keyword_metrics,
    eer,
    keyword_scores,
    precision_at_n,
    stem,
    write_truth_tsv,
)
from adu.search import QueryHit, SearchResult
from adu.synth import phone_segments
from adu.transducer import UnitSequence


def result(query, uids, scores=None):
    scores = scores if scores is not None else list(range(len(uids), 0, -1))
    return SearchResult(query, [QueryHit(u, float(s), 0, 0) for u, s in zip(uids, scores)])


TRUTH = GroundTruth.from_words({
    "a": ["year", "the"], "b": ["years", "ago"], "c": ["money"], "d": ["the"],
    "e": ["year"], "f": ["warm"],
})


# -- stemming and P@N --------------------------------------------------------

@pytest.mark.parametrize("word,expected", [
    ("years", "year"), ("year", "year"), ("warmed", "warm"), ("ages", "age"),
    ("organizations", "organization"), ("children", "children"), ("glass", "glass"),
    ("boxes", "box"), ("surfaces", "surface"),
])
def test_stem(word, expected):
    assert stem(word) == expected


def test_year_matches_years():
    assert TRUTH.contains("b", "year")
    assert TRUTH.contains("a", "years")
    assert TRUTH.n_occurrences("year") == 3


def test_precision_all_correct():
    assert precision_at_n(result("year", ["a", "b", "e", "c"]), TRUTH, 3) == 1.0


def test_precision_alternating():
    assert precision_at_n(result("year", ["a", "c", "b", "d"]), TRUTH, 4) == 0.5


def test_precision_default_n_is_occurrence_count():
    # N = 3 true utterances; top 3 holds two of them
    assert precision_at_n(result("year", ["a", "c", "e", "b"]), TRUTH) == pytest.approx(2 / 3)


def test_precision_short_list_warns():
    with pytest.warns(PrecisionWarning):
        p = precision_at_n(result("year", ["a", "c"]), TRUTH, 5)
    assert p == 0.5


def test_precision_requires_positive_n():
    with pytest.raises(DataError):
        precision_at_n(result("year", ["a"]), TRUTH, 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=12), st.integers(0, 11), st.data())
def test_precision_bounded_and_monotone(correct, flip, data):
    n = data.draw(st.integers(1, len(correct)))
    uids = [f"u{i}" for i in range(len(correct))]
    truth = GroundTruth.from_words({u: ["kw"] if c else ["other"] for u, c in zip(uids, correct)})
    p = precision_at_n(result("kw", uids), truth, n)
    assert 0.0 <= p <= 1.0
    flip %= len(correct)
    fixed = GroundTruth.from_words(
        {u: ["kw"] if (c or i == flip) else ["other"] for i, (u, c) in enumerate(zip(uids, correct))})
    assert precision_at_n(result("kw", uids), fixed, n) >= p


def test_ground_truth_rejects_bad_stem():
    with pytest.raises(DataError):
        GroundTruth({"u": {("years", "Year")}})


def test_truth_tsv_roundtrip(tmp_path):
    rows = [("u1", "year", 100.0, 420.5), ("u1", "the", 0, 100), ("u2", "years", 5, 60)]
    write_truth_tsv(rows, tmp_path / "t.tsv")
    truth = GroundTruth.read_tsv(tmp_path / "t.tsv")
    assert truth.contains("u2", "year") and truth.contains("u1", "year")
    assert not truth.contains("u2", "the")


# -- EER ---------------------------------------------------------------------

def test_eer_perfect_separation():
    assert eer([(0.9, True), (0.8, True), (0.1, False), (0.2, False)]).eer == 0.0


def test_eer_identical_distributions():
    scores = [(s, c) for s in (0.1, 0.5, 0.9) for c in (True, False)]
    assert eer(scores).eer == pytest.approx(0.5)


def test_eer_hand_built():
    scores = [(0.9, True), (0.8, False), (0.7, True), (0.6, True), (0.4, False), (0.2, False)]
    det = eer(scores)
    assert det.eer == pytest.approx(brute_eer(scores), abs=1e-12)
    assert det.eer == pytest.approx(1 / 3)


def test_eer_degenerate():
    with pytest.raises(DegenerateDetError, match="degenerate DET"):
        eer([(0.1, True), (0.2, True)])


def test_eer_matches_oracle_on_random_sets(rng):
    for _ in range(100):
        n = int(rng.integers(2, 30))
        y = rng.random(n) < 0.4
        y[0], y[1] = True, False
        s = np.round(rng.normal(y * 1.0, 1.0), int(rng.integers(0, 3)))
        scores = list(zip(s.tolist(), y.tolist()))
        assert abs(eer(scores).eer - brute_eer(scores)) < 1e-12


def test_eer_invariant_under_increasing_transform(rng):
    for _ in range(50):
        y = rng.random(20) < 0.5
        y[:2] = [True, False]
        s = rng.normal(y * 0.8, 1.0)
        base = eer(list(zip(s, y))).eer
        for f in (np.exp, lambda v: 3 * v - 7, lambda v: np.arctan(v), lambda v: v ** 3):
            assert eer(list(zip(f(s), y))).eer == pytest.approx(base, abs=1e-12)


def test_det_curve_monotone(rng):
    y = rng.random(40) < 0.3
    y[:2] = [True, False]
    det = eer(list(zip(rng.normal(size=40), y)))
    far = [p[1] for p in det.points]
    frr = [p[2] for p in det.points]
    assert all(a >= b for a, b in zip(far, far[1:]))
    assert all(a <= b for a, b in zip(frr, frr[1:]))
    assert 0 <= det.eer <= 1
    assert det.to_tsv().startswith("threshold\tfar\tfrr\n")


def test_keyword_scores():
    res = result("year", ["a", "c"], [-0.1, -0.5])
    assert keyword_scores(res, TRUTH) == [(-0.1, True), (-0.5, False)]


# -- averaging ---------------------------------------------------------------

def test_average_single():
    assert average_keyword_metrics([(0.7, 0.1)]) == (0.7, 0.1)


def test_average_two():
    p, e = average_keyword_metrics([(0.4, 0.2), (0.8, 0.1)])
    assert p == pytest.approx(0.6) and e == pytest.approx(0.15)


def test_average_ten():
    vals = [(i / 10, (10 - i) / 20) for i in range(10)]
    p, e = average_keyword_metrics(vals)
    assert p == pytest.approx(0.45) and e == pytest.approx(0.275)


def test_average_empty():
    with pytest.raises(DataError):
        average_keyword_metrics([])


# -- confusion ---------------------------------------------------------------

def test_confusion_single_cell():
    T = 20
    units = [UnitSequence("u", [(5, 0, T)])]
    cm = align_confusion(units, {"u": [("aa", 0.0, 215.0)]})
    assert cm.counts.tolist() == [[T]]
    assert cm.total == T


def test_confusion_tiled_boundaries_is_permutation():
    labels = np.repeat([2, 0, 1, 2], 10)
    segs = phone_segments(np.repeat([0, 1, 2, 0], 10), names=["p", "q", "r"])
    cm = align_confusion([UnitSequence.from_labels("u", labels)], {"u": segs})
    assert cm.phoneme_ids == ["p", "q", "r"]
    assert cm.unit_ids == [0, 1, 2]
    assert cm.counts.tolist() == [[0, 0, 20], [10, 0, 0], [0, 10, 0]]
    assert cm.total == labels.size
    assert cm.dominant_fraction().tolist() == [1.0, 1.0, 1.0]


def test_confusion_time_base_mismatch():
    with pytest.raises(TimeBaseMismatchError):
        align_confusion([UnitSequence("u", [(0, 0, 50)])], {"u": [("aa", 0.0, 215.0)]})


def test_confusion_missing_transcript():
    with pytest.raises(DataError):
        align_confusion([UnitSequence("u", [(0, 0, 5)])], {})


def test_confusion_tsv():
    cm = align_confusion([UnitSequence("u", [(1, 0, 3), (4, 3, 5)])],
                         {"u": [("a", 0, 42.5), ("b", 42.5, 65.0)]})
    assert cm.to_tsv().splitlines() == ["phoneme\t1\t4", "a\t3\t0", "b\t0\t2"]
