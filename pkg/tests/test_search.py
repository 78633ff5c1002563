import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import brute_subsequence_dtw
from adu.errors import DimensionMismatchError
from adu.search import (
    cost_matrix,
    frame_cost,
    read_results,
    search_corpus,
    search_keyword,
    subsequence_dtw,
    subsequence_dtw_cost,
    write_results,
)
from adu.transducer import Posteriorgram, floor_rows


def pgram(uid, P):
    P = np.asarray(P, dtype=float)
    return Posteriorgram(uid, P, np.arange(P.shape[1]))


def one_hot(labels, U):
    return np.eye(U)[np.asarray(labels)]


def random_pgram(rng, T, U):
    return floor_rows(rng.dirichlet(np.full(U, 0.3), size=T))


# -- frame cost --------------------------------------------------------------

def test_cost_one_hot_match_is_zero():
    x = np.array([0.0, 1.0, 0.0])
    assert frame_cost(x, x) == 0.0


def test_cost_uniform():
    u = np.full(4, 0.25)
    assert abs(frame_cost(u, u) - (-np.log(0.25))) < 1e-12


def test_cost_disjoint_floored_one_hots():
    P = floor_rows(np.eye(2), 1e-6)
    c = frame_cost(P[0], P[1])
    assert c == pytest.approx(-np.log(2e-6 * (1 - 1e-6)), rel=1e-9)
    assert round(c, 2) == 13.12


def test_cost_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        frame_cost(np.ones(3) / 3, np.ones(4) / 4)
    with pytest.raises(DimensionMismatchError):
        subsequence_dtw(pgram("a", np.ones((2, 3)) / 3), pgram("b", np.ones((2, 4)) / 4))


# -- subsequence DTW ---------------------------------------------------------

def test_dtw_matches_double_brute_force(rng):
    for _ in range(150):
        N, M, U = int(rng.integers(1, 5)), int(rng.integers(1, 9)), int(rng.integers(2, 5))
        C = cost_matrix(random_pgram(rng, N, U), random_pgram(rng, M, U))
        assert subsequence_dtw_cost(C) == brute_subsequence_dtw(C)


def test_single_frame_query(rng):
    X, Y = random_pgram(rng, 1, 3), random_pgram(rng, 7, 3)
    costs = [frame_cost(X[0], y) for y in Y]
    d, a, b = subsequence_dtw(X, Y)
    assert d == min(costs)
    assert a == b == int(np.argmin(costs))


def test_exact_slice_found():
    target = one_hot([0, 1, 2, 3, 1, 0, 2, 3], 4)
    query = target[2:6]
    assert subsequence_dtw(query, target) == (0.0, 2, 5)


def test_self_match_one_hot():
    X = one_hot([0, 2, 1, 3, 0], 4)
    assert subsequence_dtw(X, X) == (0.0, 0, 4)


def test_self_match_floored_is_near_zero(rng):
    # floored rows cost slightly more than zero against themselves
    X = floor_rows(one_hot([0, 2, 1, 3, 0], 4))
    d, a, b = subsequence_dtw(X, X)
    assert (a, b) == (0, 4)
    assert 0 < d < 1e-4


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 8), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_distance_nonnegative(N, M, extra, seed):
    rng = np.random.default_rng(seed)
    X, Y = random_pgram(rng, N, 3), random_pgram(rng, M, 3)
    d, a, b = subsequence_dtw(X, Y)
    assert d >= 0
    assert 0 <= a <= b < M
    # appending target frames never increases the minimum
    Y2 = np.vstack([Y, random_pgram(rng, extra, 3)])
    assert subsequence_dtw(X, Y2)[0] <= d


# -- corpus search -----------------------------------------------------------

def planted_corpus(rng, U=5, n=10, floored=False):
    query = one_hot([1, 1, 3, 4, 4, 0], U)
    corpus = []
    for i in range(n):
        labels = rng.integers(U, size=30)
        P = one_hot(labels, U)
        if i == 6:
            P[12:18] = query
        corpus.append(pgram(f"utt{i}", floor_rows(P) if floored else P))
    return (floor_rows(query) if floored else query), corpus


def test_planted_query_ranks_first(rng):
    query, corpus = planted_corpus(rng)
    res = search_corpus(pgram("q", query), corpus)
    assert res.hits[0].utterance_id == "utt6"
    assert res.hits[0].score == 0.0
    assert (res.hits[0].a_star, res.hits[0].b_star) == (12, 17)
    assert len(res.hits) == 10


def test_planted_query_floored(rng):
    query, corpus = planted_corpus(rng, floored=True)
    res = search_corpus(pgram("q", query), corpus)
    assert res.hits[0].utterance_id == "utt6"
    assert res.hits[0].score > -1e-4


def test_threshold_infinity_gives_no_hits(rng):
    query, corpus = planted_corpus(rng)
    assert search_corpus(pgram("q", query), corpus, threshold=np.inf).hits == []


def test_threshold_is_strict(rng):
    query, corpus = planted_corpus(rng)
    res = search_corpus(pgram("q", query), corpus, threshold=0.0)
    assert res.hits == []
    res = search_corpus(pgram("q", query), corpus, threshold=-1e-9)
    assert [h.utterance_id for h in res.hits] == ["utt6"]


def test_empty_corpus(rng):
    assert search_corpus(pgram("q", random_pgram(rng, 3, 3)), []).hits == []


def test_ranking_follows_perturbation(rng):
    base = one_hot([0, 1, 2, 3, 2, 1, 0, 3], 4)
    query = floor_rows(base)
    corpus = []
    for i, level in enumerate([0.05, 0.3, 0.6]):
        noisy = (1 - level) * base + level * rng.dirichlet(np.ones(4), size=8)
        corpus.append(pgram(f"p{i}", floor_rows(noisy)))
    res = search_corpus(pgram("q", query), corpus[::-1])
    assert [h.utterance_id for h in res.hits] == ["p0", "p1", "p2"]
    assert res.hits[0].score > res.hits[1].score > res.hits[2].score


def test_permutation_invariance(rng):
    query = pgram("q", random_pgram(rng, 4, 3))
    corpus = [pgram(f"u{i}", random_pgram(rng, int(rng.integers(4, 12)), 3)) for i in range(8)]
    corpus.append(pgram("dup", corpus[2].P.copy()))  # exact tie, broken by id
    base = search_corpus(query, corpus).hits
    for _ in range(5):
        perm = [corpus[i] for i in rng.permutation(len(corpus))]
        assert search_corpus(query, perm).hits == base


def test_score_is_length_normalized(rng):
    X, Y = random_pgram(rng, 4, 3), random_pgram(rng, 9, 3)
    d, a, b = subsequence_dtw(X, Y)
    hit = search_corpus(pgram("q", X), [pgram("t", Y)]).hits[0]
    assert hit.score == -d / 4
    assert (hit.a_star, hit.b_star) == (a, b)


def test_multiple_examples_combine(rng):
    q1, q2 = pgram("a", random_pgram(rng, 3, 3)), pgram("b", random_pgram(rng, 5, 3))
    corpus = [pgram(f"u{i}", random_pgram(rng, 10, 3)) for i in range(4)]
    s1 = {h.utterance_id: h.score for h in search_corpus(q1, corpus).hits}
    s2 = {h.utterance_id: h.score for h in search_corpus(q2, corpus).hits}
    best = search_keyword([q1, q2], corpus, query_id="kw")
    mean = search_keyword([q1, q2], corpus, combine="mean", query_id="kw")
    for h in best.hits:
        assert h.score == max(s1[h.utterance_id], s2[h.utterance_id])
    for h in mean.hits:
        assert h.score == pytest.approx((s1[h.utterance_id] + s2[h.utterance_id]) / 2)
    assert best.query_id == "kw"


def test_top_n(rng):
    query, corpus = planted_corpus(rng)
    assert len(search_corpus(pgram("q", query), corpus, top=3).hits) == 3


def test_results_tsv_roundtrip(tmp_path, rng):
    query, corpus = planted_corpus(rng)
    res = search_keyword([pgram("q", query)], corpus, query_id="kw")
    write_results([res], tmp_path / "r.tsv")
    text = (tmp_path / "r.tsv").read_text().splitlines()
    assert text[0] == "query_id\tutterance_id\tscore\ta_star\tb_star"
    back = read_results(tmp_path / "r.tsv")
    assert back[0].query_id == "kw"
    assert back[0].hits == res.hits
