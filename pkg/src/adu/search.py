"""Query-by-example search over posteriorgrams with subsequence DTW."""

import dataclasses
from pathlib import Path

import numba
import numpy as np

from .errors import DataError, DimensionMismatchError


@dataclasses.dataclass(frozen=True)
class QueryHit:
    utterance_id: str
    score: float
    a_star: int
    b_star: int


@dataclasses.dataclass
class SearchResult:
    query_id: str
    hits: list
    threshold: float | None = None

    def top(self, n):
        return self.hits[:n]


def _matrix(p):
    return np.asarray(getattr(p, "P", p), dtype=np.float64)


def frame_cost(x, y):
    """-log(x . y) for two probability vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"frame dims differ: {x.shape} vs {y.shape}")
    with np.errstate(divide="ignore"):
        return float(-np.log(np.dot(x, y)))


def cost_matrix(X, Y):
    X, Y = _matrix(X), _matrix(Y)
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatchError(
            f"unit dimension differs: query {X.shape[1]}, target {Y.shape[1]}")
    with np.errstate(divide="ignore"):
        return -np.log(X @ Y.T)


@numba.njit(cache=True)
def _accumulate(C):
    N, M = C.shape
    D = np.empty((N, M))
    for m in range(M):
        D[0, m] = C[0, m]
    for n in range(1, N):
        D[n, 0] = D[n - 1, 0] + C[n, 0]
        for m in range(1, M):
            best = D[n - 1, m - 1]
            if D[n - 1, m] < best:
                best = D[n - 1, m]
            if D[n, m - 1] < best:
                best = D[n, m - 1]
            D[n, m] = best + C[n, m]
    return D


@numba.njit(cache=True)
def _backtrack(D, b):
    n, m = D.shape[0] - 1, b
    while n > 0:
        if m == 0:
            n -= 1
            continue
        diag, up, left = D[n - 1, m - 1], D[n - 1, m], D[n, m - 1]
        if diag <= up and diag <= left:
            n -= 1
            m -= 1
        elif up <= left:
            n -= 1
        else:
            m -= 1
    return m


def subsequence_dtw_cost(C):
    """(distance, a*, b*) for a precomputed N x M cost matrix."""
    C = np.ascontiguousarray(C, dtype=np.float64)
    if C.ndim != 2 or min(C.shape) < 1:
        raise DataError("cost matrix must be non-empty")
    D = _accumulate(C)
    b = int(np.argmin(D[-1]))
    a = int(_backtrack(D, b))
    return float(D[-1, b]), a, b


def subsequence_dtw(query, target):
    """Best-matching target span for the whole query: (distance, a*, b*), inclusive span."""
    return subsequence_dtw_cost(cost_matrix(query, target))


def _utt_id(p, i):
    return getattr(p, "utterance_id", f"utt{i}")


def _score_all(queries, corpus, combine):
    if combine not in ("max", "mean"):
        raise DataError(f"unknown combination rule {combine!r}")
    hits = []
    for i, target in enumerate(corpus):
        best = None
        scores = []
        for q in queries:
            dist, a, b = subsequence_dtw(q, target)
            score = -dist / len(_matrix(q))
            scores.append(score)
            if best is None or score > best[0]:
                best = (score, a, b)
        score = best[0] if combine == "max" else float(np.mean(scores))
        hits.append(QueryHit(_utt_id(target, i), score, best[1], best[2]))
    return hits


def search_keyword(queries, corpus, threshold=None, combine="max", top=None, query_id=None):
    """Score every corpus utterance against one or more examples of a keyword."""
    queries = list(queries)
    if not queries:
        raise DataError("no query examples")
    dims = {_matrix(q).shape[1] for q in queries}
    if len(dims) != 1:
        raise DimensionMismatchError(f"query examples disagree on unit dimension: {dims}")
    hits = _score_all(queries, list(corpus), combine)
    if threshold is not None:
        hits = [h for h in hits if h.score > threshold]
    hits.sort(key=lambda h: (-h.score, h.utterance_id))
    if top is not None:
        hits = hits[:top]
    qid = query_id if query_id is not None else _utt_id(queries[0], 0)
    return SearchResult(qid, hits, threshold)


def search_corpus(query, corpus, threshold=None, top=None):
    return search_keyword([query], corpus, threshold=threshold, top=top)


RESULT_HEADER = ("query_id", "utterance_id", "score", "a_star", "b_star")


def format_results(results):
    lines = ["\t".join(RESULT_HEADER)]
    for res in results:
        for h in res.hits:
            lines.append(f"{res.query_id}\t{h.utterance_id}\t{h.score!r}\t{h.a_star}\t{h.b_star}")
    return "\n".join(lines) + "\n"


def write_results(results, path):
    Path(path).write_text(format_results(results))


def read_results(path):
    rows = Path(path).read_text().splitlines()
    if not rows or tuple(rows[0].split("\t")) != RESULT_HEADER:
        raise DataError(f"{path}: not a search result table")
    by_query = {}
    for r in rows[1:]:
        if not r.strip():
            continue
        q, u, s, a, b = r.split("\t")
        by_query.setdefault(q, []).append(QueryHit(u, float(s), int(a), int(b)))
    out = []
    for q, hits in by_query.items():
        hits.sort(key=lambda h: (-h.score, h.utterance_id))
        out.append(SearchResult(q, hits))
    return out
