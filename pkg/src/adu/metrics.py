"""P@N, EER/DET, stem-aware hit judgment, and unit/phoneme confusion matrices."""

import dataclasses
import warnings
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateDetError, TimeBaseMismatchError
from .features import frame_center_ms


class PrecisionWarning(UserWarning):
    """Fewer hits than the requested N; precision computed over what is available."""


def stem(word):
    """Light suffix stripping: enough to merge year/years, warm/warmed, age/ages."""
    w = word.lower()
    if w.endswith("ing") and len(w) > 5:
        return w[:-3]
    if w.endswith("ed") and len(w) > 4:
        return w[:-2]
    if w.endswith("es") and len(w) > 4 and w[:-2].endswith(("s", "x", "z", "ch", "sh")):
        return w[:-2]
    if w.endswith("s") and not w.endswith("ss") and len(w) > 3:
        return w[:-1]
    return w


@dataclasses.dataclass
class GroundTruth:
    """utterance_id -> set of (word, stem) occurrences."""

    occurrences: dict

    def __post_init__(self):
        for uid, occ in self.occurrences.items():
            for word, st in occ:
                if st != st.lower() or stem(word) != st:
                    raise DataError(f"{uid}: stem {st!r} does not match word {word!r}")

    @classmethod
    def from_words(cls, words_by_utt):
        return cls({u: {(w.lower(), stem(w)) for w in ws} for u, ws in words_by_utt.items()})

    def contains(self, utterance_id, query):
        qs = stem(query)
        return any(st == qs for _, st in self.occurrences.get(utterance_id, ()))

    def n_occurrences(self, query):
        return sum(1 for u in self.occurrences if self.contains(u, query))

    @classmethod
    def read_tsv(cls, path):
        rows = Path(path).read_text().splitlines()
        if not rows or rows[0].split("\t")[:2] != ["utterance_id", "word"]:
            raise DataError(f"{path}: expected header utterance_id, word, start_ms, end_ms")
        words = {}
        for r in rows[1:]:
            if r.strip():
                parts = r.split("\t")
                words.setdefault(parts[0], []).append(parts[1])
        return cls.from_words(words)


def write_truth_tsv(rows, path):
    """rows: iterable of (utterance_id, word, start_ms, end_ms)."""
    lines = ["utterance_id\tword\tstart_ms\tend_ms"]
    lines += [f"{u}\t{w}\t{s:g}\t{e:g}" for u, w, s, e in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def precision_at_n(result, truth, n=None):
    """Fraction of the top-n hits whose utterance contains the query's stem.

    ``n`` defaults to the number of test utterances containing the keyword.
    """
    if n is None:
        n = truth.n_occurrences(result.query_id)
    if n < 1:
        raise DataError(f"{result.query_id}: N must be >= 1")
    top = result.hits[:n]
    if len(top) < n:
        warnings.warn(f"{result.query_id}: only {len(top)} hits for N={n}", PrecisionWarning,
                      stacklevel=2)
        if not top:
            return 0.0
    correct = sum(truth.contains(h.utterance_id, result.query_id) for h in top)
    return correct / len(top)


@dataclasses.dataclass
class DetCurve:
    points: list
    eer: float

    def to_tsv(self):
        lines = ["threshold\tfar\tfrr"]
        lines += [f"{t!r}\t{fa!r}\t{fr!r}" for t, fa, fr in self.points]
        return "\n".join(lines) + "\n"


def eer(scores):
    """DET sweep over distinct scores (accept when score >= threshold) and its EER."""
    s = np.array([float(v) for v, _ in scores])
    y = np.array([bool(c) for _, c in scores])
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateDetError()
    thresholds = np.unique(s)
    order = np.argsort(s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    # counts strictly below each threshold
    below = np.searchsorted(s_sorted, thresholds, side="left")
    pos_below = np.concatenate([[0], np.cumsum(y_sorted)])[below]
    neg_below = below - pos_below
    far = np.append((n_neg - neg_below) / n_neg, 0.0)
    frr = np.append(pos_below / n_pos, 1.0)
    thr = np.append(thresholds, np.inf)
    points = list(zip(thr.tolist(), far.tolist(), frr.tolist()))
    return DetCurve(points, _crossing(far, frr))


def _crossing(far, frr):
    d = frr - far
    i = int(np.argmax(d >= 0))
    if d[i] == 0 or i == 0:
        return float(far[i])
    lam = -d[i - 1] / (d[i] - d[i - 1])
    return float(far[i - 1] + lam * (far[i] - far[i - 1]))


def average_keyword_metrics(per_keyword):
    per_keyword = list(per_keyword)
    if not per_keyword:
        raise DataError("no keywords to average")
    p = [v[0] for v in per_keyword]
    e = [v[1] for v in per_keyword]
    return float(sum(p) / len(p)), float(sum(e) / len(e))


def keyword_scores(result, truth):
    """(score, is_correct) for every hit of one keyword search."""
    return [(h.score, truth.contains(h.utterance_id, result.query_id)) for h in result.hits]


@dataclasses.dataclass
class ConfusionMatrix:
    counts: np.ndarray
    phoneme_ids: list
    unit_ids: list

    @property
    def total(self):
        return int(self.counts.sum())

    def dominant_fraction(self):
        """Per phoneme row: share of the row's frames in its most frequent unit."""
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, self.counts.max(axis=1) / rows, 0.0)

    def to_tsv(self):
        lines = ["phoneme\t" + "\t".join(str(u) for u in self.unit_ids)]
        for p, row in zip(self.phoneme_ids, self.counts):
            lines.append(p + "\t" + "\t".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def align_confusion(units, transcripts, frame_shift_ms=10.0, frame_length_ms=25.0):
    """Count (phoneme, unit) pairs frame by frame using the frame-centre time.

    ``transcripts`` maps utterance id to a list of (phoneme, start_ms, end_ms).
    """
    phonemes, unit_ids = set(), set()
    pairs = []
    for us in units:
        if us.utterance_id not in transcripts:
            raise DataError(f"{us.utterance_id}: no transcript")
        segs = sorted(transcripts[us.utterance_id], key=lambda s: s[1])
        if not segs:
            raise DataError(f"{us.utterance_id}: empty transcript")
        labels = us.labels()
        T = labels.size
        end_ms = segs[-1][2]
        expected = max(0, int(np.floor((end_ms - frame_length_ms) / frame_shift_ms)) + 1)
        if abs(T - expected) > 1:
            raise TimeBaseMismatchError(
                f"{us.utterance_id}: {T} frames but transcript implies {expected}")
        starts = np.array([s[1] for s in segs])
        centres = frame_center_ms(np.arange(T), frame_shift_ms, frame_length_ms)
        idx = np.clip(np.searchsorted(starts, centres, side="right") - 1, 0, len(segs) - 1)
        ph = [segs[i][0] for i in idx]
        phonemes.update(ph)
        unit_ids.update(labels.tolist())
        pairs.append((ph, labels))
    phoneme_ids = sorted(phonemes)
    unit_list = sorted(unit_ids)
    p_index = {p: i for i, p in enumerate(phoneme_ids)}
    u_index = {u: i for i, u in enumerate(unit_list)}
    counts = np.zeros((len(phoneme_ids), len(unit_list)), dtype=np.int64)
    for ph, labels in pairs:
        np.add.at(counts, ([p_index[p] for p in ph], [u_index[u] for u in labels.tolist()]), 1)
    return ConfusionMatrix(counts, phoneme_ids, unit_list)
