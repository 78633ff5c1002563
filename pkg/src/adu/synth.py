"""Synthetic corpora with known ground truth.

Two generators: feature-level corpora sampled from a known Gaussian HMM, and
an audio-level mini corpus in a TIMIT-like directory layout with planted
keywords, used to exercise the whole pipeline without licensed data.
"""

import dataclasses
from pathlib import Path

import numpy as np

from .features import FEATURE_DIM, AudioClip, FeatureSequence, write_wav


@dataclasses.dataclass
class HmmCorpus:
    sequences: list
    labels: list
    means: np.ndarray
    transitions: np.ndarray


def sample_hmm_corpus(rng, n_states=3, n_utts=50, n_frames=100, separation=10.0,
                      self_prob=0.9, noise=1.0, dim=FEATURE_DIM):
    """Utterances from an ergodic Gaussian HMM with well-separated diagonal emissions."""
    means = rng.standard_normal((n_states, dim))
    means *= separation / np.linalg.norm(means, axis=1, keepdims=True)
    A = np.full((n_states, n_states), (1.0 - self_prob) / max(n_states - 1, 1))
    np.fill_diagonal(A, self_prob if n_states > 1 else 1.0)
    seqs, labels = [], []
    for u in range(n_utts):
        z = np.empty(n_frames, dtype=np.int64)
        z[0] = rng.integers(n_states)
        for t in range(1, n_frames):
            z[t] = rng.choice(n_states, p=A[z[t - 1]])
        x = means[z] + noise * rng.standard_normal((n_frames, dim))
        seqs.append(FeatureSequence(f"utt{u:03d}", x))
        labels.append(z)
    return HmmCorpus(seqs, labels, means, A)


def phone_segments(labels, frame_shift_ms=10.0, frame_length_ms=25.0, names=None):
    """Turn a frame label sequence into timed (phone, start_ms, end_ms) segments.

    Segment boundaries sit on frame centres so that each frame centre falls in
    the segment of its own label.
    """
    labels = np.asarray(labels)
    segs = []
    start = 0
    for t in range(1, labels.size + 1):
        if t == labels.size or labels[t] != labels[start]:
            name = names[labels[start]] if names is not None else f"p{labels[start]}"
            s_ms = 0.0 if start == 0 else (start - 0.5) * frame_shift_ms + frame_length_ms / 2
            e_ms = ((t - 0.5) * frame_shift_ms + frame_length_ms / 2 if t < labels.size
                    else (labels.size - 1) * frame_shift_ms + frame_length_ms)
            segs.append((name, s_ms, e_ms))
            start = t
    return segs


# -- audio-level mini corpus ------------------------------------------------

RATE = 16000
KEYWORDS = ("age", "warm", "year", "money", "surface")
FILLERS = ("the", "in", "had", "dark", "suit", "wash", "water", "all", "greasy",
           "like", "don't", "ask", "me", "to", "carry", "an", "oily", "rag")
# (f1, f2, f3) formant-like tone frequencies per synthetic phone
PHONES = {
    "aa": (700, 1200, 2600), "iy": (300, 2300, 3000), "uw": (320, 900, 2300),
    "eh": (550, 1800, 2500), "s": (4500, 5500, 6500), "m": (250, 1000, 2200),
    "r": (450, 1300, 1700), "k": (1800, 3000, 4200), "l": (380, 1100, 2800),
    "f": (3500, 4800, 6000), "ow": (500, 850, 2400), "n": (280, 1500, 2500),
}


def _lexicon(rng):
    names = sorted(PHONES)
    lex = {}
    used = set()
    for word in KEYWORDS + FILLERS:
        while True:
            n = 4 if word in KEYWORDS else int(rng.integers(2, 4))
            pron = tuple(names[i] for i in rng.choice(len(names), size=n, replace=True))
            if all(a != b for a, b in zip(pron, pron[1:])) and pron not in used:
                break
        used.add(pron)
        lex[word] = pron
    return lex


def _render_phone(phone, n, rng):
    t = np.arange(n) / RATE
    f = PHONES[phone]
    amps = (1.0, 0.6, 0.35)
    x = sum(a * np.sin(2 * np.pi * fk * t + rng.uniform(0, 2 * np.pi)) for a, fk in zip(amps, f))
    ramp = min(80, n // 4)
    env = np.ones(n)
    env[:ramp] = np.linspace(0.2, 1.0, ramp)
    env[n - ramp:] = np.linspace(1.0, 0.2, ramp)
    return 4000.0 * x * env


def _render_word(pron, rng):
    parts, phones, pos = [], [], 0
    for p in pron:
        n = int(rng.integers(1200, 2000))
        parts.append(_render_phone(p, n, rng))
        phones.append((p, pos, pos + n))
        pos += n
    return np.concatenate(parts), phones


def _silence(n, rng, level=30.0):
    return level * rng.standard_normal(n)


@dataclasses.dataclass
class SynthCorpus:
    root: Path
    keywords: tuple
    lexicon: dict


def make_mini_corpus(root, seed=0, n_train=24, n_test=30, keywords_per_test=1):
    """Write a TIMIT-like layout (train/ and test/) with planted keywords.

    Every keyword has one fixed rendering; it is planted verbatim into the
    utterances that contain it, in both splits, so test occurrences are exact
    copies of the training examples used as queries.
    """
    rng = np.random.default_rng(seed)
    root = Path(root)
    lex = _lexicon(rng)
    renders = {w: _render_word(lex[w], rng) for w in KEYWORDS + FILLERS}

    def build(split, idx, words):
        pieces, wrd, phn = [], [], []
        pos = 0
        sil = _silence(int(rng.integers(1600, 3200)), rng)
        pieces.append(sil)
        phn.append(("h#", pos, pos + sil.size))
        pos += sil.size
        for w in words:
            audio, phones = renders[w]
            pieces.append(audio)
            wrd.append((w, pos, pos + audio.size))
            phn.extend((p, pos + a, pos + b) for p, a, b in phones)
            pos += audio.size
            gap = _silence(int(rng.integers(800, 2400)), rng)
            pieces.append(gap)
            phn.append(("pau", pos, pos + gap.size))
            pos += gap.size
        samples = np.clip(np.round(np.concatenate(pieces)), -32768, 32767).astype(np.int16)
        spk = f"spk{idx % 4}"
        d = root / split / "dr1" / spk
        d.mkdir(parents=True, exist_ok=True)
        stem = d / f"utt{idx:03d}"
        write_wav(AudioClip(samples, RATE, stem.name), stem.with_suffix(".wav"))
        stem.with_suffix(".wrd").write_text("".join(f"{a} {b} {w}\n" for w, a, b in wrd))
        stem.with_suffix(".phn").write_text("".join(f"{a} {b} {p}\n" for p, a, b in phn))

    def filler_words(k):
        return [FILLERS[i] for i in rng.choice(len(FILLERS), size=k, replace=False)]

    for i in range(n_train):
        words = filler_words(int(rng.integers(2, 4)))
        words.insert(int(rng.integers(0, len(words) + 1)), KEYWORDS[i % len(KEYWORDS)])
        build("train", i, words)
    for i in range(n_test):
        words = filler_words(int(rng.integers(2, 4)))
        if i % 6 != 5:
            kws = [KEYWORDS[(i + j) % len(KEYWORDS)] for j in range(keywords_per_test)]
            for kw in kws:
                words.insert(int(rng.integers(0, len(words) + 1)), kw)
        build("test", 100 + i, words)
    return SynthCorpus(root, KEYWORDS, lex)
