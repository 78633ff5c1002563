"""Corpus ingestion for TIMIT-style layouts (audio + .wrd/.phn timing files).

Timing files hold one ``start_sample end_sample label`` triple per line.
Directory and extension case is ignored, so both the LDC layout
(``TRAIN/DR1/FCJF0/SA1.WAV``) and lower-cased copies work.
"""

import dataclasses
import logging
import warnings
from pathlib import Path

from .errors import DataError
from .features import clip_from_span, read_wav, utterance_id_for

log = logging.getLogger(__name__)

AUDIO_SUFFIXES = (".wav",)
SPLITS = ("train", "test")


class IngestWarning(UserWarning):
    pass


@dataclasses.dataclass
class Utterance:
    utterance_id: str
    split: str
    audio_path: Path
    words: list    # (word, start_sample, end_sample)
    phones: list   # (phone, start_sample, end_sample)


@dataclasses.dataclass
class CorpusIndex:
    root: Path
    utterances: dict

    def __len__(self):
        return len(self.utterances)

    def split(self, name):
        return [u for u in self.utterances.values() if u.split == name]


def read_timing(path):
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 3:
            raise DataError(f"{path}:{n}: expected 'start end label'")
        out.append((parts[2], int(parts[0]), int(parts[1])))
    return out


def _find_sibling(audio, suffix):
    for cand in audio.parent.iterdir():
        if cand.stem.lower() == audio.stem.lower().split(".")[0] and cand.suffix.lower() == suffix:
            return cand
    return None


def _split_of(rel):
    for part in rel.parts:
        if part.lower() in SPLITS:
            return part.lower()
    return "train"


def ingest_timit_layout(root):
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"corpus root {root} is not a directory")
    utts = {}
    audio_files = sorted(p for p in root.rglob("*") if p.is_file()
                         and p.suffix.lower() in AUDIO_SUFFIXES)
    for audio in audio_files:
        # LDC copies sometimes carry both SA1.WAV (SPHERE) and SA1.WAV.wav (RIFF)
        rel = audio.relative_to(root)
        uid = utterance_id_for(rel)
        if uid in utts:
            continue
        wrd = _find_sibling(audio, ".wrd")
        phn = _find_sibling(audio, ".phn")
        missing = [ext for ext, p in ((".wrd", wrd), (".phn", phn)) if p is None]
        if missing:
            msg = f"{rel}: missing {', '.join(missing)} timing file; skipped"
            warnings.warn(msg, IngestWarning, stacklevel=2)
            log.warning(msg)
            continue
        utts[uid] = Utterance(uid, _split_of(rel), audio, read_timing(wrd), read_timing(phn))
    if not utts:
        raise DataError(f"no usable utterances under {root}")
    return CorpusIndex(root, utts)


def extract_queries(index, word, split="train"):
    """Audio clips of every timed instance of ``word`` in the given split."""
    clips = []
    for utt in index.split(split):
        hits = [(a, b) for w, a, b in utt.words if w.lower() == word.lower()]
        if not hits:
            continue
        audio = read_wav(utt.audio_path, utt.utterance_id)
        for k, (a, b) in enumerate(hits):
            clips.append(clip_from_span(audio, a, b, f"{word}_{utt.utterance_id}_{k}"))
    return clips


def truth_rows(index, split="test", sample_rate=16000):
    """(utterance_id, word, start_ms, end_ms) rows for a ground-truth table."""
    rows = []
    for utt in index.split(split):
        for w, a, b in utt.words:
            rows.append((utt.utterance_id, w, 1000.0 * a / sample_rate, 1000.0 * b / sample_rate))
    return rows


def phone_transcripts(index, split=None, sample_rate=16000):
    """utterance_id -> [(phone, start_ms, end_ms)]."""
    utts = index.utterances.values() if split is None else index.split(split)
    return {u.utterance_id: [(p, 1000.0 * a / sample_rate, 1000.0 * b / sample_rate)
                             for p, a, b in u.phones] for u in utts}
