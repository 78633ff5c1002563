"""MFCC front end: 12 cepstra + log energy, with deltas and accelerations.

Also holds the WAV/SPHERE readers and the binary feature file format.
"""

import dataclasses
import math
import wave
from pathlib import Path

import numpy as np
from scipy.fft import dct

from . import binfmt
from .errors import (
    AudioTooShortError,
    DataError,
    MultiChannelAudioError,
    UnsupportedSampleRateError,
)

FEATURE_DIM = 39
SUPPORTED_RATES = (8000, 16000)
FEATURE_MAGIC = b"ADUFEAT\0"


@dataclasses.dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int
    id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise DataError(f"{self.id}: audio must be a 1-d sample array")
        if samples.size == 0:
            raise DataError(f"{self.id}: audio clip is empty")
        if self.sample_rate_hz <= 0:
            raise DataError(f"{self.id}: sample rate must be positive")
        object.__setattr__(self, "samples", samples.astype(np.int16, copy=False))

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


@dataclasses.dataclass(frozen=True)
class FeatureConfig:
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    n_filters: int = 23
    n_cepstra: int = 12
    preemphasis: float = 0.97
    delta_window: int = 2
    lifter: int = 0
    low_freq_hz: float = 0.0
    high_freq_hz: float | None = None
    energy_floor: float = 1e-10
    cmn: bool = False

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown feature config keys: {sorted(unknown)}")
        return cls(**d)


@dataclasses.dataclass
class FeatureSequence:
    utterance_id: str
    frames: np.ndarray
    frame_shift_ms: float = 10.0
    frame_length_ms: float = 25.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[1] != FEATURE_DIM:
            raise DataError(
                f"{self.utterance_id}: features must be T x {FEATURE_DIM}, got {frames.shape}")
        if frames.shape[0] < 1:
            raise DataError(f"{self.utterance_id}: feature sequence is empty")
        if not np.all(np.isfinite(frames)):
            raise DataError(f"{self.utterance_id}: non-finite feature values")
        if self.frame_shift_ms <= 0 or self.frame_length_ms <= 0:
            raise DataError(f"{self.utterance_id}: frame timing must be positive")
        self.frames = frames

    def __len__(self):
        return self.frames.shape[0]


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=float) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(n_filters, n_fft, sample_rate, low_hz=0.0, high_hz=None):
    """Triangular filters on FFT bins, spaced evenly on the HTK mel scale."""
    high_hz = sample_rate / 2 if high_hz is None else high_hz
    mels = np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), n_filters + 2)
    bins = np.floor((n_fft + 1) * mel_to_hz(mels) / sample_rate).astype(int)
    fb = np.zeros((n_filters, n_fft // 2 + 1))
    k = np.arange(n_fft // 2 + 1)
    for j in range(n_filters):
        lo, mid, hi = bins[j], bins[j + 1], bins[j + 2]
        if mid > lo:
            rise = (k >= lo) & (k < mid)
            fb[j, rise] = (k[rise] - lo) / (mid - lo)
        if hi > mid:
            fall = (k >= mid) & (k < hi)
            fb[j, fall] = (hi - k[fall]) / (hi - mid)
    return fb


def deltas(feat, window=2):
    """Regression deltas over +/- window frames, edges replicated."""
    feat = np.asarray(feat, dtype=np.float64)
    n_frames = feat.shape[0]
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    padded = np.pad(feat, ((window, window), (0, 0)), mode="edge")
    out = np.zeros_like(feat)
    for n in range(1, window + 1):
        out += n * (padded[window + n:window + n + n_frames]
                    - padded[window - n:window - n + n_frames])
    return out / denom


def frame_geometry(sample_rate, config):
    flen = int(round(sample_rate * config.frame_length_ms / 1000.0))
    fshift = int(round(sample_rate * config.frame_shift_ms / 1000.0))
    return flen, fshift


def num_frames(n_samples, frame_len, frame_shift):
    if n_samples < frame_len:
        return 0
    return (n_samples - frame_len) // frame_shift + 1


def extract_mfcc(clip, config=None):
    config = config or FeatureConfig()
    rate = clip.sample_rate_hz
    if rate not in SUPPORTED_RATES:
        raise UnsupportedSampleRateError(rate, SUPPORTED_RATES)
    flen, fshift = frame_geometry(rate, config)
    x = clip.samples.astype(np.float64)
    n_frames = num_frames(x.size, flen, fshift)
    if n_frames < 1:
        raise AudioTooShortError(x.size, flen)

    idx = np.arange(flen)[None, :] + fshift * np.arange(n_frames)[:, None]
    raw = x[idx]
    energy = np.log(np.maximum(np.sum(raw * raw, axis=1), config.energy_floor))

    emph = np.append(x[0], x[1:] - config.preemphasis * x[:-1])
    frames = emph[idx] * np.hamming(flen)
    n_fft = 1 << (flen - 1).bit_length()
    power = np.abs(np.fft.rfft(frames, n_fft)) ** 2 / n_fft
    fb = mel_filterbank(config.n_filters, n_fft, rate, config.low_freq_hz, config.high_freq_hz)
    fbank = power @ fb.T
    fbank = np.where(fbank == 0.0, np.finfo(float).eps, fbank)
    cep = dct(np.log(fbank), type=2, axis=1, norm="ortho")[:, 1:config.n_cepstra + 1]
    if config.lifter > 0:
        n = np.arange(1, config.n_cepstra + 1)
        cep = cep * (1 + (config.lifter / 2.0) * np.sin(np.pi * n / config.lifter))

    static = np.hstack([cep, energy[:, None]])
    d1 = deltas(static, config.delta_window)
    d2 = deltas(d1, config.delta_window)
    feats = np.hstack([static, d1, d2])
    if feats.shape[1] != FEATURE_DIM:
        raise DataError(f"config yields {feats.shape[1]} dims, expected {FEATURE_DIM}")
    return FeatureSequence(clip.id, feats, config.frame_shift_ms, config.frame_length_ms)


def corpus_mean_normalize(seqs):
    """Subtract the corpus-wide mean from every frame of every sequence."""
    seqs = list(seqs)
    if not seqs:
        return seqs
    total = sum(s.frames.astype(np.float64).sum(axis=0) for s in seqs)
    mean = total / sum(len(s) for s in seqs)
    return [dataclasses.replace(s, frames=s.frames - mean) for s in seqs]


# -- audio I/O ---------------------------------------------------------------

def _read_sphere(path, data):
    header_size = int(data[8:16].decode("ascii").strip())
    fields = {}
    for line in data[16:header_size].decode("ascii", "replace").splitlines():
        parts = line.split()
        if len(parts) >= 3:
            fields[parts[0]] = parts[2]
        if parts and parts[0] == "end_head":
            break
    if fields.get("sample_coding", "pcm") != "pcm":
        raise DataError(f"{path}: unsupported SPHERE coding {fields['sample_coding']!r}")
    if int(fields.get("channel_count", 1)) != 1:
        raise MultiChannelAudioError(path, fields["channel_count"])
    if int(fields.get("sample_n_bytes", 2)) != 2:
        raise DataError(f"{path}: only 16-bit SPHERE audio is supported")
    order = "<i2" if fields.get("sample_byte_format", "01") == "01" else ">i2"
    n = int(fields.get("sample_count", (len(data) - header_size) // 2))
    samples = np.frombuffer(data, dtype=order, count=n, offset=header_size)
    return samples.astype(np.int16), int(fields["sample_rate"])


def read_wav(path, utterance_id=None):
    """Read mono 16-bit PCM from a RIFF WAV or NIST SPHERE file."""
    path = Path(path)
    uid = utterance_id if utterance_id is not None else path.stem
    with open(path, "rb") as f:
        head = f.read(8)
    if head[:7] == b"NIST_1A":
        samples, rate = _read_sphere(path, path.read_bytes())
        return AudioClip(samples, rate, uid)
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise DataError(f"{path}: not a readable WAV file ({exc})") from exc
    if channels != 1:
        raise MultiChannelAudioError(path, channels)
    if width != 2:
        raise DataError(f"{path}: expected 16-bit PCM, got {8 * width}-bit samples")
    return AudioClip(np.frombuffer(raw, dtype="<i2"), rate, uid)


def write_wav(clip, path):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(clip.sample_rate_hz)
        w.writeframes(clip.samples.astype("<i2").tobytes())


# -- feature files -----------------------------------------------------------

def write_feature_file(seq, path):
    data = binfmt.pack(FEATURE_MAGIC, seq.utterance_id, seq.frames,
                       seq.frame_shift_ms, seq.frame_length_ms, np.float32)
    Path(path).write_bytes(data)


def read_feature_file(path):
    data = Path(path).read_bytes()
    uid, mat, shift, length, _ = binfmt.unpack(
        data, FEATURE_MAGIC, np.float32, expected_dim=FEATURE_DIM, source=str(path))
    return FeatureSequence(uid, mat, shift, length)


def frame_center_ms(t, frame_shift_ms, frame_length_ms):
    return t * frame_shift_ms + frame_length_ms / 2.0


def clip_from_span(clip, start_sample, end_sample, clip_id):
    start = max(0, int(start_sample))
    end = min(clip.samples.size, int(end_sample))
    if end <= start:
        raise DataError(f"{clip_id}: empty span [{start_sample}, {end_sample})")
    return AudioClip(clip.samples[start:end].copy(), clip.sample_rate_hz, clip_id)


def duration_frames(duration_ms, config):
    """Frames whose window fits inside ``duration_ms``."""
    if duration_ms < config.frame_length_ms:
        return 0
    return int(math.floor((duration_ms - config.frame_length_ms) / config.frame_shift_ms)) + 1


def utterance_id_for(rel_path):
    """Id from a path relative to the corpus root, ignoring any train/test level."""
    rel = Path(rel_path)
    base = rel.name.split(".")[0]
    parts = [p for p in rel.parent.parts if p.lower() not in ("train", "test")]
    return "_".join(parts + [base]).lower()
