"""The acoustic-unit transducer: training, Viterbi decoding, posteriorgrams."""

import dataclasses
import logging
from pathlib import Path

import numpy as np

from . import binfmt
from .errors import DataError
from .features import FEATURE_DIM
from .npb.gibbs import gibbs_iteration, init_model

log = logging.getLogger(__name__)

EPS_FLOOR = 1e-6
PGRAM_MAGIC = b"ADUPGRM\0"


@dataclasses.dataclass
class Posteriorgram:
    utterance_id: str
    P: np.ndarray
    unit_ids: np.ndarray
    frame_shift_ms: float = 10.0
    frame_length_ms: float = 25.0

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.unit_ids = np.asarray(self.unit_ids, dtype=np.int64)
        if self.P.ndim != 2 or self.P.shape[0] < 1:
            raise DataError(f"{self.utterance_id}: posteriorgram must be a non-empty T x U matrix")
        if self.unit_ids.size != self.P.shape[1]:
            raise DataError(f"{self.utterance_id}: {self.unit_ids.size} unit ids for "
                            f"{self.P.shape[1]} columns")

    def __len__(self):
        return self.P.shape[0]

    @property
    def n_units(self):
        return self.P.shape[1]


@dataclasses.dataclass
class UnitSequence:
    utterance_id: str
    runs: list

    @property
    def n_frames(self):
        return self.runs[-1][2] if self.runs else 0

    def labels(self):
        out = np.empty(self.n_frames, dtype=np.int64)
        for unit, a, b in self.runs:
            out[a:b] = unit
        return out

    @classmethod
    def from_labels(cls, utterance_id, labels):
        labels = np.asarray(labels)
        runs = []
        start = 0
        for t in range(1, labels.size + 1):
            if t == labels.size or labels[t] != labels[start]:
                runs.append((int(labels[start]), start, t))
                start = t
        return cls(utterance_id, runs)


# -- HMM kernels -------------------------------------------------------------

def viterbi(log_init, log_trans, loglik):
    """Exact MAP path; ties go to the lower state index."""
    T, K = loglik.shape
    delta = log_init + loglik[0]
    back = np.zeros((T, K), dtype=np.int64)
    cols = np.arange(K)
    for t in range(1, T):
        scores = delta[:, None] + log_trans
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], cols] + loglik[t]
    path = np.empty(T, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, float(delta[path[-1]])


def path_score(log_init, log_trans, loglik, path):
    s = log_init[path[0]] + loglik[0, path[0]]
    for t in range(1, len(path)):
        s = s + log_trans[path[t - 1], path[t]] + loglik[t, path[t]]
    return float(s)


def _log_matmul(log_v, A):
    m = np.max(log_v)
    if not np.isfinite(m):
        return np.full(A.shape[1], -np.inf)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(log_v - m) @ A) + m


def forward_backward(log_init, log_trans, loglik):
    """Per-frame state posteriors (T, K) and log p(x)."""
    T, K = loglik.shape
    A = np.exp(log_trans)
    fwd = np.empty((T, K))
    fwd[0] = log_init + loglik[0]
    for t in range(1, T):
        fwd[t] = _log_matmul(fwd[t - 1], A) + loglik[t]
    bwd = np.zeros((T, K))
    for t in range(T - 2, -1, -1):
        bwd[t] = _log_matmul(loglik[t + 1] + bwd[t + 1], A.T)
    post = fwd + bwd
    m = post.max(axis=1, keepdims=True)
    post = np.exp(post - m)
    post /= post.sum(axis=1, keepdims=True)
    top = fwd[-1].max()
    log_z = float(top + np.log(np.exp(fwd[-1] - top).sum()))
    return post, log_z


def floor_rows(P, eps=EPS_FLOOR):
    """Mix each row with the uniform floor: every entry >= eps, rows still sum to 1."""
    P = np.asarray(P, dtype=np.float64)
    U = P.shape[1]
    if eps <= 0 or U == 1:
        return P / P.sum(axis=1, keepdims=True)
    if eps * U >= 1:
        raise DataError(f"floor {eps} too large for {U} units")
    P = P / P.sum(axis=1, keepdims=True)
    return eps + (1.0 - U * eps) * P


# -- model-level operations --------------------------------------------------

def decoding_hmm(model, min_occupancy=0):
    """Restrict the model to its active states; returns (states, log_init, log_trans)."""
    states = model.active_states(min_occupancy)
    if states.size == 0:
        raise DataError("model has no active states; was it trained?")
    A = model.pi[np.ix_(states, states)]
    A = A / A.sum(axis=1, keepdims=True)
    p0 = model.pi0[states]
    p0 = p0 / p0.sum()
    with np.errstate(divide="ignore"):
        return states, np.log(p0), np.log(A)


def _check_features(features, model):
    frames = np.asarray(features.frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != model.dim:
        raise DataError(f"{features.utterance_id}: features are {frames.shape}, "
                        f"model expects {model.dim} dims")
    return frames


def decode(model, features, min_occupancy=0):
    X = _check_features(features, model)
    states, log_init, log_trans = decoding_hmm(model, min_occupancy)
    ll = model.state_loglik(X, states=states)
    path, _ = viterbi(log_init, log_trans, ll)
    return UnitSequence.from_labels(features.utterance_id, states[path])


def posteriorgram(model, features, floor=EPS_FLOOR, mode="posterior", min_occupancy=0):
    """Per-frame unit posteriors; ``mode="viterbi"`` gives floored one-hot rows instead."""
    X = _check_features(features, model)
    states, log_init, log_trans = decoding_hmm(model, min_occupancy)
    ll = model.state_loglik(X, states=states)
    if mode == "posterior":
        P, _ = forward_backward(log_init, log_trans, ll)
    elif mode == "viterbi":
        path, _ = viterbi(log_init, log_trans, ll)
        P = np.zeros((X.shape[0], states.size))
        P[np.arange(X.shape[0]), path] = 1.0
    else:
        raise DataError(f"unknown posteriorgram mode {mode!r}")
    return Posteriorgram(features.utterance_id, floor_rows(P, floor), states,
                         features.frame_shift_ms, features.frame_length_ms)


def train_transducer(corpus, hyper=None, variant="hdphmm", sweeps=1000, rng=None,
                     truncation=300, components=1, pool_size=None, covariance="diag",
                     init_states=50, seed=None, callback=None, share=True):
    """Fit a transducer by blocked Gibbs sampling; returns the final-sweep model."""
    corpus = list(corpus)
    if not corpus:
        raise DataError("training corpus is empty")
    for seq in corpus:
        if np.asarray(seq.frames).shape[1] != FEATURE_DIM:
            raise DataError(f"{seq.utterance_id}: expected {FEATURE_DIM}-dim features")
    if rng is None:
        rng = np.random.default_rng(seed)
    model, assign = init_model(corpus, variant=variant, hyper=hyper, truncation=truncation,
                               components=components, pool_size=pool_size,
                               covariance=covariance, init_states=init_states, rng=rng,
                               share=share)
    if seed is not None:
        model.seed_lineage.append(int(seed))
    for sweep in range(sweeps):
        model, assign, ll = gibbs_iteration(model, corpus, assign, rng)
        model.trace.append(ll)
        log.info("sweep %d/%d loglik %.3f states %d", sweep + 1, sweeps, ll, model.state_count)
        if callback is not None:
            callback(sweep, model, assign, ll)
    return model


# -- file formats ------------------------------------------------------------

def write_posteriorgram(pg, path):
    data = binfmt.pack(PGRAM_MAGIC, pg.utterance_id, pg.P, pg.frame_shift_ms,
                       pg.frame_length_ms, np.float64, labels=pg.unit_ids)
    Path(path).write_bytes(data)


def read_posteriorgram(path):
    uid, P, shift, length, labels = binfmt.unpack(
        Path(path).read_bytes(), PGRAM_MAGIC, np.float64, with_labels=True, source=str(path))
    return Posteriorgram(uid, P, labels, shift, length)


def write_units(units, path):
    lines = ["unit_id\tstart_frame\tend_frame"]
    lines += [f"{u}\t{a}\t{b}" for u, a, b in units.runs]
    Path(path).write_text("\n".join(lines) + "\n")


def read_units(path, utterance_id=None):
    path = Path(path)
    rows = path.read_text().splitlines()[1:]
    runs = []
    for r in rows:
        if r.strip():
            u, a, b = r.split("\t")
            runs.append((int(u), int(a), int(b)))
    return UnitSequence(utterance_id or path.stem, runs)
