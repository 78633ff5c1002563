"""Blocked Gibbs sampler for the weak-limit sticky HDPHMM and DHDPHMM.

One sweep: state sequences by backward filtering / forward sampling, mixture
components given states, then transition and mixture weights, Gaussian
parameters, and (optionally) concentration parameters.
"""

import copy
import logging

import numpy as np

from ..errors import DataError, NonFiniteLikelihoodError
from . import gaussian
from .model import VARIANTS, Hyperparameters, LatentAssignment, TransducerModel
from .sticks import (
    StickWeights,
    resample_concentration_groups,
    resample_concentration_single,
    sample_crt,
    sample_gem,
    sample_truncated_gem_posterior,
)

log = logging.getLogger(__name__)

FRAME_BUDGET = 20000
_TINY = 1e-300


def dirichlet_rows(rng, alpha):
    g = rng.gamma(np.maximum(alpha, _TINY))
    s = g.sum(axis=1, keepdims=True)
    bad = ~(s[:, 0] > 0)
    if bad.any():
        g[bad] = 0.0
        g[bad, np.argmax(alpha[bad], axis=1)] = 1.0
        s[bad] = 1.0
    return g / s


def _stack(corpus):
    if not corpus:
        return np.zeros((0, 0)), np.zeros(1, dtype=int)
    X = np.concatenate([np.asarray(seq.frames, dtype=np.float64) for seq in corpus])
    bounds = np.concatenate([[0], np.cumsum([len(seq) for seq in corpus])])
    return X, bounds


def init_model(corpus, variant="hdphmm", hyper=None, truncation=300, components=1,
               pool_size=None, covariance="diag", init_states=50, rng=None, share=True):
    """Random initial assignments and a model drawn from the posterior given them.

    ``share=False`` (DHDPHMM only) ties state j to pool component j, which turns
    the shared pool into one private Gaussian per state.
    """
    if variant not in VARIANTS:
        raise DataError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if covariance not in ("diag", "full"):
        raise DataError(f"unknown covariance type {covariance!r}")
    if not corpus:
        raise DataError("cannot initialise a model from an empty corpus")
    rng = rng if rng is not None else np.random.default_rng()
    hyper = copy.deepcopy(hyper) if hyper is not None else Hyperparameters()
    X, _ = _stack(corpus)
    if hyper.niw is None:
        hyper.niw = gaussian.NIWPrior.from_data(X)
    elif hyper.niw.dim != X.shape[1]:
        raise DataError(f"prior dimension {hyper.niw.dim} != feature dimension {X.shape[1]}")
    K = int(truncation)
    n_init = min(init_states, K)
    D = X.shape[1]

    g = sample_gem(hyper.gamma, K, rng)
    beta = g.weights.copy()
    beta[-1] += g.remainder
    if variant == "hdphmm":
        L = int(components)
        psi = np.full((K, L), 1.0 / L)
        means = np.zeros((K, L, D))
        covs = np.ones((K, L, D)) if covariance == "diag" else np.tile(np.eye(D), (K, L, 1, 1))
        xi = None
        n_comp_init = L
    else:
        G = int(pool_size) if pool_size and share else K
        psi = np.full((K, G), 1.0 / G) if share else np.eye(K)
        means = np.zeros((G, D))
        covs = np.ones((G, D)) if covariance == "diag" else np.tile(np.eye(D), (G, 1, 1))
        xi = np.full(G, 1.0 / G)
        n_comp_init = min(init_states, G)

    model = TransducerModel(
        variant=variant, beta=StickWeights(beta, 0.0), pi0=np.full(K, 1.0 / K),
        pi=np.full((K, K), 1.0 / K), psi=psi, means=means, covs=covs, hyper=hyper,
        covariance=covariance, xi=xi, shared=share or variant != "dhdphmm")
    assignments = [
        LatentAssignment(seq.utterance_id,
                         rng.integers(n_init, size=len(seq)),
                         rng.integers(n_comp_init, size=len(seq)))
        for seq in corpus
    ]
    if not model.shared:
        for a in assignments:
            a.s = a.z.copy()
    resample_globals(model, X, assignments, rng, resample_hyper=False)
    return model, assignments


def gibbs_iteration(model, corpus, assignments, rng):
    """One full sweep; mutates and returns ``model`` with new assignments."""
    if not corpus:
        return model, list(assignments), 0.0
    if len(assignments) != len(corpus):
        raise DataError("assignments do not match corpus")
    for seq, a in zip(corpus, assignments):
        if len(a.z) != len(seq) or len(a.s) != len(seq):
            raise DataError(f"{seq.utterance_id}: assignment length mismatch")
        if seq.frames.shape[1] != model.dim:
            raise DataError(f"{seq.utterance_id}: feature dim {seq.frames.shape[1]} != {model.dim}")
    new_assign = sample_latents(model, corpus, rng)
    X, _ = _stack(corpus)
    resample_globals(model, X, new_assign, rng, resample_hyper=model.hyper.resample)
    ll = joint_loglik(model, X, new_assign)
    if not np.isfinite(ll):
        raise NonFiniteLikelihoodError(_worst_utterance(model, corpus, new_assign))
    model.sweeps_done += 1
    return model, new_assign, ll


def _chunks(corpus, budget):
    order = sorted(range(len(corpus)), key=lambda i: len(corpus[i]))
    chunk, frames = [], 0
    for i in order:
        if chunk and frames + len(corpus[i]) > budget:
            yield chunk
            chunk, frames = [], 0
        chunk.append(i)
        frames += len(corpus[i])
    if chunk:
        yield chunk


def sample_latents(model, corpus, rng, budget=FRAME_BUDGET):
    """Blocked resampling of z for every utterance, then s given z."""
    out = [None] * len(corpus)
    log_psi = _safe_log(model.psi)
    A = np.maximum(model.pi, _TINY)
    pi0 = np.maximum(model.pi0, _TINY)
    for idx in _chunks(corpus, budget):
        seqs = [corpus[i] for i in idx]
        X, bounds = _stack(seqs)
        comp = model.component_loglik(X)
        ll = model.state_loglik(X, comp=comp)
        lengths = np.diff(bounds)
        for u, seq in enumerate(seqs):
            block = ll[bounds[u]:bounds[u + 1]]
            if not np.all(np.isfinite(block.max(axis=1))):
                raise NonFiniteLikelihoodError(seq.utterance_id)
        z = sample_paths(ll, lengths, pi0, A, rng)
        zf = np.concatenate(z)
        if model.variant == "hdphmm":
            L = model.psi.shape[1]
            if L == 1:
                sf = np.zeros_like(zf)
            else:
                logits = comp[np.arange(zf.size), zf] + log_psi[zf]
                sf = _gumbel_argmax(logits, rng)
        elif model.shared:
            sf = _gumbel_argmax(comp + log_psi[zf], rng)
        else:
            sf = zf
        for u, i in enumerate(idx):
            a, b = bounds[u], bounds[u + 1]
            out[i] = LatentAssignment(corpus[i].utterance_id, z[u], sf[a:b].copy())
    return out


def sample_paths(ll, lengths, pi0, A, rng):
    """Backward filtering, forward sampling, batched over utterances.

    ``ll`` stacks per-frame state log-likelihoods of all utterances (F, K).
    """
    lengths = np.asarray(lengths)
    U, K = lengths.size, A.shape[0]
    Tm = int(lengths.max())
    bounds = np.concatenate([[0], np.cumsum(lengths)])
    e = np.ones((U, Tm, K))
    for u in range(U):
        block = ll[bounds[u]:bounds[u + 1]]
        e[u, :lengths[u]] = np.maximum(np.exp(block - block.max(axis=1, keepdims=True)), _TINY)
    B = np.ones((U, Tm, K))
    last = lengths - 1
    for t in range(Tm - 2, -1, -1):
        act = t < last
        if not act.any():
            continue
        nb = (e[act, t + 1] * B[act, t + 1]) @ A.T
        tot = nb.sum(axis=1, keepdims=True)
        nb = np.where(tot > 0, nb / np.where(tot > 0, tot, 1.0), 1.0 / K)
        B[act, t] = nb
    z = np.zeros((U, Tm), dtype=np.int64)
    z[:, 0] = _draw(pi0[None, :] * e[:, 0] * B[:, 0], rng)
    for t in range(1, Tm):
        act = t < lengths
        z[act, t] = _draw(A[z[act, t - 1]] * e[act, t] * B[act, t], rng)
    return [z[u, :lengths[u]].copy() for u in range(U)]


def _draw(p, rng):
    tot = p.sum(axis=1)
    bad = ~(tot > 0) | ~np.isfinite(tot)
    if bad.any():
        p = p.copy()
        p[bad] = 1.0
        tot = p.sum(axis=1)
    cum = np.cumsum(p, axis=1)
    u = rng.random(p.shape[0]) * tot
    idx = (cum < u[:, None]).sum(axis=1)
    return np.minimum(idx, p.shape[1] - 1)


def _gumbel_argmax(logits, rng):
    return np.argmax(logits + rng.gumbel(size=logits.shape), axis=1)


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def transition_counts(assignments, K):
    n = np.zeros((K, K), dtype=np.int64)
    n0 = np.zeros(K, dtype=np.int64)
    for a in assignments:
        n0[a.z[0]] += 1
        np.add.at(n, (a.z[:-1], a.z[1:]), 1)
    return n, n0


def resample_globals(model, X, assignments, rng, resample_hyper=True):
    """Steps after the latent update: weights, Gaussians, concentrations."""
    K = model.K
    h = model.hyper
    n, n0 = transition_counts(assignments, K)
    z = np.concatenate([a.z for a in assignments])
    s = np.concatenate([a.s for a in assignments])
    model.occupancy = np.bincount(z, minlength=K).astype(np.float64)

    # transition side: auxiliary tables, sticky overrides, then beta and pi
    beta = model.beta.weights
    conc = h.alpha * beta[None, :] + h.kappa * np.eye(K)
    m = sample_crt(n, conc, rng)
    m0 = sample_crt(n0, h.alpha * beta, rng)
    if h.kappa > 0:
        rho = h.rho
        p_override = rho / (rho + beta * (1.0 - rho))
        w = rng.binomial(np.diag(m), p_override)
    else:
        w = np.zeros(K, dtype=np.int64)
    mbar = m.copy()
    mbar[np.diag_indices(K)] -= w
    mbar_k = mbar.sum(axis=0) + m0
    beta = sample_truncated_gem_posterior(mbar_k, h.gamma, rng)
    model.beta = StickWeights(beta, 0.0)
    model.pi = dirichlet_rows(rng, h.alpha * beta[None, :] + h.kappa * np.eye(K) + n)
    model.pi0 = dirichlet_rows(rng, (h.alpha * beta + n0)[None, :])[0]

    # emission side
    if model.variant == "hdphmm":
        L = model.psi.shape[1]
        c = np.zeros((K, L), dtype=np.int64)
        np.add.at(c, (z, s), 1)
        if L == 1:
            model.psi = np.ones((K, 1))
        else:
            model.psi = np.vstack([sample_truncated_gem_posterior(c[j], h.sigma, rng)
                                   for j in range(K)])
        stats_ = gaussian.SuffStats(X, z * L + s, K * L, full=model.covariance == "full")
        means, covs = _sample_gaussians(h.niw, stats_, model.covariance, rng)
        model.means = means.reshape(K, L, -1)
        model.covs = covs.reshape((K, L) + covs.shape[1:])
        tables = None
    else:
        G = model.psi.shape[1]
        c = np.zeros((K, G), dtype=np.int64)
        np.add.at(c, (z, s), 1)
        tables = None
        if model.shared:
            tables = sample_crt(c, h.sigma * model.xi[None, :], rng)
            model.xi = sample_truncated_gem_posterior(tables.sum(axis=0), h.tau, rng)
            model.psi = dirichlet_rows(rng, h.sigma * model.xi[None, :] + c)
        stats_ = gaussian.SuffStats(X, s, G, full=model.covariance == "full")
        model.means, model.covs = _sample_gaussians(h.niw, stats_, model.covariance, rng)

    if resample_hyper:
        _resample_concentrations(model, n, m, w, mbar_k, c, tables, rng)


def _sample_gaussians(prior, stats_, covariance, rng):
    if covariance == "diag":
        return gaussian.sample_diag_posterior(prior, stats_, rng)
    return gaussian.sample_full_posterior(prior, stats_, rng)


def _resample_concentrations(model, n, m, w, mbar_k, c, tables, rng):
    h = model.hyper
    a, b = h.alpha_kappa_prior
    ak = resample_concentration_groups(h.alpha + h.kappa, n.sum(axis=1), m.sum(), a, b, rng)
    if h.kappa > 0:
        rc, rd = h.rho_prior
        rho = rng.beta(rc + w.sum(), rd + m.sum() - w.sum())
        rho = float(np.clip(rho, 1e-6, 1 - 1e-6))
    else:
        rho = 0.0
    h.alpha, h.kappa = (1.0 - rho) * ak, rho * ak

    a, b = h.gamma_prior
    h.gamma = resample_concentration_single(
        h.gamma, float(mbar_k.sum()), int(np.count_nonzero(mbar_k)), a, b, rng)

    a, b = h.sigma_prior
    if model.variant == "hdphmm":
        if c.shape[1] > 1:
            h.sigma = resample_concentration_groups(
                h.sigma, c.sum(axis=1), np.count_nonzero(c), a, b, rng)
    elif model.shared:
        h.sigma = resample_concentration_groups(h.sigma, c.sum(axis=1), tables.sum(), a, b, rng)
        a, b = h.tau_prior
        t = tables.sum(axis=0)
        h.tau = resample_concentration_single(
            h.tau, float(t.sum()), int(np.count_nonzero(t)), a, b, rng)


def joint_loglik(model, X, assignments):
    """log p(x, z, s | pi, psi, theta) at the current parameters."""
    if not assignments:
        return 0.0
    log_pi = _safe_log(model.pi)
    total = 0.0
    for a in assignments:
        total += _safe_log(model.pi0[a.z[0]]) + log_pi[a.z[:-1], a.z[1:]].sum()
    z = np.concatenate([a.z for a in assignments])
    s = np.concatenate([a.s for a in assignments])
    total += _safe_log(model.psi[z, s]).sum()
    if model.variant == "hdphmm":
        L = model.psi.shape[1]
        means, covs = model._flat_components()
        comp = z * L + s
    else:
        means, covs, comp = model.means, model.covs, s
    total += gaussian.assigned_loglik(X, comp, means, covs, model.covariance).sum()
    return float(total)


def _worst_utterance(model, corpus, assignments):
    for seq, a in zip(corpus, assignments):
        X = np.asarray(seq.frames, dtype=np.float64)
        if not np.isfinite(joint_loglik(model, X, [a])):
            return seq.utterance_id
    return corpus[0].utterance_id if corpus else ""
