"""Stick-breaking weights, DP/HDP helpers, and auxiliary-count samplers."""

import dataclasses

import numpy as np

from ..errors import AduError


@dataclasses.dataclass
class StickWeights:
    """First K stick-breaking weights plus the unbroken remainder of the stick."""

    weights: np.ndarray
    remainder: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size < 1:
            raise AduError("stick weights must be a non-empty vector")
        if np.any(self.weights < 0) or self.remainder < 0:
            raise AduError("stick weights must be nonnegative")

    @property
    def K(self):
        return self.weights.size

    def total(self):
        return float(self.weights.sum()) + self.remainder


def break_sticks(v):
    """w_k = v_k * prod_{l<k} (1 - v_l); returns (weights, remainder)."""
    v = np.asarray(v, dtype=np.float64)
    left = np.concatenate([[1.0], np.cumprod(1.0 - v)])
    return v * left[:-1], float(left[-1])


def sample_gem(concentration, K, rng):
    """Draw the first K weights of beta ~ GEM(concentration)."""
    if not concentration > 0:
        raise AduError(f"GEM concentration must be positive, got {concentration}")
    if K < 1:
        raise AduError(f"truncation must be >= 1, got {K}")
    v = np.asarray(rng.beta(1.0, concentration, size=K), dtype=np.float64)
    w, rest = break_sticks(v)
    return StickWeights(w, rest)


def sample_truncated_gem_posterior(counts, concentration, rng):
    """Posterior of a K-truncated GEM prior given per-atom counts.

    v_k ~ Beta(1 + n_k, concentration + sum_{l>k} n_l) for k < K, v_K = 1, so
    the returned weights sum to one.
    """
    counts = np.asarray(counts, dtype=np.float64)
    tail = np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0.0]])
    v = rng.beta(1.0 + counts, concentration + tail)
    v[-1] = 1.0
    w, _ = break_sticks(v)
    return _renormalize(w)


def sticky_transition_prior(beta, j, hyper):
    """Base measure (alpha*beta + kappa*delta_j) / (alpha + kappa) for row j."""
    weights = beta.weights if isinstance(beta, StickWeights) else np.asarray(beta, float)
    if not 0 <= j < weights.size:
        raise AduError(f"state index {j} out of range [0, {weights.size})")
    alpha, kappa = hyper.alpha, hyper.kappa
    if alpha + kappa <= 0:
        raise AduError("alpha + kappa must be positive")
    if kappa == 0:
        return weights.copy()
    base = alpha * weights
    base[j] += kappa
    return base / (alpha + kappa)


def hdp_sample(gamma, alpha, n_groups, K, rng):
    """Weak-limit HDP draw: global weights from GEM(gamma), groups from DP(alpha, global)."""
    g0 = sample_gem(gamma, K, rng)
    w = _renormalize(g0.weights + g0.remainder / K)
    groups = np.vstack([dirichlet(rng, alpha * w) for _ in range(n_groups)])
    return w, groups


def dirichlet(rng, alpha):
    """Dirichlet draw that stays normalized when some concentrations are tiny."""
    alpha = np.asarray(alpha, dtype=np.float64)
    g = rng.gamma(np.maximum(alpha, 1e-300))
    s = g.sum()
    if not s > 0 or not np.isfinite(s):
        out = np.zeros_like(alpha)
        out[int(np.argmax(alpha))] = 1.0
        return out
    return g / s


def _renormalize(w):
    w = np.maximum(w, 0.0)
    return w / w.sum()


def sample_crt(counts, conc, rng):
    """Chinese-restaurant-table counts: number of tables for n customers.

    ``counts`` and ``conc`` broadcast together; each entry is
    sum_{i<n} Bernoulli(c / (c + i)).
    """
    counts = np.asarray(counts, dtype=np.int64)
    conc = np.broadcast_to(np.asarray(conc, dtype=np.float64), counts.shape)
    flat_n = counts.ravel()
    flat_c = conc.ravel()
    out = np.zeros(flat_n.size, dtype=np.int64)
    nz = np.flatnonzero(flat_n)
    if nz.size == 0:
        return out.reshape(counts.shape)
    reps = flat_n[nz]
    owner = np.repeat(nz, reps)
    starts = np.repeat(np.cumsum(reps) - reps, reps)
    i = np.arange(owner.size) - starts
    c = flat_c[owner]
    p = c / (c + i)
    hits = rng.random(owner.size) < p
    np.add.at(out, owner, hits)
    return out.reshape(counts.shape)


def resample_concentration_groups(conc, n_per_group, tables_per_group, a, b, rng, n_iter=20):
    """Auxiliary-variable update for a concentration shared by several DP groups.

    Gamma(a, rate b) prior; groups with no customers carry no information.
    """
    n = np.asarray(n_per_group, dtype=np.float64)
    m_total = float(np.sum(tables_per_group))
    n = n[n > 0]
    if n.size == 0:
        return float(rng.gamma(a, 1.0 / b))
    for _ in range(n_iter):
        r = rng.beta(conc + 1.0, n)
        s = rng.random(n.size) < n / (n + conc)
        shape = a + m_total - s.sum()
        rate = b - np.log(r).sum()
        conc = float(rng.gamma(max(shape, 1e-3), 1.0 / rate))
    return max(conc, 1e-6)


def resample_concentration_single(conc, n, k, a, b, rng, n_iter=20):
    """Escobar-West update of a single DP concentration (n customers, k atoms)."""
    if n <= 0:
        return float(rng.gamma(a, 1.0 / b))
    for _ in range(n_iter):
        eta = rng.beta(conc + 1.0, n)
        rate = b - np.log(eta)
        odds = (a + k - 1.0) / (n * rate)
        shape = a + k if rng.random() < odds / (1.0 + odds) else a + k - 1.0
        conc = float(rng.gamma(max(shape, 1e-3), 1.0 / rate))
    return max(conc, 1e-6)
