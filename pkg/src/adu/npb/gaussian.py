"""Gaussian emissions with a normal-inverse-Wishart base measure.

Diagonal covariances use the per-dimension marginal of the NIW prior
(normal-inverse-gamma with shape (v0 - D + 1)/2 and scale S0_dd/2), so the
same hyperparameters drive both covariance types.
"""

import dataclasses

import numpy as np
from scipy import linalg, stats

from ..errors import AduError

COV_FLOOR = 1e-4
_LOG_2PI = np.log(2.0 * np.pi)


@dataclasses.dataclass
class NIWPrior:
    mean: np.ndarray
    k0: float
    v0: float
    scatter: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.scatter = np.asarray(self.scatter, dtype=np.float64)
        d = self.mean.size
        if self.scatter.shape != (d, d):
            raise AduError(f"NIW scatter must be {d}x{d}")
        if not self.k0 > 0:
            raise AduError("NIW k0 must be positive")
        if not self.v0 > d + 1:
            raise AduError(f"NIW v0 must exceed dim + 1 = {d + 1}, got {self.v0}")
        if not np.allclose(self.scatter, self.scatter.T):
            raise AduError("NIW scatter must be symmetric")
        if np.linalg.eigvalsh(self.scatter).min() <= 0:
            raise AduError("NIW scatter must be positive definite")

    @property
    def dim(self):
        return self.mean.size

    @classmethod
    def from_data(cls, X, k0=0.01, extra_dof=2.0, scale=0.5):
        """Weak prior centred on the data: E[Sigma] = scale * diag(var(X))."""
        X = np.asarray(X, dtype=np.float64)
        d = X.shape[1]
        var = X.var(axis=0) if X.shape[0] > 1 else np.ones(d)
        var = np.maximum(var, COV_FLOOR)
        v0 = d + 1 + extra_dof
        return cls(X.mean(axis=0), k0, v0, np.diag(scale * var * (v0 - d - 1)))


class SuffStats:
    """Per-component count, sum, and scatter about the component mean."""

    def __init__(self, X, labels, n_components, full=False):
        X = np.asarray(X, dtype=np.float64)
        d = X.shape[1]
        self.n = np.bincount(labels, minlength=n_components).astype(np.float64)
        self.sum = np.zeros((n_components, d))
        np.add.at(self.sum, labels, X)
        safe = np.maximum(self.n, 1.0)[:, None]
        self.mean = self.sum / safe
        centred = X - self.mean[labels]
        if full:
            self.scatter = np.zeros((n_components, d, d))
            for c in np.flatnonzero(self.n):
                rows = centred[labels == c]
                self.scatter[c] = rows.T @ rows
        else:
            self.scatter = np.zeros((n_components, d))
            np.add.at(self.scatter, labels, centred * centred)


def sample_diag_posterior(prior, stats_, rng):
    """Draw (means, variances) for every component from its NIG posterior."""
    n = stats_.n[:, None]
    k0, m0 = prior.k0, prior.mean[None, :]
    a0 = 0.5 * (prior.v0 - prior.dim + 1)
    b0 = 0.5 * np.diag(prior.scatter)[None, :]
    kn = k0 + n
    xbar = stats_.mean
    mn = (k0 * m0 + stats_.sum) / kn
    an = a0 + 0.5 * n
    bn = b0 + 0.5 * stats_.scatter + 0.5 * (k0 * n / kn) * (xbar - m0) ** 2
    an = np.broadcast_to(an, bn.shape)
    var = bn / rng.gamma(an)
    var = np.maximum(var, COV_FLOOR)
    means = mn + rng.standard_normal(mn.shape) * np.sqrt(var / kn)
    return means, var


def sample_full_posterior(prior, stats_, rng):
    C = stats_.n.size
    d = prior.dim
    means = np.empty((C, d))
    covs = np.empty((C, d, d))
    for c in range(C):
        n = stats_.n[c]
        kn = prior.k0 + n
        vn = prior.v0 + n
        mn = (prior.k0 * prior.mean + stats_.sum[c]) / kn
        diff = stats_.mean[c] - prior.mean
        Sn = prior.scatter + stats_.scatter[c] + (prior.k0 * n / kn) * np.outer(diff, diff)
        Sn = 0.5 * (Sn + Sn.T)
        cov = stats.invwishart.rvs(df=vn, scale=Sn, random_state=rng)
        cov = floor_covariance(np.atleast_2d(cov))
        covs[c] = cov
        means[c] = rng.multivariate_normal(mn, cov / kn, method="cholesky")
    return means, covs


def floor_covariance(cov, floor=COV_FLOOR):
    w, V = np.linalg.eigh(0.5 * (cov + cov.T))
    if w.min() >= floor:
        return cov
    return (V * np.maximum(w, floor)) @ V.T


def diag_loglik(X, means, variances):
    """log N(x_t; mu_c, diag(var_c)) for every frame/component pair, shape (T, C)."""
    X = np.asarray(X, dtype=np.float64)
    prec = 1.0 / variances
    const = -0.5 * (X.shape[1] * _LOG_2PI + np.log(variances).sum(axis=1)
                    + (means * means * prec).sum(axis=1))
    quad = (X * X) @ prec.T - 2.0 * X @ (means * prec).T
    return const[None, :] - 0.5 * quad


def full_loglik(X, means, covs):
    X = np.asarray(X, dtype=np.float64)
    out = np.empty((X.shape[0], means.shape[0]))
    d = X.shape[1]
    for c in range(means.shape[0]):
        L = np.linalg.cholesky(covs[c])
        z = linalg.solve_triangular(L, (X - means[c]).T, lower=True)
        out[:, c] = -0.5 * (d * _LOG_2PI + (z * z).sum(axis=0)) - np.log(np.diag(L)).sum()
    return out


def component_loglik(X, means, covs, covariance):
    if covariance == "diag":
        return diag_loglik(X, means, covs)
    return full_loglik(X, means, covs)


def assigned_loglik(X, comp, means, covs, covariance):
    """log N(x_t; theta_{comp[t]}) for each frame, shape (T,)."""
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    if covariance == "diag":
        r = X - means[comp]
        v = covs[comp]
        return -0.5 * (d * _LOG_2PI + np.log(v).sum(axis=1) + (r * r / v).sum(axis=1))
    out = np.empty(X.shape[0])
    for c in np.unique(comp):
        rows = comp == c
        out[rows] = full_loglik(X[rows], means[c:c + 1], covs[c:c + 1])[:, 0]
    return out
