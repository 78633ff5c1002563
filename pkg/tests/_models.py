"""Hand-built transducer models for tests."""

import numpy as np

from adu.npb import Hyperparameters, StickWeights, TransducerModel


def gaussian_hmm(means, trans, init=None, var=1.0):
    """Single-Gaussian-per-state HDPHMM with every state marked occupied."""
    means = np.asarray(means, dtype=np.float64)
    K, D = means.shape
    trans = np.asarray(trans, dtype=np.float64)
    init = np.full(K, 1.0 / K) if init is None else np.asarray(init, dtype=np.float64)
    return TransducerModel(
        variant="hdphmm", beta=StickWeights(np.full(K, 1.0 / K)), pi0=init, pi=trans,
        psi=np.ones((K, 1)), means=means[:, None, :], covs=np.full((K, 1, D), var),
        hyper=Hyperparameters(), occupancy=np.ones(K))


def random_hmm(rng, K, D=39, spread=0.5):
    trans = rng.dirichlet(np.ones(K), size=K)
    return gaussian_hmm(rng.normal(0, spread, (K, D)), trans, rng.dirichlet(np.ones(K)))
