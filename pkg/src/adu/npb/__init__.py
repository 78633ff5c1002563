"""Nonparametric Bayesian core: stick-breaking, HDP priors, Gibbs sampling."""

from .gaussian import COV_FLOOR, NIWPrior
from .gibbs import gibbs_iteration, init_model, joint_loglik
from .model import Hyperparameters, LatentAssignment, TransducerModel
from .sticks import (
    StickWeights,
    hdp_sample,
    sample_gem,
    sticky_transition_prior,
)

__all__ = [
    "COV_FLOOR", "NIWPrior", "gibbs_iteration", "init_model", "joint_loglik",
    "Hyperparameters", "LatentAssignment", "TransducerModel", "StickWeights",
    "hdp_sample", "sample_gem", "sticky_transition_prior",
]


def emission_loglik(model, j, frame):
    return model.emission_loglik(j, frame)
