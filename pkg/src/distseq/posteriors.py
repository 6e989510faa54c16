"""Closed-form local posteriors under the prior theta_i ~ N(0, tau i^{-1-2 alpha})."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from . import _io
from .errors import InvalidArgument
from .model import ModelConfig


@dataclass(frozen=True)
class DiagonalGaussian:
    """Product of independent normals N(mean_i, var_i), i = 1..N."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        var = np.array(self.var, dtype=float)
        if mean.ndim != 1 or mean.shape != var.shape:
            raise InvalidArgument("mean and var must be 1-d sequences of equal length")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise InvalidArgument("mean and var must be finite")
        # var_i may underflow to 0 for very smooth priors; negative is always a bug
        if np.any(var < 0):
            raise InvalidArgument("variances must be nonnegative")
        mean.flags.writeable = False
        var.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    def __len__(self) -> int:
        return self.mean.size

    @property
    def spread(self) -> float:
        """Total posterior variance sum_i var_i."""
        return math.fsum(self.var)

    def to_json(self) -> str:
        return _io.dumps({"mean": self.mean, "var": self.var})

    @classmethod
    def from_json(cls, text: str) -> "DiagonalGaussian":
        doc = json.loads(text)
        return cls(doc["mean"], doc["var"])


@dataclass(frozen=True)
class PriorSpec:
    alpha: float
    tau: float = 1.0

    def __post_init__(self):
        # alpha = 0 is the lower end of the MMLE search interval
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise InvalidArgument(f"alpha must be nonnegative, got {self.alpha}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise InvalidArgument(f"tau must be positive, got {self.tau}")


def _conjugate(y, alpha: float, tau: float, noise_var: float) -> DiagonalGaussian:
    """Posterior for y_i = theta_i + N(0, noise_var) under theta_i ~ N(0, tau i^{-1-2 alpha}).

    With r_i = noise_var i^{1+2 alpha} / tau the shrinkage factor is 1 / (1 + r_i);
    r_i is formed in log space since i^{1+2 alpha} overflows for large alpha.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise InvalidArgument("observations must be a 1-d sequence")
    shrink = shrinkage(y.size, alpha, tau, noise_var)
    return DiagonalGaussian(shrink * y, noise_var * shrink)


def shrinkage(N: int, alpha: float, tau: float, noise_var: float) -> np.ndarray:
    """Factors 1 / (1 + noise_var i^{1+2 alpha} / tau), i = 1..N, formed in log space."""
    log_i = np.log(np.arange(1, N + 1, dtype=float))
    log_r = math.log(noise_var / tau) + (1 + 2 * alpha) * log_i
    return expit(-log_r)


def local_posterior(y: Sequence[float], prior: PriorSpec, config: ModelConfig) -> DiagonalGaussian:
    """Plain local posterior: mean n/(n + sigma^2 m i^{1+2a}) y_i, var sigma^2 m/(n + sigma^2 m i^{1+2a})."""
    if prior.tau != 1:
        raise InvalidArgument("local_posterior uses the unscaled prior (tau = 1)")
    return _conjugate(y, prior.alpha, 1.0, config.local_noise_var)


def power_likelihood_posterior(y: Sequence[float], prior: PriorSpec,
                               config: ModelConfig) -> DiagonalGaussian:
    """Local likelihood raised to the power m: the noise level of a single machine holding all of n."""
    if prior.tau != 1:
        raise InvalidArgument("power_likelihood_posterior uses the unscaled prior (tau = 1)")
    return _conjugate(y, prior.alpha, 1.0, config.replace(m=1).local_noise_var)


def rescaled_prior_posterior(y: Sequence[float], prior: PriorSpec,
                             config: ModelConfig) -> DiagonalGaussian:
    return _conjugate(y, prior.alpha, prior.tau, config.local_noise_var)


def default_tau(alpha: float, beta: float, config: ModelConfig) -> float:
    """m n^{2(alpha - beta)/(1 + 2 beta)}; equals m (prior density to the power 1/m) when alpha = beta."""
    return config.m * config.n ** (2 * (alpha - beta) / (1 + 2 * beta))
