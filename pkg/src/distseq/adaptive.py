"""Distributed maximum marginal likelihood tuning of the prior regularity.

Each machine reports its log marginal likelihood ``l_j(alpha)``; the centre
maximizes ``sum_j l_j`` over ``[0, log n]``.  Under the prior, machine j's
coordinates are independent ``N(0, i^{-1-2 alpha} + v)`` with ``v = sigma^2 m / n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import expit

from .aggregation import barycenter_diag
from .errors import InvalidArgument
from .model import DistributedData, ModelConfig, Signal, machine_sum
from .posteriors import DiagonalGaussian, PriorSpec, power_likelihood_posterior

_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class MmleSettings:
    grid_points: int = 200
    refine_tol: float = 1e-4
    trunc: int | None = None
    alpha_override: float | None = None  # skip tuning, use this alpha

    def __post_init__(self):
        if self.grid_points < 2:
            raise InvalidArgument("grid_points must be at least 2")
        if not self.refine_tol > 0:
            raise InvalidArgument("refine_tol must be positive")

    def frozen_at(self, alpha: float) -> "MmleSettings":
        return replace(self, alpha_override=float(alpha))


def _log_index(N: int) -> np.ndarray:
    return np.log(np.arange(1, N + 1, dtype=float))


def _marginal_var(alpha: float, log_i: np.ndarray, v: float) -> np.ndarray:
    return np.exp(-(1 + 2 * alpha) * log_i) + v


def log_marginal_likelihood(y: Sequence[float], alpha: float, config: ModelConfig) -> float:
    if alpha < 0:
        raise InvalidArgument("alpha must be nonnegative")
    y = np.asarray(y, dtype=float)
    var = _marginal_var(alpha, _log_index(y.size), config.local_noise_var)
    return float(np.sum(-0.5 * np.log(2 * np.pi * var) - y**2 / (2 * var)))


def _objective(alphas: np.ndarray, sum_sq: np.ndarray, m: int, v: float) -> np.ndarray:
    """sum_j l_j(alpha) from the sufficient statistic sum_j (Y^j_i)^2, one value per alpha."""
    log_i = _log_index(sum_sq.size)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    out = np.empty(alphas.size)
    for k, a in enumerate(alphas):
        var = _marginal_var(a, log_i, v)
        out[k] = np.sum(-0.5 * m * np.log(2 * np.pi * var) - sum_sq / (2 * var))
    return out


def mmle_objective(data: DistributedData, alphas: Sequence[float]) -> np.ndarray:
    """Sum of local log marginal likelihoods at each alpha, evaluated in one fused pass."""
    sum_sq = machine_sum(data.locals**2)
    return _objective(np.asarray(alphas, dtype=float), sum_sq, data.m, data.config.local_noise_var)


def mmle_trace(data: DistributedData, settings: MmleSettings) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coarse-grid objective with per-machine contributions, shape (grid_points, m)."""
    grid = np.linspace(0.0, math.log(data.config.n), settings.grid_points)
    per_machine = np.array([[log_marginal_likelihood(y, a, data.config) for y in data.locals]
                            for a in grid])
    return grid, mmle_objective(data, grid), per_machine


def distributed_mmle(data: DistributedData, settings: MmleSettings = MmleSettings()) -> float:
    """Maximizer of sum_j l_j over [0, log n]: coarse grid scan, then golden section.

    Returns the best alpha among every point evaluated, so the objective at
    the result is at least its value at each coarse-grid point.
    """
    if settings.alpha_override is not None:
        return float(settings.alpha_override)
    if math.log(data.config.n) <= 0:
        return 0.0
    sum_sq = machine_sum(data.locals**2)
    m, v = data.m, data.config.local_noise_var

    def f(a: float) -> float:
        return float(_objective(np.array([a]), sum_sq, m, v)[0])

    grid = np.linspace(0.0, math.log(data.config.n), settings.grid_points)
    values = _objective(grid, sum_sq, m, v)
    best = int(np.argmax(values))
    best_a, best_f = float(grid[best]), float(values[best])

    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, grid.size - 1)])
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > settings.refine_tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = f(x2)
        for a, fa in ((x1, f1), (x2, f2)):
            if fa > best_f:
                best_a, best_f = a, fa
    return best_a


def h_k(alpha: float, signal: Signal | Sequence[float], k: float) -> float:
    """Diagnostic functional of the truth at local sample size k = n / (sigma^2 m).

    ``(1+2a) / (k^{1/(1+2a)} log k) * sum_i k^2 i^{1+2a} theta_i^2 log i / (k + i^{1+2a})^2``
    """
    if not k > 1:
        raise InvalidArgument(f"h_k needs k > 1, got {k}")
    theta = signal.coeffs if isinstance(signal, Signal) else np.asarray(signal, dtype=float)
    p = 1 + 2 * alpha
    log_i = _log_index(theta.size)
    s = expit(p * log_i - math.log(k))  # i^p / (k + i^p)
    terms = k * s * (1 - s) * theta**2 * log_i
    return p / (k ** (1 / p) * math.log(k)) * math.fsum(terms)


def underbar_alpha(signal: Signal | Sequence[float], k: float, l: float = 0.01,
                   grid_points: int = 400, tol: float = 1e-6) -> float:
    """inf{alpha > 0 : h_k(alpha) > l}, capped at sqrt(log k).

    h_k need not be monotone, so the first upcrossing is located on a
    log-spaced scan and then refined by bisection.
    """
    if not k > 1:
        raise InvalidArgument(f"underbar_alpha needs k > 1, got {k}")
    cap = math.sqrt(math.log(k))
    grid = np.geomspace(min(1e-4, cap / 2), cap, grid_points)
    prev = 0.0
    for a in grid:
        if h_k(a, signal, k) > l:
            lo, hi = prev, float(a)
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if h_k(mid, signal, k) > l:
                    hi = mid
                else:
                    lo = mid
            return min(hi, cap)
        prev = float(a)
    return cap


def method_vii(data: DistributedData, settings: MmleSettings = MmleSettings()) -> DiagonalGaussian:
    """Barycenter of the power-likelihood local posteriors at the MMLE regularity."""
    alpha = distributed_mmle(data, settings)
    prior = PriorSpec(alpha)
    return barycenter_diag([power_likelihood_posterior(y, prior, data.config) for y in data.locals])
