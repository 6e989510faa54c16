"""Risk, credible balls, coverage and contraction rates.

For methods I-VI the global posterior mean is ``c_i * Ybar_i`` with a
deterministic shrinkage factor ``c_i`` and ``Ybar_i ~ N(theta_i, sigma^2/n)``,
so the risk splits exactly into a squared bias ``sum (1-c_i)^2 theta_i^2``
and a variance ``sum c_i^2 sigma^2 / n``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import expit

from . import _rng
from .adaptive import MmleSettings, distributed_mmle, method_vii
from .aggregation import MethodId, run_method
from .errors import InvalidArgument
from .model import ModelConfig, Signal, simulate
from .posteriors import DiagonalGaussian, default_tau


@dataclass(frozen=True)
class RiskDecomposition:
    bias_sq: float
    variance: float
    spread: float

    @property
    def rmse(self) -> float:
        return math.sqrt(self.bias_sq + self.variance)


@dataclass(frozen=True)
class CredibleBall:
    center: np.ndarray
    radius: float
    inflation: float = 1.0
    gamma: float = 0.05

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument("credible radius must be positive")
        if not 0 < self.gamma < 1:
            raise InvalidArgument("gamma must lie in (0, 1)")

    def contains(self, theta: Sequence[float]) -> bool:
        d = np.asarray(theta, dtype=float) - self.center
        return math.sqrt(math.fsum(d * d)) <= self.inflation * self.radius


def _as_method(method: MethodId | str) -> MethodId:
    return method if isinstance(method, MethodId) else MethodId(method)


def shrinkage_and_spread(method: MethodId | str, config: ModelConfig,
                         beta_oracle: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form shrinkage factors c_i and global variances t_i^2 for methods I-VI."""
    c, _, t2 = _closed_form(method, config, beta_oracle)
    return c, t2


def _closed_form(method, config, beta_oracle):
    method = _as_method(method)
    tag = method.tag
    if tag == "VII":
        raise InvalidArgument("method VII has a data-dependent prior; simulate it instead")
    alpha = beta_oracle if method.alpha is None else method.alpha
    n, m, s2 = config.n, config.m, config.sigma**2
    tau = 1.0
    if tag == "III":
        tau = default_tau(alpha, beta_oracle, config) if method.tau is None else method.tau
    m_eff = 1 if tag in ("II", "IV") else m
    log_i = np.log(np.arange(1, config.trunc + 1, dtype=float))
    log_r = math.log(s2 * m_eff / (tau * n)) + (1 + 2 * alpha) * log_i
    c = expit(-log_r)  # n / (n + sigma^2 m_eff tau^{-1} i^{1+2 alpha})
    base = c * s2 / n
    t2 = {"I": base, "II": base / m, "III": base, "IV": base, "V": base, "VI": m * base}[tag]
    return c, expit(log_r), t2


def exact_risk(method: MethodId | str, signal: Signal, config: ModelConfig,
               beta_oracle: float) -> RiskDecomposition:
    if len(signal) != config.trunc:
        raise InvalidArgument("signal length must equal the truncation level")
    c, one_minus_c, t2 = _closed_form(method, config, beta_oracle)
    bias = math.fsum((one_minus_c * signal.coeffs) ** 2)
    var = math.fsum(c**2 * config.sigma**2 / config.n)
    return RiskDecomposition(bias, var, math.fsum(t2))


def _weighted_chi2(var: np.ndarray, draws: int, rng: np.random.Generator,
                   rtol: float = 1e-4) -> np.ndarray:
    """Draws of sum_i var_i Z_i^2.

    Coordinates are sampled in index order, one column of ``draws`` normals
    each, so coordinate i always sees the same normals for a given seed.  A
    trailing block whose fluctuation sqrt(2 sum var_i^2) is below ``rtol``
    times the total mean is replaced by its mean.
    """
    total = math.fsum(var)
    out = np.zeros(draws)
    if total == 0:
        return out
    tail_sd = np.sqrt(2 * np.cumsum((var**2)[::-1])[::-1])  # tail_sd[K]: fluctuation of var[K:]
    small = np.nonzero(tail_sd <= rtol * total)[0]
    K = int(small[0]) if small.size else var.size
    for v in var[:K]:
        z = rng.standard_normal(draws)
        out += v * (z * z)
    out += math.fsum(var[K:])
    return out


def credible_radius(post: DiagonalGaussian, gamma: float = 0.05, draws: int = 100_000,
                    seed: int = 0, method: str = "mc") -> float:
    """Radius r with posterior mass 1 - gamma in the ball around the posterior mean.

    ``method="mc"`` takes the empirical (1 - gamma)-quantile of ``sum var_i Z_i^2``;
    ``method="satterthwaite"`` matches a scaled chi-square to its first two moments.
    """
    if not 0 < gamma < 1:
        raise InvalidArgument("gamma must lie in (0, 1)")
    var = np.asarray(post.var, dtype=float)
    if method == "satterthwaite":
        s1, s2 = math.fsum(var), math.fsum(var**2)
        if s1 == 0:
            return 0.0
        g, h = s2 / s1, s1 * s1 / s2
        return math.sqrt(g * stats.chi2.ppf(1 - gamma, h))
    if method != "mc":
        raise InvalidArgument(f"unknown radius method {method!r}")
    if draws < 1000:
        raise InvalidArgument("credible_radius needs at least 1000 draws")
    s = _weighted_chi2(var, draws, _rng.stream(seed, _rng.POSTERIOR_DRAWS))
    return math.sqrt(float(np.quantile(s, 1 - gamma)))


def credible_ball(post: DiagonalGaussian, gamma: float = 0.05, L: float = 1.0,
                  draws: int = 100_000, seed: int = 0) -> CredibleBall:
    return CredibleBall(post.mean, credible_radius(post, gamma, draws, seed), L, gamma)


def contraction_mass(post: DiagonalGaussian, theta0: Signal | Sequence[float], radius: float,
                     draws: int = 10_000, seed: int = 0) -> float:
    """Posterior probability of the l2 ball of ``radius`` around the truth (Monte Carlo)."""
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    theta = theta0.coeffs if isinstance(theta0, Signal) else np.asarray(theta0, dtype=float)
    d = post.mean - theta
    sd = np.sqrt(post.var)
    rng = _rng.stream(seed, _rng.POSTERIOR_DRAWS)
    dist2 = np.zeros(draws)
    for di, si in zip(d, sd):
        x = di + si * rng.standard_normal(draws)
        dist2 += x * x
    return float(np.mean(dist2 <= radius * radius))


def rate_fit(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares fit of log(risk) = slope * log(n) + intercept; returns (slope, intercept, R^2)."""
    if len(points) < 3:
        raise InvalidArgument("rate_fit needs at least 3 points")
    raw = np.array(points, dtype=float)
    if not (np.all(raw > 0) and np.all(np.isfinite(raw))):
        raise InvalidArgument("rate_fit needs positive n and risk values")
    x, y = np.log(raw[:, 0]), np.log(raw[:, 1])
    res = stats.linregress(x, y)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else float(res.rvalue**2)
    return float(res.slope), float(res.intercept), r2


# --- replications -----------------------------------------------------------------

@dataclass(frozen=True)
class Replication:
    index: int
    err_sq: float
    radius: float
    covered: bool
    alpha_hat: float | None = None
    spread: float = 0.0


@dataclass
class CoverageResult:
    estimate: float
    se: float
    reps: int
    r_gamma_mean: float
    mse: float
    replications: list[Replication] = field(default_factory=list, repr=False)


def global_posterior(method: MethodId | str, data, beta_oracle: float,
                     settings: MmleSettings | None = None) -> tuple[DiagonalGaussian, float | None]:
    """Global posterior of any method I-VII, plus the tuned alpha for VII."""
    tag = method if isinstance(method, str) else method.tag
    if tag == "VII":
        s = settings or (method.settings if isinstance(method, MethodId) else None) or MmleSettings()
        alpha = distributed_mmle(data, s)
        return method_vii(data, s.frozen_at(alpha)), alpha
    return run_method(method, data, beta_oracle), None


def replicate_methods(methods: Sequence[MethodId | str], signal: Signal, config: ModelConfig,
                      beta_oracle: float, reps: int, seed: int, gamma: float = 0.05,
                      L: float = 1.0, draws: int = 100_000,
                      settings: Sequence[MmleSettings | None] | None = None,
                      threads: int = 1) -> list[list[Replication]]:
    """Simulate ``reps`` fresh datasets and score the credible ball of every method on each.

    Replication r uses the data streams keyed by (seed, r), shared by all
    methods.  Radii are computed with a fixed draw seed and cached by
    posterior variance, which for methods I-VI does not depend on the data.
    Returns one list of replications per method, in replication order.
    """
    if reps < 1:
        raise InvalidArgument("reps must be at least 1")
    settings = list(settings) if settings is not None else [None] * len(methods)
    if len(settings) != len(methods):
        raise InvalidArgument("need one settings entry per method")
    radius_seed = _rng.derive_seed(seed, 1)
    cache: dict[bytes, float] = {}

    def score(method, s, data, r) -> Replication:
        post, alpha = global_posterior(method, data, beta_oracle, s)
        key = post.var.tobytes()
        if key not in cache:
            cache[key] = credible_radius(post, gamma, draws, radius_seed)
        radius = cache[key]
        d = post.mean - signal.coeffs
        err_sq = math.fsum(d * d)
        return Replication(r, err_sq, radius, math.sqrt(err_sq) <= L * radius, alpha, post.spread)

    def one(r: int) -> list[Replication]:
        data = simulate(signal, config, seed, replication=r)
        return [score(mt, s, data, r) for mt, s in zip(methods, settings)]

    if threads <= 1:
        by_rep = [one(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            by_rep = list(pool.map(one, range(reps)))
    return [list(col) for col in zip(*by_rep)]


def replicate(method: MethodId | str, signal: Signal, config: ModelConfig, beta_oracle: float,
              reps: int, seed: int, gamma: float = 0.05, L: float = 1.0, draws: int = 100_000,
              settings: MmleSettings | None = None, threads: int = 1) -> list[Replication]:
    """Replications of a single method; see :func:`replicate_methods`."""
    return replicate_methods([method], signal, config, beta_oracle, reps, seed, gamma, L, draws,
                             [settings], threads)[0]


def summarize(reps: Sequence[Replication], L: float | None = None) -> CoverageResult:
    """Coverage estimate with binomial standard error; ``L`` rescores at a new inflation."""
    covered = np.array([r.covered if L is None else math.sqrt(r.err_sq) <= L * r.radius
                        for r in reps], dtype=float)
    p = float(covered.mean())
    return CoverageResult(p, math.sqrt(p * (1 - p) / len(reps)), len(reps),
                          float(np.mean([r.radius for r in reps])),
                          float(np.mean([r.err_sq for r in reps])), list(reps))


def coverage(method: MethodId | str, signal: Signal, config: ModelConfig, gamma: float = 0.05,
             L: float = 1.0, reps: int = 100, seed: int = 0, beta_oracle: float | None = None,
             draws: int = 100_000, settings: MmleSettings | None = None,
             threads: int = 1) -> CoverageResult:
    """Frequentist coverage of the inflated credible ball, with its binomial standard error."""
    if beta_oracle is None:
        beta_oracle = float(signal.meta.get("beta", 1.0))
    rs = replicate(method, signal, config, beta_oracle, reps, seed, gamma, L, draws, settings, threads)
    return summarize(rs)
