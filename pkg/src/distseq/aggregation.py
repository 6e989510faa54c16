"""Combining local Gaussian posteriors into a global pseudo-posterior."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BarycenterError, InvalidArgument
from .model import DistributedData, machine_sum
from .posteriors import DiagonalGaussian, PriorSpec, default_tau, shrinkage

METHODS = ("I", "II", "III", "IV", "V", "VI", "VII")
DESCRIPTIONS = {
    "I": "naive averaging",
    "II": "adjusted likelihoods, averaging",
    "III": "adjusted priors, averaging",
    "IV": "adjusted likelihoods, barycenter",
    "V": "product of experts",
    "VI": "generalized product of experts",
    "VII": "MMLE-tuned adjusted likelihoods, barycenter",
}


@dataclass(frozen=True)
class MethodId:
    """A method tag plus its parameters.

    ``alpha`` defaults to the oracle regularity; ``tau`` (method III only)
    defaults to :func:`default_tau`.  Method VII needs ``settings``, an
    :class:`~distseq.adaptive.MmleSettings`.
    """

    tag: str
    alpha: float | None = None
    tau: float | None = None
    settings: object | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.tag not in METHODS:
            raise InvalidArgument(f"unknown method {self.tag!r}; expected one of {METHODS}")
        if self.tag == "VII" and self.settings is None:
            raise InvalidArgument("method VII requires MMLE settings (see distseq.adaptive)")
        if self.tau is not None and self.tag != "III":
            raise InvalidArgument("tau applies to method III only")


def _stack(locals_: Sequence[DiagonalGaussian]) -> tuple[np.ndarray, np.ndarray]:
    if len(locals_) == 0:
        raise InvalidArgument("need at least one local posterior")
    N = len(locals_[0])
    if any(len(p) != N for p in locals_):
        raise InvalidArgument("local posteriors have different lengths")
    return np.stack([p.mean for p in locals_]), np.stack([p.var for p in locals_])


def _shared_rows(a: np.ndarray) -> bool:
    return bool(np.all(a == a[0]))


def average_convolve(locals_: Sequence[DiagonalGaussian]) -> DiagonalGaussian:
    """Law of the average of one independent draw from each local posterior."""
    return _average_convolve(*_stack(locals_))


def _average_convolve(means: np.ndarray, var: np.ndarray) -> DiagonalGaussian:
    m = means.shape[0]
    if m == 1:
        return DiagonalGaussian(means[0], var[0])
    if _shared_rows(var):
        total_var = var[0] / m
    else:
        total_var = machine_sum(var) / m**2
    return DiagonalGaussian(machine_sum(means) / m, total_var)


def wasserstein2_diag(p: DiagonalGaussian, q: DiagonalGaussian) -> float:
    """Squared 2-Wasserstein distance between Gaussians with diagonal covariances."""
    if len(p) != len(q):
        raise InvalidArgument("distributions have different lengths")
    d_mean = (p.mean - q.mean) ** 2
    d_sd = (np.sqrt(p.var) - np.sqrt(q.var)) ** 2
    return math.fsum(d_mean) + math.fsum(d_sd)


def barycenter_diag(locals_: Sequence[DiagonalGaussian], tol: float = 1e-12,
                    max_iter: int = 1000, *, shortcut: bool = True) -> DiagonalGaussian:
    """Equal-weight 2-Wasserstein barycenter of diagonal Gaussians.

    The mean is the average of local means.  The covariance S solves
    ``S = sum_j w_j (S^{1/2} K_j S^{1/2})^{1/2}``; it is found with the usual
    fixed-point map ``S <- S^{-1/2} (sum_j w_j (S^{1/2} K_j S^{1/2})^{1/2})^2 S^{-1/2}``
    applied coordinatewise.  When all K_j coincide the answer is K_1 and the
    iteration is skipped unless ``shortcut=False``.
    """
    return _barycenter(*_stack(locals_), tol, max_iter, shortcut)


def _barycenter(means: np.ndarray, var: np.ndarray, tol: float = 1e-12, max_iter: int = 1000,
                shortcut: bool = True) -> DiagonalGaussian:
    m = means.shape[0]
    mean = machine_sum(means) / m
    if m == 1 or (shortcut and _shared_rows(var)):
        return DiagonalGaussian(mean, var[0])

    s = machine_sum(var) / m
    fixed = (machine_sum(np.sqrt(var)) / m) ** 2  # the map sends s = 0 here directly
    residual = math.inf
    for _ in range(max_iter):
        new = fixed.copy()
        pos = s > 0
        inner = machine_sum(np.sqrt(var[:, pos] * s[pos])) / m
        new[pos] = inner**2 / s[pos]
        residual = float(np.max(np.abs(new - s)))
        s = new
        if residual < tol:
            return DiagonalGaussian(mean, s)
    raise BarycenterError(f"barycenter iteration did not converge in {max_iter} steps", residual)


def poe(locals_: Sequence[DiagonalGaussian], power: float = 1.0) -> DiagonalGaussian:
    """Product of experts: multiply the local densities (each to ``power``) and renormalize."""
    return _poe(*_stack(locals_), power)


def _poe(means: np.ndarray, var: np.ndarray, power: float = 1.0) -> DiagonalGaussian:
    if means.shape[0] == 1 and power == 1.0:
        return DiagonalGaussian(means[0], var[0])
    if np.any(var <= 0):
        raise InvalidArgument("product of experts needs strictly positive variances")
    precision = machine_sum(1.0 / var)
    out_var = 1.0 / (power * precision)
    out_mean = machine_sum(means / var) / precision
    return DiagonalGaussian(out_mean, out_var)


def gpoe(locals_: Sequence[DiagonalGaussian], power: float | None = None) -> DiagonalGaussian:
    """Generalized product of experts; the default power 1/m inflates the PoE variance by m."""
    m = len(locals_)
    if power is None:
        base = poe(locals_)
        return DiagonalGaussian(base.mean, m * base.var)
    return poe(locals_, power=power)


def run_method(method: MethodId | str, data: DistributedData, beta_oracle: float) -> DiagonalGaussian:
    """Global pseudo-posterior of methods I-VI with oracle regularity ``beta_oracle``."""
    if isinstance(method, str):
        if method == "VII":
            raise InvalidArgument("method VII is adaptive; use distseq.adaptive.method_vii")
        method = MethodId(method)
    tag = method.tag
    if tag == "VII":
        raise InvalidArgument("method VII is adaptive; use distseq.adaptive.method_vii")
    alpha = beta_oracle if method.alpha is None else method.alpha
    cfg = data.config
    # every machine shares the shrinkage factors, so the local posteriors are
    # formed for all machines at once (elementwise identical to the per-machine calls)
    tau, noise_var = 1.0, cfg.local_noise_var
    if tag == "III":
        tau = default_tau(alpha, beta_oracle, cfg) if method.tau is None else method.tau
    elif tag in ("II", "IV"):
        noise_var = cfg.replace(m=1).local_noise_var
    PriorSpec(alpha, tau)  # validates the prior parameters
    shrink = shrinkage(cfg.trunc, alpha, tau, noise_var)
    means = shrink * data.locals
    var = np.broadcast_to(noise_var * shrink, means.shape)
    if tag in ("I", "II", "III"):
        return _average_convolve(means, var)
    if tag == "IV":
        return _barycenter(means, var)
    post = _poe(means, var)
    return post if tag == "V" else DiagonalGaussian(post.mean, data.m * post.var)
