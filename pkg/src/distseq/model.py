"""Distributed signal-in-white-noise model: configurations, truths and data.

Machine ``j`` observes ``Y^j_i = theta_i + sqrt(sigma^2 m / n) Z^j_i`` for
``i = 1..N``; averaging over machines gives the non-distributed observation
with noise variance ``sigma^2 / n``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import _io, _rng
from .errors import InvalidArgument, TruncationTooShort

BETA_MIN = 0.25


def default_trunc(n: float) -> int:
    """Truncation level large enough for every prior regularity >= BETA_MIN.

    The omitted posterior spread beyond N is at most ``sigma^2 N^(-2 alpha) / (2 alpha)``.
    """
    return max(1000, 10 * math.ceil(n ** (1.0 / (1.0 + 2.0 * BETA_MIN))))


@dataclass(frozen=True)
class ModelConfig:
    n: float
    m: int
    sigma: float = 1.0
    trunc: int | None = None

    def __post_init__(self):
        if not (math.isfinite(self.n) and self.n > 0):
            raise InvalidArgument(f"n must be positive, got {self.n}")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidArgument(f"m must be a positive integer, got {self.m}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidArgument(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", float(self.n))
        object.__setattr__(self, "sigma", float(self.sigma))
        trunc = default_trunc(self.n) if self.trunc is None else self.trunc
        if int(trunc) != trunc or trunc < 1:
            raise InvalidArgument(f"trunc must be a positive integer, got {trunc}")
        object.__setattr__(self, "trunc", int(trunc))
        if not (self.local_noise_var > 0 and math.isfinite(self.local_noise_var)):
            raise InvalidArgument("local noise variance sigma^2 m / n must be finite and positive")

    @property
    def local_noise_var(self) -> float:
        """sigma^2 m / n, the noise variance seen by one machine."""
        return self.sigma**2 * self.m / self.n

    @property
    def local_sample_size(self) -> float:
        """k = n / (sigma^2 m)."""
        return self.n / (self.sigma**2 * self.m)

    def replace(self, **changes) -> "ModelConfig":
        d = dict(n=self.n, m=self.m, sigma=self.sigma, trunc=self.trunc)
        d.update(changes)
        return ModelConfig(**d)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "sigma": self.sigma, "trunc": self.trunc}


def _frozen(a: Sequence[float]) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Signal:
    coeffs: np.ndarray
    meta: dict = field(default_factory=lambda: {"kind": "user"})

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.ndim != 1 or c.size < 1:
            raise InvalidArgument("signal coefficients must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("signal coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def __len__(self) -> int:
        return self.coeffs.size

    def to_json(self, config: ModelConfig | None = None, seed: int | None = None) -> str:
        doc: dict[str, Any] = {}
        if config is not None:
            doc["config"] = config.to_dict()
        if seed is not None:
            doc["seed"] = int(seed)
        doc["meta"] = self.meta
        doc["coeffs"] = self.coeffs
        return _io.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Signal":
        doc = json.loads(text)
        return cls(doc["coeffs"], doc.get("meta", {"kind": "user"}))


@dataclass(frozen=True)
class DistributedData:
    locals: np.ndarray  # shape (m, N)
    config: ModelConfig
    seed: int
    replication: int = 0

    def __post_init__(self):
        y = _frozen(self.locals)
        if y.ndim != 2 or y.shape[0] != self.config.m:
            raise InvalidArgument(f"expected {self.config.m} local sequences, got shape {y.shape}")
        if y.shape[1] != self.config.trunc:
            raise InvalidArgument(f"local sequences must have length {self.config.trunc}")
        object.__setattr__(self, "locals", y)

    @property
    def m(self) -> int:
        return self.config.m

    def to_json(self) -> str:
        return _io.dumps({
            "config": self.config.to_dict(),
            "seed": int(self.seed),
            "replication": int(self.replication),
            "locals": self.locals,
        })

    @classmethod
    def from_json(cls, text: str) -> "DistributedData":
        doc = json.loads(text)
        return cls(np.asarray(doc["locals"], dtype=float), ModelConfig(**doc["config"]),
                   int(doc["seed"]), int(doc.get("replication", 0)))


def _index(N: int) -> np.ndarray:
    return np.arange(1, N + 1, dtype=float)


def _check_positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise InvalidArgument(f"{name} must be positive, got {v}")


def boundary_signal(beta: float, M: float, N: int) -> Signal:
    """theta_i = M i^{-(1+2 beta)/2}: every coordinate sits on the boundary of H^beta(M)."""
    _check_positive(beta=beta, M=M, N=N)
    i = _index(int(N))
    return Signal(M * i ** (-(1 + 2 * beta) / 2), {"kind": "boundary", "beta": beta, "M": M})


def alternating_signal(beta: float = 1.0, M: float = 1.0, N: int = 1000) -> Signal:
    """Boundary signal with alternating signs; the default truth for rendering."""
    s = boundary_signal(beta, M, N).coeffs.copy()
    s[1::2] *= -1
    return Signal(s, {"kind": "alternating", "beta": beta, "M": M})


def hard_cutoff(beta: float, config: ModelConfig) -> int:
    """First nonzero index of the hard signal, ceil((n / (sigma^2 sqrt m))^{1/(1+2 beta)})."""
    x = (config.n / (config.sigma**2 * math.sqrt(config.m))) ** (1 / (1 + 2 * beta))
    return max(1, math.ceil(x))


def hard_signal(beta: float, M: float, config: ModelConfig) -> Signal:
    """Boundary signal with every coefficient below the cutoff index set to zero.

    Locally (noise sigma^2 m / n) the low-frequency part looks empty, so the
    sum of local marginal likelihoods prefers too smooth a prior.
    """
    _check_positive(beta=beta, M=M)
    cutoff = hard_cutoff(beta, config)
    N = config.trunc
    if cutoff > N:
        raise TruncationTooShort(f"cutoff index {cutoff} exceeds truncation level {N}; "
                                 "the signal would be identically zero")
    c = boundary_signal(beta, M, N).coeffs.copy()
    c[: cutoff - 1] = 0.0
    return Signal(c, {"kind": "hard", "beta": beta, "M": M, "cutoff": cutoff})


def membership_radius(signal: Signal | Sequence[float], beta: float) -> float:
    """Smallest M with the (truncated) signal in H^beta(M)."""
    c = np.abs(signal.coeffs if isinstance(signal, Signal) else np.asarray(signal, dtype=float))
    nz = c > 0
    if not nz.any():
        return 0.0
    logs = np.log(c[nz]) + (1 + 2 * beta) / 2 * np.log(_index(c.size)[nz])
    return float(np.exp(logs.max()))


def simulate_machine(signal: Signal, config: ModelConfig, seed: int, machine: int,
                     replication: int = 0) -> np.ndarray:
    """Observations of one machine; depends only on (seed, replication, machine)."""
    z = _rng.stream(seed, _rng.DATA, replication, machine).standard_normal(config.trunc)
    return signal.coeffs + math.sqrt(config.local_noise_var) * z


def simulate(signal: Signal, config: ModelConfig, seed: int, replication: int = 0) -> DistributedData:
    if len(signal) != config.trunc:
        raise InvalidArgument(f"signal length {len(signal)} != truncation level {config.trunc}")
    y = np.empty((config.m, config.trunc))
    for j in range(config.m):
        y[j] = simulate_machine(signal, config, seed, j, replication)
    return DistributedData(y, config, seed, replication)


def machine_sum(a: np.ndarray) -> np.ndarray:
    """Sum over the machine axis, independent of machine order.

    Values are sorted per coordinate before accumulation, so any permutation
    of the machines gives a bit-identical result.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 1:
        return a[0].copy()
    return np.sort(a, axis=0).sum(axis=0)


def aggregate_data(data: DistributedData) -> np.ndarray:
    """Y_i = m^{-1} sum_j Y^j_i, the non-distributed data (noise variance sigma^2 / n)."""
    return machine_sum(data.locals) / data.m


def basis_matrix(grid: Sequence[float], N: int) -> np.ndarray:
    """Orthonormal cosine basis on [0, 1]: phi_1 = 1, phi_i(x) = sqrt(2) cos(pi (i-1) x)."""
    x = np.asarray(grid, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise InvalidArgument("grid points must lie in [0, 1]")
    k = np.arange(N, dtype=float)
    phi = math.sqrt(2.0) * np.cos(np.pi * np.outer(x, k))
    phi[:, 0] = 1.0
    return phi


def synthesize_function(coeffs: Sequence[float], grid: Sequence[float]) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    return basis_matrix(grid, c.size) @ c
