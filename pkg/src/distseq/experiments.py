"""Config-driven experiment runs behind the ``distseq`` command line.

A run reads a JSON spec, evaluates methods over a grid of model
configurations and returns an :class:`ExperimentReport`: CSV tables keyed by
file name plus a metadata record.  Every CSV row carries the spec hash, and
all tables are byte-identical across reruns and thread counts; only the
metadata (wall time) changes.

Spec schema (all keys except ``methods`` optional)::

    {
      "model":   {"n": [4800], "m": [40], "sigma": [1.0], "trunc": null}
                 | {"points": [{"n": 1200, "m": 10}, ...]}
                 | {"n": [4096, 16384], "m_exponent": 0.4},
      "signal":  {"kind": "boundary" | "hard" | "alternating" | "user",
                  "beta": 1.0, "M": 1.0, "coeffs": [...]},
      "beta":    oracle regularity (defaults to signal.beta),
      "methods": ["I", {"id": "III", "alpha": 1.5},
                  {"id": "VII", "grid_points": 200, "refine_tol": 1e-4, "alpha_override": null}],
      "metrics": ["risk", "coverage", "rates", "mmle"],
      "reps": 100, "seed": 0, "gamma": 0.05, "L": 1.0, "draws": 100000,
      "hk_level": 0.01, "mmle_trace": false,
      "render":  {"grid_points": 512},
      "verdict": {"slope_tol": 0.05, "coverage_reps": 100,
                  "coverage_point": {"n": 4800, "m": 40}}
    }

The verdict coverage run uses ``coverage_point`` when given, else the last
grid point.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, _io
from .adaptive import MmleSettings, h_k, mmle_trace, underbar_alpha
from .aggregation import DESCRIPTIONS, METHODS, MethodId
from .errors import InvalidArgument
from .metrics import (exact_risk, global_posterior, rate_fit, replicate, replicate_methods,
                      summarize)
from .model import (ModelConfig, Signal, alternating_signal, boundary_signal, hard_signal,
                    simulate, synthesize_function)
from .render import band_csv, band_svg, pointwise_band

RISK_COLUMNS = ["method", "n", "m", "sigma", "beta", "M", "bias_sq", "variance", "spread", "rmse",
                "r_gamma_mean", "coverage", "coverage_se", "reps", "seed", "spec_hash"]


class SpecError(ValueError):
    """The experiment spec is malformed or asks for something unsupported."""


@dataclass(frozen=True)
class MethodSpec:
    tag: str
    alpha: float | None = None
    tau: float | None = None
    mmle: MmleSettings | None = None

    def method_id(self) -> MethodId:
        return MethodId(self.tag, self.alpha, self.tau, self.mmle)


@dataclass(frozen=True)
class ExperimentSpec:
    configs: tuple[ModelConfig, ...]
    signal: dict
    beta: float
    methods: tuple[MethodSpec, ...]
    metrics: tuple[str, ...]
    reps: int
    seed: int
    gamma: float
    L: float
    draws: int
    hk_level: float
    mmle_trace: bool
    render_points: int
    slope_tol: float
    verdict_reps: int
    verdict_config: ModelConfig | None
    raw: dict = field(compare=False, repr=False)

    @property
    def hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def make_signal(self, config: ModelConfig) -> Signal:
        s = self.signal
        kind = s.get("kind", "boundary")
        beta, M = float(s.get("beta", self.beta)), float(s.get("M", 1.0))
        if kind == "boundary":
            return boundary_signal(beta, M, config.trunc)
        if kind == "alternating":
            return alternating_signal(beta, M, config.trunc)
        if kind == "hard":
            return hard_signal(beta, M, config)
        if kind == "user":
            c = np.zeros(config.trunc)
            coeffs = np.asarray(s["coeffs"], dtype=float)[: config.trunc]
            c[: coeffs.size] = coeffs
            return Signal(c, {"kind": "user"})
        raise SpecError(f"unknown signal kind {kind!r}")


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _configs(model: dict) -> tuple[ModelConfig, ...]:
    trunc = model.get("trunc")
    if "points" in model:
        pts = [(p["n"], p["m"], p.get("sigma", model.get("sigma", 1.0)), p.get("trunc", trunc))
               for p in model["points"]]
    else:
        ns = _as_list(model.get("n", [4800]))
        sigmas = _as_list(model.get("sigma", [1.0]))
        if "m_exponent" in model:
            e = float(model["m_exponent"])
            pts = [(n, math.ceil(float(n) ** e), s, trunc) for n in ns for s in sigmas]
        else:
            ms = _as_list(model.get("m", [40]))
            pts = [(n, m, s, trunc) for n, m, s in itertools.product(ns, ms, sigmas)]
    if not pts:
        raise SpecError("model grid is empty")
    try:
        return tuple(ModelConfig(float(n), int(m), float(s), t) for n, m, s, t in pts)
    except (InvalidArgument, TypeError, ValueError) as e:
        raise SpecError(f"invalid model configuration: {e}") from e


def _methods(items: Sequence) -> tuple[MethodSpec, ...]:
    out = []
    for it in items:
        d = {"id": it} if isinstance(it, str) else dict(it)
        tag = d.get("id")
        if tag not in METHODS:
            raise SpecError(f"unknown method {tag!r}; expected one of {', '.join(METHODS)}")
        mmle = None
        if tag == "VII":
            try:
                mmle = MmleSettings(int(d.get("grid_points", 200)), float(d.get("refine_tol", 1e-4)),
                                    alpha_override=d.get("alpha_override"))
            except InvalidArgument as e:
                raise SpecError(str(e)) from e
        elif "tau" in d and tag != "III":
            raise SpecError(f"tau is a method III parameter, given for method {tag}")
        out.append(MethodSpec(tag, d.get("alpha"), d.get("tau"), mmle))
    return tuple(out)


def parse_spec(doc: dict, seed: int | None = None) -> ExperimentSpec:
    try:
        return _parse_spec(doc, seed)
    except SpecError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SpecError(f"malformed spec: {type(e).__name__}: {e}") from e


def _parse_spec(doc: dict, seed: int | None) -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise SpecError("spec must be a JSON object")
    doc = dict(doc)
    if seed is not None:
        doc["seed"] = int(seed)
    methods = _methods(doc.get("methods", []))
    if not methods:
        raise SpecError("spec lists no methods")
    signal = dict(doc.get("signal", {"kind": "boundary", "beta": 1.0, "M": 1.0}))
    beta = float(doc.get("beta", signal.get("beta", 1.0)))
    if not beta > 0:
        raise SpecError("beta must be positive")
    metrics = tuple(doc.get("metrics", ()))
    if set(metrics) - {"risk", "coverage", "rates", "mmle"}:
        raise SpecError(f"unknown metrics {sorted(set(metrics) - {'risk', 'coverage', 'rates', 'mmle'})}")
    reps = int(doc.get("reps", 100))
    if reps < 1:
        raise SpecError("reps must be at least 1")
    s = int(doc.get("seed", 0))
    if not 0 <= s < 2**64:
        raise SpecError("seed must be a 64-bit unsigned integer")
    gamma = float(doc.get("gamma", 0.05))
    if not 0 < gamma < 1:
        raise SpecError("gamma must lie in (0, 1)")
    L = float(doc.get("L", 1.0))
    if not L > 0:
        raise SpecError("L must be positive")
    draws = int(doc.get("draws", 100_000))
    if draws < 1000:
        raise SpecError("draws must be at least 1000")
    verdict = doc.get("verdict", {})
    spec = ExperimentSpec(
        configs=_configs(doc.get("model", {})), signal=signal, beta=beta, methods=methods,
        metrics=metrics, reps=reps, seed=s, gamma=gamma, L=L, draws=draws,
        hk_level=float(doc.get("hk_level", 0.01)), mmle_trace=bool(doc.get("mmle_trace", False)),
        render_points=int(doc.get("render", {}).get("grid_points", 512)),
        slope_tol=float(verdict.get("slope_tol", 0.05)),
        verdict_reps=int(verdict.get("coverage_reps", reps)),
        verdict_config=_configs({"points": [verdict["coverage_point"]]})[0]
        if "coverage_point" in verdict else None,
        raw=doc)
    try:
        for cfg in spec.configs:
            spec.make_signal(cfg)
    except (InvalidArgument, KeyError) as e:
        raise SpecError(f"cannot build signal: {e}") from e
    return spec


def load_spec(path: str | os.PathLike, seed: int | None = None) -> ExperimentSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SpecError(f"cannot read spec {path}: {e}") from e
    return parse_spec(doc, seed)


@dataclass
class ExperimentReport:
    command: str
    spec_hash: str
    tables: dict[str, str]
    meta: dict = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)  # non-CSV artifacts (SVG)

    def write(self, out_dir: str | os.PathLike) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in {**self.tables, **self.files}.items():
            p = out / name
            with open(p, "w", newline="") as fh:
                fh.write(text)
            written.append(p)
        p = out / f"{self.command}_meta.json"
        p.write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")
        written.append(p)
        return written


def concat_tables(*texts: str) -> str:
    """Concatenate CSV tables with a shared header; refuses rows from different specs."""
    header, rows, hashes = None, [], set()
    for t in texts:
        parsed = list(csv.reader(io.StringIO(t)))
        if header is None:
            header = parsed[0]
        elif parsed[0] != header:
            raise InvalidArgument("tables have different headers")
        col = header.index("spec_hash")
        for row in parsed[1:]:
            hashes.add(row[col])
            rows.append(row)
    if len(hashes) > 1:
        raise InvalidArgument(f"refusing to concatenate reports from different specs: {sorted(hashes)}")
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerows([header, *rows])
    return buf.getvalue()


def _pool_map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _meta(spec: ExperimentSpec, command: str, t0: float, warnings: list[str]) -> dict:
    return {"command": command, "spec_hash": spec.hash, "tool_version": __version__,
            "wall_time_s": time.perf_counter() - t0, "warnings": warnings,
            "seed": spec.seed}


def _signal_M(spec: ExperimentSpec) -> Any:
    return float(spec.signal["M"]) if "M" in spec.signal else ""


def _risk_row(spec, tag, cfg, risk, cov=None) -> list:
    r_gamma = cov.r_gamma_mean if cov else ""
    return [tag, cfg.n, cfg.m, cfg.sigma, spec.beta, _signal_M(spec),
            risk.bias_sq if risk else "", risk.variance if risk else "",
            risk.spread if risk else "", risk.rmse if risk else math.sqrt(cov.mse),
            r_gamma, cov.estimate if cov else "", cov.se if cov else "",
            cov.reps if cov else "", spec.seed, spec.hash]


def _require_non_adaptive(spec: ExperimentSpec, command: str):
    if any(ms.tag == "VII" for ms in spec.methods):
        raise SpecError(f"method VII is adaptive and has no closed-form risk; "
                        f"use `distseq adaptive` instead of `distseq {command}`")


def _coverages_for(spec, cfg, threads, reps=None) -> list:
    """Coverage of every spec method at one grid point, all scored on shared datasets."""
    sig = spec.make_signal(cfg)
    per_method = replicate_methods([ms.method_id() for ms in spec.methods], sig, cfg, spec.beta,
                                   reps or spec.reps, spec.seed, spec.gamma, spec.L, spec.draws,
                                   [ms.mmle for ms in spec.methods], threads)
    return [summarize(rs) for rs in per_method]


def _fits(spec, rows_by_method: dict[str, list[tuple[float, float]]]) -> dict[str, tuple]:
    optimal = -spec.beta / (1 + 2 * spec.beta)
    out = {}
    for tag, pts in rows_by_method.items():
        ns = sorted({n for n, _ in pts})
        if len(ns) < 3 or len(ns) != len(pts):
            out[tag] = ("", "", "", "n/a")
            continue
        slope, icept, r2 = rate_fit(pts)
        out[tag] = (slope, icept, r2, "yes" if abs(slope - optimal) <= spec.slope_tol else "no")
    return out


def cmd_risk(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Exact risk for every grid point and method, plus a per-method verdict table."""
    t0 = time.perf_counter()
    _require_non_adaptive(spec, "risk")
    rows, pts = [], {}
    for cfg in spec.configs:
        sig = spec.make_signal(cfg)
        for ms in spec.methods:
            risk = exact_risk(ms.method_id(), sig, cfg, spec.beta)
            rows.append(_risk_row(spec, ms.tag, cfg, risk))
            pts.setdefault(ms.tag, []).append((cfg.n, risk.rmse))
    fits = _fits(spec, pts)
    point = spec.verdict_config or spec.configs[-1]
    covs = _coverages_for(spec, point, threads, spec.verdict_reps)
    threshold = 1 - 2 * spec.gamma
    verdict = []
    for ms, cov in zip(spec.methods, covs):
        slope, _, _, rate_ok = fits[ms.tag]
        verdict.append([ms.tag, DESCRIPTIONS[ms.tag], slope, rate_ok, cov.estimate, cov.se,
                        "yes" if cov.estimate >= threshold else "no", spec.hash])
    tables = {
        "risk.csv": _io.csv_text(RISK_COLUMNS, rows),
        "risk_verdict.csv": _io.csv_text(
            ["method", "description", "rate_slope", "optimal_rate", "coverage", "coverage_se",
             "coverage_ok", "spec_hash"], verdict),
    }
    return ExperimentReport("risk", spec.hash, tables, _meta(spec, "risk", t0, []))


def cmd_coverage(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Monte Carlo coverage of the credible ball for every grid point and method."""
    t0 = time.perf_counter()
    warnings = []
    if spec.reps < 50:
        warnings.append(f"reps={spec.reps} < 50: coverage estimates are unreliable")
    rows = []
    for cfg in spec.configs:
        sig = spec.make_signal(cfg)
        for ms, cov in zip(spec.methods, _coverages_for(spec, cfg, threads)):
            risk = None if ms.tag == "VII" else exact_risk(ms.method_id(), sig, cfg, spec.beta)
            rows.append(_risk_row(spec, ms.tag, cfg, risk, cov))
    tables = {"coverage.csv": _io.csv_text(RISK_COLUMNS, rows)}
    return ExperimentReport("coverage", spec.hash, tables, _meta(spec, "coverage", t0, warnings))


def cmd_rates(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Exact-risk sweep over the n grid and log-log slope per method."""
    t0 = time.perf_counter()
    _require_non_adaptive(spec, "rates")
    rows, pts = [], {}
    for cfg in spec.configs:
        sig = spec.make_signal(cfg)
        for ms in spec.methods:
            risk = exact_risk(ms.method_id(), sig, cfg, spec.beta)
            rows.append(_risk_row(spec, ms.tag, cfg, risk))
            pts.setdefault(ms.tag, []).append((cfg.n, risk.rmse))
    fits = _fits(spec, pts)
    optimal = -spec.beta / (1 + 2 * spec.beta)
    fit_rows = [[ms.tag, *fits[ms.tag][:3], optimal, fits[ms.tag][3], spec.hash] for ms in spec.methods]
    tables = {
        "rates.csv": _io.csv_text(RISK_COLUMNS, rows),
        "rates_fit.csv": _io.csv_text(
            ["method", "slope", "intercept", "r_squared", "optimal_slope", "optimal_rate",
             "spec_hash"], fit_rows),
    }
    return ExperimentReport("rates", spec.hash, tables, _meta(spec, "rates", t0, []))


def cmd_adaptive(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Per-replication MMLE regularity, method VII risk and coverage, and h_k diagnostics."""
    t0 = time.perf_counter()
    settings = next((ms.mmle for ms in spec.methods if ms.tag == "VII"), None) or MmleSettings()
    rep_rows, summary, files = [], [], {}
    for cfg in spec.configs:
        sig = spec.make_signal(cfg)
        rs = replicate("VII", sig, cfg, spec.beta, spec.reps, spec.seed, spec.gamma, spec.L,
                       spec.draws, settings, threads)
        for r in rs:
            rep_rows.append([cfg.n, cfg.m, cfg.sigma, spec.beta, _signal_M(spec), r.index,
                             r.alpha_hat, int(r.alpha_hat >= spec.beta + 0.5), r.err_sq, r.radius,
                             int(r.covered), r.spread, spec.seed, spec.hash])
        cov = summarize(rs)
        oracle = exact_risk("IV", sig, cfg, spec.beta)
        frozen = ("", "", "")
        if settings.alpha_override is not None:
            fr = exact_risk(MethodId("IV", alpha=settings.alpha_override), sig, cfg, spec.beta)
            frozen = (fr.bias_sq, fr.variance, fr.spread)
        k = cfg.local_sample_size
        diag = ("", "")
        if k > 1:
            diag = (h_k(spec.beta, sig, k), underbar_alpha(sig, k, spec.hk_level))
        alphas = np.array([r.alpha_hat for r in rs])
        summary.append([cfg.n, cfg.m, cfg.sigma, spec.beta, _signal_M(spec), spec.reps,
                        float(np.mean(alphas >= spec.beta + 0.5)), float(np.mean(alphas)),
                        float(np.median(alphas)), math.sqrt(cov.mse), oracle.rmse, *frozen,
                        cov.r_gamma_mean, cov.estimate, cov.se, k, *diag, spec.hk_level,
                        spec.seed, spec.hash])
        if spec.mmle_trace:
            data = simulate(sig, cfg, spec.seed, replication=0)
            grid, obj, per = mmle_trace(data, settings)
            files[f"mmle_trace_n{cfg.n:g}_m{cfg.m}.csv"] = _io.csv_text(
                ["alpha", "objective", *[f"machine_{j + 1}" for j in range(cfg.m)]],
                [[a, o, *p] for a, o, p in zip(grid, obj, per)])
    tables = {
        "adaptive.csv": _io.csv_text(
            ["n", "m", "sigma", "beta", "M", "rep", "alpha_hat", "overestimate", "err_sq",
             "r_gamma", "covered", "spread", "seed", "spec_hash"], rep_rows),
        "adaptive_summary.csv": _io.csv_text(
            ["n", "m", "sigma", "beta", "M", "reps", "frac_overestimate", "alpha_hat_mean",
             "alpha_hat_median", "rmse_vii", "rmse_iv_oracle", "bias_sq_frozen", "variance_frozen",
             "spread_frozen", "r_gamma_mean", "coverage", "coverage_se", "k", "h_k_at_beta",
             "underbar_alpha", "hk_level", "seed", "spec_hash"], summary),
        **files,
    }
    return ExperimentReport("adaptive", spec.hash, tables, _meta(spec, "adaptive", t0, []))


def render_posteriors(spec: ExperimentSpec, threads: int = 1):
    """Global posterior of each requested method on one dataset at the first grid point."""
    cfg = spec.configs[0]
    sig = spec.make_signal(cfg)
    data = simulate(sig, cfg, spec.seed, replication=0)

    def one(ms: MethodSpec):
        return global_posterior(ms.method_id(), data, spec.beta, ms.mmle)[0]

    return cfg, sig, _pool_map(one, spec.methods, threads)


def cmd_render(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Posterior mean functions and 1 - gamma pointwise bands, one CSV and SVG per method."""
    t0 = time.perf_counter()
    cfg, sig, posts = render_posteriors(spec, threads)
    grid = np.linspace(0.0, 1.0, spec.render_points)
    truth = synthesize_function(sig.coeffs, grid)
    tables, files = {}, {}
    for ms, post in zip(spec.methods, posts):
        mean, lo, hi = pointwise_band(post, grid, spec.gamma)
        tables[f"render_{ms.tag}.csv"] = band_csv(grid, truth, mean, lo, hi)
        title = f"Method {ms.tag}: {DESCRIPTIONS[ms.tag]} (n={cfg.n:g}, m={cfg.m})"
        files[f"render_{ms.tag}.svg"] = band_svg(grid, truth, mean, lo, hi, title)
    return ExperimentReport("render", spec.hash, tables, _meta(spec, "render", t0, []), files)


COMMANDS: dict[str, Callable[[ExperimentSpec, int], ExperimentReport]] = {
    "risk": cmd_risk,
    "coverage": cmd_coverage,
    "rates": cmd_rates,
    "adaptive": cmd_adaptive,
    "render": cmd_render,
}
