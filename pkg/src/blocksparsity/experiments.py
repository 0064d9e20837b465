"""Monte Carlo studies of the block-sparsity estimator.

Four studies are available:

``error_curve``
    mean ``|k_hat/k - 1|`` against ``n1 + n_alpha`` with the CLT overlay
    ``sqrt(2 omega / pi) / sqrt(n1 + n_alpha)``, optionally sweeping N, d or sigma.
``normality``
    standardised statistics res1, res2 and res for several sample sizes and
    noise families, with moment and Kolmogorov-Smirnov summaries.
``l20_small_alpha``
    mean ``|k_hat_alpha / |x|_{2,0} - 1|`` for stepped signals at small alpha,
    against the CLT term plus the k_alpha-to-block-count approximation term.
``measure_compare``
    ``|x|_{2,0}`` versus ``k_2(x)`` for signals with a few dominant blocks.

Every replication draws from its own stream addressed by
``(seed, variant, grid point, replication)``, so results do not depend on
execution order or on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__
from .blocks import (BlockSignal, approx_term, bdnr, block_l0, block_sparsity,
                     make_exact_signal, make_nearly_sparse_signal, make_stepped_signal,
                     mixed_norm)
from .errors import BlockSparsityError, ParameterError
from .estimation import estimate_block_sparsity, sparsity_variance, theoretical_constants
from .measurement import NoiseModel, eta0_for, project
from .stable import RandomStream

__all__ = [
    "ExperimentConfig",
    "StudyResult",
    "ConfigError",
    "PRESETS",
    "preset",
    "load_config",
    "parse_config",
    "make_signal",
    "run_study",
    "run_error_curve",
    "run_normality",
    "run_l20_small_alpha",
    "run_measure_compare",
    "overlay_curve",
    "write_result",
]

STUDIES = ("error_curve", "normality", "l20_small_alpha", "measure_compare")
SIGNALS = ("exact", "nearly_sparse", "stepped")
SWEEPS = ("none", "N", "d", "sigma")
DEFAULT_GRID = ((50, 50), (100, 100), (200, 200), (300, 300), (400, 400), (500, 500))
# auxiliary stream for the overlay constants, kept apart from replication streams
THEORY_STREAM = 2**31 - 1


class ConfigError(ParameterError):
    """Malformed experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    study: str = "error_curve"
    signal: str = "exact"
    N: int = 1000
    d: int = 5
    k: int = 10
    k_values: tuple = (10, 50, 100, 200)
    alpha: float = 2.0
    gamma1: float = 1.0
    gamma_alpha: float = math.sqrt(2.0) / 2.0
    sigma: float = 0.1
    noise: str = "gaussian"
    noise_values: tuple = ()
    grid: tuple = DEFAULT_GRID
    replications: int = 200
    seed: int = 20180401
    eta0: Optional[float] = 1.0
    beta: float = 0.05
    sweep: str = "none"
    sweep_values: tuple = ()
    overlay_index: str = "alpha"
    theory_draws: int = 10**6
    method: str = "blockwise"
    workers: int = 1

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(f"study must be one of {STUDIES}, got {self.study!r}")
        if self.signal not in SIGNALS:
            raise ConfigError(f"signal must be one of {SIGNALS}, got {self.signal!r}")
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep must be one of {SWEEPS}, got {self.sweep!r}")
        if self.sweep != "none" and not self.sweep_values:
            raise ConfigError(f"sweep over {self.sweep} needs sweep_values")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.grid or any(n1 < 1 or na < 1 for n1, na in self.grid):
            raise ConfigError("grid must be a non-empty list of positive (n1, n_alpha) pairs")
        if not 0.0 < self.alpha <= 2.0 or (self.study != "measure_compare" and self.alpha == 1.0):
            raise ConfigError(f"alpha must lie in (0, 2] and differ from 1, got {self.alpha}")
        if self.gamma1 <= 0 or self.gamma_alpha <= 0:
            raise ConfigError("gamma1 and gamma_alpha must be positive")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.eta0 is not None and self.eta0 <= 0:
            raise ConfigError("eta0 must be positive")
        if self.overlay_index not in ("alpha", "1"):
            raise ConfigError("overlay_index must be 'alpha' or '1'")
        if self.method not in ("blockwise", "rows"):
            raise ConfigError("method must be 'blockwise' or 'rows'")
        if self.workers < 1 or self.theory_draws < 1000:
            raise ConfigError("workers must be >= 1 and theory_draws >= 1000")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("beta must lie in (0, 1)")
        for text in (self.noise,) + tuple(self.noise_values):
            try:
                NoiseModel.parse(text)
            except ParameterError as exc:
                raise ConfigError(str(exc)) from None

    def noise_model(self, noise: Optional[str] = None, sigma: Optional[float] = None) -> NoiseModel:
        return NoiseModel.parse(noise or self.noise, self.sigma if sigma is None else sigma)

    def to_text(self) -> str:
        """Serialise as ``key = value`` lines readable by :func:`parse_config`."""
        out = []
        for f in fields(self):
            out.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(out) + "\n"


@dataclass
class StudyResult:
    study: str
    columns: tuple
    rows: list
    summary_columns: tuple = ()
    summary: list = field(default_factory=list)
    config: Optional[ExperimentConfig] = None

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        return _csv(self.columns, self.rows)

    def summary_csv(self) -> str:
        return _csv(self.summary_columns, self.summary)


# ---- configuration ---------------------------------------------------------

def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ",".join(f"{a}:{b}" for a, b in v)
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _int(text):
    try:
        return int(text)
    except ValueError:
        value = float(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


def _float_or_none(text):
    return None if text.lower() in ("none", "auto") else float(text)


def _grid(text):
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if ":" in item:
            a, b = item.split(":")
            pairs.append((_int(a), _int(b)))
        else:
            pairs.append((_int(item), _int(item)))
    return tuple(pairs)


def _tuple_of(conv):
    return lambda text: tuple(conv(s.strip()) for s in text.split(",") if s.strip())


_PARSERS = {
    "study": str, "signal": str, "N": _int, "d": _int, "k": _int,
    "k_values": _tuple_of(_int), "alpha": float, "gamma1": float, "gamma_alpha": float,
    "sigma": float, "noise": str, "noise_values": _tuple_of(str), "grid": _grid,
    "replications": _int, "seed": _int, "eta0": _float_or_none, "beta": float,
    "sweep": str, "sweep_values": _tuple_of(float), "overlay_index": str,
    "theory_draws": _int, "method": str, "workers": _int,
}
_ALIASES = {"sample_size_grid": "grid", "n": "N", "gamma_a": "gamma_alpha"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Errors name the offending line.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if "preset" in values:
        raise ConfigError("preset is not a config key")
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except BlockSparsityError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


_NORMALITY_GRID = ((500, 500), (1000, 1000))
_SWEEPS = {"N": (20, 100, 500, 1000), "d": (1, 2, 5, 10), "sigma": (0.0, 0.1, 0.2, 0.3)}

PRESETS = {
    "measure-compare": dict(study="measure_compare", N=100, d=5, alpha=2.0),
    **{f"{sig.replace('_', '-')}-sweep-{key}": dict(study="error_curve", signal=sig, sweep=key,
                                                     sweep_values=vals)
       for sig in ("exact", "nearly_sparse") for key, vals in _SWEEPS.items()},
    "exact-normality": dict(study="normality", grid=_NORMALITY_GRID,
                            noise_values=("gaussian", "t:2"), replications=1000),
    "nearly-sparse-normality": dict(study="normality", signal="nearly_sparse", grid=_NORMALITY_GRID,
                                    noise_values=("gaussian", "t:2"), replications=1000),
    "small-alpha-count": dict(study="l20_small_alpha", signal="stepped", alpha=0.06,
                              gamma_alpha=1.0, k_values=(10, 50, 100, 200)),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    """Named configuration for one of the standard studies."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig(**{**PRESETS[name], **overrides})


# ---- helpers ---------------------------------------------------------------

def make_signal(name: str, n: int, d: int, k: int = 10) -> BlockSignal:
    if name == "exact":
        return make_exact_signal(n, d)
    if name == "nearly_sparse":
        return make_nearly_sparse_signal(n, d)
    if name == "stepped":
        return make_stepped_signal(n, d, k)
    raise ParameterError(f"unknown signal generator {name!r}")


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _eta0(cfg, noise):
    return eta0_for(noise) if cfg.eta0 is None else cfg.eta0


def _replicate(args):
    """One estimate of k_alpha; returns a tuple of plain floats."""
    x, alpha, g1, ga, n1, na, noise, eta0, beta, seed, key, method = args
    stream = RandomStream(seed, key)
    y1 = project(x, 1.0, g1, n1, noise, stream.substream(0), method=method)
    ya = project(x, alpha, ga, na, noise, stream.substream(1), method=method)
    est = estimate_block_sparsity(y1, ya, eta0, beta)
    e1, ea = est.norm_one, est.norm_alpha
    return (est.k_hat, est.w_hat, e1.v_hat, ea.v_hat, e1.theta_hat, ea.theta_hat,
            float(est.clamped), est.ci_low, est.ci_high)


def _run_reps(cfg, jobs):
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            out = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        out = [_replicate(j) for j in jobs]
    return np.array(out)


def overlay_curve(x: BlockSignal, cfg: ExperimentConfig, noise: NoiseModel, variant: int = 0):
    """``omega`` such that ``E|k_hat/k - 1| ~ sqrt(2 omega / pi) / sqrt(n1 + n_alpha)``.

    Uses the population noise-to-signal ratios of ``x`` and Monte Carlo
    constants ``c_1``, ``c_alpha``; returns one omega per grid point (the
    sample fraction changes with the grid).
    """
    eta0 = _eta0(cfg, noise)
    rho1 = noise.sigma / (cfg.gamma1 * mixed_norm(x, 1.0))
    rhoa = noise.sigma / (cfg.gamma_alpha * mixed_norm(x, cfg.alpha))
    index = cfg.alpha if cfg.overlay_index == "alpha" else 1.0
    stream = RandomStream(cfg.seed, (THEORY_STREAM, variant))
    sampler = lambda gen, size: noise.sample(gen, size)  # noqa: E731
    _, th1 = theoretical_constants(1.0, rho1, eta0, stream.substream(0), noise.cf, sampler,
                                   stable_index=1.0, draws=cfg.theory_draws)
    _, tha = theoretical_constants(cfg.alpha, rhoa, eta0, stream.substream(1), noise.cf, sampler,
                                   stable_index=index, draws=cfg.theory_draws)
    return [sparsity_variance(cfg.alpha, tha, th1, na / (n1 + na)) for n1, na in cfg.grid]


def _variants(cfg):
    if cfg.sweep == "none":
        return [("base", cfg)]
    out = []
    for v in cfg.sweep_values:
        if cfg.sweep == "N":
            out.append((f"N={int(v)}", replace(cfg, N=int(v))))
        elif cfg.sweep == "d":
            out.append((f"d={int(v)}", replace(cfg, d=int(v))))
        else:
            out.append((f"sigma={v:g}", replace(cfg, sigma=float(v))))
    return out


# ---- studies ---------------------------------------------------------------

ERROR_COLUMNS = ("param_variant", "n1", "n_alpha", "n_total", "mean_rel_err",
                 "median_rel_err", "theory", "k_true", "clamped")


def run_error_curve(cfg: ExperimentConfig) -> StudyResult:
    """Mean relative error of k_hat per grid point and per swept parameter value."""
    rows = []
    for vi, (label, vcfg) in enumerate(_variants(cfg)):
        x = make_signal(vcfg.signal, vcfg.N, vcfg.d, vcfg.k)
        truth = block_sparsity(x, vcfg.alpha)
        noise = vcfg.noise_model()
        eta0 = _eta0(vcfg, noise)
        omegas = overlay_curve(x, vcfg, noise, vi)
        for gi, (n1, na) in enumerate(vcfg.grid):
            jobs = [(x, vcfg.alpha, vcfg.gamma1, vcfg.gamma_alpha, n1, na, noise, eta0,
                     vcfg.beta, vcfg.seed, (vi, gi, r), vcfg.method)
                    for r in range(vcfg.replications)]
            res = _run_reps(vcfg, jobs)
            err = np.abs(res[:, 0] / truth - 1.0)
            theory = math.sqrt(2.0 * omegas[gi] / math.pi) / math.sqrt(n1 + na)
            rows.append((label, n1, na, n1 + na, float(err.mean()), float(np.median(err)),
                         theory, truth, int(res[:, 6].sum())))
    return StudyResult("error_curve", ERROR_COLUMNS, rows, config=cfg)


NORMALITY_COLUMNS = ("case", "n1", "n_alpha", "noise", "replicate", "res1", "res2", "res")
NORMALITY_SUMMARY = ("case", "statistic", "mean", "variance", "ks_stat", "ks_pvalue", "clamped")


def run_normality(cfg: ExperimentConfig) -> StudyResult:
    """Standardised statistics for every (grid point, noise family) case."""
    x = make_signal(cfg.signal, cfg.N, cfg.d, cfg.k)
    v1 = mixed_norm(x, 1.0)
    va = mixed_norm(x, cfg.alpha) ** cfg.alpha
    kt = block_sparsity(x, cfg.alpha)
    noises = cfg.noise_values or (cfg.noise,)
    rows, summary = [], []
    for gi, (n1, na) in enumerate(cfg.grid):
        for ni, ntext in enumerate(noises):
            noise = cfg.noise_model(ntext)
            eta0 = _eta0(cfg, noise)
            jobs = [(x, cfg.alpha, cfg.gamma1, cfg.gamma_alpha, n1, na, noise, eta0,
                     cfg.beta, cfg.seed, (gi, ni, r), cfg.method)
                    for r in range(cfg.replications)]
            res = _run_reps(cfg, jobs)
            k, w, e1, ea, t1, ta = (res[:, i] for i in range(6))
            res1 = np.sqrt(n1 / t1) * (e1 / v1 - 1.0)
            res2 = np.sqrt(na / ta) * (ea / va - 1.0)
            resk = np.sqrt((n1 + na) / w) * (k / kt - 1.0)
            label = f"n={n1}:{na},noise={noise.label}"
            for r in range(cfg.replications):
                rows.append((label, n1, na, noise.label, r,
                             float(res1[r]), float(res2[r]), float(resk[r])))
            for name, s in (("res1", res1), ("res2", res2), ("res", resk)):
                ks = stats.kstest(s, "norm")
                var = float(s.var(ddof=1)) if s.size > 1 else math.nan
                summary.append((label, name, float(s.mean()), var, float(ks.statistic),
                                float(ks.pvalue), int(res[:, 6].sum())))
    return StudyResult("normality", NORMALITY_COLUMNS, rows, NORMALITY_SUMMARY, summary, cfg)


L20_COLUMNS = ("k", "bdnr", "n1", "n_alpha", "n_total", "mean_rel_err", "median_rel_err",
               "clt_term", "approx_term", "budget", "k_alpha_true", "clamped")


def run_l20_small_alpha(cfg: ExperimentConfig) -> StudyResult:
    """Block-count estimation with small alpha on stepped signals.

    The budget per row is the CLT term ``sqrt(2 omega/pi)/sqrt(n1+n_alpha)``
    plus ``alpha/(1-alpha) (ln BDNR + alpha ln |x|_{2,0})``.
    """
    rows = []
    noise = cfg.noise_model()
    eta0 = _eta0(cfg, noise)
    for vi, k in enumerate(cfg.k_values):
        x = make_stepped_signal(cfg.N, cfg.d, k)
        l0 = block_l0(x)
        dr = bdnr(x)
        approx = approx_term(dr, l0, cfg.alpha)
        omegas = overlay_curve(x, cfg, noise, vi)
        for gi, (n1, na) in enumerate(cfg.grid):
            jobs = [(x, cfg.alpha, cfg.gamma1, cfg.gamma_alpha, n1, na, noise, eta0,
                     cfg.beta, cfg.seed, (vi, gi, r), cfg.method)
                    for r in range(cfg.replications)]
            res = _run_reps(cfg, jobs)
            err = np.abs(res[:, 0] / l0 - 1.0)
            clt = math.sqrt(2.0 * omegas[gi] / math.pi) / math.sqrt(n1 + na)
            rows.append((k, dr, n1, na, n1 + na, float(err.mean()), float(np.median(err)),
                         clt, approx, clt + approx, block_sparsity(x, cfg.alpha),
                         int(res[:, 6].sum())))
    return StudyResult("l20_small_alpha", L20_COLUMNS, rows, config=cfg)


COMPARE_COLUMNS = ("profile", "parameter", "p", "block_l0", "k_alpha", "k_1", "k_inf")


def _profile_signal(norms, d):
    return BlockSignal.uniform(np.repeat(np.asarray(norms, float) / math.sqrt(d), d), d)


def run_measure_compare(cfg: ExperimentConfig) -> StudyResult:
    """Table of block count versus soft sparsity for dominant-block profiles.

    Profiles: ``two_level`` (k blocks of norm 1, the rest of norm 1e-3 or 1e-6),
    ``power`` (block norms ``j**-q`` sorted decreasingly), ``uniform`` and ``single``.
    """
    d = cfg.d
    p = cfg.N // d
    if p * d != cfg.N:
        raise ConfigError(f"N={cfg.N} is not a multiple of d={d}")
    profiles = []
    for k in sorted({1, 2, 5, min(cfg.k, p), p // 2} - {0}):
        for eps in (1e-3, 1e-6):
            profiles.append(("two_level", f"k={k};small={eps:g}",
                             [1.0] * k + [eps] * (p - k)))
    for q in (0.5, 1.0, 2.0):
        profiles.append(("power", f"q={q:g}", list(np.arange(1, p + 1, dtype=float) ** -q)))
    profiles.append(("uniform", "", [1.0] * p))
    profiles.append(("single", "", [1.0] + [0.0] * (p - 1)))
    rows = []
    for name, param, norms in profiles:
        x = _profile_signal(norms, d)
        rows.append((name, param, p, block_l0(x), block_sparsity(x, cfg.alpha),
                     block_sparsity(x, 1.0), block_sparsity(x, math.inf)))
    return StudyResult("measure_compare", COMPARE_COLUMNS, rows, config=cfg)


_RUNNERS = {
    "error_curve": run_error_curve,
    "normality": run_normality,
    "l20_small_alpha": run_l20_small_alpha,
    "measure_compare": run_measure_compare,
}


def run_study(cfg: ExperimentConfig) -> StudyResult:
    return _RUNNERS[cfg.study](cfg)


def write_result(result: StudyResult, out_dir, stem: Optional[str] = None) -> list:
    """Write ``<stem>.csv`` (and ``<stem>_summary.csv``) plus ``<stem>.manifest.json``.

    Output is a pure function of the result, so identical configs give
    byte-identical files.
    """
    stem = stem or result.study
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def _put(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)

    _put(f"{stem}.csv", result.to_csv())
    if result.summary_columns:
        _put(f"{stem}_summary.csv", result.summary_csv())
    cfg = result.config
    manifest = {
        "study": result.study,
        "library": "blocksparsity",
        "version": __version__,
        "seed": cfg.seed if cfg else None,
        "config": {f.name: _format_value(getattr(cfg, f.name)) for f in fields(cfg)} if cfg else {},
        "files": [os.path.basename(p) for p in written],
        "rows": len(result.rows),
    }
    _put(f"{stem}.manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return written
