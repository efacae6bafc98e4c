"""Vine-copula test of Granger causality in the mean.

Part A estimates the log ratio of restricted to unrestricted summed squared
prediction errors, with conditional means obtained by simulating from a
univariate and a bivariate M-vine.  Part B simulates paths under the null
from the bivariate model's first-tree copulas, refits both models on each
path and recomputes the statistic to obtain a p-value.

Random streams are derived from ``numpy.random.SeedSequence(seed,
spawn_key=...)``: Part A of variant ``v`` uses key ``(0, v)`` and bootstrap
replicate ``j`` (retry ``a``) uses ``(1, j, a)``.  Results therefore do not
depend on the number of worker processes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mvine
from .copulas import ALL_FAMILIES, parse_family
from .exceptions import InputError, NumericalError

VARIANTS = ("full", "split")
REPORT_FORMAT = "mvinegc-test/1"


@dataclass(frozen=True)
class GCConfig:
    """Settings of the vine Granger-causality test.

    Attributes
    ----------
    k : int or "auto"
        Markov order; ``"auto"`` selects it by AIC over ``1..k_max``.
    T0 : int, optional
        First scored time (1-based); defaults to ``ceil(T / 2)``.
    N : int
        Simulated predictions per scored time.
    B : int
        Bootstrap replicates.
    """

    k: object = "auto"
    k_max: int = 4
    T0: int | None = None
    N: int = 200
    B: int = 200
    alpha: float = 0.05
    candidates: tuple = ALL_FAMILIES
    seed: int = 0
    variant: str = "full"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(parse_family(f) for f in self.candidates))
        if self.k != "auto" and (not isinstance(self.k, (int, np.integer)) or self.k < 1):
            raise InputError(f"k must be a positive integer or 'auto', got {self.k!r}")
        if self.N < 1 or self.B < 1:
            raise InputError("N and B must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.variant not in VARIANTS:
            raise InputError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.candidates:
            raise InputError("candidate family set is empty")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["candidates"] = [f.value for f in self.candidates]
        return d


@dataclass
class GCTestResult:
    """Outcome of one test of ``Y -> X``."""

    statistic: float
    null_stats: np.ndarray
    p_value: float
    k_used: int
    variant: str
    reject: bool
    config: dict
    model_x: dict
    model_xy: dict
    n_failed: int = 0
    T: int = 0

    @property
    def B_effective(self) -> int:
        return int(np.sum(np.isfinite(self.null_stats)))

    @property
    def flagged(self) -> bool:
        return self.n_failed > 0

    def to_record(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "variant": self.variant,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject": self.reject,
            "k": self.k_used,
            "T": self.T,
            "B": self.B_effective,
            "n_failed": self.n_failed,
            "N": self.config["N"],
            "seed": self.config["seed"],
            "aic_x": self.model_x["aic"],
            "aic_xy": self.model_xy["aic"],
            "fit_window": self.model_xy["fit_window"],
            "config": self.config,
        }


def _rng(seed: int, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _validate(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise InputError("x and y must be 1-d arrays of equal length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("series contain NaN or infinite values")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise InputError("constant series cannot be tested")
    return x, y


def _default_T0(T: int) -> int:
    return math.ceil(T / 2)


def gc_statistic(x, y, model_x, model_xy, T0: int, N: int, rng) -> float:
    """Log ratio of restricted to unrestricted squared prediction errors.

    Conditional means of ``X_t`` for ``t = T0..T`` (1-based) are averages of
    ``N`` draws from each model, restricted model first.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = model_xy.k
    if model_x.k != k:
        raise InputError("both models must have the same Markov order")
    if T0 < k + 1:
        raise InputError(f"T0 must be at least k + 1 = {k + 1}, got {T0}")
    if T0 > x.size:
        raise InputError(f"T0 = {T0} exceeds the series length {x.size}")
    times = np.arange(T0 - 1, x.size)
    mu_r = mvine.conditional_means(model_x, x[:, None], times, N, rng)
    mu_u = mvine.conditional_means(model_xy, np.column_stack([x, y]), times, N, rng)
    num = float(np.sum((x[times] - mu_r) ** 2))
    den = float(np.sum((x[times] - mu_u) ** 2))
    if den == 0.0:
        return math.inf if num > 0 else 0.0
    if num == 0.0:
        return -math.inf
    return math.log(num / den)


def _replicate_stat(x0, y0, k, T0, cfg, rng) -> float:
    model_x = mvine.fit(x0, k, cfg.candidates)
    model_xy = mvine.fit(np.column_stack([x0, y0]), k, cfg.candidates)
    return gc_statistic(x0, y0, model_x, model_xy, T0, cfg.N, rng)


def _run_replicate(task):
    model_xy, j, x0, y0, T, k, T0, cfg = task
    rng = _rng(cfg.seed, 1, j, 0)
    rng.random(2 * T)  # the path was drawn from the head of this stream
    try:
        return _replicate_stat(x0, y0, k, T0, cfg, rng), 0
    except (InputError, NumericalError, FloatingPointError, ValueError):
        pass
    # one retry on a fresh path
    rng = _rng(cfg.seed, 1, j, 1)
    try:
        x1, y1 = mvine.null_paths_from_uniforms(model_xy, rng.random(2 * T))
        return _replicate_stat(x1, y1, k, T0, cfg, rng), 1
    except (InputError, NumericalError, FloatingPointError, ValueError):
        return math.nan, 2


def null_distribution(model_xy, T: int, cfg: GCConfig, T0: int | None = None):
    """Bootstrap statistics under the null; returns ``(stats, n_failed)``.

    Failed replicates are retried once on a fresh path; if that also fails
    the entry is NaN and counted in ``n_failed``.
    """
    k = model_xy.k
    T0 = _default_T0(T) if T0 is None else T0
    uniforms = np.stack([_rng(cfg.seed, 1, j, 0).random(2 * T) for j in range(cfg.B)])
    xs, ys = mvine.null_paths_from_uniforms(model_xy, uniforms)
    tasks = [(model_xy, j, xs[j], ys[j], T, k, T0, cfg) for j in range(cfg.B)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_replicate, tasks, chunksize=max(1, cfg.B // (4 * cfg.workers))))
    else:
        results = [_run_replicate(t) for t in tasks]
    stats = np.array([r[0] for r in results])
    n_failed = sum(1 for r in results if r[1] == 2)
    return stats, n_failed


def p_value(statistic: float, null_stats) -> float:
    """Share of finite null statistics at or above the observed one."""
    null = np.asarray(null_stats, dtype=float)
    null = null[np.isfinite(null)]
    if null.size == 0:
        raise NumericalError("every bootstrap replicate failed")
    return float(np.mean(null >= statistic))


def _resolve_k(xy, cfg):
    if cfg.k == "auto":
        k, models = mvine.select_order(xy, cfg.k_max, cfg.candidates)
        return k, models[k - 1]
    return int(cfg.k), None


def mvine_test_variants(x, y, cfg: GCConfig, variants=VARIANTS) -> dict:
    """Run several variants on the same data, sharing the bootstrap.

    Both variants draw their null distribution from the full-sample bivariate
    model; they differ only in the window used to fit the Part A models.
    """
    x, y = _validate(x, y)
    T = x.size
    xy = np.column_stack([x, y])
    k, model_xy_full = _resolve_k(xy, cfg)
    if T < 20 * k:
        raise InputError(f"need at least {20 * k} observations for order {k}, got {T}")
    T0 = _default_T0(T) if cfg.T0 is None else int(cfg.T0)
    if T0 < k + 1 or T0 > T:
        raise InputError(f"T0 must lie in [{k + 1}, {T}], got {T0}")
    if model_xy_full is None:
        model_xy_full = mvine.fit(xy, k, cfg.candidates)

    out = {}
    parts = {}
    for v in variants:
        if v not in VARIANTS:
            raise InputError(f"unknown variant {v!r}")
        rng = _rng(cfg.seed, 0, VARIANTS.index(v))
        if v == "full":
            model_x = mvine.fit(x, k, cfg.candidates)
            model_xy = model_xy_full
            start = T0
        else:
            half = math.ceil(T / 2)
            model_x = mvine.fit(x, k, cfg.candidates, window=(0, half))
            model_xy = mvine.fit(xy, k, cfg.candidates, window=(0, half))
            start = max(T0, half + 1)
        stat = gc_statistic(x, y, model_x, model_xy, start, cfg.N, rng)
        parts[v] = (stat, model_x, model_xy)

    null_stats, n_failed = null_distribution(model_xy_full, T, cfg, T0)
    for v, (stat, model_x, model_xy) in parts.items():
        p = p_value(stat, null_stats)
        conf = cfg.to_dict()
        conf.update(variant=v, T0=T0, k=k)
        out[v] = GCTestResult(
            statistic=stat,
            null_stats=null_stats,
            p_value=p,
            k_used=k,
            variant=v,
            reject=p < cfg.alpha,
            config=conf,
            model_x=model_x.summary(),
            model_xy=model_xy.summary(),
            n_failed=n_failed,
            T=T,
        )
    return out


def mvine_test(x, y, cfg: GCConfig) -> GCTestResult:
    """Test whether ``y`` Granger-causes ``x`` in the mean."""
    return mvine_test_variants(x, y, cfg, variants=(cfg.variant,))[cfg.variant]


def format_result(res: GCTestResult) -> str:
    """Plain-text report of one test."""
    lines = [
        f"variant      {res.variant}",
        f"k            {res.k_used}",
        f"T            {res.T}",
        f"statistic    {res.statistic:.6f}",
        f"p-value      {res.p_value:.4f}",
        f"reject       {'yes' if res.reject else 'no'} (alpha={res.config['alpha']})",
        f"B / failed   {res.B_effective} / {res.n_failed}",
        f"N            {res.config['N']}",
        f"seed         {res.config['seed']}",
        f"AIC (X)      {res.model_x['aic']:.4f}",
        f"AIC (X,Y)    {res.model_xy['aic']:.4f}",
    ]
    return "\n".join(lines)


def result_to_json(res: GCTestResult) -> str:
    return json.dumps(res.to_record(), sort_keys=True)
