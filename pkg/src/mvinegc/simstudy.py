"""Data-generating processes and the Monte Carlo size/power harness."""

from __future__ import annotations

import csv
import io
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InputError, NumericalError
from .gctest import GCConfig, mvine_test_variants
from .linear import granger_linear

_ALT = np.array([1.0, -1.0, 1.0, -1.0])


def _s(z):
    # first lag of a lag vector
    return z[0]


# Each entry: Markov order, X equation, Y equation.  The equations take the
# lag vectors (x_{t-1}, ..., x_{t-k}) and (y_{t-1}, ..., y_{t-k}).
_MODELS = {
    "S1": (1, lambda x, y: 0.5 * x[0], lambda x, y: 0.5 * y[0]),
    "S2": (1, lambda x, y: abs(x[0]) ** 0.8, lambda x, y: 0.5 * y[0]),
    "S3": (1, lambda x, y: 0.5 * x[0], lambda x, y: 0.5 * y[0] + 0.5 * x[0] ** 2),
    "S4": (1, lambda x, y: 0.5 * x[0] * math.exp(-0.5 * x[0] ** 2), lambda x, y: 0.5 * y[0]),
    "S5": (1, lambda x, y: math.sin(x[0]), lambda x, y: 0.5 * y[0]),
    "P1": (1, lambda x, y: 0.5 * x[0] + 0.5 * y[0], lambda x, y: 0.5 * y[0]),
    "P2": (
        1,
        lambda x, y: 0.5 * x[0] + 0.5 * y[0] + 0.5 * math.sin(-2.0 * y[0]),
        lambda x, y: 0.5 * y[0],
    ),
    "P3": (1, lambda x, y: 0.5 * x[0] + 0.5 * y[0] ** 2, lambda x, y: 0.5 * y[0]),
    "P4": (1, lambda x, y: 0.5 * x[0] + 0.5 * y[0] ** 4, lambda x, y: 0.5 * math.sin(y[0])),
    "P5": (1, lambda x, y: 0.65 * x[0] + 0.2 * y[0] ** 2, lambda x, y: -0.3 * y[0]),
    "S1k4": (4, lambda x, y: 0.5 * _ALT @ x, lambda x, y: 0.5 * _ALT @ y),
    "S2k4": (4, lambda x, y: _ALT @ np.abs(x) ** 0.8, lambda x, y: 0.5 * _ALT @ y),
    "S3k4": (4, lambda x, y: 0.5 * _ALT @ x, lambda x, y: 0.5 * _ALT @ y + 0.5 * _ALT @ x**2),
    "P1k4": (4, lambda x, y: 0.5 * _ALT @ x + 0.5 * y.sum(), lambda x, y: 0.5 * _ALT @ y),
    "P2k4": (
        4,
        lambda x, y: 0.5 * _ALT @ x + 0.5 * y.sum() + 0.5 * np.sin(-2.0 * y).sum(),
        lambda x, y: 0.5 * _ALT @ y,
    ),
    "P3k4": (4, lambda x, y: 0.5 * _ALT @ x + 0.5 * (y**2).sum(), lambda x, y: 0.5 * _ALT @ y),
    "P4k4": (4, lambda x, y: 0.5 * _ALT @ x + 0.5 * (y**4).sum(), lambda x, y: 0.5 * _ALT @ np.sin(y)),
}
MODEL_NAMES = tuple(_MODELS)
SIZE_MODELS = tuple(m for m in MODEL_NAMES if m.startswith("S"))
POWER_MODELS = tuple(m for m in MODEL_NAMES if m.startswith("P"))
METHODS = ("mvine", "split", "linear")

PRESETS = {
    "desk": dict(S_size=200, S_power=100, B=100, N=100),
    "paper": dict(S_size=500, S_power=200, B=200, N=200),
}


@dataclass(frozen=True)
class DGPSpec:
    """A named assessment model with sample length and burn-in."""

    name: str
    T: int = 100
    burn_in: int = 200

    def __post_init__(self):
        if self.name not in _MODELS:
            raise InputError(f"unknown model {self.name!r}; valid names: {', '.join(MODEL_NAMES)}")
        if self.burn_in < 100:
            raise InputError("burn-in must be at least 100")
        if self.T < 2:
            raise InputError("T must be at least 2")

    @property
    def k(self) -> int:
        return _MODELS[self.name][0]


def generate(spec: DGPSpec, rng) -> tuple:
    """Simulate ``(x, y)`` of length ``spec.T`` after discarding the burn-in.

    Starts from zeros; ``eta`` drives ``x`` and ``epsilon`` drives ``y``, both
    independent standard normal.
    """
    k, fx, fy = _MODELS[spec.name]
    n = spec.T + spec.burn_in
    eps = rng.standard_normal((n, 2))
    x = np.zeros(n + k)
    y = np.zeros(n + k)
    for t in range(k, n + k):
        xl = x[t - k : t][::-1]
        yl = y[t - k : t][::-1]
        x[t] = fx(xl, yl) + eps[t - k, 0]
        y[t] = fy(xl, yl) + eps[t - k, 1]
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NumericalError(f"model {spec.name} diverged")
    return x[k + spec.burn_in :], y[k + spec.burn_in :]


def dataset_rng(seed: int, model: str, T: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(2, MODEL_NAMES.index(model), T, rep))
    return np.random.default_rng(ss)


def test_seed(seed: int, model: str, T: int, rep: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(3, MODEL_NAMES.index(model), T, rep))
    return int(ss.generate_state(1)[0])


@dataclass
class CellResult:
    model: str
    T: int
    method: str
    p_values: np.ndarray
    S: int
    alpha: float
    wall_time: float
    seed: int

    @property
    def n_completed(self) -> int:
        return int(np.sum(np.isfinite(self.p_values)))

    def _done(self):
        return self.p_values[np.isfinite(self.p_values)]

    @property
    def rejection_rate(self) -> float:
        p = self._done()
        return float(np.mean(p < self.alpha)) if p.size else math.nan

    @property
    def mean_p(self) -> float:
        p = self._done()
        return float(np.mean(p)) if p.size else math.nan

    @property
    def sd_p(self) -> float:
        p = self._done()
        return float(np.std(p, ddof=1)) if p.size > 1 else math.nan

    @property
    def flagged(self) -> bool:
        return self.n_completed < 0.95 * self.S


@dataclass
class MonteCarloReport:
    """Rejection rates and p-value moments per (model, T, method) cell."""

    cells: list
    config: dict

    def cell(self, model, T, method) -> CellResult:
        for c in self.cells:
            if (c.model, c.T, c.method) == (model, T, method):
                return c
        raise KeyError((model, T, method))

    def to_text(self) -> str:
        head = f"{'model':<6} {'T':>5} {'method':<7} {'reject':>7} {'mean_p':>7} {'sd_p':>7} {'done':>5} {'S':>5} {'time_s':>8}"
        lines = [head, "-" * len(head)]
        for c in self.cells:
            flag = " *" if c.flagged else ""
            lines.append(
                f"{c.model:<6} {c.T:>5} {c.method:<7} {c.rejection_rate:>7.3f} {c.mean_p:>7.3f} "
                f"{c.sd_p:>7.3f} {c.n_completed:>5} {c.S:>5} {c.wall_time:>8.1f}{flag}"
            )
        lines.append("")
        lines.append(f"alpha={self.config['alpha']} seed={self.config['seed']} B={self.config['B']} N={self.config['N']}")
        if any(c.flagged for c in self.cells):
            lines.append("* fewer than 95% of replicates completed")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "T", "method", "rejection_rate", "mean_p", "sd_p", "n_completed", "S", "seed", "wall_time"])
        for c in self.cells:
            w.writerow(
                [c.model, c.T, c.method, f"{c.rejection_rate:.6f}", f"{c.mean_p:.6f}", f"{c.sd_p:.6f}", c.n_completed, c.S, c.seed, f"{c.wall_time:.3f}"]
            )
        return buf.getvalue()

    def raw_p_values(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "T", "method", "replicate", "p_value"])
        for c in self.cells:
            for j, p in enumerate(c.p_values):
                w.writerow([c.model, c.T, c.method, j, "nan" if not np.isfinite(p) else f"{p:.6f}"])
        return buf.getvalue()

    def write(self, prefix) -> list:
        """Write ``<prefix>.txt``, ``<prefix>.csv`` and ``<prefix>_pvalues.csv``."""
        paths = []
        for suffix, text in ((".txt", self.to_text()), (".csv", self.to_csv()), ("_pvalues.csv", self.raw_p_values())):
            path = f"{prefix}{suffix}"
            with open(path, "w") as fh:
                fh.write(text if text.endswith("\n") else text + "\n")
            paths.append(path)
        return paths


def run_replicate(model: str, T: int, rep: int, methods, cfg: GCConfig, seed: int) -> dict:
    """P-values of each method on one simulated dataset (NaN on failure)."""
    spec = DGPSpec(model, T)
    x, y = generate(spec, dataset_rng(seed, model, T, rep))
    out = {}
    if "linear" in methods:
        try:
            out["linear"] = granger_linear(x, y, spec.k).p_value
        except (InputError, NumericalError):
            out["linear"] = math.nan
    variants = [v for v, m in (("full", "mvine"), ("split", "split")) if m in methods]
    if variants:
        rcfg = replace(cfg, k=spec.k, seed=test_seed(seed, model, T, rep), workers=1)
        try:
            res = mvine_test_variants(x, y, rcfg, variants)
            for v, m in (("full", "mvine"), ("split", "split")):
                if v in res:
                    out[m] = res[v].p_value
        except (InputError, NumericalError, ValueError, FloatingPointError):
            for v, m in (("full", "mvine"), ("split", "split")):
                if v in variants:
                    out[m] = math.nan
    return out


def _task(args):
    return run_replicate(*args)


def run_study(models, Ts, methods=METHODS, S: int = 100, cfg: GCConfig | None = None, workers: int = 1, seed: int = 0, progress=None) -> MonteCarloReport:
    """Simulate ``S`` datasets per (model, T) and apply each method to them.

    Every method sees the same datasets.  The M-vine order and the linear lag
    are set to the model's own Markov order.  Results are collected by
    replicate index, so they do not depend on ``workers``.
    """
    if S < 1:
        raise InputError(f"number of replicates must be at least 1, got {S}")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise InputError(f"unknown method {m!r}; valid: {', '.join(METHODS)}")
    for m in models:
        DGPSpec(m)
    cfg = cfg or GCConfig()
    cells = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for model in models:
            for T in Ts:
                t0 = time.time()
                tasks = [(model, T, rep, methods, cfg, seed) for rep in range(S)]
                if pool is not None:
                    results = list(pool.map(_task, tasks))
                else:
                    results = []
                    for t in tasks:
                        results.append(_task(t))
                        if progress is not None:
                            progress(model, T, len(results), S)
                elapsed = time.time() - t0
                for m in methods:
                    pv = np.array([r.get(m, math.nan) for r in results], dtype=float)
                    cells.append(CellResult(model, T, m, pv, S, cfg.alpha, elapsed, seed))
    finally:
        if pool is not None:
            pool.shutdown()
    conf = {"alpha": cfg.alpha, "seed": seed, "B": cfg.B, "N": cfg.N, "S": S, "methods": list(methods)}
    return MonteCarloReport(cells, conf)


def preset_config(name: str, **overrides) -> tuple:
    """``(GCConfig, S_size, S_power)`` for a named preset."""
    if name not in PRESETS:
        raise InputError(f"unknown preset {name!r}; valid: {', '.join(PRESETS)}")
    p = PRESETS[name]
    if name == "paper":
        warnings.warn("paper-scale preset: expect a runtime of days on a single core", RuntimeWarning, stacklevel=2)
    cfg = GCConfig(B=p["B"], N=p["N"], **overrides)
    return cfg, p["S_size"], p["S_power"]
