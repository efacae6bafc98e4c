"""CSV ingestion, differencing and the Phillips-Perron unit-root check."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError


@dataclass
class SeriesTable:
    """Equal-length numeric columns with opaque period labels."""

    names: list
    index: list
    columns: dict
    n_dropped: int = 0

    def __len__(self):
        return len(self.index)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise InputError(f"unknown column {name!r}; available: {', '.join(self.names)}")
        return self.columns[name]


def _parse_float(text):
    try:
        val = float(text)
    except (TypeError, ValueError):
        return None
    return val if math.isfinite(val) else None


def load_csv(path, columns=None, header: bool = True, index_col: int | None = 0) -> SeriesTable:
    """Read selected numeric columns of a comma-separated file.

    Parameters
    ----------
    path : str or path-like
    columns : sequence of str or int, optional
        Column names (with a header) or zero-based positions; defaults to
        every column except ``index_col``.
    header : bool
        Whether the first row holds column names.
    index_col : int or None
        Position of the period label column.

    Rows where any selected field is blank or not a number are dropped and
    counted in ``n_dropped``.
    """
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if header:
        if not rows:
            raise InputError(f"{path} is empty")
        head, rows = [h.strip() for h in rows[0]], rows[1:]
    else:
        width = max((len(r) for r in rows), default=0)
        head = [f"col{j}" for j in range(width)]
    if columns is None:
        positions = [j for j in range(len(head)) if j != index_col]
    else:
        positions = []
        for c in columns:
            if isinstance(c, (int, np.integer)):
                if not 0 <= c < len(head):
                    raise InputError(f"column position {c} out of range")
                positions.append(int(c))
            elif c in head:
                positions.append(head.index(c))
            else:
                raise InputError(f"missing column {c!r}; available: {', '.join(head)}")
    names = [head[j] for j in positions]
    values = {n: [] for n in names}
    index = []
    dropped = 0
    for i, r in enumerate(rows):
        parsed = [_parse_float(r[j]) if j < len(r) else None for j in positions]
        if any(p is None for p in parsed):
            dropped += 1
            continue
        for n, p in zip(names, parsed):
            values[n].append(p)
        label = r[index_col].strip() if index_col is not None and index_col < len(r) else str(i)
        index.append(label)
    if not index:
        raise InputError(f"no usable rows in {path}")
    return SeriesTable(names, index, {n: np.asarray(v) for n, v in values.items()}, dropped)


def first_difference(s) -> np.ndarray:
    """``s[t+1] - s[t]``."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise InputError("differencing needs a 1-d series with at least 2 values")
    return np.diff(s)


# Fuller's critical values of the Dickey-Fuller t statistic with intercept,
# rows by sample size, columns by lower-tail probability
_PP_T = np.array([25.0, 50.0, 100.0, 250.0, 500.0, 100000.0])
_PP_PROB = np.array([0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99])
_PP_TABLE = -np.array(
    [
        [3.75, 3.33, 3.00, 2.63, 0.37, 0.00, -0.34, -0.72],
        [3.58, 3.22, 2.93, 2.60, 0.40, 0.03, -0.29, -0.66],
        [3.51, 3.17, 2.89, 2.58, 0.42, 0.05, -0.26, -0.63],
        [3.46, 3.14, 2.88, 2.57, 0.42, 0.06, -0.24, -0.62],
        [3.44, 3.13, 2.87, 2.57, 0.43, 0.07, -0.24, -0.61],
        [3.43, 3.12, 2.86, 2.57, 0.44, 0.07, -0.23, -0.60],
    ]
)


def _pp_critical_values(n: int) -> np.ndarray:
    return np.array([np.interp(n, _PP_T, _PP_TABLE[:, j]) for j in range(_PP_PROB.size)])


@dataclass(frozen=True)
class PPResult:
    """Phillips-Perron outcome.

    ``p_value`` is clamped to the tabulated range, so 0.01 stands for
    "0.01 or less"; :meth:`p_below` answers strict comparisons exactly by
    comparing the statistic with the interpolated critical value.
    """

    statistic: float
    p_value: float
    lags: int
    n: int

    def p_below(self, level: float) -> bool:
        if not _PP_PROB[0] <= level <= _PP_PROB[-1]:
            raise InputError(f"level must lie in [{_PP_PROB[0]}, {_PP_PROB[-1]}]")
        crit = float(np.interp(level, _PP_PROB, _pp_critical_values(self.n)))
        return self.statistic < crit


def pp_test(s, lags="auto") -> PPResult:
    """Phillips-Perron ``Z_tau`` test of a unit root against a stationary mean.

    The Dickey-Fuller regression includes an intercept; the long-run variance
    uses Bartlett weights with bandwidth ``trunc(4 (n/100)^(1/4))`` by
    default.  P-values interpolate the intercept-case table and are clamped
    to ``[0.01, 0.99]``.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 1 or s.size < 20:
        raise InputError("the unit-root test needs a 1-d series of length at least 20")
    if not np.all(np.isfinite(s)):
        raise InputError("series contains NaN or infinite values")
    if np.ptp(s) == 0.0:
        raise InputError("constant series")
    y, ylag = s[1:], s[:-1]
    n = y.size
    design = np.column_stack([np.ones(n), ylag])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    u = y - design @ coef
    ssr = float(u @ u)
    sigma2 = ssr / (n - 2)
    sxx = float(np.sum((ylag - ylag.mean()) ** 2))
    if sxx == 0.0:
        raise InputError("constant series")
    se = math.sqrt(sigma2 / sxx)
    tstat = (coef[1] - 1.0) / se
    if lags == "auto":
        lags = int(4.0 * (n / 100.0) ** 0.25)
    lags = int(lags)
    if lags < 0:
        raise InputError("bandwidth must be non-negative")
    gamma0 = ssr / n
    lrv = gamma0
    for i in range(1, lags + 1):
        lrv += 2.0 * (1.0 - i / (lags + 1.0)) * float(u[i:] @ u[:-i]) / n
    lam = math.sqrt(lrv)
    z = math.sqrt(gamma0 / lrv) * tstat - (lrv - gamma0) * n / (2.0 * lam * math.sqrt(sxx))
    p = float(np.interp(z, _pp_critical_values(n), _PP_PROB))
    return PPResult(float(z), p, lags, n)
