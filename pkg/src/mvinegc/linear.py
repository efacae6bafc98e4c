"""Linear bivariate Granger-causality test based on OLS autoregressions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .exceptions import InputError, NumericalError

P_MAX_AUTO = 10


def ols(design, response, names=None):
    """Least squares through a column-pivoted QR decomposition.

    Parameters
    ----------
    design : (n, p) array
    response : (n,) array
    names : sequence of str, optional
        Column labels used in the rank-deficiency message.

    Returns
    -------
    coef, resid, rss
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise InputError("design must be (n, p) and response (n,)")
    n, p = X.shape
    if n < p:
        raise InputError(f"need at least as many rows ({n}) as columns ({p})")
    q, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    bad = np.flatnonzero(diag <= tol)
    if diag.size == 0 or diag[0] == 0.0 or bad.size:
        col = piv[bad[0]] if bad.size else 0
        label = names[col] if names is not None else f"column {col}"
        raise NumericalError(f"design matrix is rank deficient at {label}")
    z = linalg.solve_triangular(r, q.T @ y)
    coef = np.empty(p)
    coef[piv] = z
    resid = y - X @ coef
    return coef, resid, float(resid @ resid)


def _lags(s, p, start):
    # columns s_{t-1}, ..., s_{t-p} for t = start..T-1 (0-based)
    T = s.size
    return np.column_stack([s[start - j : T - j] for j in range(1, p + 1)])


@dataclass(frozen=True)
class LinearGCResult:
    """Outcome of the linear test of ``Y -> X``."""

    p: int
    S: float
    p_value: float
    rss0: float
    rss1: float
    n_eff: int
    coef_restricted: np.ndarray
    coef_unrestricted: np.ndarray

    def reject(self, alpha: float = 0.05) -> bool:
        return self.p_value < alpha


def var_aic(x, y, p_max: int = P_MAX_AUTO):
    """AIC of bivariate VAR(p), p = 1..p_max, on a common estimation sample.

    Returns ``(p_best, aics)``; ties go to the smaller lag.
    ``AIC = log det(Sigma) + 2 (p d^2 + d) / T_eff`` with the ML residual covariance.
    """
    x, y = _check(x, y)
    T = x.size
    if T <= 3 * p_max + 2:
        raise InputError(f"series of length {T} too short for lag search up to {p_max}")
    start = p_max
    n = T - start
    aics = []
    Z = np.column_stack([x, y])
    for p in range(1, p_max + 1):
        design = np.column_stack([np.ones(n), _lags(x, p, start), _lags(y, p, start)])
        resid = np.empty((n, 2))
        for i in range(2):
            _, resid[:, i], _ = ols(design, Z[start:, i])
        sigma = resid.T @ resid / n
        sign, logdet = np.linalg.slogdet(sigma)
        if sign <= 0:
            raise NumericalError("singular VAR residual covariance")
        aics.append(logdet + 2.0 * (p * 4 + 2) / n)
    aics = np.array(aics)
    return int(np.argmin(aics)) + 1, aics


def _check(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise InputError("x and y must be 1-d arrays of equal length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("series contain NaN or infinite values")
    return x, y


def granger_linear(x, y, p=1) -> LinearGCResult:
    """Asymptotic chi-square test that lags of ``y`` do not help predict ``x``.

    Both regressions include an intercept and use ``t = p+1..T``.  The
    statistic is ``S = n_eff (RSS0 - RSS1) / RSS1`` with ``n_eff = T - p``
    observations, referred to chi-square with ``p`` degrees of freedom.
    ``p="auto"`` picks the VAR lag by AIC over ``1..10``.
    """
    x, y = _check(x, y)
    T = x.size
    if p == "auto":
        p_max = min(P_MAX_AUTO, max(1, (T - 3) // 3))
        p, _ = var_aic(x, y, p_max)
    if not isinstance(p, (int, np.integer)) or p <= 0:
        raise InputError(f"lag order must be a positive integer or 'auto', got {p!r}")
    p = int(p)
    if T <= 2 * p + 2:
        raise InputError(f"series of length {T} too short for {p} lags")
    n = T - p
    xl, yl = _lags(x, p, p), _lags(y, p, p)
    names_x = [f"x lag {j}" for j in range(1, p + 1)]
    names_y = [f"y lag {j}" for j in range(1, p + 1)]
    target = x[p:]
    restricted = np.column_stack([np.ones(n), xl])
    unrestricted = np.column_stack([restricted, yl])
    c0, _, rss0 = ols(restricted, target, ["intercept"] + names_x)
    if np.ptp(y) == 0.0:
        # constant lags of y are absorbed by the intercept: nothing to test
        c1 = np.concatenate([c0, np.zeros(p)])
        return LinearGCResult(p, 0.0, 1.0, rss0, rss0, n, c0, c1)
    c1, _, rss1 = ols(unrestricted, target, ["intercept"] + names_x + names_y)
    if rss1 <= 0.0:
        raise NumericalError("unrestricted regression fits exactly; statistic undefined")
    S = max(n * (rss0 - rss1) / rss1, 0.0)
    return LinearGCResult(p, S, float(stats.chi2.sf(S, p)), rss0, rss1, n, c0, c1)
