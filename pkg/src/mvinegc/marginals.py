"""Rescaled empirical marginal distributions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError

EPS = 1e-10


@dataclass(frozen=True, eq=False)
class EmpiricalMarginal:
    """Empirical CDF of a sample, rescaled by ``n + 1`` to stay inside (0, 1).

    Attributes
    ----------
    sorted_values : ndarray
        The sample in ascending order.
    """

    sorted_values: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, EmpiricalMarginal):
            return NotImplemented
        return np.array_equal(self.sorted_values, other.sorted_values)

    __hash__ = None

    @property
    def n(self) -> int:
        return self.sorted_values.size

    def pit(self, x) -> np.ndarray:
        """Probability integral transform ``#{X_t <= x} / (n + 1)``.

        Values are clamped to ``[EPS, 1 - EPS]`` so they can be fed to copulas.
        """
        x = np.asarray(x, dtype=float)
        ranks = np.searchsorted(self.sorted_values, x, side="right")
        return np.clip(ranks / (self.n + 1.0), EPS, 1.0 - EPS)

    def quantile(self, p) -> np.ndarray:
        """Inverse of the rescaled empirical CDF.

        Linear interpolation through the points ``(i / (n + 1), x_(i))``;
        probabilities outside ``[1/(n+1), n/(n+1)]`` map to the sample
        minimum or maximum.
        """
        p = np.asarray(p, dtype=float)
        if np.any(np.isnan(p)):
            raise InputError("quantile probabilities contain NaN")
        grid = np.arange(1, self.n + 1) / (self.n + 1.0)
        return np.interp(p, grid, self.sorted_values)

    def to_dict(self) -> dict:
        return {"sorted_values": self.sorted_values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalMarginal":
        return cls(np.asarray(data["sorted_values"], dtype=float))


def ecdf_fit(x) -> EmpiricalMarginal:
    """Build the rescaled empirical marginal of a one-dimensional sample.

    Raises
    ------
    InputError
        If the sample has fewer than 2 values, is not one-dimensional or contains non-finite values.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InputError("marginal sample must be a 1-d array with at least 2 values")
    if not np.all(np.isfinite(x)):
        raise InputError("marginal sample contains NaN or infinite values")
    return EmpiricalMarginal(np.sort(x))
