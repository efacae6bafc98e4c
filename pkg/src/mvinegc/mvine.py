"""Translation-invariant vine copula models for stationary k-Markov series.

Variables are addressed as ``(row, offset)`` pairs, with row 0 the series to
be predicted (``X``) and row 1 the candidate cause (``Y``).  The first tree is
a caterpillar: a serial spine ``X_t - X_{t+1}`` with a cross pendant
``X_t - Y_t`` at every column.  Ordering the first-tree edges as
``C_0, S_0, C_1, S_1, ...`` (cross, serial, ...) the higher trees form a
D-vine on that sequence.  A univariate model is the D-vine on ``X_t``.

An edge class is the set of all time translates of one edge; every class with
lag span at most ``k`` carries a fitted copula, all others are independence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import copulas as cop
from .copulas import ALL_FAMILIES, INDEPENDENCE, PairCopula
from .exceptions import CapabilityError, InputError
from .marginals import EmpiricalMarginal, ecdf_fit

X, Y = 0, 1
ROW_NAMES = ("X", "Y")
MODEL_FORMAT = "mvinegc-model/1"


def _var_label(var) -> str:
    return f"{ROW_NAMES[var[0]]}{var[1]}"


def _sort_vars(vs):
    # earlier time first, X before Y within a column
    return tuple(sorted(vs, key=lambda v: (v[1], v[0])))


def _canon(var, cond):
    """Translate ``(var, cond)`` so the smallest offset is 0; return (key, shift)."""
    shift = min([var[1]] + [c[1] for c in cond])
    key = ((var[0], var[1] - shift), tuple(_sort_vars((r, o - shift) for r, o in cond)))
    return key, shift


def _key_span(key) -> int:
    var, cond = key
    offs = [var[1]] + [c[1] for c in cond]
    return max(offs) - min(offs)


@dataclass(frozen=True)
class EdgeClass:
    """One translation class of vine edges, stored at its canonical position.

    Attributes
    ----------
    tree : int
        Tree level, starting at 1.
    kind : str
        ``"cross"`` or ``"serial"`` in the first tree, ``"mixed-a"`` /
        ``"mixed-b"`` in the second, ``"deep-<m>a"`` / ``"deep-<m>b"`` above;
        univariate models use ``"serial"`` and ``"serial-<m>"``.
    conditioned : tuple
        Ordered pair of variables; the first is the earlier one.
    conditioning : tuple
        Conditioning variables sorted by time and row.
    """

    tree: int
    kind: str
    conditioned: tuple
    conditioning: tuple

    @property
    def lag_span(self) -> int:
        a, b = self.conditioned
        return abs(b[1] - a[1])

    @property
    def span(self) -> int:
        offs = [v[1] for v in self.conditioned + self.conditioning]
        return max(offs) - min(offs)

    @property
    def label(self) -> str:
        a, b = self.conditioned
        s = f"{_var_label(a)},{_var_label(b)}"
        if self.conditioning:
            s += "|" + ",".join(_var_label(v) for v in self.conditioning)
        return s

    def translate(self, shift: int):
        a, b = self.conditioned
        return (
            ((a[0], a[1] + shift), (b[0], b[1] + shift)),
            tuple((r, o + shift) for r, o in self.conditioning),
        )


@dataclass(frozen=True)
class MVineStructure:
    """Fitted edge classes of an M-vine of dimension ``d`` and Markov order ``k``."""

    d: int
    k: int
    classes: tuple

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def index(self, label: str) -> int:
        for i, e in enumerate(self.classes):
            if e.label == label:
                return i
        raise KeyError(label)

    def producers(self) -> dict:
        """Map conditional-variable keys to the class and side that produce them."""
        out = {}
        for i, e in enumerate(self.classes):
            a, b = e.conditioned
            d = e.conditioning
            ka, _ = _canon(a, d + (b,))
            kb, _ = _canon(b, d + (a,))
            out[ka] = (i, 0)
            out[kb] = (i, 1)
        return out

    def cascade(self, row: int = X):
        """Edges that condition ``row`` at offset ``k`` on everything before it.

        For ``X`` the conditioning variables are all ``k * d`` earlier ones;
        for ``Y`` they also include ``X`` at the same time.  Returns
        ``(class_index, side, partner, conditioning)`` tuples sorted by tree,
        where ``side`` is the position of the target in the conditioned pair.
        """
        edges = []
        for i, e in enumerate(self.classes):
            for side in (0, 1):
                target = e.conditioned[side]
                if target[0] != row:
                    continue
                others = [e.conditioned[1 - side], *e.conditioning]
                if row == X and any(v[1] >= target[1] for v in others):
                    continue
                if row == Y and any(v[1] > target[1] for v in others):
                    continue
                shift = self.k - target[1]
                (a, b), pd = e.translate(shift)
                edges.append((e.tree, i, side, (a, b)[1 - side], pd))
        edges.sort()
        out = [(i, side, pa, pd) for _, i, side, pa, pd in edges]
        expected = self.k * self.d + (1 if row == Y else 0)
        assert len(out) == expected, f"found {len(out)} cascade edges, expected {expected}"
        for j in range(1, len(out)):
            prev = set(out[j - 1][3]) | {out[j - 1][2]}
            assert prev == set(out[j][3]), "edges do not form a cascade"
        return out

    def prediction_edges(self):
        """Classes whose edges condition ``X`` at the latest time on the past.

        Returns a list of ``(class_index, shift, partner, conditioning)`` sorted
        by tree level, translated so the predicted ``X`` sits at offset ``k``.
        The partner of edge ``j + 1`` is added to the conditioning set of edge
        ``j``, so inverting the list from the top reproduces the Rosenblatt map.
        """
        edges = []
        for i, e in enumerate(self.classes):
            a, b = e.conditioned
            if b[0] != X:
                continue
            others = [a, *e.conditioning]
            if any(v[1] >= b[1] for v in others):
                continue
            shift = self.k - b[1]
            (pa, _), pd = e.translate(shift)
            edges.append((e.tree, i, shift, pa, pd))
        edges.sort()
        out = [(i, s, pa, pd) for _, i, s, pa, pd in edges]
        expected = self.k * self.d
        assert len(out) == expected, f"found {len(out)} prediction edges, expected {expected}"
        for j in range(1, len(out)):
            prev = set(out[j - 1][3]) | {out[j - 1][2]}
            assert prev == set(out[j][3]), "prediction edges do not form a cascade"
        return out


def _first_tree_sequence(d: int, ncols: int):
    seq = []
    for t in range(ncols):
        if d == 2:
            seq.append(("cross", ((X, t), (Y, t))))
        if t + 1 < ncols:
            seq.append(("serial", ((X, t), (X, t + 1))))
    return seq


def build_structure(d: int, k: int) -> MVineStructure:
    """Enumerate the fitted edge classes for dimension ``d`` and order ``k``.

    Raises
    ------
    InputError
        If ``d`` is not 1 or 2 or ``k < 1``.
    """
    if d not in (1, 2):
        raise InputError(f"dimension must be 1 or 2, got {d}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InputError(f"Markov order must be a positive integer, got {k}")
    k = int(k)
    max_tree = 2 * k + 1 if d == 2 else k
    seq = _first_tree_sequence(d, 2 * k + 4)
    unions = [frozenset(pair) for _, pair in seq]
    classes = []
    seen = set()
    for m in range(1, max_tree + 1):
        for start in range(len(seq) - m + 1):
            if m == 1:
                kind0, pair = seq[start]
                conditioned, conditioning = pair, ()
            else:
                left = frozenset().union(*unions[start : start + m - 1])
                right = frozenset().union(*unions[start + 1 : start + m])
                conditioned = tuple(left ^ right)
                conditioning = tuple(left & right)
                kind0 = seq[start][0]
            if len(conditioned) != 2:
                raise AssertionError("vine window does not yield a pair")
            shift = min(v[1] for v in (*conditioned, *conditioning))
            conditioned = _sort_vars((r, o - shift) for r, o in conditioned)
            conditioning = _sort_vars((r, o - shift) for r, o in conditioning)
            if abs(conditioned[1][1] - conditioned[0][1]) > k:
                continue
            if (conditioned, conditioning) in seen:
                continue
            seen.add((conditioned, conditioning))
            if m == 1:
                kind = kind0
            elif d == 1:
                kind = f"serial-{m}"
            else:
                tag = "a" if kind0 == "cross" else "b"
                kind = f"mixed-{tag}" if m == 2 else f"deep-{m}{tag}"
            classes.append(EdgeClass(m, kind, conditioned, conditioning))
    return MVineStructure(d, k, tuple(classes))


@dataclass(frozen=True)
class MVineModel:
    """A fitted M-vine: structure, marginals and one copula per fitted class."""

    structure: MVineStructure
    marginals: tuple
    copulas: tuple
    loglik: float
    fit_window: tuple = (0, 0)
    converged: tuple = ()

    @property
    def d(self) -> int:
        return self.structure.d

    @property
    def k(self) -> int:
        return self.structure.k

    @property
    def n_params(self) -> int:
        return sum(c.n_params for c in self.copulas)

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.n_params

    def copula_for(self, label: str) -> PairCopula:
        return self.copulas[self.structure.index(label)]

    def summary(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "loglik": self.loglik,
            "n_params": self.n_params,
            "aic": self.aic,
            "fit_window": list(self.fit_window),
            "classes": {e.label: str(c) for e, c in zip(self.structure.classes, self.copulas)},
        }

    # serialization -------------------------------------------------------

    def to_json(self) -> str:
        data = {
            "format": MODEL_FORMAT,
            "d": self.d,
            "k": self.k,
            "loglik": self.loglik,
            "fit_window": list(self.fit_window),
            "marginals": [m.sorted_values.tolist() for m in self.marginals],
            "classes": [
                {
                    "label": e.label,
                    "family": c.family.value,
                    "theta": list(c.theta),
                    "rotation": c.rotation,
                }
                for e, c in zip(self.structure.classes, self.copulas)
            ],
            "converged": list(self.converged),
        }
        return json.dumps(data, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MVineModel":
        data = json.loads(text)
        if data.get("format") != MODEL_FORMAT:
            raise InputError(f"unsupported model format {data.get('format')!r}")
        structure = build_structure(int(data["d"]), int(data["k"]))
        labels = [e.label for e in structure.classes]
        by_label = {c["label"]: c for c in data["classes"]}
        if sorted(by_label) != sorted(labels):
            raise InputError("model file classes do not match the structure")
        copulas = tuple(
            PairCopula(cop.parse_family(by_label[l]["family"]), tuple(by_label[l]["theta"]), int(by_label[l]["rotation"]))
            for l in labels
        )
        marginals = tuple(EmpiricalMarginal(np.asarray(m, dtype=float)) for m in data["marginals"])
        return cls(
            structure,
            marginals,
            copulas,
            float(data["loglik"]),
            tuple(data["fit_window"]),
            tuple(data.get("converged", ())),
        )


class _PseudoObs:
    """Lazily computed conditional pseudo-observations of a model on a dataset.

    Arrays are indexed by the absolute time of the key's earliest variable.
    """

    def __init__(self, structure, marginals, copulas, data, uniform=False):
        self.structure = structure
        self.copulas = copulas
        self.T = data.shape[0]
        if uniform:
            self.base = [data[:, r] for r in range(data.shape[1])]
        else:
            self.base = [m.pit(data[:, r]) for r, m in enumerate(marginals)]
        self.producers = structure.producers()
        self._arrays = {}
        self._inputs = {}

    def array(self, key):
        if key in self._arrays:
            return self._arrays[key]
        var, cond = key
        if not cond:
            arr = self.base[var[0]]
        else:
            ci, side = self.producers[key]
            ua, ub = self.inputs(ci)
            arr = self.copulas[ci].hfunc(ua, ub, which=2 if side == 0 else 1)
        self._arrays[key] = arr
        return arr

    def inputs(self, ci):
        """Pseudo-observations entering class ``ci`` at every valid position."""
        if ci in self._inputs:
            return self._inputs[ci]
        e = self.structure.classes[ci]
        n = self.T - e.span
        a, b = e.conditioned
        out = []
        for var in (a, b):
            key, shift = _canon(var, e.conditioning)
            out.append(self.array(key)[shift : shift + n])
        self._inputs[ci] = tuple(out)
        return self._inputs[ci]

    def at(self, var, cond, times):
        """Values of ``F(var | cond)`` with offsets taken relative to ``times``."""
        key, shift = _canon(var, cond)
        return self.array(key)[np.asarray(times) + shift]


def _as_matrix(data) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[1] not in (1, 2):
        raise InputError(f"data must be a vector or a T x 2 matrix, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise InputError("data contain NaN or infinite values")
    return data


def fit(data, k: int, candidates=ALL_FAMILIES, window=None, fixed=None) -> MVineModel:
    """Pooled step-wise maximum likelihood fit of an M-vine.

    Parameters
    ----------
    data : array_like
        A length-T vector (univariate model) or a T x 2 matrix whose first
        column is the predicted series.
    k : int
        Markov order.
    candidates : iterable of Family
        Families considered for each class.
    window : (start, stop), optional
        Half-open row range used for fitting; defaults to all rows.
    fixed : sequence of (family, rotation), optional
        One entry per class; skips family selection and only estimates
        parameters.
    """
    data = _as_matrix(data)
    if window is not None:
        start, stop = window
        data = data[start:stop]
    else:
        start, stop = 0, data.shape[0]
    structure = build_structure(data.shape[1], k)
    T = data.shape[0]
    if T < 10 * (k + 1):
        raise InputError(f"need at least {10 * (k + 1)} observations for order {k}, got {T}")
    marginals = tuple(ecdf_fit(data[:, r]) for r in range(data.shape[1]))
    copulas = [INDEPENDENCE] * structure.n_classes
    converged = [True] * structure.n_classes
    store = _PseudoObs(structure, marginals, copulas, data)
    if fixed is not None and len(fixed) != structure.n_classes:
        raise InputError(f"expected {structure.n_classes} fixed families, got {len(fixed)}")
    for ci in range(structure.n_classes):
        ua, ub = store.inputs(ci)
        if fixed is None:
            res = cop.select_family(ua, ub, candidates)
        else:
            res = cop.fit_pair_mle(fixed[ci][0], ua, ub, rotation=fixed[ci][1])
        copulas[ci] = res.copula
        converged[ci] = res.converged
    model = MVineModel(structure, marginals, tuple(copulas), 0.0, (start, stop), tuple(converged))
    ll = _loglik_store(model, store)
    return MVineModel(structure, marginals, tuple(copulas), ll, (start, stop), tuple(converged))


def _loglik_store(model, store) -> float:
    total = 0.0
    for ci, c in enumerate(model.copulas):
        if c.is_independence:
            continue
        ua, ub = store.inputs(ci)
        total += float(np.sum(c.logpdf(ua, ub)))
    return total


def loglik_aic(model: MVineModel, data) -> tuple:
    """Log-likelihood of the copula part and its AIC on ``data``."""
    data = _as_matrix(data)
    if data.shape[1] != model.d:
        raise InputError(f"model has dimension {model.d}, data has {data.shape[1]} columns")
    store = _PseudoObs(model.structure, model.marginals, model.copulas, data)
    ll = _loglik_store(model, store)
    return ll, -2.0 * ll + 2.0 * model.n_params


def select_order(data, k_max: int = 4, candidates=ALL_FAMILIES):
    """Fit orders ``1..k_max`` and return the AIC-minimizing order and all models."""
    if k_max < 1:
        raise InputError(f"k_max must be at least 1, got {k_max}")
    models = [fit(data, k, candidates) for k in range(1, k_max + 1)]
    best = min(range(k_max), key=lambda i: (models[i].aic, i))
    return best + 1, models


def first_tree_copulas(model: MVineModel):
    """The fitted serial ``(X_t, X_{t+1})`` and cross ``(X_t, Y_t)`` copulas."""
    if model.d != 2:
        raise CapabilityError("first-tree cross copula requires a bivariate model")
    serial = model.copula_for("X0,X1")
    cross = model.copula_for("X0,Y0")
    return serial, cross


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def predictive_uniforms(model: MVineModel, data, times, w) -> np.ndarray:
    """Invert the Rosenblatt map of ``X_t`` given its past at each time.

    Parameters
    ----------
    data : array_like
        Observations (T x d) supplying the history; the rows at ``times``
        themselves are not used.
    times : array of int
        Zero-based target times, each at least ``k``.
    w : ndarray, shape (len(times), N)
        Independent uniforms.

    Returns
    -------
    ndarray of the same shape as ``w`` holding copula-scale draws of ``X_t``.
    """
    data = _as_matrix(data)
    times = np.asarray(times, dtype=int)
    if data.shape[1] != model.d:
        raise InputError(f"model has dimension {model.d}, data has {data.shape[1]} columns")
    if times.size and times.min() < model.k:
        raise InputError(f"prediction times must be at least k={model.k}")
    store = _PseudoObs(model.structure, model.marginals, model.copulas, data)
    v = np.asarray(w, dtype=float)
    base = times - model.k
    for ci, _, partner, cond in reversed(model.structure.prediction_edges()):
        c = model.copulas[ci]
        if c.is_independence:
            continue
        given = store.at(partner, cond, base)[:, None]
        v = c.hinv(v, given, which=1)
    return v


def conditional_means(model: MVineModel, data, times, n_draws: int, rng) -> np.ndarray:
    """Monte Carlo conditional means of ``X_t`` given its past, on the data scale."""
    times = np.asarray(times, dtype=int)
    w = rng.random((times.size, n_draws))
    u = predictive_uniforms(model, data, times, w)
    return model.marginals[X].quantile(u).mean(axis=1)


def simulate_conditional(model: MVineModel, history, n_draws: int, rng) -> np.ndarray:
    """Draw ``n_draws`` values of the next ``X`` given the last ``k`` observations.

    ``history`` holds ``k`` rows (oldest first) of the model's ``d`` series.
    """
    history = _as_matrix(history)
    if history.shape[0] != model.k:
        raise InputError(f"history must contain exactly k={model.k} rows, got {history.shape[0]}")
    padded = np.vstack([history, history[-1:]])
    w = rng.random((1, n_draws))
    u = predictive_uniforms(model, padded, [model.k], w)[0]
    return model.marginals[X].quantile(u)


def null_paths_from_uniforms(model: MVineModel, uniforms) -> tuple:
    """Null-hypothesis paths driven by given uniforms.

    ``uniforms`` has shape ``(..., 2T)``: the first ``T`` entries drive the
    serial chain of ``X`` (the first one is the initial state) and the last
    ``T`` draw ``Y`` from the cross copula given ``X``.
    """
    serial, cross = first_tree_copulas(model)
    uniforms = np.asarray(uniforms, dtype=float)
    T = uniforms.shape[-1] // 2
    wx, wy = uniforms[..., :T], uniforms[..., T:]
    u = np.empty(wx.shape)
    u[..., 0] = np.clip(wx[..., 0], cop.EPS, 1.0 - cop.EPS)
    for t in range(1, T):
        u[..., t] = serial.hinv(wx[..., t], u[..., t - 1], which=1)
    v = cross.hinv(wy, u, which=1)
    return model.marginals[X].quantile(u), model.marginals[Y].quantile(v)


def simulate_null_path(model: MVineModel, T: int, rng) -> tuple:
    """One path of length ``T`` from the first-tree serial and cross copulas.

    ``Y`` carries no information about future ``X`` under this law.
    """
    if T < 2:
        raise InputError(f"path length must be at least 2, got {T}")
    return null_paths_from_uniforms(model, rng.random(2 * T))


def _draw_next(model, window, w, row):
    # inverse Rosenblatt step for ``row`` at the last row of ``window`` (uniform scale)
    store = _PseudoObs(model.structure, model.marginals, model.copulas, window, uniform=True)
    v = np.array([w])
    for ci, side, partner, cond in reversed(model.structure.cascade(row)):
        c = model.copulas[ci]
        if c.is_independence:
            continue
        given = store.at(partner, cond, [0])
        v = c.hinv(v, given, which=1 if side == 1 else 2)
    return float(v[0])


def simulate_series(model: MVineModel, T: int, rng, burn_in: int = 200) -> np.ndarray:
    """Simulate a ``T x d`` path from the full M-vine law.

    Each step draws ``X_t`` and then ``Y_t`` by inverting their conditional
    distributions given the last ``k`` observations.  The chain starts from
    independent uniforms and discards ``burn_in`` steps; values are mapped to
    the data scale through the model's marginals.
    """
    if T < 1 or burn_in < 0:
        raise InputError("T must be positive and burn_in non-negative")
    k, d = model.k, model.d
    n = T + burn_in + k
    u = np.empty((n, d))
    u[:k] = rng.random((k, d))
    w = rng.random((n, d))
    for t in range(k, n):
        window = u[t - k : t + 1].copy()
        window[-1] = 0.5
        window[-1, X] = _draw_next(model, window, w[t, X], X)
        if d == 2:
            window[-1, Y] = _draw_next(model, window, w[t, Y], Y)
        u[t] = window[-1]
    u = np.clip(u[k + burn_in :], cop.EPS, 1.0 - cop.EPS)
    return np.column_stack([m.quantile(u[:, r]) for r, m in enumerate(model.marginals)])


def make_model(structure: MVineStructure, marginals, copulas, data=None) -> MVineModel:
    """Assemble a model from given parts; the log-likelihood is evaluated on ``data`` if given."""
    copulas = tuple(copulas)
    if len(copulas) != structure.n_classes:
        raise InputError(f"expected {structure.n_classes} copulas, got {len(copulas)}")
    marginals = tuple(marginals)
    model = MVineModel(structure, marginals, copulas, 0.0, (0, 0), (True,) * len(copulas))
    if data is None:
        return model
    ll, _ = loglik_aic(model, data)
    n = _as_matrix(data).shape[0]
    return MVineModel(structure, marginals, copulas, ll, (0, n), model.converged)
