"""Bivariate parametric copulas and their calculus.

Every family is exchangeable in its unrotated form, so the kernels below are
written once in terms of a conditioning argument and a free argument and the
rotations are obtained by reflecting coordinates.  Conventions:

* ``hfunc(u, v, which=1)`` is ``dC/du``, the CDF of ``V`` given ``U = u``.
* ``hfunc(u, v, which=2)`` is ``dC/dv``, the CDF of ``U`` given ``V = v``.
* Rotations are counter-clockwise: 90 reflects ``u``, 270 reflects ``v`` and
  180 reflects both.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special, stats

from .exceptions import CapabilityError, DomainError, InputError, NumericalError

EPS = 1e-10
ROTATIONS = (0, 90, 180, 270)


class Family(enum.Enum):
    INDEPENDENCE = "independence"
    GAUSSIAN = "gaussian"
    STUDENT = "student"
    CLAYTON = "clayton"
    GUMBEL = "gumbel"
    FRANK = "frank"
    JOE = "joe"

    @property
    def n_params(self) -> int:
        return _N_PARAMS[self]

    @property
    def rotatable(self) -> bool:
        return self in _ASYMMETRIC

    @property
    def order(self) -> int:
        return _FAMILY_ORDER[self]


ALL_FAMILIES = tuple(Family)
_FAMILY_ORDER = {fam: i for i, fam in enumerate(Family)}
_ASYMMETRIC = frozenset({Family.CLAYTON, Family.GUMBEL, Family.JOE})
_N_PARAMS = {
    Family.INDEPENDENCE: 0,
    Family.GAUSSIAN: 1,
    Family.STUDENT: 2,
    Family.CLAYTON: 1,
    Family.GUMBEL: 1,
    Family.FRANK: 1,
    Family.JOE: 1,
}

# optimizer boxes, kept strictly inside the admissible domains
_RHO_MAX = 0.999
_FIT_BOUNDS = {
    Family.GAUSSIAN: [(-_RHO_MAX, _RHO_MAX)],
    Family.STUDENT: [(-_RHO_MAX, _RHO_MAX), (2.001, 50.0)],
    Family.CLAYTON: [(1e-4, 28.0)],
    Family.GUMBEL: [(1.0, 17.0)],
    Family.FRANK: [(-35.0, 35.0)],
    Family.JOE: [(1.0 + 1e-4, 30.0)],
}


def parse_family(name) -> Family:
    """Return the :class:`Family` for a tag such as ``"clayton"``."""
    if isinstance(name, Family):
        return name
    try:
        return Family(str(name).lower())
    except ValueError:
        valid = ", ".join(f.value for f in Family)
        raise InputError(f"unknown copula family {name!r}; expected one of {valid}") from None


def _check_theta(family: Family, theta: tuple) -> None:
    if len(theta) != family.n_params:
        raise DomainError(
            f"{family.value} copula takes {family.n_params} parameter(s), got {len(theta)}"
        )
    if not all(math.isfinite(t) for t in theta):
        raise DomainError(f"non-finite parameter for {family.value} copula: {theta}")
    if family in (Family.GAUSSIAN, Family.STUDENT):
        if not -1.0 < theta[0] < 1.0:
            raise DomainError(f"correlation must lie in (-1, 1), got {theta[0]}")
        if family is Family.STUDENT and not 2.0 < theta[1] <= 50.0:
            raise DomainError(f"degrees of freedom must lie in (2, 50], got {theta[1]}")
    elif family is Family.CLAYTON and not 0.0 < theta[0] <= 28.0:
        raise DomainError(f"Clayton parameter must lie in (0, 28], got {theta[0]}")
    elif family is Family.GUMBEL and not 1.0 <= theta[0] <= 17.0:
        raise DomainError(f"Gumbel parameter must lie in [1, 17], got {theta[0]}")
    elif family is Family.FRANK and not (theta[0] != 0.0 and -35.0 <= theta[0] <= 35.0):
        raise DomainError(f"Frank parameter must lie in [-35, 35] without 0, got {theta[0]}")
    elif family is Family.JOE and not 1.0 < theta[0] <= 30.0:
        raise DomainError(f"Joe parameter must lie in (1, 30], got {theta[0]}")


def _clip(x):
    return np.clip(np.asarray(x, dtype=float), EPS, 1.0 - EPS)


# ---------------------------------------------------------------------------
# unrotated kernels: logpdf0(u, v), cdf0(u, v), h0(cond, free), hinv0(w, cond)
# ---------------------------------------------------------------------------


def _bvn_cdf(h, k, rho):
    # Owen's T representation of the bivariate normal CDF
    h = np.where(h == 0.0, 1e-15, h)
    k = np.where(k == 0.0, 1e-15, k)
    s = math.sqrt(1.0 - rho * rho)
    ah = (k - rho * h) / (h * s)
    ak = (h - rho * k) / (k * s)
    beta = np.where(h * k < 0.0, 0.5, 0.0)
    out = 0.5 * (special.ndtr(h) + special.ndtr(k)) - special.owens_t(h, ah) - special.owens_t(k, ak) - beta
    return np.clip(out, 0.0, 1.0)


def _gauss_logpdf(theta, u, v):
    rho = theta[0]
    x, y = special.ndtri(u), special.ndtri(v)
    r2 = 1.0 - rho * rho
    return -0.5 * math.log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)


def _gauss_cdf(theta, u, v):
    return _bvn_cdf(special.ndtri(u), special.ndtri(v), theta[0])


def _gauss_h(theta, c, f):
    rho = theta[0]
    return special.ndtr((special.ndtri(f) - rho * special.ndtri(c)) / math.sqrt(1.0 - rho * rho))


def _gauss_hinv(theta, w, c):
    rho = theta[0]
    return special.ndtr(special.ndtri(w) * math.sqrt(1.0 - rho * rho) + rho * special.ndtri(c))


def _t_ppf(nu, p):
    # Student t quantile through the incomplete beta inverse; the two branches
    # avoid cancellation in the tails and near the median respectively
    p = np.asarray(p, dtype=float)
    s = 2.0 * np.minimum(p, 1.0 - p)
    tail = s < 0.5
    x2 = np.empty(p.shape)
    z = special.betaincinv(0.5 * nu, 0.5, s[tail])
    x2[tail] = nu * (1.0 - z) / z
    y = special.betaincinv(0.5, 0.5 * nu, 1.0 - s[~tail])
    x2[~tail] = nu * y / (1.0 - y)
    return np.sign(p - 0.5) * np.sqrt(x2)


def _t_logpdf(theta, u, v):
    rho, nu = theta
    return _t_logpdf_scores(rho, nu, _t_ppf(nu, u), _t_ppf(nu, v))


def _t_logpdf_scores(rho, nu, x, y):
    r2 = 1.0 - rho * rho
    log2 = (
        special.gammaln((nu + 2.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - math.log(nu * math.pi)
        - 0.5 * math.log(r2)
        - (nu + 2.0) / 2.0 * np.log1p((x * x + y * y - 2.0 * rho * x * y) / (nu * r2))
    )
    log1_const = special.gammaln((nu + 1.0) / 2.0) - special.gammaln(nu / 2.0) - 0.5 * math.log(nu * math.pi)
    log1 = 2.0 * log1_const - (nu + 1.0) / 2.0 * (np.log1p(x * x / nu) + np.log1p(y * y / nu))
    return log2 - log1


def _t_h(theta, c, f):
    rho, nu = theta
    x, y = _t_ppf(nu, c), _t_ppf(nu, f)
    scale = np.sqrt((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0))
    return special.stdtr(nu + 1.0, (y - rho * x) / scale)


def _t_hinv(theta, w, c):
    rho, nu = theta
    x = _t_ppf(nu, c)
    scale = np.sqrt((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0))
    return special.stdtr(nu, _t_ppf(nu + 1.0, w) * scale + rho * x)


def _t_cdf(theta, u, v):
    rho, nu = theta
    dens = stats.t(nu)
    u, v = np.broadcast_arrays(u, v)
    out = np.empty(u.shape)
    for idx in np.ndindex(u.shape):
        xu = float(special.stdtrit(nu, u[idx]))
        yv = float(special.stdtrit(nu, v[idx]))

        def integrand(z):
            scale = math.sqrt((nu + z * z) * (1.0 - rho * rho) / (nu + 1.0))
            return dens.pdf(z) * special.stdtr(nu + 1.0, (yv - rho * z) / scale)

        val, _ = integrate.quad(integrand, -np.inf, xu, epsabs=1e-13, epsrel=1e-12, limit=200)
        out[idx] = val
    return np.clip(out, 0.0, 1.0)


def _clayton_log_core(theta, u, v):
    # log(u^-theta + v^-theta - 1), stable for large arguments
    a = -theta * np.log(u)
    b = -theta * np.log(v)
    m = np.logaddexp(a, b)
    return m + np.log1p(-np.exp(-m))


def _clayton_logpdf(theta, u, v):
    th = theta[0]
    core = _clayton_log_core(th, u, v)
    return math.log1p(th) - (th + 1.0) * (np.log(u) + np.log(v)) - (2.0 + 1.0 / th) * core


def _clayton_cdf(theta, u, v):
    th = theta[0]
    return np.exp(-_clayton_log_core(th, u, v) / th)


def _clayton_h(theta, c, f):
    th = theta[0]
    return np.exp(-(th + 1.0) * np.log(c) - (1.0 + 1.0 / th) * _clayton_log_core(th, c, f))


def _clayton_hinv(theta, w, c):
    th = theta[0]
    inner = -th * np.log(c) + np.log(np.expm1(-th / (th + 1.0) * np.log(w)))
    return np.exp(-np.logaddexp(0.0, inner) / th)


def _gumbel_parts(th, u, v):
    x, y = -np.log(u), -np.log(v)
    lx, ly = np.log(x), np.log(y)
    la = np.logaddexp(th * lx, th * ly)
    return x, y, lx, ly, la


def _gumbel_logpdf(theta, u, v):
    th = theta[0]
    x, y, lx, ly, la = _gumbel_parts(th, u, v)
    a_root = np.exp(la / th)
    return (
        -a_root
        + x
        + y
        + (th - 1.0) * (lx + ly)
        + (1.0 / th - 2.0) * la
        + np.log(a_root + th - 1.0)
    )


def _gumbel_cdf(theta, u, v):
    th = theta[0]
    *_, la = _gumbel_parts(th, u, v)
    return np.exp(-np.exp(la / th))


def _gumbel_h(theta, c, f):
    th = theta[0]
    x, _, lx, _, la = _gumbel_parts(th, c, f)
    return np.exp(-np.exp(la / th) + (1.0 / th - 1.0) * la + (th - 1.0) * lx + x)


def _joe_parts(th, u, v):
    lub, lvb = np.log1p(-u), np.log1p(-v)
    a, b = np.exp(th * lub), np.exp(th * lvb)
    s = a + b - a * b
    return lub, lvb, a, b, s


def _joe_logpdf(theta, u, v):
    th = theta[0]
    lub, lvb, _, _, s = _joe_parts(th, u, v)
    return (1.0 / th - 2.0) * np.log(s) + (th - 1.0) * (lub + lvb) + np.log(th - 1.0 + s)


def _joe_cdf(theta, u, v):
    th = theta[0]
    *_, s = _joe_parts(th, u, v)
    return -np.expm1(np.log(s) / th)


def _joe_h(theta, c, f):
    th = theta[0]
    lcb, _, _, b, s = _joe_parts(th, c, f)
    return np.exp((th - 1.0) * lcb + np.log1p(-b) + (1.0 / th - 1.0) * np.log(s))


def _frank_pos_terms(th, c, f):
    # denominator of the Frank density split into two positive terms (th > 0)
    t1 = -np.exp(-th * c) * np.expm1(-th * f)
    t2 = -np.exp(-th * f) * np.expm1(-th * (1.0 - f))
    return t1, t2


def _frank_pos_logpdf(th, u, v):
    t1, t2 = _frank_pos_terms(th, u, v)
    return math.log(th) + math.log(-math.expm1(-th)) - th * (u + v) - 2.0 * np.log(t1 + t2)


def _frank_pos_cdf(th, u, v):
    return -np.log1p(np.expm1(-th * u) * np.expm1(-th * v) / math.expm1(-th)) / th


def _frank_pos_h(th, c, f):
    t1, t2 = _frank_pos_terms(th, c, f)
    return t1 / (t1 + t2)


def _frank_pos_hinv(th, w, c):
    lw, l1w = np.log(w), np.log1p(-w)
    num = np.logaddexp(l1w - th * c, lw - th)
    den = np.logaddexp(lw, l1w - th * c)
    return -(num - den) / th


# Frank with a negative parameter is the 90-degree reflection of |theta|.
def _frank_logpdf(theta, u, v):
    th = theta[0]
    return _frank_pos_logpdf(th, u, v) if th > 0 else _frank_pos_logpdf(-th, 1.0 - u, v)


def _frank_cdf(theta, u, v):
    th = theta[0]
    return _frank_pos_cdf(th, u, v) if th > 0 else v - _frank_pos_cdf(-th, 1.0 - u, v)


def _frank_h(theta, c, f):
    th = theta[0]
    return _frank_pos_h(th, c, f) if th > 0 else _frank_pos_h(-th, 1.0 - c, f)


def _frank_hinv(theta, w, c):
    th = theta[0]
    return _frank_pos_hinv(th, w, c) if th > 0 else _frank_pos_hinv(-th, w, 1.0 - c)


def _solve_hinv(family, theta, w, c, maxiter=200):
    """Safeguarded Newton on the free argument; the density is the derivative."""
    h = _KERNELS[family]["h"]
    logpdf = _KERNELS[family]["logpdf"]
    w, c = np.broadcast_arrays(np.asarray(w, float), np.asarray(c, float))
    w, c = w.astype(float).ravel(), c.astype(float).ravel()
    lo = np.full(w.shape, EPS)
    hi = np.full(w.shape, 1.0 - EPS)
    x = np.clip(w, EPS, 1.0 - EPS)
    width = hi - lo
    active = np.ones(w.shape, dtype=bool)
    for _ in range(maxiter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xi, ci, wi = x[idx], c[idx], w[idx]
        with np.errstate(all="ignore"):
            fval = h(theta, ci, xi) - wi
            dens = np.exp(logpdf(theta, ci, xi))
        lo_i = np.where(fval < 0.0, xi, lo[idx])
        hi_i = np.where(fval > 0.0, xi, hi[idx])
        with np.errstate(all="ignore"):
            step = xi - fval / dens
        # fall back to bisection when Newton leaves the bracket or stalls
        new_width = hi_i - lo_i
        stall = new_width > 0.5 * width[idx]
        width[idx] = new_width
        bad = ~np.isfinite(step) | (step <= lo_i) | (step >= hi_i) | stall
        new = np.where(bad, 0.5 * (lo_i + hi_i), step)
        done = (np.abs(fval) < 1e-13) | (hi_i - lo_i < 4e-16)
        x[idx] = np.where(done, xi, new)
        lo[idx], hi[idx] = lo_i, hi_i
        active[idx[done]] = False
    if active.any():
        raise NumericalError(
            f"h-function inversion for {family.value} did not converge in {maxiter} iterations"
        )
    return x


_KERNELS = {
    Family.GAUSSIAN: dict(logpdf=_gauss_logpdf, cdf=_gauss_cdf, h=_gauss_h, hinv=_gauss_hinv),
    Family.STUDENT: dict(logpdf=_t_logpdf, cdf=_t_cdf, h=_t_h, hinv=_t_hinv),
    Family.CLAYTON: dict(logpdf=_clayton_logpdf, cdf=_clayton_cdf, h=_clayton_h, hinv=_clayton_hinv),
    Family.GUMBEL: dict(logpdf=_gumbel_logpdf, cdf=_gumbel_cdf, h=_gumbel_h, hinv=None),
    Family.FRANK: dict(logpdf=_frank_logpdf, cdf=_frank_cdf, h=_frank_h, hinv=_frank_hinv),
    Family.JOE: dict(logpdf=_joe_logpdf, cdf=_joe_cdf, h=_joe_h, hinv=None),
}


# ---------------------------------------------------------------------------
# Kendall's tau
# ---------------------------------------------------------------------------


def _debye1(x: float) -> float:
    if x == 0.0:
        return 1.0
    val, _ = integrate.quad(lambda t: t / math.expm1(t) if t > 0 else 1.0, 0.0, x)
    return val / x


def _frank_tau(th: float) -> float:
    a = abs(th)
    tau = 1.0 - 4.0 / a * (1.0 - _debye1(a))
    return math.copysign(tau, th)


def _joe_tau(th: float) -> float:
    if abs(th - 2.0) < 1e-6:
        return 0.5 * (_joe_tau(2.0 - 2e-6) + _joe_tau(2.0 + 2e-6))
    return 1.0 + 2.0 / (2.0 - th) * (special.digamma(2.0) - special.digamma(2.0 / th + 1.0))


def _base_tau(family: Family, theta) -> float:
    if family is Family.INDEPENDENCE:
        return 0.0
    if family in (Family.GAUSSIAN, Family.STUDENT):
        return 2.0 / math.pi * math.asin(theta[0])
    th = theta[0]
    if family is Family.CLAYTON:
        return th / (th + 2.0)
    if family is Family.GUMBEL:
        return 1.0 - 1.0 / th
    if family is Family.FRANK:
        return _frank_tau(th)
    return _joe_tau(th)


def tau_to_param(family, tau: float, rotation: int = 0) -> tuple:
    """Invert the Kendall's tau link of a one-parameter family.

    For rotated copulas (90 or 270 degrees) the sign of ``tau`` is flipped
    before inversion.  Values outside the attainable range are projected onto
    the family's parameter box.
    """
    family = parse_family(family)
    if family is Family.STUDENT:
        raise CapabilityError("Student t degrees of freedom have no Kendall's tau link")
    if family is Family.INDEPENDENCE:
        return ()
    tau = float(tau)
    if rotation in (90, 270):
        tau = -tau
    if family is Family.GAUSSIAN:
        rho = math.sin(math.pi * tau / 2.0)
        return (float(np.clip(rho, -_RHO_MAX, _RHO_MAX)),)
    lo, hi = _FIT_BOUNDS[family][0]
    if family is Family.CLAYTON:
        th = 2.0 * tau / (1.0 - tau) if tau < 1.0 else hi
        return (float(np.clip(th, lo, hi)),)
    if family is Family.GUMBEL:
        th = 1.0 / (1.0 - tau) if tau < 1.0 else hi
        return (float(np.clip(th, lo, hi)),)
    if family is Family.FRANK:
        if tau == 0.0:
            return (1e-4,)
        a = abs(tau)
        amax = _frank_tau(hi)
        if a >= amax:
            th = hi
        elif a <= _frank_tau(1e-4):
            th = 1e-4
        else:
            th = optimize.brentq(lambda t: _frank_tau(t) - a, 1e-4, hi, xtol=1e-12)
        return (math.copysign(th, tau),)
    # Joe
    if tau <= _joe_tau(lo):
        return (lo,)
    if tau >= _joe_tau(hi):
        return (hi,)
    return (optimize.brentq(lambda t: _joe_tau(t) - tau, lo, hi, xtol=1e-12),)


# ---------------------------------------------------------------------------
# the copula object
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairCopula:
    """A bivariate copula: family, parameter vector and rotation in degrees."""

    family: Family
    theta: tuple = ()
    rotation: int = 0

    def __post_init__(self):
        fam = parse_family(self.family)
        theta = tuple(float(t) for t in np.atleast_1d(self.theta)) if np.size(self.theta) else ()
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "theta", theta)
        _check_theta(fam, theta)
        if self.rotation not in ROTATIONS:
            raise DomainError(f"rotation must be one of {ROTATIONS}, got {self.rotation}")
        if self.rotation != 0 and not fam.rotatable:
            raise DomainError(f"{fam.value} copula is symmetric and takes no rotation")

    @property
    def n_params(self) -> int:
        return self.family.n_params

    @property
    def is_independence(self) -> bool:
        return self.family is Family.INDEPENDENCE

    def __str__(self):
        pars = ", ".join(f"{t:.4g}" for t in self.theta)
        rot = f", rot={self.rotation}" if self.rotation else ""
        return f"{self.family.value}({pars}{rot})"

    # reflections implied by the rotation
    @property
    def _flips(self):
        return self.rotation in (90, 180), self.rotation in (180, 270)

    def logpdf(self, u, v):
        u, v = _clip(u), _clip(v)
        if self.is_independence:
            return np.zeros(np.broadcast(u, v).shape)
        fu, fv = self._flips
        up = 1.0 - u if fu else u
        vp = 1.0 - v if fv else v
        return _KERNELS[self.family]["logpdf"](self.theta, up, vp)

    def pdf(self, u, v):
        """Copula density at ``(u, v)``."""
        return np.exp(self.logpdf(u, v))

    def cdf(self, u, v):
        """Copula distribution function ``C(u, v)``."""
        u, v = _clip(u), _clip(v)
        if self.is_independence:
            return u * v
        fu, fv = self._flips
        up = 1.0 - u if fu else u
        vp = 1.0 - v if fv else v
        base = _KERNELS[self.family]["cdf"](self.theta, up, vp)
        if fu and fv:
            out = u + v - 1.0 + base
        elif fu:
            out = v - base
        elif fv:
            out = u - base
        else:
            out = base
        return np.clip(out, 0.0, 1.0)

    def hfunc(self, u, v, which: int = 1):
        """Conditional CDF: ``which=1`` gives ``dC/du``, ``which=2`` gives ``dC/dv``."""
        u, v = _clip(u), _clip(v)
        if which not in (1, 2):
            raise InputError(f"which must be 1 or 2, got {which}")
        if self.is_independence:
            out = v if which == 1 else u
            return np.broadcast_to(out, np.broadcast(u, v).shape).copy()
        fu, fv = self._flips
        up = 1.0 - u if fu else u
        vp = 1.0 - v if fv else v
        h = _KERNELS[self.family]["h"]
        if which == 1:
            out = h(self.theta, up, vp)
            out = 1.0 - out if fv else out
        else:
            out = h(self.theta, vp, up)
            out = 1.0 - out if fu else out
        return _clip(out)

    def hinv(self, w, cond, which: int = 1):
        """Inverse of :meth:`hfunc` in its free argument.

        ``which=1`` returns ``v`` solving ``hfunc(cond, v, 1) = w``; ``which=2``
        returns ``u`` solving ``hfunc(u, cond, 2) = w``.
        """
        w, cond = _clip(w), _clip(cond)
        if which not in (1, 2):
            raise InputError(f"which must be 1 or 2, got {which}")
        if self.is_independence:
            return np.broadcast_to(w, np.broadcast(w, cond).shape).copy()
        fu, fv = self._flips
        flip_free, flip_cond = (fv, fu) if which == 1 else (fu, fv)
        cp = 1.0 - cond if flip_cond else cond
        wp = 1.0 - w if flip_free else w
        inv = _KERNELS[self.family]["hinv"]
        if inv is None:
            shape = np.broadcast(wp, cp).shape
            out = _solve_hinv(self.family, self.theta, wp, cp).reshape(shape)
        else:
            out = inv(self.theta, wp, cp)
        out = 1.0 - out if flip_free else out
        return _clip(out)

    def tau(self) -> float:
        """Kendall's tau implied by the parameters."""
        t = _base_tau(self.family, self.theta)
        return -t if self.rotation in (90, 270) else t

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` pairs by conditional inversion; returns an ``(n, 2)`` array."""
        if n < 1:
            raise InputError(f"sample size must be positive, got {n}")
        u = rng.random(n)
        w = rng.random(n)
        return np.column_stack([_clip(u), self.hinv(w, u, which=1)])


INDEPENDENCE = PairCopula(Family.INDEPENDENCE)


def sample_pair(c: PairCopula, n: int, rng: np.random.Generator) -> np.ndarray:
    return c.sample(n, rng)


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairFit:
    """Outcome of a single-pair fit."""

    copula: PairCopula
    loglik: float
    converged: bool = True

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.copula.n_params


def _as_pairs(u, v):
    u = _clip(np.asarray(u, dtype=float).ravel())
    v = _clip(np.asarray(v, dtype=float).ravel())
    if u.shape != v.shape:
        raise InputError("u and v must have the same length")
    if u.size < 10:
        raise InputError(f"at least 10 observations are required, got {u.size}")
    return u, v


def empirical_tau(u, v) -> float:
    tau = stats.kendalltau(u, v).statistic
    return 0.0 if not np.isfinite(tau) else float(tau)


def _loglik(family, theta, rotation, u, v) -> float:
    try:
        cop = PairCopula(family, theta, rotation)
    except DomainError:
        return -np.inf
    with np.errstate(all="ignore"):
        ll = float(np.sum(cop.logpdf(u, v)))
    return ll if np.isfinite(ll) else -np.inf


def standard_error(copula: PairCopula, u, v, rel_step: float = 1e-4) -> float:
    """Observed-information standard error of a one-parameter copula's estimate.

    The second derivative of the summed log-density is taken by central
    differences at ``copula.theta``.
    """
    if copula.n_params != 1:
        raise CapabilityError("standard errors are implemented for one-parameter families only")
    u, v = _as_pairs(u, v)
    th = copula.theta[0]
    h = rel_step * max(1.0, abs(th))
    ll = [_loglik(copula.family, (th + s * h,), copula.rotation, u, v) for s in (-1, 0, 1)]
    d2 = (ll[0] - 2.0 * ll[1] + ll[2]) / h**2
    if not np.isfinite(d2) or d2 >= 0.0:
        raise NumericalError("log-likelihood is not concave at the estimate")
    return float(1.0 / math.sqrt(-d2))


def fit_pair_mle(family, u, v, rotation: int = 0, tau: float | None = None) -> PairFit:
    """Maximum likelihood fit of one family to pseudo-observations.

    One-parameter families use a bounded Brent search over the parameter box;
    the Student t uses bounded L-BFGS-B on (atanh rho, log nu).  The Kendall's tau
    inversion estimate serves as a starting point and as a fallback: if the
    search ends below it in likelihood, the start is returned with
    ``converged=False``.
    """
    family = parse_family(family)
    u, v = _as_pairs(u, v)
    if family is Family.INDEPENDENCE:
        return PairFit(INDEPENDENCE, 0.0)
    if tau is None:
        tau = empirical_tau(u, v)

    bounds = list(_FIT_BOUNDS[family])
    if family is Family.STUDENT:
        rho0 = float(np.clip(math.sin(math.pi * tau / 2.0), -0.95, 0.95))
        start = np.array([rho0, 8.0])
    else:
        start = np.array(tau_to_param(family, tau, rotation))
        if family is Family.FRANK:
            # keep the search on one side of the excluded zero
            bounds = [(1e-4, 35.0)] if start[0] > 0 else [(-35.0, -1e-4)]
    start = np.array([np.clip(s, lo, hi) for s, (lo, hi) in zip(start, bounds)])

    if family is Family.STUDENT:
        par, converged = _fit_student(u, v, start)
        cop = PairCopula(family, par)
        return PairFit(cop, _loglik(family, cop.theta, 0, u, v), converged)

    kernel = _KERNELS[family]["logpdf"]
    fu, fv = rotation in (90, 180), rotation in (180, 270)
    up = 1.0 - u if fu else u
    vp = 1.0 - v if fv else v
    lo_b, hi_b = bounds[0]

    def objective(par):
        th = float(par[0])
        if not lo_b <= th <= hi_b:
            return np.inf
        with np.errstate(all="ignore"):
            ll = float(np.sum(kernel((th,), up, vp)))
        return -ll / u.size if np.isfinite(ll) else np.inf

    f0 = objective(start)
    converged = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        # one-parameter likelihoods are unimodal in practice; bounded Brent
        res = optimize.minimize_scalar(
            lambda p: min(objective([p]), 1e10),
            bounds=bounds[0],
            method="bounded",
            options=dict(xatol=1e-7),
        )
    par = np.atleast_1d(res.x)
    if not np.isfinite(res.fun) or res.fun > f0:
        par, converged = start, False
    elif not res.success:
        converged = False
    cop = PairCopula(family, tuple(float(p) for p in par), rotation)
    return PairFit(cop, _loglik(family, cop.theta, rotation, u, v), converged)


def _fit_student(u, v, start):
    # search in (atanh rho, log nu), which is better conditioned for the
    # quasi-Newton steps than the raw box
    lo_nu, hi_nu = _FIT_BOUNDS[Family.STUDENT][1]
    zmax = math.atanh(_RHO_MAX)
    bounds = [(-zmax, zmax), (math.log(lo_nu), math.log(hi_nu))]
    uv = np.concatenate([u, v])
    n = u.size
    scores = {}

    def unpack(q):
        return math.tanh(q[0]), math.exp(q[1])

    def objective(q):
        rho, nu = unpack(q)
        if not (-1.0 < rho < 1.0 and 2.0 < nu <= 50.0):
            return 1e10
        # steps in the correlation reuse the quantiles computed for a given nu
        if nu not in scores:
            if len(scores) > 4:
                scores.clear()
            scores[nu] = _t_ppf(nu, uv)
        z = scores[nu]
        with np.errstate(all="ignore"):
            ll = float(np.sum(_t_logpdf_scores(rho, nu, z[:n], z[n:])))
        return min(-ll / n, 1e10) if np.isfinite(ll) else 1e10

    q0 = np.array([math.atanh(start[0]), math.log(start[1])])
    f0 = objective(q0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(
            objective, q0, method="L-BFGS-B", bounds=bounds, options=dict(ftol=1e-9, gtol=1e-6, maxiter=200)
        )
    if not np.isfinite(res.fun) or res.fun > f0:
        return tuple(start), False
    rho, nu = unpack(res.x)
    rho = float(np.clip(rho, -_RHO_MAX, _RHO_MAX))
    nu = float(np.clip(nu, lo_nu, hi_nu))
    return (rho, nu), bool(res.success)


def _candidate_rotations(family: Family, tau: float):
    if not family.rotatable:
        return (0,)
    # families with a fixed sign of dependence are only tried in matching rotations
    return (0, 180) if tau >= 0 else (90, 270)


def select_family(u, v, candidates=ALL_FAMILIES) -> PairFit:
    """Fit every candidate (and rotation) and return the AIC minimizer.

    Ties are broken by family enumeration order and then by rotation.
    """
    candidates = [parse_family(f) for f in candidates]
    if not candidates:
        raise InputError("candidate family set is empty")
    u, v = _as_pairs(u, v)
    tau = empirical_tau(u, v)
    best = None
    best_key = None
    errors = []
    for fam in sorted(set(candidates), key=lambda f: f.order):
        for rot in _candidate_rotations(fam, tau):
            try:
                fit = fit_pair_mle(fam, u, v, rotation=rot, tau=tau)
            except (DomainError, NumericalError, FloatingPointError) as exc:
                errors.append(exc)
                continue
            key = (fit.aic, fam.order, rot)
            if not np.isfinite(fit.aic):
                continue
            if best is None or key < best_key:
                best, best_key = fit, key
    if best is None:
        if errors:
            raise errors[0]
        raise NumericalError("no candidate family produced a finite likelihood")
    return best
