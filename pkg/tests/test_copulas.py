import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import ndtri

from mvinegc.copulas import (
    ALL_FAMILIES,
    INDEPENDENCE,
    Family,
    PairCopula,
    empirical_tau,
    fit_pair_mle,
    parse_family,
    select_family,
    standard_error,
    tau_to_param,
)
from mvinegc.exceptions import CapabilityError, DomainError, InputError

CASES = [
    PairCopula("gaussian", (0.5,)),
    PairCopula("gaussian", (-0.7,)),
    PairCopula("student", (0.4, 5.0)),
    PairCopula("student", (-0.6, 12.0)),
    PairCopula("clayton", (2.0,)),
    PairCopula("clayton", (2.0,), 90),
    PairCopula("clayton", (1.0,), 180),
    PairCopula("clayton", (3.0,), 270),
    PairCopula("gumbel", (2.0,)),
    PairCopula("gumbel", (1.5,), 90),
    PairCopula("gumbel", (2.5,), 180),
    PairCopula("gumbel", (2.0,), 270),
    PairCopula("frank", (5.0,)),
    PairCopula("frank", (-5.0,)),
    PairCopula("joe", (2.0,)),
    PairCopula("joe", (3.0,), 90),
    PairCopula("joe", (1.5,), 180),
    PairCopula("joe", (2.0,), 270),
]
IDS = [str(c) for c in CASES]

_gl_x, _gl_w = np.polynomial.legendre.leggauss(200)
GL_X = (_gl_x + 1.0) / 2.0
GL_W = _gl_w / 2.0


def _base_cdf_oracle(fam, th, u, v):
    # textbook closed forms, written independently of the package kernels
    if fam is Family.CLAYTON:
        return (u**-th + v**-th - 1.0) ** (-1.0 / th)
    if fam is Family.GUMBEL:
        return np.exp(-(((-np.log(u)) ** th + (-np.log(v)) ** th) ** (1.0 / th)))
    if fam is Family.FRANK:
        return -np.log1p(np.expm1(-th * u) * np.expm1(-th * v) / np.expm1(-th)) / th
    if fam is Family.JOE:
        a, b = (1.0 - u) ** th, (1.0 - v) ** th
        return 1.0 - (a + b - a * b) ** (1.0 / th)
    raise AssertionError(fam)


def _cdf_oracle(c, u, v):
    th = c.theta[0]
    f = lambda a, b: _base_cdf_oracle(c.family, th, a, b)
    if c.rotation == 0:
        return f(u, v)
    if c.rotation == 90:
        return v - f(1.0 - u, v)
    if c.rotation == 180:
        return u + v - 1.0 + f(1.0 - u, 1.0 - v)
    return u - f(u, 1.0 - v)


GRID = np.array([(a, b) for a in (0.07, 0.3, 0.5, 0.71, 0.93) for b in (0.11, 0.27, 0.5, 0.66, 0.9)])


@pytest.mark.parametrize("c", [c for c in CASES if c.family not in (Family.GAUSSIAN, Family.STUDENT)], ids=str)
def test_cdf_matches_closed_form(c):
    u, v = GRID[:, 0], GRID[:, 1]
    np.testing.assert_allclose(c.cdf(u, v), _cdf_oracle(c, u, v), atol=1e-12)


@pytest.mark.parametrize("rho", [-0.8, 0.0, 0.6])
def test_gaussian_cdf_matches_bivariate_normal(rho):
    mvn = stats.multivariate_normal([0.0, 0.0], [[1.0, rho], [rho, 1.0]])
    c = PairCopula("gaussian", (rho,)) if rho else None
    for u, v in GRID[::3]:
        ref = mvn.cdf([ndtri(u), ndtri(v)])
        got = c.cdf(u, v) if c else u * v
        assert abs(got - ref) < 1e-6


def test_student_cdf_matches_multivariate_t():
    rho, nu = 0.4, 5.0
    c = PairCopula("student", (rho, nu))
    mvt = stats.multivariate_t([0.0, 0.0], [[1.0, rho], [rho, 1.0]], df=nu)
    rng = np.random.default_rng(1)
    for u, v in [(0.2, 0.3), (0.5, 0.5), (0.8, 0.35)]:
        ref = mvt.cdf([stats.t.ppf(u, nu), stats.t.ppf(v, nu)], random_state=rng)
        assert abs(c.cdf(u, v) - ref) < 1e-4


@pytest.mark.parametrize("c", CASES, ids=IDS)
def test_hfunc_is_cdf_derivative(c):
    u, v = GRID[:, 0], GRID[:, 1]
    d = 1e-5
    fd1 = (c.cdf(u + d, v) - c.cdf(u - d, v)) / (2 * d)
    fd2 = (c.cdf(u, v + d) - c.cdf(u, v - d)) / (2 * d)
    np.testing.assert_allclose(c.hfunc(u, v, 1), fd1, atol=1e-5)
    np.testing.assert_allclose(c.hfunc(u, v, 2), fd2, atol=1e-5)


@pytest.mark.parametrize("c", CASES, ids=IDS)
def test_pdf_is_hfunc_derivative(c):
    u, v = GRID[:, 0], GRID[:, 1]
    d = 1e-6
    fd = (c.hfunc(u, v + d, 1) - c.hfunc(u, v - d, 1)) / (2 * d)
    pdf = c.pdf(u, v)
    np.testing.assert_allclose(pdf, fd, rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("c", CASES, ids=IDS)
def test_pdf_normalizes(c):
    U, V = np.meshgrid(GL_X, GL_X)
    total = np.sum(np.outer(GL_W, GL_W) * c.pdf(U, V))
    assert abs(total - 1.0) < 1e-3


@pytest.mark.parametrize("c", CASES, ids=IDS)
def test_hinv_round_trip(c):
    rng = np.random.default_rng(3)
    w = rng.uniform(1e-6, 1 - 1e-6, 500)
    cond = rng.uniform(1e-6, 1 - 1e-6, 500)
    np.testing.assert_allclose(c.hfunc(cond, c.hinv(w, cond, 1), 1), w, atol=1e-10)
    np.testing.assert_allclose(c.hfunc(c.hinv(w, cond, 2), cond, 2), w, atol=1e-10)


@pytest.mark.parametrize("c", CASES, ids=IDS)
def test_tau_matches_quadrature(c):
    # tau = 1 - 4 * integral of h1 * h2 over the unit square
    U, V = np.meshgrid(GL_X, GL_X)
    integral = np.sum(np.outer(GL_W, GL_W) * c.hfunc(U, V, 1) * c.hfunc(U, V, 2))
    assert abs(c.tau() - (1.0 - 4.0 * integral)) < 2e-4


@pytest.mark.parametrize("c", [c for c in CASES if c.family is not Family.STUDENT], ids=str)
def test_tau_link_round_trip(c):
    th = tau_to_param(c.family, c.tau(), c.rotation)
    assert abs(th[0] - c.theta[0]) < 1e-6 * max(1.0, abs(c.theta[0]))


@pytest.mark.parametrize("c", CASES[::2], ids=IDS[::2])
def test_sample_reproduces_tau(c):
    s = c.sample(20000, np.random.default_rng(11))
    assert s.shape == (20000, 2)
    assert abs(empirical_tau(s[:, 0], s[:, 1]) - c.tau()) < 0.02


@pytest.mark.parametrize("theta", [0.5, 3.0, 12.0])
def test_frank_negative_parameter_is_reflection(theta):
    # c_{-theta}(u, v) = c_theta(1 - u, v)
    u, v = GRID[:, 0], GRID[:, 1]
    pos, neg = PairCopula("frank", (theta,)), PairCopula("frank", (-theta,))
    np.testing.assert_allclose(neg.logpdf(u, v), pos.logpdf(1 - u, v), atol=1e-12)
    np.testing.assert_allclose(neg.cdf(u, v), v - pos.cdf(1 - u, v), atol=1e-12)


def test_independence_behaviour():
    u = np.array([0.2, 0.7])
    v = np.array([0.4, 0.1])
    assert np.all(INDEPENDENCE.logpdf(u, v) == 0.0)
    np.testing.assert_allclose(INDEPENDENCE.hfunc(u, v, 1), v)
    np.testing.assert_allclose(INDEPENDENCE.hinv(v, u, 2), v)
    assert INDEPENDENCE.tau() == 0.0


@pytest.mark.parametrize(
    "family, theta, rotation",
    [
        ("gaussian", (1.0,), 0),
        ("student", (0.2, 1.5), 0),
        ("clayton", (0.0,), 0),
        ("gumbel", (0.9,), 0),
        ("frank", (0.0,), 0),
        ("joe", (1.0,), 0),
        ("gaussian", (0.3,), 90),
        ("clayton", (1.0,), 45),
        ("clayton", (1.0, 2.0), 0),
        ("gumbel", (math.nan,), 0),
    ],
)
def test_invalid_parameters_rejected(family, theta, rotation):
    with pytest.raises(DomainError):
        PairCopula(family, theta, rotation)


def test_unknown_family_and_student_tau_link():
    with pytest.raises(InputError, match="expected one of"):
        parse_family("galambos")
    with pytest.raises(CapabilityError):
        tau_to_param("student", 0.3)


def test_tau_link_clips_to_box():
    assert tau_to_param("clayton", 0.999)[0] == 28.0
    assert tau_to_param("gumbel", -0.4)[0] == 1.0


def test_hfunc_which_validated():
    with pytest.raises(InputError):
        CASES[0].hfunc(0.5, 0.5, which=3)


@settings(max_examples=60, deadline=None)
@given(
    idx=st.integers(0, len(CASES) - 1),
    u=st.floats(1e-6, 1 - 1e-6),
    v1=st.floats(1e-6, 1 - 1e-6),
    v2=st.floats(1e-6, 1 - 1e-6),
)
def test_hfunc_is_a_monotone_distribution(idx, u, v1, v2):
    c = CASES[idx]
    lo, hi = sorted((v1, v2))
    h_lo, h_hi = c.hfunc(u, lo, 1), c.hfunc(u, hi, 1)
    assert 0.0 <= h_lo <= h_hi + 1e-12 <= 1.0 + 1e-12
    assert 0.0 <= c.cdf(u, lo) <= min(u, lo) + 1e-12


@settings(max_examples=40, deadline=None)
@given(idx=st.integers(0, len(CASES) - 1), u=st.floats(0.01, 0.99), v=st.floats(0.01, 0.99))
def test_frechet_bounds(idx, u, v):
    c = CASES[idx]
    val = float(c.cdf(u, v))
    assert max(u + v - 1.0, 0.0) - 1e-9 <= val <= min(u, v) + 1e-9


@pytest.mark.parametrize("c", [PairCopula("gaussian", (0.5,)), PairCopula("clayton", (2.0,), 180), PairCopula("frank", (-4.0,)), PairCopula("joe", (1.8,), 90)], ids=str)
def test_mle_recovers_parameter(c):
    s = c.sample(3000, np.random.default_rng(21))
    fit = fit_pair_mle(c.family, s[:, 0], s[:, 1], rotation=c.rotation)
    se = standard_error(fit.copula, s[:, 0], s[:, 1])
    assert fit.converged
    assert abs(fit.copula.theta[0] - c.theta[0]) < 4 * se


def test_student_mle_recovers_parameters():
    c = PairCopula("student", (0.6, 4.0))
    s = c.sample(4000, np.random.default_rng(8))
    fit = fit_pair_mle("student", s[:, 0], s[:, 1])
    assert abs(fit.copula.theta[0] - 0.6) < 0.04
    assert 2.5 < fit.copula.theta[1] < 7.0


def test_gaussian_standard_error_matches_fisher_information():
    # per-observation information for the normal-copula correlation
    rho, n = 0.5, 5000
    s = PairCopula("gaussian", (rho,)).sample(n, np.random.default_rng(2))
    fit = fit_pair_mle("gaussian", s[:, 0], s[:, 1])
    r = fit.copula.theta[0]
    expected = (1 - r**2) / math.sqrt(n * (1 + r**2))
    assert abs(standard_error(fit.copula, s[:, 0], s[:, 1]) / expected - 1.0) < 0.1


@pytest.mark.parametrize("c", [PairCopula("gumbel", (2.0,)), PairCopula("clayton", (2.0,), 90), PairCopula("student", (0.5, 3.0))], ids=str)
def test_select_family_identifies_truth(c):
    s = c.sample(3000, np.random.default_rng(5))
    fit = select_family(s[:, 0], s[:, 1], ALL_FAMILIES)
    assert fit.copula.family is c.family
    assert fit.copula.rotation == c.rotation


def test_aic_rule_false_selection_rate_matches_chi_square():
    # with {independence, gaussian}, AIC picks gaussian iff the LR statistic exceeds 2
    n_rep = 300
    hits = 0
    for seed in range(n_rep):
        s = np.random.default_rng(seed).random((200, 2))
        hits += not select_family(s[:, 0], s[:, 1], ("independence", "gaussian")).copula.is_independence
    p = stats.chi2.sf(2.0, 1)
    lo, hi = stats.binom.ppf([0.001, 0.999], n_rep, p)
    assert lo <= hits <= hi


def test_independence_wins_majority_on_independent_data():
    picks = [select_family(*np.random.default_rng(s).random((2, 200))).copula.is_independence for s in range(60)]
    assert np.mean(picks) > 0.5


def test_fit_needs_enough_pairs():
    with pytest.raises(InputError):
        fit_pair_mle("gaussian", [0.1, 0.2], [0.3, 0.4])
