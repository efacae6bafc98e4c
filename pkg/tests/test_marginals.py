import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvinegc.exceptions import InputError
from mvinegc.marginals import EPS, EmpiricalMarginal, ecdf_fit


def test_pit_uses_rescaled_ranks():
    m = ecdf_fit([3.0, 1.0, 2.0, 5.0])
    np.testing.assert_allclose(m.pit([1.0, 2.0, 3.0, 5.0]), [0.2, 0.4, 0.6, 0.8])
    np.testing.assert_allclose(m.pit([0.0, 2.5, 9.0]), [EPS, 0.4, 0.8])


def test_ties_share_the_upper_rank():
    m = ecdf_fit([1.0, 2.0, 2.0, 4.0])
    assert m.pit(2.0) == pytest.approx(0.6)


def test_quantile_interpolates_and_clamps():
    m = ecdf_fit([10.0, 20.0, 30.0, 40.0])
    np.testing.assert_allclose(m.quantile([0.2, 0.3, 0.8]), [10.0, 15.0, 40.0])
    np.testing.assert_allclose(m.quantile([0.01, 0.99]), [10.0, 40.0])


def test_quantile_rejects_nan():
    with pytest.raises(InputError):
        ecdf_fit([1.0, 2.0]).quantile([np.nan])


@pytest.mark.parametrize("bad", [[1.0], [[1.0, 2.0], [3.0, 4.0]], [1.0, np.nan, 2.0], [np.inf, 1.0]])
def test_invalid_samples(bad):
    with pytest.raises(InputError):
        ecdf_fit(bad)


def test_serialization_round_trip():
    m = ecdf_fit(np.random.default_rng(0).normal(size=50))
    assert EmpiricalMarginal.from_dict(m.to_dict()) == m
    assert m != ecdf_fit([1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60, unique=True))
def test_quantile_inverts_pit_on_the_sample(xs):
    m = ecdf_fit(xs)
    x = np.asarray(xs)
    np.testing.assert_allclose(m.quantile(m.pit(x)), x, rtol=1e-12, atol=1e-9)
    u = m.pit(x)
    assert np.all((u > 0) & (u < 1))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=40), st.floats(-150, 150), st.floats(-150, 150))
def test_pit_is_monotone(xs, a, b):
    m = ecdf_fit(xs)
    lo, hi = sorted((a, b))
    assert m.pit(lo) <= m.pit(hi)
