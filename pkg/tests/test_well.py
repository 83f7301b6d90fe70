import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fchmorph.errors import DomainError
from fchmorph.well import WellParams, well_bracket, well_derivative, well_eval, well_positive_zero

xis = st.floats(min_value=-1.95, max_value=1.5, allow_nan=False)
negative_xis = st.floats(min_value=-1.9, max_value=-0.02, allow_nan=False)


def test_minus_one_is_double_zero():
    w = WellParams(-0.5)
    assert abs(well_eval(-1.0, w)) < 1e-15
    assert abs(well_derivative(-1.0, 1, w)) < 1e-15


@given(xis)
def test_curvature_at_left_well(xi):
    w = WellParams(xi)
    assert well_derivative(-1.0, 2, w) == pytest.approx(2.0 + xi, abs=1e-13)
    assert w.alpha_minus == pytest.approx(2.0 + xi, abs=1e-15)


@given(xis)
def test_right_well_value(xi):
    w = WellParams(xi)
    assert well_eval(1.0, w) == pytest.approx(2.0 * xi / 3.0, abs=1e-13)


@given(xis, st.floats(min_value=-2.0, max_value=2.0))
@settings(max_examples=60)
def test_derivatives_match_finite_differences(xi, u):
    w = WellParams(xi)
    h = 1e-5
    for k in range(1, 5):
        lo = well_derivative(u - h, k - 1, w) if k > 1 else well_eval(u - h, w)
        hi = well_derivative(u + h, k - 1, w) if k > 1 else well_eval(u + h, w)
        fd = (hi - lo) / (2 * h)
        assert well_derivative(u, k, w) == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_fourth_derivative_constant_fifth_rejected():
    w = WellParams(-0.3)
    v = well_derivative(np.linspace(-2, 2, 7), 4, w)
    assert np.ptp(v) == 0.0
    with pytest.raises(DomainError):
        well_derivative(0.0, 5, w)
    with pytest.raises(DomainError):
        well_derivative(0.0, 0, w)


def test_turning_point_closed_form():
    assert well_positive_zero(WellParams(-0.5)) == pytest.approx((5 - np.sqrt(13)) / 6, abs=1e-15)


@given(negative_xis)
def test_turning_point_is_simple_root(xi):
    w = WellParams(xi)
    us = well_positive_zero(w)
    assert -1.0 < us < 1.0
    assert abs(well_eval(us, w)) < 1e-13
    assert well_derivative(us, 1, w) < 0.0
    u = np.linspace(-1.0, us, 400)[1:-1]
    assert np.all(well_eval(u, w) > 0.0)
    assert np.allclose(0.5 * (u + 1) ** 2 * well_bracket(u, w), well_eval(u, w), atol=1e-14)


@pytest.mark.parametrize("xi", [0.0, 0.3])
def test_no_turning_point_for_nonnegative_tilt(xi):
    with pytest.raises(DomainError, match="no homoclinic turning point"):
        well_positive_zero(WellParams(xi))


@pytest.mark.parametrize("kw", [dict(xi=-2.0), dict(xi=-3.0), dict(xi=float("nan")),
                                dict(xi=-0.5, b_plus=2.0)])
def test_invalid_parameters_rejected(kw):
    with pytest.raises(DomainError):
        WellParams(**kw)
