import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsignal.spc import D2, ZSeries, p_values, spc_weights, weights, z_values
from dualsignal.types import ConfigurationError, Hyperparameters, InvalidInputError

from oracles import normal_sf2


def _window_then(point, window):
    # trailing value only pads the series to the minimum length n + 2
    return np.array(list(window) + [point, point])


def test_z_zero_for_constant_window():
    z = z_values(_window_then(10.0, [10.0] * 7), 7, "preceding")
    assert z.values[7] == 0.0
    assert np.isnan(z.values[:7]).all()


def test_z_infinite_for_deviation_from_constant_window():
    z = z_values(_window_then(11.0, [10.0] * 7), 7, "preceding")
    assert np.isinf(z.values[7])
    assert p_values(z)[7] == 1e-300


def _window_with(mean, mr):
    # alternating window of n=7 values: mean of 6 inside ranges is exactly `mr`
    vals = np.array([mean + mr / 2, mean - mr / 2] * 3 + [mean + mr / 2])
    vals -= vals.mean() - mean
    return vals


@pytest.mark.parametrize("point,expected", [(13.0, 3.0), (16.0, 6.0)])
def test_z_formula(point, expected):
    window = _window_with(10.0, D2)
    assert np.isclose(window.mean(), 10.0)
    assert np.allclose(np.abs(np.diff(window)), D2)
    z = z_values(_window_then(point, window), 7, "preceding")
    assert z.values[7] == pytest.approx(expected, rel=1e-12)


def test_z_window_errors():
    with pytest.raises(InvalidInputError):
        z_values(np.arange(8.0), 7)
    with pytest.raises(InvalidInputError):
        z_values(np.arange(20.0), 1)


def test_max_of_both_uses_available_side_at_edges():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(40)
    both = z_values(x, 5, "max_of_both").values
    pre = z_values(x, 5, "preceding").values
    assert not np.isnan(both).any()
    assert np.all(both[5:35] >= pre[5:35])
    assert np.array_equal(both[35:], pre[35:])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(-1e3, 1e3), st.floats(0.01, 100))
def test_z_shift_and_scale_invariance(seed, shift, scale):
    x = np.random.default_rng(seed).standard_normal(60)
    for mode in ("preceding", "max_of_both"):
        z0 = z_values(x, 7, mode).values
        z1 = z_values(scale * x + shift, 7, mode).values
        ok = ~np.isnan(z0)
        assert np.array_equal(ok, ~np.isnan(z1))
        assert np.allclose(z0[ok], z1[ok], rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("z", [0.0, 3.0, 6.0, 1.5, 8.0])
def test_p_values_match_high_precision_normal(z):
    assert p_values(np.array([z]))[0] == pytest.approx(normal_sf2(z), rel=1e-12)


def test_p_value_examples():
    p = p_values(ZSeries(np.array([0.0, 3.0, 6.0, np.nan])))
    assert p[0] == 1.0
    assert p[1] == pytest.approx(0.0026997960632601866, rel=1e-9)
    assert p[2] == pytest.approx(1.973175290075e-09, rel=1e-9)
    assert p[3] == 1.0


def test_weight_examples():
    p = np.array([1.0, 0.5, 0.0027, 0.001])
    assert np.all(weights(p, "none") == 1)
    assert weights(np.array([0.0027]), "binary", 0.0025)[0] == 1.0
    assert weights(np.array([0.0025]), "binary", 0.0025)[0] == 0.0
    w = weights(np.array([1.0]), {"kind": "transformed", "k": 9, "m": 2})
    assert w[0] == pytest.approx(1 - np.exp(-9), rel=1e-14)
    assert np.array_equal(weights(p, "linear"), p)


def test_weight_configuration_errors():
    with pytest.raises(ConfigurationError):
        weights(np.array([0.5]), {"kind": "transformed", "k": -1, "m": 2})
    with pytest.raises(ConfigurationError):
        weights(np.array([0.5]), "binary", 1.5)
    with pytest.raises(InvalidInputError):
        weights(np.array([0.0]), "linear")


@given(st.lists(st.floats(1e-300, 1.0), min_size=2, max_size=30))
def test_weights_monotone_and_bounded(ps):
    p = np.sort(np.array(ps))
    for scheme in ("none", "linear", {"kind": "transformed", "k": 9, "m": 2}, "binary"):
        w = weights(p, scheme, 0.0025)
        assert np.all((w >= 0) & (w <= 1))
        assert np.all(np.diff(w) >= 0)


def test_individuals_chart_outlier():
    rng = np.random.default_rng(11)
    x = 10 + rng.standard_normal(60)
    window = x[42:49]
    local_sigma = np.mean(np.abs(np.diff(window))) / D2
    x[49] = window.mean() + 6 * local_sigma
    z, p, w = spc_weights(x, Hyperparameters(spc_window=7, z_mode="preceding"))
    assert z.values[49] > 3
    assert p[49] <= 0.0025 and w[49] == 0
