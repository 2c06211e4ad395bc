import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsignal.loss import (
    compatibility,
    fitting_metric,
    loss_disp,
    loss_joint,
    loss_mean,
    mse_identity_terms,
    regularization,
    smoothing,
    term_weights,
)
from dualsignal.types import FIT_KINDS, Hyperparameters, InvalidInputError

from oracles import COMPATIBILITY


@pytest.mark.parametrize("kind", FIT_KINDS)
def test_fitting_metric_zero_iff_equal(kind):
    x = np.array([1.0, -2.0, 3.5])
    assert fitting_metric(x, x, kind) == 0
    assert fitting_metric(x, x + np.array([0, 0, 1e-3]), kind) > 0
    assert fitting_metric([1.0], [0.0], kind) == 1.0


def test_fitting_metric_hand_values():
    x, m = [0, 0, 3], [0, 0, 0]
    expected = {"mse": 3, "rmse": math.sqrt(3), "mae": 1, "sse": 9, "maxse": 9, "maxae": 3}
    for kind, value in expected.items():
        assert fitting_metric(x, m, kind) == pytest.approx(value, rel=1e-15)
    with pytest.raises(InvalidInputError):
        fitting_metric([1, 2], [1, 2, 3])


def test_regularization_examples():
    assert regularization([4, 4, 4], [0.2, 0.5, 1]) == 0
    assert regularization([4, 4, 4], kind="rmse") == 0
    assert regularization([0, 1, 2]) == 1
    assert regularization([0, 1, 2], kind="rmse") == 1
    assert regularization([0, 1, 2], [1, 0, 1]) == 0.5
    with pytest.raises(InvalidInputError):
        regularization([0, 1, 2], [1, 1])


def test_smoothing_examples():
    assert smoothing([1, 3, 5, 7]) == 0
    assert smoothing([0, 1, 4, 9]) == 2
    assert smoothing([0, 1, 4, 9], [1, 1, 0, 1]) == 1


def test_span_alignment_releases_all_terms_touching_a_point():
    w = np.array([1, 1, 0, 1, 1.0])
    assert term_weights(w, 1, "endpoint").tolist() == [1, 0, 1, 1]
    assert term_weights(w, 1, "span").tolist() == [1, 0, 0, 1]
    assert term_weights(w, 2, "span").tolist() == [0, 0, 0]
    assert term_weights(w, 2, "endpoint").tolist() == [0, 1, 1]


def test_loss_mean_examples():
    assert loss_mean([2, 2, 2], [2, 2, 2], None, 5, 7).total == 0
    lb = loss_mean([0, 1, 2], [0, 1, 2], np.ones(3), 3.9, 0)
    assert lb.total == pytest.approx(3.9)
    lb = loss_mean([0, 1, 2], [1, 1, 1], np.ones(3), 0, 0, "rmse")
    assert lb.total == pytest.approx(math.sqrt(2 / 3))


def test_loss_mean_records_incompatible_pair_warning():
    assert loss_mean([0, 1, 2], [0, 1, 2]).warnings  # rmse with mae is marked incompatible
    assert not loss_mean([0, 1, 2], [0, 1, 2], fit_kind="maxae", reg_kind="mae").warnings


def test_loss_disp_examples():
    assert loss_disp([1, 1, 1], [1, 1, 1], None, 2, 2).total == 0
    assert loss_disp([1, 1, 1], [0, 0, 0]).fitting == 1
    lb = loss_disp([0, 2, 0], [1, 1, 1], np.ones(3), 1, 0)
    assert lb.fitting == pytest.approx(1.0)
    assert lb.regularization == 0
    assert lb.total == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        loss_disp([-1, 0, 0], [1, 1, 1])


def test_loss_joint_examples():
    h0 = Hyperparameters(beta_mean=1, gamma_mean=1, theta=0)
    x = np.array([0.0, 2.0, 1.0, 5.0])
    m = np.array([0.5, 1.5, 1.0, 4.0])
    jl = loss_joint(x, m, np.ones(4), np.ones(4), h0)
    assert jl.total == loss_mean(x, m, np.ones(4), 1, 1).total

    h = Hyperparameters(beta_mean=0, beta_disp=0, gamma_mean=0, gamma_disp=0, theta=1)
    assert loss_joint([0, 1, 2], [0, 1, 2], [0, 0, 0], np.ones(3), h).total == 0

    h = h.replace(theta=0.5)
    jl = loss_joint([0, 2, 0], [0, 0, 0], [2, 2, 2], np.ones(3), h)
    assert jl.total == pytest.approx(math.sqrt(4 / 3) + 0.5 * math.sqrt(8 / 3))


def test_table_1_cells_and_symmetry():
    for (a, b), (o, n) in COMPATIBILITY.items():
        c = compatibility(a, b)
        assert (c.order_match, c.normalization_match) == (o, n)
        assert c.compatible == (o and n)
    for a, b in itertools.product(FIT_KINDS, repeat=2):
        assert compatibility(a, b) == compatibility(b, a)
    assert not compatibility("mse", "rmse").compatible
    assert compatibility("maxse", "mse").compatible
    assert not compatibility("mae", "rmse").compatible


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_loss_monotone_in_multipliers(seed, b1, b2, g1, g2):
    rng = np.random.default_rng(seed)
    x, m, w = rng.standard_normal(20), rng.standard_normal(20), rng.uniform(0, 1, 20)
    lo_b, hi_b = sorted((b1, b2))
    lo_g, hi_g = sorted((g1, g2))
    a = loss_mean(x, m, w, lo_b, lo_g)
    b = loss_mean(x, m, w, hi_b, hi_g)
    assert min(a.fitting, a.regularization, a.smoothing) >= 0
    assert b.total >= a.total - 1e-12
    zero = loss_mean(x, m, np.zeros(20), hi_b, hi_g)
    assert zero.total == pytest.approx(zero.fitting, abs=0)


def test_mse_moment_identity():
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = rng.standard_normal(1000)
        m = 0.5 * x + 0.2 * np.cumsum(rng.standard_normal(1000)) / 10
        terms = mse_identity_terms(x, m, beta=2.0)
        assert terms["relative_error"] < 0.01
