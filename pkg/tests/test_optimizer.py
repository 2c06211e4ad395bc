import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsignal import (
    ConfigurationError,
    DegenerateInputError,
    InvalidInputError,
    Hyperparameters,
    OptimizerConfig,
    beta_estimate,
    decompose,
    decompose_joint,
    decompose_sequential,
)
from dualsignal.lbfgs import minimize
from dualsignal.optimizer import (
    objective_gradient,
    objective_value_grad,
    series_scale,
    smooth_abs,
    softplus,
    inverse_softplus,
)

from oracles import finite_difference


def gradient_errors(stage, h, seed, T=20):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(T) * 2 + 5
    w = rng.uniform(0, 1, T)
    size = 2 * T if stage == "joint" else T
    target = np.abs(x - x.mean()) if stage == "disp" else x
    params = rng.standard_normal(size) + (5 * (np.arange(size) < T) if stage != "disp" else 0)
    cfg = OptimizerConfig(huber_delta=0.05)
    g = objective_gradient(params, target, w, h, cfg, stage)
    fd = finite_difference(lambda p: objective_value_grad(p, target, w, h, cfg, stage)[0], params, 1e-6 * series_scale(x))
    return np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_joint_gradient_matches_finite_differences(seed):
    h = Hyperparameters(mode="joint", beta_mean=1.3, beta_disp=0.7, gamma_mean=0.4, gamma_disp=0.9, theta=0.8)
    assert gradient_errors("joint", h, seed) < 1e-5


@pytest.mark.parametrize("fit_kind", ["rmse", "mse", "mae", "sse"])
@pytest.mark.parametrize("reg_kind", ["mae", "rmse"])
@pytest.mark.parametrize("stage", ["mean", "disp", "joint"])
def test_gradient_all_metric_pairs(fit_kind, reg_kind, stage):
    h = Hyperparameters(fit_kind=fit_kind, reg_kind=reg_kind, theta=1.5, disp_weighting=False)
    assert gradient_errors(stage, h, 7) < 1e-5


def test_rmse_gradient_hand_example():
    h = Hyperparameters(beta_mean=0, gamma_mean=0)
    x = np.array([0.0, 1.0])
    g = objective_gradient(np.array([1.0, 1.0]), x, None, h, OptimizerConfig(), "mean")
    rmse = np.sqrt(0.5)
    assert np.allclose(g, (np.array([1.0, 1.0]) - x) / (2 * rmse), atol=1e-12)


def test_gradient_vanishes_at_constant_minimum():
    x = np.full(30, 4.0)
    h = Hyperparameters(mode="joint", beta_mean=2.0, beta_disp=2.0, theta=0.0)
    g = objective_gradient(np.concatenate([x, np.zeros(30)]), x, None, h)
    assert np.linalg.norm(g[:30]) < 1e-6


def test_smooth_abs_examples():
    assert smooth_abs(0.0, 1e-3) == 0
    assert smooth_abs(10.0, 1e-3) == pytest.approx(9.99900005, abs=1e-8)
    v = np.linspace(-3, 3, 13)
    assert np.array_equal(smooth_abs(v, 0.1), smooth_abs(-v, 0.1))
    assert np.all(np.abs(v) - smooth_abs(v, 0.1) <= 0.1 + 1e-15)


@given(st.floats(-30, 30))
def test_inverse_softplus_roundtrip(u):
    y = softplus(np.array([u]))
    if y[0] > 1e-12:
        assert inverse_softplus(y)[0] == pytest.approx(u, rel=1e-6, abs=1e-6)


def test_beta_estimate_examples():
    x = np.tile([0.0, 1.0], 50)
    assert beta_estimate(x, 25) == pytest.approx(1.25)
    assert beta_estimate(7.5 * x, 25) == pytest.approx(1.25)
    with pytest.raises(DegenerateInputError):
        beta_estimate(np.ones(10), 25)


def test_lbfgs_rosenbrock_and_monotone_descent():
    def f(p):
        a, b = p
        return (1 - a) ** 2 + 100 * (b - a * a) ** 2, np.array(
            [-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)]
        )

    res = minimize(f, np.array([-1.2, 1.0]), rel_tolerance=1e-14, record_history=True)
    assert np.allclose(res.x, [1, 1], atol=1e-4)
    assert np.all(np.diff(res.history) <= 0)


def test_constant_input():
    c = 12.5
    r = decompose_sequential(np.full(40, c), Hyperparameters(weight_scheme="none"))
    assert np.all(np.abs(r.mean - c) <= 1e-6 * abs(c) + 1e-9)
    assert np.all(r.dispersion <= 1e-3 * abs(c))
    assert r.loss["mean"]["fitting"] < 1e-6


def test_white_noise_with_estimated_beta():
    ok_m, ok_s = 0, 0
    # S fits |R|, so its level sits near E|eps| = 0.80 rather than 1
    h = Hyperparameters(beta_rule={"kind": "estimated", "c_beta": 100}, weight_scheme="none")
    for seed in range(10):
        x = np.random.default_rng(seed).standard_normal(200)
        r = decompose_sequential(x, h)
        ok_m += np.std(r.mean - x.mean()) < 0.2
        ok_s += 0.7 <= r.dispersion.mean() <= 1.3
    assert ok_m == 10 and ok_s >= 9


def test_step_recovered_with_binary_weights():
    rng = np.random.default_rng(3)
    x = np.where(np.arange(1, 201) > 100, 5.0, 0.0) + rng.standard_normal(200)
    r = decompose_sequential(x, Hyperparameters(beta_rule={"kind": "estimated", "c_beta": 25}, spc_window=20, z_mode="preceding"))
    assert abs(r.mean[100:].mean() - r.mean[:100].mean() - 5) < 0.5


def test_joint_with_tiny_theta_matches_sequential_mean():
    rng = np.random.default_rng(4)
    x = np.cumsum(rng.standard_normal(60)) * 0.3 + rng.standard_normal(60)
    h = Hyperparameters(weight_scheme="none", beta_mean=0.5)
    seq = decompose_sequential(x, h, OptimizerConfig(rel_tolerance=1e-12))
    jnt = decompose_joint(x, h.replace(mode="joint", theta=1e-9), OptimizerConfig(rel_tolerance=1e-12))
    assert np.max(np.abs(seq.mean - jnt.mean)) < 1e-3 * np.std(x)


TIGHT = OptimizerConfig(rel_tolerance=1e-12)


def _shifted_pair(seed, c, mode):
    x = np.random.default_rng(seed).standard_normal(50)
    x[25:] += 3
    h = Hyperparameters(mode=mode, spc_window=5)
    return x, decompose(x, h, TIGHT), decompose(x + c, h, TIGHT)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.floats(-1e3, 1e3))
def test_shift_equivariance_sequential(seed, c):
    x, a, b = _shifted_pair(seed, c, "sequential")
    assert np.max(np.abs(b.mean - a.mean - c)) < 1e-4
    assert np.max(np.abs(b.dispersion - a.dispersion)) < 1e-4
    for r, xs in ((a, x), (b, x + c)):
        assert np.all(r.dispersion >= r.s_floor)
        assert np.max(np.abs(xs - (r.mean + r.dispersion * r.noise.values))) < 1e-10


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 1000), st.floats(-1e3, 1e3))
def test_shift_equivariance_joint(seed, c):
    # the joint objective has a flat valley: equal loss, M agrees more loosely
    x, a, b = _shifted_pair(seed, c, "joint")
    assert b.loss_value == pytest.approx(a.loss_value, rel=1e-6)
    assert np.max(np.abs(b.mean - a.mean - c)) < 1e-2
    assert np.all(b.dispersion >= b.s_floor)


def test_large_beta_flattens_mean():
    x = np.random.default_rng(0).standard_normal(80) + np.linspace(0, 2, 80)
    r = decompose_sequential(x, Hyperparameters(beta_mean=1e4, gamma_mean=0, weight_scheme="none"))
    assert np.ptp(r.mean) < 1e-2


def test_short_series_rejected():
    with pytest.raises(InvalidInputError):
        decompose(np.arange(5.0), Hyperparameters(spc_window=7))
    with pytest.raises(ConfigurationError):
        decompose(np.arange(50.0), Hyperparameters(mode="joint", theta=0.0))


def test_nonconvergence_is_flagged_not_raised():
    x = np.random.default_rng(1).standard_normal(100)
    r = decompose_sequential(x, Hyperparameters(), OptimizerConfig(max_iterations=3, continuation=(1.0,)))
    assert r.converged is False
    assert np.all(np.isfinite(r.mean))
