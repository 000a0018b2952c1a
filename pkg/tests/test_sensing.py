"""Sensor model, weighted least squares, and fusion-weight helpers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from advfusion.errors import ConfigError
from advfusion.sensing import (
    DEFAULT_SIGMA,
    N_SENSORS,
    SENSOR_NAMES,
    NoiseModel,
    fused_estimate,
    fused_noise_variance,
    inverse_variance_weights,
    measure,
    residual_cost,
    validate_weights,
    wls_estimate,
)

# frozen normalization of (1/sigma^2) at the default sigmas
IV_WEIGHTS_DEFAULT = (
    0.057761732851985564,
    0.014440433212996389,
    0.9241877256317689,
    0.0036101083032490976,
)


def test_sensor_order_and_defaults():
    assert SENSOR_NAMES == ("camera", "radar", "beacon", "rss")
    assert DEFAULT_SIGMA == (0.2, 0.4, 0.05, 0.8)


def test_measure_zero_noise_is_exact():
    noise = NoiseModel(sigma=(0.0, 0.0, 0.0, 0.0))
    z = measure(20.0, noise, np.random.default_rng(0))
    assert z == pytest.approx([20.0] * N_SENSORS)


def test_measure_seeded_repeatable():
    noise = NoiseModel()
    a = measure(20.0, noise, np.random.default_rng(11))
    b = measure(20.0, noise, np.random.default_rng(11))
    assert np.array_equal(a, b)


def test_measure_monte_carlo_moments():
    noise = NoiseModel()
    rng = np.random.default_rng(5)
    zs = np.array([measure(20.0, noise, rng) for _ in range(20000)])
    assert zs.mean(axis=0) == pytest.approx([20.0] * N_SENSORS, abs=0.02)
    assert zs.std(axis=0) == pytest.approx(list(DEFAULT_SIGMA), rel=0.05)


def test_noise_model_validation():
    with pytest.raises(ConfigError):
        NoiseModel(sigma=(0.1, 0.1, 0.1))
    with pytest.raises(ConfigError):
        NoiseModel(sigma=(-0.1, 0.1, 0.1, 0.1))


def test_validate_weights_accepts_simplex():
    validate_weights(np.array([0.25, 0.25, 0.25, 0.25]))
    validate_weights(np.array([1.0, 0.0, 0.0, 0.0]))


def test_validate_weights_rejects_bad():
    with pytest.raises(ValueError):
        validate_weights(np.array([0.5, 0.5, 0.5, -0.5]))
    with pytest.raises(ValueError):
        validate_weights(np.array([0.3, 0.3, 0.3, 0.3]))
    with pytest.raises(ValueError):
        validate_weights(np.array([0.5, 0.5]))


def test_fused_estimate_is_dot_product():
    w = np.array([0.1, 0.2, 0.3, 0.4])
    z = np.array([1.0, 2.0, 3.0, 4.0])
    assert fused_estimate(z, w) == pytest.approx(float(w @ z))


def test_wls_matches_scalar_minimizer():
    """The closed form agrees with numerically minimizing the residual."""
    rng = np.random.default_rng(9)
    gains = np.ones(N_SENSORS)
    wmat = np.diag(1.0 / np.square(DEFAULT_SIGMA))
    for _ in range(10):
        z = 20.0 + rng.normal(size=N_SENSORS)
        got = wls_estimate(z, gains, wmat)
        ref = minimize_scalar(
            lambda v: residual_cost(z, v, wmat), bounds=(0.0, 40.0), method="bounded"
        ).x
        assert got == pytest.approx(ref, abs=1e-6)


def test_wls_equals_inverse_variance_fusion():
    # with unit gains, WLS reduces to the normalized-precision combination
    rng = np.random.default_rng(3)
    z = 20.0 + rng.normal(size=N_SENSORS)
    wmat = np.diag(1.0 / np.square(DEFAULT_SIGMA))
    w = inverse_variance_weights(np.array(DEFAULT_SIGMA))
    assert wls_estimate(z, np.ones(N_SENSORS), wmat) == pytest.approx(
        fused_estimate(z, w), rel=1e-12
    )


def test_inverse_variance_weights_frozen():
    w = inverse_variance_weights(np.array(DEFAULT_SIGMA))
    assert w == pytest.approx(IV_WEIGHTS_DEFAULT, rel=1e-12)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_inverse_variance_weights_zero_sigma_one_hot():
    w = inverse_variance_weights(np.array([0.2, 0.0, 0.05, 0.8]))
    assert w == pytest.approx([0.0, 1.0, 0.0, 0.0])


def test_inverse_variance_weights_ordering():
    # lower noise must never get less weight
    w = inverse_variance_weights(np.array(DEFAULT_SIGMA))
    order = np.argsort(np.array(DEFAULT_SIGMA))
    assert np.all(np.diff(w[order]) <= 0.0)


def test_fused_noise_variance_formula_and_mc():
    w = inverse_variance_weights(np.array(DEFAULT_SIGMA))
    var = fused_noise_variance(w, np.array(DEFAULT_SIGMA))
    assert var == pytest.approx(float(np.sum(w**2 * np.square(DEFAULT_SIGMA))))
    rng = np.random.default_rng(8)
    noise = NoiseModel()
    errs = np.array([fused_estimate(measure(0.0, noise, rng), w) for _ in range(40000)])
    assert errs.var() == pytest.approx(var, rel=0.05)


def test_inverse_variance_minimizes_fused_variance():
    sig = np.array(DEFAULT_SIGMA)
    best = fused_noise_variance(inverse_variance_weights(sig), sig)
    rng = np.random.default_rng(2)
    for _ in range(200):
        w = rng.dirichlet(np.ones(N_SENSORS))
        assert fused_noise_variance(w, sig) >= best - 1e-12


@given(
    shift=st.floats(-1.0, 1.0).filter(lambda s: abs(s) > 1e-6),
)
@settings(max_examples=40, deadline=None)
def test_wls_is_cost_minimum(shift):
    rng = np.random.default_rng(1)
    z = 20.0 + rng.normal(size=N_SENSORS)
    wmat = np.diag(1.0 / np.square(DEFAULT_SIGMA))
    v_star = wls_estimate(z, np.ones(N_SENSORS), wmat)
    assert residual_cost(z, v_star, wmat) < residual_cost(z, v_star + shift, wmat)
