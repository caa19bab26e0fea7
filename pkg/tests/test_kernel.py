import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from fbmdrift.fbm import TimeGrid, covariance
from fbmdrift.hilbert import StepFunction, random_step_functions, step_norm
from fbmdrift.kernel import (
    calibrate_kernel_constant,
    kernel_constant,
    kernel_identity_error,
    kernel_KH,
    kernel_KH_dt,
    operator_KH,
)


def reference_kernel(t, s, H):
    # direct form: c_H [ (t/s)^{H-1/2} (t-s)^{H-1/2} - (H-1/2) s^{1/2-H} int_s^t u^{H-3/2} (u-s)^{H-1/2} du ]
    c = np.sqrt(2 * H / ((1 - 2 * H) * special.beta(1 - 2 * H, H + 0.5)))
    inner = integrate.quad(lambda u: u ** (H - 1.5), s, t, weight="alg", wvar=(H - 0.5, 0.0))[0]
    return c * ((t / s) ** (H - 0.5) * (t - s) ** (H - 0.5) - (H - 0.5) * s ** (0.5 - H) * inner)


@pytest.mark.parametrize("H", [0.2, 0.35, 0.45])
def test_kernel_matches_reference(H):
    for t, s in [(1.0, 0.3), (2.0, 1.9), (0.5, 0.01)]:
        assert kernel_KH(t, s, H) == pytest.approx(reference_kernel(t, s, H), rel=1e-6)
        assert kernel_KH(t, s, H, method="quad") == pytest.approx(kernel_KH(t, s, H), rel=1e-9)


@pytest.mark.parametrize("H", [0.3, 0.4])
def test_covariance_identity_small_grid(H):
    pts = [(0.3, 0.3), (0.4, 1.0), (1.0, 0.7)]
    assert np.max(kernel_identity_error(H, pts)) < 1e-3


def test_identity_by_independent_quadrature():
    H, s, t = 0.3, 0.6, 1.0
    val = integrate.quad(lambda u: reference_kernel(t, u, H) * reference_kernel(s, u, H), 0, s, limit=200)[0]
    assert val == pytest.approx(covariance(s, t, H), rel=1e-3)


def test_wrong_constant_is_detected_and_refit():
    H = 0.35
    pts = [(0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
    bad = kernel_identity_error(H, pts, d_H=1.1 * kernel_constant(H))
    assert np.max(bad) > 0.1
    out = calibrate_kernel_constant(H, pts)
    assert not out["recalibrated"] and out["max_rel_error"] < 1e-3


def test_kernel_time_derivative_by_finite_difference():
    H, t, s, eps = 0.3, 1.0, 0.4, 1e-6
    fd = (kernel_KH(t + eps, s, H) - kernel_KH(t - eps, s, H)) / (2 * eps)
    assert kernel_KH_dt(t, s, H) == pytest.approx(fd, rel=1e-5)


def test_kernel_rejects_bad_arguments():
    with pytest.raises(ValueError):
        kernel_KH(1.0, 0.3, 0.7)
    with pytest.raises(ValueError):
        kernel_KH(1.0, 1.2, 0.3)


@given(st.floats(0.15, 0.48), st.lists(st.floats(-2, 2), min_size=2, max_size=8))
def test_operator_isometry_property(H, v):
    v = np.array(v)
    if not np.any(np.abs(v) > 1e-3):
        v[0] = 1.0
    phi = StepFunction(TimeGrid(len(v), 1.0 / len(v)), v)
    hn = step_norm(phi, H) ** 2
    assert operator_KH(phi, H).l2_norm_sq() == pytest.approx(hn, rel=1e-3)


def test_operator_of_indicator_is_kernel():
    # K_H(1_[0,t])(s) = K_H(t, s)
    phi = StepFunction.indicator(TimeGrid(8, 0.125), 0, 6)
    img = operator_KH(phi, 0.3)
    s = np.array([0.1, 0.4, 0.7])
    assert np.allclose(img(s)[:, 0], kernel_KH(0.75, s, 0.3), rtol=1e-9)


def test_operator_isometry_on_seeded_set():
    for phi in random_step_functions(6, seed=21):
        assert operator_KH(phi, 0.45).l2_norm_sq() == pytest.approx(step_norm(phi, 0.45) ** 2, rel=1e-3)


def test_identity_tight_point():
    assert kernel_identity_error(0.35, [(0.5, 1.0), (1.0, 0.5)]).max() < 1e-4


@pytest.mark.parametrize("H", [0.25, 0.4])
def test_kernel_singularity_at_zero(H):
    s = np.logspace(-8, -5, 6)
    slope = np.polyfit(np.log(s), np.log(kernel_KH(1.0, s, H)), 1)[0]
    assert slope == pytest.approx(H - 0.5, abs=0.1)
    # ratio against (t - s)^{H-1/2} + s^{H-1/2} stays bounded over the whole range
    ss = np.linspace(1e-6, 1 - 1e-6, 2000)
    ratio = np.abs(kernel_KH(1.0, ss, H)) / ((1 - ss) ** (H - 0.5) + ss ** (H - 0.5))
    assert np.all(np.isfinite(ratio)) and ratio.max() < 10


def test_operator_is_independent_of_horizon_and_linear():
    grid = TimeGrid(8, 0.125)
    phi = StepFunction(grid, [1, -1, 2, 0, 0.5, 0, 0, 0])
    s = np.array([0.05, 0.3, 0.55, 0.8])
    assert np.allclose(operator_KH(phi, 0.3)(s), operator_KH(phi, 0.3, T=0.75)(s), rtol=1e-9, atol=1e-12)
    assert np.allclose(operator_KH(StepFunction(grid, np.zeros(8)), 0.3)(s), 0.0)
    with pytest.raises(ValueError):
        operator_KH(phi, 0.7)
    with pytest.raises(ValueError):
        operator_KH(phi, 0.3, T=0.5)


def test_operator_polarisation_gives_inner_products():
    from fbmdrift.hilbert import step_inner_product

    a, b = random_step_functions(2, seed=3, sizes=(16,))
    plus = StepFunction(a.grid, a.values + b.values)
    minus = StepFunction(a.grid, a.values - b.values)
    ip = 0.25 * (operator_KH(plus, 0.35).l2_norm_sq() - operator_KH(minus, 0.35).l2_norm_sq())
    assert ip == pytest.approx(step_inner_product(a, b, 0.35), rel=1e-3, abs=1e-6)
    ind = StepFunction.indicator(TimeGrid(10, 0.1), 0, 7)
    assert operator_KH(ind, 0.35).l2_norm_sq() == pytest.approx(0.7 ** 0.7, rel=1e-3)
