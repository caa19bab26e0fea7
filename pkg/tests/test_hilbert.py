import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fbmdrift.fbm import TimeGrid
from fbmdrift.hilbert import (
    StepFunction,
    abs_norm_high,
    inner_product_indicator,
    kt_norm,
    lp_norm,
    random_step_functions,
    sigmoid_rule,
    step_inner_product,
    step_norm,
)

levels = st.lists(st.floats(-3, 3), min_size=2, max_size=12)


def test_indicator_norm_is_length_power():
    g = TimeGrid(20, 0.05)
    for h in (0.2, 0.5, 0.8):
        phi = StepFunction.indicator(g, 4, 14)
        assert step_norm(phi, h) ** 2 == pytest.approx(0.5 ** (2 * h), rel=1e-12)


@given(st.floats(0.05, 0.95), levels)
def test_brownian_case_is_L2(h, v):
    g = TimeGrid(len(v), 0.1)
    phi = StepFunction(g, np.array(v))
    l2 = np.sqrt(np.sum(np.square(v)) * 0.1)
    assert step_norm(phi, 0.5) == pytest.approx(l2, rel=1e-10, abs=1e-12)
    assert lp_norm(phi, 2.0) == pytest.approx(l2, rel=1e-12, abs=1e-12)


@given(st.floats(0.05, 0.95), levels, levels)
def test_inner_product_bilinear_and_cauchy_schwarz(h, v, w):
    k = min(len(v), len(w))
    g = TimeGrid(k, 0.1)
    phi, psi = StepFunction(g, np.array(v[:k])), StepFunction(g, np.array(w[:k]))
    ip = step_inner_product(phi, psi, h)
    assert ip == pytest.approx(step_inner_product(psi, phi, h), rel=1e-10, abs=1e-12)
    assert abs(ip) <= step_norm(phi, h) * step_norm(psi, h) * (1 + 1e-9) + 1e-12
    both = StepFunction(g, np.array(v[:k]) + np.array(w[:k]))
    expect = step_norm(phi, h) ** 2 + 2 * ip + step_norm(psi, h) ** 2
    assert step_norm(both, h) ** 2 == pytest.approx(expect, rel=1e-8, abs=1e-10)


def test_indicator_inner_product_matches_step_functions():
    g = TimeGrid(10, 0.1)
    a, b = StepFunction.indicator(g, 1, 4), StepFunction.indicator(g, 3, 9)
    for h in (0.3, 0.7):
        assert step_inner_product(a, b, h) == pytest.approx(inner_product_indicator(0.1, 0.4, 0.3, 0.9, h))
    with pytest.raises(ValueError):
        inner_product_indicator(0.5, 0.1, 0, 1, 0.3)


def brute_abs_norm_sq(values, dt, h):
    # alpha * sum_ij |v_i||v_j| int int_{cell i x cell j} |r - s|^{2H-2}, each double integral
    # reduced to one dimension in u = r - s with the triangular overlap weight
    alpha = h * (2 * h - 1)
    n = len(values)
    total = 0.0
    for i in range(n):
        for j in range(n):
            c = (i - j) * dt
            f = lambda u: (dt - abs(u - c)) * abs(u) ** (2 * h - 2) if u != 0 else 0.0  # noqa: E731
            pts = [0.0] if c - dt < 0 < c + dt else None
            val = integrate.quad(f, c - dt, c + dt, points=pts, limit=200, epsabs=1e-12)[0]
            total += abs(values[i]) * abs(values[j]) * val
    return alpha * total


def test_abs_norm_against_direct_quadrature():
    v = np.array([1.0, -2.0, 0.5])
    phi = StepFunction(TimeGrid(3, 0.2), v)
    assert abs_norm_high(phi, 0.75) ** 2 == pytest.approx(brute_abs_norm_sq(v, 0.2, 0.75), rel=1e-5)


@given(st.floats(0.55, 0.95), levels)
def test_smooth_regime_norm_chain(h, v):
    g = TimeGrid(len(v), 1.0 / len(v))
    phi = StepFunction(g, np.array(v))
    # ||phi||_H <= ||phi||_|H| <= b_H ||phi||_{L^{1/H}}, equality in the first for phi >= 0
    assert step_norm(phi, h) <= abs_norm_high(phi, h) * (1 + 1e-9) + 1e-12
    pos = StepFunction(g, np.abs(v))
    assert step_norm(pos, h) == pytest.approx(abs_norm_high(pos, h), rel=1e-9, abs=1e-12)
    if np.any(v):
        assert abs_norm_high(phi, h) / lp_norm(phi, 1 / h) < 10


def brute_kt_norm_sq(values, dt, T, h):
    n = len(values)
    phi = lambda s: values[min(int(s // dt), n - 1)] if s < n * dt else 0.0  # noqa: E731
    brk = [k * dt for k in range(n + 1)]
    first = sum(
        integrate.quad(lambda s: phi(s) ** 2 * ((T - s) ** (2 * h - 1) + s ** (2 * h - 1)), 0, T, points=brk, limit=200)[0]
        for _ in [0]
    )

    def inner(s):
        f = lambda t: abs(phi(t) - phi(s)) * (t - s) ** (h - 1.5)  # noqa: E731
        start = (int(s // dt) + 1) * dt
        if start >= T:
            return 0.0
        pts = [b for b in brk if start < b < T]
        return integrate.quad(f, start, T, points=pts or None, limit=200)[0]

    second = 0.0
    for k in range(n):
        second += integrate.quad(lambda s: inner(s) ** 2, k * dt, (k + 1) * dt, limit=200)[0]
    return first + second


def test_kt_norm_against_direct_quadrature():
    v = np.array([1.0, -0.5, 2.0])
    phi = StepFunction(TimeGrid(3, 1 / 3), v)
    expect = brute_kt_norm_sq(v, 1 / 3, 1.0, 0.35)
    assert kt_norm(phi, 0.35) ** 2 == pytest.approx(expect, rel=2e-3)


def test_kt_norm_dominates_H_norm():
    for phi in random_step_functions(10, seed=5):
        for h in (0.2, 0.4):
            assert step_norm(phi, h) <= 3 * kt_norm(phi, h)


def test_kt_norm_rejects_smooth_regime_and_long_support():
    phi = StepFunction.indicator(TimeGrid(4, 0.5), 0, 4)
    with pytest.raises(ValueError):
        kt_norm(phi, 0.7)
    with pytest.raises(ValueError):
        kt_norm(phi, 0.3, T=1.0)


@given(st.floats(0.5, 1.0), st.floats(0.0, 2.0), st.floats(0.01, 3.0))
def test_sigmoid_rule_integrates_singular_power(e, a, width):
    # int_a^b (b - s)^(e - 1) ds = width^e / e, for the exponents e = 2H the norms need
    nodes, w = sigmoid_rule([a], [a + width], n_nodes=48)
    approx = float(np.sum(w * (a + width - nodes) ** (e - 1)))
    assert approx == pytest.approx(width**e / e, rel=2e-3)


def test_random_step_functions_seeded():
    a = random_step_functions(6, seed=9)
    b = random_step_functions(6, seed=9)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
    assert [x.grid.n_steps for x in a] == [8, 16, 32, 8, 16, 32]


def test_step_function_evaluation_and_support():
    phi = StepFunction(TimeGrid(4, 0.25), [0, 2, 3, 0])
    assert phi.support == (1, 3)
    assert phi([0.1, 0.3, 0.6, 1.2])[:, 0].tolist() == [0, 2, 3, 0]
    with pytest.raises(ValueError):
        StepFunction(TimeGrid(4, 0.25), [1, 2])
