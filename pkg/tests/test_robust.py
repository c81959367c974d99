import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from topofl.robust import (DualConfig, kl_divergence, lambda_gradient, objective, project_simplex,
                           sample_clients, uniform, update_lambda)


def kkt_ok(v, x, tol=1e-9):
    """Projection optimality: positive entries share v - x = tau; zero entries have v <= tau."""
    pos = x > 0
    tau = (v - x)[pos]
    if np.ptp(tau) > tol:
        return False
    return bool(np.all(v[~pos] <= tau[0] + tol))


def test_projection_examples():
    np.testing.assert_array_equal(project_simplex([0.3, 0.7]), [0.3, 0.7])
    np.testing.assert_allclose(project_simplex([2, 2, 2]), np.full(3, 1 / 3), atol=1e-15)
    got = project_simplex([1.2, 0.3, -0.5])
    # grid-search oracle gives [0.95, 0.05, 0]
    np.testing.assert_allclose(got, [0.95, 0.05, 0.0], atol=1e-12)
    v = np.array([1.2, 0.3, -0.5])
    np.testing.assert_allclose(got, oracles.simplex_grid_argmin(v), atol=1e-3)


def test_projection_rejects_nan():
    with pytest.raises(ValueError):
        project_simplex([0.1, np.nan])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12))
def test_projection_properties(v):
    v = np.array(v)
    x = project_simplex(v)
    assert np.all(x >= 0)
    assert abs(x.sum() - 1) <= 1e-12
    assert np.array_equal(project_simplex(x), x)
    assert kkt_ok(v, x, tol=1e-9 * max(1.0, np.abs(v).max()))


def test_kl_examples():
    p = np.array([0.2, 0.5, 0.3])
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-10)
    assert kl_divergence([0.2, 0.3, 0.5], uniform(3)) == pytest.approx(0.06895927460353621, abs=1e-12)
    with pytest.raises(ValueError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])


@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=8),
       st.lists(st.floats(0.01, 1), min_size=2, max_size=8))
def test_kl_nonnegative(a, b):
    n = min(len(a), len(b))
    lam = np.array(a[:n]) / sum(a[:n])
    p = np.array(b[:n]) / sum(b[:n])
    assert kl_divergence(lam, p) >= 0
    assert kl_divergence(lam, p) == pytest.approx(oracles.kl_direct(lam, p), abs=1e-12)


def test_gradient_examples():
    f = np.array([0.3, 1.7, -0.2])
    lam = np.array([0.2, 0.5, 0.3])
    p = np.array([0.3, 0.3, 0.4])
    np.testing.assert_array_equal(lambda_gradient(f, lam, p, 0.0), f)
    np.testing.assert_allclose(lambda_gradient(f, p, p, 0.7), f - 0.7, atol=1e-15)


def test_gradient_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(30):
        k = int(rng.integers(2, 11))
        f = rng.uniform(-3, 3, k)
        lam = rng.dirichlet(np.ones(k)) * 0.8 + 0.2 / k
        p = rng.dirichlet(np.ones(k)) * 0.8 + 0.2 / k
        q = rng.uniform(0, 2)
        fd = oracles.central_difference(lambda x: objective(f, x, p, q), lam)
        assert oracles.relative_error(lambda_gradient(f, lam, p, q), fd) <= 1e-5


def test_update_examples():
    lam = np.array([0.2, 0.5, 0.3])
    f = np.array([1.0, 2.0, 3.0])
    p = uniform(3)
    np.testing.assert_array_equal(update_lambda(lam, f, p, DualConfig(q=0.3, eta_lambda=0.0)), lam)
    # a stiff regularizer pins lam at the prior when the step is inside the stable range
    big = DualConfig(q=1e6, eta_lambda=1e-7)
    np.testing.assert_allclose(update_lambda(p, f, p, big), p, atol=1e-5)
    cfg = DualConfig(q=0.4, eta_lambda=0.25)
    step = lam + 0.25 * (f - 0.4 * (np.log(lam / p) + 1))
    np.testing.assert_array_equal(update_lambda(lam, f, p, cfg), project_simplex(step))


def test_q_zero_is_plain_ascent():
    rng = np.random.default_rng(2)
    lam = rng.dirichlet(np.ones(6))
    f = rng.normal(size=6)
    p = rng.dirichlet(np.ones(6))
    got = update_lambda(lam, f, p, DualConfig(q=0.0, eta_lambda=0.1))
    assert np.array_equal(got, project_simplex(lam + 0.1 * f))


def test_sample_clients_examples():
    assert sorted(sample_clients([0.5, 0.2, 0.3], 3, 0)) == [0, 1, 2]
    for seed in range(20):
        assert list(sample_clients([1.0, 0.0, 0.0], 1, seed)) == [0]
    with pytest.raises(ValueError):
        sample_clients([0.5, 0.5], 3, 0)


def test_sample_clients_frequencies():
    lam = np.array([0.5, 0.3, 0.2])
    rng = np.random.default_rng(123)
    draws = np.array([sample_clients(lam, 1, rng)[0] for _ in range(100_000)])
    freq = np.bincount(draws, minlength=3) / draws.size
    assert np.all(np.abs(freq - lam) < 0.01)


@given(st.integers(0, 10_000), st.integers(1, 8))
def test_sample_clients_distinct(seed, m):
    lam = np.array([0.0, 0.4, 0.0, 0.6, 0.0, 0.0, 0.0, 0.0])
    got = sample_clients(lam, m, seed)
    assert len(set(got)) == m
    positive = {1, 3}
    if m <= 2:
        assert set(got) <= positive
    else:
        assert positive <= set(got)
    assert np.array_equal(got, sample_clients(lam, m, seed))


def test_dual_config_validation():
    with pytest.raises(ValueError):
        DualConfig(q=-1)
    with pytest.raises(ValueError):
        DualConfig(clamp_floor=0)


def test_stiff_regularizer_over_many_steps():
    rng = np.random.default_rng(8)
    p = rng.dirichlet(np.ones(6)) * 0.5 + 0.5 / 6
    stable = DualConfig(q=1e6, eta_lambda=1e-7)
    lam, drift = p.copy(), 0.0
    for _ in range(100):
        lam = update_lambda(lam, rng.uniform(-10, 10, 6), p, stable)
        drift = max(drift, np.abs(lam - p).max())
    assert drift <= 1e-3


def test_step_beyond_stability_bound_oscillates():
    # eta * q = 1e5 far exceeds 2 * min(p): the log term overshoots every step
    p = uniform(4)
    lam, drift = p.copy(), 0.0
    f = np.array([1.0, -1.0, 0.5, 0.0])
    for _ in range(20):
        lam = update_lambda(lam, f, p, DualConfig(q=1e6, eta_lambda=0.1))
        drift = max(drift, np.abs(lam - p).max())
    assert drift > 0.1
