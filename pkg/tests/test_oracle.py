import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisygrf.errors import ContractViolation, OracleRefusal
from noisygrf.models import ErgmModel, GaussianPrior, IsingModel
from noisygrf.oracle import (
    PosteriorGrid,
    brute_force_logZ,
    exact_moments,
    exact_posterior_grid,
    grid_summaries,
    ising_transfer_logZ,
    iter_states,
    log_partition,
    state_histogram,
)
from noisygrf.studies import simulate_ising

ALL4 = ("edges", "two-stars", "three-stars", "triangles")


def test_two_site_closed_form():
    model = IsingModel(1, 2)
    assert brute_force_logZ(model, [0.5]) == pytest.approx(np.log(2 * np.exp(0.5) + 2 * np.exp(-0.5)), abs=1e-14)
    assert np.exp(brute_force_logZ(model, [0.5])) == pytest.approx(4.51050, abs=1e-5)


def test_zero_parameter_counts_states():
    assert brute_force_logZ(IsingModel(2, 2), [0.0]) == pytest.approx(np.log(16))
    assert brute_force_logZ(ErgmModel(4, ALL4), [0, 0, 0, 0]) == pytest.approx(6 * np.log(2))


def test_independent_dyads_closed_form():
    assert brute_force_logZ(ErgmModel(3, ("edges",)), [1.0]) == pytest.approx(3 * np.log1p(np.e), abs=1e-13)


def test_enumeration_refuses_large_spaces():
    with pytest.raises(OracleRefusal, match="2\\^24"):
        brute_force_logZ(IsingModel(5, 5), [0.1])
    with pytest.raises(OracleRefusal):
        brute_force_logZ(ErgmModel(8), [0.1, 0.1])


def test_histogram_matches_explicit_enumeration():
    for model in (IsingModel(3, 3), ErgmModel(5, ALL4), ErgmModel(5, ("edges", "triangles"))):
        theta = np.linspace(-0.3, 0.2, model.dim)
        direct = np.logaddexp.reduce([theta @ model.suffstats(y) for y in iter_states(model)])
        assert brute_force_logZ(model, theta) == pytest.approx(direct, abs=1e-10)


@pytest.mark.parametrize("h,w", [(h, w) for h in range(1, 5) for w in range(1, 6)])
@pytest.mark.parametrize("theta", [-0.4, -0.1, 0.0, 0.3, 0.8])
def test_transfer_matches_enumeration(h, w, theta):
    assert ising_transfer_logZ(h, w, theta) == pytest.approx(brute_force_logZ(IsingModel(h, w), [theta]), abs=1e-9)


@given(st.integers(1, 30), st.floats(-2, 2))
def test_transfer_one_dimensional_chain(width, theta):
    expected = width * np.log(2) + (width - 1) * np.log(np.cosh(theta))
    assert ising_transfer_logZ(1, width, theta) == pytest.approx(expected, abs=1e-10)


def test_transfer_refuses_tall_lattices():
    with pytest.raises(OracleRefusal, match="20"):
        ising_transfer_logZ(21, 3, 0.1)


def test_transfer_handles_strong_coupling():
    # no overflow at |theta| * S around 700
    assert np.isfinite(ising_transfer_logZ(16, 16, 1.5))


def test_moments_two_sites():
    mean, cov = exact_moments(IsingModel(1, 2), [0.7])
    assert mean[0] == pytest.approx(np.tanh(0.7), abs=1e-14)
    assert exact_moments(IsingModel(1, 2), [0.0])[0][0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("model,theta", [
    (IsingModel(3, 4), [0.25]),
    (IsingModel(5, 6), [0.4]),          # transfer-matrix route
    (ErgmModel(5, ALL4), [-0.5, 0.2, -0.1, 0.3]),
    (ErgmModel(6, ("edges", "two-stars")), [-1.0, 0.1]),
])
def test_moments_are_derivatives_of_logz(model, theta):
    theta = np.asarray(theta, dtype=float)
    mean, cov = exact_moments(model, theta)
    h = 1e-5
    m = len(theta)
    eye = np.eye(m) * h
    grad = np.array([(log_partition(model, theta + e) - log_partition(model, theta - e)) / (2 * h) for e in eye])
    assert np.allclose(mean, grad, atol=1e-6 * max(1, np.abs(mean).max()))
    hk = 1e-3
    hess = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            ei, ej = np.eye(m)[i] * hk, np.eye(m)[j] * hk
            hess[i, j] = (log_partition(model, theta + ei + ej) - log_partition(model, theta + ei - ej)
                          - log_partition(model, theta - ei + ej) + log_partition(model, theta - ei - ej)) / (4 * hk * hk)
    assert np.allclose(cov, hess, rtol=1e-4, atol=1e-4 * np.abs(hess).max())


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
@settings(max_examples=30)
def test_covariance_is_psd(theta):
    _, cov = exact_moments(ErgmModel(5, ALL4), theta)
    assert np.allclose(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= -1e-10


@pytest.mark.parametrize("model", [IsingModel(3, 3), ErgmModel(4, ALL4)])
def test_probabilities_sum_to_one(model):
    theta = np.full(model.dim, 0.3)
    logz = brute_force_logZ(model, theta)
    total = sum(np.exp(model.unnorm_logdensity(theta, y) - logz) for y in iter_states(model))
    assert total == pytest.approx(1.0, abs=1e-12)


def _trap(y, x):
    return float(np.sum(0.5 * np.diff(x) * (y[1:] + y[:-1])))


def test_posterior_grid_normalised(ising44_data):
    model, y, _ = ising44_data
    grid = exact_posterior_grid(model, y, np.linspace(-0.4, 0.8, 241))
    assert _trap(grid.density, grid.theta_grid) == pytest.approx(1.0, abs=1e-12)
    assert np.all(grid.density >= 0)
    assert grid.normalizer > 0


def test_posterior_grid_rejects_non_monotone():
    with pytest.raises(ContractViolation):
        exact_posterior_grid(IsingModel(2, 2), np.ones((2, 2)), [0.0, 0.2, 0.1])
    with pytest.raises(ContractViolation):
        exact_posterior_grid(ErgmModel(4), np.zeros((4, 4)), [0.0, 0.1])


def test_flat_prior_mode_is_mle():
    model = IsingModel(10, 10)
    y = simulate_ising(model, 0.3, 500, np.random.default_rng(11))
    s = model.suffstats(y)[0]
    lo, hi = -2.0, 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if exact_moments(model, [mid])[0][0] < s else (lo, mid)
    grid_pts = np.linspace(-0.4, 0.8, 241)
    grid = exact_posterior_grid(model, y, grid_pts, prior="flat")
    assert abs(grid.argmax() - 0.5 * (lo + hi)) <= grid_pts[1] - grid_pts[0]


def test_grid_refinement_changes_mean_little(ising44_data):
    model, y, _ = ising44_data
    model = IsingModel(8, 8)
    y = simulate_ising(model, 0.3, 1000, np.random.default_rng(2))
    coarse = grid_summaries(exact_posterior_grid(model, y, np.linspace(-0.4, 0.8, 241)))[0]
    fine = grid_summaries(exact_posterior_grid(model, y, np.linspace(-0.4, 0.8, 481)))[0]
    assert abs(coarse - fine) < 1e-4


def test_summaries_symmetric_density():
    x = np.linspace(-1, 1, 201) + 0.25
    d = np.exp(-0.5 * ((x - 0.25) / 0.2) ** 2)
    d /= _trap(d, x)
    grid = PosteriorGrid(x, np.log(d), 0.0, d)
    assert grid_summaries(grid)[0] == pytest.approx(0.25, abs=1e-10)


def test_summaries_point_mass_like():
    x = np.linspace(0, 1, 101)
    d = np.full_like(x, 1e-12)
    d[37] = 1.0
    d /= _trap(d, x)
    grid = PosteriorGrid(x, np.log(d), 0.0, d)
    assert grid_summaries(grid)[0] == pytest.approx(x[37], abs=1e-8)


def test_summaries_match_rejection_sampling(ising44_data):
    _, _, grid = ising44_data
    rng = np.random.default_rng(0)
    x, d = grid.theta_grid, grid.density
    n = 10**6
    prop = rng.uniform(x[0], x[-1], size=3 * n)
    keep = rng.uniform(0, d.max(), size=prop.size) < np.interp(prop, x, d)
    draws = prop[keep][:n]
    mean, sd = grid_summaries(grid)
    assert abs(draws.mean() - mean) < 3 * sd / np.sqrt(len(draws))
