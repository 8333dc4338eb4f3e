import numpy as np
import pytest

from noisygrf.errors import ConfigurationError, ContractViolation, DivergenceError, SingularMatrixError
from noisygrf.models import ErgmModel, GaussianPrior, IsingModel
from noisygrf.oracle import log_partition
from noisygrf.samplers import SamplerConfig
from noisygrf.tuning import (
    RmSchedule,
    estimate_log_posterior_hessian,
    pilot_scale_search,
    robbins_monro,
    robbins_monro_map,
    tune,
    tune_step_matrix,
)


def test_schedule_validation_and_steps():
    s = RmSchedule(a=0.2, b=4)
    assert s.step(0) == pytest.approx(0.05)
    assert s.step(6) == pytest.approx(0.02)
    for bad in ({"a": 0}, {"b": -1}, {"tol": 0}, {"max_iter": 0}, {"patience": 0}):
        with pytest.raises(ConfigurationError):
            RmSchedule(**bad)


def test_noisy_quadratic_converges_to_root():
    rng = np.random.default_rng(0)
    target = np.array([2.0, -1.0])
    res = robbins_monro(lambda t: -(t - target) * 5 + rng.normal(0, 0.5, size=2), np.zeros(2),
                        RmSchedule(a=0.5, b=10, tol=1e-4, max_iter=50000))
    assert np.allclose(res.theta, target, atol=0.05)


def test_deterministic_quadratic_converges_and_stops():
    res = robbins_monro(lambda t: -(t - 3.0), [0.0], RmSchedule(a=5.0, b=10.0, tol=1e-6, patience=5))
    assert res.converged and res.theta[0] == pytest.approx(3.0, abs=1e-4)
    assert len(res.path) == res.n_iter + 1


def test_max_iter_reported_as_not_converged():
    res = robbins_monro(lambda t: np.ones(1), [0.0], RmSchedule(max_iter=10))
    assert not res.converged and res.n_iter == 10


def test_divergence_detected():
    with pytest.raises(DivergenceError) as info:
        robbins_monro(lambda t: t + 1.0, [1.0], RmSchedule(a=10.0, b=1.0), divergence_radius=100.0)
    assert np.linalg.norm(info.value.last_iterate) <= 100.0


def _ising_map_by_grid(model, y):
    grid = np.linspace(-1.5, 2.5, 40001)
    lp = [model.unnorm_logdensity([t], y) - log_partition(model, [t]) + model.prior.logpdf([t]) for t in grid]
    return grid[int(np.argmax(lp))]


def test_map_on_small_ising_matches_exact_mode(ising44_data):
    model, y, _ = ising44_data
    mode = _ising_map_by_grid(model, y)
    cfg = SamplerConfig(n_aux=10, aux_burnin=100, seed=1)
    res = robbins_monro_map(model, y, RmSchedule(a=0.1, b=10), cfg)
    assert res.theta[0] == pytest.approx(mode, abs=0.05)
    half = robbins_monro_map(model, y, RmSchedule(a=0.05, b=10), SamplerConfig(n_aux=10, aux_burnin=100, seed=2))
    assert half.theta[0] == pytest.approx(mode, abs=0.05)


def test_edges_only_hessian_closed_form():
    # with only the edge count, dyads are independent Bernoulli(logistic(theta))
    n = 8
    prior = GaussianPrior((0.0,), (100.0,))
    model = ErgmModel(n, ("edges",), prior)
    y = np.zeros((n, n), dtype=np.uint8)
    theta = -0.4
    cfg = SamplerConfig(aux_burnin=50, aux_thin=2, seed=3)
    est = estimate_log_posterior_hessian(model, y, [theta], n_draws=20000, config=cfg)
    p = 1 / (1 + np.exp(-theta))
    exact = -(n * (n - 1) / 2) * p * (1 - p) - 1 / 100.0
    assert est[0, 0] == pytest.approx(exact, rel=0.05)


def test_small_ising_hessian_matches_finite_differences():
    model = IsingModel(2, 2)
    y = np.ones((2, 2), dtype=np.int8)
    t, h = 0.2, 1e-4

    def lp(x):
        return model.unnorm_logdensity([x], y) - log_partition(model, [x]) + model.prior.logpdf([x])

    fd = (lp(t + h) - 2 * lp(t) + lp(t - h)) / h**2
    est = estimate_log_posterior_hessian(model, y, [t], n_draws=40000,
                                         config=SamplerConfig(aux_burnin=20, aux_thin=2, seed=4))
    assert est[0, 0] == pytest.approx(fd, rel=0.05)


def test_hessian_contracts():
    model = IsingModel(2, 2)
    y = np.ones((2, 2), dtype=np.int8)
    with pytest.raises(ContractViolation):
        estimate_log_posterior_hessian(model, y, [0.1], n_draws=50)
    # at an extreme coupling every draw is an all-equal configuration with the same statistic
    with pytest.raises(SingularMatrixError):
        estimate_log_posterior_hessian(model, y, [40.0], n_draws=200, config=SamplerConfig(aux_burnin=50, seed=0))


def test_step_matrix_properties():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(3, 3))
    hess = -(a @ a.T + 0.5 * np.eye(3))
    sigma = tune_step_matrix(hess, 0.7)
    assert np.allclose(sigma, sigma.T)
    assert np.all(np.linalg.eigvalsh(sigma) > 0)
    assert np.allclose(sigma @ (-hess), 0.7 * np.eye(3), atol=1e-10)
    with pytest.raises(SingularMatrixError):
        tune_step_matrix(np.eye(2))
    with pytest.raises(ContractViolation):
        tune_step_matrix(hess, 0.0)
    with pytest.raises(ContractViolation):
        tune_step_matrix(np.ones((2, 3)))


def test_pilot_search_brackets_target(ising44_data):
    model, y, grid = ising44_data
    mu, sd = grid.summaries()
    hess = np.array([[-1 / sd**2]])
    cfg = SamplerConfig(n_aux=10, aux_burnin=100, seed=6)
    res = pilot_scale_search(model, y, hess, "mala-exchange", cfg, target=0.5, n_pilots=4, n_iter=300,
                             theta0=[mu])
    assert 0.1 <= res.scale <= 10
    assert len(res.history) == 4
    rates = [r for _, r in res.history]
    assert abs(res.acceptance - 0.5) == min(abs(r - 0.5) for r in rates)


def test_tune_artifact(ising44_data):
    model, y, _ = ising44_data
    out = tune(model, y, SamplerConfig(n_aux=10, aux_burnin=100, seed=7), n_draws=1000, pilot=False)
    assert set(out) >= {"theta_star", "hessian", "sigma", "scale", "acceptance", "converged"}
    assert np.isnan(out["acceptance"]) and out["scale"] == 1.0
    assert np.allclose(out["sigma"], np.linalg.inv(-out["hessian"]))
