"""Robbins-Monro MAP search and curvature-based step matrices."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolation, DivergenceError, SingularMatrixError
from .models import prior_log_grad_hess
from .samplers import SamplerConfig, draw_auxiliary, grad_log_posterior_estimate, run_chain


@dataclass(frozen=True)
class RmSchedule:
    """Step sizes eps_n = a / (b + n).

    The harmonic decay gives sum eps_n = inf and sum eps_n^2 < inf.  The run
    stops once ``patience`` consecutive moves are shorter than ``tol``.
    """

    a: float = 0.1
    b: float = 10.0
    tol: float = 1e-3
    max_iter: int = 20000
    patience: int = 20

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.tol > 0):
            raise ConfigurationError("a, b and tol must be positive")
        if int(self.max_iter) < 1 or int(self.patience) < 1:
            raise ConfigurationError("max_iter and patience must be >= 1")

    def step(self, n):
        return self.a / (self.b + n)


@dataclass
class RmResult:
    theta: np.ndarray
    n_iter: int
    converged: bool
    path: np.ndarray


def robbins_monro(grad_fn, theta0, schedule=None, divergence_radius=np.inf):
    """Generic iteration theta <- theta + eps_n * grad_fn(theta)."""
    schedule = RmSchedule() if schedule is None else schedule
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    path = [theta.copy()]
    quiet = 0
    for n in range(int(schedule.max_iter)):
        new = theta + schedule.step(n) * np.asarray(grad_fn(theta), dtype=float)
        if not np.all(np.isfinite(new)) or np.linalg.norm(new) > divergence_radius:
            raise DivergenceError(
                f"iterate left the ball of radius {divergence_radius:g} at step {n}", theta.copy()
            )
        moved = np.linalg.norm(new - theta)
        theta = new
        path.append(theta.copy())
        quiet = quiet + 1 if moved < schedule.tol else 0
        if quiet >= schedule.patience:
            return RmResult(theta, n + 1, True, np.array(path))
    return RmResult(theta, int(schedule.max_iter), False, np.array(path))


def robbins_monro_map(model, y, schedule=None, config=None, rng=None, theta0=None):
    """MAP estimate from noisy gradients s(y) - mean s(y') + grad log prior.

    Every step uses a fresh auxiliary sample of ``config.n_aux`` draws.
    Divergence is declared when ``|theta|`` exceeds ten times the largest
    plausible parameter scale, taken here as ``10 * max(1, S)`` where S is
    the model's statistic bound.
    """
    config = SamplerConfig() if config is None else config
    rng = np.random.default_rng(config.seed) if rng is None else rng
    s_obs = model.suffstats(y)
    theta0 = np.zeros(model.dim) if theta0 is None else model.check_theta(theta0)

    def grad(theta):
        aux = draw_auxiliary(model, theta, config, config.n_aux, rng, store_states=False)
        return grad_log_posterior_estimate(model, y, theta, aux, s_obs)

    return robbins_monro(grad, theta0, schedule, divergence_radius=10.0 * max(1.0, model.stat_bound))


def estimate_log_posterior_hessian(model, y, theta_star, n_draws=4000, rng=None, config=None):
    """-SampleCov(s(y*)) + prior Hessian, with y* drawn at theta_star.

    The log-likelihood Hessian of an exponential family is minus the
    covariance of its sufficient statistics.
    """
    if int(n_draws) < 100:
        raise ContractViolation("n_draws must be >= 100")
    config = SamplerConfig() if config is None else config
    rng = np.random.default_rng(config.seed) if rng is None else rng
    theta_star = model.check_theta(theta_star)
    aux = draw_auxiliary(model, theta_star, config, int(n_draws), rng, store_states=False)
    cov = np.atleast_2d(np.cov(aux.stats, rowvar=False))
    cov = 0.5 * (cov + cov.T)
    eig = np.linalg.eigvalsh(cov)
    if eig.min() <= 1e-12 * max(1.0, eig.max()):
        raise SingularMatrixError(
            "sample covariance of the statistics is singular; draw more samples or thin further"
        )
    _, _, prior_hess = prior_log_grad_hess(model.prior, theta_star)
    hess = -cov + prior_hess
    return 0.5 * (hess + hess.T)


def tune_step_matrix(hessian, scale=1.0):
    """Sigma = scale * (-hessian)^{-1}, checked to be symmetric positive definite."""
    hess = np.atleast_2d(np.asarray(hessian, dtype=float))
    if hess.shape[0] != hess.shape[1]:
        raise ContractViolation("hessian must be square")
    if not scale > 0:
        raise ContractViolation("scale must be positive")
    neg = -0.5 * (hess + hess.T)
    if np.linalg.eigvalsh(neg).min() <= 0:
        raise SingularMatrixError(
            "hessian is not negative definite; use more auxiliary draws or a tighter prior"
        )
    sigma = scale * np.linalg.inv(neg)
    sigma = 0.5 * (sigma + sigma.T)
    if np.linalg.eigvalsh(sigma).min() <= 1e-12:
        raise SingularMatrixError("step matrix is numerically singular")
    return sigma


@dataclass
class PilotResult:
    scale: float
    acceptance: float
    history: list


def pilot_scale_search(model, y, hessian, algorithm="mala-exchange", config=None, target=0.25,
                       lo=0.1, hi=10.0, n_pilots=5, n_iter=2000, theta0=None):
    """Bisect log(scale) on [lo, hi] so pilot acceptance approaches ``target``.

    Acceptance falls as the step grows, so a pilot above target moves the
    lower end up.  Returns the pilot closest to target.
    """
    config = SamplerConfig() if config is None else config
    history = []
    log_lo, log_hi = np.log(lo), np.log(hi)
    for k in range(int(n_pilots)):
        scale = float(np.exp(0.5 * (log_lo + log_hi)))
        pilot = SamplerConfig.from_dict(
            {**config.to_dict(), "step_matrix": tune_step_matrix(hessian, scale),
             "n_iter": n_iter, "time_budget": None, "seed": config.seed + k}
        )
        rate = run_chain(algorithm, model, y, pilot, theta0=theta0).acceptance_rate
        history.append((scale, rate))
        if rate > target:
            log_lo = np.log(scale)
        else:
            log_hi = np.log(scale)
    best = min(history, key=lambda h: abs(h[1] - target))
    return PilotResult(best[0], best[1], history)


def tune(model, y, config=None, schedule=None, n_draws=4000, algorithm="mala-exchange",
         target=0.25, pilot=True, n_pilots=5, pilot_iter=2000, rng=None):
    """MAP search, curvature at the MAP and a step matrix, as one artifact.

    Returns a dict with ``theta_star``, ``hessian``, ``sigma``, ``scale``,
    ``acceptance`` (NaN when the pilot search is skipped) and ``converged``.
    """
    config = SamplerConfig(n_aux=10) if config is None else config
    rng = np.random.default_rng(config.seed) if rng is None else rng
    schedule = RmSchedule(patience=20) if schedule is None else schedule
    rm = robbins_monro_map(model, y, schedule, config, rng)
    hess = estimate_log_posterior_hessian(model, y, rm.theta, n_draws, rng, config)
    scale, rate, history = 1.0, float("nan"), []
    if pilot:
        res = pilot_scale_search(model, y, hess, algorithm, config, target, n_pilots=n_pilots,
                                 n_iter=pilot_iter, theta0=rm.theta)
        scale, rate, history = res.scale, res.acceptance, res.history
    return {
        "theta_star": rm.theta,
        "hessian": hess,
        "sigma": tune_step_matrix(hess, scale),
        "scale": scale,
        "acceptance": rate,
        "pilot_history": history,
        "converged": rm.converged,
        "rm_iterations": rm.n_iter,
    }
