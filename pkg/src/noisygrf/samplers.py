"""Exact and noisy MCMC samplers for Gibbs random field posteriors.

Every sampler is a step function ``step(model, y, state, config, rng)``
returning ``(state, accepted)``; :func:`run_chain` drives any of them for an
iteration or wall-clock budget.  Acceptance probabilities are assembled in
log space and only exponentiated inside ``min(1, .)``.
"""

import time
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, ContractViolation
from .oracle import log_partition

ALGORITHMS = (
    "exact-mh",
    "exchange",
    "noisy-exchange",
    "noisy-langevin",
    "mala-exchange",
    "noisy-mala-exchange",
)


def chain_rng(seed, index=None):
    """Generator for a chain.

    ``index`` selects an independent stream: the pair ``(seed, index)`` is
    hashed by ``numpy.random.SeedSequence``, so replicate chains never share
    a stream with each other or with the master seed.
    """
    entropy = int(seed) if index is None else [int(seed), int(index)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _as_matrix(value, dim, name):
    mat = np.atleast_2d(np.asarray(value, dtype=float))
    if mat.shape == (1, 1) and dim > 1:
        mat = mat[0, 0] * np.eye(dim)
    if mat.shape != (dim, dim):
        raise ConfigurationError(f"{name} must be {dim}x{dim}, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ConfigurationError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() <= 0:
        raise ConfigurationError(f"{name} must be positive definite")
    return mat


@dataclass
class SamplerConfig:
    """Sampler settings.

    ``rw_scale`` is the random-walk proposal SD (scalar or per-coordinate)
    for exact-mh and the exchange family; ``rw_cov`` overrides it with a full
    proposal covariance.  ``step_matrix`` is the Langevin/MALA step matrix.
    At least one of ``n_iter`` / ``time_budget`` (seconds) must be set; when
    both are, whichever runs out first ends the chain.
    """

    n_aux: int = 1
    aux_burnin: int = 1000
    aux_thin: int = 4
    step_matrix: np.ndarray = None
    rw_scale: object = 0.1
    rw_cov: np.ndarray = None
    seed: int = 0
    n_iter: int = 1000
    time_budget: float = None

    def __post_init__(self):
        if int(self.n_aux) < 1:
            raise ConfigurationError("n_aux must be >= 1")
        if int(self.aux_burnin) < 0 or int(self.aux_thin) < 1:
            raise ConfigurationError("aux_burnin must be >= 0 and aux_thin >= 1")
        self.n_aux, self.aux_burnin, self.aux_thin = int(self.n_aux), int(self.aux_burnin), int(self.aux_thin)
        if self.n_iter is None and self.time_budget is None:
            raise ConfigurationError("either n_iter or time_budget is required")
        if self.n_iter is not None and int(self.n_iter) < 0:
            raise ConfigurationError("n_iter must be >= 0")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ConfigurationError("time_budget must be positive")
        if self.step_matrix is not None:
            m = np.atleast_2d(np.asarray(self.step_matrix, dtype=float)).shape[0]
            self.step_matrix = _as_matrix(self.step_matrix, m, "step_matrix")
        if self.rw_cov is not None:
            m = np.atleast_2d(np.asarray(self.rw_cov, dtype=float)).shape[0]
            self.rw_cov = _as_matrix(self.rw_cov, m, "rw_cov")
        scale = np.atleast_1d(np.asarray(self.rw_scale, dtype=float))
        if np.any(scale <= 0):
            raise ConfigurationError("rw_scale must be positive")

    def sigma(self, dim):
        if self.step_matrix is None:
            raise ConfigurationError("this algorithm needs a step_matrix (run tuning first)")
        return _as_matrix(self.step_matrix, dim, "step_matrix")

    def rw_chol(self, dim):
        if self.rw_cov is not None:
            return np.linalg.cholesky(_as_matrix(self.rw_cov, dim, "rw_cov"))
        scale = np.atleast_1d(np.asarray(self.rw_scale, dtype=float))
        if scale.size == 1:
            scale = np.repeat(scale, dim)
        if scale.size != dim:
            raise ConfigurationError(f"rw_scale needs 1 or {dim} entries")
        return np.diag(scale)

    def to_dict(self):
        out = asdict(self)
        for key in ("step_matrix", "rw_cov", "rw_scale"):
            if out[key] is not None:
                out[key] = np.asarray(out[key]).tolist()
        return out

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown sampler config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class AuxDraws:
    """Auxiliary configurations drawn at one parameter value.

    ``stats[i]`` is s(y'_i); ``states`` is empty when states were not kept.
    """

    theta: np.ndarray
    states: np.ndarray
    stats: np.ndarray

    def __len__(self):
        return len(self.stats)

    def __iter__(self):
        return iter(self.states)

    @property
    def first(self):
        return self.stats[0]


@dataclass
class ChainState:
    theta: np.ndarray
    cached_grad: np.ndarray = None
    cached_aux: AuxDraws = None
    cached_logz: float = None


@dataclass
class Trace:
    states: np.ndarray
    accepted: np.ndarray
    elapsed: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.states) == len(self.accepted) == len(self.elapsed)):
            raise ContractViolation("trace columns must have equal lengths")

    def __len__(self):
        return len(self.states)

    @property
    def n_iter(self):
        return len(self.states) - 1

    @property
    def acceptance_rate(self):
        if self.n_iter == 0:
            return float("nan")
        return float(np.mean(self.accepted[1:]))

    def samples(self, burn_in=0.2):
        """Post-burn-in draws (the initial state is never included)."""
        draws = self.states[1:]
        return draws[int(np.floor(burn_in * len(draws))):]


# ---------------------------------------------------------------------------
# auxiliary simulation


def gibbs_site_update(model, theta, state, site, rng):
    """Resample one site (spin or dyad) from its exact full conditional, in place."""
    p_on = model.conditional_on(theta, state, site)
    model.set_site(state, site, rng.random() < p_on)
    return state


def draw_auxiliary(model, theta, config, count, rng, store_states=True):
    """Systematic-scan Gibbs draws from f(. | theta).

    Starts from a uniformly random configuration, runs ``config.aux_burnin``
    sweeps, then keeps the state after every further ``config.aux_thin``
    sweeps until ``count`` states are collected.  The first kept state is
    y'_1.  Uniforms are drawn in one block, so for a fixed generator the
    first draws coincide whatever ``count`` is.
    """
    if int(count) < 1:
        raise ContractViolation("count must be >= 1")
    theta = model.check_theta(theta)
    count = int(count)
    n_sweeps = 1 + config.aux_burnin + config.aux_thin * count
    u = rng.random(model.n_sites * n_sweeps)
    states, stats = model._run_kernel(theta, u, config.aux_burnin, config.aux_thin, count, store_states)
    return AuxDraws(theta, states, stats)


def grad_log_posterior_estimate(model, y, theta, aux, s_obs=None):
    """s(y) - mean_i s(y'_i) + grad log prior, with y'_i drawn at ``theta``.

    ``aux`` may be an :class:`AuxDraws`, an array of statistic rows, or a
    sequence of states.
    """
    theta = model.check_theta(theta)
    stats = _aux_stats(model, aux)
    if s_obs is None:
        s_obs = model.suffstats(y)
    return s_obs - stats.mean(axis=0) + model.prior.grad(theta)


def _aux_stats(model, aux):
    if isinstance(aux, AuxDraws):
        stats = aux.stats
    else:
        arr = np.asarray(aux)
        if arr.ndim == 2 and arr.shape[1] == model.dim and arr.shape[1:] != model.state_shape:
            stats = arr.astype(float)
        else:
            stats = np.array([model.suffstats(a) for a in aux]).reshape(-1, model.dim)
    if len(stats) == 0:
        raise ContractViolation("auxiliary sample is empty")
    return stats


# ---------------------------------------------------------------------------
# acceptance ratios (log scale)


def acceptance_probability(log_alpha):
    return float(np.exp(min(0.0, log_alpha)))


def _target_part(model, s_obs, theta, theta_p):
    return float((theta_p - theta) @ s_obs) + model.prior.logpdf(theta_p) - model.prior.logpdf(theta)


def mh_log_alpha(model, s_obs, theta, theta_p, logz, logz_p):
    """Exact M-H log ratio for a symmetric proposal."""
    return _target_part(model, s_obs, theta, theta_p) + logz - logz_p


def exchange_log_alpha(model, s_obs, theta, theta_p, s_aux):
    """Exchange log ratio with a single auxiliary statistic s(y') drawn at theta_p."""
    s_aux = np.asarray(s_aux, dtype=float).reshape(-1)
    return _target_part(model, s_obs, theta, theta_p) + float((theta - theta_p) @ s_aux)


def log_ratio_estimate(theta, theta_p, s_aux):
    """log of (1/N) sum_i q_theta(y'_i) / q_theta'(y'_i)."""
    s_aux = np.atleast_2d(np.asarray(s_aux, dtype=float))
    return float(logsumexp(s_aux @ (theta - theta_p)) - np.log(len(s_aux)))


def noisy_exchange_log_alpha(model, s_obs, theta, theta_p, s_aux):
    return _target_part(model, s_obs, theta, theta_p) + log_ratio_estimate(theta, theta_p, s_aux)


def _gauss_logpdf(x, mean, sigma):
    diff = x - mean
    return -0.5 * float(diff @ np.linalg.solve(sigma, diff))


def langevin_mean(theta, grad, sigma):
    return theta + 0.5 * sigma @ grad


def mala_proposal_log_ratio(theta, theta_p, grad, grad_p, sigma):
    """log h(theta | theta', .) - log h(theta' | theta, .) for the Langevin proposal."""
    return _gauss_logpdf(theta, langevin_mean(theta_p, grad_p, sigma), sigma) - _gauss_logpdf(
        theta_p, langevin_mean(theta, grad, sigma), sigma
    )


def mala_exchange_log_alpha(model, s_obs, theta, theta_p, grad, grad_p, sigma, s_aux1):
    return exchange_log_alpha(model, s_obs, theta, theta_p, s_aux1) + mala_proposal_log_ratio(
        theta, theta_p, grad, grad_p, sigma
    )


def noisy_mala_exchange_log_alpha(model, s_obs, theta, theta_p, grad, grad_p, sigma, s_aux):
    return noisy_exchange_log_alpha(model, s_obs, theta, theta_p, s_aux) + mala_proposal_log_ratio(
        theta, theta_p, grad, grad_p, sigma
    )


# ---------------------------------------------------------------------------
# steps


def _obs(model, y, s_obs):
    return model.suffstats(y) if s_obs is None else s_obs


def _rw_proposal(model, theta, config, rng):
    return theta + config.rw_chol(model.dim) @ rng.standard_normal(model.dim)


def exact_mh_step(model, y, state, config, rng, s_obs=None):
    """Random-walk M-H with log Z from the exact oracle (small instances only)."""
    s_obs = _obs(model, y, s_obs)
    theta = state.theta
    theta_p = _rw_proposal(model, theta, config, rng)
    logz = state.cached_logz if state.cached_logz is not None else log_partition(model, theta)
    logz_p = log_partition(model, theta_p)
    alpha = acceptance_probability(mh_log_alpha(model, s_obs, theta, theta_p, logz, logz_p))
    if rng.random() < alpha:
        return ChainState(theta_p, cached_logz=logz_p), True
    return ChainState(theta, cached_logz=logz), False


def exchange_step(model, y, state, config, rng, s_obs=None):
    s_obs = _obs(model, y, s_obs)
    theta = state.theta
    theta_p = _rw_proposal(model, theta, config, rng)
    aux = draw_auxiliary(model, theta_p, config, 1, rng, store_states=False)
    alpha = acceptance_probability(exchange_log_alpha(model, s_obs, theta, theta_p, aux.first))
    if rng.random() < alpha:
        return ChainState(theta_p), True
    return state, False


def noisy_exchange_step(model, y, state, config, rng, s_obs=None):
    s_obs = _obs(model, y, s_obs)
    theta = state.theta
    theta_p = _rw_proposal(model, theta, config, rng)
    aux = draw_auxiliary(model, theta_p, config, config.n_aux, rng, store_states=False)
    alpha = acceptance_probability(noisy_exchange_log_alpha(model, s_obs, theta, theta_p, aux.stats))
    if rng.random() < alpha:
        return ChainState(theta_p), True
    return state, False


def langevin_update(theta, grad, sigma, rng):
    """theta + (sigma / 2) grad + eta with eta ~ N(0, sigma)."""
    return langevin_mean(theta, grad, sigma) + np.linalg.cholesky(sigma) @ rng.standard_normal(len(theta))


def noisy_langevin_step(model, y, state, config, rng, s_obs=None):
    """Unadjusted Langevin move driven by a fresh Monte Carlo gradient; always 'accepted'."""
    s_obs = _obs(model, y, s_obs)
    sigma = config.sigma(model.dim)
    aux = draw_auxiliary(model, state.theta, config, config.n_aux, rng, store_states=False)
    grad = grad_log_posterior_estimate(model, y, state.theta, aux, s_obs)
    return ChainState(langevin_update(state.theta, grad, sigma, rng)), True


def init_mala_state(model, y, theta, config, rng, s_obs=None):
    """Draw y_theta0 and the gradient estimate at theta0."""
    s_obs = _obs(model, y, s_obs)
    theta = model.check_theta(theta)
    aux = draw_auxiliary(model, theta, config, config.n_aux, rng, store_states=False)
    return ChainState(theta, grad_log_posterior_estimate(model, y, theta, aux, s_obs), aux)


def _mala_family_step(model, y, state, config, rng, s_obs, noisy):
    s_obs = _obs(model, y, s_obs)
    sigma = config.sigma(model.dim)
    if state.cached_grad is None:
        state = init_mala_state(model, y, state.theta, config, rng, s_obs)
    theta, grad = state.theta, state.cached_grad
    theta_p = langevin_update(theta, grad, sigma, rng)
    aux_p = draw_auxiliary(model, theta_p, config, config.n_aux, rng, store_states=False)
    grad_p = grad_log_posterior_estimate(model, y, theta_p, aux_p, s_obs)
    if noisy:
        log_alpha = noisy_mala_exchange_log_alpha(model, s_obs, theta, theta_p, grad, grad_p, sigma, aux_p.stats)
    else:
        log_alpha = mala_exchange_log_alpha(model, s_obs, theta, theta_p, grad, grad_p, sigma, aux_p.first)
    if rng.random() < acceptance_probability(log_alpha):
        return ChainState(theta_p, grad_p, aux_p), True
    return state, False


def mala_exchange_step(model, y, state, config, rng, s_obs=None):
    """Langevin proposal from a cached gradient, exchange correction with y'_1."""
    return _mala_family_step(model, y, state, config, rng, s_obs, noisy=False)


def noisy_mala_exchange_step(model, y, state, config, rng, s_obs=None):
    """As :func:`mala_exchange_step` with the N-sample ratio estimator."""
    return _mala_family_step(model, y, state, config, rng, s_obs, noisy=True)


STEPS = {
    "exact-mh": exact_mh_step,
    "exchange": exchange_step,
    "noisy-exchange": noisy_exchange_step,
    "noisy-langevin": noisy_langevin_step,
    "mala-exchange": mala_exchange_step,
    "noisy-mala-exchange": noisy_mala_exchange_step,
}


def get_step(algorithm):
    try:
        return STEPS[algorithm]
    except KeyError:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}") from None


def run_chain(algorithm, model, y, config, theta0=None, rng=None):
    """Drive ``algorithm`` from ``theta0`` (default: prior mean) and record a Trace.

    With an iteration budget the trace is a deterministic function of
    (algorithm, model, data, config); ``rng`` overrides the seeded generator.
    """
    step = get_step(algorithm)
    if algorithm in ("noisy-langevin", "mala-exchange", "noisy-mala-exchange"):
        config.sigma(model.dim)
    if rng is None:
        rng = chain_rng(config.seed)
    theta0 = np.asarray(model.prior.mean, dtype=float) if theta0 is None else model.check_theta(theta0)
    s_obs = model.suffstats(y)
    state = ChainState(theta0.copy())
    n_max = np.inf if config.n_iter is None else int(config.n_iter)
    deadline = None if config.time_budget is None else time.perf_counter() + config.time_budget

    states = [theta0.copy()]
    accepted = [False]
    elapsed = [0]
    if algorithm in ("mala-exchange", "noisy-mala-exchange") and n_max > 0:
        state = init_mala_state(model, y, theta0, config, rng, s_obs)
    n = 0
    while n < n_max and (deadline is None or time.perf_counter() < deadline):
        t0 = time.perf_counter_ns()
        state, acc = step(model, y, state, config, rng, s_obs=s_obs)
        elapsed.append(time.perf_counter_ns() - t0)
        states.append(np.array(state.theta, dtype=float))
        accepted.append(bool(acc))
        n += 1
    meta = {
        "algorithm": algorithm,
        "model": describe_model(model),
        "config": config.to_dict(),
        "seed": config.seed,
    }
    return Trace(np.array(states), np.array(accepted), np.array(elapsed, dtype=np.int64), meta)


def describe_model(model):
    from .models import IsingModel

    if isinstance(model, IsingModel):
        out = {"kind": "ising", "height": model.height, "width": model.width}
    else:
        out = {"kind": "ergm", "n_nodes": model.n_nodes, "stats": list(model.stats)}
    out["prior_mean"] = list(model.prior.mean)
    out["prior_variance"] = list(model.prior.variance)
    return out
