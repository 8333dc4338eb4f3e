"""Perturbation bounds for Markov kernels and their exact finite-state checks.

A perturbed kernel P_hat stays close to P in n-step law whenever P is
uniformly ergodic: with ||delta P^n - pi|| <= C rho^n,

    ||delta P^n - delta P_hat^n|| <= (lambda + C rho^lambda / (1 - rho)) ||P - P_hat||,
    lambda = ceil(log(1/C) / log rho).

Finite kernels are handled exactly; continuous samplers are connected to
the theory through histogram TV estimates and discretised grid kernels.
"""

from dataclasses import dataclass, field
from math import ceil, log, sqrt, pi as PI
from itertools import combinations_with_replacement

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import norm

from .errors import BoundViolation, ContractViolation, NoCertificateError, OutOfRegimeError
from .oracle import _enum_weights, log_partition_grid

RHO_FLOOR = 1e-15
ROW_SUM_TOL = 1e-12


class StochasticMatrix:
    """Validated row-stochastic matrix."""

    def __init__(self, rows):
        rows = np.array(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1] or rows.shape[0] == 0:
            raise ContractViolation(f"kernel must be a non-empty square matrix, got shape {rows.shape}")
        if np.any(rows < 0) or not np.all(np.isfinite(rows)):
            raise ContractViolation("kernel entries must be finite and non-negative")
        if np.max(np.abs(rows.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ContractViolation("kernel rows must sum to 1")
        self.rows = rows

    @property
    def n(self):
        return self.rows.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def stationary(self):
        """Stationary distribution from the leading left eigenvector."""
        vals, vecs = np.linalg.eig(self.rows.T)
        v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
        v = np.abs(v)
        return v / v.sum()


def _rows(P):
    return P.rows if isinstance(P, StochasticMatrix) else StochasticMatrix(P).rows


def tv_kernel_distance(P, Phat):
    """sup over starting states of the TV distance between one-step laws."""
    a, b = _rows(P), _rows(Phat)
    if a.shape != b.shape:
        raise ContractViolation(f"kernel shapes differ: {a.shape} vs {b.shape}")
    return float(np.max(0.5 * np.abs(a - b).sum(axis=1)))


def is_primitive(P):
    """True when some power of P is entrywise positive.

    A primitive n x n matrix has a positive power at (n-1)^2 + 1 and every
    later power stays positive, so repeated squaring settles the question.
    """
    a = _rows(P) > 0
    n = a.shape[0]
    target = (n - 1) ** 2 + 1
    power = 1
    m = a.astype(np.int64)
    while power < target:
        m = (m @ m > 0).astype(np.int64)
        power *= 2
    return bool(np.all(m > 0))


@dataclass(frozen=True)
class ErgodicityCert:
    c: float
    rho: float
    method: str

    def __post_init__(self):
        if not (0 < self.rho < 1) or self.c < 1:
            raise ContractViolation(f"invalid certificate constants C={self.c}, rho={self.rho}")

    def prefactor(self):
        lam = mixing_lambda(self.c, self.rho)
        return lam + self.c * self.rho**lam / (1 - self.rho)


def dobrushin_coefficient(P):
    """max over row pairs of the TV distance between rows."""
    a = _rows(P)
    best = 0.0
    for i in range(a.shape[0]):
        best = max(best, float(np.max(0.5 * np.abs(a[i] - a).sum(axis=1))))
    return best


def minorization_mass(P):
    """epsilon = sum_j min_i P_ij, the one-step Doeblin mass."""
    return float(np.sum(_rows(P).min(axis=0)))


def ergodicity_cert(P, method="best"):
    """Certificate (C, rho) with ||delta_i P^n - pi|| <= C rho^n.

    ``method`` is "dobrushin" (C = 1), "minorization" (C = 2) or "best",
    which keeps whichever certificate gives the smaller perturbation
    prefactor lambda + C rho^lambda / (1 - rho).
    """
    if method not in ("best", "dobrushin", "minorization"):
        raise ContractViolation(f"unknown certificate method {method!r}")
    if not is_primitive(P):
        raise NoCertificateError("kernel is not irreducible and aperiodic")
    certs = []
    if method in ("best", "dobrushin"):
        rho = dobrushin_coefficient(P)
        if rho < 1 - 1e-15:
            certs.append(ErgodicityCert(1.0, max(rho, RHO_FLOOR), "dobrushin"))
    if method in ("best", "minorization"):
        eps = minorization_mass(P)
        if eps > 1e-15:
            certs.append(ErgodicityCert(2.0, max(1.0 - eps, RHO_FLOOR), "minorization"))
    if not certs:
        raise NoCertificateError(
            "Dobrushin coefficient is 1 and no state is reachable from every state in one step"
        )
    return min(certs, key=lambda c: c.prefactor())


def mixing_lambda(c, rho):
    rho = max(float(rho), RHO_FLOOR)
    if c <= 1:
        return 0
    return max(0, int(ceil(log(1.0 / c) / log(rho))))


def uniform_perturbation_bound(cert, kappa):
    """(lambda, (lambda + C rho^lambda / (1 - rho)) * kappa)."""
    if kappa < 0:
        raise ContractViolation("kappa must be non-negative")
    rho = max(cert.rho, RHO_FLOOR)
    lam = mixing_lambda(cert.c, rho)
    return lam, (lam + cert.c * rho**lam / (1.0 - rho)) * kappa


@dataclass
class BoundReport:
    kappa: float
    lam: int
    bound: float
    per_n_tv: np.ndarray
    cert: ErgodicityCert
    violated: bool
    telescoping_violated: bool = False

    @property
    def worst_slack(self):
        return float(self.bound - self.per_n_tv.max()) if len(self.per_n_tv) else float(self.bound)

    def check(self):
        if self.violated or self.telescoping_violated:
            raise BoundViolation(
                f"n-step TV {self.per_n_tv.max():.3g} exceeds bound {self.bound:.3g} (kappa={self.kappa:.3g})"
            )
        return self


def n_step_tv(P, Phat, start, n_max):
    """Exact ||delta_start P^n - delta_start P_hat^n|| for n = 1..n_max."""
    a, b = _rows(P), _rows(Phat)
    if not 0 <= start < a.shape[0]:
        raise ContractViolation(f"start state {start} out of range")
    mu = np.zeros(a.shape[0])
    mu[start] = 1.0
    nu = mu.copy()
    out = np.empty(int(n_max))
    for n in range(int(n_max)):
        mu = mu @ a
        nu = nu @ b
        out[n] = 0.5 * np.abs(mu - nu).sum()
    return out


def verify_perturbation(P, Phat, start=0, n_max=200, cert=None, tol=1e-12):
    """Compare exact n-step TV distances with the uniform-in-n bound.

    Also checks the trivial telescoping bound TV_n <= n * kappa.
    """
    cert = ergodicity_cert(P) if cert is None else cert
    kappa = tv_kernel_distance(P, Phat)
    lam, bound = uniform_perturbation_bound(cert, kappa)
    tv = n_step_tv(P, Phat, start, n_max)
    n = np.arange(1, len(tv) + 1)
    return BoundReport(
        kappa=kappa,
        lam=lam,
        bound=bound,
        per_n_tv=tv,
        cert=cert,
        violated=bool(np.any(tv > bound + tol)),
        telescoping_violated=bool(np.any(tv > n * kappa + tol)),
    )


def random_kernel(n, rng, concentration=1.0):
    return rng.dirichlet(np.full(n, concentration), size=n)


def random_kernel_pair(n, kappa_max, rng):
    """P with Dirichlet rows and P_hat = (1 - t) P + t Q, so ||P - P_hat|| <= t <= kappa_max."""
    P = random_kernel(n, rng)
    Q = random_kernel(n, rng)
    t = rng.uniform(0, kappa_max)
    return P, (1 - t) * P + t * Q


def verify_random_pairs(n_states, n_pairs, kappa_max, n_max, seed):
    """Run verify_perturbation on random pairs; returns a JSON-friendly summary."""
    rng = np.random.default_rng(seed)
    violations = 0
    worst = np.inf
    for _ in range(int(n_pairs)):
        P, Phat = random_kernel_pair(int(n_states), kappa_max, rng)
        start = int(rng.integers(n_states))
        rep = verify_perturbation(P, Phat, start, n_max)
        violations += int(rep.violated or rep.telescoping_violated)
        worst = min(worst, rep.worst_slack)
    return {"pairs_tested": int(n_pairs), "violations": violations, "worst_slack": float(worst)}


# ---------------------------------------------------------------------------
# exchange-family kernels on a parameter grid


def _log_posterior_grid(model, y, grid, prior):
    prior = model.prior if prior is None else prior
    s_obs = model.suffstats(y)[0]
    lp = grid * s_obs - log_partition_grid(model, grid)
    return lp + np.array([prior.logpdf([t]) for t in grid])


def _log_target_ratio(model, y, grid, prior):
    # log [pi(theta') q_theta'(y)] - log [pi(theta) q_theta(y)], rows theta, columns theta'
    prior = model.prior if prior is None else prior
    s_obs = model.suffstats(y)[0]
    lt = grid * s_obs + np.array([prior.logpdf([t]) for t in grid])
    return lt[None, :] - lt[:, None]


def ratio_sd_grid(model, grid):
    """sd of q_theta(y')/q_theta'(y') under y' ~ f(. | theta'), rows theta, columns theta'."""
    out = np.empty((len(grid), len(grid)))
    for j, tp in enumerate(grid):
        values, w = _enum_weights(model, np.array([tp]))
        d = grid[:, None] - tp
        log_r = d * values[None, :, 0]
        log_m1 = logsumexp(log_r, b=w[None, :], axis=1)
        log_m2 = logsumexp(2 * log_r, b=w[None, :], axis=1)
        var = np.exp(log_m2) - np.exp(2 * log_m1)
        out[:, j] = np.sqrt(np.maximum(var, 0.0))
    return out


def acceptance_error_grid(model, y, grid, N, prior=None):
    """delta(theta, theta') on a grid for a symmetric proposal (h cancels)."""
    if int(N) < 1:
        raise ContractViolation("N must be >= 1")
    grid = np.asarray(grid, dtype=float)
    return np.exp(_log_target_ratio(model, y, grid, prior)) * ratio_sd_grid(model, grid) / sqrt(N)


def _proposal_weights(grid, proposal_sd):
    """Row-normalised Gaussian random-walk proposal restricted to the grid."""
    w = norm.pdf(grid[None, :], loc=grid[:, None], scale=proposal_sd)
    return w / w.sum(axis=1, keepdims=True)


def grid_exact_mh_kernel(model, y, grid, proposal_sd, prior=None):
    """Metropolis-Hastings kernel on the grid with exact normalising constants."""
    grid = np.asarray(grid, dtype=float)
    lp = _log_posterior_grid(model, y, grid, prior)
    h = _proposal_weights(grid, proposal_sd)
    alpha = np.exp(np.minimum(0.0, lp[None, :] - lp[:, None]))
    return _fill_diagonal(h * alpha)


def _fill_diagonal(P):
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def _multisets(n_values, N):
    """Every count vector of N draws over n_values categories, with log multinomial coefficients."""
    counts = []
    for combo in combinations_with_replacement(range(n_values), N):
        counts.append(np.bincount(combo, minlength=n_values))
    counts = np.array(counts, dtype=float)
    log_coef = gammaln(N + 1) - gammaln(counts + 1).sum(axis=1)
    return counts, log_coef


def grid_noisy_exchange_kernel(model, y, grid, proposal_sd, N, prior=None, max_multisets=200000):
    """Noisy-exchange kernel on the grid with exact auxiliary draws.

    E[min(1, alpha_hat)] is computed exactly by summing over the multinomial
    distribution of the N auxiliary statistics, so only models with few
    distinct statistic values are practical.  N = 1 gives the exchange kernel.
    """
    grid = np.asarray(grid, dtype=float)
    log_tr = _log_target_ratio(model, y, grid, prior)
    h = _proposal_weights(grid, proposal_sd)
    acc = np.empty((len(grid), len(grid)))
    counts = log_coef = None
    for j, tp in enumerate(grid):
        values, w = _enum_weights(model, np.array([tp]))
        values = values[:, 0]
        if counts is None:
            n_ms = _count_multisets(len(values), int(N))
            if n_ms > max_multisets:
                raise ContractViolation(f"{n_ms} auxiliary count vectors exceed the limit {max_multisets}")
            counts, log_coef = _multisets(len(values), int(N))
        with np.errstate(divide="ignore"):
            p = np.exp(log_coef + counts @ np.log(w))
        # sum_i q_theta(y'_i) / q_theta'(y'_i) for every grid theta and count vector
        ratio_sum = np.exp((grid[:, None] - tp) * values[None, :]) @ counts.T
        log_alpha = log_tr[:, j][:, None] + np.log(ratio_sum / N)
        acc[:, j] = np.exp(np.minimum(0.0, log_alpha)) @ p
    return _fill_diagonal(h * acc)


def _count_multisets(k, N):
    from math import comb

    return comb(N + k - 1, k - 1)


@dataclass
class KernelBoundTerms:
    kappa_bound: float
    prefactor: float
    bound: float
    cert: ErgodicityCert
    row_integrals: np.ndarray = field(repr=False)


def noisy_exchange_kernel_terms(model, y, grid, proposal_sd, N, cert=None, prior=None, rule="trapezoid"):
    """Kernel-distance bound sup_theta int h(theta'|theta) delta(theta, theta') dtheta'.

    ``rule="trapezoid"`` integrates the Gaussian proposal density over the
    grid; ``rule="discrete"`` uses the grid-restricted proposal weights, which
    bounds the grid kernels of :func:`grid_exact_mh_kernel` and
    :func:`grid_noisy_exchange_kernel` exactly.  The certificate defaults to
    the one for the exact-MH grid kernel.
    """
    if model.dim != 1:
        raise ContractViolation("grid bounds need a one-parameter model")
    grid = np.asarray(grid, dtype=float)
    delta = acceptance_error_grid(model, y, grid, N, prior)
    if rule == "trapezoid":
        dens = norm.pdf(grid[None, :], loc=grid[:, None], scale=proposal_sd) * delta
        rows = np.sum(0.5 * np.diff(grid)[None, :] * (dens[:, 1:] + dens[:, :-1]), axis=1)
    elif rule == "discrete":
        h = _proposal_weights(grid, proposal_sd)
        np.fill_diagonal(h, 0.0)
        rows = (h * delta).sum(axis=1)
    else:
        raise ContractViolation(f"unknown rule {rule!r}")
    if cert is None:
        cert = ergodicity_cert(grid_exact_mh_kernel(model, y, grid, proposal_sd, prior))
    kappa = float(rows.max())
    prefactor = cert.prefactor()
    return KernelBoundTerms(kappa, prefactor, prefactor * kappa, cert, rows)


def noisy_exchange_kernel_bound(model, y, grid, proposal_sd, N, cert=None, prior=None, rule="trapezoid"):
    """Uniform-in-n bound on the exact-MH vs noisy-exchange n-step TV distance."""
    return noisy_exchange_kernel_terms(model, y, grid, proposal_sd, N, cert, prior, rule).bound


# ---------------------------------------------------------------------------
# closed-form constants


@dataclass(frozen=True)
class RateConstants:
    rho: float
    c: float
    lam: int
    prefactor: float
    total_bound: float


def noisy_exchange_rate_constants(c_pi, c_h, K, N):
    """Rate constants of the noisy-exchange kernel under bounded densities and statistics.

    rho = 1 - 1/(c_pi^3 c_h^3 K^4), C = 2, and the n-step TV bound is
    c_pi^2 c_h^2 K^4 (lambda + C rho^lambda / (1 - rho)) / sqrt(N).
    """
    if min(c_pi, c_h, K) < 1:
        raise ContractViolation("c_pi, c_h and K must all be >= 1")
    if N < 1:
        raise ContractViolation("N must be >= 1")
    rho = max(1.0 - 1.0 / (c_pi**3 * c_h**3 * K**4), RHO_FLOOR)
    c = 2.0
    lam = mixing_lambda(c, rho)
    prefactor = c_pi**2 * c_h**2 * K**4 * (lam + c * rho**lam / (1.0 - rho))
    return RateConstants(rho, c, lam, prefactor, prefactor / sqrt(N))


@dataclass(frozen=True)
class LangevinDelta:
    delta: float
    kernel_bound: float
    kernel_bound_sqrt: float
    threshold: float


def langevin_delta_bound(k, S, sigma_norm, N):
    """delta(N) for the noisy Langevin drift and the implied kernel distance.

    delta = exp(k log N / (4 S^2 |Sigma|^2 N)) - 1 + 4 k sqrt(pi) S |Sigma| / N,
    valid once N > 4 k S^2 |Sigma|^2.  ``kernel_bound`` is sqrt(delta / 2);
    ``kernel_bound_sqrt`` is the looser sqrt(delta).
    """
    if k < 1 or S <= 0 or sigma_norm <= 0:
        raise ContractViolation("need k >= 1, S > 0 and |Sigma| > 0")
    a = 4.0 * S**2 * sigma_norm**2
    threshold = k * a
    if not N > threshold:
        raise OutOfRegimeError(f"need N > 4 k S^2 |Sigma|^2 = {threshold:g}, got N = {N:g}")
    delta = np.expm1(k * log(N) / (a * N)) + 4.0 * k * sqrt(PI) * S * sigma_norm / N
    return LangevinDelta(float(delta), sqrt(delta / 2.0), sqrt(delta), threshold)


# ---------------------------------------------------------------------------
# Monte Carlo one-step TV for continuous-state samplers


@dataclass
class EmpiricalTV:
    tv: float
    se: float
    n_reps: int
    bins: int


def histogram_tv(a, b, x0, bins):
    """TV between two one-step samples: atom at x0 plus shared-bin histogram of moves."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    stay_a, stay_b = a == x0, b == x0
    moved = np.concatenate([a[~stay_a], b[~stay_b]])
    tv = abs(stay_a.mean() - stay_b.mean())
    if moved.size:
        lo, hi = moved.min(), moved.max()
        if hi == lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        ha = np.histogram(a[~stay_a], edges)[0] / len(a)
        hb = np.histogram(b[~stay_b], edges)[0] / len(b)
        tv += np.abs(ha - hb).sum()
    return 0.5 * float(tv)


def empirical_kernel_tv(step_fn_a, step_fn_b, theta0, n_reps=10000, bins=None, seed=0, n_boot=200):
    """Histogram estimate of ||delta_theta0 P_a - delta_theta0 P_b|| with a bootstrap SE.

    Each step function maps ``(theta0, rng)`` to the next state.  Both use
    generators built from the same ``seed``, so identical functions give
    identical samples.
    """
    n_reps = int(n_reps)
    bins = int(ceil(n_reps ** (1.0 / 3.0))) if bins is None else int(bins)
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if theta0.size != 1:
        raise ContractViolation("empirical kernel TV is for one-parameter samplers")
    x0 = float(theta0[0])
    draws = []
    for fn in (step_fn_a, step_fn_b):
        rng = np.random.default_rng(seed)
        draws.append(np.array([float(np.atleast_1d(fn(theta0.copy(), rng))[0]) for _ in range(n_reps)]))
    a, b = draws
    tv = histogram_tv(a, b, x0, bins)
    brng = np.random.default_rng([seed, 1])
    boot = [
        histogram_tv(a[brng.integers(n_reps, size=n_reps)], b[brng.integers(n_reps, size=n_reps)], x0, bins)
        for _ in range(int(n_boot))
    ]
    return EmpiricalTV(tv, float(np.std(boot, ddof=1)), n_reps, bins)


def one_step_function(algorithm, model, y, config):
    """Adapter turning a sampler step into ``fn(theta0, rng) -> theta1``."""
    from .samplers import ChainState, get_step, init_mala_state

    step = get_step(algorithm)
    s_obs = model.suffstats(y)

    def fn(theta0, rng):
        state = ChainState(np.array(theta0, dtype=float))
        if algorithm in ("mala-exchange", "noisy-mala-exchange"):
            state = init_mala_state(model, y, state.theta, config, rng, s_obs)
        return step(model, y, state, config, rng, s_obs=s_obs)[0].theta

    return fn
