"""Exact ground truth for small Gibbs random fields.

Two routes to ``log Z(theta)``:

* enumeration of every configuration, compressed to the distinct values of
  the sufficient statistic and their multiplicities (cached per model
  structure, at most 2**24 configurations);
* a column-to-column transfer-matrix recursion for free-boundary Ising
  lattices of height <= 20, which also carries the first two derivatives of
  ``log Z`` so that exact moments come out of the same pass.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.special import logsumexp

from .errors import ContractViolation, OracleRefusal
from .models import ErgmModel, GaussianPrior, IsingModel, _stat_index

MAX_LOG2_STATES = 24
MAX_TRANSFER_HEIGHT = 20
_CHUNK_BITS = 18


# ---------------------------------------------------------------------------
# enumeration


def _check_enumerable(model):
    if model.log2_state_space > MAX_LOG2_STATES:
        raise OracleRefusal(
            f"state space of 2^{model.log2_state_space} configurations exceeds the "
            f"enumeration limit of 2^{MAX_LOG2_STATES} (Ising <= 24 sites, ERGM <= 7 nodes)"
        )


@lru_cache(maxsize=32)
def _ising_histogram(height, width):
    m = height * width
    edges = [(r * width + c, r * width + c + 1) for r in range(height) for c in range(width - 1)]
    edges += [(r * width + c, (r + 1) * width + c) for r in range(height - 1) for c in range(width)]
    n_edges = len(edges)
    counts = np.zeros(2 * n_edges + 1, dtype=np.int64)
    total = 1 << m
    step = 1 << min(_CHUNK_BITS, m)
    for start in range(0, total, step):
        x = np.arange(start, min(start + step, total), dtype=np.int64)
        disagree = np.zeros(x.shape, dtype=np.int64)
        for a, b in edges:
            disagree += ((x >> a) ^ (x >> b)) & 1
        counts += np.bincount(n_edges - 2 * disagree + n_edges, minlength=counts.size)
    values = np.arange(-n_edges, n_edges + 1, dtype=float)
    keep = counts > 0
    return values[keep][:, None], np.log(counts[keep].astype(float))


@lru_cache(maxsize=32)
def _ergm_histogram(n_nodes):
    dyads = list(combinations(range(n_nodes), 2))
    d = len(dyads)
    incidence = np.zeros((d, n_nodes), dtype=np.int64)
    for k, (i, j) in enumerate(dyads):
        incidence[k, i] = incidence[k, j] = 1
    pos = {dy: k for k, dy in enumerate(dyads)}
    triples = [(pos[(a, b)], pos[(a, c)], pos[(b, c)]) for a, b, c in combinations(range(n_nodes), 3)]
    acc = {}
    total = 1 << d
    step = 1 << min(_CHUNK_BITS, d)
    shifts = np.arange(d, dtype=np.int64)
    for start in range(0, total, step):
        x = np.arange(start, min(start + step, total), dtype=np.int64)
        bits = (x[:, None] >> shifts) & 1
        deg = bits @ incidence
        stats = np.empty((x.size, 4), dtype=np.int64)
        stats[:, 0] = bits.sum(axis=1)
        stats[:, 1] = (deg * (deg - 1) // 2).sum(axis=1)
        stats[:, 2] = (deg * (deg - 1) * (deg - 2) // 6).sum(axis=1)
        tri = np.zeros(x.size, dtype=np.int64)
        for a, b, c in triples:
            tri += bits[:, a] & bits[:, b] & bits[:, c]
        stats[:, 3] = tri
        rows, cnt = np.unique(stats, axis=0, return_counts=True)
        for row, c in zip(map(tuple, rows), cnt):
            acc[row] = acc.get(row, 0) + int(c)
    keys = sorted(acc)
    return np.array(keys, dtype=float), np.array([acc[k] for k in keys], dtype=np.int64)


def state_histogram(model):
    """Distinct sufficient-statistic values and log multiplicities over the state space.

    Returns ``(values, log_counts)`` with ``values`` of shape ``(K, m)``.
    """
    _check_enumerable(model)
    if isinstance(model, IsingModel):
        return _ising_histogram(model.height, model.width)
    if isinstance(model, ErgmModel):
        full, counts = _ergm_histogram(model.n_nodes)
        idx = _stat_index(model.stats)
        reduced, inverse = np.unique(full[:, idx], axis=0, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=counts.astype(float), minlength=len(reduced))
        return reduced, np.log(merged)
    raise TypeError(f"unsupported model {type(model).__name__}")


def iter_states(model):
    """Yield every configuration of a small model (intended for tests, <= 2**16)."""
    if model.log2_state_space > 16:
        raise OracleRefusal("explicit state iteration is limited to 2^16 configurations")
    if isinstance(model, IsingModel):
        m = model.n_sites
        for x in range(1 << m):
            bits = (x >> np.arange(m)) & 1
            yield (1 - 2 * bits).astype(np.int8).reshape(model.state_shape)
    else:
        sites = model.sites()
        for x in range(1 << len(sites)):
            adj = np.zeros(model.state_shape, dtype=np.uint8)
            for k, (i, j) in enumerate(sites):
                if (x >> k) & 1:
                    adj[i, j] = adj[j, i] = 1
            yield adj


def brute_force_logZ(model, theta):
    """log sum_y exp(theta . s(y)) by full enumeration."""
    values, log_counts = state_histogram(model)
    theta = model.check_theta(theta)
    return float(logsumexp(log_counts + values @ theta))


def _enum_weights(model, theta):
    values, log_counts = state_histogram(model)
    logw = log_counts + values @ model.check_theta(theta)
    return values, np.exp(logw - logsumexp(logw))


# ---------------------------------------------------------------------------
# transfer matrix


def _apply_row_bond(v, r, h, a, b):
    shaped = v.reshape(1 << r, 2, 1 << (h - r - 1))
    x0 = shaped[:, 0, :]
    x1 = shaped[:, 1, :]
    out = np.empty_like(shaped)
    out[:, 0, :] = a * x0 + b * x1
    out[:, 1, :] = b * x0 + a * x1
    return out.reshape(-1)


def _ising_transfer(height, width, theta, derivs=True):
    """Returns (log Z, d/dtheta log Z, d2/dtheta2 log Z); the derivatives are NaN when not requested."""
    h = int(height)
    if h > MAX_TRANSFER_HEIGHT:
        raise OracleRefusal(
            f"transfer matrix needs 2^height states; height {h} exceeds the limit {MAX_TRANSFER_HEIGHT}"
        )
    if h < 1 or width < 1:
        raise ContractViolation("lattice dimensions must be >= 1")
    t = float(theta)
    idx = np.arange(1 << h)
    # bit r of the column index is row r (row 0 is the most significant axis after reshape)
    spins = 1 - 2 * ((idx[:, None] >> (h - 1 - np.arange(h))) & 1)
    e_v = (spins[:, :-1] * spins[:, 1:]).sum(axis=1).astype(float)
    f_off = float(np.max(t * e_v))
    f = np.exp(t * e_v - f_off)
    log_acc = f_off
    v0, v1, v2 = f, e_v * f, e_v**2 * f
    a, b = np.exp(t), np.exp(-t)
    if not derivs:
        v = f
        for _ in range(width - 1):
            for r in range(h):
                v = _apply_row_bond(v, r, h, a, b)
            v = v * f
            c = v.max()
            v = v / c
            log_acc += np.log(c) + f_off
        return float(log_acc + np.log(v.sum())), float("nan"), float("nan")
    for _ in range(width - 1):
        for r in range(h):
            t0 = _apply_row_bond(v0, r, h, a, b)
            tp0 = _apply_row_bond(v0, r, h, a, -b)
            t1 = _apply_row_bond(v1, r, h, a, b)
            tp1 = _apply_row_bond(v1, r, h, a, -b)
            t2 = _apply_row_bond(v2, r, h, a, b)
            v0, v1, v2 = t0, tp0 + t1, t0 + 2 * tp1 + t2
            c = v0.max()
            v0, v1, v2 = v0 / c, v1 / c, v2 / c
            log_acc += np.log(c)
        v0, v1, v2 = v0 * f, (v1 + e_v * v0) * f, (v2 + 2 * e_v * v1 + e_v**2 * v0) * f
        c = v0.max()
        v0, v1, v2 = v0 / c, v1 / c, v2 / c
        log_acc += np.log(c) + f_off
    z = v0.sum()
    mean = v1.sum() / z
    return float(log_acc + np.log(z)), float(mean), float(v2.sum() / z - mean**2)


def ising_transfer_logZ(height, width, theta):
    """Exact log Z of a free-boundary Ising lattice via column recursion."""
    return _ising_transfer(height, width, float(np.atleast_1d(theta)[0]), derivs=False)[0]


# ---------------------------------------------------------------------------
# dispatch


def _prefer_enumeration(model):
    if isinstance(model, IsingModel):
        return model.n_sites <= 20 or min(model.height, model.width) > MAX_TRANSFER_HEIGHT
    return True


def _transfer_dims(model):
    # the recursion runs along the longer side
    h, w = model.height, model.width
    return (h, w) if h <= w else (w, h)


def log_partition(model, theta):
    """log Z(theta) by the cheapest exact route available."""
    if _prefer_enumeration(model):
        return brute_force_logZ(model, theta)
    theta = model.check_theta(theta)
    return _ising_transfer(*_transfer_dims(model), theta[0], derivs=False)[0]


def exact_moments(model, theta):
    """Mean vector and covariance matrix of s(y) under f(. | theta)."""
    theta = model.check_theta(theta)
    if _prefer_enumeration(model):
        values, w = _enum_weights(model, theta)
        mean = w @ values
        centred = values - mean
        cov = (centred * w[:, None]).T @ centred
        return mean, 0.5 * (cov + cov.T)
    _, mean, var = _ising_transfer(*_transfer_dims(model), theta[0])
    return np.array([mean]), np.array([[var]])


def log_partition_grid(model, grid):
    grid = np.asarray(grid, dtype=float)
    if model.dim != 1:
        raise ContractViolation("grid evaluation is for one-parameter models")
    if _prefer_enumeration(model):
        values, log_counts = state_histogram(model)
        return logsumexp(log_counts[None, :] + grid[:, None] * values[None, :, 0], axis=1)
    dims = _transfer_dims(model)
    return np.array([_ising_transfer(*dims, t, derivs=False)[0] for t in grid])


def exact_ratio_moments(model, theta, theta_prime):
    """Mean and variance of q_theta(y')/q_theta'(y') for y' ~ f(. | theta').

    The mean equals Z(theta)/Z(theta'); both are computed by enumeration.
    """
    theta = model.check_theta(theta)
    theta_prime = model.check_theta(theta_prime)
    values, w = _enum_weights(model, theta_prime)
    ratio = np.exp(values @ (theta - theta_prime))
    mean = float(w @ ratio)
    var = float(w @ (ratio - mean) ** 2)
    return mean, var


def exact_sample_stats(model, theta, size, rng):
    """Independent draws of s(y) under f(. | theta) from the enumerated distribution."""
    values, w = _enum_weights(model, theta)
    return values[rng.choice(len(w), size=size, p=w)]


# ---------------------------------------------------------------------------
# posterior grid


@dataclass
class PosteriorGrid:
    theta_grid: np.ndarray
    log_unnorm: np.ndarray
    log_normalizer: float
    density: np.ndarray

    @property
    def normalizer(self):
        return float(np.exp(self.log_normalizer))

    def argmax(self):
        return float(self.theta_grid[np.argmax(self.log_unnorm)])

    def cell_masses(self):
        """Trapezoid mass of each grid cell (length len(grid) - 1)."""
        return 0.5 * np.diff(self.theta_grid) * (self.density[1:] + self.density[:-1])

    def cdf(self):
        return np.concatenate([[0.0], np.cumsum(self.cell_masses())])

    def summaries(self):
        return grid_summaries(self)


def _trapezoid(y, x):
    return float(np.sum(0.5 * np.diff(x) * (y[1:] + y[:-1])))


def exact_posterior_grid(model, y, grid, prior=None):
    """Normalised posterior over a 1-D grid using exact log Z and the trapezoid rule.

    ``prior`` defaults to ``model.prior``; pass ``"flat"`` for a constant prior.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ContractViolation("grid must be a strictly increasing vector with >= 2 points")
    if model.dim != 1:
        raise ContractViolation("posterior grids are for one-parameter models")
    s_obs = model.suffstats(y)[0]
    log_unnorm = grid * s_obs - log_partition_grid(model, grid)
    if prior is None:
        prior = model.prior
    if prior != "flat":
        if not isinstance(prior, GaussianPrior):
            raise ContractViolation("prior must be a GaussianPrior, None or 'flat'")
        log_unnorm = log_unnorm + np.array([prior.logpdf([t]) for t in grid])
    shift = log_unnorm.max()
    unnorm = np.exp(log_unnorm - shift)
    mass = _trapezoid(unnorm, grid)
    return PosteriorGrid(grid, log_unnorm, float(shift + np.log(mass)), unnorm / mass)


def grid_summaries(grid):
    """Trapezoid posterior mean and standard deviation."""
    x, p = grid.theta_grid, grid.density
    mean = _trapezoid(x * p, x)
    var = _trapezoid((x - mean) ** 2 * p, x)
    return mean, float(np.sqrt(max(var, 0.0)))


def default_grid(lo=-0.4, hi=0.8, points=241):
    return np.linspace(lo, hi, points)
