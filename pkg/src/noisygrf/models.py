"""Gibbs random field likelihoods: Ising lattices and undirected ERGMs.

Both families have the exponential-family form ``q_theta(y) = exp(theta . s(y))``
with ``s`` the vector of sufficient statistics.  Simulation states are plain
numpy arrays (``int8`` spins in {-1, +1}, ``uint8`` symmetric adjacency); the
``SpinLattice`` / ``UndirectedGraph`` wrappers validate user-supplied data.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import _kernels
from .errors import ContractViolation

STAT_NAMES = ("edges", "two-stars", "three-stars", "triangles")

_STAT_ALIASES = {
    "edges": "edges",
    "edge": "edges",
    "two-stars": "two-stars",
    "2-stars": "two-stars",
    "twostars": "two-stars",
    "kstar2": "two-stars",
    "three-stars": "three-stars",
    "3-stars": "three-stars",
    "threestars": "three-stars",
    "kstar3": "three-stars",
    "triangles": "triangles",
    "triangle": "triangles",
}


@dataclass(eq=False)
class SpinLattice:
    spins: np.ndarray

    def __post_init__(self):
        spins = np.asarray(self.spins)
        if spins.ndim != 2 or spins.shape[0] < 1 or spins.shape[1] < 1:
            raise ContractViolation(f"lattice must be a non-empty 2-D grid, got shape {spins.shape}")
        if not np.all((spins == 1) | (spins == -1)):
            raise ContractViolation("lattice entries must be -1 or +1")
        self.spins = spins.astype(np.int8)

    @property
    def height(self):
        return self.spins.shape[0]

    @property
    def width(self):
        return self.spins.shape[1]


@dataclass(eq=False)
class UndirectedGraph:
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise ContractViolation(f"adjacency must be square and non-empty, got shape {adj.shape}")
        if not np.all((adj == 0) | (adj == 1)):
            raise ContractViolation("adjacency entries must be 0 or 1")
        if not np.array_equal(adj, adj.T):
            raise ContractViolation("adjacency must be symmetric")
        if np.any(np.diag(adj) != 0):
            raise ContractViolation("self-loops are not allowed")
        self.adjacency = adj.astype(np.uint8)

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n_nodes, edges):
        adj = np.zeros((n_nodes, n_nodes), dtype=np.uint8)
        for i, j in edges:
            adj[i, j] = adj[j, i] = 1
        return cls(adj)

    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))


def as_state(y):
    """Raw array view of a state given as a wrapper or an array."""
    if isinstance(y, SpinLattice):
        return y.spins
    if isinstance(y, UndirectedGraph):
        return y.adjacency
    return np.asarray(y)


@dataclass(frozen=True)
class GaussianPrior:
    """Independent Gaussian prior; defaults to N(0, 100) per coordinate."""

    mean: tuple
    variance: tuple

    def __post_init__(self):
        mean = tuple(float(v) for v in np.atleast_1d(self.mean))
        var = tuple(float(v) for v in np.atleast_1d(self.variance))
        if len(var) == 1 and len(mean) > 1:
            var = var * len(mean)
        if len(mean) != len(var):
            raise ContractViolation("prior mean and variance lengths differ")
        if any(v <= 0 or not np.isfinite(v) for v in var):
            raise ContractViolation("prior variances must be positive and finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @classmethod
    def isotropic(cls, dim, variance=100.0, mean=0.0):
        return cls((mean,) * dim, (variance,) * dim)

    @property
    def dim(self):
        return len(self.mean)

    def logpdf(self, theta):
        """Normalised log density."""
        theta = np.asarray(theta, dtype=float)
        mu = np.asarray(self.mean)
        var = np.asarray(self.variance)
        return float(-0.5 * np.sum((theta - mu) ** 2 / var + np.log(2 * np.pi * var)))

    def grad(self, theta):
        return -(np.asarray(theta, dtype=float) - np.asarray(self.mean)) / np.asarray(self.variance)


def prior_log_grad_hess(prior, theta):
    """Log density (up to a constant), gradient and Hessian of a Gaussian prior."""
    theta = _check_theta(theta, prior.dim)
    mu = np.asarray(prior.mean)
    var = np.asarray(prior.variance)
    logp = float(-0.5 * np.sum((theta - mu) ** 2 / var))
    return logp, -(theta - mu) / var, np.diag(-1.0 / var)


def _check_theta(theta, dim):
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (dim,):
        raise ContractViolation(f"parameter must have length {dim}, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ContractViolation("parameter entries must be finite")
    return theta


class GrfModel:
    """Common interface of the Gibbs random field families.

    Subclasses provide ``dim``, ``stat_names``, ``stat_bound``, ``n_sites``,
    ``state_shape``, ``suffstats``, ``change_statistic`` and the compiled
    auxiliary-draw hook ``_run_kernel``.
    """

    prior: GaussianPrior

    def check_theta(self, theta):
        return _check_theta(theta, self.dim)

    def unnorm_logdensity(self, theta, y):
        theta = self.check_theta(theta)
        return float(theta @ self.suffstats(y))

    def random_state(self, rng):
        raise NotImplementedError

    @property
    def log2_state_space(self):
        return self.n_sites

    def with_prior(self, prior):
        raise NotImplementedError


def ising_suffstat(lattice):
    """Sum of y_i * y_j over horizontally and vertically adjacent pairs."""
    spins = as_state(lattice)
    return np.array([float(_kernels.ising_stat(np.ascontiguousarray(spins, dtype=np.int8)))])


def ergm_suffstats(graph, stats=STAT_NAMES):
    """Edge, k-star (sum_i C(deg_i, k)) and triangle counts, canonical order."""
    adj = np.ascontiguousarray(as_state(graph), dtype=np.uint8)
    full = _kernels.ergm_stats(adj)
    return full[_stat_index(stats)]


def canonical_stats(stats):
    names = []
    for s in stats:
        key = _STAT_ALIASES.get(str(s).lower())
        if key is None:
            raise ContractViolation(f"unknown ERGM statistic {s!r}; choose from {STAT_NAMES}")
        names.append(key)
    if not names:
        raise ContractViolation("at least one ERGM statistic is required")
    if len(set(names)) != len(names):
        raise ContractViolation("duplicate ERGM statistics")
    return tuple(n for n in STAT_NAMES if n in names)


def _stat_index(stats):
    return np.array([STAT_NAMES.index(n) for n in canonical_stats(stats)])


@dataclass(frozen=True)
class IsingModel(GrfModel):
    """Free-boundary, nearest-neighbour Ising model with a single interaction parameter."""

    height: int
    width: int
    prior: GaussianPrior = field(default=None)

    def __post_init__(self):
        if int(self.height) < 1 or int(self.width) < 1:
            raise ContractViolation("lattice dimensions must be >= 1")
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "width", int(self.width))
        if self.prior is None:
            object.__setattr__(self, "prior", GaussianPrior.isotropic(1))
        elif self.prior.dim != 1:
            raise ContractViolation("Ising prior must be one-dimensional")

    dim = 1
    stat_names = ("ising",)

    @property
    def n_edges(self):
        return self.height * (self.width - 1) + self.width * (self.height - 1)

    @property
    def n_sites(self):
        return self.height * self.width

    @property
    def state_shape(self):
        return (self.height, self.width)

    @property
    def stat_bound(self):
        return float(self.n_edges)

    def with_prior(self, prior):
        return IsingModel(self.height, self.width, prior)

    def suffstats(self, y):
        spins = as_state(y)
        if spins.shape != self.state_shape:
            raise ContractViolation(f"expected lattice of shape {self.state_shape}, got {spins.shape}")
        return ising_suffstat(spins)

    def site_index(self, site):
        if np.ndim(site) == 0:
            site = divmod(int(site), self.width)
        r, c = (int(v) for v in site)
        if not (0 <= r < self.height and 0 <= c < self.width):
            raise ContractViolation(f"site {site} outside a {self.height}x{self.width} lattice")
        return r, c

    def sites(self):
        return [(r, c) for r in range(self.height) for c in range(self.width)]

    def neighbour_sum(self, y, site):
        spins = as_state(y)
        r, c = self.site_index(site)
        nb = 0
        if r > 0:
            nb += spins[r - 1, c]
        if r + 1 < self.height:
            nb += spins[r + 1, c]
        if c > 0:
            nb += spins[r, c - 1]
        if c + 1 < self.width:
            nb += spins[r, c + 1]
        return int(nb)

    def change_statistic(self, y, site):
        """Change in s(y) when the spin at ``site`` is flipped."""
        spins = as_state(y)
        r, c = self.site_index(site)
        return np.array([-2.0 * spins[r, c] * self.neighbour_sum(spins, (r, c))])

    def conditional_on(self, theta, y, site):
        """P(y_site = +1 | rest)."""
        t = self.check_theta(theta)[0]
        nb = self.neighbour_sum(y, site)
        return float(1.0 / (1.0 + np.exp(-2.0 * t * nb)))

    def set_site(self, y, site, value):
        spins = as_state(y)
        spins[self.site_index(site)] = 1 if value else -1

    def random_state(self, rng):
        return np.where(rng.random(self.state_shape) < 0.5, 1, -1).astype(np.int8)

    def _run_kernel(self, theta, u, burnin, thin, count, store):
        spins = np.empty(self.state_shape, dtype=np.int8)
        states = np.empty((count if store else 0,) + self.state_shape, dtype=np.int8)
        stats = np.empty(count)
        _kernels.ising_draw(spins, float(theta[0]), u, True, burnin, thin, count, states, stats)
        return states, stats[:, None]


@dataclass(frozen=True)
class ErgmModel(GrfModel):
    """Undirected ERGM on a fixed node set with a subset of the four count statistics."""

    n_nodes: int
    stats: tuple = ("edges", "two-stars")
    prior: GaussianPrior = field(default=None)

    def __post_init__(self):
        if int(self.n_nodes) < 2:
            raise ContractViolation("an ERGM needs at least two nodes")
        object.__setattr__(self, "n_nodes", int(self.n_nodes))
        object.__setattr__(self, "stats", canonical_stats(self.stats))
        if self.prior is None:
            object.__setattr__(self, "prior", GaussianPrior.isotropic(len(self.stats)))
        elif self.prior.dim != len(self.stats):
            raise ContractViolation("prior dimension does not match the statistic count")

    @property
    def dim(self):
        return len(self.stats)

    @property
    def stat_names(self):
        return self.stats

    @property
    def n_sites(self):
        return comb(self.n_nodes, 2)

    @property
    def state_shape(self):
        return (self.n_nodes, self.n_nodes)

    @property
    def stat_bound(self):
        n = self.n_nodes
        full = np.array([comb(n, 2), n * comb(n - 1, 2), n * comb(n - 1, 3), comb(n, 3)], dtype=float)
        return float(np.linalg.norm(full[_stat_index(self.stats)]))

    def with_prior(self, prior):
        return ErgmModel(self.n_nodes, self.stats, prior)

    def full_theta(self, theta):
        out = np.zeros(4)
        out[_stat_index(self.stats)] = self.check_theta(theta)
        return out

    def suffstats(self, y):
        adj = as_state(y)
        if adj.shape != self.state_shape:
            raise ContractViolation(f"expected adjacency of shape {self.state_shape}, got {adj.shape}")
        return ergm_suffstats(adj, self.stats)

    def site_index(self, site):
        if np.ndim(site) == 0:
            site = self.sites()[int(site)]
        i, j = (int(v) for v in site)
        if not (0 <= i < j < self.n_nodes):
            raise ContractViolation(f"dyad {site} must satisfy 0 <= i < j < {self.n_nodes}")
        return i, j

    def sites(self):
        n = self.n_nodes
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    def _delta_on(self, adj, i, j):
        deg = adj.sum(axis=1).astype(np.int64)
        if adj[i, j]:
            deg[i] -= 1
            deg[j] -= 1
        full = np.array(_kernels.ergm_change(np.ascontiguousarray(adj, dtype=np.uint8), deg, i, j))
        return full[_stat_index(self.stats)]

    def change_statistic(self, y, site):
        """Change in s(y) when the dyad ``site`` is toggled."""
        adj = as_state(y)
        i, j = self.site_index(site)
        delta = self._delta_on(adj, i, j)
        return -delta if adj[i, j] else delta

    def conditional_on(self, theta, y, site):
        """P(edge (i, j) present | rest of the graph)."""
        i, j = self.site_index(site)
        eta = self.check_theta(theta) @ self._delta_on(as_state(y), i, j)
        return float(1.0 / (1.0 + np.exp(-eta)))

    def set_site(self, y, site, value):
        adj = as_state(y)
        i, j = self.site_index(site)
        adj[i, j] = adj[j, i] = 1 if value else 0

    def random_state(self, rng):
        n = self.n_nodes
        upper = np.triu(rng.random((n, n)) < 0.5, 1)
        return (upper | upper.T).astype(np.uint8)

    def _run_kernel(self, theta, u, burnin, thin, count, store):
        adj = np.zeros(self.state_shape, dtype=np.uint8)
        states = np.empty((count if store else 0,) + self.state_shape, dtype=np.uint8)
        stats = np.empty((count, 4))
        _kernels.ergm_draw(adj, self.full_theta(theta), u, True, burnin, thin, count, states, stats)
        return states, stats[:, _stat_index(self.stats)]


def unnorm_logdensity(model, theta, y):
    """log q_theta(y) = theta . s(y)."""
    return model.unnorm_logdensity(theta, y)


def change_statistic(model, y, site):
    return model.change_statistic(y, site)
