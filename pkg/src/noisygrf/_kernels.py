"""Compiled systematic-scan Gibbs kernels.

All randomness enters through a pre-drawn array of uniforms ``u`` so that a
``numpy.random.Generator`` fully determines every draw.  Layout of ``u``:
one value per site for the initial configuration, then one per site per
sweep, sites visited in row-major (Ising) or lexicographic-dyad (ERGM) order.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def ising_stat(spins):
    h, w = spins.shape
    s = 0
    for r in range(h):
        for c in range(w):
            if c + 1 < w:
                s += spins[r, c] * spins[r, c + 1]
            if r + 1 < h:
                s += spins[r, c] * spins[r + 1, c]
    return s


@njit(cache=True)
def _ising_sweeps(spins, s, p_plus, u, k, n_sweeps):
    h, w = spins.shape
    for _ in range(n_sweeps):
        for r in range(h):
            for c in range(w):
                nb = 0
                if r > 0:
                    nb += spins[r - 1, c]
                if r + 1 < h:
                    nb += spins[r + 1, c]
                if c > 0:
                    nb += spins[r, c - 1]
                if c + 1 < w:
                    nb += spins[r, c + 1]
                new = 1 if u[k] < p_plus[nb + 4] else -1
                k += 1
                old = spins[r, c]
                if new != old:
                    s += (new - old) * nb
                    spins[r, c] = new
    return s, k


@njit(cache=True)
def ising_draw(spins, theta, u, init, burnin, thin, count, out_states, out_stats):
    """Run the auxiliary schedule in place on ``spins``.

    Collected state ``j`` (0-based) is the configuration after
    ``burnin + (j + 1) * thin`` sweeps.  ``out_states`` may have leading
    dimension 0 to skip storing configurations.
    """
    h, w = spins.shape
    k = 0
    if init:
        for r in range(h):
            for c in range(w):
                spins[r, c] = 1 if u[k] < 0.5 else -1
                k += 1
    # P(y_i = +1 | neighbour sum nb), indexed by nb + 4
    p_plus = np.empty(9)
    for j in range(9):
        p_plus[j] = 1.0 / (1.0 + np.exp(-2.0 * theta * (j - 4)))
    s = ising_stat(spins)
    s, k = _ising_sweeps(spins, s, p_plus, u, k, burnin)
    store = out_states.shape[0] > 0
    for j in range(count):
        s, k = _ising_sweeps(spins, s, p_plus, u, k, thin)
        out_stats[j] = s
        if store:
            out_states[j, :, :] = spins


@njit(cache=True)
def ergm_stats(adj):
    """(edges, two-stars, three-stars, triangles) of a symmetric 0/1 matrix."""
    n = adj.shape[0]
    out = np.zeros(4)
    for i in range(n):
        d = 0
        for j in range(n):
            d += adj[i, j]
        out[0] += d
        out[1] += d * (d - 1) / 2.0
        out[2] += d * (d - 1) * (d - 2) / 6.0
    out[0] /= 2.0
    tri = 0
    for i in range(n):
        for j in range(i + 1, n):
            if adj[i, j]:
                for k in range(j + 1, n):
                    if adj[i, k] and adj[j, k]:
                        tri += 1
    out[3] = tri
    return out


@njit(cache=True)
def ergm_change(adj, deg, i, j):
    """Change in the four statistics when dyad (i, j) goes from off to on.

    ``deg`` must be the degrees of ``adj`` with the (i, j) edge removed.
    """
    di = deg[i]
    dj = deg[j]
    common = 0
    for k in range(adj.shape[0]):
        if adj[i, k] and adj[j, k]:
            common += 1
    return (1.0, di + dj, di * (di - 1) / 2.0 + dj * (dj - 1) / 2.0, float(common))


@njit(cache=True)
def _ergm_sweeps(adj, deg, s, theta4, u, k, n_sweeps):
    n = adj.shape[0]
    for _ in range(n_sweeps):
        for i in range(n):
            for j in range(i + 1, n):
                cur = adj[i, j]
                if cur:
                    deg[i] -= 1
                    deg[j] -= 1
                d0, d1, d2, d3 = ergm_change(adj, deg, i, j)
                eta = theta4[0] * d0 + theta4[1] * d1 + theta4[2] * d2 + theta4[3] * d3
                on = u[k] < 1.0 / (1.0 + np.exp(-eta))
                k += 1
                if on:
                    deg[i] += 1
                    deg[j] += 1
                    if not cur:
                        adj[i, j] = 1
                        adj[j, i] = 1
                        s[0] += d0
                        s[1] += d1
                        s[2] += d2
                        s[3] += d3
                elif cur:
                    adj[i, j] = 0
                    adj[j, i] = 0
                    s[0] -= d0
                    s[1] -= d1
                    s[2] -= d2
                    s[3] -= d3
    return k


@njit(cache=True)
def ergm_draw(adj, theta4, u, init, burnin, thin, count, out_states, out_stats):
    n = adj.shape[0]
    k = 0
    if init:
        for i in range(n):
            adj[i, i] = 0
            for j in range(i + 1, n):
                v = 1 if u[k] < 0.5 else 0
                adj[i, j] = v
                adj[j, i] = v
                k += 1
    deg = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            deg[i] += adj[i, j]
    s = ergm_stats(adj)
    k = _ergm_sweeps(adj, deg, s, theta4, u, k, burnin)
    store = out_states.shape[0] > 0
    for c in range(count):
        k = _ergm_sweeps(adj, deg, s, theta4, u, k, thin)
        out_stats[c, :] = s
        if store:
            out_states[c, :, :] = adj
