"""Trace diagnostics: moments, autocorrelation, effective sample size, goodness of fit."""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ContractViolation


def acf(x, max_lag=50):
    """Sample autocorrelation at lags 0..max_lag (biased autocovariance, divided by n)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    max_lag = min(int(max_lag), n - 1)
    d = x - x.mean()
    c0 = d @ d / n
    if c0 == 0:
        out = np.zeros(max_lag + 1)
        out[0] = 1.0
        return out
    # zero-padded FFT gives the linear (not circular) autocovariance
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(d, size)
    cov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    return cov / c0


def effective_sample_size(x, max_lag=None):
    """n / (1 + 2 sum_l acf_l), summing until the first negative autocorrelation.

    Returns ``(ess, constant)``; a constant trace reports ess = n.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2 or np.all(x == x[0]):
        return float(n), True
    rho = acf(x, n - 1 if max_lag is None else max_lag)
    neg = np.nonzero(rho[1:] < 0)[0]
    stop = neg[0] + 1 if neg.size else len(rho)
    tau = 1.0 + 2.0 * rho[1:stop].sum()
    return float(min(n, n / tau)), False


@dataclass
class TraceSummary:
    n: int
    mean: np.ndarray
    sd: np.ndarray
    acf: np.ndarray
    ess: np.ndarray
    acceptance_rate: float
    constant: np.ndarray
    bias: np.ndarray = None
    mcse: np.ndarray = field(default=None)


def trace_summaries(trace, oracle=None, burn_in=0.2, max_lag=50):
    """Posterior moments, ACF and ESS of a chain after discarding ``burn_in``.

    ``trace`` is a :class:`~noisygrf.samplers.Trace` or an (n, m) / (n,)
    array of draws.  When an exact posterior grid is supplied, ``bias`` is
    the chain mean minus the grid mean.
    """
    if hasattr(trace, "samples"):
        if len(trace) < 10:
            raise ContractViolation("trace must contain at least 10 states")
        draws = trace.samples(burn_in)
        rate = trace.acceptance_rate
    else:
        arr = np.asarray(trace, dtype=float)
        if len(arr) < 10:
            raise ContractViolation("trace must contain at least 10 states")
        draws = arr[int(np.floor(burn_in * len(arr))):]
        rate = float("nan")
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if len(draws) == 0:
        raise ContractViolation("no draws left after burn-in")
    m = draws.shape[1]
    ess_const = [effective_sample_size(draws[:, k]) for k in range(m)]
    ess = np.array([e for e, _ in ess_const])
    constant = np.array([c for _, c in ess_const])
    sd = draws.std(axis=0, ddof=1) if len(draws) > 1 else np.zeros(m)
    sd[constant] = 0.0
    out = TraceSummary(
        n=len(draws),
        mean=draws.mean(axis=0),
        sd=sd,
        acf=np.array([acf(draws[:, k], max_lag) for k in range(m)]),
        ess=ess,
        acceptance_rate=rate,
        constant=constant,
        mcse=sd / np.sqrt(ess),
    )
    if oracle is not None:
        out.bias = out.mean - oracle.summaries()[0]
    return out


def _grid_cdf_at(grid, x):
    """Exact CDF of the piecewise-linear grid density at points ``x``."""
    t, p = grid.theta_grid, grid.density
    cum = grid.cdf()
    x = np.clip(np.asarray(x, dtype=float), t[0], t[-1])
    i = np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2)
    frac = x - t[i]
    slope = (p[i + 1] - p[i]) / (t[i + 1] - t[i])
    return cum[i] + frac * p[i] + 0.5 * slope * frac**2


@dataclass
class ChiSquareResult:
    statistic: float
    pvalue: float
    df: int
    n_used: int
    thin: int
    observed: np.ndarray
    expected: np.ndarray


def chisquare_against_grid(samples, grid, n_bins=20, thin=None):
    """Chi-squared goodness of fit of chain draws to an exact posterior grid.

    Bins are close to equal-probability under the grid density; expected
    counts use the exact grid CDF at the bin edges.  Correlated draws are
    thinned by ``ceil(n / ess)`` unless ``thin`` is given, since the test
    assumes independent observations.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if thin is None:
        ess, _ = effective_sample_size(x)
        thin = int(np.ceil(len(x) / max(ess, 1.0)))
    x = x[:: int(thin)]
    cum = grid.cdf()
    inner = np.interp(np.arange(1, n_bins) / n_bins, cum / cum[-1], grid.theta_grid)
    edges_cdf = np.concatenate([[0.0], _grid_cdf_at(grid, inner), [1.0]])
    expected = np.diff(edges_cdf) * len(x)
    idx = np.searchsorted(inner, x, side="right")
    observed = np.bincount(idx, minlength=n_bins).astype(float)
    res = stats.chisquare(observed, expected * observed.sum() / expected.sum())
    return ChiSquareResult(float(res.statistic), float(res.pvalue), n_bins - 1, len(x), int(thin), observed, expected)
