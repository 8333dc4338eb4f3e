"""Experiment drivers: Ising bias study, ERGM posterior runs, report emission."""

import json
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _svg
from .diagnostics import trace_summaries
from .errors import ConfigurationError, ContractViolation
from .io import fmt
from .models import ErgmModel, GaussianPrior, IsingModel
from .oracle import MAX_TRANSFER_HEIGHT, exact_posterior_grid
from .samplers import ALGORITHMS, SamplerConfig, describe_model, run_chain

GRADIENT_ALGORITHMS = ("noisy-langevin", "mala-exchange", "noisy-mala-exchange")


def derive_seed(master, *path):
    """64-bit seed for a sub-run, hashed from the master seed and its position."""
    return int(np.random.SeedSequence([int(master), *map(int, path)]).generate_state(1, np.uint64)[0])


@dataclass
class StudyConfig:
    """Settings of the Ising bias study.

    Proposal scales come from the exact grid posterior of each dataset:
    random-walk SD ``rw_mult * sd``; step matrices ``mala_mult * sd^2``
    (MALA family) and ``langevin_mult * sd^2`` (unadjusted Langevin).
    """

    n_datasets: int = 20
    height: int = 8
    width: int = 8
    true_theta: float = 0.3
    algorithms: tuple = ("exact-mh", "exchange", "noisy-exchange", "noisy-langevin")
    n_iter: int = 2000
    time_budget: float = None
    n_aux: dict = field(default_factory=lambda: {"noisy-exchange": 100, "noisy-langevin": 100,
                                                 "noisy-mala-exchange": 100})
    aux_burnin: int = 1000
    aux_thin: int = 4
    grid: tuple = (-0.4, 0.8, 241)
    prior_variance: float = 100.0
    data_sweeps: int = 1000
    burn_in: float = 0.2
    rw_mult: float = 2.4
    mala_mult: float = 1.5
    langevin_mult: float = 0.5
    out_dir: str = None
    seed: int = 0

    def __post_init__(self):
        if int(self.n_datasets) < 1:
            raise ConfigurationError("n_datasets must be >= 1")
        if min(self.height, self.width) > MAX_TRANSFER_HEIGHT:
            raise ConfigurationError(f"lattice too large for the exact oracle (shorter side > {MAX_TRANSFER_HEIGHT})")
        self.algorithms = tuple(self.algorithms)
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {a!r}")
        if self.n_iter is None and self.time_budget is None:
            raise ConfigurationError("set n_iter or time_budget")
        self.n_aux = dict(self.n_aux)
        self.grid = tuple(self.grid)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown study config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class StudyReport:
    kind: str
    config: dict
    algorithms: tuple
    tables: dict = field(default_factory=dict)
    figures: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)


def _sampler_config(study, algorithm, sd, seed):
    n_aux = int(study.n_aux.get(algorithm, 1))
    mult = study.langevin_mult if algorithm == "noisy-langevin" else study.mala_mult
    return SamplerConfig(
        n_aux=n_aux,
        aux_burnin=study.aux_burnin,
        aux_thin=study.aux_thin,
        rw_scale=study.rw_mult * sd,
        step_matrix=np.array([[mult * sd**2]]),
        seed=seed,
        n_iter=study.n_iter,
        time_budget=study.time_budget,
    )


def simulate_ising(model, theta, sweeps, rng):
    """One lattice from a long Gibbs run started at a random configuration."""
    u = rng.random(model.n_sites * (sweeps + 2))
    states, _ = model._run_kernel(np.atleast_1d(np.asarray(theta, dtype=float)), u, sweeps, 1, 1, True)
    return states[0]


def ising_bias_study(config):
    """Posterior-mean bias of each algorithm against the exact grid, over simulated datasets."""
    prior = GaussianPrior.isotropic(1, config.prior_variance)
    model = IsingModel(config.height, config.width, prior)
    grid_pts = np.linspace(*config.grid[:2], int(config.grid[2]))
    rows = []
    runs = []
    seconds = {a: 0.0 for a in config.algorithms}
    for d in range(int(config.n_datasets)):
        data_rng = np.random.default_rng(derive_seed(config.seed, d, 0))
        y = simulate_ising(model, config.true_theta, config.data_sweeps, data_rng)
        grid = exact_posterior_grid(model, y, grid_pts)
        g_mean, g_sd = grid.summaries()
        for k, alg in enumerate(config.algorithms):
            seed = derive_seed(config.seed, d, k + 1)
            cfg = _sampler_config(config, alg, g_sd, seed)
            t0 = time.perf_counter()
            trace = run_chain(alg, model, y, cfg)
            seconds[alg] += time.perf_counter() - t0
            summ = trace_summaries(trace, grid, burn_in=config.burn_in)
            rows.append({
                "dataset": d,
                "algorithm": alg,
                "n_aux": cfg.n_aux,
                "s_obs": float(model.suffstats(y)[0]),
                "grid_mean": g_mean,
                "grid_sd": g_sd,
                "chain_mean": float(summ.mean[0]),
                "chain_sd": float(summ.sd[0]),
                "bias": float(summ.bias[0]),
                "abs_bias": abs(float(summ.bias[0])),
                "ess": float(summ.ess[0]),
                "mcse": float(summ.mcse[0]),
                "acceptance": summ.acceptance_rate,
                "iterations": trace.n_iter,
            })
            runs.append({"dataset": d, "algorithm": alg, "seed": seed, "config": cfg.to_dict(),
                         "lattice": y.tolist()})
    report = StudyReport("ising-bias", config.to_dict(), config.algorithms, runs=runs,
                         timing={a: round(s, 3) for a, s in seconds.items()})
    if config.algorithms:
        cols = list(rows[0]) if rows else []
        report.tables["bias"] = (cols, [[r[c] for c in cols] for r in rows])
        agg = bias_aggregates(rows, config.algorithms)
        report.tables["bias_summary"] = (list(agg[0]), [list(a.values()) for a in agg])
        groups = {a: [r["bias"] for r in rows if r["algorithm"] == a] for a in config.algorithms}
        report.figures["bias_boxplot"] = _svg.boxplot(groups, "Posterior-mean bias per dataset", "bias", reference=0.0)
    return report


def bias_aggregates(rows, algorithms):
    out = []
    for a in algorithms:
        b = np.array([r["bias"] for r in rows if r["algorithm"] == a])
        n = len(b)
        se = float(np.abs(b).std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
        out.append({
            "algorithm": a,
            "datasets": n,
            "mean_bias": float(b.mean()),
            "median_bias": float(np.median(b)),
            "mean_abs_bias": float(np.abs(b).mean()),
            "se_abs_bias": se,
        })
    return out


def paired_abs_bias_difference(rows, a, b):
    """Mean over datasets of |bias_a| - |bias_b| and its standard error."""
    by = {}
    for r in rows:
        by.setdefault(r["dataset"], {})[r["algorithm"]] = abs(r["bias"])
    diffs = np.array([v[a] - v[b] for v in by.values() if a in v and b in v])
    if len(diffs) < 2:
        raise ContractViolation("need at least two datasets with both algorithms")
    return float(diffs.mean()), float(diffs.std(ddof=1) / np.sqrt(len(diffs)))


def table_rows(report, name):
    """A table of a report as a list of dicts."""
    cols, rows = report.tables[name]
    return [dict(zip(cols, r)) for r in rows]


# ---------------------------------------------------------------------------
# ERGM


@dataclass
class ErgmStudyConfig:
    stats: tuple = ("edges", "two-stars")
    algorithms: tuple = ("exchange", "noisy-exchange", "noisy-langevin", "mala-exchange", "noisy-mala-exchange")
    n_iter: int = 5000
    time_budget: float = None
    n_aux: dict = field(default_factory=lambda: {a: 50 for a in
                                                 ("noisy-exchange", "noisy-langevin", "mala-exchange",
                                                  "noisy-mala-exchange")})
    aux_burnin: int = 1000
    aux_thin: int = 4
    prior_variance: float = 100.0
    rw_scale: float = 0.1
    langevin_scale: float = 0.1
    tune_inline: bool = False
    hessian_draws: int = 4000
    burn_in: float = 0.2
    max_lag: int = 40
    density_bins: int = 40
    out_dir: str = None
    seed: int = 0

    def __post_init__(self):
        self.stats = tuple(self.stats)
        self.algorithms = tuple(self.algorithms)
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {a!r}")
        self.n_aux = dict(self.n_aux)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown ERGM study config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def ergm_study(config, graph, tuned=None):
    """Posterior means and SDs of every requested algorithm on one observed graph.

    ``tuned`` holds ``theta_star``, ``hessian`` and ``sigma`` (as written by
    the ``tune`` command).  Gradient-based algorithms need it, unless
    ``config.tune_inline`` asks for tuning here.  When a Hessian is available
    the random-walk proposal covariance is ``2.38^2 / m * (-H)^{-1}``.
    """
    from .models import as_state
    from .tuning import tune

    adj = as_state(graph)
    model = ErgmModel(adj.shape[0], config.stats, GaussianPrior.isotropic(len(config.stats), config.prior_variance))
    needs = [a for a in config.algorithms if a in GRADIENT_ALGORITHMS]
    if tuned is None and config.tune_inline:
        tcfg = SamplerConfig(n_aux=10, aux_burnin=config.aux_burnin, aux_thin=config.aux_thin,
                             seed=derive_seed(config.seed, 0))
        tuned = tune(model, adj, tcfg, n_draws=config.hessian_draws, pilot=False)
    if needs and tuned is None:
        raise ConfigurationError(
            f"{', '.join(needs)} need a step matrix: run `noisygrf tune` and pass --tuned, or set tune_inline"
        )
    m = model.dim
    theta0 = None
    rw_cov = None
    sigma = None
    if tuned is not None:
        theta0 = model.check_theta(tuned["theta_star"])
        hess = np.atleast_2d(np.asarray(tuned["hessian"], dtype=float))
        rw_cov = 2.38**2 / m * np.linalg.inv(-hess)
        sigma = np.atleast_2d(np.asarray(tuned["sigma"], dtype=float))
    summary_rows, layout_rows, acf_rows, dens_rows = [], [], [], []
    runs = []
    seconds = {}
    acf_series = {s: {} for s in model.stat_names}
    dens_series = {s: {} for s in model.stat_names}
    for k, alg in enumerate(config.algorithms):
        seed = derive_seed(config.seed, k + 1)
        step = None
        if sigma is not None:
            step = sigma * (config.langevin_scale if alg == "noisy-langevin" else 1.0)
        cfg = SamplerConfig(
            n_aux=int(config.n_aux.get(alg, 1)),
            aux_burnin=config.aux_burnin,
            aux_thin=config.aux_thin,
            step_matrix=step,
            rw_scale=config.rw_scale,
            rw_cov=rw_cov,
            seed=seed,
            n_iter=config.n_iter,
            time_budget=config.time_budget,
        )
        t0 = time.perf_counter()
        trace = run_chain(alg, model, adj, cfg, theta0=theta0)
        seconds[alg] = round(time.perf_counter() - t0, 3)
        summ = trace_summaries(trace, burn_in=config.burn_in, max_lag=config.max_lag)
        runs.append({"algorithm": alg, "seed": seed, "config": cfg.to_dict(),
                     "theta0": None if theta0 is None else theta0.tolist()})
        layout = [alg]
        draws = trace.samples(config.burn_in)
        for j, name in enumerate(model.stat_names):
            summary_rows.append([alg, name, float(summ.mean[j]), float(summ.sd[j]), float(summ.ess[j]),
                                 summ.acceptance_rate])
            layout.append(f"{summ.mean[j]:.3f} ({summ.sd[j]:.3f})")
            for lag, v in enumerate(summ.acf[j]):
                acf_rows.append([alg, name, lag, float(v)])
            hist, edges = np.histogram(draws[:, j], bins=config.density_bins, density=True)
            mids = 0.5 * (edges[1:] + edges[:-1])
            dens_rows.extend([alg, name, float(x), float(h)] for x, h in zip(mids, hist))
            acf_series[name][alg] = (np.arange(len(summ.acf[j])), summ.acf[j])
            dens_series[name][alg] = (mids, hist)
        layout_rows.append(layout)
    report = StudyReport("ergm", {**config.to_dict(), "model": describe_model(model)}, config.algorithms,
                         runs=runs, timing=seconds)
    if tuned is not None:
        report.config["tuned"] = {k: np.asarray(v).tolist() for k, v in tuned.items()
                                  if k in ("theta_star", "hessian", "sigma", "scale")}
    if config.algorithms:
        report.tables["posterior"] = (["algorithm", "statistic", "mean", "sd", "ess", "acceptance"], summary_rows)
        report.tables["posterior_layout"] = (["method"] + list(model.stat_names), layout_rows)
        report.tables["acf"] = (["algorithm", "statistic", "lag", "acf"], acf_rows)
        report.tables["density"] = (["algorithm", "statistic", "theta", "density"], dens_rows)
        for name in model.stat_names:
            report.figures[f"density_{name}"] = _svg.line_plot(dens_series[name], f"Posterior density: {name}",
                                                              "theta", "density")
            report.figures[f"acf_{name}"] = _svg.line_plot(acf_series[name], f"ACF: {name}", "lag", "acf",
                                                          bars=True)
    return report


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def write_table(cols, rows, path):
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            fh.write(",".join(_cell(v) for v in r) + "\n")


def versions():
    import numba
    import scipy

    from . import __version__

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "noisygrf": __version__}


def emit_report(report, out_dir):
    """Write CSV tables, SVG figures and ``manifest.json``; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    written = []
    for name, (cols, rows) in sorted(report.tables.items()):
        path = out / f"{name}.csv"
        write_table(cols, rows, path)
        written.append(path)
    for name, svg in sorted(report.figures.items()):
        path = out / f"{name}.svg"
        path.write_text(svg)
        written.append(path)
    manifest = {
        "kind": report.kind,
        "config": report.config,
        "master_seed": report.config.get("seed"),
        "algorithms": list(report.algorithms),
        "runs": report.runs,
        "timing_seconds": report.timing,
        "versions": versions(),
        "files": [p.name for p in written],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    written.append(path)
    return written


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")
