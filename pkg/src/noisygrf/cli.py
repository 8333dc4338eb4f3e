"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or configuration, 3 the exact oracle
refused the instance, 4 a bound was violated (``verify-bounds``).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import BoundViolation, GrfError, OracleRefusal
from .io import fmt, load_data, load_graph, load_json, load_lattice, save_json, write_trace_csv
from .models import ErgmModel, GaussianPrior, IsingModel, as_state


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config file)")
    p.add_argument("--out-dir", default=None, help="directory for emitted files")
    p.add_argument("--config", default=None, help="JSON configuration file")


def _model_for(kind, data, stats=None, prior_mean=None, prior_variance=100.0):
    y = as_state(data)
    if kind == "ising":
        dim = 1
        prior = GaussianPrior(prior_mean if prior_mean is not None else (0.0,) * dim, prior_variance)
        return IsingModel(y.shape[0], y.shape[1], prior), y
    stats = tuple(stats or ("edges", "two-stars"))
    dim = len(stats)
    prior = GaussianPrior(prior_mean if prior_mean is not None else (0.0,) * dim, prior_variance)
    return ErgmModel(y.shape[0], stats, prior), y


def _load_config(path):
    return {} if path is None else load_json(path)


def _out_path(args, name):
    out = Path(args.out_dir) if args.out_dir else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def cmd_exact_posterior(args):
    from .oracle import exact_posterior_grid

    lattice = load_lattice(args.lattice)
    prior = "flat" if args.prior_sd <= 0 else GaussianPrior((0.0,), (args.prior_sd**2,))
    model = IsingModel(lattice.height, lattice.width)
    grid = exact_posterior_grid(model, lattice.spins, np.linspace(args.theta_min, args.theta_max, args.grid_points),
                                prior)
    lines = ["theta,density"] + [f"{fmt(t)},{fmt(d)}" for t, d in zip(grid.theta_grid, grid.density)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    elif args.out_dir:
        _out_path(args, "posterior.csv").write_text(text)
    else:
        sys.stdout.write(text)
    return 0


_MODEL_KEYS = ("stats", "prior_mean", "prior_variance", "theta0")


def cmd_run(args):
    from .samplers import SamplerConfig, run_chain

    raw = _load_config(args.config)
    model_opts = {k: raw.pop(k) for k in _MODEL_KEYS if k in raw}
    if args.seed is not None:
        raw["seed"] = args.seed
    config = SamplerConfig.from_dict(raw)
    model, y = _model_for(args.model, load_data(args.model, args.data), model_opts.get("stats"),
                          model_opts.get("prior_mean"), model_opts.get("prior_variance", 100.0))
    trace = run_chain(args.algorithm, model, y, config, theta0=model_opts.get("theta0"))
    out = Path(args.out) if args.out else _out_path(args, "trace.csv")
    write_trace_csv(trace, out)
    print(f"{args.algorithm}: {trace.n_iter} iterations, acceptance {trace.acceptance_rate:.3f} -> {out}")
    return 0


def cmd_tune(args):
    from .samplers import SamplerConfig
    from .tuning import RmSchedule, tune

    raw = _load_config(args.config)
    model_opts = {k: raw.pop(k) for k in _MODEL_KEYS if k in raw}
    sched = {k: raw.pop(k) for k in ("a", "b", "tol", "max_iter", "patience") if k in raw}
    n_draws = int(raw.pop("hessian_draws", args.hessian_draws))
    target = float(raw.pop("target", args.target))
    if args.seed is not None:
        raw["seed"] = args.seed
    raw.setdefault("n_aux", 10)
    config = SamplerConfig.from_dict(raw)
    stats = model_opts.get("stats") or (args.stats.split(",") if args.stats else None)
    model, y = _model_for(args.model, load_data(args.model, args.data), stats,
                          model_opts.get("prior_mean"), model_opts.get("prior_variance", 100.0))
    result = tune(model, y, config, RmSchedule(**sched), n_draws=n_draws, target=target,
                  pilot=not args.no_pilot)
    result["stats"] = list(model.stat_names)
    out = Path(args.out) if args.out else _out_path(args, "tuned.json")
    save_json(result, out)
    print(f"theta* = {np.round(result['theta_star'], 4).tolist()}, scale {result['scale']:.3g}, "
          f"acceptance {result['acceptance']:.3f} -> {out}")
    return 0


def cmd_ising_study(args):
    from .studies import StudyConfig, emit_report, ising_bias_study, table_rows

    raw = _load_config(args.config)
    for key in ("n_datasets", "height", "width", "n_iter"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    if args.seed is not None:
        raw["seed"] = args.seed
    config = StudyConfig.from_dict(raw)
    report = ising_bias_study(config)
    out = args.out_dir or config.out_dir or "ising_study"
    emit_report(report, out)
    if config.algorithms:
        for row in table_rows(report, "bias_summary"):
            print(f"{row['algorithm']:>20}  mean |bias| {row['mean_abs_bias']:.4f} (se {row['se_abs_bias']:.4f})")
    print(f"report written to {out}")
    return 0


def cmd_ergm_run(args):
    from .studies import ErgmStudyConfig, emit_report, ergm_study

    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.stats:
        raw["stats"] = args.stats.split(",")
    if args.n_iter is not None:
        raw["n_iter"] = args.n_iter
    config = ErgmStudyConfig.from_dict(raw)
    tuned = load_json(args.tuned) if args.tuned else None
    report = ergm_study(config, load_graph(args.data), tuned)
    out = args.out_dir or config.out_dir or "ergm_run"
    emit_report(report, out)
    if config.algorithms:
        cols, rows = report.tables["posterior_layout"]
        print("  ".join(f"{c:>20}" for c in cols))
        for r in rows:
            print("  ".join(f"{c:>20}" for c in r))
    print(f"report written to {out}")
    return 0


def cmd_verify_bounds(args):
    from .bounds import verify_random_pairs

    seed = 0 if args.seed is None else args.seed
    report = verify_random_pairs(args.states, args.pairs, args.kappa_max, args.n_max, seed)
    text = json.dumps(report, indent=2) + "\n"
    if args.out_dir:
        _out_path(args, "bounds_report.json").write_text(text)
    sys.stdout.write(text)
    if report["violations"]:
        raise BoundViolation(f"{report['violations']} of {report['pairs_tested']} kernel pairs violated the bound")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="noisygrf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact-posterior", help="exact grid posterior of an Ising lattice")
    _common(p)
    p.add_argument("--lattice", required=True)
    p.add_argument("--theta-min", type=float, default=-0.4)
    p.add_argument("--theta-max", type=float, default=0.8)
    p.add_argument("--grid-points", type=int, default=241)
    p.add_argument("--prior-sd", type=float, default=10.0, help="Gaussian prior SD (default 10; 0 for a flat prior)")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_exact_posterior)

    p = sub.add_parser("run", help="run one sampler and write its trace")
    _common(p)
    p.add_argument("--algorithm", required=True)
    p.add_argument("--model", choices=("ising", "ergm"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("tune", help="MAP search and step-matrix tuning")
    _common(p)
    p.add_argument("--model", choices=("ising", "ergm"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--stats", default=None, help="comma-separated ERGM statistics")
    p.add_argument("--hessian-draws", type=int, default=4000)
    p.add_argument("--target", type=float, default=0.25)
    p.add_argument("--no-pilot", action="store_true", help="skip the acceptance-rate scale search")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("ising-study", help="bias study over simulated Ising datasets")
    _common(p)
    p.add_argument("--n-datasets", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--n-iter", type=int, default=None)
    p.set_defaults(func=cmd_ising_study)

    p = sub.add_parser("ergm-run", help="posterior summaries for an observed graph")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--tuned", default=None, help="tuned.json from the tune command")
    p.add_argument("--stats", default=None)
    p.add_argument("--n-iter", type=int, default=None)
    p.set_defaults(func=cmd_ergm_run)

    p = sub.add_parser("verify-bounds", help="check the perturbation bound on random finite kernels")
    _common(p)
    p.add_argument("--states", type=int, default=8)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--kappa-max", type=float, default=0.05)
    p.add_argument("--n-max", type=int, default=200)
    p.set_defaults(func=cmd_verify_bounds)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BoundViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OracleRefusal as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (GrfError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
