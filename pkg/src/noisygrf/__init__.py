"""Exact and noisy MCMC for Gibbs random fields (Ising lattices, ERGMs)."""

__version__ = "0.1.0"

from .errors import (
    BoundViolation,
    ConfigurationError,
    ContractViolation,
    DivergenceError,
    GrfError,
    NoCertificateError,
    OracleRefusal,
    OutOfRegimeError,
    ParseError,
    SingularMatrixError,
)
from .models import (
    ErgmModel,
    GaussianPrior,
    IsingModel,
    SpinLattice,
    UndirectedGraph,
    change_statistic,
    ergm_suffstats,
    ising_suffstat,
    prior_log_grad_hess,
    unnorm_logdensity,
)
from .oracle import (
    PosteriorGrid,
    brute_force_logZ,
    exact_moments,
    exact_posterior_grid,
    grid_summaries,
    ising_transfer_logZ,
    log_partition,
)
from .samplers import ALGORITHMS, SamplerConfig, Trace, draw_auxiliary, run_chain
from .tuning import RmSchedule, estimate_log_posterior_hessian, robbins_monro_map, tune, tune_step_matrix
from .bounds import (
    ErgodicityCert,
    StochasticMatrix,
    noisy_exchange_kernel_bound,
    empirical_kernel_tv,
    ergodicity_cert,
    langevin_delta_bound,
    uniform_perturbation_bound,
    noisy_exchange_rate_constants,
    tv_kernel_distance,
    verify_perturbation,
)
from .diagnostics import TraceSummary, trace_summaries
from .io import load_graph, load_lattice
from .studies import StudyConfig, emit_report, ergm_study, ising_bias_study
