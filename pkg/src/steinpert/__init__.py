"""Stein's method by perturbation, on the integer lattice and for normal-type laws."""

from .distances import MetricKind, distance, kappa_bound, wasserstein_bruteforce
from .lattice import (
    CompoundPoissonSpec,
    DivergenceError,
    JumpRateSpec,
    PreconditionError,
    RecordsTail,
    SignedLatticeMeasure,
    bp_rates,
    compound_poisson,
    convolve,
    exp_rates,
    exp_rates_series,
    gf_eval,
    poisson_pmf,
)
from .models import (
    BernoulliSumModel,
    MarkovJumpModel,
    bp_error_bounds,
    eta1,
    exact_sum_pmf,
    markov_jump_equilibrium,
    poisson_binomial_pmf,
    random_jump_tv_bound,
    records_experiment,
    theta1,
)
from .normal import (
    ContinuousProblem,
    ContinuousTestFunction,
    GammaKind,
    characterization_residual,
    gamma_constants,
    hbar,
    stein_solve_normal,
    t_density,
    verify_normal_bounds,
)
from .stein import (
    CpToCpPerturbation,
    LatticeFunction,
    NormKind,
    PerturbationReport,
    a0_solve,
    apply_operator,
    bound_k_distance,
    bound_very_useful,
    gamma_cp_to_cp,
    gamma_empirical,
    gamma_upper,
    neumann_b,
    neumann_solve,
    p0_project,
    stein_factor_check,
)

__version__ = "0.1.0"
