"""Boosting variational inference with small-bandwidth Gaussian mixtures.

The package approximates a posterior by greedily adding isotropic Gaussian
components from a constrained family (means in a ball, bandwidths in a narrow
band) and certifies each iterate with curvature-based rate bounds. It also
ships the frequentist replication harness used to stress the theory on
conjugate targets.
"""

from .boosting import (
    BoostConfig,
    BoostStep,
    BoostTrace,
    rate_bound,
    rate_bound_optimistic,
    required_iterations,
    run_boost,
    step_record,
    step_size,
)
from .divergences import (
    CurvatureReport,
    DivergenceEstimate,
    MonteCarloBudget,
    QuadratureBudget,
    bregman_divergence,
    chi2_pair_bound,
    curvature_bound,
    curvature_bound_optimistic,
    kl_between_mixtures,
    kl_to_target,
    sample_curvature,
)
from .estimator import VariationalBooster
from .family import (
    FamilyConstraints,
    GaussianMixture,
    IsotropicGaussian,
    ValidityRegionError,
    chi2_gaussian_gaussian,
    convex_update,
    hellinger_gaussian,
    kl_gaussian_gaussian,
)
from .lmo import LmoConfig, LmoResult, lmo_grid_oracle, lmo_objective, solve_lmo
from .seeding import derive_seed, rng_from
from .targets import (
    ConjugateGaussianModel,
    Dataset,
    ExpFamilyAudit,
    ExponentialFamilyModel,
    PosteriorTarget,
    audit_exponential_family,
    bernoulli_family,
    gaussian_mean_family,
    reference_component,
    save_dataset,
)
from .validation import (
    ExperimentReport,
    ReferenceKlDecomposition,
    ReplicationPlan,
    boundedness_experiment,
    bvm_experiment,
    convergence_experiment,
    convergence_sweep,
    decompose_reference_kl,
    gaussian_hellinger,
    gaussian_kl,
    ks_distance,
    tv_bounds_from_hellinger,
)

__version__ = "0.1.0"

__all__ = [
    "BoostConfig",
    "BoostStep",
    "BoostTrace",
    "ConjugateGaussianModel",
    "CurvatureReport",
    "Dataset",
    "DivergenceEstimate",
    "ExpFamilyAudit",
    "ExperimentReport",
    "ExponentialFamilyModel",
    "FamilyConstraints",
    "GaussianMixture",
    "IsotropicGaussian",
    "LmoConfig",
    "LmoResult",
    "MonteCarloBudget",
    "PosteriorTarget",
    "QuadratureBudget",
    "ReferenceKlDecomposition",
    "ReplicationPlan",
    "ValidityRegionError",
    "VariationalBooster",
    "audit_exponential_family",
    "bernoulli_family",
    "boundedness_experiment",
    "bregman_divergence",
    "bvm_experiment",
    "chi2_gaussian_gaussian",
    "chi2_pair_bound",
    "convergence_experiment",
    "convergence_sweep",
    "convex_update",
    "curvature_bound",
    "curvature_bound_optimistic",
    "decompose_reference_kl",
    "derive_seed",
    "gaussian_hellinger",
    "gaussian_kl",
    "gaussian_mean_family",
    "hellinger_gaussian",
    "kl_between_mixtures",
    "kl_gaussian_gaussian",
    "kl_to_target",
    "ks_distance",
    "lmo_grid_oracle",
    "lmo_objective",
    "rate_bound",
    "rate_bound_optimistic",
    "reference_component",
    "required_iterations",
    "rng_from",
    "run_boost",
    "step_record",
    "sample_curvature",
    "save_dataset",
    "solve_lmo",
    "step_size",
    "tv_bounds_from_hellinger",
]
