"""Exact and Monte Carlo comparison of Glauber stationary laws.

The package certifies, at desk scale, that moments of spin systems on
d-regular expander graphs track their complete-graph (Curie-Weiss)
counterparts, via a Poisson-equation comparison inequality checked by full
enumeration and by seeded Monte Carlo at larger sizes.
"""

from .ising import (
    InteractionMatrix,
    MomentFunction,
    as_spins,
    conditional_prob_plus,
    conditional_tv,
    curie_weiss,
    hamiltonian,
    lattice_round,
    load_interaction,
    magnetization,
    random_interaction,
    save_interaction,
)
from .graphs import (
    SimpleGraph,
    SpectralReport,
    complete_graph,
    disjoint_cliques,
    interaction_from_graph,
    load_graph,
    random_regular,
    save_graph,
    spectral_deviation,
    spectral_report,
)
from .exact import (
    ExactDistribution,
    GlauberKernel,
    PoissonSolution,
    SteinReport,
    dobrushin_bound_check,
    exact_distribution,
    glauber_kernel,
    solve_poisson,
    spectral_tv_bound_check,
    stein_report,
    symmetric_kl_exact,
    wasserstein_pushforward,
)
from .mcmc import (
    BirthDeathChain,
    ChainState,
    ContractionProfile,
    CoupledPair,
    MagnetizationHistogram,
    MomentEstimate,
    birth_death_hitting,
    band_comparison_chain,
    coalescence_times,
    contraction_check,
    contraction_profile,
    coupled_run,
    estimate_moments,
    estimate_pair_correlations,
    estimate_symmetric_kl,
    glauber_run,
    magnetization_samples,
    new_chain,
    new_pair,
    restricted_run,
    rng_stream,
    sample_configurations,
    spin_sum_series,
)
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentResult,
    make_config,
    run_experiment,
    write_result,
)
from .reporting import CheckRecord, RunManifest, write_csv

__version__ = "0.1.0"
