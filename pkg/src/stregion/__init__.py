"""Batch inference engine for time-dependent regionalization of areal counts."""

__version__ = "0.1.0"

from .errors import (
    DisconnectedClusterError,
    DisconnectedGraphError,
    GraphError,
    InvariantError,
    StregionError,
    ValidationError,
)
from .gig import sample_gig
from .graph import (
    EdgeIndicatorVector,
    Partition,
    SpatialGraph,
    SpanningTree,
    assign_compatibility_weights,
    grid_graph,
    indicators_from_partition,
    is_compatible,
    partition_from_indicators,
    partition_is_contiguous,
    prim_mst,
    sample_compatible_tree,
)
from .likelihood import (
    Dataset,
    collapsed_cluster_marginal,
    compute_sir,
    conditional_poisson_loglik,
    dispersion_param,
    marginal_pig_loglik,
    mean_rate,
    pig_log_pmf,
    pig_log_pmf_array,
)
from .mcmc import ChainState, GibbsSampler, SampleStore, SamplerConfig, run_chain, run_chains
from .partition_prior import (
    LOG_ZERO,
    LatentSeries,
    PartitionPriorHyper,
    cluster_count_prior_moments,
    cluster_count_prior_pmf,
    elicitation_grid,
    is_log_zero,
    log_partition_prior,
    prior_predictive_partitions,
    rho_autocorrelation,
    sample_prior_latents,
)
from .postprocess import (
    PosteriorSummary,
    adjusted_rand_index,
    dispersion_indicators,
    lagged_ri_matrix,
    mean_variance_ratio,
    point_estimate_partition,
    rand_index,
    summarize_store,
    variation_of_information,
    waic,
)
from .synthetic import (
    ScenarioSpec,
    TruthRecord,
    builtin_scenarios,
    generate_dataset,
    grow_contiguous_partition,
    sim1_scenario,
    sim2_scenario,
    sim3_scenario,
)
