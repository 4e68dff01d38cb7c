"""hybridsa: vanishing-step-size simulation and limit analysis of hybrid inclusions."""

from .hybrid_time import (
    HybridArc,
    HybridMapping,
    HybridSequence,
    HybridSequenceDomain,
    HybridTime,
    HybridTimeDomain,
    concatenate,
    closeness_measure,
    generalized_concatenate,
    graph_closeness,
    length,
    split_long,
    split_long_stream,
    tail,
    truncate,
)
from .system import (
    HybridSystem,
    InflatedSystem,
    SetRegion,
    SetValuedMap,
    check_hbc,
    dwell_automaton,
    dwell_compatible,
    inflate,
    restrict,
    verify_solution,
)
from .simulate import (
    Horizon,
    JumpPolicy,
    PREFER_FLOW,
    PREFER_JUMP,
    SimulationResult,
    StepSchedule,
    benaim_sup,
    chi_correction,
    compress,
    euler_simulate,
    gap_scan,
    interpolate,
)
from .stochastic import (
    JumpNoiseModel,
    NoiseModel,
    RandomRun,
    empirical_benaim_decay,
    jump_noise_schedule,
    noisy_simulate,
    validate_moment_branch,
    validate_subgaussian_branch,
)
from .analyze import (
    Chain,
    ReachGraph,
    build_reach_graph,
    chain_recurrent_estimate,
    find_chain,
    omega_estimate,
    tail_closeness_diagnostic,
    verify_chain,
    weak_invariance_probe,
)

__version__ = "0.1.0"
