"""Decentralized secure state tracking for networked sensing of LTI plants."""
from .adversary import (
    NO_ATTACK,
    AttackPlan,
    CompanionDrift,
    ConsistentFakeState,
    Jump,
    generate_attack,
    local_sanity_check,
)
from .compress import CompressionMatrix, design_compression, identity_compression, kernel_basis, validate_compression
from .decoder import DecodeResult, SsrDecoder, error_bound_beta, propagate_estimate, slack_reduction, solve_ssr, ssr_decode
from .detect import is_detectable, is_dsst_solvable, is_sparse_detectable_wrt, sparse_detectability_index
from .errors import (
    AttackPlanError,
    BudgetExceeded,
    CertificationError,
    ConfigError,
    DecoderRankError,
    DsstError,
    GraphError,
    ScenarioError,
    WarmupError,
)
from .graph import CommGraph, build_graph, check_connected, complete_graph, cycle_graph, laplacian_extremes, path_graph
from .model import (
    LtiSystem,
    MeasurementWindow,
    characteristic_polynomial,
    check_assumption6,
    companion_form,
    discretize,
    observability_stack,
)
from .sim import (
    Scenario,
    ScenarioTrace,
    fit_decay_rate,
    reference_scenario,
    run_scenario,
    validate_scenario,
    write_trace_csv,
)
from .tracker import TrackerGains, TrackerState, init_tracker, select_gains, tracker_step, verify_gain_stability

__version__ = "0.1.0"
