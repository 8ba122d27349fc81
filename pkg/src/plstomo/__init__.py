"""Projected least-squares state tomography for multi-node quantum systems."""

from .analysis import (
    FitResult,
    bernstein_params,
    effective_dimension,
    error_bound,
    failure_probability,
    fit_scaling,
    negativity,
    negativity_error_bound,
    negativity_qubit_split,
    proposition4_bound,
    sample_complexity,
    truncation_residual,
)
from .designs import (
    NodePartition,
    NodePovm,
    ProjectiveDesign,
    build_mubs,
    node_povm,
    povm_probabilities,
    verify_2design,
)
from .estimator import (
    LsEstimate,
    PlsEstimate,
    inverse_frame_map,
    ls_estimator,
    ls_via_normal_equations,
    pls_estimate,
    project_simplex,
)
from .linalg import (
    eigh_desc,
    kron_list,
    operator_norm,
    partial_trace,
    partial_transpose,
    trace_norm,
)
from .measurement import (
    FrequencyTable,
    exact_frequencies,
    read_table,
    sample_frequencies,
    sample_frequencies_noisy_global,
    write_table,
)
from .session import (
    OutcomeRecord,
    SessionConfig,
    aggregate_records,
    decode_record,
    encode_record,
    run_distributed_session,
)
from .states import (
    NoiseModel,
    boundary_link,
    depolarize_pair,
    ghz_state,
    haar_state,
    haar_unitary,
    locally_random_ghz,
    noisy_ghz,
    seeded_rng,
    state_rank,
)

__version__ = "0.1.0"
