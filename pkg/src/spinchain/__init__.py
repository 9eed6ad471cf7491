"""Large deviations, pressures, factorization constants and Chernoff bounds
for translation-invariant states on quantum spin chains."""

from .errors import (
    CapExceededError,
    DimensionError,
    HypothesisViolation,
    NotHermitianError,
    NotPositiveError,
    ReducibleMapError,
    SpinChainError,
    TripleError,
)
from .operators import (
    matrix_function,
    order_gap,
    partial_trace,
    relative_entropy,
    shift_embed,
    spectral_decomposition,
    support_projection,
    tensor_product,
    trace_norm,
)
from .maps import (
    KrausMap,
    Superoperator,
    asymptotic_rate_curve,
    choi_and_cp_check,
    classify_positivity_structure,
    cp_order_gap,
    spectral_radius,
    superoperator_spectrum,
)
from .fcs import (
    GeneratingTriple,
    HiddenMarkovSpec,
    block_transfer_map,
    classical_markov_spec,
    classify_ergodicity,
    from_hidden_markov,
    local_density,
    make_triple,
    product_triple,
    stationary_state,
    validate_triple,
)
from .ldp import (
    Interaction,
    average_observable,
    gibbs_local_state,
    ising_interaction,
    local_hamiltonian,
    log_mgf_limit,
    mean_energy_norm,
    mgf_exact,
    pressure_curve,
    rate_function,
    rate_function_model,
    spectral_distribution,
)
from .chernoff import chernoff_curve, chernoff_exponent, gibbs_lower_bound, min_error, q_matrix_model, quasi_trace
from .factorization import (
    fcs_lower_certificate,
    fcs_upper_certificate,
    gibbs_factorization_estimate,
    hmm_lower_criteria,
    minimal_constants,
    weak_upper_check,
)

__version__ = "0.1.0"
