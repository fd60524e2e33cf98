"""Process matrices and quantum communication under an unknown causal order."""

from .operators import (
    LabeledOperator,
    SystemLabel,
    is_psd,
    link_product,
    partial_trace,
    partial_transpose,
    permute_to,
    tensor_product,
    trace_replace,
)
from .channels import (
    Channel,
    apply,
    choi_from_kraus,
    compose,
    erasure_channel,
    fidelity,
    identity_channel,
    is_cptp,
    preparation_channel,
    trace_channel,
)
from .process import (
    CausalDecomposition,
    ProcessMatrix,
    check_causal_order,
    comb_process,
    from_channel,
    insert_parties,
    mix,
    random_ordered_process,
    validate_process,
)
from .reduction import (
    EffectiveDecomposition,
    contract_alice,
    effective_decomposition,
    erasure_simulation,
    example_process,
    run_pipeline,
    swap_roles,
)
from .capacity import (
    CapacityEstimate,
    ProtocolSpec,
    blahut_arimoto,
    coherent_information,
    erasure_quantum_capacity,
    induced_classical_channel,
    max_coherent_information,
    simulate_protocol,
    theorem_sweep,
    von_neumann_entropy,
)

__version__ = "0.1.0"
