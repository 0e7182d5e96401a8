"""Detection of qudit-environment entanglement under pure-dephasing evolution."""
from .criteria import (
    CriteriaReport,
    Verdict,
    class_one_check,
    class_two_check,
    oracle_crosscheck,
    separability_verdict,
)
from .linalg import adjoint, hermitian_propagator, negativity, partial_transpose, tensor
from .model import (
    BlockJointState,
    PureDephasingModel,
    SystemAmplitudes,
    assemble,
    conditional_propagator,
    evolve,
    reduced_system,
)
from .witness import (
    ProtocolConfig,
    WitnessReport,
    implied_pairs_closure,
    prepared_trace,
    undetectability_analysis,
    witness_scan,
)

__version__ = "0.1.0"
