"""resetcorr: measure-and-reset ancilla protocol simulator for n-point
correlators of driven-dissipative qubit models, with a Hadamard-test
baseline and closed-form Green's-function oracles."""

__version__ = "0.1.0"

# audit flags echoed into every result file
CONVENTION_FLAGS = {
    "phase_gate": "diag(1,i)",
    "alpha_bracket_map": "0=anticommutator,1=commutator",
    "bracket_phase": "i^(sum alpha)",
    "theta_at_zero": 1,
}

from .qmat import (  # noqa: E402,F401
    DensityMatrix,
    Operator,
    PauliString,
    expect,
    partial_trace,
    pauli_operator,
    tensor,
)
from .channels import (  # noqa: E402,F401
    ChoiData,
    LindbladGenerator,
    QuantumChannel,
    apply_channel,
    apply_channel_on_subsystem,
    compose,
    integrate_transfer_matrix,
    kraus_from_choi,
    lindblad_rhs,
)
from .protocol import (  # noqa: E402,F401
    AncillaNoise,
    BranchTable,
    ProtocolSpec,
    ShotRecord,
    hadamard_corr,
    run_hadamard_test,
    run_robust_exact,
    run_robust_sampled,
    step_update,
)
from .estimators import (  # noqa: E402,F401
    ALPHA_ANTICOMMUTATOR,
    ALPHA_COMMUTATOR,
    AuxiliaryPlan,
    CorrelatorEstimate,
    estimate_signed,
    estimate_three_point,
    estimate_two_point,
    estimate_two_point_signed,
    shots_for_precision,
    three_point_plan,
    two_point_plan,
)
from .keldysh import (  # noqa: E402,F401
    NestedBracket,
    OperatorWord,
    accessible_permutations,
    contour_classify,
    expand,
    missing_permutations,
)
from .fermion import (  # noqa: E402,F401
    ModelParams,
    accumulated_phase,
    dispersion,
    fermi,
    green_greater,
    green_lesser,
    green_retarded,
    green_retarded_via_protocol,
    infinitesimal_kraus,
    integrated_kraus,
)
