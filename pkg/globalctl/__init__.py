"""
globalctl: simulation, protocols and pulse compilation for globally
controlled qubit chains with redundant control units.
"""

from globalctl.unitary import (
    Unitary1,
    phase_distance,
    random_unitary,
    IDENTITY,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    HADAMARD,
)
from globalctl.chain_state import ChainState, init, draw_outcome
from globalctl.layout import (
    Layout,
    LayoutConfig,
    SwitchingStation,
    build_layout,
    save_layout,
    load_layout,
    canonical_label,
    relabel_for_three_cu,
    active_cus,
)
from globalctl.pulse_isa import (
    PulseInstruction,
    PulseProgram,
    ExecutionRecord,
    execute,
    run,
    expand_macro,
    flip_b_sandwich,
    serialize,
    parse,
    check_fingerprint,
)
from globalctl.dense_oracle import (
    DenseState,
    RandomProgramConfig,
    run_program,
    compare,
    random_program,
    verify_sweep,
)
from globalctl.protocols import (
    PulseRunner,
    EncodeCheckpoint,
    record_protocol,
    move_cu,
    targeted_single_qubit_gate,
    encode_control,
    two_qubit_gate,
    reset_a_buffers,
    reset_b_buffers,
    hierarchical_reset,
)
from globalctl.redundant_cu import (
    TripleCuParams,
    SyndromeMode,
    CorrectionReport,
    SYNDROME_MODES,
    deploy_three_cus,
    targeted_rotation_3cu,
    target_evolution,
    error_evolution,
    exposure_census,
    syndrome_table,
    extract_syndrome,
    feedback_correct,
    reset_ancilla,
    correction_cycle,
)
from globalctl.compiler import (
    CircuitIR,
    PrepareCU,
    SingleQubit,
    TwoQubit,
    BufferReset,
    CorrectionCycle,
    Measure,
    SolverResult,
    circuit_from_json,
    solve_pulse_params,
    compose_fallback,
    compile as compile_circuit,
    schedule_report,
)
from globalctl.noise_mc import (
    ErrorModel,
    McConfig,
    TrialStats,
    apply_noise_step,
    analytic_repetition_failure,
    run_trials,
    run_sweep,
)
from globalctl.exceptions import GlobalControlError
from globalctl.logging_config import setup_logging, get_logger
from globalctl.progress import progress_iter
from globalctl.utils import replace_env_vars, resolve_path, derive_seed
