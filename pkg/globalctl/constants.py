"""
Constants shared across globalctl modules.

Tolerances, instruction names, pattern names, cell roles and defaults live
here so that the simulators, the protocols and the file formats agree on a
single set of values.
"""

import math

# =============================================================================
# Numerical Tolerances
# =============================================================================

# Unitarity and permutation fast-path detection
UNITARY_TOL = 1e-12

# A cell whose weight sits on one basis value within this tolerance is demoted
DEMOTION_TOL = 1e-12

# Outcomes with probability within this tolerance of 0 or 1 consume no draw.
# Shared by the hybrid simulator and the dense oracle so RNG streams align.
DETERMINISTIC_TOL = 1e-9

# Largest chain the dense oracle accepts
DENSE_MAX_QUBITS = 24

# Pulse-parameter solver acceptance threshold
SOLVER_TOL = 1e-6

# =============================================================================
# Chain Geometry
# =============================================================================

# Physical cells per computational unit (payload on every third A cell)
UNIT_CELLS = 6

# A-spacings (two cells each) per computational unit
UNIT_SPACINGS = 3

# Computational-unit offsets of the three redundant CUs from their anchor
TRIPLE_CU_OFFSETS = (0, 1, 3)

# Workspace units needed by triple-CU transport
TRIPLE_CU_MIN_MARGINS = 4

# Default ancilla unit for the correction cycle; units up to ancilla + 3 are
# touched by the feedback sequences and the ancilla reset.
DEFAULT_ANCILLA_UNIT = 3

# =============================================================================
# Pulse Instruction Names
# =============================================================================

OP_ROT_A = "ROT_A"
OP_ROT_B = "ROT_B"
OP_CP_AB = "CP_AB"
OP_CP_BA = "CP_BA"
OP_RESET_A = "RESET_A"
OP_RESET_B = "RESET_B"
OP_MEASURE_A = "MEASURE_A"
OP_MEASURE_B = "MEASURE_B"
OP_MACRO = "MACRO"

ROTATION_OPS = (OP_ROT_A, OP_ROT_B)
CPHASE_OPS = (OP_CP_AB, OP_CP_BA)
RESET_OPS = (OP_RESET_A, OP_RESET_B)
MEASURE_OPS = (OP_MEASURE_A, OP_MEASURE_B)
ALL_OPS = ROTATION_OPS + CPHASE_OPS + RESET_OPS + MEASURE_OPS + (OP_MACRO,)

# =============================================================================
# Macro Names
# =============================================================================

MACRO_CNOT_AB = "CNOT_AB"
MACRO_CNOT_BA = "CNOT_BA"
MACRO_SWAP_AB = "SWAP_AB"
MACRO_SWAP_BA = "SWAP_BA"
MACRO_SHIFT_B = "SHIFT_B"
MACRO_CTRL_U_BA = "CTRL_U_BA"
MACRO_CTRL_U_AB = "CTRL_U_AB"
MACRO_FLIP_B_SANDWICH = "FLIP_B_SANDWICH"
MACRO_CRESET_BA = "CRESET_BA"
MACRO_CRESET_SANDWICH = "CRESET_SANDWICH"

ALL_MACROS = (
    MACRO_CNOT_AB,
    MACRO_CNOT_BA,
    MACRO_SWAP_AB,
    MACRO_SWAP_BA,
    MACRO_SHIFT_B,
    MACRO_CTRL_U_BA,
    MACRO_CTRL_U_AB,
    MACRO_FLIP_B_SANDWICH,
    MACRO_CRESET_BA,
    MACRO_CRESET_SANDWICH,
)

# CP angle range is (-2pi, 2pi]
THETA_MIN = -2.0 * math.pi
THETA_MAX = 2.0 * math.pi

# =============================================================================
# Initial Patterns
# =============================================================================

PATTERN_ALL_ZERO = "all-zero"
PATTERN_SINGLE_CU = "single-CU"
PATTERN_BLOCK_CUS = "block-CUs"
PATTERN_TRIPLE_CU = "triple-CU"

NAMED_PATTERNS = (
    PATTERN_ALL_ZERO,
    PATTERN_SINGLE_CU,
    PATTERN_BLOCK_CUS,
    PATTERN_TRIPLE_CU,
)

# =============================================================================
# Cell Roles
# =============================================================================

ROLE_PAYLOAD = "payload"
ROLE_WORKSPACE = "workspace"
ROLE_CU_HOME = "cu_home"
ROLE_BUFFER = "buffer"
ROLE_STATION_CU = "station_cu"
ROLE_SS_RESULT = "ss_result"
ROLE_SS_PARTNER = "ss_partner"
ROLE_SS_LABEL = "ss_label"

SS_ROLES = (ROLE_SS_RESULT, ROLE_SS_PARTNER, ROLE_SS_LABEL)

# Pseudo-role selecting the three redundant CU sites
SCOPE_CU_SITES = "cu_sites"

# Roles that are noisy unless an ErrorModel says otherwise
DEFAULT_NOISE_SCOPE = (
    ROLE_CU_HOME,
    ROLE_STATION_CU,
    ROLE_BUFFER,
    ROLE_WORKSPACE,
) + SS_ROLES

# =============================================================================
# Monte Carlo
# =============================================================================

MODE_CORRECTED = "corrected"
MODE_UNCORRECTED = "uncorrected"

ENGINE_TABLE = "table"
ENGINE_FULL = "full"

WILSON_CONFIDENCE = 0.95

MC_CSV_COLUMNS = ["p", "mode", "trials", "failures", "rate", "wilson_lo", "wilson_hi"]

# =============================================================================
# Environment and Files
# =============================================================================

ENV_THREADS = "GLOBALCTL_THREADS"

# Significant digits used when writing floats to pulse programs
FLOAT_DIGITS = 17

FILE_EXTENSION_JSON = ".json"
FILE_EXTENSION_JSONL = ".jsonl"
FILE_EXTENSION_CSV = ".csv"
