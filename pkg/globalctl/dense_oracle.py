"""
Brute-force dense state-vector simulator used as ground truth.

``DenseState`` holds all 2^n amplitudes (n <= 24) in the same little-endian
order as ``ChainState.to_dense``: bit i of the basis index is cell i. Random
draws follow the shared contract in ``chain_state.draw_outcome`` so that a
hybrid run and an oracle run with the same seed take the same branches.

Macros with a primitive expansion run through it here, so comparing against
the hybrid kernel also checks the hybrid's native macro code.
"""

from __future__ import annotations

import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from globalctl.chain_state import ChainState, draw_outcome
from globalctl.constants import (
    DENSE_MAX_QUBITS,
    DETERMINISTIC_TOL,
    MACRO_CNOT_AB,
    MACRO_CNOT_BA,
    MACRO_CRESET_BA,
    MACRO_CRESET_SANDWICH,
    MACRO_CTRL_U_AB,
    MACRO_CTRL_U_BA,
    MACRO_FLIP_B_SANDWICH,
    MACRO_SHIFT_B,
    MACRO_SWAP_AB,
    MACRO_SWAP_BA,
    OP_CP_AB,
    OP_CP_BA,
    OP_MACRO,
    OP_MEASURE_A,
    OP_MEASURE_B,
    OP_RESET_A,
    OP_RESET_B,
    OP_ROT_A,
    OP_ROT_B,
    PATTERN_ALL_ZERO,
    UNIT_SPACINGS,
)
from globalctl.exceptions import (
    InvalidInstruction,
    LengthMismatch,
    QuantumControlledReset,
    StateTooLarge,
)
from globalctl.pulse_isa import (
    PulseInstruction,
    PulseProgram,
    ab_pairs,
    ba_pairs,
    check_fingerprint,
    cp_ab,
    cp_ba,
    execute,
    expand_macro,
    macro,
    rot_a,
    rot_b,
    sandwich_controls,
    shift_b,
    shift_b_mapping,
)
from globalctl.progress import progress_iter
from globalctl.unitary import PAULI_X, Unitary1, random_unitary
from globalctl.utils import derive_seed, make_rng, thread_budget

logger = logging.getLogger(__name__)

# Macros the oracle runs through their primitive expansion
_EXPANDED = (MACRO_CNOT_AB, MACRO_CNOT_BA, MACRO_SWAP_AB, MACRO_SWAP_BA, MACRO_CTRL_U_AB)


class DenseState:
    """
    Full state vector of an n-cell chain.

    Args:
        n: Number of cells (at most DENSE_MAX_QUBITS)
        bits: Initial basis state (default all zero)
    """

    def __init__(self, n: int, bits: list[int] | None = None):
        if n > DENSE_MAX_QUBITS:
            raise StateTooLarge(f"Dense oracle supports at most {DENSE_MAX_QUBITS} cells")
        if n < 1:
            raise LengthMismatch("A chain needs at least one cell")
        bits = [0] * n if bits is None else list(bits)
        if len(bits) != n:
            raise LengthMismatch(f"Pattern of length {len(bits)} on a chain of {n}")
        self.n = n
        self.vector = np.zeros(2**n, dtype=complex)
        self.vector[sum(int(b) << i for i, b in enumerate(bits))] = 1.0

    @classmethod
    def from_vector(cls, vector) -> DenseState:
        vector = np.asarray(vector, dtype=complex)
        n = int(round(math.log2(vector.size)))
        if 2**n != vector.size:
            raise LengthMismatch(f"Vector of size {vector.size} is not a power of two")
        state = cls(n)
        state.vector = vector / np.linalg.norm(vector)
        return state

    def copy(self) -> DenseState:
        other = DenseState.__new__(DenseState)
        other.n = self.n
        other.vector = self.vector.copy()
        return other

    # ------------------------------------------------------------------
    # tensor plumbing: axis 0 is the most significant cell (n-1)
    # ------------------------------------------------------------------

    def _tensor(self) -> np.ndarray:
        return self.vector.reshape((2,) * self.n)

    def _axis(self, cell: int) -> int:
        if not 0 <= cell < self.n:
            raise InvalidInstruction(f"Cell {cell} outside chain of {self.n}")
        return self.n - 1 - cell

    def _store(self, tensor: np.ndarray):
        self.vector = np.ascontiguousarray(tensor).reshape(-1)

    # ------------------------------------------------------------------
    # gates
    # ------------------------------------------------------------------

    def apply_unitary1(self, cell: int, u: Unitary1):
        axis = self._axis(cell)
        t = np.tensordot(u.matrix, self._tensor(), axes=([1], [axis]))
        self._store(np.moveaxis(t, 0, axis))

    def apply_cphase(self, i: int, j: int, theta: float):
        if i == j:
            raise InvalidInstruction("Controlled phase needs two distinct cells")
        t = self._tensor().copy()
        index = [slice(None)] * self.n
        index[self._axis(i)] = 1
        index[self._axis(j)] = 1
        t[tuple(index)] *= cmath.exp(1j * theta)
        self._store(t)

    def apply_controlled(self, controls: list[int], target: int, u: Unitary1):
        t = self._tensor().copy()
        control_axes = {self._axis(c) for c in controls}
        target_axis = self._axis(target)
        index = tuple(1 if a in control_axes else slice(None) for a in range(self.n))
        sub = t[index]
        position = target_axis - sum(1 for a in control_axes if a < target_axis)
        t[index] = np.moveaxis(
            np.tensordot(u.matrix, sub, axes=([1], [position])), 0, position
        )
        self._store(t)

    def permute(self, mapping: dict[int, int]):
        """Content of cell old moves to cell mapping[old]."""
        source = {new: old for old, new in mapping.items()}
        perm = []
        for axis in range(self.n):
            cell = self.n - 1 - axis
            perm.append(self._axis(source.get(cell, cell)))
        self._store(self._tensor().transpose(perm))

    # ------------------------------------------------------------------
    # measurement
    # ------------------------------------------------------------------

    def probability_one(self, cell: int) -> float:
        moved = np.moveaxis(self._tensor(), self._axis(cell), 0)
        p0 = float(np.sum(np.abs(moved[0]) ** 2))
        p1 = float(np.sum(np.abs(moved[1]) ** 2))
        return p1 / (p0 + p1)

    def measure_qubit(self, cell: int, rng) -> int:
        outcome = draw_outcome(self.probability_one(cell), rng)
        t = self._tensor().copy()
        index = [slice(None)] * self.n
        index[self._axis(cell)] = 1 - outcome
        t[tuple(index)] = 0.0
        self._store(t)
        self.vector /= np.linalg.norm(self.vector)
        return outcome

    def reset_qubit(self, cell: int, rng) -> int:
        outcome = self.measure_qubit(cell, rng)
        if outcome:
            self.apply_unitary1(cell, PAULI_X)
        return outcome

    def definite_bit(self, cell: int) -> int | None:
        p1 = self.probability_one(cell)
        if p1 <= DETERMINISTIC_TOL:
            return 0
        if p1 >= 1.0 - DETERMINISTIC_TOL:
            return 1
        return None

    def reduced_density(self, indices: list[int]) -> np.ndarray:
        """Reduced density matrix, little-endian over the sorted cells."""
        cells = sorted(set(indices))
        t = self._tensor()
        traced = [a for a in range(self.n) if (self.n - 1 - a) not in cells]
        rho = np.tensordot(t, t.conj(), axes=(traced, traced))
        m = len(cells)
        return rho.reshape(2**m, 2**m)


# =============================================================================
# Instruction semantics
# =============================================================================


def _execute_native(state: DenseState, instr: PulseInstruction, rng):
    n = state.n
    name = instr.macro
    if name == MACRO_SHIFT_B:
        state.permute(
            shift_b_mapping(n, instr.args["dir"], instr.args.get("spacings", UNIT_SPACINGS))
        )
    elif name == MACRO_CTRL_U_BA:
        for b, a in ba_pairs(n):
            state.apply_controlled([b], a, instr.u)
    elif name == MACRO_FLIP_B_SANDWICH:
        for j in range(1, n, 2):
            controls = sandwich_controls(n, j)
            if controls is not None:
                state.apply_controlled(list(controls), j, PAULI_X)
    elif name == MACRO_CRESET_BA:
        fire = []
        for b, a in ba_pairs(n):
            bit = state.definite_bit(b)
            if bit is None:
                raise QuantumControlledReset(f"CRESET_BA control B({b}) is not definite")
            if bit:
                fire.append(a)
        for a in fire:
            state.reset_qubit(a, rng)
    elif name == MACRO_CRESET_SANDWICH:
        fire = []
        for j in range(1, n, 2):
            controls = sandwich_controls(n, j)
            if controls is None or state.definite_bit(j) == 0:
                continue
            bits = [state.definite_bit(c) for c in controls]
            if 0 in bits:
                continue
            if None in bits:
                raise QuantumControlledReset(f"CRESET_SANDWICH on B({j}) has a quantum control")
            fire.append(j)
        for j in fire:
            state.reset_qubit(j, rng)
    else:
        raise InvalidInstruction(f"{name} has no native dense form")


def execute_dense(state: DenseState, instr: PulseInstruction, rng) -> list[int] | None:
    """
    Apply one instruction with textbook semantics.

    Returns:
        Outcome bits for MEASURE instructions, otherwise None
    """
    n = state.n
    op = instr.op
    if op in (OP_ROT_A, OP_ROT_B):
        for i in range(0 if op == OP_ROT_A else 1, n, 2):
            state.apply_unitary1(i, instr.u)
    elif op in (OP_CP_AB, OP_CP_BA):
        for i, j in ab_pairs(n) if op == OP_CP_AB else ba_pairs(n):
            state.apply_cphase(i, j, instr.theta)
    elif op in (OP_RESET_A, OP_RESET_B):
        for i in range(0 if op == OP_RESET_A else 1, n, 2):
            state.reset_qubit(i, rng)
    elif op in (OP_MEASURE_A, OP_MEASURE_B):
        return [
            state.measure_qubit(i, rng)
            for i in range(0 if op == OP_MEASURE_A else 1, n, 2)
        ]
    elif op == OP_MACRO:
        if instr.macro in _EXPANDED:
            for primitive in expand_macro(instr, n):
                execute_dense(state, primitive, rng)
        else:
            _execute_native(state, instr, rng)
    else:
        raise InvalidInstruction(f"Unknown op {op!r}")
    return None


def run_program(
    layout,
    program: PulseProgram,
    seed: int | None = 0,
    pattern: str | list[int] = PATTERN_ALL_ZERO,
) -> tuple[DenseState, list[list[int]]]:
    """
    Run a program on the dense oracle.

    Args:
        layout: Chain layout (n <= 24)
        program: Pulse program
        seed: Seed for the PCG64 generator
        pattern: Initial pattern name or explicit bits

    Returns:
        (final DenseState, list of MEASURE outcome vectors in program order)
    """
    if program.fingerprint:
        check_fingerprint(program, layout, strict=False)
    bits = layout.canonical_pattern(pattern) if isinstance(pattern, str) else pattern
    state = DenseState(layout.n, bits)
    rng = make_rng(seed)
    outcomes = []
    for instr in program:
        record = execute_dense(state, instr, rng)
        if record is not None:
            outcomes.append(record)
    return state, outcomes


def compare(hybrid, dense) -> float:
    """
    Max amplitude deviation after removing the relative global phase.

    The phase is fixed by the overlap of the two vectors, which is optimal
    for the Euclidean norm and exact when the states agree up to phase.

    Args:
        hybrid: ChainState, DenseState or amplitude vector
        dense: DenseState or amplitude vector

    Returns:
        max_i |a_i - e^{i phi} b_i|
    """
    a = _as_vector(hybrid)
    b = _as_vector(dense)
    if a.shape != b.shape:
        raise LengthMismatch(f"Cannot compare states of size {a.size} and {b.size}")
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-15 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def _as_vector(state) -> np.ndarray:
    if isinstance(state, ChainState):
        return state.to_dense()
    if isinstance(state, DenseState):
        return state.vector
    return np.asarray(state, dtype=complex)


# =============================================================================
# Random programs
# =============================================================================


@dataclass(frozen=True)
class RandomProgramConfig:
    """Bounds for random_program."""

    length: int = 20
    include_measure: bool = True
    include_reset: bool = True
    include_macros: bool = True
    measure_density: float = 0.1
    theta_range: tuple[float, float] = (-math.pi, math.pi)
    macros: tuple[str, ...] = field(
        default=(
            MACRO_CNOT_AB,
            MACRO_CNOT_BA,
            MACRO_SWAP_AB,
            MACRO_SWAP_BA,
            MACRO_SHIFT_B,
            MACRO_CTRL_U_BA,
            MACRO_CTRL_U_AB,
            MACRO_FLIP_B_SANDWICH,
        )
    )

    @classmethod
    def from_dict(cls, document: dict) -> RandomProgramConfig:
        kwargs = dict(document)
        if "theta_range" in kwargs:
            kwargs["theta_range"] = tuple(kwargs["theta_range"])
        if "macros" in kwargs:
            kwargs["macros"] = tuple(kwargs["macros"])
        return cls(**kwargs)


def random_program(
    config: RandomProgramConfig | None = None, seed: int = 0, fingerprint: str = ""
) -> PulseProgram:
    """
    Reproducible random mix of instructions.

    Controlled resets are never drawn, since their controls may be quantum.

    Args:
        config: Bounds (default RandomProgramConfig())
        seed: Generator seed
        fingerprint: Layout fingerprint recorded in the program

    Returns:
        PulseProgram named ``random-<seed>``
    """
    config = config or RandomProgramConfig()
    rng = make_rng(seed)
    lo, hi = config.theta_range
    irreversible = []
    if config.include_measure:
        irreversible.extend([OP_MEASURE_A, OP_MEASURE_B])
    if config.include_reset:
        irreversible.extend([OP_RESET_A, OP_RESET_B])
    unitary_kinds = [OP_ROT_A, OP_ROT_B, OP_CP_AB, OP_CP_BA]
    if config.include_macros:
        unitary_kinds.extend(config.macros)

    program = PulseProgram(name=f"random-{seed}", fingerprint=fingerprint)
    for _ in range(config.length):
        if irreversible and rng.random() < config.measure_density:
            op = irreversible[int(rng.integers(len(irreversible)))]
            program.append(PulseInstruction(op))
            continue
        kind = unitary_kinds[int(rng.integers(len(unitary_kinds)))]
        if kind == OP_ROT_A:
            program.append(rot_a(random_unitary(rng)))
        elif kind == OP_ROT_B:
            program.append(rot_b(random_unitary(rng)))
        elif kind == OP_CP_AB:
            program.append(cp_ab(float(rng.uniform(lo, hi))))
        elif kind == OP_CP_BA:
            program.append(cp_ba(float(rng.uniform(lo, hi))))
        elif kind == MACRO_SHIFT_B:
            direction = 1 if rng.random() < 0.5 else -1
            program.append(shift_b(direction, int(rng.integers(1, 4))))
        elif kind in (MACRO_CTRL_U_BA, MACRO_CTRL_U_AB):
            program.append(macro(kind, u=random_unitary(rng)))
        else:
            program.append(macro(kind))
    return program


# =============================================================================
# Equivalence sweep
# =============================================================================


@dataclass
class SweepReport:
    """Hybrid-vs-oracle agreement over a batch of random programs."""

    n: int
    programs: int
    seed: int
    max_deviation: float = 0.0
    outcome_mismatches: list[int] = field(default_factory=list)
    worst_program: str | None = None

    @property
    def ok(self) -> bool:
        return not self.outcome_mismatches and self.max_deviation <= 1e-10

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "programs": self.programs,
            "seed": self.seed,
            "max_deviation": self.max_deviation,
            "outcome_mismatches": list(self.outcome_mismatches),
            "worst_program": self.worst_program,
            "ok": self.ok,
        }


def check_program(n: int, program: PulseProgram, seed: int) -> tuple[float, bool]:
    """
    Run one program on both simulators from |0...0> with matched seeds.

    Returns:
        (max amplitude deviation, True when every outcome vector agrees)
    """
    hybrid = ChainState(n)
    dense = DenseState(n)
    hybrid_rng = make_rng(seed)
    dense_rng = make_rng(seed)
    same = True
    for instr in program:
        record = execute(hybrid, instr, hybrid_rng)
        outcome = execute_dense(dense, instr, dense_rng)
        if (record.outcomes or None) != (outcome or None):
            same = False
    return compare(hybrid, dense), same


def verify_sweep(
    n: int,
    programs: int,
    seed: int = 0,
    config: RandomProgramConfig | None = None,
    progress: bool = False,
) -> SweepReport:
    """
    Compare the hybrid kernel with the oracle on ``programs`` random programs.

    Program k uses seed ``derive_seed(seed, k)`` both to draw the program and
    to drive its random outcomes. Results are reduced in program order.
    """
    if n > DENSE_MAX_QUBITS:
        raise StateTooLarge(f"Sweep chains are limited to {DENSE_MAX_QUBITS} cells")
    report = SweepReport(n=n, programs=programs, seed=seed)
    seeds = [derive_seed(seed, k) for k in range(programs)]

    def one(program_seed):
        program = random_program(config, seed=program_seed)
        return program.name, check_program(n, program, program_seed)

    with ThreadPoolExecutor(max_workers=thread_budget()) as pool:
        results = pool.map(one, seeds)
        tracked = progress_iter(
            results, desc="Verifying", unit="programs", enabled=progress, total=programs
        )
        for k, (name, (deviation, same)) in enumerate(tracked):
            if not same:
                report.outcome_mismatches.append(k)
            if report.worst_program is None or deviation > report.max_deviation:
                report.max_deviation = deviation
                report.worst_program = name
    logger.info(
        f"verified {programs} programs on n={n}: max deviation "
        f"{report.max_deviation:.3e}, {len(report.outcome_mismatches)} outcome mismatches"
    )
    return report
