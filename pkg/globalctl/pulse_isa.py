"""
Global pulse instruction set.

Primitives act uniformly on a sublattice (ROT, RESET, MEASURE) or on every
coupled pair of one parity (CP). Macros bundle common compositions; some are
native, meaning the simulators apply their defined semantics directly and no
primitive expansion exists.

Pulse programs serialize as JSON lines. The first line is a header
``{"program": name, "fingerprint": layout-hash}``; every further line is one
instruction, for example::

    {"op": "ROT_A", "u": {"rows": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}}
    {"op": "CP_AB", "theta": 3.1415926535897931}
    {"op": "MACRO", "macro": "SHIFT_B", "args": {"dir": 1, "spacings": 3}}

SHIFT_B dir +1 moves B contents toward higher indices; the B sublattice is
rotated cyclically by ``spacings`` A-spacings (two cells each).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

from globalctl.chain_state import ChainState
from globalctl.constants import (
    ALL_MACROS,
    ALL_OPS,
    CPHASE_OPS,
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
    MEASURE_OPS,
    OP_CP_AB,
    OP_CP_BA,
    OP_MACRO,
    OP_MEASURE_A,
    OP_MEASURE_B,
    OP_RESET_A,
    OP_RESET_B,
    OP_ROT_A,
    OP_ROT_B,
    RESET_OPS,
    ROTATION_OPS,
    THETA_MAX,
    THETA_MIN,
    UNIT_SPACINGS,
)
from globalctl.exceptions import (
    FingerprintMismatch,
    InvalidInstruction,
    ProgramParseError,
    QuantumControlledReset,
    UnknownMacro,
)
from globalctl.unitary import HADAMARD, PAULI_X, Unitary1
from globalctl.utils import to_json_text

logger = logging.getLogger(__name__)

NATIVE = "native"

_CONTROLLED_U_MACROS = (MACRO_CTRL_U_BA, MACRO_CTRL_U_AB)
_SELF_INVERSE_MACROS = (
    MACRO_CNOT_AB,
    MACRO_CNOT_BA,
    MACRO_SWAP_AB,
    MACRO_SWAP_BA,
    MACRO_FLIP_B_SANDWICH,
)
_IRREVERSIBLE_MACROS = (MACRO_CRESET_BA, MACRO_CRESET_SANDWICH)

# Primitive steps charged to step_counter per macro
_MACRO_COST = {
    MACRO_CNOT_AB: 3,
    MACRO_CNOT_BA: 3,
    MACRO_SWAP_AB: 9,
    MACRO_SWAP_BA: 9,
    MACRO_CTRL_U_BA: 6,
    MACRO_CTRL_U_AB: 6,
    MACRO_FLIP_B_SANDWICH: 1,
    MACRO_CRESET_BA: 1,
    MACRO_CRESET_SANDWICH: 1,
}

# Two SWAP rounds per A-spacing
_SHIFT_COST_PER_SPACING = 18


@dataclass(frozen=True)
class PulseInstruction:
    """One global pulse or macro."""

    op: str
    u: Unitary1 | None = None
    theta: float | None = None
    macro: str | None = None
    args: dict = field(default_factory=dict)
    tag: str | None = None

    def __post_init__(self):
        validate_instruction(self)

    @property
    def name(self) -> str:
        """Macro name for macros, op name otherwise."""
        return self.macro if self.op == OP_MACRO else self.op

    def with_tag(self, tag: str | None) -> PulseInstruction:
        return PulseInstruction(self.op, self.u, self.theta, self.macro, dict(self.args), tag)

    def to_dict(self) -> dict:
        document: dict = {"op": self.op}
        if self.macro is not None:
            document["macro"] = self.macro
        if self.theta is not None:
            document["theta"] = float(self.theta)
        if self.u is not None:
            document["u"] = self.u.to_dict()
        if self.args:
            document["args"] = dict(self.args)
        if self.tag is not None:
            document["tag"] = self.tag
        return document

    @classmethod
    def from_dict(cls, document: dict) -> PulseInstruction:
        if not isinstance(document, dict):
            raise InvalidInstruction("instruction must be a JSON object")
        unknown = set(document) - {"op", "u", "theta", "macro", "args", "tag"}
        if unknown:
            raise InvalidInstruction(f"unknown fields {sorted(unknown)}")
        theta = document.get("theta")
        if theta is not None and (
            isinstance(theta, bool) or not isinstance(theta, (int, float))
        ):
            raise InvalidInstruction("theta must be a number")
        u = document.get("u")
        args = document.get("args", {})
        if not isinstance(args, dict):
            raise InvalidInstruction("args must be an object")
        return cls(
            op=document.get("op"),
            u=None if u is None else Unitary1.from_dict(u),
            theta=None if theta is None else float(theta),
            macro=document.get("macro"),
            args=args,
            tag=document.get("tag"),
        )


@dataclass
class PulseProgram:
    """Ordered pulse list bound to a layout fingerprint."""

    name: str = "program"
    fingerprint: str = ""
    instructions: list[PulseInstruction] = field(default_factory=list)

    def append(self, instr: PulseInstruction):
        self.instructions.append(instr)

    def extend(self, instrs):
        self.instructions.extend(instrs)

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)


@dataclass
class ExecutionRecord:
    """Result of executing one instruction."""

    steps: int
    outcomes: list[int] | None = None


# =============================================================================
# Constructors
# =============================================================================


def rot_a(u: Unitary1, tag: str | None = None) -> PulseInstruction:
    return PulseInstruction(OP_ROT_A, u=u, tag=tag)


def rot_b(u: Unitary1, tag: str | None = None) -> PulseInstruction:
    return PulseInstruction(OP_ROT_B, u=u, tag=tag)


def cp_ab(theta: float = math.pi, tag: str | None = None) -> PulseInstruction:
    return PulseInstruction(OP_CP_AB, theta=theta, tag=tag)


def cp_ba(theta: float = math.pi, tag: str | None = None) -> PulseInstruction:
    return PulseInstruction(OP_CP_BA, theta=theta, tag=tag)


def macro(name: str, u: Unitary1 | None = None, tag: str | None = None, **args):
    return PulseInstruction(OP_MACRO, u=u, macro=name, args=args, tag=tag)


def shift_b(direction: int, spacings: int = UNIT_SPACINGS, tag: str | None = None):
    return macro(MACRO_SHIFT_B, tag=tag, dir=direction, spacings=spacings)


def validate_instruction(instr: PulseInstruction):
    """
    Check an instruction's fields.

    Raises:
        InvalidInstruction: If a required field is missing or out of range
        UnknownMacro: If the macro name is not supported
    """
    if instr.op not in ALL_OPS:
        raise InvalidInstruction(f"Unknown op {instr.op!r}")
    if instr.tag is not None and not isinstance(instr.tag, str):
        raise InvalidInstruction("tag must be a string")
    if instr.op in ROTATION_OPS:
        if not isinstance(instr.u, Unitary1):
            raise InvalidInstruction(f"{instr.op} needs a unitary")
    elif instr.op in CPHASE_OPS:
        if instr.theta is None or not (THETA_MIN < instr.theta <= THETA_MAX):
            raise InvalidInstruction(f"{instr.op} theta must lie in (-2pi, 2pi]")
    elif instr.op == OP_MACRO:
        if instr.macro not in ALL_MACROS:
            raise UnknownMacro(f"Unknown macro {instr.macro!r}")
        if instr.macro in _CONTROLLED_U_MACROS and not isinstance(instr.u, Unitary1):
            raise InvalidInstruction(f"{instr.macro} needs a unitary")
        if instr.macro == MACRO_SHIFT_B:
            direction = instr.args.get("dir")
            spacings = instr.args.get("spacings", UNIT_SPACINGS)
            if direction not in (1, -1) or isinstance(direction, bool):
                raise InvalidInstruction("SHIFT_B dir must be +1 or -1")
            if not isinstance(spacings, int) or isinstance(spacings, bool) or spacings < 1:
                raise InvalidInstruction("SHIFT_B spacings must be a positive integer")
            if set(instr.args) - {"dir", "spacings"}:
                raise InvalidInstruction("SHIFT_B takes only dir and spacings")
        elif instr.args:
            raise InvalidInstruction(f"{instr.macro} takes no args")


def instruction_cost(instr: PulseInstruction) -> int:
    """Number of primitive steps an instruction stands for."""
    if instr.op != OP_MACRO:
        return 1
    if instr.macro == MACRO_SHIFT_B:
        return _SHIFT_COST_PER_SPACING * instr.args.get("spacings", UNIT_SPACINGS)
    return _MACRO_COST[instr.macro]


def inverse(instr: PulseInstruction) -> PulseInstruction:
    """
    Adjoint of a unitary instruction.

    Raises:
        InvalidInstruction: For resets, measurements and controlled resets
    """
    if instr.op in ROTATION_OPS:
        return PulseInstruction(instr.op, u=instr.u.dagger(), tag=instr.tag)
    if instr.op in CPHASE_OPS:
        theta = -instr.theta
        if theta <= THETA_MIN:
            theta += 2.0 * THETA_MAX
        return PulseInstruction(instr.op, theta=theta, tag=instr.tag)
    if instr.op == OP_MACRO:
        if instr.macro in _SELF_INVERSE_MACROS:
            return instr
        if instr.macro in _CONTROLLED_U_MACROS:
            return macro(instr.macro, u=instr.u.dagger(), tag=instr.tag)
        if instr.macro == MACRO_SHIFT_B:
            return shift_b(
                -instr.args["dir"],
                instr.args.get("spacings", UNIT_SPACINGS),
                tag=instr.tag,
            )
    raise InvalidInstruction(f"{instr.name} has no inverse")


def inverse_sequence(instrs: list[PulseInstruction]) -> list[PulseInstruction]:
    return [inverse(instr) for instr in reversed(instrs)]


# =============================================================================
# Expansion
# =============================================================================


def expand_macro(instr: PulseInstruction, n: int | None = None):
    """
    Primitive expansion of a macro.

    Args:
        instr: A MACRO instruction
        n: Chain length (accepted for symmetry with execute; expansions are
            length independent)

    Returns:
        List of primitive instructions, or NATIVE for macros that only have
        native semantics (FLIP_B_SANDWICH, CRESET_BA, CRESET_SANDWICH)

    Notes:
        CTRL_U_BA expands exactly whenever the last B cell of the chain
        (which has no right partner) is 0; otherwise the expansion also
        applies the control phase to that cell.

        SHIFT_B expands to ``spacings`` rounds of alternating pair SWAPs. Each
        round advances every cell one step around the ring B1, B3, ...,
        B(n-1), A(n-2), ..., A0, so A contents move too. The expansion
        equals the native shift only when every A cell is 0 and the B cells
        that would wrap around (the last ``spacings`` B cells in the
        direction of motion) are 0.
    """
    if instr.op != OP_MACRO:
        raise InvalidInstruction(f"{instr.op} is not a macro")
    name = instr.macro
    tag = instr.tag
    if name == MACRO_CNOT_AB:
        return [rot_b(HADAMARD, tag), cp_ab(math.pi, tag), rot_b(HADAMARD, tag)]
    if name == MACRO_CNOT_BA:
        return [rot_b(HADAMARD, tag), cp_ba(math.pi, tag), rot_b(HADAMARD, tag)]
    if name in (MACRO_SWAP_AB, MACRO_SWAP_BA):
        cp = cp_ab if name == MACRO_SWAP_AB else cp_ba
        a_to_b = [rot_b(HADAMARD, tag), cp(math.pi, tag), rot_b(HADAMARD, tag)]
        b_to_a = [rot_a(HADAMARD, tag), cp(math.pi, tag), rot_a(HADAMARD, tag)]
        return a_to_b + b_to_a + a_to_b
    if name in _CONTROLLED_U_MACROS:
        cp = cp_ba if name == MACRO_CTRL_U_BA else cp_ab
        alpha, fa, fb, fc = instr.u.abc_cz_factors()
        return [
            rot_a(fc, tag),
            cp(math.pi, tag),
            rot_a(fb, tag),
            cp(math.pi, tag),
            rot_a(fa, tag),
            rot_b(Unitary1.phase(alpha), tag),
        ]
    if name == MACRO_SHIFT_B:
        return _shift_b_swap_rounds(instr)
    if name in ALL_MACROS:
        return NATIVE
    raise UnknownMacro(f"Unknown macro {name!r}")


def _shift_b_swap_rounds(instr: PulseInstruction) -> list[PulseInstruction]:
    # (SWAP_BA, SWAP_AB) carries B(2k+1) to B(2k+3); the reverse order carries it down
    first, second = (
        (MACRO_SWAP_BA, MACRO_SWAP_AB)
        if instr.args["dir"] == 1
        else (MACRO_SWAP_AB, MACRO_SWAP_BA)
    )
    round_ = expand_macro(macro(first, tag=instr.tag)) + expand_macro(
        macro(second, tag=instr.tag)
    )
    return round_ * instr.args.get("spacings", UNIT_SPACINGS)


def expand_program(instrs) -> list[PulseInstruction]:
    """
    Replace every expandable macro by its primitives.

    Natives stay, and so does SHIFT_B: its SWAP expansion also moves the A
    sublattice.
    """
    out = []
    for instr in instrs:
        if instr.op == OP_MACRO and instr.macro != MACRO_SHIFT_B:
            expansion = expand_macro(instr)
            if expansion != NATIVE:
                out.extend(expansion)
                continue
        out.append(instr)
    return out


# =============================================================================
# Execution
# =============================================================================


def a_cells(n: int) -> range:
    return range(0, n, 2)


def b_cells(n: int) -> range:
    return range(1, n, 2)


def ab_pairs(n: int) -> list[tuple[int, int]]:
    """(A, B) pairs (2k, 2k+1)."""
    return [(i, i + 1) for i in range(0, n - 1, 2)]


def ba_pairs(n: int) -> list[tuple[int, int]]:
    """(B, A) pairs (2k+1, 2k+2)."""
    return [(i, i + 1) for i in range(1, n - 1, 2)]


def shift_b_mapping(n: int, direction: int, spacings: int) -> dict[int, int]:
    """Cyclic rotation of the B sublattice: cell -> destination cell."""
    half = n // 2
    return {
        2 * p + 1: 2 * ((p + direction * spacings) % half) + 1 for p in range(half)
    }


def sandwich_controls(n: int, j: int) -> tuple[int, int] | None:
    """A neighbours of B cell j, or None when one is missing."""
    if j + 1 >= n:
        return None
    return j - 1, j + 1


def flip_b_sandwich(state: ChainState):
    """
    Flip every B cell whose two A neighbours are both 1.

    The flip is a coherent doubly controlled X; the controls are untouched so
    sweeping in index order equals simultaneous application. A missing
    boundary neighbour counts as 0.
    """
    for j in b_cells(state.n):
        controls = sandwich_controls(state.n, j)
        if controls is not None:
            state.apply_controlled(list(controls), j, PAULI_X)


def controlled_reset_ba(state: ChainState, rng):
    """Reset every A cell whose left B partner is 1; controls must be definite."""
    pairs = ba_pairs(state.n)
    fire = []
    for b, a in pairs:
        bit = state.classical_bit(b)
        if bit is None:
            raise QuantumControlledReset(f"CRESET_BA control B({b}) is not classical")
        if bit == 1:
            fire.append(a)
    for a in fire:
        state.reset_qubit(a, rng)


def controlled_reset_sandwich(state: ChainState, rng):
    """
    Reset every B cell whose two A neighbours are both 1.

    A target that is already definite 0 is skipped, as is any cell with a
    definite 0 control; a quantum control on a live target is an error.
    """
    fire = []
    for j in b_cells(state.n):
        controls = sandwich_controls(state.n, j)
        if controls is None or state.classical_bit(j) == 0:
            continue
        bits = [state.classical_bit(c) for c in controls]
        if 0 in bits:
            continue
        if None in bits:
            raise QuantumControlledReset(
                f"CRESET_SANDWICH on B({j}) has a quantum control"
            )
        fire.append(j)
    for j in fire:
        state.reset_qubit(j, rng)


def _execute_macro(state: ChainState, instr: PulseInstruction, rng):
    n = state.n
    name = instr.macro
    if name == MACRO_CNOT_AB:
        for a, b in ab_pairs(n):
            state.apply_controlled([a], b, PAULI_X)
    elif name == MACRO_CNOT_BA:
        for b, a in ba_pairs(n):
            state.apply_controlled([a], b, PAULI_X)
    elif name in (MACRO_SWAP_AB, MACRO_SWAP_BA):
        pairs = ab_pairs(n) if name == MACRO_SWAP_AB else ba_pairs(n)
        mapping = {}
        for i, j in pairs:
            mapping[i], mapping[j] = j, i
        state.permute(mapping)
    elif name == MACRO_SHIFT_B:
        state.permute(
            shift_b_mapping(n, instr.args["dir"], instr.args.get("spacings", UNIT_SPACINGS))
        )
    elif name == MACRO_CTRL_U_BA:
        for b, a in ba_pairs(n):
            state.apply_controlled([b], a, instr.u)
    elif name == MACRO_CTRL_U_AB:
        for a, b in ab_pairs(n):
            state.apply_controlled([b], a, instr.u)
    elif name == MACRO_FLIP_B_SANDWICH:
        flip_b_sandwich(state)
    elif name == MACRO_CRESET_BA:
        controlled_reset_ba(state, rng)
    elif name == MACRO_CRESET_SANDWICH:
        controlled_reset_sandwich(state, rng)
    else:
        raise UnknownMacro(f"Unknown macro {name!r}")


def execute(state: ChainState, instr: PulseInstruction, rng=None) -> ExecutionRecord:
    """
    Apply one instruction to a hybrid state.

    Args:
        state: Chain state, modified in place
        instr: Instruction to apply
        rng: numpy Generator; needed only when an outcome is random

    Returns:
        ExecutionRecord with the primitive step count and, for MEASURE, the
        outcome bits of the sublattice in ascending cell order
    """
    n = state.n
    op = instr.op
    outcomes = None
    if op == OP_ROT_A or op == OP_ROT_B:
        cells = a_cells(n) if op == OP_ROT_A else b_cells(n)
        for i in cells:
            state.apply_unitary1(i, instr.u)
    elif op in CPHASE_OPS:
        pairs = ab_pairs(n) if op == OP_CP_AB else ba_pairs(n)
        for i, j in pairs:
            state.apply_cphase(i, j, instr.theta)
    elif op in RESET_OPS:
        cells = a_cells(n) if op == OP_RESET_A else b_cells(n)
        for i in cells:
            state.reset_qubit(i, rng)
    elif op in MEASURE_OPS:
        cells = a_cells(n) if op == OP_MEASURE_A else b_cells(n)
        outcomes = [state.measure_qubit(i, rng) for i in cells]
    elif op == OP_MACRO:
        _execute_macro(state, instr, rng)
    else:
        raise InvalidInstruction(f"Unknown op {op!r}")
    steps = instruction_cost(instr)
    state.step_counter += steps
    return ExecutionRecord(steps=steps, outcomes=outcomes)


def run(state: ChainState, instrs, rng=None) -> list[ExecutionRecord]:
    """Execute a sequence of instructions (or a PulseProgram) in order."""
    return [execute(state, instr, rng) for instr in instrs]


# =============================================================================
# Serialization
# =============================================================================


def dumps(program: PulseProgram) -> str:
    """Render a program as JSON lines (header first)."""
    lines = [to_json_text({"program": program.name, "fingerprint": program.fingerprint})]
    lines.extend(to_json_text(instr.to_dict()) for instr in program.instructions)
    return "\n".join(lines) + "\n"


def serialize(program: PulseProgram) -> bytes:
    return dumps(program).encode("utf-8")


def parse(data: bytes | str) -> PulseProgram:
    """
    Parse JSON-lines program text.

    Raises:
        ProgramParseError: With the 1-based line number of the first bad line
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    program = PulseProgram()
    seen_header = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            document = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProgramParseError(line_no, f"invalid JSON: {exc.msg}") from exc
        if isinstance(document, dict) and "program" in document and "op" not in document:
            if seen_header or program.instructions:
                raise ProgramParseError(line_no, "header must be the first line")
            program.name = str(document["program"])
            program.fingerprint = str(document.get("fingerprint") or "")
            seen_header = True
            continue
        try:
            program.append(PulseInstruction.from_dict(document))
        except ValueError as exc:
            raise ProgramParseError(line_no, str(exc)) from exc
    return program


def check_fingerprint(program: PulseProgram, layout, strict: bool = True) -> bool:
    """
    Compare a program's fingerprint against a layout.

    Args:
        program: Pulse program
        layout: Layout it is about to run on
        strict: Raise on mismatch instead of warning

    Returns:
        True when the fingerprints match

    Raises:
        FingerprintMismatch: On mismatch when strict
    """
    if program.fingerprint == layout.fingerprint:
        return True
    message = (
        f"Program {program.name!r} was built for layout "
        f"{program.fingerprint[:12] or '<none>'}, not {layout.fingerprint[:12]}"
    )
    if strict:
        raise FingerprintMismatch(message)
    logger.warning(message)
    return False
