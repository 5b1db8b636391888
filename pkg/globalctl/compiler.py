"""
Gate-level circuits compiled to global pulse programs.

A circuit is an ordered list of ops. ``compile`` runs each op's protocol on a
shadow chain with a recording ``PulseRunner`` and concatenates the emitted
pulses, so transport distances come from the layout and the program is
deterministic for fixed inputs.

Triple-CU rotations need parameters (U1, U2, U3) whose doubled-sequence
evolution equals the requested gate; ``solve_pulse_params`` finds them with
multi-start Nelder-Mead over nine ZYZ angles.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from globalctl.chain_state import init
from globalctl.constants import (
    CPHASE_OPS,
    DEFAULT_ANCILLA_UNIT,
    MACRO_SHIFT_B,
    OP_MACRO,
    OP_MEASURE_A,
    PATTERN_SINGLE_CU,
    PATTERN_TRIPLE_CU,
    SOLVER_TOL,
    UNIT_SPACINGS,
)
from globalctl.exceptions import CircuitError, ConvergenceFailure, InvalidInstruction
from globalctl.layout import Layout
from globalctl.protocols import (
    PulseRunner,
    reset_a_buffers,
    targeted_single_qubit_gate,
    two_qubit_gate,
)
from globalctl.pulse_isa import PulseInstruction, PulseProgram, instruction_cost
from globalctl.redundant_cu import (
    TripleCuParams,
    correction_cycle,
    target_evolution,
    targeted_rotation_3cu,
)
from globalctl.unitary import (
    HADAMARD,
    IDENTITY,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    Unitary1,
    phase_distance,
)
from globalctl.utils import make_rng, thread_budget

logger = logging.getLogger(__name__)

METHOD_SINGLE_CU = "single-CU"
METHOD_TRIPLE_CU = "triple-CU"
METHODS = (METHOD_SINGLE_CU, METHOD_TRIPLE_CU)

# Solver starts are evaluated in fixed-size chunks so early stopping does not
# depend on the thread count.
SOLVER_CHUNK = 4
DEFAULT_SOLVER_STARTS = 32

NAMED_GATES = {
    "I": IDENTITY,
    "X": PAULI_X,
    "Y": PAULI_Y,
    "Z": PAULI_Z,
    "H": HADAMARD,
}


# =============================================================================
# Circuit IR
# =============================================================================


@dataclass(frozen=True)
class PrepareCU:
    """Declares the CU arrangement the program starts from."""

    pattern: str = PATTERN_SINGLE_CU

    def to_dict(self) -> dict:
        return {"op": "PrepareCU", "pattern": self.pattern}


@dataclass(frozen=True)
class SingleQubit:
    q: int
    u: Unitary1
    method: str = METHOD_SINGLE_CU

    def to_dict(self) -> dict:
        return {"op": "SingleQubit", "q": self.q, "u": self.u.to_dict(), "method": self.method}


@dataclass(frozen=True)
class TwoQubit:
    """Controlled-U with control ``y`` and target ``x``."""

    y: int
    x: int
    u: Unitary1

    def to_dict(self) -> dict:
        return {"op": "TwoQubit", "y": self.y, "x": self.x, "u": self.u.to_dict()}


@dataclass(frozen=True)
class BufferReset:
    def to_dict(self) -> dict:
        return {"op": "BufferReset"}


@dataclass(frozen=True)
class CorrectionCycle:
    ancilla: int = DEFAULT_ANCILLA_UNIT

    def to_dict(self) -> dict:
        return {"op": "CorrectionCycle", "ancilla": self.ancilla}


@dataclass(frozen=True)
class Measure:
    q: int

    def to_dict(self) -> dict:
        return {"op": "Measure", "q": self.q}


@dataclass
class CircuitIR:
    """Ordered circuit ops."""

    ops: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    @property
    def initial_pattern(self) -> str:
        """Pattern declared by PrepareCU, else inferred from the ops."""
        for op in self.ops:
            if isinstance(op, PrepareCU):
                return op.pattern
        for op in self.ops:
            if isinstance(op, CorrectionCycle) or (
                isinstance(op, SingleQubit) and op.method == METHOD_TRIPLE_CU
            ):
                return PATTERN_TRIPLE_CU
        return PATTERN_SINGLE_CU

    def validate(self, layout: Layout):
        """
        Check op order, qubit indices and methods against a layout.

        Raises:
            CircuitError: On the first invalid op
        """
        pattern = self.initial_pattern
        if pattern not in (PATTERN_SINGLE_CU, PATTERN_TRIPLE_CU):
            raise CircuitError(f"PrepareCU pattern must be single-CU or triple-CU, got {pattern!r}")
        measuring = False
        for index, op in enumerate(self.ops):
            where = f"op {index} ({type(op).__name__})"
            if isinstance(op, PrepareCU):
                if index != 0:
                    raise CircuitError(f"{where}: PrepareCU must come first")
                continue
            if isinstance(op, Measure):
                measuring = True
                _check_qubit(layout, op.q, where)
                continue
            if measuring:
                raise CircuitError(f"{where}: only Measure may follow a Measure")
            if isinstance(op, SingleQubit):
                _check_qubit(layout, op.q, where)
                if op.method not in METHODS:
                    raise CircuitError(f"{where}: unknown method {op.method!r}")
                needed = PATTERN_TRIPLE_CU if op.method == METHOD_TRIPLE_CU else PATTERN_SINGLE_CU
                if needed != pattern:
                    raise CircuitError(f"{where}: method {op.method} on a {pattern} circuit")
                if op.method == METHOD_TRIPLE_CU and not layout.is_regular_span(op.q - 3, op.q + 3):
                    raise CircuitError(f"{where}: triple-CU target needs units q-3..q+3")
            elif isinstance(op, TwoQubit):
                _check_qubit(layout, op.y, where)
                _check_qubit(layout, op.x, where)
                if op.x == op.y:
                    raise CircuitError(f"{where}: control and target coincide")
                if pattern != PATTERN_SINGLE_CU:
                    raise CircuitError(f"{where}: two-qubit gates need the single-CU pattern")
            elif isinstance(op, BufferReset):
                if pattern != PATTERN_SINGLE_CU:
                    raise CircuitError(f"{where}: buffer resets need the single-CU pattern")
                if layout.has_stations:
                    raise CircuitError(
                        f"{where}: station buffer resets need pre-pattern writes; "
                        "run them through the protocol API"
                    )
            elif isinstance(op, CorrectionCycle):
                if pattern != PATTERN_TRIPLE_CU:
                    raise CircuitError(f"{where}: correction needs the triple-CU pattern")
            else:
                raise CircuitError(f"{where}: unsupported op")

    def to_json(self) -> str:
        return json.dumps([op.to_dict() for op in self.ops], indent=2)


def _check_qubit(layout: Layout, q, where: str):
    if isinstance(q, bool) or not isinstance(q, int) or not 0 <= q < layout.n_comp:
        raise CircuitError(f"{where}: qubit {q!r} outside 0..{layout.n_comp - 1}")


def parse_unitary_spec(spec) -> Unitary1:
    """
    Parse a gate given as a name, an object, or ``axis:x,y,z:angle`` / ``zyz:b,g,d``.

    Raises:
        InvalidInstruction: If the spec is malformed
    """
    if isinstance(spec, dict):
        return Unitary1.from_dict(spec)
    if not isinstance(spec, str):
        raise InvalidInstruction(f"Cannot read a unitary from {spec!r}")
    text = spec.strip()
    if text.upper() in NAMED_GATES:
        return NAMED_GATES[text.upper()]
    try:
        kind, _, rest = text.partition(":")
        if kind == "axis":
            axis, _, angle = rest.partition(":")
            return Unitary1.from_axis_angle(
                [float(x) for x in axis.split(",")], float(angle)
            )
        if kind == "zyz":
            beta, gamma, delta = (float(x) for x in rest.split(","))
            return Unitary1.from_zyz(beta, gamma, delta)
        if kind == "json":
            return Unitary1.from_dict(json.loads(rest))
    except (TypeError, ValueError) as exc:
        raise InvalidInstruction(f"Malformed unitary spec {spec!r}: {exc}") from exc
    raise InvalidInstruction(f"Unknown unitary spec {spec!r}")


def _op_from_dict(document: dict, index: int):
    if not isinstance(document, dict) or "op" not in document:
        raise CircuitError(f"op {index}: expected an object with an 'op' field")
    kind = document["op"]
    try:
        if kind == "PrepareCU":
            return PrepareCU(document.get("pattern", PATTERN_SINGLE_CU))
        if kind == "SingleQubit":
            return SingleQubit(
                document["q"],
                parse_unitary_spec(document["u"]),
                document.get("method", METHOD_SINGLE_CU),
            )
        if kind == "TwoQubit":
            return TwoQubit(document["y"], document["x"], parse_unitary_spec(document["u"]))
        if kind == "BufferReset":
            return BufferReset()
        if kind == "CorrectionCycle":
            return CorrectionCycle(document.get("ancilla", DEFAULT_ANCILLA_UNIT))
        if kind == "Measure":
            return Measure(document["q"])
    except KeyError as exc:
        raise CircuitError(f"op {index} ({kind}): missing field {exc}") from exc
    raise CircuitError(f"op {index}: unknown op {kind!r}")


def circuit_from_json(document) -> CircuitIR:
    """
    Build a circuit from a JSON array of op objects (text or parsed).

    Raises:
        CircuitError: If the document is not an array of known ops
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise CircuitError(f"Circuit is not valid JSON: {exc.msg}") from exc
    if not isinstance(document, list):
        raise CircuitError("Circuit must be a JSON array of ops")
    return CircuitIR([_op_from_dict(item, i) for i, item in enumerate(document)])


# =============================================================================
# Pulse-parameter solver
# =============================================================================


@dataclass
class SolverResult:
    params: TripleCuParams
    residual: float
    iterations: int
    start: int = 0

    @property
    def converged(self) -> bool:
        return self.residual <= SOLVER_TOL

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "residual": self.residual,
            "iterations": self.iterations,
            "start": self.start,
            "converged": self.converged,
        }


_SZ = np.diag([1.0, -1.0]).astype(complex)


def _zyz_matrix(beta: float, gamma: float, delta: float) -> np.ndarray:
    c, s = math.cos(gamma / 2.0), math.sin(gamma / 2.0)
    return np.array(
        [
            [np.exp(-0.5j * (beta + delta)) * c, -np.exp(-0.5j * (beta - delta)) * s],
            [np.exp(0.5j * (beta - delta)) * s, np.exp(0.5j * (beta + delta)) * c],
        ]
    )


def _evolution_matrix(angles: np.ndarray) -> np.ndarray:
    u1 = _zyz_matrix(*angles[0:3])
    u2 = _zyz_matrix(*angles[3:6])
    u3 = _zyz_matrix(*angles[6:9])
    u4 = (u1 @ u2 @ u3).conj().T
    half = u1 @ _SZ @ u2 @ _SZ @ u3 @ _SZ @ u4
    return half @ half


def _objective(angles: np.ndarray, target_dagger: np.ndarray) -> float:
    return 1.0 - abs(np.trace(target_dagger @ _evolution_matrix(angles))) / 2.0


def params_from_angles(angles, target: int = 0) -> TripleCuParams:
    a = [float(x) for x in angles]
    return TripleCuParams(
        Unitary1.from_zyz(*a[0:3]),
        Unitary1.from_zyz(*a[3:6]),
        Unitary1.from_zyz(*a[6:9]),
        target,
    )


def _run_start(index: int, x0: np.ndarray, target_dagger: np.ndarray, tol: float):
    """Nelder-Mead from one start, restarted while it keeps improving."""
    best_x, best_f, iterations = x0, _objective(x0, target_dagger), 0
    for _ in range(4):
        result = minimize(
            _objective,
            best_x,
            args=(target_dagger,),
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 6000, "maxfev": 12000},
        )
        iterations += int(result.nit)
        improved = result.fun < best_f - 1e-16
        if result.fun < best_f:
            best_x, best_f = result.x, float(result.fun)
        if best_f <= tol * 1e-3 or not improved:
            break
    return index, best_x, max(best_f, 0.0), iterations


def solve_pulse_params(
    target: Unitary1,
    starts: int = DEFAULT_SOLVER_STARTS,
    seed: int = 0,
    tol: float = SOLVER_TOL,
) -> SolverResult:
    """
    Find (U1, U2, U3) whose doubled triple-CU evolution equals ``target``.

    Each Ui is Rz Ry Rz; the residual is 1 - |tr(T^dagger V)|/2. Starts are
    drawn from a seeded generator and evaluated in fixed chunks; the best
    residual wins, ties going to the lower start index.

    Args:
        target: Requested single-qubit gate
        starts: Start budget
        seed: Seed for the start schedule
        tol: Acceptance residual

    Returns:
        SolverResult for the best start

    Raises:
        ConvergenceFailure: If no start reaches ``tol``; ``best`` holds the
            best SolverResult found
    """
    if phase_distance(target, IDENTITY) <= tol * 1e-3:
        return SolverResult(TripleCuParams(), phase_distance(target, IDENTITY), 0)

    target_dagger = target.matrix.conj().T
    rng = make_rng(seed)
    schedule = rng.uniform(-math.pi, math.pi, size=(starts, 9))
    best = None
    workers = thread_budget()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for chunk_start in range(0, starts, SOLVER_CHUNK):
            indices = range(chunk_start, min(chunk_start + SOLVER_CHUNK, starts))
            outcomes = pool.map(
                lambda i: _run_start(i, schedule[i], target_dagger, tol), indices
            )
            for index, x, residual, iterations in outcomes:
                if best is None or residual < best[2]:
                    best = (index, x, residual, iterations)
            if best[2] <= tol:
                break

    index, x, residual, iterations = best
    # report the residual of the params actually returned
    params = params_from_angles(x)
    residual = phase_distance(target_evolution(params), target)
    result = SolverResult(params, max(residual, 0.0), iterations, index)
    logger.debug(
        f"solver: residual {result.residual:.3e} after {iterations} iterations "
        f"(start {index})"
    )
    if residual > tol:
        raise ConvergenceFailure(
            f"Best residual {residual:.3e} exceeds {tol:.1e} after {starts} starts",
            best=result,
        )
    return result


def compose_fallback(
    target: Unitary1, attempts: int = 8, seed: int = 0, tol: float = SOLVER_TOL
) -> list[SolverResult]:
    """
    Realize ``target`` as two consecutive triple-CU rotations.

    The first rotation is the evolution of random parameters; the second
    solves for the remainder target * first^dagger.

    Returns:
        [first, second] in application order

    Raises:
        ConvergenceFailure: If no attempt solves the remainder
    """
    rng = make_rng(seed)
    best = None
    for attempt in range(attempts):
        first = params_from_angles(rng.uniform(-math.pi, math.pi, size=9))
        first_t = target_evolution(first)
        remainder = target @ first_t.dagger()
        try:
            second = solve_pulse_params(remainder, seed=seed + attempt + 1, tol=tol)
        except ConvergenceFailure as exc:
            if best is None or exc.best.residual < best.residual:
                best = exc.best
            continue
        return [SolverResult(first, 0.0, 0), second]
    raise ConvergenceFailure(
        f"No two-rotation composition reached {tol:.1e} in {attempts} attempts",
        best=best,
    )


def solve_or_compose(target: Unitary1, seed: int = 0) -> list[SolverResult]:
    try:
        return [solve_pulse_params(target, seed=seed)]
    except ConvergenceFailure as exc:
        logger.warning(
            f"Direct solve failed ({exc}); composing two triple-CU rotations"
        )
        return compose_fallback(target, seed=seed)


# =============================================================================
# Compilation
# =============================================================================


def _compile_op(op, state, layout: Layout, runner: PulseRunner, seed: int):
    if isinstance(op, PrepareCU):
        return
    if isinstance(op, SingleQubit):
        if op.method == METHOD_SINGLE_CU:
            targeted_single_qubit_gate(state, layout, op.q, op.u, runner=runner)
            return
        for solved in solve_or_compose(op.u, seed=seed):
            targeted_rotation_3cu(state, layout, solved.params.with_target(op.q), runner=runner)
        return
    if isinstance(op, TwoQubit):
        two_qubit_gate(state, layout, op.y, op.x, op.u, runner=runner)
        return
    if isinstance(op, BufferReset):
        reset_a_buffers(state, layout, runner=runner)
        return
    if isinstance(op, CorrectionCycle):
        correction_cycle(state, layout, op.ancilla, runner=runner)
        return


def compile(circuit: CircuitIR, layout: Layout, seed: int = 0) -> PulseProgram:
    """
    Compile a circuit into a pulse program for ``layout``.

    The program runs on a chain initialized with ``circuit.initial_pattern``.
    Trailing Measure ops become one MEASURE_A pulse.

    Args:
        circuit: Circuit to compile
        layout: Target layout
        seed: Seed for the solver and the shadow run

    Returns:
        PulseProgram carrying the layout fingerprint

    Raises:
        CircuitError: If the circuit is invalid for the layout, or an op
            needs classical pre-pattern writes that a program cannot carry
    """
    circuit.validate(layout)
    state = init(layout, circuit.initial_pattern)
    runner = PulseRunner(state, layout, rng=make_rng(seed), record=True, name="circuit")
    measured = False
    for index, op in enumerate(circuit):
        if isinstance(op, Measure):
            if not measured:
                runner.emit(PulseInstruction(OP_MEASURE_A))
                measured = True
            continue
        _compile_op(op, state, layout, runner, seed + index)
        if runner.prepatterned:
            raise CircuitError(
                f"op {index} ({type(op).__name__}) needs station pre-patterning, "
                "which a pulse program cannot express"
            )
    logger.debug(f"compiled {len(circuit)} ops into {len(runner.program)} pulses")
    return runner.program


# =============================================================================
# Schedule report
# =============================================================================


def schedule_report(program) -> dict:
    """
    Per-kind instruction counts and transport totals.

    Args:
        program: PulseProgram or list of instructions

    Returns:
        Dict with instructions, steps, counts, cp_pulses, shift_spacings and
        transport_units
    """
    counts: dict[str, int] = {}
    steps = 0
    cp_pulses = 0
    spacings = 0
    total = 0
    for instr in program:
        total += 1
        counts[instr.name] = counts.get(instr.name, 0) + 1
        steps += instruction_cost(instr)
        if instr.op in CPHASE_OPS:
            cp_pulses += 1
        if instr.op == OP_MACRO and instr.macro == MACRO_SHIFT_B:
            spacings += instr.args.get("spacings", UNIT_SPACINGS)
    return {
        "instructions": total,
        "steps": steps,
        "counts": dict(sorted(counts.items())),
        "cp_pulses": cp_pulses,
        "shift_spacings": spacings,
        "transport_units": spacings / UNIT_SPACINGS,
    }
