"""
Unit tests for globalctl.compiler module.
"""

import math
from unittest.mock import patch

import numpy as np
import pytest

from globalctl.chain_state import init
from globalctl.compiler import (
    METHOD_TRIPLE_CU,
    BufferReset,
    CircuitIR,
    CorrectionCycle,
    Measure,
    PrepareCU,
    SingleQubit,
    SolverResult,
    TwoQubit,
    circuit_from_json,
    compile,
    parse_unitary_spec,
    schedule_report,
    solve_or_compose,
    solve_pulse_params,
)
from globalctl.constants import (
    PATTERN_BLOCK_CUS,
    PATTERN_SINGLE_CU,
    PATTERN_TRIPLE_CU,
    SOLVER_TOL,
)
from globalctl.dense_oracle import compare, run_program
from globalctl.exceptions import CircuitError, ConvergenceFailure, InvalidInstruction
from globalctl.layout import build_layout
from globalctl.protocols import record_protocol, reset_a_buffers, reset_b_buffers
from globalctl.pulse_isa import run
from globalctl.redundant_cu import TripleCuParams, random_params, target_evolution
from globalctl.unitary import (
    HADAMARD,
    IDENTITY,
    PAULI_X,
    Unitary1,
    phase_distance,
    random_unitary,
)


class TestParseUnitarySpec:
    """Tests for parse_unitary_spec function."""

    def test_named(self):
        """Test case-insensitive gate names."""
        assert parse_unitary_spec("h") == HADAMARD

    def test_axis_angle(self):
        """Test the axis:x,y,z:angle form."""
        u = parse_unitary_spec(f"axis:1,0,0:{math.pi}")
        assert phase_distance(u, PAULI_X) < 1e-12

    def test_zyz(self):
        """Test the zyz:b,g,d form."""
        u = parse_unitary_spec("zyz:0.1,0.2,0.3")
        assert u.allclose(Unitary1.from_zyz(0.1, 0.2, 0.3))

    def test_object(self):
        """Test that a dict is read through Unitary1.from_dict."""
        assert parse_unitary_spec(PAULI_X.to_dict()) == PAULI_X

    @pytest.mark.parametrize("spec", ["T", "axis:1,0:x", "zyz:1,2", 5])
    def test_malformed(self, spec):
        """Test that unknown or malformed specs raise InvalidInstruction."""
        with pytest.raises(InvalidInstruction):
            parse_unitary_spec(spec)


class TestCircuitFromJson:
    """Tests for circuit_from_json function."""

    def test_parses_ops(self):
        """Test every op kind."""
        circuit = circuit_from_json(
            '[{"op": "PrepareCU", "pattern": "single-CU"},'
            ' {"op": "SingleQubit", "q": 1, "u": "X"},'
            ' {"op": "TwoQubit", "y": 0, "x": 1, "u": "Z"},'
            ' {"op": "BufferReset"},'
            ' {"op": "Measure", "q": 0}]'
        )
        kinds = [type(op) for op in circuit]
        assert kinds == [PrepareCU, SingleQubit, TwoQubit, BufferReset, Measure]
        assert circuit.ops[1].u == PAULI_X

    def test_round_trip(self):
        """Test that to_json output parses back to equal ops."""
        circuit = CircuitIR([SingleQubit(0, HADAMARD), Measure(0)])
        assert circuit_from_json(circuit.to_json()).ops == circuit.ops

    def test_invalid_json(self):
        """Test that malformed text raises CircuitError."""
        with pytest.raises(CircuitError):
            circuit_from_json("[{")

    def test_not_an_array(self):
        """Test that a top-level object is rejected."""
        with pytest.raises(CircuitError):
            circuit_from_json({"op": "Measure", "q": 0})

    def test_unknown_op(self):
        """Test that unknown op names raise CircuitError."""
        with pytest.raises(CircuitError):
            circuit_from_json([{"op": "Teleport"}])

    def test_missing_field(self):
        """Test that a missing field names the op."""
        with pytest.raises(CircuitError, match="missing field"):
            circuit_from_json([{"op": "SingleQubit", "u": "X"}])


class TestValidate:
    """Tests for CircuitIR.validate and initial_pattern."""

    def test_pattern_inferred(self):
        """Test that triple-CU ops imply the triple-CU pattern."""
        assert CircuitIR([Measure(0)]).initial_pattern == PATTERN_SINGLE_CU
        assert CircuitIR([CorrectionCycle()]).initial_pattern == PATTERN_TRIPLE_CU

    def test_prepare_must_come_first(self, four_unit_layout):
        """Test that a late PrepareCU is rejected."""
        circuit = CircuitIR([SingleQubit(0, PAULI_X), PrepareCU()])
        with pytest.raises(CircuitError, match="first"):
            circuit.validate(four_unit_layout)

    def test_only_measure_after_measure(self, four_unit_layout):
        """Test that gates may not follow a measurement."""
        circuit = CircuitIR([Measure(0), SingleQubit(0, PAULI_X)])
        with pytest.raises(CircuitError):
            circuit.validate(four_unit_layout)

    def test_qubit_range(self, four_unit_layout):
        """Test that qubit indices past n_comp are rejected."""
        with pytest.raises(CircuitError):
            CircuitIR([SingleQubit(4, PAULI_X)]).validate(four_unit_layout)

    def test_two_qubit_same_qubit(self, four_unit_layout):
        """Test that control and target must differ."""
        with pytest.raises(CircuitError):
            CircuitIR([TwoQubit(1, 1, PAULI_X)]).validate(four_unit_layout)

    def test_two_qubit_needs_single_cu(self, triple_layout):
        """Test that two-qubit gates are refused on triple-CU circuits."""
        circuit = CircuitIR([PrepareCU(PATTERN_TRIPLE_CU), TwoQubit(3, 4, PAULI_X)])
        with pytest.raises(CircuitError):
            circuit.validate(triple_layout)

    def test_triple_cu_needs_room(self, triple_layout):
        """Test that a triple-CU target needs three units each side."""
        circuit = CircuitIR([SingleQubit(8, PAULI_X, METHOD_TRIPLE_CU)])
        with pytest.raises(CircuitError):
            circuit.validate(triple_layout)

    def test_station_buffer_reset(self, station_layout):
        """Test that station buffer resets cannot be compiled."""
        with pytest.raises(CircuitError):
            CircuitIR([BufferReset()]).validate(station_layout)


class TestSolver:
    """Tests for solve_pulse_params and solve_or_compose."""

    def test_identity_shortcut(self):
        """Test that the identity needs no search."""
        result = solve_pulse_params(IDENTITY)
        assert result.iterations == 0
        assert result.converged

    def test_forward_target(self, rng):
        """Test that an evolution of known params is solved."""
        target = target_evolution(random_params(rng))
        result = solve_pulse_params(target, seed=3)
        assert phase_distance(target_evolution(result.params), target) <= SOLVER_TOL

    @pytest.mark.parametrize("gate", [PAULI_X, HADAMARD])
    def test_named_targets(self, gate):
        """Test the solver on X and H."""
        result = solve_pulse_params(gate, seed=1)
        assert result.converged
        assert phase_distance(target_evolution(result.params), gate) <= SOLVER_TOL

    def test_deterministic(self, rng):
        """Test that the same seed yields the same parameters."""
        target = target_evolution(random_params(rng))
        a = solve_pulse_params(target, seed=7)
        b = solve_pulse_params(target, seed=7)
        assert a.to_dict() == b.to_dict()

    def test_convergence_failure_carries_best(self):
        """Test that an unsolved target raises with the best result attached."""
        with patch(
            "globalctl.compiler._run_start",
            side_effect=lambda i, x0, td, tol: (i, x0, 1.0, 1),
        ):
            with pytest.raises(ConvergenceFailure) as info:
                solve_pulse_params(PAULI_X, starts=4)
        assert isinstance(info.value.best, SolverResult)
        assert not info.value.best.converged

    def test_solve_or_compose_falls_back(self):
        """Test that a failed direct solve composes two rotations."""
        second = SolverResult(TripleCuParams(), 0.0, 1)
        with patch(
            "globalctl.compiler.solve_pulse_params",
            side_effect=[ConvergenceFailure("no", best=second), second],
        ):
            results = solve_or_compose(PAULI_X)
        assert len(results) == 2
        assert results[1] is second


class TestCompile:
    """Tests for compile and schedule_report."""

    def test_empty_circuit(self, four_unit_layout):
        """Test that an empty circuit compiles to an empty program."""
        program = compile(CircuitIR(), four_unit_layout)
        assert len(program) == 0
        assert program.fingerprint == four_unit_layout.fingerprint

    def test_x_flip(self, four_unit_layout):
        """Test that a compiled X on qubit 1 flips only A(6)."""
        program = compile(CircuitIR([SingleQubit(1, PAULI_X)]), four_unit_layout)
        state = init(four_unit_layout, PATTERN_SINGLE_CU)
        run(state, program)
        bits = state.classical_bits()
        assert bits[6] == 1
        assert bits[1] == 1
        assert sum(bits) == 2

    def test_trailing_measure_single_pulse(self, four_unit_layout):
        """Test that consecutive Measure ops share one MEASURE_A."""
        circuit = CircuitIR([SingleQubit(0, PAULI_X), Measure(0), Measure(1)])
        program = compile(circuit, four_unit_layout)
        assert [i.name for i in program].count("MEASURE_A") == 1

    def test_compile_deterministic(self, four_unit_layout):
        """Test that compiling twice gives the same program."""
        circuit = CircuitIR([SingleQubit(0, HADAMARD), TwoQubit(0, 1, PAULI_X)])
        a = compile(circuit, four_unit_layout, seed=2)
        b = compile(circuit, four_unit_layout, seed=2)
        assert [i.to_dict() for i in a] == [i.to_dict() for i in b]

    def test_triple_cu_schedule(self, triple_layout):
        """Test six CP pulses and twelve units of transport for one rotation."""
        circuit = CircuitIR([SingleQubit(3, IDENTITY, METHOD_TRIPLE_CU)])
        report = schedule_report(compile(circuit, triple_layout))
        assert report["cp_pulses"] == 6
        assert report["transport_units"] == 12
        assert report["counts"]["CP_AB"] == 6
        assert report["instructions"] == sum(report["counts"].values())


@pytest.mark.slow
class TestSolverSweep:
    """Slow solver coverage over Haar-random targets."""

    def test_fifty_random_targets(self):
        """Test that 50 random targets are each realized directly or by composition."""
        rng = np.random.default_rng(2024)
        for k in range(50):
            target = random_unitary(rng)
            results = solve_or_compose(target, seed=k)
            realized = IDENTITY
            for result in results:
                realized = target_evolution(result.params) @ realized
            assert phase_distance(realized, target) <= 10 * SOLVER_TOL


class TestScheduleSteps:
    """Tests for per-block step counts reported by schedule_report."""

    @pytest.mark.parametrize("protocol", [reset_a_buffers, reset_b_buffers])
    def test_block_reset_steps_constant(self, protocol):
        """Test that block-mode resets cost the same for 2, 4 and 8 qubits."""
        reports = []
        for n_comp in (2, 4, 8):
            layout = build_layout({"n_comp": n_comp, "L": 2, "ss_width": 1})
            program, _ = record_protocol(protocol, layout, PATTERN_BLOCK_CUS)
            reports.append(schedule_report(program))
        assert reports[0]["steps"] > 0
        for report in reports[1:]:
            assert report["steps"] == reports[0]["steps"]
            assert report["counts"] == reports[0]["counts"]


P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])


def ideal_payload(circuit):
    """Two-qubit state vector (little-endian) of a circuit run from |00>."""
    psi = np.array([1, 0, 0, 0], dtype=complex)
    for op in circuit.ops:
        if isinstance(op, SingleQubit):
            gate = np.kron(np.eye(2), op.u.matrix) if op.q == 0 else np.kron(op.u.matrix, np.eye(2))
        elif op.y == 0:
            gate = np.kron(np.eye(2), P0) + np.kron(op.u.matrix, P1)
        else:
            gate = np.kron(P0, np.eye(2)) + np.kron(P1, op.u.matrix)
        psi = gate @ psi
    return psi


class TestCompileEquivalence:
    """Compiled programs against the dense oracle and the ideal circuit."""

    def test_thirty_random_circuits(self, two_unit_layout):
        """Test random 2-4 op circuits on n = 12 within 1e-9 of the ideal payload."""
        layout = two_unit_layout
        rng = np.random.default_rng(77)
        for k in range(30):
            ops = []
            for _ in range(int(rng.integers(2, 5))):
                if rng.random() < 0.5:
                    ops.append(SingleQubit(int(rng.integers(2)), random_unitary(rng)))
                else:
                    y = int(rng.integers(2))
                    ops.append(TwoQubit(y, 1 - y, random_unitary(rng)))
            circuit = CircuitIR(ops)
            program = compile(circuit, layout, seed=k)
            dense, _ = run_program(layout, program, pattern=PATTERN_SINGLE_CU)
            hybrid = init(layout, PATTERN_SINGLE_CU)
            run(hybrid, program)
            assert compare(hybrid, dense) < 1e-10
            psi = ideal_payload(circuit)
            rho = dense.reduced_density([0, layout.comp_index(1)])
            assert np.allclose(rho, np.outer(psi, psi.conj()), atol=1e-9), circuit.to_json()
