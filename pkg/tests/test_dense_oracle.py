"""
Unit tests for globalctl.dense_oracle module.
"""

import math
from unittest.mock import patch

import numpy as np
import pytest

from globalctl.chain_state import ChainState
from globalctl.constants import MACRO_CRESET_BA, MACRO_SHIFT_B, OP_MEASURE_A
from globalctl.dense_oracle import (
    DenseState,
    RandomProgramConfig,
    SweepReport,
    check_program,
    compare,
    execute_dense,
    random_program,
    run_program,
    verify_sweep,
)
from globalctl.exceptions import (
    LengthMismatch,
    QuantumControlledReset,
    StateTooLarge,
)
from globalctl.pulse_isa import (
    PulseInstruction,
    PulseProgram,
    cp_ab,
    macro,
    rot_a,
    rot_b,
    shift_b,
)
from globalctl.unitary import HADAMARD, PAULI_X


class TestDenseState:
    """Tests for DenseState."""

    def test_basis_index_little_endian(self):
        """Test that bit i of the index is cell i."""
        state = DenseState(3, [1, 0, 1])
        assert state.vector[5] == 1

    def test_size_limit(self):
        """Test that more than 24 cells are refused."""
        with pytest.raises(StateTooLarge):
            DenseState(25)

    def test_pattern_length(self):
        """Test that a mismatched pattern is rejected."""
        with pytest.raises(LengthMismatch):
            DenseState(3, [0, 1])

    def test_from_vector_normalizes(self):
        """Test that from_vector normalizes and infers n."""
        state = DenseState.from_vector([1, 1, 0, 0])
        assert state.n == 2
        assert np.linalg.norm(state.vector) == pytest.approx(1.0)

    def test_from_vector_size(self):
        """Test that a non power of two is rejected."""
        with pytest.raises(LengthMismatch):
            DenseState.from_vector([1, 0, 0])

    def test_permute(self):
        """Test that permute moves cell content."""
        state = DenseState(3, [1, 0, 0])
        state.permute({0: 2, 2: 0})
        assert state.vector[4] == 1

    def test_reduced_density_matches_hybrid(self):
        """Test that both simulators agree on a reduced density matrix."""
        hybrid = ChainState(3)
        dense = DenseState(3)
        for s in (hybrid, dense):
            s.apply_unitary1(0, HADAMARD)
            s.apply_controlled([0], 2, PAULI_X)
            s.apply_unitary1(1, HADAMARD)
        assert np.allclose(hybrid.reduced_density([1, 2]), dense.reduced_density([1, 2]))


class TestCompare:
    """Tests for compare function."""

    def test_ignores_global_phase(self):
        """Test that e^{i phi} psi compares equal to psi."""
        psi = np.array([0.6, 0.8j])
        assert compare(psi, np.exp(0.3j) * psi) == pytest.approx(0.0, abs=1e-15)

    def test_detects_difference(self):
        """Test that different states have a positive deviation."""
        assert compare(np.array([1, 0]), np.array([0, 1])) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        """Test that different sizes raise LengthMismatch."""
        with pytest.raises(LengthMismatch):
            compare(np.ones(2), np.ones(4))


class TestExecuteDense:
    """Tests for execute_dense and run_program."""

    def test_measure_outcomes(self):
        """Test that MEASURE_A returns the A bits."""
        state = DenseState(4, [1, 1, 0, 1])
        assert execute_dense(state, PulseInstruction(OP_MEASURE_A), None) == [1, 0]

    def test_creset_ba_indefinite_control(self):
        """Test that a superposed control raises QuantumControlledReset."""
        state = DenseState(4)
        state.apply_unitary1(1, HADAMARD)
        with pytest.raises(QuantumControlledReset):
            execute_dense(state, macro(MACRO_CRESET_BA), np.random.default_rng(0))

    def test_shift_b(self):
        """Test that SHIFT_B moves the B content."""
        state = DenseState(6, [0, 1, 0, 0, 0, 0])
        execute_dense(state, shift_b(1, 1), None)
        assert state.vector[1 << 3] == 1

    def test_run_program_pattern(self, two_unit_layout):
        """Test that run_program starts from the requested pattern."""
        program = PulseProgram(instructions=[PulseInstruction(OP_MEASURE_A)])
        bits = [0] * two_unit_layout.n
        bits[6] = 1
        _, outcomes = run_program(two_unit_layout, program, pattern=bits)
        assert outcomes == [[0, 0, 0, 1, 0, 0]]

    def test_run_program_warns_on_fingerprint(self, two_unit_layout):
        """Test that a foreign fingerprint is tolerated by the oracle."""
        program = PulseProgram(fingerprint="other", instructions=[rot_a(HADAMARD)])
        state, _ = run_program(two_unit_layout, program)
        assert state.probability_one(0) == pytest.approx(0.5)


class TestRandomProgram:
    """Tests for random_program function."""

    def test_reproducible(self):
        """Test that the same seed gives the same program."""
        a = random_program(seed=5)
        b = random_program(seed=5)
        assert [i.to_dict() for i in a] == [i.to_dict() for i in b]

    def test_length_and_name(self):
        """Test the configured length and the program name."""
        program = random_program(RandomProgramConfig(length=7), seed=3)
        assert len(program) == 7
        assert program.name == "random-3"

    def test_no_controlled_resets(self):
        """Test that controlled resets are never drawn."""
        program = random_program(RandomProgramConfig(length=200), seed=11)
        assert all(i.macro != MACRO_CRESET_BA for i in program)

    def test_without_measurements(self):
        """Test that include flags remove irreversible ops."""
        config = RandomProgramConfig(
            length=100, include_measure=False, include_reset=False, measure_density=0.5
        )
        program = random_program(config, seed=2)
        assert all(i.op not in ("MEASURE_A", "MEASURE_B", "RESET_A", "RESET_B") for i in program)

    def test_config_from_dict(self):
        """Test list-to-tuple conversion in from_dict."""
        config = RandomProgramConfig.from_dict(
            {"length": 4, "theta_range": [-1, 1], "macros": [MACRO_SHIFT_B]}
        )
        assert config.theta_range == (-1, 1)
        assert config.macros == (MACRO_SHIFT_B,)


class TestEquivalence:
    """Tests for hybrid-vs-oracle agreement."""

    def test_check_program_entangling(self):
        """Test agreement on a hand-written entangling program."""
        program = PulseProgram(
            instructions=[
                rot_a(HADAMARD),
                rot_b(HADAMARD),
                cp_ab(math.pi / 3),
                shift_b(1, 1),
                PulseInstruction(OP_MEASURE_A),
            ]
        )
        deviation, same = check_program(8, program, seed=9)
        assert deviation < 1e-10
        assert same

    def test_four_cell_promotion(self):
        """Test agreement on four cells, where most pulses promote classical cells."""
        for seed in range(50):
            program = random_program(RandomProgramConfig(length=12), seed=seed)
            deviation, same = check_program(4, program, seed=seed)
            assert deviation < 1e-10, program.name
            assert same, program.name

    def test_sweep_small(self):
        """Test a short sweep on n = 8."""
        report = verify_sweep(8, 20, seed=1)
        assert isinstance(report, SweepReport)
        assert report.ok
        assert report.worst_program is not None

    def test_sweep_deterministic_across_threads(self):
        """Test that thread count does not change the report."""
        with patch("globalctl.dense_oracle.thread_budget", return_value=1):
            serial = verify_sweep(6, 12, seed=4)
        with patch("globalctl.dense_oracle.thread_budget", return_value=4):
            threaded = verify_sweep(6, 12, seed=4)
        assert serial.to_dict() == threaded.to_dict()

    def test_sweep_size_limit(self):
        """Test that n above 24 raises StateTooLarge."""
        with pytest.raises(StateTooLarge):
            verify_sweep(26, 1)

    @pytest.mark.slow
    def test_sweep_two_hundred_programs(self):
        """Test 200 random programs on n = 12 with macros and measurements."""
        report = verify_sweep(12, 200, seed=0)
        assert report.ok, report.to_dict()
        assert report.max_deviation <= 1e-10
