"""
Unit tests for globalctl.cli module.
"""

import json

import pytest

from globalctl.cli import DEMOS, build_parser, main
from globalctl.exceptions import UsageError
from globalctl.filesystem import write_json
from globalctl.layout import build_layout, save_layout


@pytest.fixture
def layouts(tmp_path):
    """Two saved layouts with different fingerprints."""
    small = save_layout(build_layout({"n_comp": 2}), str(tmp_path / "small.json"))
    large = save_layout(build_layout({"n_comp": 3}), str(tmp_path / "large.json"))
    return small, large


@pytest.fixture
def program_file(tmp_path, layouts):
    """Compiled X on qubit 1 of the small layout."""
    circuit = write_json(
        [{"op": "SingleQubit", "q": 1, "u": "X"}, {"op": "Measure", "q": 1}],
        str(tmp_path / "circuit.json"),
    )
    out = str(tmp_path / "program.jsonl")
    argv = ["--quiet", "compile", "--circuit", circuit, "--layout", layouts[0], "--out", out]
    assert main(argv) == 0
    return out


def read(path):
    with open(path) as handle:
        return json.load(handle)


class TestParser:
    """Tests for build_parser function."""

    def test_subcommand_required(self):
        """Test that a bare invocation is rejected."""
        with pytest.raises(UsageError):
            build_parser().parse_args([])

    def test_demo_choices(self):
        """Test that demo names are restricted."""
        args = build_parser().parse_args(["demo", "--name", DEMOS[0], "--out", "x"])
        assert args.name == DEMOS[0]
        with pytest.raises(UsageError, match="invalid choice"):
            build_parser().parse_args(["demo", "--name", "teleport", "--out", "x"])


class TestUsageErrors:
    """Tests for command-line mistakes reported by main."""

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["simulate", "--bogus"],
            ["simulate", "--layout", "layout.json"],
            ["verify", "--n", "ten"],
            ["teleport"],
        ],
    )
    def test_error_document(self, capsys, argv):
        """Test that bad arguments print a UsageError document and exit 1."""
        assert main(argv) == 1
        captured = capsys.readouterr()
        error = json.loads(captured.err.strip())
        assert error["error"] == "UsageError"
        assert error["message"].startswith("globalctl")
        assert captured.out == ""


class TestCompileAndSimulate:
    """Tests for the compile and simulate commands."""

    def test_compile_writes_record(self, program_file):
        """Test that compile leaves a RunRecord next to the program."""
        record = read(program_file + ".run.json")
        assert record["command"] == "compile"
        assert record["result"]["counts"]["MEASURE_A"] == 1
        assert "numpy" in record["versions"]

    def test_simulate_to_stdout(self, capsys, layouts, program_file):
        """Test that the flipped qubit is read out as 1."""
        assert main(["--quiet", "simulate", "--layout", layouts[0], "--program", program_file]) == 0
        document = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert document["outcomes"] == [[0, 0, 0, 1, 0, 0]]
        assert document["quantum_cells"] == []

    def test_fingerprint_mismatch(self, capsys, layouts, program_file):
        """Test that a foreign layout prints a FingerprintMismatch error document."""
        status = main(["--quiet", "simulate", "--layout", layouts[1], "--program", program_file])
        assert status == 1
        error = json.loads(capsys.readouterr().err.strip())
        assert error["error"] == "FingerprintMismatch"

    def test_allow_mismatch(self, tmp_path, layouts, program_file):
        """Test that --allow-mismatch runs anyway."""
        out = str(tmp_path / "result.json")
        status = main(
            [
                "--quiet",
                "simulate",
                "--layout",
                layouts[1],
                "--program",
                program_file,
                "--allow-mismatch",
                "--out",
                out,
            ]
        )
        assert status == 0
        assert read(out)["pulses"] > 0

    def test_missing_file(self, capsys, layouts, tmp_path):
        """Test that a missing input is reported as an error document."""
        status = main(
            [
                "--quiet",
                "compile",
                "--circuit",
                str(tmp_path / "absent.json"),
                "--layout",
                layouts[0],
                "--out",
                str(tmp_path / "p.jsonl"),
            ]
        )
        assert status == 1
        assert json.loads(capsys.readouterr().err)["error"] == "ValueError"


class TestDemo:
    """Tests for the demo command."""

    def test_syndrome_table(self, tmp_path):
        """Test that simulated syndromes match the closed form."""
        out = tmp_path / "demo"
        assert main(["--quiet", "demo", "--name", "syndrome-table", "--out", str(out)]) == 0
        document = read(out / "syndrome_table.json")
        assert document["simulated"] == document["closed_form"]
        record = read(str(out) + ".run.json")
        assert record["result"]["matches_closed_form"] is True

    def test_correction_cycle(self, tmp_path):
        """Test that every single CU flip is restored."""
        out = tmp_path / "demo"
        assert main(["--quiet", "demo", "--name", "correction-cycle", "--out", str(out)]) == 0
        rows = read(out / "correction_cycle.json")
        assert [row["failed_cu"] for row in rows] == [0, 1, 2, 3]
        assert all(row["ok"] for row in rows)
        assert all(row["payload_fidelity"] == pytest.approx(1.0) for row in rows)


class TestVerifyAndSolve:
    """Tests for the verify, solve and mc commands."""

    def test_verify(self, tmp_path):
        """Test a short oracle sweep."""
        out = str(tmp_path / "verify.json")
        assert main(["--quiet", "verify", "--n", "6", "--programs", "5", "--out", out]) == 0
        assert read(out)["ok"] is True

    def test_solve(self, tmp_path):
        """Test that solving X writes a converged solution."""
        out = str(tmp_path / "solve.json")
        assert main(["--quiet", "solve", "--target", "X", "--out", out]) == 0
        solution = read(out)["solution"]
        assert solution[0]["converged"] is True

    def test_bad_target(self, capsys, tmp_path):
        """Test that a malformed target is an InvalidInstruction error."""
        status = main(["--quiet", "solve", "--target", "nope", "--out", str(tmp_path / "s.json")])
        assert status == 1
        assert json.loads(capsys.readouterr().err)["error"] == "InvalidInstruction"

    def test_mc(self, tmp_path):
        """Test that mc writes a CSV and its JSON summary."""
        config = write_json(
            {"model": {"p_flip": 0.1}, "trials": 20, "ps": [0.0, 0.1]},
            str(tmp_path / "mc_config.json"),
        )
        out = tmp_path / "mc.csv"
        assert main(["--quiet", "mc", "--config", config, "--out", str(out)]) == 0
        assert out.exists()
        summary = read(tmp_path / "mc.json")
        assert len(summary["results"]) == 4
