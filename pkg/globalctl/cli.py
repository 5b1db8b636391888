"""
Command-line interface.

Subcommands: simulate, compile, demo, mc, verify, solve. Every run writes a
RunRecord (JSON) for reproducibility: next to ``--out`` by default, or where
``--record`` points. Failures print ``{"error": code, "message": ...}`` to
stderr and exit with status 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import astropy
import numpy as np
import scipy

from globalctl import compiler, dense_oracle, noise_mc, protocols, redundant_cu
from globalctl.chain_state import ChainState, init
from globalctl.constants import (
    ENGINE_FULL,
    ENGINE_TABLE,
    FILE_EXTENSION_CSV,
    FILE_EXTENSION_JSON,
    PATTERN_BLOCK_CUS,
    PATTERN_SINGLE_CU,
    PATTERN_TRIPLE_CU,
)
from globalctl.exceptions import ConvergenceFailure, GlobalControlError, UsageError
from globalctl.filesystem import read_json, read_text, write_json, write_text
from globalctl.layout import build_layout, load_layout
from globalctl.logging_config import setup_logging
from globalctl.pulse_isa import check_fingerprint, parse, run, serialize
from globalctl.unitary import random_unitary
from globalctl.utils import make_rng, resolve_path

DEMOS = ("two-qubit-gate", "buffer-reset", "syndrome-table", "correction-cycle")

logger = logging.getLogger(__name__)


@dataclass
class RunRecord:
    """What was run, with which inputs, and what it produced."""

    command: str
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    started: str = ""
    elapsed_s: float = 0.0
    outputs: list[str] = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    result: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "started": self.started,
            "elapsed_s": self.elapsed_s,
            "outputs": list(self.outputs),
            "versions": self.versions,
            "result": self.result,
        }


def versions() -> dict:
    try:
        own = metadata.version("globalctl")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {
        "globalctl": own,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "astropy": astropy.__version__,
        "python": sys.version.split()[0],
    }


# =============================================================================
# Commands
# =============================================================================


def _read_layout(path: str):
    return load_layout(resolve_path(path))


def cmd_simulate(args, record: RunRecord):
    layout = _read_layout(args.layout)
    program = parse(read_text(resolve_path(args.program)))
    check_fingerprint(program, layout, strict=not args.allow_mismatch)
    state = init(layout, args.pattern)
    records = run(state, program, make_rng(args.seed))
    outcomes = [r.outcomes for r in records if r.outcomes is not None]
    document = {
        "program": program.name,
        "pulses": len(program),
        "steps": state.step_counter,
        "classical_bits": state.classical_bits(),
        "quantum_cells": state.quantum_cells(),
        "outcomes": outcomes,
    }
    record.seeds["seed"] = args.seed
    record.result = {"pulses": len(program), "steps": state.step_counter}
    if args.out:
        record.outputs.append(write_json(document, resolve_path(args.out)))
    else:
        print(json.dumps(document))


def cmd_compile(args, record: RunRecord):
    layout = _read_layout(args.layout)
    circuit = compiler.circuit_from_json(read_json(resolve_path(args.circuit)))
    program = compiler.compile(circuit, layout, seed=args.seed)
    record.seeds["seed"] = args.seed
    record.config["initial_pattern"] = circuit.initial_pattern
    record.result = compiler.schedule_report(program)
    record.outputs.append(
        write_text(serialize(program).decode("utf-8"), resolve_path(args.out))
    )


def _payload_fidelity(before: np.ndarray, after: np.ndarray) -> float:
    """Overlap of two reduced density matrices, exact for pure states."""
    return float(np.real(np.trace(before @ after)))


def _random_payload(state: ChainState, cells, rng):
    for cell in cells:
        state.apply_unitary1(cell, random_unitary(rng))


def demo_two_qubit_gate(out: Path, seed: int) -> dict:
    rng = make_rng(seed)
    layout = build_layout({"n_comp": 2})
    u = random_unitary(rng)
    state = init(layout, PATTERN_SINGLE_CU)
    payload = [layout.comp_index(0), layout.comp_index(1)]
    _random_payload(state, payload, rng)
    program, _ = protocols.record_protocol(
        protocols.two_qubit_gate, layout, PATTERN_SINGLE_CU, 0, 1, u, seed=seed
    )
    ideal = state.to_dense()
    checkpoint = protocols.two_qubit_gate(state, layout, 0, 1, u)
    # controlled-U on the payload pair, control cell 0 and target cell 6
    size = ideal.size
    for index in range(size):
        if (index >> payload[0]) & 1 and not (index >> payload[1]) & 1:
            partner = index | (1 << payload[1])
            a, b = ideal[index], ideal[partner]
            ideal[index] = u.matrix[0, 0] * a + u.matrix[0, 1] * b
            ideal[partner] = u.matrix[1, 0] * a + u.matrix[1, 1] * b
    deviation = dense_oracle.compare(state, ideal)
    report = {
        "u": u.to_dict(),
        "pulses": len(program),
        "checkpoint": checkpoint.to_dict(),
        "max_deviation_vs_ideal": deviation,
        "schedule": compiler.schedule_report(program),
    }
    write_json(report, str(out / "two_qubit_gate.json"))
    return {"max_deviation_vs_ideal": deviation, "checkpoint_fidelity": checkpoint.fidelity}


def demo_buffer_reset(out: Path, seed: int) -> dict:
    rng = make_rng(seed)
    rows = []

    layout = build_layout({"n_comp": 4})
    state = init(layout, PATTERN_SINGLE_CU)
    payload = [layout.comp_index(q) for q in range(layout.n_comp)]
    _random_payload(state, payload, rng)
    before = state.reduced_density(payload)
    stray = layout.comp_index(2) + 2
    state.toggle_bit(stray)
    runner = protocols.PulseRunner(state, layout, rng)
    protocols.reset_a_buffers(state, layout, runner=runner)
    rows.append(
        {
            "protocol": "reset_a_buffers",
            "flipped_cell": stray,
            "cleared": state.classical_bit(stray) == 0,
            "pulses": runner.pulses,
            "payload_fidelity": _payload_fidelity(before, state.reduced_density(payload)),
        }
    )

    layout = build_layout({"n_comp": 4, "L": 2, "ss_width": 1})
    state = init(layout, PATTERN_BLOCK_CUS)
    stray = layout.home_of(1) + 2
    state.toggle_bit(stray)
    runner = protocols.PulseRunner(state, layout, rng)
    protocols.reset_b_buffers(state, layout, runner=runner)
    rows.append(
        {
            "protocol": "reset_b_buffers",
            "flipped_cell": stray,
            "cleared": state.classical_bit(stray) == 0,
            "pulses": runner.pulses,
            "payload_fidelity": 1.0,
        }
    )
    write_json(rows, str(out / "buffer_reset.json"))
    return {"all_cleared": all(row["cleared"] for row in rows)}


def _triple_layout():
    return build_layout(dict(noise_mc.DEFAULT_MC_LAYOUT))


def demo_syndrome_table(out: Path, seed: int) -> dict:
    layout = _triple_layout()
    sites = layout.triple_cu_sites(0)
    rows = []
    for slot in ("U2", "U3"):
        mode = redundant_cu.SYNDROME_MODES[slot]
        for failed in (0, 1, 2, 3):
            state = init(layout, PATTERN_TRIPLE_CU)
            if failed:
                state.toggle_bit(sites[failed - 1])
            bit = redundant_cu.extract_syndrome(state, layout, mode)
            rows.append({"mode": f"{slot}=1", "failed_cu": failed, "syndrome": bit})
    closed = redundant_cu.syndrome_table()
    write_json({"simulated": rows, "closed_form": closed}, str(out / "syndrome_table.json"))
    for row in rows:
        logger.info(f"mode {row['mode']} failed CU {row['failed_cu']}: syndrome {row['syndrome']}")
    return {"rows": rows, "matches_closed_form": rows == closed}


def demo_correction_cycle(out: Path, seed: int) -> dict:
    rng = make_rng(seed)
    layout = _triple_layout()
    sites = layout.triple_cu_sites(0)
    payload = [layout.comp_index(q) for q in layout.payload_qubits]
    rows = []
    for failed in (0, 1, 2, 3):
        state = init(layout, PATTERN_TRIPLE_CU)
        _random_payload(state, payload, rng)
        before = state.reduced_density(payload)
        if failed:
            state.toggle_bit(sites[failed - 1])
        report = redundant_cu.correction_cycle(state, layout)
        fidelity = _payload_fidelity(before, state.reduced_density(payload))
        rows.append(dict(report.to_dict(), failed_cu=failed, payload_fidelity=fidelity))
    write_json(rows, str(out / "correction_cycle.json"))
    return {"all_restored": all(row["ok"] for row in rows)}


def cmd_demo(args, record: RunRecord):
    out = Path(resolve_path(args.out))
    handler = {
        "two-qubit-gate": demo_two_qubit_gate,
        "buffer-reset": demo_buffer_reset,
        "syndrome-table": demo_syndrome_table,
        "correction-cycle": demo_correction_cycle,
    }[args.name]
    record.seeds["seed"] = args.seed
    record.result = handler(out, args.seed)
    record.outputs.append(str(out))


def cmd_mc(args, record: RunRecord):
    document = read_json(resolve_path(args.config))
    if args.trials is not None:
        document["trials"] = args.trials
    if args.engine is not None:
        document["engine"] = args.engine
    config = noise_mc.McConfig.from_dict(document)
    ps = document.get("ps")
    if ps:
        modes = document.get("modes", ["corrected", "uncorrected"])
        results = noise_mc.run_sweep(config, ps, modes, progress=not args.quiet)
    else:
        results = [noise_mc.run_trials(config, progress=not args.quiet)]
    out = resolve_path(args.out)
    record.config["mc"] = config.to_dict()
    record.seeds["master_seed"] = config.model.master_seed
    record.outputs.append(noise_mc.write_results(results, out))
    if Path(out).suffix == FILE_EXTENSION_CSV:
        summary = str(Path(out).with_suffix(FILE_EXTENSION_JSON))
    else:
        summary = out + FILE_EXTENSION_JSON
    record.outputs.append(noise_mc.write_summary(results, config, summary))
    record.result = {"points": [r.to_dict() for r in results]}


def cmd_verify(args, record: RunRecord):
    report = dense_oracle.verify_sweep(
        args.n, args.programs, seed=args.seed, progress=not args.quiet
    )
    record.seeds["seed"] = args.seed
    record.result = report.to_dict()
    if args.out:
        record.outputs.append(write_json(report.to_dict(), resolve_path(args.out)))
    if not report.ok:
        raise GlobalControlError(
            f"Hybrid and oracle disagree: max deviation {report.max_deviation:.3e}, "
            f"{len(report.outcome_mismatches)} outcome mismatches"
        )


def cmd_solve(args, record: RunRecord):
    target = compiler.parse_unitary_spec(args.target)
    document = {"target": target.to_dict()}
    try:
        result = compiler.solve_pulse_params(target, starts=args.starts, seed=args.seed)
        document["solution"] = [result.to_dict()]
    except ConvergenceFailure as exc:
        logger.warning(f"{exc}; trying a two-rotation composition")
        document["direct_best"] = exc.best.to_dict() if exc.best else None
        document["solution"] = [
            r.to_dict() for r in compiler.compose_fallback(target, seed=args.seed)
        ]
    record.seeds["seed"] = args.seed
    record.result = {"residuals": [s["residual"] for s in document["solution"]]}
    record.outputs.append(write_json(document, resolve_path(args.out)))


# =============================================================================
# Parser and entry point
# =============================================================================


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="globalctl",
        description="Simulate, compile and verify globally controlled qubit chains",
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    parser.add_argument("--record", help="Where to write the RunRecord JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Run a pulse program on a layout")
    p.add_argument("--layout", required=True, help="Layout JSON file")
    p.add_argument("--program", required=True, help="Pulse program (JSON lines)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pattern", default=PATTERN_SINGLE_CU, help="Initial pattern name")
    p.add_argument("--out", help="Result JSON (stdout when omitted)")
    p.add_argument(
        "--allow-mismatch",
        action="store_true",
        help="Warn instead of failing on a layout fingerprint mismatch",
    )
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compile", help="Compile a circuit to a pulse program")
    p.add_argument("--circuit", required=True, help="Circuit JSON file")
    p.add_argument("--layout", required=True, help="Layout JSON file")
    p.add_argument("--out", required=True, help="Pulse program output")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_compile)

    p = sub.add_parser("demo", help="Run a named protocol demonstration")
    p.add_argument("--name", required=True, choices=DEMOS)
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_demo)

    p = sub.add_parser("mc", help="Monte Carlo CU survival")
    p.add_argument("--config", required=True, help="Monte Carlo config JSON")
    p.add_argument("--trials", type=int, help="Override the trial count")
    p.add_argument("--engine", choices=(ENGINE_TABLE, ENGINE_FULL))
    p.add_argument("--out", required=True, help="CSV output")
    p.set_defaults(handler=cmd_mc)

    p = sub.add_parser("verify", help="Hybrid vs dense oracle sweep")
    p.add_argument("--n", type=int, required=True, help="Chain length in cells")
    p.add_argument("--programs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="Report JSON")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("solve", help="Solve triple-CU rotation parameters")
    p.add_argument("--target", required=True, help="X, Y, Z, H, axis:x,y,z:angle or zyz:b,g,d")
    p.add_argument("--out", required=True, help="Solution JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=compiler.DEFAULT_SOLVER_STARTS)
    p.set_defaults(handler=cmd_solve)
    return parser


def _record_path(args) -> str | None:
    if args.record:
        return resolve_path(args.record)
    out = getattr(args, "out", None)
    if out:
        return resolve_path(out).rstrip("/") + ".run" + FILE_EXTENSION_JSON
    return None


def _error(code: str, message: str) -> int:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _error(exc.code, str(exc))
    setup_logging(debug=args.debug, quiet=args.quiet)

    record = RunRecord(
        command=args.command,
        config={
            k: v for k, v in vars(args).items() if k != "handler" and not callable(v)
        },
        started=datetime.now(timezone.utc).isoformat(),
        versions=versions(),
    )
    start = time.perf_counter()
    try:
        args.handler(args, record)
    except GlobalControlError as exc:
        return _error(exc.code, str(exc))
    except (ValueError, OSError) as exc:
        return _error(type(exc).__name__, str(exc))
    record.elapsed_s = time.perf_counter() - start

    destination = _record_path(args)
    document = record.to_dict()
    if destination:
        write_json(_finite(document), destination)
    else:
        logger.info(json.dumps(_finite(document)))
    return 0


def _finite(value):
    """Replace non-finite floats so the record stays valid JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


if __name__ == "__main__":
    sys.exit(main())
