"""
Single-CU protocol library.

Every protocol drives a ``PulseRunner``, which executes pulses on a state and
optionally records them into a ``PulseProgram``. Classical pre-pattern writes
(station activation, CU parking) are applied by the runner directly; they are
layout-computed XOR writes, not pulses, so a recorded program that needed them
is flagged with ``runner.prepatterned``.

Transport conventions: one computational unit is three A-spacings, so a CU at
B(6u+1) reaches B(6u+3) after one spacing and B(6u+7) after three.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass

import numpy as np

from globalctl.chain_state import ChainState, init
from globalctl.constants import (
    MACRO_CRESET_BA,
    MACRO_CRESET_SANDWICH,
    MACRO_CTRL_U_AB,
    MACRO_CTRL_U_BA,
    MACRO_FLIP_B_SANDWICH,
    MACRO_SHIFT_B,
    OP_MACRO,
    UNIT_CELLS,
    UNIT_SPACINGS,
)
from globalctl.exceptions import (
    LayoutError,
    MissingSwitchingStation,
    MultipleCusActive,
    NoCuFound,
    NonCanonicalLabels,
    OutOfMargins,
    SameQubitError,
    StrayControlError,
)
from globalctl.layout import Layout, is_canonical
from globalctl.pulse_isa import (
    ExecutionRecord,
    PulseInstruction,
    PulseProgram,
    execute,
    inverse_sequence,
    macro,
    rot_b,
    shift_b,
)
from globalctl.unitary import PAULI_X, PAULI_Z, Unitary1
from globalctl.utils import make_rng

logger = logging.getLogger(__name__)


class PulseRunner:
    """
    Executes protocol pulses on a state and optionally records them.

    Args:
        state: Chain state the pulses act on
        layout: Chain layout
        rng: numpy Generator for random outcomes (resets of quantum cells)
        record: Collect emitted pulses into ``program``
        name: Program name used when recording
        noise: Optional callable ``noise(state)`` invoked after every pulse
    """

    def __init__(
        self,
        state: ChainState,
        layout: Layout,
        rng=None,
        record: bool = False,
        name: str = "protocol",
        noise=None,
    ):
        if state.n != layout.n:
            raise LayoutError(f"State of {state.n} cells on a layout of {layout.n}")
        self.state = state
        self.layout = layout
        self.rng = rng
        self.noise = noise
        self.program = PulseProgram(name, layout.fingerprint) if record else None
        self.prepatterned = False
        self.pulses = 0

    def emit(self, instr: PulseInstruction) -> ExecutionRecord:
        """Execute (and record) one pulse."""
        if instr.op == OP_MACRO and instr.macro == MACRO_SHIFT_B:
            check_shift(self.state, instr.args["dir"] * instr.args["spacings"])
        record = execute(self.state, instr, self.rng)
        if self.program is not None:
            self.program.append(instr)
        self.pulses += 1
        if self.noise is not None:
            self.noise(self.state)
        return record

    def emit_all(self, instrs):
        for instr in instrs:
            self.emit(instr)

    def shift(self, spacings: int, tag: str | None = None):
        """One SHIFT_B by a signed number of A-spacings (no-op for 0)."""
        if spacings:
            self.emit(shift_b(1 if spacings > 0 else -1, abs(spacings), tag))

    def toggle(self, cells):
        """Classical pre-pattern XOR writes."""
        cells = list(cells)
        for cell in cells:
            self.state.toggle_bit(cell)
        if cells:
            self.prepatterned = True
            logger.debug(f"pre-pattern toggled {len(cells)} cells")


def make_runner(state, layout, rng=None, runner=None) -> PulseRunner:
    if runner is None:
        return PulseRunner(state, layout, rng)
    if runner.state is not state:
        raise LayoutError("runner is bound to a different state")
    return runner


def record_protocol(protocol, layout: Layout, pattern, *args, seed: int = 0, **kwargs):
    """
    Run a protocol on a shadow state and return its pulse program.

    Args:
        protocol: Protocol function taking (state, layout, ..., runner=...)
        layout: Chain layout
        pattern: Initial pattern of the shadow state
        *args: Protocol arguments
        seed: Seed for the shadow run's generator

    Returns:
        (PulseProgram, PulseRunner)
    """
    state = init(layout, pattern)
    runner = PulseRunner(
        state,
        layout,
        rng=make_rng(seed),
        record=True,
        name=getattr(protocol, "__name__", "protocol"),
    )
    protocol(state, layout, *args, runner=runner, **kwargs)
    return runner.program, runner


# =============================================================================
# CU bookkeeping
# =============================================================================


def b_ones(state: ChainState) -> list[int]:
    """
    B cells holding a classical 1.

    Raises:
        StrayControlError: If a B cell is not classical
    """
    ones = []
    for j in range(1, state.n, 2):
        bit = state.classical_bit(j)
        if bit is None:
            raise StrayControlError(f"B({j}) is not classical")
        if bit == 1:
            ones.append(j)
    return ones


def single_cu(state: ChainState) -> int:
    """
    Position of the only active CU.

    Raises:
        NoCuFound: If no B cell is 1
        MultipleCusActive: If more than one B cell is 1
    """
    ones = b_ones(state)
    if not ones:
        raise NoCuFound("No B cell holds a CU")
    if len(ones) > 1:
        raise MultipleCusActive(f"{len(ones)} B cells are 1: {ones[:6]}")
    return ones[0]


def check_shift(state: ChainState, spacings: int):
    """
    Refuse a B shift that would carry a non-zero B cell around the chain end.

    Raises:
        OutOfMargins: If any non-zero B content would wrap
    """
    step = 2 * spacings
    for j in range(1, state.n, 2):
        if state.classical_bit(j) == 0:
            continue
        if not 0 <= j + step < state.n:
            raise OutOfMargins(
                f"Shift by {spacings} spacings would move B({j}) off the chain"
            )


def _require_zero(state: ChainState, cells, purpose: str):
    for cell in cells:
        if 0 <= cell < state.n and state.classical_bit(cell) != 0:
            raise StrayControlError(f"{purpose} needs cell {cell} to be classical 0")


def _visit(runner: PulseRunner, stops: list[tuple[int, list[PulseInstruction]]]):
    """Shift to each (spacings, pulses) stop in order, emit, then return home."""
    current = 0
    for position, instrs in stops:
        runner.shift(position - current)
        current = position
        runner.emit_all(instrs)
    runner.shift(-current)


# =============================================================================
# Transport and targeted gates
# =============================================================================


def move_cu(state, layout, delta: int, rng=None, runner=None):
    """
    Move the B sublattice by ``delta`` computational units.

    Emits |delta| SHIFT_B macros of three spacings each.

    Raises:
        OutOfMargins: If a CU (or any non-zero B cell) would leave the chain
    """
    runner = make_runner(state, layout, rng, runner)
    check_shift(state, UNIT_SPACINGS * delta)
    direction = 1 if delta > 0 else -1
    for _ in range(abs(delta)):
        runner.emit(shift_b(direction, UNIT_SPACINGS))
    if delta:
        logger.debug(f"moved CU by {delta} units")


def targeted_single_qubit_gate(state, layout, q: int, u: Unitary1, rng=None, runner=None):
    """
    Apply U to computational qubit q with the single active CU.

    The CU is moved to q's home B(6U+1), CTRL_U_AB applies U to the A cell on
    its left (the payload), and the CU returns to where it started.

    Raises:
        NoCuFound: If no CU is present
        MultipleCusActive: If more than one B cell is 1
    """
    runner = make_runner(state, layout, rng, runner)
    cu = single_cu(state)
    home = layout.home_of(q)
    offset = home - cu
    if offset % UNIT_CELLS:
        raise LayoutError(f"CU at {cu} is not on a unit home site")
    delta = offset // UNIT_CELLS
    move_cu(state, layout, delta, runner=runner)
    runner.emit(macro(MACRO_CTRL_U_AB, u=u))
    move_cu(state, layout, -delta, runner=runner)


# =============================================================================
# Two-qubit gate
# =============================================================================


@dataclass
class EncodeCheckpoint:
    """
    Encoded control after stage one of the two-qubit gate.

    The pair (token, partner) = (B, A) holds alpha|10> - beta|01> when the
    control payload was alpha|0> + beta|1>.
    """

    token: int
    partner: int
    alpha: complex | None
    beta: complex | None
    fidelity: float | None = None

    @property
    def cu_pair(self) -> tuple[int, int]:
        return self.token, self.partner

    def expected_vector(self) -> np.ndarray:
        """alpha|10> - beta|01> over (token, partner), little-endian by cell index."""
        cells = sorted((self.token, self.partner))
        vector = np.zeros(4, dtype=complex)
        for token_bit, partner_bit, amplitude in (
            (1, 0, self.alpha),
            (0, 1, -self.beta),
        ):
            bits = {self.token: token_bit, self.partner: partner_bit}
            vector[sum(bits[c] << rank for rank, c in enumerate(cells))] = amplitude
        return vector

    def measure_fidelity(self, state: ChainState) -> float | None:
        if self.alpha is None:
            return None
        rho = state.reduced_density([self.token, self.partner])
        v = self.expected_vector()
        self.fidelity = float(np.real(np.vdot(v, rho @ v)))
        return self.fidelity

    def to_dict(self) -> dict:
        def pair(z):
            return None if z is None else [float(z.real), float(z.imag)]

        return {
            "token": self.token,
            "partner": self.partner,
            "alpha": pair(self.alpha),
            "beta": pair(self.beta),
            "fidelity": self.fidelity,
        }


def _payload_amplitudes(state: ChainState, cell: int):
    """(alpha, beta) of an unentangled cell, or (None, None)."""
    rho = state.reduced_density([cell])
    if abs(np.trace(rho @ rho) - 1.0) > 1e-9:
        return None, None
    alpha = np.sqrt(max(float(np.real(rho[0, 0])), 0.0))
    if alpha < 1e-12:
        return 0j, 1.0 + 0j
    return complex(alpha), complex(rho[1, 0] / alpha)


def encode_sequence(layout: Layout, y: int, toward_right: bool):
    """
    Pulses that move y's payload onto a B token next to a partner A cell.

    Returns:
        (pulses, token cell, partner cell); the CU must sit at y's home
    """
    wr = macro(MACRO_CTRL_U_BA, u=PAULI_X)
    wl = macro(MACRO_CTRL_U_AB, u=PAULI_X)
    sandwich = macro(MACRO_FLIP_B_SANDWICH)
    c = layout.comp_index(y)
    if toward_right:
        pulses = [wr, sandwich, wl, shift_b(1, 1), sandwich, wl, rot_b(PAULI_Z)]
        return pulses, c + 3, c + 2
    pulses = [shift_b(-1, 1), wl, sandwich, wr, shift_b(-1, 1), sandwich, wr, rot_b(PAULI_Z)]
    return pulses, c - 3, c - 2


def encode_control(state, layout, y: int, toward_right: bool = True, rng=None, runner=None):
    """
    Run the encode stage with the CU at y's home and report the checkpoint.

    Returns:
        EncodeCheckpoint with the measured fidelity (None for an entangled payload)
    """
    runner = make_runner(state, layout, rng, runner)
    c = layout.comp_index(y)
    if single_cu(state) != c + 1:
        raise NoCuFound(f"Encoding needs the CU at B({c + 1})")
    nearby = [c - 2, c + 2, c + 4] if toward_right else [c - 4, c - 2, c + 2]
    _require_zero(state, nearby, "Control encoding")
    alpha, beta = _payload_amplitudes(state, c)
    pulses, token, partner = encode_sequence(layout, y, toward_right)
    runner.emit_all(pulses)
    checkpoint = EncodeCheckpoint(token, partner, alpha, beta)
    checkpoint.measure_fidelity(state)
    return checkpoint


def two_qubit_gate(state, layout, y: int, x: int, u: Unitary1, rng=None, runner=None):
    """
    Controlled-U with control y and target x through the single CU.

    U = W diag(d0, d1) W^dagger. The target is moved into W's frame with the
    relative phase pre-applied; the encoded control then undoes that phase
    when y is 0; the frame is restored and d0 is applied to y.

    Returns:
        EncodeCheckpoint captured after the encode stage

    Raises:
        SameQubitError: If x == y
        NoCuFound: If no CU is present
    """
    if x == y:
        raise SameQubitError(f"Control and target are both qubit {x}")
    runner = make_runner(state, layout, rng, runner)
    origin = single_cu(state)
    w, d0, d1 = u.schur_phases()
    relative = cmath.phase(d1 / d0)

    targeted_single_qubit_gate(
        state, layout, x, Unitary1.phase(relative) @ w.dagger(), runner=runner
    )
    home_delta = (layout.home_of(y) - origin) // UNIT_CELLS
    move_cu(state, layout, home_delta, runner=runner)

    toward_right = x > y
    checkpoint = encode_control(state, layout, y, toward_right, runner=runner)
    target_cell = layout.comp_index(x)
    if toward_right:
        spacings = (target_cell - 1 - checkpoint.token) // 2
        controlled = MACRO_CTRL_U_BA
    else:
        spacings = (target_cell + 1 - checkpoint.token) // 2
        controlled = MACRO_CTRL_U_AB
    transport = shift_b(1 if spacings > 0 else -1, abs(spacings)) if spacings else None
    forward, _, _ = encode_sequence(layout, y, toward_right)
    if transport is not None:
        runner.emit(transport)
        forward = forward + [transport]
    runner.emit(macro(controlled, u=Unitary1.phase(-relative)))
    runner.emit_all(inverse_sequence(forward))

    move_cu(state, layout, -home_delta, runner=runner)
    targeted_single_qubit_gate(state, layout, x, w, runner=runner)
    targeted_single_qubit_gate(
        state, layout, y, Unitary1.phase(cmath.phase(d0)), runner=runner
    )
    logger.debug(f"two-qubit gate y={y} x={x}: {runner.pulses} pulses so far")
    return checkpoint


# =============================================================================
# Buffer resets
# =============================================================================


def block_mode_cells(layout: Layout) -> list[int]:
    """Toggles between single-CU mode and block mode (every station active)."""
    return layout.activation_cells(0)


def activate_blocks(state, layout, rng=None, runner=None):
    """Pre-pattern block mode: every station's CU, result and partner set."""
    if not layout.has_stations:
        raise MissingSwitchingStation("Block mode needs switching stations")
    runner = make_runner(state, layout, rng, runner)
    runner.toggle(block_mode_cells(layout))


def deactivate_blocks(state, layout, rng=None, runner=None):
    """Undo activate_blocks (the toggles are self-inverse)."""
    activate_blocks(state, layout, rng, runner)


def _a_buffer_stops(layout: Layout, cu: int, block_mode: bool):
    reset = [macro(MACRO_CRESET_BA)]
    cu_unit = (cu - 1) // UNIT_CELLS
    if block_mode:
        first = 1 + layout.config.ss_width
        units = [first + v for v in range(layout.L)]
    else:
        units = sorted(u - cu_unit for u in layout.comp_units)
    stops = []
    for t in units:
        stops.append((UNIT_SPACINGS * t, reset))
        stops.append((UNIT_SPACINGS * t + 1, reset))
    return stops


def reset_a_buffers(state, layout, rng=None, runner=None):
    """
    Clear the A buffers A(6u+2) and A(6u+4) of every computational unit.

    Block mode (every station CU active) resets each block with its own CU
    in a fixed number of pulses; otherwise the single CU visits the whole
    chain. Station cells and payload cells are never targeted.

    Raises:
        NoCuFound: If no CU is present
        StrayControlError: If the B ones are neither one CU nor the station CUs
    """
    runner = make_runner(state, layout, rng, runner)
    ones = b_ones(state)
    station_sites = [station.cu_site for station in layout.stations]
    if not ones:
        raise NoCuFound("A-buffer reset needs a CU")
    if layout.has_stations and ones == station_sites:
        block_mode = True
    elif len(ones) == 1:
        block_mode = False
    else:
        raise StrayControlError(f"Unexpected B ones {ones[:6]}")
    stops = _a_buffer_stops(layout, ones[0], block_mode)
    before = runner.pulses
    _visit(runner, stops)
    logger.debug(
        f"A-buffer reset ({'block' if block_mode else 'single'} mode): "
        f"{runner.pulses - before} pulses"
    )


def _sandwich_sweep(runner: PulseRunner, sweep: int):
    reset = macro(MACRO_CRESET_SANDWICH)
    runner.emit(reset)
    for _ in range(sweep):
        runner.shift(-1)
        runner.emit(reset)
    runner.shift(sweep)


def _require_block_mode(state: ChainState, layout: Layout, stations):
    for station in stations:
        for cell in (station.result_index, station.partner_index):
            if state.classical_bit(cell) != 1:
                raise NoCuFound(
                    f"Station {station.index} is not active (cell {cell} is not 1)"
                )


def reset_b_buffers(state, layout, rng=None, runner=None):
    """
    Clear every B buffer with the station (result, partner) sandwich.

    Needs block mode. Station CU sites are parked (XOR) for the sweep, every
    B cell of a block is stepped through the station slot B(6s+3) where
    CRESET_SANDWICH clears it, the sublattice is moved back and the CUs are
    restored.

    Raises:
        MissingSwitchingStation: If the layout has no stations
        NoCuFound: If block mode is not active
    """
    if not layout.has_stations:
        raise MissingSwitchingStation("B-buffer reset needs switching stations")
    runner = make_runner(state, layout, rng, runner)
    _require_block_mode(state, layout, layout.stations)
    parked = [station.cu_site for station in layout.stations]
    sweep = UNIT_SPACINGS * layout.block_units - 2
    runner.toggle(parked)
    _sandwich_sweep(runner, sweep)
    runner.toggle(parked)
    logger.debug(f"B-buffer reset swept {sweep} spacings")


def hierarchical_reset(state, layout, rng=None, runner=None):
    """
    Restore deactivated stations and CU sites level by level.

    Starting from single-CU mode, for each level i = 1..depth the stations
    with label >= i are activated, the B sublattice between consecutive
    active stations is swept clean, and each active CU resets the cells of
    the stations k*L^(i-1) further on (k = 1..L-1) and rewrites their label
    i-1. Stations carrying the top label are left alone.

    Raises:
        MissingSwitchingStation: If the layout has no stations
        NonCanonicalLabels: If the layout's labels are not canonical
        StrayControlError: If stray B ones survive the sweep
    """
    if not layout.has_stations:
        raise MissingSwitchingStation("Hierarchical reset needs switching stations")
    if not is_canonical(layout):
        raise NonCanonicalLabels("Hierarchical reset needs canonical station labels")
    runner = make_runner(state, layout, rng, runner)
    L, width, block = layout.L, layout.config.ss_width, layout.block_units
    reset = macro(MACRO_CRESET_BA)
    write = macro(MACRO_CTRL_U_BA, u=PAULI_X)

    for level in range(1, layout.concat_depth + 1):
        activation = layout.activation_cells(level)
        active = [s for s in layout.stations if s.label >= level]
        parked = [s.cu_site for s in active]
        runner.toggle(activation)

        # a station whose own bits are flipped just loses its slot or CU here
        runner.toggle(parked)
        _sandwich_sweep(runner, UNIT_SPACINGS * L**level * block - 2)
        runner.toggle(parked)

        stray = sorted(set(b_ones(state)) - set(parked))
        if stray:
            raise StrayControlError(f"Level {level}: unexpected B ones {stray[:6]}")

        bits = [(level - 1) >> b & 1 for b in range(width)]
        stops = []
        for k in range(1, L):
            t = k * L ** (level - 1) * block
            stops.append((UNIT_SPACINGS * t, [reset]))
            stops.append((UNIT_SPACINGS * t + 1, [reset]))
            for b in range(width):
                pulses = [reset, write] if bits[b] else [reset]
                stops.append((UNIT_SPACINGS * (t + 1 + b), pulses))
        _visit(runner, stops)
        runner.toggle(activation)
        logger.debug(f"hierarchical reset level {level}: {len(active)} active stations")
