"""
Triple-redundant Control Units.

Three CUs rest on the homes of computational units anchor+0, anchor+1 and
anchor+3. A targeted rotation aligns each CU with the target in turn, so the
target sees U1 sz U2 sz U3 sz U4 per half while every other unit is hit by at
most one CP; running the half twice cancels those single hits. With
U4 = (U1 U2 U3)^dagger, unexposed cells see the identity.

A CU that is flipped to 0 before the sequence drops its CP from both halves,
which is what syndrome extraction detects on a |0> ancilla.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from globalctl.chain_state import ChainState, init
from globalctl.constants import (
    DEFAULT_ANCILLA_UNIT,
    MACRO_CRESET_BA,
    MACRO_CTRL_U_AB,
    MACRO_CTRL_U_BA,
    MACRO_FLIP_B_SANDWICH,
    PATTERN_ALL_ZERO,
    TRIPLE_CU_OFFSETS,
)
from globalctl.exceptions import (
    AncillaNotClear,
    CusNotDeployed,
    InsufficientMargins,
    InvalidInstruction,
    StrayControlError,
    SyndromeNotClassical,
)
from globalctl.layout import Layout
from globalctl.protocols import b_ones, make_runner, move_cu
from globalctl.pulse_isa import cp_ab, macro, rot_a, shift_b
from globalctl.unitary import IDENTITY, PAULI_X, PAULI_Z, Unitary1, random_unitary

logger = logging.getLogger(__name__)

# Free syndrome rotation exp(-i sx pi/8)
SYNDROME_ROTATION = Unitary1.from_axis_angle((1, 0, 0), math.pi / 4)

# CU positions (units relative to the target) at each CP of one half
CP_ALIGNMENTS = ((-3, -2, 0), (-1, 0, 2), (0, 1, 3))

# Feedback pulse words, CUs aligned at units t-3, t-2, t (relative to 6(t-3)).
# Each flips the target CU iff the ancilla and both other CUs are 1 and
# leaves every other cell as it was.
FEEDBACK_WORDS = {
    1: (
        "WR WL S SH- SH- SH- SH- SH- WL SH- SH- WL S WL SH+ SH+ S SH- S SH- "
        "WL S WL SH+ SH+ WL SH+ SH+ SH+ SH+ SH+ S WL WR"
    ),
    2: (
        "WR WL S SH- SH- SH- SH- SH- SH- SH- S WL S WL S SH+ SH+ WR SH- SH- "
        "S WL S WL S SH+ SH+ SH+ WL SH+ SH+ SH+ SH+ S WL WR"
    ),
    3: (
        "WR S SH+ WR SH+ WR SH- S SH+ WR S WR S SH+ WR SH- SH- S SH+ SH+ WR "
        "SH- S WR S WR SH- S SH+ WR SH- WR SH- S WR"
    ),
}

# Feedback controls per corrected CU
FEEDBACK_CONTROLS = {1: (2, 3), 2: (1, 3), 3: (1, 2)}


@dataclass(frozen=True)
class TripleCuParams:
    """Rotations of the targeted sequence; U4 closes the product to the identity."""

    u1: Unitary1 = IDENTITY
    u2: Unitary1 = IDENTITY
    u3: Unitary1 = IDENTITY
    target: int = 0
    offsets: tuple[int, ...] = TRIPLE_CU_OFFSETS

    @property
    def u4(self) -> Unitary1:
        return (self.u1 @ self.u2 @ self.u3).dagger()

    def with_target(self, target: int) -> TripleCuParams:
        return TripleCuParams(self.u1, self.u2, self.u3, target, self.offsets)

    def to_dict(self) -> dict:
        return {
            "u1": self.u1.to_dict(),
            "u2": self.u2.to_dict(),
            "u3": self.u3.to_dict(),
            "target": self.target,
        }


@dataclass(frozen=True)
class SyndromeMode:
    """Which of U2/U3 is the identity; the other is ``u_x``."""

    identity_slot: str
    u_x: Unitary1 = SYNDROME_ROTATION
    u1: Unitary1 = IDENTITY

    def __post_init__(self):
        if self.identity_slot not in ("U2", "U3"):
            raise InvalidInstruction("identity_slot must be 'U2' or 'U3'")

    def params(self, target: int) -> TripleCuParams:
        if self.identity_slot == "U2":
            return TripleCuParams(self.u1, IDENTITY, self.u_x, target)
        return TripleCuParams(self.u1, self.u_x, IDENTITY, target)


MODE_U2_IDENTITY = SyndromeMode("U2")
MODE_U3_IDENTITY = SyndromeMode("U3")
SYNDROME_MODES = {"U2": MODE_U2_IDENTITY, "U3": MODE_U3_IDENTITY}

# Round schedule: (CU corrected, extraction mode)
CYCLE_SCHEDULE = ((1, MODE_U2_IDENTITY), (2, MODE_U3_IDENTITY), (3, MODE_U3_IDENTITY))


@dataclass
class CorrectionReport:
    """Outcome of one correction cycle."""

    syndromes: list[int] = field(default_factory=list)
    corrected: list[int] = field(default_factory=list)
    final_cus: tuple[int | None, ...] = ()
    ancilla: int | None = 0
    aborted_round: int | None = None

    @property
    def ok(self) -> bool:
        return self.final_cus == (1, 1, 1) and self.ancilla == 0

    def to_dict(self) -> dict:
        return {
            "syndromes": list(self.syndromes),
            "corrected": list(self.corrected),
            "final_cus": list(self.final_cus),
            "ancilla": self.ancilla,
            "aborted_round": self.aborted_round,
            "ok": self.ok,
        }


# =============================================================================
# Closed forms
# =============================================================================


def half_evolution(params: TripleCuParams, failed_cu: int | None = None) -> Unitary1:
    """U1 s1 U2 s2 U3 s3 U4 where s_k is sz unless CU k failed."""
    z = {k: (IDENTITY if k == failed_cu else PAULI_Z) for k in (1, 2, 3)}
    return params.u1 @ z[1] @ params.u2 @ z[2] @ params.u3 @ z[3] @ params.u4


def target_evolution(params: TripleCuParams) -> Unitary1:
    """Net evolution of the target under the doubled sequence."""
    half = half_evolution(params)
    return half @ half


def error_evolution(params: TripleCuParams, failed_cu: int | None) -> Unitary1:
    """Target evolution with one CU persistently flipped to 0 (None: no failure)."""
    half = half_evolution(params, failed_cu)
    return half @ half


def exposure_census(layout: Layout, target: int) -> Counter:
    """
    CP exposures per computational unit over one half.

    Raises:
        InsufficientMargins: If units target-3..target+3 are not available
    """
    _check_target(layout, target)
    census = Counter()
    for alignment in CP_ALIGNMENTS:
        for offset in alignment:
            census[target + offset] += 1
    return census


def syndrome_table() -> list[dict]:
    """
    Closed-form truth table: ancilla flip for every (failed CU, mode).

    Returns:
        Rows with keys mode, failed_cu (0 = none) and syndrome
    """
    rows = []
    for slot in ("U2", "U3"):
        params = SYNDROME_MODES[slot].params(0)
        for failed in (0, 1, 2, 3):
            v = error_evolution(params, failed or None)
            flip = abs(v.matrix[1, 0]) ** 2
            rows.append({"mode": f"{slot}=1", "failed_cu": failed, "syndrome": int(round(flip))})
    return rows


# =============================================================================
# Deployment and the targeted sequence
# =============================================================================


def deploy_three_cus(state, layout, anchor: int = 0, rng=None, runner=None):
    """
    Pre-pattern the three CUs at units anchor+0, +1, +3; every other B cell 0.

    Raises:
        InsufficientMargins: If the CU workspace does not fit the margins
        StrayControlError: If a B cell is not classical
    """
    runner = make_runner(state, layout, rng, runner)
    sites = set(layout.triple_cu_sites(anchor))
    ones = set(b_ones(state))
    runner.toggle(sorted(ones.symmetric_difference(sites)))
    logger.debug(f"deployed three CUs at {sorted(sites)}")


def _check_cus(state: ChainState, layout: Layout, anchor: int) -> list[int]:
    sites = layout.triple_cu_sites(anchor)
    ones = b_ones(state)
    stray = [j for j in ones if j not in sites]
    if stray:
        raise StrayControlError(f"B ones outside the CU sites: {stray[:6]}")
    if not ones:
        raise CusNotDeployed("No CU is present at the triple-CU sites")
    return ones


def _check_target(layout: Layout, target: int):
    first, last = target - 3, target + 3
    if first < 0 or last >= layout.n_comp or not layout.is_regular_span(first, last):
        raise InsufficientMargins(
            f"Target {target} needs regular units {first}..{last}"
        )


def targeted_rotation_3cu(
    state, layout, params: TripleCuParams, anchor: int = 0, rng=None, runner=None
):
    """
    Run the doubled triple-CU sequence on ``params.target``.

    Each half, in time order: ROT_A(U4), CP with CU3 aligned, shift +2 units,
    ROT_A(U3), CP with CU2 aligned, shift +1 unit, ROT_A(U2), CP with CU1
    aligned, ROT_A(U1), shift -3 units. The CUs are brought from their rest
    anchor so that CU3 sits on the target, and returned afterwards.

    Raises:
        CusNotDeployed: If no CU is present
        StrayControlError: If B ones exist away from the CU sites
        InsufficientMargins: If units target-3..target+3 are not available
    """
    runner = make_runner(state, layout, rng, runner)
    _check_cus(state, layout, anchor)
    _check_target(layout, params.target)
    delta = params.target - 3 - anchor
    move_cu(state, layout, delta, runner=runner)
    for _ in range(2):
        runner.emit(rot_a(params.u4))
        runner.emit(cp_ab())
        move_cu(state, layout, 2, runner=runner)
        runner.emit(rot_a(params.u3))
        runner.emit(cp_ab())
        move_cu(state, layout, 1, runner=runner)
        runner.emit(rot_a(params.u2))
        runner.emit(cp_ab())
        runner.emit(rot_a(params.u1))
        move_cu(state, layout, -3, runner=runner)
    move_cu(state, layout, -delta, runner=runner)


# =============================================================================
# Syndrome extraction and feedback
# =============================================================================


def ancilla_cell(layout: Layout, ancilla: int) -> int:
    return layout.comp_index(ancilla)


def _check_cycle_room(layout: Layout, ancilla: int, anchor: int):
    if anchor != ancilla - 3:
        raise InsufficientMargins(
            f"Feedback needs the CUs resting at unit {ancilla - 3}, got anchor {anchor}"
        )
    if ancilla < 3 or layout.margins < ancilla + 4:
        raise InsufficientMargins(
            f"Ancilla unit {ancilla} needs margins >= {ancilla + 4}, "
            f"layout has {layout.margins}"
        )
    if not layout.is_regular_span(ancilla - 3, ancilla + 3):
        raise InsufficientMargins(f"Units {ancilla - 3}..{ancilla + 3} are not regular")


def extract_syndrome(
    state,
    layout,
    mode: SyndromeMode,
    ancilla: int = DEFAULT_ANCILLA_UNIT,
    anchor: int = 0,
    rng=None,
    runner=None,
) -> int:
    """
    Rotate a |0> ancilla with the mode's parameters and read it.

    Returns:
        The ancilla bit (1 flags one of the CUs covered by the mode)

    Raises:
        AncillaNotClear: If the ancilla is not classical 0
        SyndromeNotClassical: If the ancilla ends in superposition
    """
    cell = ancilla_cell(layout, ancilla)
    if state.classical_bit(cell) != 0:
        raise AncillaNotClear(f"Ancilla A({cell}) is not classical 0")
    targeted_rotation_3cu(
        state, layout, mode.params(ancilla), anchor=anchor, rng=rng, runner=runner
    )
    bit = state.classical_bit(cell)
    if bit is None:
        raise SyndromeNotClassical(
            f"Ancilla A({cell}) ended with P(1)={state.probability_one(cell):.3e}"
        )
    return bit


def feedback_pulses(cu_index: int) -> list:
    """Pulse list for one feedback word."""
    if cu_index not in FEEDBACK_WORDS:
        raise InvalidInstruction(f"cu_index must be 1, 2 or 3, got {cu_index}")
    tokens = {
        "WR": macro(MACRO_CTRL_U_BA, u=PAULI_X),
        "WL": macro(MACRO_CTRL_U_AB, u=PAULI_X),
        "S": macro(MACRO_FLIP_B_SANDWICH),
        "SH+": shift_b(1, 1),
        "SH-": shift_b(-1, 1),
    }
    return [tokens[word] for word in FEEDBACK_WORDS[cu_index].split()]


def feedback_correct(
    state,
    layout,
    cu_index: int,
    ancilla: int = DEFAULT_ANCILLA_UNIT,
    anchor: int | None = None,
    rng=None,
    runner=None,
):
    """
    Flip CU ``cu_index`` iff the ancilla and the two other CUs are all 1.

    The ancilla is left as it was; reset_ancilla clears it.
    """
    runner = make_runner(state, layout, rng, runner)
    anchor = ancilla - 3 if anchor is None else anchor
    _check_cycle_room(layout, ancilla, anchor)
    runner.emit_all(feedback_pulses(cu_index))


def reset_ancilla(
    state, layout, ancilla: int = DEFAULT_ANCILLA_UNIT, anchor: int | None = None,
    rng=None, runner=None,
):
    """
    Clear the ancilla with CU2 (shift +5 spacings) and then CU1 (+8).

    Either CU alone suffices, so a single failed CU cannot leave it set.
    """
    runner = make_runner(state, layout, rng, runner)
    anchor = ancilla - 3 if anchor is None else anchor
    _check_cycle_room(layout, ancilla, anchor)
    reset = macro(MACRO_CRESET_BA)
    runner.shift(5)
    runner.emit(reset)
    runner.shift(3)
    runner.emit(reset)
    runner.shift(-8)


def cu_bits(state: ChainState, layout: Layout, anchor: int = 0) -> tuple:
    """Bits of CU1, CU2 and CU3 at rest."""
    return tuple(state.classical_bit(site) for site in layout.triple_cu_sites(anchor))


def correction_cycle(
    state, layout, ancilla: int = DEFAULT_ANCILLA_UNIT, rng=None, runner=None
) -> CorrectionReport:
    """
    Three extraction/feedback/reset rounds correcting any single CU flip.

    Round c extracts with the scheduled mode and feeds back onto CU c,
    controlled by the other two. A round that finds the ancilla dirty is
    recorded and ends the cycle; two flips are reported, never raised.

    Returns:
        CorrectionReport
    """
    runner = make_runner(state, layout, rng, runner)
    anchor = ancilla - 3
    _check_cycle_room(layout, ancilla, anchor)
    cell = ancilla_cell(layout, ancilla)
    report = CorrectionReport()
    for round_no, (cu_index, mode) in enumerate(CYCLE_SCHEDULE, start=1):
        if state.classical_bit(cell) != 0:
            report.aborted_round = round_no
            logger.debug(f"correction round {round_no} skipped: ancilla not clear")
            break
        before = cu_bits(state, layout, anchor)
        syndrome = extract_syndrome(
            state, layout, mode, ancilla, anchor=anchor, runner=runner
        )
        feedback_correct(state, layout, cu_index, ancilla, anchor, runner=runner)
        after = cu_bits(state, layout, anchor)
        if before[cu_index - 1] != after[cu_index - 1]:
            report.corrected.append(cu_index)
        reset_ancilla(state, layout, ancilla, anchor, runner=runner)
        report.syndromes.append(syndrome)
    report.final_cus = cu_bits(state, layout, anchor)
    report.ancilla = state.classical_bit(cell)
    logger.debug(f"correction cycle: {report.to_dict()}")
    return report


def cycle_transfer_map(layout: Layout, ancilla: int = DEFAULT_ANCILLA_UNIT) -> dict:
    """
    Classical action of one correction cycle on the three CU bits.

    Every one of the 8 CU patterns is run through the full pulse-level cycle
    on a clean chain. With no CU left the cycle cannot run and the bits are
    kept as they are.

    Returns:
        Mapping (b1, b2, b3) -> (final bits, report)
    """

    anchor = ancilla - 3
    sites = layout.triple_cu_sites(anchor)
    table = {}
    for pattern in range(8):
        bits = tuple((pattern >> k) & 1 for k in range(3))
        state = init(layout, PATTERN_ALL_ZERO)
        for site, bit in zip(sites, bits):
            if bit:
                state.toggle_bit(site)
        try:
            report = correction_cycle(state, layout, ancilla)
        except CusNotDeployed:
            report = CorrectionReport(final_cus=bits, aborted_round=1)
        table[bits] = (report.final_cus, report)
    return table


def random_params(rng: np.random.Generator, target: int = 0) -> TripleCuParams:
    """Haar-random U1, U2, U3."""

    return TripleCuParams(random_unitary(rng), random_unitary(rng), random_unitary(rng), target)
