"""
Bit-flip noise and Monte Carlo estimation of CU survival.

Noise epochs sit between correction cycles: every in-scope classical cell
flips independently with ``p_flip``, drawing from the generator in ascending
cell order. A corrected trial fails when a cycle starts with two or more of
the three CUs flipped (or the cycle does not restore them); an uncorrected
trial follows CU1 alone and fails when it is 0 at the horizon.

Two engines share the per-trial seeds and draw order, so they agree trial by
trial:

* ``table`` pushes the three CU bits through the cycle's classical transfer
  map, computed once by full pulse-level simulation of all eight patterns.
* ``full`` runs every correction pulse on a chain state.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from astropy.stats import binom_conf_interval

from globalctl.chain_state import init
from globalctl.constants import (
    DEFAULT_ANCILLA_UNIT,
    DEFAULT_NOISE_SCOPE,
    ENGINE_FULL,
    ENGINE_TABLE,
    MC_CSV_COLUMNS,
    MODE_CORRECTED,
    MODE_UNCORRECTED,
    PATTERN_TRIPLE_CU,
    ROLE_PAYLOAD,
    SCOPE_CU_SITES,
    WILSON_CONFIDENCE,
)
from globalctl.exceptions import GlobalControlError, InvalidInstruction
from globalctl.filesystem import write_csv, write_json
from globalctl.layout import Layout, LayoutConfig, build_layout
from globalctl.progress import progress_iter
from globalctl.protocols import PulseRunner
from globalctl.redundant_cu import correction_cycle, cu_bits, cycle_transfer_map
from globalctl.unitary import PAULI_X, PAULI_Y, PAULI_Z
from globalctl.utils import derive_seed, make_rng, thread_budget

logger = logging.getLogger(__name__)

DEFAULT_MC_LAYOUT = {"n_comp": 10, "margins": 7, "triple_cu": True}


@dataclass(frozen=True)
class ErrorModel:
    """
    Per-step error probabilities and the cells they act on.

    Attributes:
        p_flip: Bit-flip probability per in-scope classical cell per epoch
        quantum_pauli: Optional (px, py, pz) per in-scope quantum cell
        scope: Cell roles that are noisy; ``cu_sites`` selects the three CUs
        include_payload: Also make payload cells noisy
        master_seed: Seed trial seeds are derived from
    """

    p_flip: float = 0.0
    quantum_pauli: tuple[float, float, float] | None = None
    scope: tuple[str, ...] = DEFAULT_NOISE_SCOPE
    include_payload: bool = False
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_flip <= 1.0:
            raise InvalidInstruction(f"p_flip must lie in [0, 1], got {self.p_flip}")
        if self.quantum_pauli is not None:
            if len(self.quantum_pauli) != 3 or any(
                p < 0.0 or p > 1.0 for p in self.quantum_pauli
            ):
                raise InvalidInstruction("quantum_pauli needs three probabilities in [0, 1]")
            if sum(self.quantum_pauli) > 1.0 + 1e-12:
                raise InvalidInstruction("quantum_pauli probabilities sum above 1")

    @classmethod
    def from_dict(cls, document: dict) -> ErrorModel:
        pauli = document.get("quantum_pauli")
        return cls(
            p_flip=float(document.get("p_flip", 0.0)),
            quantum_pauli=None if pauli is None else tuple(float(p) for p in pauli),
            scope=tuple(document.get("scope", DEFAULT_NOISE_SCOPE)),
            include_payload=bool(document.get("include_payload", False)),
            master_seed=int(document.get("master_seed", 0)),
        )

    def to_dict(self) -> dict:
        return {
            "p_flip": self.p_flip,
            "quantum_pauli": None if self.quantum_pauli is None else list(self.quantum_pauli),
            "scope": list(self.scope),
            "include_payload": self.include_payload,
            "master_seed": self.master_seed,
        }


def noise_cells(layout: Layout, model: ErrorModel, anchor: int = 0) -> list[int]:
    """Ascending cells the model acts on."""
    cells = set()
    if SCOPE_CU_SITES in model.scope:
        cells.update(layout.triple_cu_sites(anchor))
    for i in range(layout.n):
        role = layout.cell_role(i)
        if role in model.scope or (model.include_payload and role == ROLE_PAYLOAD):
            cells.add(i)
    return sorted(cells)


def apply_noise_step(state, layout, model: ErrorModel, rng, cells=None) -> list[int]:
    """
    One noise epoch.

    Args:
        state: ChainState to corrupt in place
        layout: Chain layout
        model: Error model
        rng: numpy Generator, consumed in ascending cell order
        cells: Precomputed ``noise_cells`` (computed when omitted)

    Returns:
        Cells that were flipped or hit by a Pauli
    """
    if cells is None:
        cells = noise_cells(layout, model)
    hit = []
    for cell in cells:
        bit = state.classical_bit(cell)
        if bit is not None:
            if model.p_flip > 0.0 and rng.random() < model.p_flip:
                state.toggle_bit(cell)
                hit.append(cell)
        elif model.quantum_pauli is not None:
            u = rng.random()
            px, py, pz = model.quantum_pauli
            if u < px:
                state.apply_unitary1(cell, PAULI_X)
            elif u < px + py:
                state.apply_unitary1(cell, PAULI_Y)
            elif u < px + py + pz:
                state.apply_unitary1(cell, PAULI_Z)
            else:
                continue
            hit.append(cell)
    return hit


def analytic_repetition_failure(p: float) -> float:
    """Majority-of-three failure probability 3p^2(1-p) + p^3."""
    if not 0.0 <= p <= 1.0:
        raise InvalidInstruction(f"p must lie in [0, 1], got {p}")
    return 3.0 * p * p * (1.0 - p) + p**3


# =============================================================================
# Trials
# =============================================================================


@dataclass
class McConfig:
    """One Monte Carlo point."""

    layout: dict = field(default_factory=lambda: dict(DEFAULT_MC_LAYOUT))
    model: ErrorModel = field(default_factory=lambda: ErrorModel(scope=(SCOPE_CU_SITES,)))
    cycles: int = 1
    mode: str = MODE_CORRECTED
    trials: int = 1000
    engine: str = ENGINE_TABLE
    ancilla: int = DEFAULT_ANCILLA_UNIT
    per_step: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidInstruction("trials must be at least 1")
        if self.cycles < 1:
            raise InvalidInstruction("cycles must be at least 1")
        if self.mode not in (MODE_CORRECTED, MODE_UNCORRECTED):
            raise InvalidInstruction(f"Unknown mode {self.mode!r}")
        if self.engine not in (ENGINE_TABLE, ENGINE_FULL):
            raise InvalidInstruction(f"Unknown engine {self.engine!r}")
        if self.per_step and self.engine != ENGINE_FULL:
            raise InvalidInstruction("per_step noise needs the full engine")
        # the transfer table tracks the three CU bits and nothing else
        if self.engine == ENGINE_TABLE and (
            tuple(self.model.scope) != (SCOPE_CU_SITES,) or self.model.include_payload
        ):
            raise InvalidInstruction(
                f"the table engine models only the {SCOPE_CU_SITES!r} scope; "
                "use the full engine for other noisy cells"
            )

    @classmethod
    def from_dict(cls, document: dict) -> McConfig:
        model = dict(document.get("model", {}))
        model.setdefault("scope", [SCOPE_CU_SITES])
        return cls(
            layout=dict(document.get("layout", DEFAULT_MC_LAYOUT)),
            model=ErrorModel.from_dict(model),
            cycles=int(document.get("cycles", 1)),
            mode=document.get("mode", MODE_CORRECTED),
            trials=int(document.get("trials", 1000)),
            engine=document.get("engine", ENGINE_TABLE),
            ancilla=int(document.get("ancilla", DEFAULT_ANCILLA_UNIT)),
            per_step=bool(document.get("per_step", False)),
        )

    def to_dict(self) -> dict:
        return {
            "layout": dict(self.layout),
            "model": self.model.to_dict(),
            "cycles": self.cycles,
            "mode": self.mode,
            "trials": self.trials,
            "engine": self.engine,
            "ancilla": self.ancilla,
            "per_step": self.per_step,
        }


@dataclass
class TrialStats:
    p: float
    mode: str
    trials: int
    failures: int
    rate: float
    wilson_lo: float
    wilson_hi: float
    per_cycle: list[int] = field(default_factory=list)
    engine: str = ENGINE_TABLE

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "mode": self.mode,
            "trials": self.trials,
            "failures": self.failures,
            "rate": self.rate,
            "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "per_cycle": list(self.per_cycle),
            "engine": self.engine,
        }


def wilson_interval(failures: int, trials: int, confidence: float = WILSON_CONFIDENCE):
    lo, hi = binom_conf_interval(failures, trials, confidence_level=confidence, interval="wilson")
    return float(lo), float(hi)


def _table_trial(config: McConfig, transfer: dict, seed: int) -> int | None:
    """Cycle index (0-based) at which the trial failed, or None."""
    rng = make_rng(seed)
    p = config.model.p_flip
    bits = (1, 1, 1)
    for cycle in range(config.cycles):
        bits = tuple(b ^ 1 if p > 0.0 and rng.random() < p else b for b in bits)
        if config.mode == MODE_UNCORRECTED:
            continue
        if bits.count(0) >= 2:
            return cycle
        bits = transfer[bits]
        if bits != (1, 1, 1):
            return cycle
    if config.mode == MODE_UNCORRECTED and bits[0] != 1:
        return config.cycles - 1
    return None


def _full_trial(config: McConfig, layout: Layout, seed: int) -> int | None:
    rng = make_rng(seed)
    anchor = config.ancilla - 3
    state = init(layout, PATTERN_TRIPLE_CU)
    cells = noise_cells(layout, config.model, anchor)
    runner = None
    if config.per_step:
        runner = PulseRunner(
            state,
            layout,
            rng=rng,
            noise=lambda s: apply_noise_step(s, layout, config.model, rng, cells),
        )
    for cycle in range(config.cycles):
        apply_noise_step(state, layout, config.model, rng, cells)
        if config.mode == MODE_UNCORRECTED:
            continue
        if cu_bits(state, layout, anchor).count(0) >= 2:
            return cycle
        try:
            report = correction_cycle(state, layout, config.ancilla, rng=rng, runner=runner)
        except GlobalControlError as exc:
            logger.debug(f"trial seed {seed}: cycle {cycle} raised {exc.code}")
            return cycle
        if not report.ok:
            return cycle
    if config.mode == MODE_UNCORRECTED and state.classical_bit(
        layout.triple_cu_sites(anchor)[0]
    ) != 1:
        return config.cycles - 1
    return None


def run_trials(config: McConfig, progress: bool = False) -> TrialStats:
    """
    Estimate the CU failure rate for one configuration.

    Trial i uses ``derive_seed(model.master_seed, i)``; results are reduced
    in trial order, so the outcome does not depend on the thread count.

    Args:
        config: Monte Carlo configuration
        progress: Show a progress bar

    Returns:
        TrialStats with a Wilson interval at WILSON_CONFIDENCE
    """
    layout = build_layout(LayoutConfig.from_dict(config.layout))
    seeds = [derive_seed(config.model.master_seed, i) for i in range(config.trials)]
    if config.engine == ENGINE_TABLE:
        table = cycle_transfer_map(layout, config.ancilla)
        transfer = {bits: final for bits, (final, _) in table.items()}

        def trial(seed):
            return _table_trial(config, transfer, seed)

    else:

        def trial(seed):
            return _full_trial(config, layout, seed)

    per_cycle = [0] * config.cycles
    failures = 0
    with ThreadPoolExecutor(max_workers=thread_budget()) as pool:
        outcomes = pool.map(trial, seeds)
        for failed_at in progress_iter(
            outcomes, desc="Trials", unit="trials", enabled=progress, total=config.trials
        ):
            if failed_at is not None:
                failures += 1
                per_cycle[failed_at] += 1

    lo, hi = wilson_interval(failures, config.trials)
    stats = TrialStats(
        p=config.model.p_flip,
        mode=config.mode,
        trials=config.trials,
        failures=failures,
        rate=failures / config.trials,
        wilson_lo=lo,
        wilson_hi=hi,
        per_cycle=per_cycle,
        engine=config.engine,
    )
    logger.info(
        f"p={stats.p:g} {stats.mode}: {failures}/{config.trials} failed "
        f"(rate {stats.rate:.3e}, 95% [{lo:.3e}, {hi:.3e}])"
    )
    return stats


def run_sweep(
    config: McConfig, ps, modes=(MODE_CORRECTED, MODE_UNCORRECTED), progress: bool = False
) -> list[TrialStats]:
    """run_trials over every (p, mode) pair, p outermost."""
    results = []
    for p in ps:
        for mode in modes:
            model = ErrorModel(
                p_flip=float(p),
                quantum_pauli=config.model.quantum_pauli,
                scope=config.model.scope,
                include_payload=config.model.include_payload,
                master_seed=config.model.master_seed,
            )
            point = McConfig(
                layout=config.layout,
                model=model,
                cycles=config.cycles,
                mode=mode,
                trials=config.trials,
                engine=config.engine,
                ancilla=config.ancilla,
                per_step=config.per_step,
            )
            results.append(run_trials(point, progress=progress))
    return results


def write_results(results: list[TrialStats], to_file: str, dryrun: bool = False) -> str:
    """CSV with MC_CSV_COLUMNS, one row per TrialStats."""
    return write_csv([r.to_dict() for r in results], MC_CSV_COLUMNS, to_file, dryrun)


def write_summary(
    results: list[TrialStats], config: McConfig, to_file: str, dryrun: bool = False
) -> str:
    """JSON summary with the analytic majority-vote failure next to each point."""
    document = {
        "config": config.to_dict(),
        "results": [
            dict(r.to_dict(), analytic=analytic_repetition_failure(r.p)) for r in results
        ],
    }
    return write_json(document, to_file, dryrun)
