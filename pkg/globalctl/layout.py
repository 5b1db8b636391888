"""
Chain geometry and classical bookkeeping.

A chain is a run of six-cell units. A computational unit u holds its payload
on A(6u), its CU home on B(6u+1) and buffers elsewhere. With switching
stations enabled, the chain is a sequence of blocks

    [result unit][w label units][L computational units]

The result unit carries the station CU site B(6s+1), the result bit A(6s+2)
and the pattern-partner bit A(6s+4); each label unit carries one label bit on
A(6s+2), least significant first. Every station one sits between two zero A
cells, so sandwich operations never fire on station data at rest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from globalctl.constants import (
    PATTERN_ALL_ZERO,
    PATTERN_BLOCK_CUS,
    PATTERN_SINGLE_CU,
    PATTERN_TRIPLE_CU,
    ROLE_BUFFER,
    ROLE_CU_HOME,
    ROLE_PAYLOAD,
    ROLE_SS_LABEL,
    ROLE_SS_PARTNER,
    ROLE_SS_RESULT,
    ROLE_STATION_CU,
    ROLE_WORKSPACE,
    TRIPLE_CU_MIN_MARGINS,
    TRIPLE_CU_OFFSETS,
    UNIT_CELLS,
)
from globalctl.exceptions import (
    InsufficientLength,
    InsufficientMargins,
    LayoutError,
    LevelOutOfRange,
    PatternError,
)
from globalctl.filesystem import read_json, write_json
from globalctl.utils import content_hash

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayoutConfig:
    """Inputs to build_layout."""

    n_comp: int
    L: int = 1
    concat_depth: int = 0
    ss_width: int = 0
    margins: int = 0
    triple_cu: bool = False
    labels: tuple[int, ...] | None = None

    @classmethod
    def from_dict(cls, document: dict) -> LayoutConfig:
        labels = document.get("labels")
        return cls(
            n_comp=int(document["n_comp"]),
            L=int(document.get("L", 1)),
            concat_depth=int(document.get("concat_depth", 0)),
            ss_width=int(document.get("ss_width", 0)),
            margins=int(document.get("margins", 0)),
            triple_cu=bool(document.get("triple_cu", False)),
            labels=None if labels is None else tuple(int(x) for x in labels),
        )

    def to_dict(self) -> dict:
        return {
            "n_comp": self.n_comp,
            "L": self.L,
            "concat_depth": self.concat_depth,
            "ss_width": self.ss_width,
            "margins": self.margins,
            "triple_cu": self.triple_cu,
            "labels": None if self.labels is None else list(self.labels),
        }


@dataclass(frozen=True)
class SwitchingStation:
    """One station: CU site, result bit, pattern partner and label bits."""

    index: int
    unit: int
    cu_site: int
    result_index: int
    partner_index: int
    label_cells: tuple[int, ...]
    label: int
    result: int
    block_comp: tuple[int, ...]

    @property
    def cells(self) -> tuple[int, ...]:
        """Reserved A cells: result, partner, then label bits."""
        return (self.result_index, self.partner_index) + self.label_cells

    def label_bits(self, value: int | None = None) -> list[int]:
        """Little-endian bits of ``value`` (default: this station's label)."""
        value = self.label if value is None else value
        return [(value >> k) & 1 for k in range(len(self.label_cells))]

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "unit": self.unit,
            "cells": list(self.cells),
            "cu_site": self.cu_site,
            "result_index": self.result_index,
            "partner_index": self.partner_index,
            "label_cells": list(self.label_cells),
            "label": self.label,
            "result": self.result,
            "block_comp": list(self.block_comp),
        }


@dataclass(frozen=True)
class Layout:
    """Immutable chain geometry."""

    config: LayoutConfig
    n: int
    comp_units: tuple[int, ...]
    stations: tuple[SwitchingStation, ...]
    block_units: int
    fingerprint: str = field(default="")

    # ------------------------------------------------------------------
    # convenience views
    # ------------------------------------------------------------------

    @property
    def n_comp(self) -> int:
        return self.config.n_comp

    @property
    def L(self) -> int:
        return self.config.L

    @property
    def concat_depth(self) -> int:
        return self.config.concat_depth

    @property
    def margins(self) -> int:
        return self.config.margins

    @property
    def has_stations(self) -> bool:
        return len(self.stations) > 0

    @property
    def computational_indices(self) -> list[int]:
        return [UNIT_CELLS * u for u in self.comp_units]

    @property
    def cu_home(self) -> list[int]:
        return [UNIT_CELLS * u + 1 for u in self.comp_units]

    @property
    def payload_qubits(self) -> list[int]:
        """Computational indices that may carry payload (outside the margins)."""
        return list(range(self.margins, self.n_comp))

    def comp_index(self, q: int) -> int:
        """A cell of computational qubit q."""
        self._check_comp(q)
        return UNIT_CELLS * self.comp_units[q]

    def home_of(self, q: int) -> int:
        """CU home B cell of computational qubit q."""
        self._check_comp(q)
        return UNIT_CELLS * self.comp_units[q] + 1

    def _check_comp(self, q: int):
        if not 0 <= q < self.n_comp:
            raise LayoutError(f"Computational index {q} outside 0..{self.n_comp - 1}")

    def is_regular_span(self, first: int, last: int) -> bool:
        """True when computational units first..last are physically consecutive."""
        if first < 0 or last >= self.n_comp or first > last:
            return False
        base = self.comp_units[first]
        return all(self.comp_units[q] == base + (q - first) for q in range(first, last + 1))

    def station_labels(self) -> list[int]:
        return [station.label for station in self.stations]

    # ------------------------------------------------------------------
    # roles and patterns
    # ------------------------------------------------------------------

    def cell_role(self, i: int) -> str:
        """Role of physical cell i (see constants ROLE_*)."""
        if not 0 <= i < self.n:
            raise LayoutError(f"Cell {i} outside chain of {self.n}")
        return self._roles()[i]

    def _roles(self) -> list[str]:
        cached = getattr(self, "_role_cache", None)
        if cached is not None:
            return cached
        roles = [ROLE_BUFFER] * self.n
        for q, u in enumerate(self.comp_units):
            roles[UNIT_CELLS * u] = ROLE_WORKSPACE if q < self.margins else ROLE_PAYLOAD
            roles[UNIT_CELLS * u + 1] = ROLE_CU_HOME
        for station in self.stations:
            roles[station.cu_site] = ROLE_STATION_CU
            roles[station.result_index] = ROLE_SS_RESULT
            roles[station.partner_index] = ROLE_SS_PARTNER
            for cell in station.label_cells:
                roles[cell] = ROLE_SS_LABEL
        object.__setattr__(self, "_role_cache", roles)
        return roles

    def station_pattern(self, bits: list[int]):
        """Write canonical labels and results into a bit list in place."""
        for station in self.stations:
            for cell, bit in zip(station.label_cells, station.label_bits()):
                bits[cell] = bit
            bits[station.result_index] = station.result
            if station.result:
                bits[station.cu_site] = 1

    def canonical_pattern(self, name: str, anchor: int = 0) -> list[int]:
        """
        Bit list for a named initial pattern.

        Args:
            name: One of all-zero, single-CU, block-CUs, triple-CU
            anchor: Anchor unit for the triple-CU pattern

        Returns:
            List of n bits

        Raises:
            PatternError: If the pattern is unknown or the layout cannot host it
        """
        bits = [0] * self.n
        if name == PATTERN_ALL_ZERO:
            return bits
        if name == PATTERN_SINGLE_CU:
            if self.has_stations:
                self.station_pattern(bits)
            else:
                bits[self.home_of(0)] = 1
            return bits
        if name == PATTERN_BLOCK_CUS:
            if not self.has_stations:
                raise PatternError("block-CUs needs switching stations")
            self.station_pattern(bits)
            for cell in self.activation_cells(0):
                bits[cell] ^= 1
            return bits
        if name == PATTERN_TRIPLE_CU:
            if self.has_stations:
                self.station_pattern(bits)
                for station in self.stations:
                    bits[station.cu_site] = 0
            for cell in self.triple_cu_sites(anchor):
                bits[cell] = 1
            return bits
        raise PatternError(f"Unknown pattern {name!r}")

    def activation_cells(self, level: int) -> list[int]:
        """
        Cells toggled to move from single-CU mode to level-``level`` activation.

        Active stations (label >= level) get CU site, result and pattern
        partner set; the top station already holds its CU and result.
        """
        if not self.has_stations:
            raise PatternError("Activation needs switching stations")
        if not 0 <= level <= self.concat_depth:
            raise LevelOutOfRange(f"Level {level} outside 0..{self.concat_depth}")
        cells = []
        for station in self.stations:
            if station.label < level:
                continue
            if not station.result:
                cells.extend([station.cu_site, station.result_index])
            cells.append(station.partner_index)
        return sorted(cells)

    def triple_cu_sites(self, anchor: int = 0) -> list[int]:
        """B cells of the three redundant CUs at rest around ``anchor``."""
        last = anchor + TRIPLE_CU_OFFSETS[-1]
        if anchor < 0 or not self.is_regular_span(anchor, last):
            raise InsufficientMargins(
                f"Triple-CU anchor {anchor} needs regular units {anchor}..{last}"
            )
        if last >= self.margins:
            raise InsufficientMargins(
                f"Triple-CU anchor {anchor} needs {last + 1} workspace units, "
                f"layout has margins={self.margins}"
            )
        return [self.home_of(anchor + k) for k in TRIPLE_CU_OFFSETS]

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_comp": self.n_comp,
            "L": self.L,
            "concat_depth": self.concat_depth,
            "ss_width": self.config.ss_width,
            "margins": self.margins,
            "triple_cu": self.config.triple_cu,
            "comp_units": list(self.comp_units),
            "ss": [station.to_dict() for station in self.stations],
            "fingerprint": self.fingerprint,
        }


# =============================================================================
# Label arithmetic
# =============================================================================


def canonical_label(j: int, L: int, depth: int) -> int:
    """
    Hierarchical label of station j: the L-adic valuation of j capped at depth.

    Station 0 is the top station and carries label ``depth``.
    """
    if j == 0 or L <= 1:
        return depth
    label = 0
    while j % L == 0 and label < depth:
        j //= L
        label += 1
    return label


def relabel_for_three_cu(labels: list[int]) -> list[int]:
    """
    Relabel stations for the three-CU arrangement.

    Every nonzero label is incremented; every zero label exactly 1 or 3
    positions to the right of an originally nonzero label becomes 1.

    Args:
        labels: Station labels

    Returns:
        New label list
    """
    out = list(labels)
    for i, label in enumerate(labels):
        if label == 0:
            continue
        out[i] = label + 1
        for step in (1, 3):
            j = i + step
            if j < len(labels) and labels[j] == 0:
                out[j] = 1
    return out


def is_canonical(layout: Layout) -> bool:
    """True when every station label follows canonical_label."""
    return all(
        station.label == canonical_label(station.index, layout.L, layout.concat_depth)
        for station in layout.stations
    )


def active_cus(layout: Layout, level: int, labels: list[int] | None = None) -> list[int]:
    """
    CU sites active at a concatenation level.

    Stations with label >= level stay active; level 0 returns every CU site
    (station CU sites, or every CU home when the layout has no stations).

    Args:
        layout: Chain layout
        level: 0..concat_depth
        labels: Optional label list overriding the layout's labels

    Returns:
        Sorted CU site indices

    Raises:
        LevelOutOfRange: If level is outside 0..concat_depth
    """
    if not 0 <= level <= layout.concat_depth:
        raise LevelOutOfRange(f"Level {level} outside 0..{layout.concat_depth}")
    if not layout.has_stations:
        return list(layout.cu_home)
    if labels is None:
        labels = layout.station_labels()
    if len(labels) != len(layout.stations):
        raise LayoutError(f"Expected {len(layout.stations)} labels, got {len(labels)}")
    return [
        station.cu_site
        for station, label in zip(layout.stations, labels)
        if level == 0 or label >= level
    ]


# =============================================================================
# Construction
# =============================================================================


def build_layout(config: LayoutConfig | dict) -> Layout:
    """
    Place computational units, stations and margins on a chain.

    Args:
        config: LayoutConfig or its dict form

    Returns:
        Layout with a stable content fingerprint

    Raises:
        InsufficientLength: If the chain cannot host units, margins and stations
        LayoutError: If the configuration is inconsistent
    """
    if isinstance(config, dict):
        config = LayoutConfig.from_dict(config)

    if config.n_comp < 1:
        raise InsufficientLength("A layout needs at least one computational unit")
    if config.margins < 0 or config.concat_depth < 0 or config.ss_width < 0:
        raise LayoutError("margins, concat_depth and ss_width must be non-negative")
    if config.margins > config.n_comp:
        raise InsufficientLength(
            f"margins={config.margins} exceeds n_comp={config.n_comp}"
        )
    if config.triple_cu:
        if config.margins < TRIPLE_CU_MIN_MARGINS:
            raise InsufficientMargins(
                f"Triple-CU layouts need margins >= {TRIPLE_CU_MIN_MARGINS}"
            )
        if config.n_comp < config.margins + 3:
            raise InsufficientLength(
                f"Triple-CU transport needs n_comp >= margins + 3 "
                f"({config.margins + 3}), got {config.n_comp}"
            )

    if config.ss_width == 0:
        if config.concat_depth != 0:
            raise LayoutError("concat_depth > 0 needs switching stations")
        comp_units = tuple(range(config.n_comp))
        layout = Layout(
            config=config,
            n=UNIT_CELLS * config.n_comp,
            comp_units=comp_units,
            stations=(),
            block_units=config.n_comp,
        )
    else:
        layout = _build_with_stations(config)

    fingerprint = content_hash(
        {"config": config.to_dict(), "structure": layout.to_dict()}
    )
    object.__setattr__(layout, "fingerprint", fingerprint)
    logger.debug(
        f"built layout n={layout.n} n_comp={layout.n_comp} "
        f"stations={len(layout.stations)} fingerprint={fingerprint[:12]}"
    )
    return layout


def _build_with_stations(config: LayoutConfig) -> Layout:
    L, depth, width = config.L, config.concat_depth, config.ss_width
    if L < 1:
        raise LayoutError("Block length L must be >= 1")
    if config.n_comp % L != 0:
        raise InsufficientLength(f"n_comp={config.n_comp} is not a multiple of L={L}")
    n_stations = config.n_comp // L
    if depth > 0 and (L < 2 or n_stations % (L**depth) != 0):
        raise InsufficientLength(
            f"{n_stations} stations cannot host {depth} levels of blocks of {L}"
        )
    labels = config.labels
    if labels is None:
        labels = tuple(canonical_label(j, L, depth) for j in range(n_stations))
    if len(labels) != n_stations:
        raise LayoutError(f"Expected {n_stations} labels, got {len(labels)}")
    if max(labels) >= 2**width or min(labels) < 0:
        raise LayoutError(f"Labels {labels} do not fit in {width} label bits")

    block_units = 1 + width + L
    stations = []
    comp_units = []
    for j in range(n_stations):
        unit = j * block_units
        first_comp = unit + 1 + width
        block_comp = tuple(range(len(comp_units), len(comp_units) + L))
        comp_units.extend(range(first_comp, first_comp + L))
        stations.append(
            SwitchingStation(
                index=j,
                unit=unit,
                cu_site=UNIT_CELLS * unit + 1,
                result_index=UNIT_CELLS * unit + 2,
                partner_index=UNIT_CELLS * unit + 4,
                label_cells=tuple(
                    UNIT_CELLS * (unit + 1 + k) + 2 for k in range(width)
                ),
                label=int(labels[j]),
                result=1 if j == 0 else 0,
                block_comp=block_comp,
            )
        )
    return Layout(
        config=config,
        n=UNIT_CELLS * block_units * n_stations,
        comp_units=tuple(comp_units),
        stations=tuple(stations),
        block_units=block_units,
    )


# =============================================================================
# Layout files
# =============================================================================


def save_layout(layout: Layout, to_file: str, dryrun: bool = False) -> str:
    """Write the layout file (geometry, stations, config, fingerprint)."""
    document = layout.to_dict()
    document["config"] = layout.config.to_dict()
    return write_json(document, to_file, dryrun=dryrun)


def load_layout(from_file: str) -> Layout:
    """
    Rebuild a layout from its file and check the stored fingerprint.

    Raises:
        LayoutError: If the stored fingerprint does not match the rebuilt one
    """
    document = read_json(from_file)
    config_doc = document.get("config")
    if config_doc is None:
        config_doc = {
            key: document[key]
            for key in ("n_comp", "L", "concat_depth", "ss_width", "margins", "triple_cu")
            if key in document
        }
        if document.get("ss"):
            config_doc["labels"] = [station["label"] for station in document["ss"]]
    layout = build_layout(LayoutConfig.from_dict(config_doc))
    stored = document.get("fingerprint")
    if stored and stored != layout.fingerprint:
        raise LayoutError(
            f"Layout file {from_file} fingerprint {stored[:12]} does not match "
            f"its contents ({layout.fingerprint[:12]})"
        )
    return layout
