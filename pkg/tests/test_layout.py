"""
Unit tests for globalctl.layout module.
"""

import json

import numpy as np
import pytest

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
)
from globalctl.exceptions import (
    InsufficientLength,
    InsufficientMargins,
    LayoutError,
    LevelOutOfRange,
    PatternError,
)
from globalctl.layout import (
    LayoutConfig,
    active_cus,
    build_layout,
    canonical_label,
    is_canonical,
    load_layout,
    relabel_for_three_cu,
    save_layout,
)


class TestBuildLayout:
    """Tests for build_layout function."""

    def test_plain_chain(self, four_unit_layout):
        """Test unit placement without stations."""
        assert four_unit_layout.n == 24
        assert four_unit_layout.computational_indices == [0, 6, 12, 18]
        assert four_unit_layout.cu_home == [1, 7, 13, 19]
        assert not four_unit_layout.has_stations

    def test_accepts_config_object(self):
        """Test that a LayoutConfig builds the same layout as its dict."""
        a = build_layout(LayoutConfig(n_comp=3))
        b = build_layout({"n_comp": 3})
        assert a.fingerprint == b.fingerprint

    def test_fingerprint_changes_with_geometry(self):
        """Test that different configs fingerprint differently."""
        a = build_layout({"n_comp": 3})
        b = build_layout({"n_comp": 4})
        assert a.fingerprint != b.fingerprint

    def test_zero_units_rejected(self):
        """Test that an empty chain is rejected."""
        with pytest.raises(InsufficientLength):
            build_layout({"n_comp": 0})

    def test_margins_exceed_units(self):
        """Test that margins beyond n_comp are rejected."""
        with pytest.raises(InsufficientLength):
            build_layout({"n_comp": 2, "margins": 3})

    def test_triple_cu_needs_margins(self):
        """Test that triple-CU layouts need at least four workspace units."""
        with pytest.raises(InsufficientMargins):
            build_layout({"n_comp": 10, "margins": 3, "triple_cu": True})

    def test_triple_cu_needs_transport_room(self):
        """Test that triple-CU layouts need three units past the margins."""
        with pytest.raises(InsufficientLength):
            build_layout({"n_comp": 6, "margins": 4, "triple_cu": True})

    def test_depth_without_stations(self):
        """Test that concatenation needs switching stations."""
        with pytest.raises(LayoutError):
            build_layout({"n_comp": 4, "concat_depth": 1})

    def test_station_geometry(self, station_layout):
        """Test station cells for L = 2 and one label bit."""
        assert station_layout.n == 48
        first, second = station_layout.stations
        assert first.cu_site == 1
        assert first.result_index == 2
        assert first.partner_index == 4
        assert first.label_cells == (8,)
        assert first.result == 1
        assert second.result == 0
        assert station_layout.comp_units == (2, 3, 6, 7)
        assert first.block_comp == (0, 1)

    def test_labels_must_fit_width(self):
        """Test that a label too wide for its bits is rejected."""
        with pytest.raises(LayoutError):
            build_layout({"n_comp": 4, "L": 2, "ss_width": 1, "labels": [2, 0]})

    def test_blocks_must_divide(self):
        """Test that n_comp must be a multiple of L."""
        with pytest.raises(InsufficientLength):
            build_layout({"n_comp": 5, "L": 2, "ss_width": 1})


class TestRolesAndPatterns:
    """Tests for cell_role and canonical_pattern."""

    def test_roles_without_stations(self):
        """Test workspace, payload, home and buffer roles."""
        layout = build_layout({"n_comp": 3, "margins": 1})
        assert layout.cell_role(0) == ROLE_WORKSPACE
        assert layout.cell_role(6) == ROLE_PAYLOAD
        assert layout.cell_role(7) == ROLE_CU_HOME
        assert layout.cell_role(8) == ROLE_BUFFER

    def test_station_roles(self, station_layout):
        """Test the reserved station cells."""
        assert station_layout.cell_role(1) == ROLE_STATION_CU
        assert station_layout.cell_role(2) == ROLE_SS_RESULT
        assert station_layout.cell_role(4) == ROLE_SS_PARTNER
        assert station_layout.cell_role(8) == ROLE_SS_LABEL

    def test_role_out_of_range(self, four_unit_layout):
        """Test that a cell past the chain raises LayoutError."""
        with pytest.raises(LayoutError):
            four_unit_layout.cell_role(24)

    def test_all_zero(self, four_unit_layout):
        """Test the all-zero pattern."""
        assert sum(four_unit_layout.canonical_pattern(PATTERN_ALL_ZERO)) == 0

    def test_single_cu_with_stations(self, station_layout):
        """Test that single-CU on stations sets the top station only."""
        bits = station_layout.canonical_pattern(PATTERN_SINGLE_CU)
        ones = [i for i, b in enumerate(bits) if b]
        assert ones == [1, 2]

    def test_block_cus(self, station_layout):
        """Test that level-0 activation lights every station CU."""
        bits = station_layout.canonical_pattern(PATTERN_BLOCK_CUS)
        for station in station_layout.stations:
            assert bits[station.cu_site] == 1
            assert bits[station.result_index] == 1
            assert bits[station.partner_index] == 1

    def test_block_cus_needs_stations(self, four_unit_layout):
        """Test that block-CUs on a plain chain is a PatternError."""
        with pytest.raises(PatternError):
            four_unit_layout.canonical_pattern(PATTERN_BLOCK_CUS)

    def test_triple_cu_sites(self, triple_layout):
        """Test that the three CUs rest at unit offsets 0, 1 and 3."""
        assert triple_layout.triple_cu_sites(0) == [1, 7, 19]
        bits = triple_layout.canonical_pattern(PATTERN_TRIPLE_CU)
        assert [i for i, b in enumerate(bits) if b] == [1, 7, 19]

    def test_triple_cu_outside_workspace(self, triple_layout):
        """Test that the CUs may not rest on payload units."""
        with pytest.raises(InsufficientMargins):
            triple_layout.triple_cu_sites(4)

    def test_unknown_pattern(self, four_unit_layout):
        """Test that unknown names raise PatternError."""
        with pytest.raises(PatternError):
            four_unit_layout.canonical_pattern("many-CUs")


class TestLabels:
    """Tests for label arithmetic and active_cus."""

    def test_canonical_labels(self):
        """Test the L-adic valuation for L = 2, depth 2."""
        assert [canonical_label(j, 2, 2) for j in range(8)] == [2, 0, 1, 0, 2, 0, 1, 0]

    def test_hierarchy_layout_is_canonical(self, hierarchy_layout):
        """Test that default labels are canonical."""
        assert hierarchy_layout.station_labels() == [2, 0, 1, 0]
        assert is_canonical(hierarchy_layout)

    def test_relabel_for_three_cu(self):
        """Test incrementing nonzero labels and lifting their 1 and 3 neighbours."""
        assert relabel_for_three_cu([1, 0, 0, 0, 0]) == [2, 1, 0, 1, 0]
        assert relabel_for_three_cu([2, 0, 1, 0]) == [3, 1, 2, 1]

    def test_relabel_random_lists(self):
        """Test relabelling against the rule applied by hand on random label lists."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            labels = [int(x) for x in rng.choice([0, 0, 0, 1, 2, 3], size=int(rng.integers(1, 12)))]
            expected = []
            for i, label in enumerate(labels):
                if label:
                    expected.append(label + 1)
                elif any(i - step >= 0 and labels[i - step] for step in (1, 3)):
                    expected.append(1)
                else:
                    expected.append(0)
            assert relabel_for_three_cu(labels) == expected

    def test_relabel_all_zero(self):
        """Test that an all-zero list is left alone."""
        assert relabel_for_three_cu([0] * 7) == [0] * 7

    def test_active_cus_by_level(self, hierarchy_layout):
        """Test that each level keeps stations with label >= level."""
        sites = [s.cu_site for s in hierarchy_layout.stations]
        assert active_cus(hierarchy_layout, 0) == sites
        assert active_cus(hierarchy_layout, 1) == [sites[0], sites[2]]
        assert active_cus(hierarchy_layout, 2) == [sites[0]]

    def test_active_cus_level_range(self, hierarchy_layout):
        """Test that levels past the depth are rejected."""
        with pytest.raises(LevelOutOfRange):
            active_cus(hierarchy_layout, 3)

    def test_active_cus_plain_chain(self, four_unit_layout):
        """Test that a chain without stations reports every CU home."""
        assert active_cus(four_unit_layout, 0) == four_unit_layout.cu_home

    def test_activation_cells(self, hierarchy_layout):
        """Test that level 2 activation only sets the top partner."""
        top = hierarchy_layout.stations[0]
        assert hierarchy_layout.activation_cells(2) == [top.partner_index]


class TestLayoutFiles:
    """Tests for save_layout and load_layout."""

    def test_save_and_load(self, tmp_path, hierarchy_layout):
        """Test that a saved layout rebuilds with the same fingerprint."""
        path = save_layout(hierarchy_layout, str(tmp_path / "layout.json"))
        loaded = load_layout(path)
        assert loaded.fingerprint == hierarchy_layout.fingerprint
        assert loaded.n == 120

    def test_tampered_fingerprint(self, tmp_path, four_unit_layout):
        """Test that a mismatched stored fingerprint raises LayoutError."""
        path = tmp_path / "layout.json"
        save_layout(four_unit_layout, str(path))
        document = json.loads(path.read_text())
        document["fingerprint"] = "0" * 64
        path.write_text(json.dumps(document))
        with pytest.raises(LayoutError):
            load_layout(str(path))

    def test_dryrun_writes_nothing(self, tmp_path, four_unit_layout):
        """Test that dryrun skips the write."""
        path = tmp_path / "layout.json"
        save_layout(four_unit_layout, str(path), dryrun=True)
        assert not path.exists()
