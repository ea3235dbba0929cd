import pytest
from hypothesis import given
from hypothesis import strategies as st

from flashx.hardware import HardwareConfig
from flashx.mapping import (
    ALL_LOOP_ORDERS, STYLES, Directive, IllegalClusterSize, IllegalLoopOrder, Mapping,
    MappingParseError, TileSet, classify_tiling, format_loop_order, mapping_from_style,
    mirror_loop_order, non_tiled_mapping, parse_loop_order, parse_mapping, render_mapping,
    validate_mapping,
)
from flashx.workload import GemmWorkload

from conftest import arbitrary_mappings

FIG4 = """\
# the 16-PE example: one output row per step
TMap(1,1) M
SpatialMap(1,1) N
TMap(4,4) K
Cluster(4)
TemporalMap(1,1) M;
TMap(1,1) N
SMap(1,1) K
"""


def test_parse_fig4_mapping():
    m = parse_mapping(FIG4)
    assert m.loop_order == "MNK"
    assert m.outer_spatial == "N" and m.inner_spatial == "K"
    assert m.cluster_size == 4 and m.num_clusters(16) == 4
    assert m.outer_size("K") == 4


@given(arbitrary_mappings())
def test_render_parse_round_trip(mp):
    m, _ = mp
    assert parse_mapping(render_mapping(m)) == m
    assert Mapping.from_dict(m.to_dict()) == m


def test_style_header_round_trip():
    m = mapping_from_style("nvdla", "nkm", 16, TileSet(2, 4, 2, 1, 1, 1))
    text = render_mapping(m, include_style=True)
    assert text.startswith("# style: nvdla")
    assert parse_mapping(text).style == "nvdla"


@pytest.mark.parametrize(
    "text",
    [
        "TMap(1,1) M\nSMap(1,1) N\nTMap(1,1) K\n",  # no cluster
        "TMap(1,1) M\nSMap(1,1) N\nTMap(1,1) K\nCluster(2)\nCluster(2)\n",
        "TMap(1,1) Q\n",
        "TMap(1,1) M\nTMap(1,1) N\nTMap(1,1) K\nCluster(1)\nTMap(1,1) M\nTMap(1,1) N\nTMap(1,1) K\n",
        "TMap(1,1) M\nSMap(1,1) N\nTMap(1,1) K\nCluster(1)\nTMap(1,1) M\nTMap(1,1) M\nTMap(1,1) K\n",
    ],
)
def test_parse_rejects_malformed(text):
    with pytest.raises(MappingParseError):
        parse_mapping(text)


def test_loop_order_helpers():
    assert parse_loop_order("<m,n,k>") == "MNK"
    assert parse_loop_order("knm") == "KNM"
    assert format_loop_order("NKM") == "<n,k,m>"
    assert mirror_loop_order("MKN") == "NKM"
    assert sorted(ALL_LOOP_ORDERS) == sorted({mirror_loop_order(o) for o in ALL_LOOP_ORDERS})
    with pytest.raises(ValueError):
        parse_loop_order("mmk")


def test_fixed_styles_allow_one_order():
    for tag in ("eyeriss", "nvdla", "tpu", "shidiannao"):
        assert len(STYLES[tag].legal_loop_orders) == 1
    assert len(STYLES["maeri"].legal_loop_orders) == 6
    with pytest.raises(IllegalLoopOrder):
        mapping_from_style("tpu", "mnk", 16, TileSet(1, 1, 1, 1, 1, 1))


def test_cluster_size_rules():
    assert STYLES["eyeriss"].cluster_sizes(256) == list(range(1, 13))
    assert STYLES["eyeriss"].cluster_sizes(5) == [1, 2, 3, 4, 5]
    assert STYLES["nvdla"].cluster_sizes(256) == list(range(16, 65))
    assert STYLES["nvdla"].cluster_sizes(8) == [8]
    assert STYLES["tpu"].cluster_sizes(256) == [16]
    assert STYLES["shidiannao"].cluster_sizes(2048) == [45]
    with pytest.raises(IllegalClusterSize):
        mapping_from_style("tpu", "nmk", 8, TileSet(1, 1, 1, 1, 1, 1), pe_count=256)
    with pytest.raises(IllegalClusterSize):
        mapping_from_style("maeri", "mnk", 3, TileSet(1, 1, 2, 1, 1, 1))


@pytest.mark.parametrize("tag", sorted(STYLES))
def test_templates_have_one_spatial_dim_per_level(tag):
    st_ = STYLES[tag]
    lo = st_.canonical_order
    lam = 4 if st_.cluster_rule != "tied" else 2
    tiles = TileSet(2, 2, 2, 1, 1, 1)
    if tag == "nvdla":
        lam = 16
    m = mapping_from_style(tag, lo, lam, tiles)
    assert m.loop_order == lo
    assert sum(d.kind == "S" for d in m.outer) == 1
    assert sum(d.kind == "S" for d in m.inner) == 1
    assert m.inner_spatial != m.outer_spatial


def test_maeri_template_shape():
    m = mapping_from_style("maeri", "kmn", 3, TileSet(2, 3, 5, 1, 1, 4))
    assert [d.dim for d in m.outer] == ["K", "M", "N"]
    assert m.outer_spatial == "M" and m.inner_spatial == "N"
    assert m.inner_size("N") == 1 and m.cluster_size == m.outer_size("N")


def test_validation_codes():
    hw = HardwareConfig(pe_count=8, s1_bytes=8, s2_bytes=64, noc_bandwidth_bytes_per_cycle=1.0)
    w = GemmWorkload(8, 8, 8)
    m = Mapping(
        (Directive("T", "M", 4), Directive("S", "N", 4), Directive("T", "K", 16)),
        16,
        (Directive("T", "M", 8), Directive("T", "N", 2), Directive("S", "K", 1)),
        style="maeri",
    )
    codes = set(validate_mapping(m, w, hw).codes())
    assert {"clusters", "inner>outer", "s1"} <= codes
    assert validate_mapping(parse_mapping(FIG4), GemmWorkload(4, 4, 4), HardwareConfig(16, 64, 1024, 4.0)).ok


def test_overlapping_tiles_flagged():
    m = Mapping(
        (Directive("T", "M", 2, 1), Directive("S", "N", 1), Directive("T", "K", 1)),
        1,
        (Directive("T", "M", 1), Directive("T", "N", 1), Directive("T", "K", 1)),
    )
    rep = validate_mapping(m, GemmWorkload(2, 2, 2), HardwareConfig(4, 64, 1024, 1.0))
    assert rep.codes() == ["overlap"]


def test_tied_cluster_checked():
    m = mapping_from_style("maeri", "mnk", 2, TileSet(1, 1, 2, 1, 1, 1))
    broken = Mapping(m.outer, 4, m.inner, style="maeri")
    rep = validate_mapping(broken, GemmWorkload(4, 4, 4), HardwareConfig(8, 64, 1024, 1.0))
    assert "cluster-size" in rep.codes()


@pytest.mark.parametrize("lo", ALL_LOOP_ORDERS)
def test_non_tiled_reference(lo):
    w = GemmWorkload(512, 256, 256)
    m = non_tiled_mapping(lo, w, 256)
    assert classify_tiling(m) == "NonTiled"
    assert m.outer_size(lo[0]) == m.outer_size(lo[1]) == 1
    assert m.cluster_size == min(w.dims["MNK".index(lo[2])], 256)


def test_fig4_variants_classified():
    # (a) non-tiled; (b) and (c) tile both outer dims of <m,n,k>
    a = mapping_from_style("maeri", "mnk", 4, TileSet(1, 1, 4, 1, 1, 1))
    b = mapping_from_style("maeri", "mnk", 2, TileSet(2, 2, 2, 2, 2, 1))
    c = mapping_from_style("maeri", "mnk", 2, TileSet(2, 1, 2, 2, 1, 1))
    assert [classify_tiling(x) for x in (a, b, c)] == ["NonTiled", "Tiled", "Tiled"]


@given(arbitrary_mappings())
def test_transposed_twice_is_identity(mp):
    m, _ = mp
    assert m.transposed().transposed() == Mapping(m.outer, m.cluster_size, m.inner)


def test_directive_rejects_bad_fields():
    with pytest.raises(ValueError):
        Directive("X", "M", 1)
    with pytest.raises(ValueError):
        Directive("T", "M", 0)
    with pytest.raises(ValueError):
        TileSet(1, 1, 0, 1, 1, 1)
