import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from flashx import kernels
from flashx.cost import (
    InvalidMapping, analyze, build_schedule, count_accesses, estimate_energy, estimate_runtime,
    pipeline_cycles,
)
from flashx.hardware import EnergyTable, HardwareConfig, builtin_hardware
from flashx.mapping import (
    ALL_LOOP_ORDERS, STYLES, TileSet, mapping_from_style, mirror_loop_order, parse_mapping,
)
from flashx.oracle import WorkloadTooLarge, oracle_counts
from flashx.search import enumerate_candidates
from flashx.workload import GemmWorkload, builtin_workload

from conftest import arbitrary_mappings, roomy_hw, workloads

FIG4 = "TMap(1,1) M\nSMap(1,1) N\nTMap(4,4) K\nCluster(4)\nTMap(1,1) M\nTMap(1,1) N\nSMap(1,1) K\n"


def _oracle_row(o):
    return (o.s2["A"], o.s2["B"], o.s2["C"], o.runtime_cycles, o.forwards, sum(o.compute), sum(o.comm), len(o.compute))


def _kernel_row(m, w, hw, full_drain=False):
    r = kernels.evaluate(build_schedule(m, w, hw, full_drain).params, hw.noc_bandwidth_bytes_per_cycle)[0]
    return tuple(int(x) for x in r[:8])


@given(arbitrary_mappings(), workloads(), st.sampled_from([1.0, 2.0, 3.5, 8.0]), st.booleans())
def test_closed_form_matches_walk_on_arbitrary_mappings(mp, w, bw, full_drain):
    m, pes = mp
    hw = roomy_hw(pes, bw)
    assert _kernel_row(m, w, hw, full_drain) == _oracle_row(oracle_counts(m, w, hw, full_drain))


def test_fig4_row_of_a_is_multicast():
    m = parse_mapping(FIG4)
    hw = HardwareConfig(pe_count=16, s1_bytes=64, s2_bytes=1024, noc_bandwidth_bytes_per_cycle=4.0)
    o = oracle_counts(m, GemmWorkload(4, 4, 4), hw)
    # four steps, one C row each; each step fetches one row of A (4 elements), not 16
    assert len(o.compute) == 4
    assert o.s2["A"] == 16
    c = count_accesses(build_schedule(m, GemmWorkload(4, 4, 4), hw))
    assert c.s2 == o.s2
    assert c.forwards == 3 * 16  # three of four lanes pass partial sums on


def test_one_by_one():
    hw = builtin_hardware("edge")
    w = GemmWorkload(1, 1, 1)
    m = mapping_from_style("maeri", "mnk", 1, TileSet(1, 1, 1, 1, 1, 1))
    rep = analyze(m, w, hw)
    assert rep.mac_count == 1
    assert rep.s1_accesses == {"A": 1, "B": 1, "C": 2}
    assert rep.s2_accesses == {"A": 1, "B": 1, "C": 1}
    assert rep.forwards == 0
    assert rep.runtime_cycles == pipeline_cycles([1], [math.ceil(3 / hw.noc_bandwidth_bytes_per_cycle)])
    assert oracle_counts(m, w, hw).s2 == rep.s2_accesses


def test_oracle_guard():
    with pytest.raises(WorkloadTooLarge):
        oracle_counts(parse_mapping(FIG4), GemmWorkload(128, 128, 128), builtin_hardware("edge"))


def test_pipeline_cycles():
    assert pipeline_cycles([], []) == 0
    assert pipeline_cycles([5], [2]) == 7
    # second fetch hides behind first compute
    assert pipeline_cycles([5, 5], [2, 3]) == 2 + 5 + 5
    assert pipeline_cycles([1, 1], [2, 9]) == 2 + 9 + 1
    with pytest.raises(ValueError):
        pipeline_cycles([1], [1, 2])


def _style_sample(w, hw, limit=40):
    out = []
    for tag in STYLES:
        for i, (m, _) in enumerate(enumerate_candidates(tag, w, hw)):
            if i % 7 == 0:
                out.append(m)
            if len(out) >= limit * (list(STYLES).index(tag) + 1):
                break
    return out


@given(workloads(hi=12))
def test_report_invariants(w):
    hw = HardwareConfig(pe_count=16, s1_bytes=32, s2_bytes=512, noc_bandwidth_bytes_per_cycle=2.0)
    ms = _style_sample(w, hw, limit=3)
    assume(ms)
    M, N, K = w.dims
    for m in ms:
        r = analyze(m, w, hw)
        assert r.mac_count == M * N * K
        assert r.s2_accesses["A"] >= M * K and r.s2_accesses["B"] >= K * N and r.s2_accesses["C"] >= M * N
        for x in "ABC":
            assert r.s2_accesses[x] <= r.s1_accesses[x]
        assert r.data_reuse >= 1
        s2_bytes = sum(r.s2_accesses.values()) * hw.element_bytes
        assert r.runtime_cycles >= max(-(-M * N * K // hw.pe_count), math.ceil(s2_bytes / hw.noc_bandwidth_bytes_per_cycle))
        assert 0 < r.pe_utilization <= 1


@given(workloads(hi=10), st.floats(0.5, 8.0), st.floats(1.0, 4.0))
def test_more_bandwidth_never_slower(w, bw, factor):
    hw = HardwareConfig(pe_count=8, s1_bytes=32, s2_bytes=512, noc_bandwidth_bytes_per_cycle=bw)
    faster = hw.replace(noc_bandwidth_bytes_per_cycle=bw * factor)
    for m in _style_sample(w, hw, limit=2):
        assert analyze(m, w, faster).runtime_cycles <= analyze(m, w, hw).runtime_cycles


@given(arbitrary_mappings(), workloads())
def test_transpose_symmetry_arbitrary(mp, w):
    m, pes = mp
    hw = roomy_hw(pes)
    a = analyze(m, w, hw, check=False)
    b = analyze(m.transposed(), w.transposed(), hw, check=False)
    assert a.runtime_cycles == b.runtime_cycles
    assert a.energy_units == b.energy_units
    assert (a.s2_accesses["A"], a.s2_accesses["B"]) == (b.s2_accesses["B"], b.s2_accesses["A"])


def test_transpose_symmetry_maeri_iv_v():
    hw = builtin_hardware("edge")
    iv, v = builtin_workload("IV"), builtin_workload("V")
    for lo in ALL_LOOP_ORDERS:
        m = mapping_from_style("maeri", lo, 16, TileSet(*[16 if d == lo[2] else 4 for d in "MNK"], 2, 2, 1))
        mt = m.transposed()
        assert mt.loop_order == mirror_loop_order(lo)
        assert analyze(m, iv, hw, check=False).runtime_cycles == analyze(mt, v, hw, check=False).runtime_cycles


def test_energy_formula():
    e = EnergyTable(mac=2.0, s1_access=3.0, s2_access=5.0, noc_hop=7.0)
    hw = builtin_hardware("edge").replace(energy=e)
    w = GemmWorkload(16, 16, 16)
    m = mapping_from_style("maeri", "mnk", 4, TileSet(4, 2, 4, 2, 2, 1))
    rep = analyze(m, w, hw)
    s2 = sum(rep.s2_accesses.values())
    expect = 2.0 * w.mac_count + 3.0 * 4 * w.mac_count + 5.0 * s2 + 7.0 * (s2 + rep.forwards)
    assert rep.energy_units == expect
    assert rep.energy_mj is None
    counts = count_accesses(build_schedule(m, w, hw))
    assert estimate_energy(counts, w.mac_count, e) == expect
    assert estimate_runtime(build_schedule(m, w, hw)) == rep.runtime_cycles


def test_absolute_energy_reported_in_mj():
    hw = builtin_hardware("edge").replace(energy=EnergyTable(unit="pJ"))
    m = mapping_from_style("maeri", "mnk", 4, TileSet(4, 2, 4, 2, 2, 1))
    rep = analyze(m, GemmWorkload(16, 16, 16), hw)
    assert rep.energy_mj == pytest.approx(rep.energy_units * 1e-9)


def test_double_buffer_accounting_doubles_s2():
    hw = builtin_hardware("edge")
    w = GemmWorkload(64, 32, 32)
    m = mapping_from_style("maeri", "mnk", 8, TileSet(8, 4, 8, 2, 2, 1))
    a = analyze(m, w, hw)
    b = analyze(m, w, hw, double_buffer_accounting=True)
    assert b.s2_accesses == {k: 2 * v for k, v in a.s2_accesses.items()}
    assert b.runtime_cycles == a.runtime_cycles


def test_invalid_mapping_raises():
    hw = HardwareConfig(pe_count=4, s1_bytes=8, s2_bytes=64, noc_bandwidth_bytes_per_cycle=1.0)
    m = mapping_from_style("maeri", "mnk", 4, TileSet(8, 8, 4, 8, 8, 1))
    with pytest.raises(InvalidMapping) as exc:
        analyze(m, GemmWorkload(8, 8, 8), hw)
    assert "s2" in exc.value.report.codes()


def test_full_drain_not_cheaper():
    hw = builtin_hardware("edge")
    w = GemmWorkload(64, 64, 64)
    m = mapping_from_style("maeri", "mnk", 16, TileSet(4, 4, 16, 2, 2, 1))
    assert analyze(m, w, hw, full_drain=True).runtime_cycles >= analyze(m, w, hw).runtime_cycles


def test_batch_equals_single_rows():
    hw = builtin_hardware("edge")
    w = GemmWorkload(48, 40, 24)
    ms = [m for m, _ in zip((m for m, _ in enumerate_candidates("nvdla", w, hw)), range(50))]
    prm = np.stack([build_schedule(m, w, hw).params for m in ms])
    batch = kernels.evaluate(prm, hw.noc_bandwidth_bytes_per_cycle)
    for i, m in enumerate(ms):
        assert analyze(m, w, hw).runtime_cycles == batch[i, 3]


def test_python_fallback_agrees_with_compiled():
    code = (
        "import numpy as np, json;"
        "from flashx import kernels, _jit;"
        "from flashx.hardware import builtin_hardware;"
        "from flashx.search import iter_blocks, block_params;"
        "from flashx.workload import GemmWorkload;"
        "hw=builtin_hardware('edge'); w=GemmWorkload(40,24,56);"
        "p=np.concatenate([block_params(b,w,hw) for b in iter_blocks('maeri',w,hw,'pow2')])[:300];"
        "print(_jit.backend_name(), int(kernels.evaluate(p,32.0).sum()))"
    )
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, FLASHX_DISABLE_JIT=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs.append(res.stdout.split())
    assert [o[0] for o in outs] == ["numba", "python"]
    assert outs[0][1] == outs[1][1]
