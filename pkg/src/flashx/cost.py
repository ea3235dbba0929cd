"""Analytical runtime, buffer-access and energy model for one mapping."""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .mapping import DIM_INDEX, DIMS, validate_mapping


class InvalidMapping(ValueError):
    def __init__(self, report):
        super().__init__(f"invalid mapping: {report}")
        self.report = report


def mapping_params(m, w, hw, full_drain=False):
    """Pack a mapping into the kernel's int64 parameter row."""
    prm = np.zeros(kernels.NPARAM, dtype=np.int64)
    prm[0:3] = w.dims
    for i, d in enumerate(m.outer):
        prm[3 + i] = DIM_INDEX[d.dim]
        prm[6 + DIM_INDEX[d.dim]] = d.size
    prm[9] = DIM_INDEX[m.outer_spatial]
    prm[10] = m.cluster_size
    prm[11] = hw.pe_count // m.cluster_size
    for i, d in enumerate(m.inner):
        prm[12 + i] = DIM_INDEX[d.dim]
        prm[15 + DIM_INDEX[d.dim]] = d.size
    prm[18] = DIM_INDEX[m.inner_spatial] if m.inner_spatial is not None else -1
    prm[19] = hw.element_bytes
    prm[20] = 1 if full_drain else 0
    return prm


@dataclass(frozen=True)
class TileSchedule:
    """Static shape of the walk a mapping induces on a workload.

    ``outer_counts`` and ``outer_steps`` are the per-dim and total numbers of
    outer iterations; ``remainders`` gives the size of the last outer range per
    dim (equal to the full step when it divides the dimension).
    """

    mapping: object
    workload: object
    hw: object
    num_clusters: int
    outer_step: dict
    outer_counts: dict
    remainders: dict
    inner_counts: dict
    params: np.ndarray = field(repr=False, compare=False)

    @property
    def outer_steps(self):
        n = 1
        for v in self.outer_counts.values():
            n *= v
        return n


def build_schedule(m, w, hw, full_drain=False):
    nc = hw.pe_count // m.cluster_size
    dims = dict(zip(DIMS, w.dims))
    step, counts, rem, inner = {}, {}, {}, {}
    for d in DIMS:
        size = m.outer_size(d)
        step[d] = size * nc if d == m.outer_spatial else size
        counts[d] = -(-dims[d] // step[d])
        rem[d] = dims[d] - (counts[d] - 1) * step[d]
        p = m.inner_size(d)
        if d == m.inner_spatial:
            p *= m.cluster_size
        first = min(size, dims[d]) if d == m.outer_spatial else min(step[d], dims[d])
        inner[d] = -(-first // p)
    return TileSchedule(m, w, hw, nc, step, counts, rem, inner, mapping_params(m, w, hw, full_drain))


@dataclass(frozen=True)
class AccessCounts:
    s1: dict
    s2: dict
    forwards: int
    c_reads: int


def _run(schedule):
    return kernels.evaluate(schedule.params, schedule.hw.noc_bandwidth_bytes_per_cycle)[0]


def counts_from_row(row, mac_count):
    return AccessCounts(
        s1={"A": mac_count, "B": mac_count, "C": 2 * mac_count},
        s2={"A": int(row[0]), "B": int(row[1]), "C": int(row[2])},
        forwards=int(row[4]),
        c_reads=int(row[8]),
    )


def count_accesses(schedule):
    return counts_from_row(_run(schedule), schedule.workload.mac_count)


def estimate_runtime(schedule):
    return int(_run(schedule)[3])


def pipeline_cycles(compute, comm):
    """Runtime of a double-buffered step sequence given per-step cycles."""
    if len(compute) != len(comm):
        raise ValueError("compute and comm lengths differ")
    if not len(compute):
        return 0
    total = comm[0]
    for i in range(1, len(compute)):
        total += max(compute[i - 1], comm[i])
    return total + compute[-1]


def estimate_energy(counts, mac_count, energy):
    s1 = sum(counts.s1.values())
    s2 = sum(counts.s2.values())
    return (
        energy.mac * mac_count
        + energy.s1_access * s1
        + energy.s2_access * s2
        + energy.noc_hop * (s2 + counts.forwards)
    )


REPORT_COLUMNS = (
    "runtime_cycles", "runtime_ms", "mac_count",
    "s1_a", "s1_b", "s1_c", "s2_a", "s2_b", "s2_c",
    "forwards", "energy_units", "energy_mj",
    "throughput_flops", "pe_utilization", "data_reuse",
)


@dataclass(frozen=True)
class CostReport:
    runtime_cycles: int
    runtime_ms: float
    s1_accesses: dict
    s2_accesses: dict
    mac_count: int
    energy_units: float
    throughput_flops: float
    pe_utilization: float
    data_reuse: float
    forwards: int = 0
    outer_steps: int = 0
    compute_cycles: int = 0
    comm_cycles: int = 0
    energy_mj: float | None = None

    def to_dict(self):
        """Flat record, keys in ``REPORT_COLUMNS`` order followed by extras."""
        d = {
            "runtime_cycles": self.runtime_cycles,
            "runtime_ms": self.runtime_ms,
            "mac_count": self.mac_count,
            "s1_a": self.s1_accesses["A"],
            "s1_b": self.s1_accesses["B"],
            "s1_c": self.s1_accesses["C"],
            "s2_a": self.s2_accesses["A"],
            "s2_b": self.s2_accesses["B"],
            "s2_c": self.s2_accesses["C"],
            "forwards": self.forwards,
            "energy_units": self.energy_units,
            "energy_mj": self.energy_mj,
            "throughput_flops": self.throughput_flops,
            "pe_utilization": self.pe_utilization,
            "data_reuse": self.data_reuse,
        }
        d.update(outer_steps=self.outer_steps, compute_cycles=self.compute_cycles, comm_cycles=self.comm_cycles)
        return d


def report_from_row(row, w, hw, double_buffer_accounting=False):
    mnk = w.mac_count
    counts = counts_from_row(row, mnk)
    if double_buffer_accounting:
        counts = AccessCounts(counts.s1, {k: 2 * v for k, v in counts.s2.items()}, counts.forwards, counts.c_reads)
    cycles = int(row[3])
    energy = estimate_energy(counts, mnk, hw.energy)
    s2_total = sum(counts.s2.values())
    return CostReport(
        runtime_cycles=cycles,
        runtime_ms=cycles / hw.clock_hz * 1e3,
        s1_accesses=counts.s1,
        s2_accesses=counts.s2,
        mac_count=mnk,
        energy_units=energy,
        throughput_flops=mnk / (cycles / hw.clock_hz),
        pe_utilization=mnk / (cycles * hw.pe_count),
        data_reuse=sum(counts.s1.values()) / s2_total if s2_total else float("inf"),
        forwards=counts.forwards,
        outer_steps=int(row[7]),
        compute_cycles=int(row[5]),
        comm_cycles=int(row[6]),
        energy_mj=energy * 1e-9 if hw.energy.unit == "pJ" else None,
    )


def analyze(m, w, hw, full_drain=False, double_buffer_accounting=False, check=True):
    if check:
        rep = validate_mapping(m, w, hw)
        if not rep.ok:
            raise InvalidMapping(rep)
    sched = build_schedule(m, w, hw, full_drain)
    return report_from_row(_run(sched), w, hw, double_buffer_accounting)
