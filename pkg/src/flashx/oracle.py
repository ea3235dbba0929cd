"""Brute-force reference walk of a mapping.

Visits every outer step, every inner step and every PE, keeps the set of
elements each PE held on the previous step, and counts S2 traffic from the
union of what has to be delivered. Nothing here shares code with the closed
forms in ``kernels``; the two are compared in the test suite.
"""

import math
from dataclasses import dataclass, field
from itertools import product


from .mapping import DIM_INDEX

ORACLE_MAX_MACS = 1_000_000

# operand -> the two workload dims indexing it
_DIM_PAIRS = ((0, 2), (2, 1), (0, 1))


class WorkloadTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    s1: dict
    s2: dict
    c_reads: int
    forwards: int
    compute: list = field(repr=False)
    comm: list = field(repr=False)
    runtime_cycles: int = 0


def _clip(lo, hi, end):
    hi = min(hi, end)
    return (lo, hi) if hi > lo else (lo, lo)


def pipeline_cycles(compute, comm):
    """Double-buffered schedule: fetch of step i+1 overlaps compute of step i."""
    if not compute:
        return 0
    total = comm[0]
    for i in range(1, len(compute)):
        total += max(compute[i - 1], comm[i])
    return total + compute[-1]


def oracle_counts(m, w, hw, full_drain=False):
    D = w.dims
    if w.mac_count > ORACLE_MAX_MACS:
        raise WorkloadTooLarge(f"{w} has {w.mac_count} MACs; the oracle walks at most {ORACLE_MAX_MACS}")
    lam = m.cluster_size
    nc = hw.pe_count // lam
    if nc < 1:
        raise ValueError("cluster size exceeds the PE count")

    s = DIM_INDEX[m.outer_spatial]
    q = DIM_INDEX[m.inner_spatial] if m.inner_spatial is not None else -1
    out_dims = [DIM_INDEX[d.dim] for d in m.outer]
    in_dims = [DIM_INDEX[d.dim] for d in m.inner]
    csize = {DIM_INDEX[d.dim]: d.size for d in m.outer}
    psize = {DIM_INDEX[d.dim]: d.size for d in m.inner}

    ostep = {d: csize[d] * (nc if d == s else 1) for d in range(3)}
    ocount = {d: -(-D[d] // ostep[d]) for d in range(3)}

    # without an inner spatial dim only the first PE of each cluster has work
    lanes = lam if q >= 0 else 1
    npe = nc * lanes
    held = [[None] * npe for _ in _DIM_PAIRS]
    # row stride used to turn an (row, col) element into one int id
    width = [D[b] for _, b in _DIM_PAIRS]
    visited_c = set()
    coverage = [0] * (D[0] * D[1] * D[2])

    s2 = {"A": 0, "B": 0, "C": 0}
    c_reads = 0
    forwards = 0
    compute, comm = [], []

    for oidx in product(*(range(ocount[d]) for d in out_dims)):
        ostart = {d: i * ostep[d] for d, i in zip(out_dims, oidx)}
        oend = {d: min(ostart[d] + ostep[d], D[d]) for d in range(3)}

        # per-cluster range of each dim
        crange = {}
        for j in range(nc):
            rng = {}
            for d in range(3):
                if d == s:
                    rng[d] = _clip(ostart[d] + j * csize[d], ostart[d] + (j + 1) * csize[d], oend[d])
                else:
                    rng[d] = (ostart[d], oend[d])
            crange[j] = rng

        def inner_count(d):
            step = psize[d] * (lam if d == q else 1)
            return max(-(-(crange[j][d][1] - crange[j][d][0]) // step) for j in range(nc))

        icount = {d: inner_count(d) for d in range(3)}
        pe_macs = [0] * npe
        fetched_bytes = 0
        drain_full = 0
        drain_first = None

        for iidx in product(*(range(icount[d]) for d in in_dims)):
            ipos = dict(zip(in_dims, iidx))
            # each dim's per-PE range depends on the cluster (outer spatial
            # dim), on the lane (inner spatial dim) or on neither
            span = []
            for d in range(3):
                p = psize[d]
                stride = p * (lam if d == q else 1)
                col = []
                for j in range(nc):
                    lo, hi = crange[j][d]
                    a0 = lo + ipos[d] * stride
                    for r in range(lanes):
                        a = a0 + r * p if d == q else a0
                        b = a + p if a + p < hi else hi
                        col.append((a, b) if b > a else (a, a))
                span.append(col)
            deliver = ([], [], [])
            for i in range(npe):
                box = (span[0][i], span[1][i], span[2][i])
                (m0, m1), (n0, n1), (k0, k1) = box
                vol = (m1 - m0) * (n1 - n0) * (k1 - k0)
                if vol:
                    for u in range(m0, m1):
                        for v in range(n0, n1):
                            base = (u * D[1] + v) * D[2]
                            for kk in range(base + k0, base + k1):
                                coverage[kk] += 1
                    pe_macs[i] += vol
                for x, (da, db) in enumerate(_DIM_PAIRS):
                    ra, rb = box[da], box[db]
                    h = held[x]
                    if ra[1] > ra[0] and rb[1] > rb[0]:
                        if h[i] != (ra, rb):
                            deliver[x].append((ra, rb))
                            h[i] = (ra, rb)
                    else:
                        h[i] = None
            # union of delivered boxes, element by element
            deliver = [
                {u * width[x] + v for (ra, rb) in boxes for u in range(*ra) for v in range(*rb)}
                for x, boxes in enumerate(deliver)
            ]
            if q == 2:
                lanes_k = 0
                for j in range(nc):
                    active = 0
                    out_elems = 0
                    for r in range(lam):
                        (m0, m1), (n0, n1), (k0, k1) = span[0][j * lam + r], span[1][j * lam + r], span[2][j * lam + r]
                        if k1 > k0:
                            active += 1
                            out_elems = (m1 - m0) * (n1 - n0)
                    # every lane past the first forwards its partial sums
                    if active:
                        forwards += out_elems * (active - 1)
                    if j == 0:
                        lanes_k = active
                drain_full += max(lanes_k - 1, 0)
                if drain_first is None:
                    drain_first = max(lanes_k - 1, 0)
            na = len(deliver[0])
            nb = len(deliver[1])
            s2["A"] += na
            s2["B"] += nb
            reads = len(deliver[2] & visited_c)
            writes = len(deliver[2])
            visited_c |= deliver[2]
            c_reads += reads
            s2["C"] += reads + writes
            fetched_bytes += hw.element_bytes * (na + nb + reads + writes)

        cyc = max(pe_macs)
        if q == 2:
            cyc += drain_full if full_drain else (drain_first or 0)
        compute.append(cyc)
        comm.append(math.ceil(fetched_bytes / hw.noc_bandwidth_bytes_per_cycle))

    bad = sum(1 for c in coverage if c != 1)
    if bad:
        raise AssertionError(f"schedule covers {bad} MACs zero or several times")

    mnk = w.mac_count
    return OracleResult(
        s1={"A": mnk, "B": mnk, "C": 2 * mnk},
        s2=s2,
        c_reads=c_reads,
        forwards=forwards,
        compute=compute,
        comm=comm,
        runtime_cycles=pipeline_cycles(compute, comm),
    )
