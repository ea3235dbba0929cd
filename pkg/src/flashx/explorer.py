"""Enumerate, cost and rank mapping candidates."""

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cost import report_from_row
from .mapping import (
    DIMS, TileSet, format_loop_order, get_style, mapping_from_style, parse_loop_order,
    render_mapping,
)
from .search import PruneStats, block_params, iter_blocks, unpruned_count, valid_mask, CandidateBlock


class NoFeasibleMapping(RuntimeError):
    pass


def worker_count():
    env = os.environ.get("FLASHX_THREADS", "").strip()
    n = os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            pass
    return n


@dataclass
class ExploreOptions:
    stride: str = "all"
    loop_orders: tuple | None = None  # None: every order the style allows
    top_k: int = 32
    bins: int = 100
    full_drain: bool = False
    double_buffer_accounting: bool = False
    threads: int | None = None

    def to_dict(self):
        return {
            "stride": self.stride,
            "loop_orders": list(self.loop_orders) if self.loop_orders else None,
            "top_k": self.top_k,
            "bins": self.bins,
            "full_drain": self.full_drain,
            "double_buffer_accounting": self.double_buffer_accounting,
        }


@dataclass(frozen=True)
class Histogram:
    counts: list
    lo: float
    hi: float
    width: float

    @property
    def total(self):
        return sum(self.counts)

    def edges(self):
        return [self.lo + i * self.width for i in range(len(self.counts) + 1)]

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "width": self.width, "counts": list(self.counts)}


def histogram(values, bins=100):
    """Uniform-width bins over [min, max]; the maximum lands in the last bin.

    Accepts runtimes directly or objects with a ``runtime_cycles`` attribute.
    """
    vals = [getattr(v, "runtime_cycles", v) for v in values]
    arr = np.asarray(vals, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("histogram needs at least one value")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = float(arr.min()), float(arr.max())
    counts = np.zeros(bins, dtype=np.int64)
    if hi == lo:
        counts[0] = arr.size
        return Histogram(counts.tolist(), lo, hi, 0.0)
    idx = np.floor((arr - lo) * bins / (hi - lo)).astype(np.int64)
    np.add.at(counts, np.clip(idx, 0, bins - 1), 1)
    return Histogram(counts.tolist(), lo, hi, (hi - lo) / bins)


@dataclass(frozen=True)
class Candidate:
    mapping: object
    tiles: TileSet
    report: object
    loop_order: str
    cluster_size: int
    index: int

    def to_dict(self):
        return {
            "loop_order": format_loop_order(self.loop_order),
            "cluster_size": self.cluster_size,
            "tiles": dict(zip(TileSet.__dataclass_fields__, self.tiles.as_tuple())),
            "mapping": render_mapping(self.mapping).strip().splitlines(),
            "report": self.report.to_dict(),
        }


@dataclass
class ExplorationResult:
    style: str
    workload: object
    hw: object
    options: ExploreOptions
    best: Candidate
    ranked: list
    histogram: Histogram
    stats: PruneStats
    spread: float
    candidate_count: int
    best_per_loop_order: dict = field(default_factory=dict)
    analysis_seconds: float = 0.0

    def to_dict(self, timing=False):
        d = {
            "style": self.style,
            "workload": self.workload.to_dict(),
            "hardware": self.hw.to_dict(),
            "options": self.options.to_dict(),
            "candidate_count": self.candidate_count,
            "spread": self.spread,
            "best": self.best.to_dict(),
            "best_per_loop_order": {format_loop_order(k): v.to_dict() for k, v in self.best_per_loop_order.items()},
            "ranked": [c.to_dict() for c in self.ranked],
            "histogram": self.histogram.to_dict(),
            "prune_stats": self.stats.to_dict(timing=timing),
        }
        if timing:
            d["analysis_seconds"] = self.analysis_seconds
        return d


def _energy(out, w, energy):
    mnk = w.mac_count
    s2 = out[:, 0] + out[:, 1] + out[:, 2]
    return (
        energy.mac * mnk
        + energy.s1_access * 4 * mnk
        + energy.s2_access * s2.astype(np.float64)
        + energy.noc_hop * (s2 + out[:, 4]).astype(np.float64)
    )


def _pow2_count(tiles):
    return np.sum((tiles & (tiles - 1)) == 0, axis=1)


def _rank_order(runtime, energy, pow2, index):
    # lexsort: last key is primary
    return np.lexsort((index, -pow2, energy, runtime))


@dataclass
class _BlockResult:
    block: CandidateBlock
    out: np.ndarray
    runtime: np.ndarray
    energy: np.ndarray
    keep: np.ndarray  # row ids of the block's local top-k, in rank order


def _cost_blocks(blocks, w, hw, opts):
    k = max(1, opts.top_k)

    def run(block):
        prm = block_params(block, w, hw, opts.full_drain)
        out = kernels.evaluate(prm, hw.noc_bandwidth_bytes_per_cycle)
        rt = out[:, 3]
        en = _energy(out, w, hw.energy)
        order = _rank_order(rt, en, _pow2_count(block.tiles), np.arange(len(block)))
        return _BlockResult(block, out, rt, en, order[:k])

    threads = opts.threads or worker_count()
    if threads <= 1 or len(blocks) <= 1:
        return [run(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(run, blocks))


def _candidate(br, row, index, w, hw, opts):
    ts = TileSet(*(int(v) for v in br.block.tiles[row]))
    m = mapping_from_style(br.block.style, br.block.loop_order, br.block.cluster_size, ts, br.block.pe_count)
    rep = report_from_row(br.out[row], w, hw, opts.double_buffer_accounting)
    return Candidate(m, ts, rep, br.block.loop_order, br.block.cluster_size, index)


def _select(results, w, hw, opts, limit):
    """Global top-``limit`` over block results, deterministic."""
    rows = []
    offset = 0
    for bi, br in enumerate(results):
        for r in br.keep:
            rows.append((br.runtime[r], br.energy[r], -int(_pow2_count(br.block.tiles[r:r + 1])[0]), offset + int(r), bi, int(r)))
        offset += len(br.block)
    rows.sort(key=lambda x: x[:4])
    return [_candidate(results[bi], r, idx, w, hw, opts) for *_, idx, bi, r in rows[:limit]]


def explore(style, w, hw, options=None, **kw):
    """Cost every pruned candidate and rank by runtime (energy breaks ties)."""
    opts = options or ExploreOptions(**kw)
    st = get_style(style)
    t0 = time.perf_counter()
    blocks = list(iter_blocks(st, w, hw, opts.stride, opts.loop_orders))
    gen_s = time.perf_counter() - t0
    per_order = {}
    for b in blocks:
        per_order[b.loop_order] = per_order.get(b.loop_order, 0) + len(b)
    total = sum(per_order.values())
    stats = PruneStats(unpruned_count(st, w, hw, opts.loop_orders), total, gen_s, opts.stride, per_order)
    if not total:
        raise NoFeasibleMapping(f"no {st.name}-style mapping of {w} fits {hw.name}")

    t1 = time.perf_counter()
    results = _cost_blocks(blocks, w, hw, opts)
    ranked = _select(results, w, hw, opts, max(1, opts.top_k))
    per_lo = {}
    for lo in per_order:
        sub = [r for r in results if r.block.loop_order == lo]
        per_lo[lo] = _select_with_offsets(results, sub, w, hw, opts)
    runtimes = np.concatenate([r.runtime for r in results])
    hist = histogram(runtimes, opts.bins)
    spread = float(runtimes.max() / runtimes.min())
    return ExplorationResult(
        style=st.tag, workload=w, hw=hw, options=opts, best=ranked[0], ranked=ranked,
        histogram=hist, stats=stats, spread=spread, candidate_count=total,
        best_per_loop_order=per_lo, analysis_seconds=time.perf_counter() - t1,
    )


def _select_with_offsets(all_results, subset, w, hw, opts):
    # keep global enumeration indices when ranking a subset of blocks
    offsets = {}
    off = 0
    for br in all_results:
        offsets[id(br)] = off
        off += len(br.block)
    best = None
    for br in subset:
        r = int(br.keep[0])
        key = (br.runtime[r], br.energy[r], -int(_pow2_count(br.block.tiles[r:r + 1])[0]), offsets[id(br)] + r)
        if best is None or key < best[0]:
            best = (key, br, r)
    _, br, r = best
    return _candidate(br, r, best[0][3], w, hw, opts)


@dataclass(frozen=True)
class SampleResult:
    best: Candidate | None
    sampled: int
    valid: int

    @property
    def found(self):
        return self.best is not None


def random_sample_baseline(style, w, hw, n=1000, seed=0, loop_orders=None, full_drain=False):
    """Best of ``n`` tile sets drawn uniformly from the unpruned space.

    Loop order, cluster size and all six tiles are drawn independently; draws
    that fail validation are discarded. ``best`` is None when none survive.
    """
    if n < 1:
        raise ValueError("sample size must be >= 1")
    st = get_style(style)
    rng = np.random.default_rng(seed)
    orders = st.legal_loop_orders if loop_orders is None else tuple(
        o for o in (parse_loop_order(x) for x in loop_orders) if o in st.legal_loop_orders
    )
    lo_idx = rng.integers(0, len(orders), size=n)
    tiles = np.stack([rng.integers(1, d + 1, size=n) for d in w.dims * 2], axis=1).astype(np.int64)
    if st.cluster_rule == "tied":
        lam = np.zeros(n, dtype=np.int64)
        for i in range(n):
            lam[i] = tiles[i, "MNK".index(orders[lo_idx[i]][2])]
    else:
        sizes = np.array(st.cluster_sizes(hw.pe_count), dtype=np.int64)
        lam = sizes[rng.integers(0, len(sizes), size=n)]

    opts = ExploreOptions(top_k=1, full_drain=full_drain)
    groups = {}
    for i in range(n):
        groups.setdefault((int(lo_idx[i]), int(lam[i])), []).append(i)
    blocks = []
    valid = 0
    for (li, lm), ids in sorted(groups.items()):
        if lm > hw.pe_count:
            continue
        t = tiles[ids]
        t = t[valid_mask(st, orders[li], lm, t, w, hw)]
        valid += len(t)
        if len(t):
            blocks.append(CandidateBlock(st.tag, orders[li], lm, t, hw.pe_count))
    if not blocks:
        return SampleResult(None, n, 0)
    results = _cost_blocks(blocks, w, hw, opts)
    best = _select(results, w, hw, opts, 1)[0]
    return SampleResult(best, n, valid)


@dataclass(frozen=True)
class ComparisonRow:
    style: str
    workload: str
    hw: str
    policy: str
    best: Candidate | None

    def to_dict(self):
        d = {"style": self.style, "workload": self.workload, "hw": self.hw, "policy": self.policy}
        if self.best is None:
            d["feasible"] = False
            return d
        d["feasible"] = True
        d["loop_order"] = format_loop_order(self.best.loop_order)
        d["cluster_size"] = self.best.cluster_size
        d.update(zip(TileSet.__dataclass_fields__, self.best.tiles.as_tuple()))
        d.update(self.best.report.to_dict())
        return d


def compare(styles, workloads, hws, loop_order_policy="fixed", stride="all", top_k=1):
    """Best mapping per (style, workload, hw) under a loop-order policy.

    ``workloads`` and ``hws`` are lists of (label, object) pairs.
    """
    if loop_order_policy not in ("fixed", "flexible"):
        raise ValueError("loop_order_policy must be 'fixed' or 'flexible'")
    rows = []
    for hw_label, hw in hws:
        for wl_label, w in workloads:
            for s in styles:
                st = get_style(s)
                orders = (st.canonical_order,) if loop_order_policy == "fixed" else None
                try:
                    res = explore(st, w, hw, ExploreOptions(stride=stride, loop_orders=orders, top_k=top_k))
                    best = res.best
                except NoFeasibleMapping:
                    best = None
                rows.append(ComparisonRow(st.tag, wl_label, hw_label, loop_order_policy, best))
    return rows


__all__ = [
    "ExploreOptions", "ExplorationResult", "Candidate", "Histogram", "NoFeasibleMapping",
    "SampleResult", "ComparisonRow", "explore", "histogram", "random_sample_baseline", "compare",
    "worker_count",
]
