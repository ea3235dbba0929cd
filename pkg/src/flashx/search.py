"""Closed-form tile bounds and pruned candidate enumeration.

Candidates are produced in blocks, one per (loop order, cluster size, spatial
tile). A block holds an (n, 6) array of tile sets already filtered by the
buffer constraints and sorted largest-first, so the cost kernel can consume it
without touching Python objects.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .kernels import NPARAM
from .mapping import (
    DIM_INDEX, DIMS, TileSet, get_style, mapping_from_style, parse_loop_order,
)

STRIDES = ("all", "pow2")


class InfeasibleSpatialTile(ValueError):
    pass


def outer_bound(extent, lam, beta_elems):
    """Largest t >= 0 with lam*t^2 + extent*(lam+1)*t <= beta/2.

    ``extent`` is the aggregate spatial extent held in S2 per outer step. For
    the tied-cluster style pass lam=1, which gives sqrt(beta/2 + S^2) - S.
    """
    half = beta_elems // 2
    b = extent * (lam + 1)
    disc = b * b + 4 * lam * half
    t = (math.isqrt(disc) - b) // (2 * lam)
    t = max(t, 0)
    while lam * (t + 1) ** 2 + b * (t + 1) <= half:
        t += 1
    while t > 0 and lam * t * t + b * t > half:
        t -= 1
    return t


def inner_bound(x, alpha_elems):
    """Largest t >= 0 with t^2 + 2*x*t <= alpha/2 (two free tiles around a tied one of size x)."""
    return max(math.isqrt(alpha_elems // 2 + x * x) - x, 0)


def stride_values(hi, stride="all"):
    """Values a tile range [1, hi] contributes under a stride mode, ascending."""
    if hi < 1:
        return np.ones(1, dtype=np.int64)
    if stride == "all":
        return np.arange(1, hi + 1, dtype=np.int64)
    if stride == "pow2":
        vals = [1 << k for k in range(hi.bit_length()) if (1 << k) <= hi]
        if vals[-1] != hi:
            vals.append(hi)
        return np.array(vals, dtype=np.int64)
    raise ValueError(f"unknown stride {stride!r}; expected one of {STRIDES}")


def power_of_two_preference(values):
    """Powers of two first (largest first), then the rest, largest first."""
    vals = sorted(set(int(v) for v in values), reverse=True)
    return [v for v in vals if v & (v - 1) == 0] + [v for v in vals if v & (v - 1)]


def is_pow2(v):
    return v >= 1 and v & (v - 1) == 0


@dataclass(frozen=True)
class Bound:
    lo: int
    hi: int
    fixed: bool = False

    @classmethod
    def fixed_at(cls, v):
        return cls(v, v, True)

    @classmethod
    def upto(cls, hi):
        # an empty range collapses to the single value 1
        return cls(1, 1, True) if hi < 1 else cls(1, hi, False)

    def __str__(self):
        return f"{self.lo}" if self.fixed else f"[{self.lo}, {self.hi}]"


@dataclass(frozen=True)
class TileBounds:
    bounds: dict  # "M" / "N" / "K" -> Bound

    def __getitem__(self, dim):
        return self.bounds[dim]

    def to_dict(self):
        return {d: {"lo": b.lo, "hi": b.hi, "fixed": b.fixed} for d, b in self.bounds.items()}


def _clusters(lam, pe_count):
    nc = pe_count // lam
    if nc < 1:
        raise InfeasibleSpatialTile(f"cluster size {lam} exceeds {pe_count} PEs")
    return nc


def _roles(style, lo):
    """(outer spatial dim, free outer dims, tied inner dim, inner spatial dim)."""
    st = get_style(style)
    if st.tag == "maeri":
        return lo[1], (lo[0], lo[2]), lo[2], lo[2]
    s = st.outer_spatial
    free = tuple(d for d in DIMS if d != s)
    tied = "N" if st.tag == "shidiannao" else "K"
    return s, free, tied, st.inner_spatial


def spatial_tile(dim_size, nc):
    """Per-cluster share of the spatial dimension, rounded up."""
    return -(-dim_size // nc)


def outer_tile_bounds(style, loop_order, lam, beta_elems, pe_count, w, spatial=None):
    """Outer tile bounds; for the tied-cluster style ``lam`` is the cluster tile."""
    st = get_style(style)
    lo = parse_loop_order(loop_order)
    dims = dict(zip(DIMS, w.dims))
    nc = _clusters(lam, pe_count)
    s, free, _, _ = _roles(st, lo)
    ts = spatial if spatial is not None else spatial_tile(dims[s], nc)
    if ts < 1 or ts > dims[s]:
        raise InfeasibleSpatialTile(f"spatial tile {ts} outside [1, {dims[s]}]")
    extent = min(dims[s], ts * nc)
    lam_eff = 1 if st.tag == "maeri" else lam
    t = outer_bound(extent, lam_eff, beta_elems)
    b = {s: Bound.fixed_at(ts)}
    for d in free:
        b[d] = Bound.upto(min(t, dims[d]))
    if st.tag == "maeri":
        b[lo[2]] = Bound.fixed_at(lam)
    return TileBounds(b)


def inner_tile_bounds(style, outer, lam, alpha_elems, w, loop_order=None):
    """Inner bounds given resolved outer tiles (a {dim: size} mapping)."""
    st = get_style(style)
    lo = parse_loop_order(loop_order or st.canonical_order)
    dims = dict(zip(DIMS, w.dims))
    _, _, tied, _ = _roles(st, lo)
    b = {}
    if st.tag == "maeri":
        t = inner_bound(1, alpha_elems)
        b[tied] = Bound.fixed_at(1)
    else:
        x = min(outer[tied], dims[tied])
        t = inner_bound(x, alpha_elems)
        b[tied] = Bound.fixed_at(outer[tied])
    for d in DIMS:
        if d != tied:
            b[d] = Bound.upto(min(t, outer[d]))
    return TileBounds(b)


@dataclass
class CandidateBlock:
    style: str
    loop_order: str
    cluster_size: int
    tiles: np.ndarray  # (n, 6) int64, columns in TileSet field order
    pe_count: int | None = None

    def __len__(self):
        return self.tiles.shape[0]

    def mappings(self):
        for row in self.tiles:
            ts = TileSet(*(int(v) for v in row))
            yield mapping_from_style(self.style, self.loop_order, self.cluster_size, ts, self.pe_count), ts


def template_arrays(style, lo, lam, tiles):
    """Outer and inner directive sizes by dim for a block of tile sets.

    Returns (c, p, s, q, outer order, inner order) with c and p of shape (n, 3).
    """
    st = get_style(style)
    to = tiles[:, 0:3]
    ti = tiles[:, 3:6]
    c = to.copy()
    p = ti.copy()
    M, N, K = 0, 1, 2
    if st.tag in ("eyeriss", "nvdla", "tpu"):
        c[:, K] = to[:, K] * lam
        p[:, K] = to[:, K]
        oo = {"eyeriss": "MNK", "nvdla": "NKM", "tpu": "NMK"}[st.tag]
        io = {"eyeriss": "MNK", "nvdla": "NMK", "tpu": "NMK"}[st.tag]
        s, q = DIM_INDEX[st.outer_spatial], K
    elif st.tag == "shidiannao":
        c[:, N] = to[:, N] * lam
        p[:, N] = to[:, N]
        oo = io = "MNK"
        s, q = M, N
    else:
        oo = io = lo
        s, q = DIM_INDEX[lo[1]], DIM_INDEX[lo[2]]
        p[:, q] = 1
    return c, p, s, q, [DIM_INDEX[d] for d in oo], [DIM_INDEX[d] for d in io]


def footprints(c, p, s, nc, dims):
    """S2 and S1 element footprints of directive-size arrays (see mapping.s2_footprint)."""
    D = np.asarray(dims, dtype=np.int64)
    agg = c.copy()
    agg[:, s] *= nc
    e2 = np.minimum(agg, D)
    e1 = np.minimum(p, D)
    pairs = ((0, 2), (2, 1), (0, 1))
    s2 = sum(e2[:, a] * e2[:, b] for a, b in pairs)
    s1 = sum(e1[:, a] * e1[:, b] for a, b in pairs)
    return s2, s1


def block_params(block, w, hw, full_drain=False):
    n = len(block)
    c, p, s, q, oo, io = template_arrays(block.style, block.loop_order, block.cluster_size, block.tiles)
    prm = np.zeros((n, NPARAM), dtype=np.int64)
    prm[:, 0:3] = w.dims
    prm[:, 3:6] = oo
    prm[:, 6:9] = c
    prm[:, 9] = s
    prm[:, 10] = block.cluster_size
    prm[:, 11] = hw.pe_count // block.cluster_size
    prm[:, 12:15] = io
    prm[:, 15:18] = p
    prm[:, 18] = q
    prm[:, 19] = hw.element_bytes
    prm[:, 20] = 1 if full_drain else 0
    return prm


def valid_mask(style, lo, lam, tiles, w, hw):
    """Buffer, inner<=outer and cluster checks for a block, vectorised."""
    nc = hw.pe_count // lam
    if nc < 1 or not len(tiles):
        return np.zeros(len(tiles), dtype=bool)
    c, p, s, _, _, _ = template_arrays(style, lo, lam, tiles)
    s2, s1 = footprints(c, p, s, nc, w.dims)
    ok = (2 * s2 <= hw.beta_elems) & (2 * s1 <= hw.alpha_elems)
    ok &= np.all(p <= c, axis=1)
    return ok


def _grid(*cols):
    mesh = np.meshgrid(*cols, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1) if cols else np.zeros((1, 0), np.int64)


def _expand_inner(outer_rows, r1, r2, stride):
    """For each outer row, append every (i1, i2) with i1 in vals(r1[row]), i2 in vals(r2[row])."""
    out = []
    keys = np.stack([r1, r2], axis=1)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    for g, (a, b) in enumerate(uniq):
        rows = outer_rows[inv == g]
        inner = _grid(stride_values(int(a), stride), stride_values(int(b), stride))
        rep = np.repeat(rows, len(inner), axis=0)
        til = np.tile(inner, (len(rows), 1))
        out.append(np.concatenate([rep, til], axis=1))
    if not out:
        return np.zeros((0, outer_rows.shape[1] + 2), np.int64)
    return np.concatenate(out, axis=0)


def _sort_desc(tiles):
    if not len(tiles):
        return tiles
    order = np.lexsort(tuple(-tiles[:, i] for i in range(tiles.shape[1] - 1, -1, -1)))
    return tiles[order]


def cluster_choices(style, lo, w, hw):
    """Cluster sizes to enumerate, ascending. For the tied style, the cluster tile range."""
    st = get_style(style)
    if st.tag != "maeri":
        return st.cluster_sizes(hw.pe_count)
    dims = dict(zip(DIMS, w.dims))
    b, cdim = lo[1], lo[2]
    t = outer_bound(dims[b], 1, hw.beta_elems)
    return list(range(1, max(1, min(t, dims[cdim], hw.pe_count)) + 1))


def spatial_chain(style, lo, lam, w, hw):
    """Spatial tiles to try: the full-coverage tile if the smallest configuration
    fits, otherwise every halving of it that does."""
    st = get_style(style)
    dims = dict(zip(DIMS, w.dims))
    s = _roles(st, lo)[0]
    t0 = spatial_tile(dims[s], hw.pe_count // lam)

    def fits(t):
        row = np.array([[1, 1, 1, 1, 1, 1]], dtype=np.int64)
        row[0, DIM_INDEX[s]] = t
        if st.tag == "maeri":
            row[0, DIM_INDEX[lo[2]]] = lam
        return bool(valid_mask(st, lo, lam, row, w, hw)[0])

    if fits(t0):
        return [t0]
    t = t0 // 2
    while t >= 1 and not fits(t):
        t //= 2
    chain = []
    while t >= 1:
        chain.append(t)
        t //= 2
    return chain


def iter_blocks(style, w, hw, stride="all", loop_orders=None):
    """Yield CandidateBlocks in the deterministic enumeration order."""
    st = get_style(style)
    orders = st.legal_loop_orders if loop_orders is None else tuple(parse_loop_order(x) for x in loop_orders)
    dims = dict(zip(DIMS, w.dims))
    for lo in orders:
        if lo not in st.legal_loop_orders:
            continue
        s, free, tied, _ = _roles(st, lo)
        for lam in cluster_choices(st, lo, w, hw):
            nc = hw.pe_count // lam
            if nc < 1:
                continue
            for ts in spatial_chain(st, lo, lam, w, hw):
                ob = outer_tile_bounds(st, lo, lam, hw.beta_elems, hw.pe_count, w, spatial=ts)
                if st.tag == "maeri":
                    a = free[0]
                    vals_a = stride_values(ob[a].hi, stride)
                    outer = np.zeros((len(vals_a), 3), np.int64)
                    outer[:, DIM_INDEX[a]] = vals_a
                    outer[:, DIM_INDEX[s]] = ts
                    outer[:, DIM_INDEX[tied]] = lam
                else:
                    f1, f2 = free
                    g = _grid(stride_values(ob[f1].hi, stride), stride_values(ob[f2].hi, stride))
                    outer = np.zeros((len(g), 3), np.int64)
                    outer[:, DIM_INDEX[f1]] = g[:, 0]
                    outer[:, DIM_INDEX[f2]] = g[:, 1]
                    outer[:, DIM_INDEX[s]] = ts
                # outer-only S2 filter before expanding inner tiles
                probe = np.concatenate([outer, np.ones_like(outer)], axis=1)
                if st.tag != "maeri":
                    probe[:, 3 + DIM_INDEX[tied]] = outer[:, DIM_INDEX[tied]]
                c, p, sidx, _, _, _ = template_arrays(st, lo, lam, probe)
                s2, _ = footprints(c, p, sidx, nc, w.dims)
                outer = outer[2 * s2 <= hw.beta_elems]
                if not len(outer):
                    continue
                # inner tiles: the two non-tied dims, bounded per outer row
                i1, i2 = [d for d in DIMS if d != tied]
                if st.tag == "maeri":
                    x = np.ones(len(outer), np.int64)
                else:
                    x = np.minimum(outer[:, DIM_INDEX[tied]], dims[tied])
                ib = np.array([inner_bound(int(v), hw.alpha_elems) for v in x], dtype=np.int64) \
                    if len(np.unique(x)) > 1 else np.full(len(x), inner_bound(int(x[0]), hw.alpha_elems))
                r1 = np.maximum(np.minimum(ib, outer[:, DIM_INDEX[i1]]), 1)
                r2 = np.maximum(np.minimum(ib, outer[:, DIM_INDEX[i2]]), 1)
                rows = _expand_inner(outer, r1, r2, stride)
                tiles = np.zeros((len(rows), 6), np.int64)
                tiles[:, 0:3] = rows[:, 0:3]
                tiles[:, 3 + DIM_INDEX[i1]] = rows[:, 3]
                tiles[:, 3 + DIM_INDEX[i2]] = rows[:, 4]
                tiles[:, 3 + DIM_INDEX[tied]] = 1 if st.tag == "maeri" else rows[:, DIM_INDEX[tied]]
                tiles = tiles[valid_mask(st, lo, lam, tiles, w, hw)]
                if len(tiles):
                    yield CandidateBlock(st.tag, lo, lam, _sort_desc(tiles), hw.pe_count)


def enumerate_candidates(style, w, hw, stride="all", loop_orders=None):
    """Stream of (Mapping, TileSet) pairs that pass validation."""
    for block in iter_blocks(style, w, hw, stride, loop_orders):
        yield from block.mappings()


def count_candidates(style, w, hw, stride="all", loop_orders=None):
    return sum(len(b) for b in iter_blocks(style, w, hw, stride, loop_orders))


def unpruned_count(style, w, hw, loop_orders=None):
    """Six free tiles each ranging over its dimension, times orders and cluster sizes."""
    st = get_style(style)
    orders = st.legal_loop_orders if loop_orders is None else [
        o for o in (parse_loop_order(x) for x in loop_orders) if o in st.legal_loop_orders
    ]
    per = 1
    for d in w.dims:
        per *= d * d
    lams = 1 if st.cluster_rule == "tied" else len(st.cluster_sizes(hw.pe_count))
    return per * len(orders) * lams


@dataclass(frozen=True)
class PruneStats:
    unpruned_count: int
    pruned_count: int
    generation_seconds: float
    stride: str = "all"
    per_loop_order: dict = field(default_factory=dict)

    @property
    def reduction_ratio(self):
        if not self.unpruned_count:
            return 0.0
        return 1.0 - self.pruned_count / self.unpruned_count

    @property
    def reduction_factor(self):
        return self.unpruned_count / self.pruned_count if self.pruned_count else float("inf")

    def to_dict(self, timing=True):
        d = {
            "unpruned_count": self.unpruned_count,
            "pruned_count": self.pruned_count,
            "reduction_ratio": self.reduction_ratio,
            "reduction_factor": self.reduction_factor,
            "stride": self.stride,
            "per_loop_order": dict(self.per_loop_order),
        }
        if timing:
            d["generation_seconds"] = self.generation_seconds
        return d


def prune_stats(style, w, hw, stride="all", loop_orders=None):
    t0 = time.perf_counter()
    per = {}
    for b in iter_blocks(style, w, hw, stride, loop_orders):
        per[b.loop_order] = per.get(b.loop_order, 0) + len(b)
    dt = time.perf_counter() - t0
    return PruneStats(
        unpruned_count=unpruned_count(style, w, hw, loop_orders),
        pruned_count=sum(per.values()),
        generation_seconds=dt,
        stride=stride,
        per_loop_order=per,
    )
