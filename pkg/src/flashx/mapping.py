"""Directive-program representation of GEMM mappings.

A mapping is two levels of three directives each, separated by a cluster
directive. Above the cluster line the directives describe how tiles move
across clusters; below it, how a cluster's tile is split over its PEs and
over time. The order of the directives is the loop order.
"""

import math
import re
from dataclasses import dataclass, field
from itertools import permutations

DIMS = ("M", "N", "K")
DIM_INDEX = {d: i for i, d in enumerate(DIMS)}
ALL_LOOP_ORDERS = tuple("".join(p) for p in permutations("MNK"))

TEMPORAL = "T"
SPATIAL = "S"


class IllegalLoopOrder(ValueError):
    pass


class IllegalClusterSize(ValueError):
    pass


class MappingParseError(ValueError):
    pass


def parse_loop_order(text):
    """'mnk', '<m,n,k>' or ('M','N','K') -> 'MNK'."""
    if isinstance(text, (tuple, list)):
        text = "".join(text)
    s = re.sub(r"[^a-zA-Z]", "", str(text)).upper()
    if len(s) != 3 or sorted(s) != ["K", "M", "N"]:
        raise ValueError(f"not a loop order: {text!r}")
    return s


def format_loop_order(lo):
    return "<" + ",".join(lo.lower()) + ">"


def mirror_loop_order(lo):
    return lo.translate(str.maketrans("MN", "NM"))


@dataclass(frozen=True)
class AcceleratorStyle:
    tag: str
    name: str
    legal_loop_orders: tuple
    cluster_rule: str  # "range" | "sqrt" | "tied"
    outer_spatial: str | None  # None: depends on loop order
    inner_spatial: str | None
    cluster_range: tuple = (1, 1)

    @property
    def canonical_order(self):
        return self.legal_loop_orders[0]

    def is_legal_order(self, lo):
        return parse_loop_order(lo) in self.legal_loop_orders

    def cluster_sizes(self, pe_count):
        """Legal cluster sizes on a P-PE array, ascending.

        Returns None for the tied rule, where the size follows a tile size.
        """
        if self.cluster_rule == "range":
            lo, hi = self.cluster_range
            hi = min(hi, pe_count)
            lo = min(lo, hi)
            return list(range(lo, hi + 1))
        if self.cluster_rule == "sqrt":
            return [max(1, math.isqrt(pe_count))]
        return None

    def cluster_size_ok(self, lam, pe_count=None, tiles=None, loop_order=None):
        if lam < 1 or (pe_count is not None and lam > pe_count):
            return False
        if self.cluster_rule == "range":
            if pe_count is not None:
                return lam in self.cluster_sizes(pe_count)
            return self.cluster_range[0] <= lam <= self.cluster_range[1]
        if self.cluster_rule == "sqrt":
            return pe_count is None or lam == self.cluster_sizes(pe_count)[0]
        if tiles is not None and loop_order is not None:
            return lam == tiles.out(parse_loop_order(loop_order)[2])
        return True


STYLES = {
    "eyeriss": AcceleratorStyle("eyeriss", "Eyeriss", ("MNK",), "range", "M", "K", (1, 12)),
    "nvdla": AcceleratorStyle("nvdla", "NVDLA", ("NKM",), "range", "N", "K", (16, 64)),
    "tpu": AcceleratorStyle("tpu", "TPU", ("NMK",), "sqrt", "N", "K"),
    "shidiannao": AcceleratorStyle("shidiannao", "ShiDianNao", ("MNK",), "sqrt", "M", "N"),
    "maeri": AcceleratorStyle("maeri", "MAERI", ALL_LOOP_ORDERS, "tied", None, None),
}
STYLE_TAGS = tuple(STYLES)


def get_style(tag):
    if isinstance(tag, AcceleratorStyle):
        return tag
    try:
        return STYLES[str(tag).lower()]
    except KeyError:
        raise KeyError(f"unknown style {tag!r}; expected one of {list(STYLES)}") from None


@dataclass(frozen=True)
class Directive:
    kind: str
    dim: str
    size: int
    offset: int | None = None

    def __post_init__(self):
        if self.kind not in (TEMPORAL, SPATIAL):
            raise ValueError(f"bad directive kind {self.kind!r}")
        if self.dim not in DIMS:
            raise ValueError(f"bad dimension {self.dim!r}")
        if self.offset is None:
            object.__setattr__(self, "offset", self.size)
        if self.size < 1 or self.offset < 1:
            raise ValueError("directive size and offset must be >= 1")

    def render(self):
        tag = "TMap" if self.kind == TEMPORAL else "SMap"
        return f"{tag}({self.size},{self.offset}) {self.dim}"


@dataclass(frozen=True)
class TileSet:
    t_out_m: int
    t_out_n: int
    t_out_k: int
    t_in_m: int
    t_in_n: int
    t_in_k: int

    def __post_init__(self):
        for v in self.as_tuple():
            if v < 1:
                raise ValueError(f"tile sizes must be positive: {self.as_tuple()}")

    def as_tuple(self):
        return (self.t_out_m, self.t_out_n, self.t_out_k, self.t_in_m, self.t_in_n, self.t_in_k)

    def out(self, dim):
        return self.as_tuple()[DIM_INDEX[dim]]

    def inn(self, dim):
        return self.as_tuple()[3 + DIM_INDEX[dim]]

    @classmethod
    def from_dims(cls, outer, inner):
        """Build from {dim: size} dicts."""
        return cls(outer["M"], outer["N"], outer["K"], inner["M"], inner["N"], inner["K"])


@dataclass(frozen=True)
class Mapping:
    outer: tuple
    cluster_size: int
    inner: tuple
    style: str | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "outer", tuple(self.outer))
        object.__setattr__(self, "inner", tuple(self.inner))
        if len(self.outer) != 3 or len(self.inner) != 3:
            raise ValueError("each level needs exactly three directives")
        for level in (self.outer, self.inner):
            if sorted(d.dim for d in level) != ["K", "M", "N"]:
                raise ValueError("each of M, N, K must appear exactly once per level")
        if sum(d.kind == SPATIAL for d in self.outer) != 1:
            raise ValueError("the outer level needs exactly one spatial directive")
        if sum(d.kind == SPATIAL for d in self.inner) > 1:
            raise ValueError("the inner level allows at most one spatial directive")
        if self.cluster_size < 1:
            raise ValueError("cluster size must be >= 1")

    @property
    def loop_order(self):
        return "".join(d.dim for d in self.outer)

    @property
    def inner_order(self):
        return "".join(d.dim for d in self.inner)

    @property
    def outer_spatial(self):
        return next(d.dim for d in self.outer if d.kind == SPATIAL)

    @property
    def inner_spatial(self):
        return next((d.dim for d in self.inner if d.kind == SPATIAL), None)

    def outer_size(self, dim):
        return next(d.size for d in self.outer if d.dim == dim)

    def inner_size(self, dim):
        return next(d.size for d in self.inner if d.dim == dim)

    def num_clusters(self, pe_count):
        return pe_count // self.cluster_size

    def transposed(self):
        """Swap the roles of M and N (and so of A and B); style constraints are dropped."""
        swap = {"M": "N", "N": "M", "K": "K"}

        def flip(level):
            return tuple(Directive(d.kind, swap[d.dim], d.size, d.offset) for d in level)

        return Mapping(flip(self.outer), self.cluster_size, flip(self.inner), style=None)

    def to_dict(self):
        def enc(level):
            return [{"kind": d.kind, "dim": d.dim, "size": d.size, "offset": d.offset} for d in level]

        return {
            "style": self.style,
            "outer": enc(self.outer),
            "cluster_size": self.cluster_size,
            "inner": enc(self.inner),
        }

    @classmethod
    def from_dict(cls, d):
        def dec(level):
            return tuple(Directive(x["kind"], x["dim"], int(x["size"]), int(x.get("offset", x["size"]))) for x in level)

        return cls(dec(d["outer"]), int(d["cluster_size"]), dec(d["inner"]), style=d.get("style"))


def mapping_from_style(style, loop_order, lam, tiles, pe_count=None):
    """Instantiate a style's directive template with concrete tile sizes."""
    st = get_style(style)
    lo = parse_loop_order(loop_order)
    if lo not in st.legal_loop_orders:
        raise IllegalLoopOrder(f"{st.name}-style mapping does not support loop order {format_loop_order(lo)}")
    if not st.cluster_size_ok(lam, pe_count, tiles, lo):
        raise IllegalClusterSize(f"cluster size {lam} not allowed for {st.name}-style mapping")
    T, S = TEMPORAL, SPATIAL
    t = tiles
    if st.tag == "eyeriss":
        outer = (Directive(S, "M", t.t_out_m), Directive(T, "N", t.t_out_n), Directive(T, "K", t.t_out_k * lam))
        inner = (Directive(T, "M", t.t_in_m), Directive(T, "N", t.t_in_n), Directive(S, "K", t.t_out_k))
    elif st.tag == "nvdla":
        outer = (Directive(S, "N", t.t_out_n), Directive(T, "K", t.t_out_k * lam), Directive(T, "M", t.t_out_m))
        inner = (Directive(T, "N", t.t_in_n), Directive(T, "M", t.t_in_m), Directive(S, "K", t.t_out_k))
    elif st.tag == "tpu":
        outer = (Directive(S, "N", t.t_out_n), Directive(T, "M", t.t_out_m), Directive(T, "K", t.t_out_k * lam))
        inner = (Directive(T, "N", t.t_in_n), Directive(T, "M", t.t_in_m), Directive(S, "K", t.t_out_k))
    elif st.tag == "shidiannao":
        outer = (Directive(S, "M", t.t_out_m), Directive(T, "N", t.t_out_n * lam), Directive(T, "K", t.t_out_k))
        inner = (Directive(T, "M", t.t_in_m), Directive(S, "N", t.t_out_n), Directive(T, "K", t.t_in_k))
    else:
        a, b, c = lo
        outer = (Directive(T, a, t.out(a)), Directive(S, b, t.out(b)), Directive(T, c, t.out(c)))
        inner = (Directive(T, a, t.inn(a)), Directive(T, b, t.inn(b)), Directive(S, c, 1))
    return Mapping(outer, lam, inner, style=st.tag)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def add(self, code, message):
        self.violations.append((code, message))

    def codes(self):
        return [c for c, _ in self.violations]

    def __str__(self):
        if self.ok:
            return "valid"
        return "; ".join(f"[{c}] {m}" for c, m in self.violations)


MATRIX_DIMS = {"A": ("M", "K"), "B": ("K", "N"), "C": ("M", "N")}


def s2_footprint(m, w, pe_count):
    """Elements of A, B and C covered by one outer step across all clusters."""
    nc = m.num_clusters(pe_count)
    dims = dict(zip(DIMS, w.dims))
    ext = {}
    for d in m.outer:
        agg = d.size * nc if d.kind == SPATIAL else d.size
        ext[d.dim] = min(agg, dims[d.dim])
    return sum(ext[a] * ext[b] for a, b in MATRIX_DIMS.values())


def s1_footprint(m, w):
    """Elements of A, B and C one PE holds for a single inner step."""
    dims = dict(zip(DIMS, w.dims))
    ext = {d.dim: min(d.size, dims[d.dim]) for d in m.inner}
    return sum(ext[a] * ext[b] for a, b in MATRIX_DIMS.values())


def validate_mapping(m, w, hw, check_style=True):
    rep = ValidationReport()
    for level_name, level in (("outer", m.outer), ("inner", m.inner)):
        for d in level:
            if d.offset != d.size:
                rep.add("overlap", f"{level_name} {d.dim}: offset {d.offset} != size {d.size} (overlapping tiles unsupported)")
    if m.inner_spatial is not None and m.inner_spatial == m.outer_spatial:
        rep.add("structure", f"dimension {m.outer_spatial} is spatial at both levels")
    if m.cluster_size > hw.pe_count:
        rep.add("clusters", f"cluster size {m.cluster_size} exceeds {hw.pe_count} PEs; no complete cluster")
    for dim in DIMS:
        if m.inner_size(dim) > m.outer_size(dim):
            rep.add("inner>outer", f"{dim}: inner tile {m.inner_size(dim)} exceeds outer tile {m.outer_size(dim)}")
    if m.cluster_size <= hw.pe_count:
        fp2 = s2_footprint(m, w, hw.pe_count)
        if 2 * fp2 > hw.beta_elems:
            rep.add("s2", f"outer tiles need {fp2} elements; double-buffered S2 holds {hw.beta_elems // 2}")
    fp1 = s1_footprint(m, w)
    if 2 * fp1 > hw.alpha_elems:
        rep.add("s1", f"inner tiles need {fp1} elements; double-buffered S1 holds {hw.alpha_elems // 2}")
    if check_style and m.style is not None:
        st = get_style(m.style)
        lo = m.loop_order
        if lo not in st.legal_loop_orders:
            rep.add("loop-order", f"{st.name}-style does not allow loop order {format_loop_order(lo)}")
        elif st.cluster_rule == "tied":
            if m.cluster_size != m.outer_size(lo[2]):
                rep.add("cluster-size", f"{st.name}-style cluster size must equal the {lo[2]} outer tile")
        elif not st.cluster_size_ok(m.cluster_size, hw.pe_count):
            rep.add("cluster-size", f"cluster size {m.cluster_size} not allowed for {st.name}-style on {hw.pe_count} PEs")
    return rep


def render_mapping(m, include_style=False):
    lines = []
    if include_style and m.style is not None:
        lines.append(f"# style: {m.style}")
    lines += [d.render() for d in m.outer]
    lines.append(f"Cluster({m.cluster_size})")
    lines += [d.render() for d in m.inner]
    return "\n".join(lines) + "\n"


_DIRECTIVE_RE = re.compile(
    r"^(TMap|SMap|TemporalMap|SpatialMap)\s*\(\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)\s*([MNKmnk])\s*;?$"
)
_CLUSTER_RE = re.compile(r"^Cluster\s*\(\s*(\d+)\s*\)\s*;?$")


def parse_mapping(text):
    style = None
    outer, inner, cluster = [], [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            mm = re.match(r"#\s*style\s*:\s*(\w+)", line)
            if mm:
                style = get_style(mm.group(1)).tag
            continue
        mc = _CLUSTER_RE.match(line)
        if mc:
            if cluster is not None:
                raise MappingParseError(f"line {lineno}: second Cluster directive")
            cluster = int(mc.group(1))
            continue
        md = _DIRECTIVE_RE.match(line)
        if not md:
            raise MappingParseError(f"line {lineno}: cannot parse {raw!r}")
        kind = SPATIAL if md.group(1).startswith("S") else TEMPORAL
        size = int(md.group(2))
        offset = int(md.group(3)) if md.group(3) else size
        (outer if cluster is None else inner).append(Directive(kind, md.group(4).upper(), size, offset))
    if cluster is None:
        raise MappingParseError("missing Cluster directive")
    try:
        return Mapping(tuple(outer), cluster, tuple(inner), style=style)
    except ValueError as exc:
        raise MappingParseError(str(exc)) from None


def classify_tiling(m, loop_order=None):
    """'NonTiled' when the only outer parallelism sits on the innermost loop
    dimension and both other outer tiles are 1, otherwise 'Tiled'."""
    lo = parse_loop_order(loop_order) if loop_order is not None else m.loop_order
    if m.inner_spatial == lo[2] and m.outer_size(lo[0]) == 1 and m.outer_size(lo[1]) == 1:
        return "NonTiled"
    return "Tiled"


def non_tiled_mapping(loop_order, w, pe_count):
    """Reference MAERI-style mapping with no tiling of the two outer loops.

    One element of the first two loop dims per step; the innermost dim is
    spread over a single cluster as wide as the array allows.
    """
    lo = parse_loop_order(loop_order)
    dims = dict(zip(DIMS, w.dims))
    lam = min(dims[lo[2]], pe_count)
    sizes = {lo[0]: 1, lo[1]: 1, lo[2]: lam}
    tiles = TileSet(sizes["M"], sizes["N"], sizes["K"], 1, 1, 1)
    return mapping_from_style("maeri", lo, lam, tiles, pe_count)
