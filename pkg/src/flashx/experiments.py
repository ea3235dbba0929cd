"""Regenerate the evaluation tables and histograms as plain data."""

import csv
import io
from dataclasses import dataclass, field

from .cost import analyze
from .explorer import ExploreOptions, compare, explore
from .hardware import builtin_hardware
from .mapping import ALL_LOOP_ORDERS, STYLE_TAGS, TileSet, format_loop_order, non_tiled_mapping
from .workload import builtin_workload, builtin_workloads, mlp_workloads


class UnknownExperiment(KeyError):
    pass


@dataclass
class ExperimentTable:
    """Rows of one experiment plus the settings that produced them."""

    experiment: str
    columns: list
    rows: list
    settings: dict = field(default_factory=dict)

    def to_csv(self, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        wr = csv.DictWriter(buf, fieldnames=self.columns, extrasaction="ignore", lineterminator="\n")
        wr.writeheader()
        for r in self.rows:
            wr.writerow(r)
        return buf.getvalue()

    def to_dict(self):
        return {"experiment": self.experiment, "settings": self.settings, "columns": self.columns, "rows": self.rows}


_SUMMARY = [
    "runtime_cycles", "runtime_ms", "energy_units",
    "s1_a", "s1_b", "s1_c", "s2_a", "s2_b", "s2_c", "forwards",
    "pe_utilization", "data_reuse",
]
_TILES = list(TileSet.__dataclass_fields__)


def _row(head, cand_or_report, tiles=None, cluster=None):
    rep = getattr(cand_or_report, "report", cand_or_report)
    d = dict(head)
    full = rep.to_dict()
    d.update({k: full[k] for k in _SUMMARY})
    if tiles is not None:
        d.update(zip(_TILES, tiles.as_tuple()))
    if cluster is not None:
        d["cluster_size"] = cluster
    return d


def tiling_table(hw_id="edge", workload_id="VI", stride="all"):
    """Non-tiled reference next to the best tiled MAERI mapping, per loop order."""
    hw = builtin_hardware(hw_id)
    w = builtin_workload(workload_id)
    rows = []
    for lo in ALL_LOOP_ORDERS:
        nt = non_tiled_mapping(lo, w, hw.pe_count)
        head = {"loop_order": format_loop_order(lo), "variant": "NT"}
        nt_tiles = TileSet(*(nt.outer_size(d) for d in "MNK"), *(nt.inner_size(d) for d in "MNK"))
        rows.append(_row(head, analyze(nt, w, hw), nt_tiles, nt.cluster_size))
        best = explore("maeri", w, hw, ExploreOptions(stride=stride, loop_orders=(lo,), top_k=1)).best
        rows.append(_row({**head, "variant": "T"}, best, best.tiles, best.cluster_size))
    cols = ["loop_order", "variant", "cluster_size", *_TILES, *_SUMMARY]
    return ExperimentTable("tiling-table6", cols, rows, {"hw": hw_id, "workload": workload_id, "stride": stride})


def runtime_histogram(style="nvdla", workload_id="I", hw_id="edge", stride="pow2", bins=100):
    res = explore(style, builtin_workload(workload_id), builtin_hardware(hw_id), ExploreOptions(stride=stride, bins=bins, top_k=1))
    h = res.histogram
    edges = h.edges()
    rows = [
        {"bin": i, "lo_cycles": edges[i], "hi_cycles": edges[i + 1], "count": c}
        for i, c in enumerate(h.counts)
    ]
    settings = {
        "style": style, "workload": workload_id, "hw": hw_id, "stride": stride,
        "candidates": res.candidate_count, "spread": res.spread, "bin_width_cycles": h.width,
    }
    return ExperimentTable("histogram-fig5", ["bin", "lo_cycles", "hi_cycles", "count"], rows, settings)


def _comparison_table(name, rows, settings):
    cols = ["hw", "workload", "style", "policy", "feasible", "loop_order", "cluster_size", *_TILES, *_SUMMARY]
    return ExperimentTable(name, cols, [r.to_dict() for r in rows], settings)


def shape_comparison(hw_ids=("edge", "cloud"), workload_ids=None, stride="pow2", styles=STYLE_TAGS):
    """Every style on every builtin workload under its canonical loop order."""
    wls = [(k, w) for k, w in builtin_workloads() if workload_ids is None or k in workload_ids]
    hws = [(h, builtin_hardware(h)) for h in hw_ids]
    rows = compare(styles, wls, hws, "fixed", stride)
    return _comparison_table("shapes-fig6", rows, {"stride": stride, "policy": "fixed"})


def loop_order_sweep(hw_ids=("edge", "cloud"), workload_ids=("IV", "V"), stride="pow2"):
    """MAERI-style best mapping for each of the six loop orders."""
    rows = []
    for h in hw_ids:
        hw = builtin_hardware(h)
        for wid in workload_ids:
            w = builtin_workload(wid)
            res = explore("maeri", w, hw, ExploreOptions(stride=stride, top_k=1))
            for lo in ALL_LOOP_ORDERS:
                c = res.best_per_loop_order.get(lo)
                head = {"hw": h, "workload": wid, "loop_order": format_loop_order(lo), "feasible": c is not None}
                rows.append(_row(head, c, c.tiles, c.cluster_size) if c else head)
    cols = ["hw", "workload", "loop_order", "feasible", "cluster_size", *_TILES, *_SUMMARY]
    return ExperimentTable("looporder-fig7", cols, rows, {"stride": stride, "style": "maeri"})


def mlp_comparison(batch=128, hw_id="edge", stride="all", styles=STYLE_TAGS):
    wls = [(f"FC{i + 1}", w) for i, w in enumerate(mlp_workloads(batch))]
    rows = compare(styles, wls, [(hw_id, builtin_hardware(hw_id))], "fixed", stride)
    return _comparison_table("mlp-fig8", rows, {"batch": batch, "stride": stride, "policy": "fixed"})


EXPERIMENTS = {
    "tiling-table6": tiling_table,
    "histogram-fig5": runtime_histogram,
    "shapes-fig6": shape_comparison,
    "looporder-fig7": loop_order_sweep,
    "mlp-fig8": mlp_comparison,
}


def reproduce(exp_id, **kw):
    try:
        fn = EXPERIMENTS[exp_id]
    except KeyError:
        raise UnknownExperiment(f"unknown experiment {exp_id!r}; choose from {sorted(EXPERIMENTS)}") from None
    return fn(**kw)
