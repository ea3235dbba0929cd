"""Tile-size and loop-order search for GEMM on spatial accelerators."""

__version__ = "0.1.0"

from ._jit import backend_name
from .cost import CostReport, InvalidMapping, analyze, build_schedule, count_accesses, estimate_runtime
from .explorer import (
    ExplorationResult, ExploreOptions, NoFeasibleMapping, compare, explore, histogram,
    random_sample_baseline,
)
from .hardware import ConfigError, EnergyTable, HardwareConfig, builtin_hardware
from .mapping import (
    STYLES, Directive, Mapping, TileSet, classify_tiling, get_style, mapping_from_style,
    non_tiled_mapping, parse_mapping, render_mapping, validate_mapping,
)
from .oracle import WorkloadTooLarge, oracle_counts
from .search import enumerate_candidates, inner_bound, outer_bound, prune_stats
from .workload import GemmWorkload, builtin_workload, builtin_workloads, mlp_workloads, workload_gflops

__all__ = [
    "__version__", "backend_name",
    "CostReport", "InvalidMapping", "analyze", "build_schedule", "count_accesses", "estimate_runtime",
    "ExplorationResult", "ExploreOptions", "NoFeasibleMapping", "compare", "explore", "histogram",
    "random_sample_baseline",
    "ConfigError", "EnergyTable", "HardwareConfig", "builtin_hardware",
    "STYLES", "Directive", "Mapping", "TileSet", "classify_tiling", "get_style", "mapping_from_style",
    "non_tiled_mapping", "parse_mapping", "render_mapping", "validate_mapping",
    "WorkloadTooLarge", "oracle_counts",
    "enumerate_candidates", "inner_bound", "outer_bound", "prune_stats",
    "GemmWorkload", "builtin_workload", "builtin_workloads", "mlp_workloads", "workload_gflops",
]
