"""Command-line front end.

Exit codes: 0 success, 1 bad configuration or arguments, 2 no feasible or an
invalid mapping, 3 the closed-form counts disagree with the reference walk.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from ._jit import backend_name
from .cost import REPORT_COLUMNS, InvalidMapping, analyze, build_schedule, count_accesses
from .experiments import EXPERIMENTS, UnknownExperiment, reproduce
from .explorer import ExploreOptions, NoFeasibleMapping, explore, random_sample_baseline
from .hardware import ConfigError, HardwareConfig, builtin_hardware
from .mapping import (
    STYLES, MappingParseError, format_loop_order, get_style, parse_mapping, validate_mapping,
)
from .oracle import WorkloadTooLarge, oracle_counts
from .search import prune_stats
from .workload import GemmWorkload, builtin_workload, builtin_workloads, mlp_workloads

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_MISMATCH = 0, 1, 2, 3


class UsageError(ConfigError):
    pass


def resolve_workloads(sel):
    """Turn a selector into [(label, workload)].

    Accepted forms: a builtin id (``I`` .. ``VI``), an ``M,N,K`` triple,
    ``mlp:BATCH`` for all four MLP layers or ``mlp:BATCH:LAYER`` for one.
    """
    text = sel.strip()
    if text.lower().startswith("mlp:"):
        parts = text.split(":")
        try:
            batch = int(parts[1])
            layers = mlp_workloads(batch)
            picked = range(len(layers)) if len(parts) == 2 else [int(parts[2]) - 1]
            if len(parts) > 3 or any(not 0 <= i < len(layers) for i in picked):
                raise ValueError
        except (ValueError, IndexError):
            raise UsageError("workload", f"bad MLP selector {sel!r}; use mlp:BATCH or mlp:BATCH:LAYER (1-4)") from None
        return [(f"mlp{batch}-FC{i + 1}", layers[i]) for i in picked]
    if "," in text:
        try:
            dims = [int(x) for x in text.split(",")]
            if len(dims) != 3:
                raise ValueError("need three dims")
            return [(text, GemmWorkload(*dims))]
        except ValueError as exc:
            raise UsageError("workload", f"bad M,N,K triple {sel!r}: {exc}") from None
    try:
        return [(text.upper(), builtin_workload(text))]
    except KeyError as exc:
        raise UsageError("workload", str(exc.args[0])) from None


def resolve_hardware(hw_id, config_path):
    if config_path:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise UsageError("config", f"cannot read {config_path}: {exc.strerror}") from None
        return HardwareConfig.from_json(text)
    try:
        return builtin_hardware(hw_id)
    except KeyError as exc:
        raise UsageError("hw", str(exc.args[0])) from None


def resolve_style(tag):
    try:
        return get_style(tag)
    except KeyError as exc:
        raise UsageError("style", str(exc.args[0])) from None


def _loop_orders(style, policy):
    return (style.canonical_order,) if policy == "fixed" else None


def _emit(doc, table, args, run_spec):
    """Write ``doc`` as JSON, or ``table`` (columns, rows) as CSV."""
    if args.format == "csv":
        cols, rows = table
        buf = io.StringIO()
        buf.write("# run_spec: " + json.dumps(run_spec, sort_keys=True) + "\n")
        wr = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        wr.writeheader()
        wr.writerows(rows)
        text = buf.getvalue()
    else:
        text = json.dumps({"run_spec": run_spec, **doc}, indent=2, sort_keys=False) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    elif not args.quiet:
        sys.stdout.write(text)


def _base_spec(args, **extra):
    spec = {"subcommand": args.command, "version": __version__}
    spec.update(extra)
    return spec


def _flat(label, cand):
    d = {"workload": label, "loop_order": format_loop_order(cand.loop_order), "cluster_size": cand.cluster_size}
    d.update(zip(("t_out_m", "t_out_n", "t_out_k", "t_in_m", "t_in_n", "t_in_k"), cand.tiles.as_tuple()))
    d.update(cand.report.to_dict())
    return d


def cmd_explore(args):
    st = resolve_style(args.style)
    wls = resolve_workloads(args.workload)
    hw = resolve_hardware(args.hw, args.config)
    opts = ExploreOptions(stride=args.stride, loop_orders=_loop_orders(st, args.loop_orders), top_k=args.top_k)
    spec = _base_spec(
        args, style=st.tag, workloads={k: w.to_dict() for k, w in wls}, hardware=hw.to_dict(),
        options=opts.to_dict(), loop_order_policy=args.loop_orders, seed=args.seed, samples=args.samples,
    )
    results, rows = [], []
    for label, w in wls:
        try:
            res = explore(st, w, hw, opts)
        except NoFeasibleMapping as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        doc = res.to_dict(timing=False)
        doc["label"] = label
        if args.samples:
            smp = random_sample_baseline(st, w, hw, args.samples, args.seed, opts.loop_orders)
            doc["random_sample"] = {
                "sampled": smp.sampled, "valid": smp.valid,
                "best": smp.best.to_dict() if smp.found else None,
            }
        results.append(doc)
        rows.extend(_flat(label, c) for c in res.ranked)
        rep = res.best.report
        print(
            f"{label} {st.name} on {hw.name}: best {rep.runtime_ms:.4f} ms, "
            f"energy {rep.energy_units:.4g} units, reuse {rep.data_reuse:.2f}, "
            f"utilization {rep.pe_utilization:.1%} ({res.candidate_count} candidates, "
            f"order {format_loop_order(res.best.loop_order)})",
            file=sys.stderr,
        )
    cols = ["workload", "loop_order", "cluster_size", "t_out_m", "t_out_n", "t_out_k",
            "t_in_m", "t_in_n", "t_in_k", *REPORT_COLUMNS]
    doc = {"result": results[0]} if len(results) == 1 else {"results": results}
    _emit(doc, (cols, rows), args, spec)
    return EXIT_OK


def cmd_cost(args):
    if not args.mapping:
        raise UsageError("mapping", "the cost subcommand needs --mapping FILE")
    try:
        text = Path(args.mapping).read_text()
    except OSError as exc:
        raise UsageError("mapping", f"cannot read {args.mapping}: {exc.strerror}") from None
    try:
        m = parse_mapping(text)
    except MappingParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    wls = resolve_workloads(args.workload)
    if len(wls) != 1:
        raise UsageError("workload", "cost takes a single workload")
    label, w = wls[0]
    hw = resolve_hardware(args.hw, args.config)
    if args.style:
        m = type(m)(m.outer, m.cluster_size, m.inner, style=resolve_style(args.style).tag)
    spec = _base_spec(args, workload=w.to_dict(), hardware=hw.to_dict(), mapping=text.strip().splitlines())
    try:
        rep = analyze(m, w, hw, double_buffer_accounting=args.double_buffer)
    except InvalidMapping as exc:
        for code, msg in exc.report.violations:
            print(f"invalid mapping [{code}]: {msg}", file=sys.stderr)
        return EXIT_INFEASIBLE
    doc = {"workload": label, "report": rep.to_dict()}
    status = EXIT_OK
    if args.oracle:
        try:
            ref = oracle_counts(m, w, hw)
        except WorkloadTooLarge as exc:
            raise UsageError("oracle", str(exc)) from None
        got = count_accesses(build_schedule(m, w, hw))
        same = got.s2 == ref.s2 and got.s1 == ref.s1 and got.forwards == ref.forwards
        same = same and rep.runtime_cycles == ref.runtime_cycles
        doc["oracle"] = {"match": same, "s2": ref.s2, "forwards": ref.forwards, "runtime_cycles": ref.runtime_cycles}
        if not same:
            print(f"oracle mismatch: model {got.s2} vs walk {ref.s2}", file=sys.stderr)
            status = EXIT_MISMATCH
    _emit(doc, (list(REPORT_COLUMNS), [rep.to_dict()]), args, spec)
    print(f"{label}: {rep.runtime_ms:.6f} ms, energy {rep.energy_units:.6g} units", file=sys.stderr)
    return status


def cmd_prune_stats(args):
    st = resolve_style(args.style)
    wls = resolve_workloads(args.workload)
    hw = resolve_hardware(args.hw, args.config)
    orders = _loop_orders(st, args.loop_orders)
    spec = _base_spec(args, style=st.tag, hardware=hw.to_dict(), stride=args.stride, loop_order_policy=args.loop_orders)
    rows = []
    for label, w in wls:
        ps = prune_stats(st, w, hw, args.stride, orders)
        d = {"workload": label, **ps.to_dict(timing=True)}
        d["per_loop_order"] = {format_loop_order(k): v for k, v in ps.per_loop_order.items()}
        rows.append(d)
        print(
            f"{label}: {ps.unpruned_count} unpruned, {ps.pruned_count} pruned, "
            f"ratio {ps.reduction_ratio:.6f}, {ps.generation_seconds:.2f} s",
            file=sys.stderr,
        )
    cols = ["workload", "unpruned_count", "pruned_count", "reduction_ratio", "reduction_factor", "stride", "generation_seconds"]
    _emit({"stats": rows}, (cols, rows), args, spec)
    return EXIT_OK


def cmd_reproduce(args):
    kw = {}
    if args.stride_override:
        kw["stride"] = args.stride_override
    try:
        table = reproduce(args.experiment, **kw)
    except UnknownExperiment as exc:
        raise UsageError("experiment", str(exc.args[0])) from None
    spec = _base_spec(args, experiment=args.experiment, settings=table.settings)
    _emit(table.to_dict(), (table.columns, table.rows), args, spec)
    return EXIT_OK


def cmd_presets(args):
    doc = {
        "workloads": {k: w.to_dict() for k, w in builtin_workloads()},
        "hardware": {h: builtin_hardware(h).to_dict() for h in ("edge", "cloud")},
        "styles": {
            k: {"name": s.name, "loop_orders": [format_loop_order(o) for o in s.legal_loop_orders]}
            for k, s in STYLES.items()
        },
        "experiments": sorted(EXPERIMENTS),
        "backend": backend_name(),
    }
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="flashx", description="GEMM mapping exploration for spatial accelerators")
    p.add_argument("--version", action="version", version=f"flashx {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, style=True):
        if style:
            sp.add_argument("--style", default="maeri", help="eyeriss, nvdla, tpu, shidiannao or maeri")
        sp.add_argument("--workload", default="VI", help="I..VI, M,N,K or mlp:BATCH[:LAYER]")
        sp.add_argument("--hw", default="edge", help="edge or cloud")
        sp.add_argument("--config", help="hardware JSON file; overrides --hw")
        sp.add_argument("--out", help="write the result here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--quiet", action="store_true", help="do not echo the result document")

    sp = sub.add_parser("explore", help="search tile sizes and rank mappings")
    common(sp)
    sp.add_argument("--loop-orders", choices=("fixed", "all"), default="fixed")
    sp.add_argument("--stride", choices=("all", "pow2"), default="all")
    sp.add_argument("--top-k", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0, help="seed of the random-sampling baseline")
    sp.add_argument("--samples", type=int, default=0, help="also run a random-sampling baseline of this size")
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("cost", help="cost one mapping given in directive form")
    common(sp, style=False)
    sp.add_argument("--mapping", help="mapping file (TMap/SMap/Cluster lines)")
    sp.add_argument("--style", default=None, help="also check the mapping against this style's template")
    sp.add_argument("--oracle", action="store_true", help="cross-check counts with the reference walk")
    sp.add_argument("--double-buffer", action="store_true", help="count S2 fills twice")
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("prune-stats", help="candidate counts before and after pruning")
    common(sp)
    sp.add_argument("--loop-orders", choices=("fixed", "all"), default="fixed")
    sp.add_argument("--stride", choices=("all", "pow2"), default="all")
    sp.set_defaults(func=cmd_prune_stats)

    sp = sub.add_parser("reproduce", help="regenerate one evaluation experiment")
    sp.add_argument("experiment", help=", ".join(sorted(EXPERIMENTS)))
    sp.add_argument("--stride", dest="stride_override", choices=("all", "pow2"))
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_reproduce)

    sp = sub.add_parser("presets", help="list builtin workloads, hardware and styles")
    sp.set_defaults(func=cmd_presets)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
