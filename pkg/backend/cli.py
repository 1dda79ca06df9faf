"""
Operator surface.

    init    GRAPH OUT_DIR      Step 1: stores + manifest + baseline scores
    apply   STATE STREAM       replay `op u v [ts]` lines through the engine
    verify  STATE              compare state with a fresh recomputation (and the oracle)
    top     STATE -k K         ranked vertices or edges
    gn      STATE              Girvan–Newman dendrogram (optionally vs. the recompute baseline)
    bench                      speedup and scaling measurements

Exit codes: 0 ok, 1 verification failed, 2 usage or input error.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from bd_store import BdStore
from bench import MODES, bench_sizes, strong_scaling, weak_scaling
from brandes import brandes_full
from communities import girvan_newman, gn_reference
from config import ORACLE_MAX_VERTICES, REFERENCE_MAX_VERTICES, SIGMA_WIDTH, SIGMA_WIDTHS, EngineConfig, format_score
from errors import BetweennessError, EventError, SizeGuardError
from graph_core import load_edge_list, small_world_graph
from incremental import EdgeEvent, EventReport
from oracle import compare_scores, oracle_scores
from partition_engine import PartitionEngine, simulate_online
from state import LATENCY_CSV, STORES_DIR, EngineState, StreamLine, append_latency, parse_stream

log = logging.getLogger("cli")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="[%(name)s] %(message)s",
        stream=sys.stderr,
    )
    for noisy in ("concurrent.futures", "asyncio"):
        logging.getLogger(noisy).setLevel(logging.WARNING)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _engine_config(args, workers: int) -> EngineConfig:
    return EngineConfig(
        workers=workers,
        executor=args.executor,
        storage="disk",
        sigma_width=getattr(args, "sigma_width", SIGMA_WIDTH),
        one_level_drop=not args.no_one_level,
        staging_dir=args.staging_dir,
    )


# ─── init ────────────────────────────────────────────────────

def cmd_init(args) -> int:
    g, labels = load_edge_list(args.graph)
    root = Path(args.out_dir)
    if (root / "manifest.txt").exists() and not args.force:
        raise FileExistsError(f"{root} already holds a state (use --force to overwrite)")
    workers = min(args.workers, max(g.n, 1))
    config = _engine_config(args, workers)
    engine = PartitionEngine.build(g, config, store_dir=(root / STORES_DIR).resolve())
    try:
        state = EngineState(root=root, graph=engine.graph, labels=labels,
                            partitions=engine.partitions, scores=engine.scores)
        state.save()
    finally:
        engine.close()
    total = sum(Path(p.store_path).stat().st_size for p in state.partitions)
    print(f"n={g.n} m={g.m} partitions={len(state.partitions)} store_bytes={total}")
    return EXIT_OK


# ─── apply ───────────────────────────────────────────────────

def _apply_line(engine: PartitionEngine, labels: list[str], index: dict[str, int], line: StreamLine) -> list[EventReport]:
    """One stream line → one or more committed events. Unseen labels become new vertices."""
    ts = line.timestamp

    def known(label: str) -> int:
        if label not in index:
            raise EventError(f"unknown vertex {label!r}", line.line)
        return index[label]

    def register(label: str, v: int) -> None:
        labels.append(label)
        index[label] = v

    if line.op == "x":
        return engine.isolate_vertex(known(line.u))
    if line.op == "-":
        return [engine.process_event(EdgeEvent.remove(known(line.u), known(line.v), ts), line=line.line)]

    if line.u == line.v:
        raise EventError(f"self-loop on {line.u!r}", line.line)
    a = index.get(line.u)
    b = index.get(line.v)
    if a is None and b is None:
        register(line.u, engine.add_vertex())
        a = index[line.u]
    if a is None:
        v, report = engine.add_edge_to_new_vertex(b, ts)
        register(line.u, v)
        return [report]
    if b is None:
        v, report = engine.add_edge_to_new_vertex(a, ts)
        register(line.v, v)
        return [report]
    return [engine.process_event(EdgeEvent.add(a, b, ts), line=line.line)]


def cmd_apply(args) -> int:
    state = EngineState.load(args.state_dir)
    workers = args.workers or len(state.partitions)
    if workers != len(state.partitions):
        log.info(f"Re-partitioning {len(state.partitions)} → {workers} worker(s) before the stream")
        engine = PartitionEngine.build(state.graph, _engine_config(args, min(workers, state.graph.n)),
                                       store_dir=(state.root / STORES_DIR).resolve())
        for stale in state.partitions:
            if stale.store_path and stale.store_path not in {p.store_path for p in engine.partitions}:
                Path(stale.store_path).unlink(missing_ok=True)
    else:
        engine = PartitionEngine.resume(state.graph, state.partitions, state.scores, _engine_config(args, workers))

    index = state.label_index()
    rows: list[tuple[int, EventReport]] = []
    arrivals: list[Optional[float]] = []
    durations: list[float] = []
    failure: Optional[BaseException] = None
    try:
        for line in parse_stream(args.stream):
            reports = _apply_line(engine, state.labels, index, line)
            rows.extend((line.line, r) for r in reports)
            arrivals.append(line.timestamp)
            durations.append(sum(r.elapsed for r in reports))
    except BetweennessError as exc:
        failure = exc
    finally:
        state.graph = engine.graph
        state.partitions = engine.partitions
        state.scores = engine.scores
        state.save()
        append_latency(state.root / LATENCY_CSV, rows)
        branches = engine.branch_counts()
        engine.close()

    if rows:
        times = np.array([r.elapsed for _, r in rows]) * 1000
        print(f"events={len(rows)} median_ms={np.median(times):.3f} max_ms={times.max():.3f}")
        print("branches: " + ", ".join(f"{k}={v}" for k, v in sorted(branches.items())))
    if args.online_report:
        if arrivals and all(a is not None for a in arrivals):
            report = simulate_online(arrivals, durations)
            print(f"online: missed={report.missed}/{report.events} ({report.missed_fraction:.1%}) "
                  f"mean_delay={report.mean_delay:.4f}s")
        else:
            log.warning("online report needs a timestamp on every stream line; skipped")
    if failure is not None:
        log.error(f"Stopped: {failure}")
        return EXIT_USAGE
    return EXIT_OK


# ─── verify ──────────────────────────────────────────────────

def cmd_verify(args) -> int:
    state = EngineState.load(args.state_dir)
    g = state.graph
    if g.n > REFERENCE_MAX_VERTICES:
        raise SizeGuardError(f"verify limited to n ≤ {REFERENCE_MAX_VERTICES}, state has n={g.n}")
    fresh, blocks = brandes_full(g)
    tol = args.tolerance
    ok = True

    worst_delta = 0.0
    for part in state.partitions:
        with BdStore.open(part.store_path) as store:
            for s in range(store.lo, store.hi):
                got = store.load_source(s)
                want = blocks[s]
                for column in ("d", "sigma"):
                    bad = np.flatnonzero(getattr(got, column) != getattr(want, column))
                    if bad.size:
                        v = int(bad[0])
                        print(f"FAIL source {s} vertex {v}: {column}={getattr(got, column)[v]} expected {getattr(want, column)[v]}")
                        ok = False
                dev = np.abs(got.delta - want.delta) / np.maximum(1.0, np.abs(want.delta))
                if dev.size:
                    worst_delta = max(worst_delta, float(dev.max()))
                    if dev.max() > tol:
                        v = int(np.argmax(dev))
                        print(f"FAIL source {s} vertex {v}: delta={got.delta[v]!r} expected {want.delta[v]!r}")
                        ok = False

    dev = compare_scores(state.scores, fresh)
    print(f"max_delta_dev={worst_delta:.3e} vbc_rel={dev['vbc_rel']:.3e} ebc_rel={dev['ebc_rel']:.3e}")
    if dev["vbc_rel"] > tol or dev["ebc_rel"] > tol:
        print("FAIL scores deviate from a fresh recomputation")
        ok = False
    if g.n <= ORACLE_MAX_VERTICES:
        odev = compare_scores(fresh, oracle_scores(g))
        print(f"oracle vbc_rel={odev['vbc_rel']:.3e} ebc_rel={odev['ebc_rel']:.3e}")
        if odev["vbc_rel"] > tol or odev["ebc_rel"] > tol:
            print("FAIL recomputation disagrees with the oracle")
            ok = False
    else:
        log.info(f"n={g.n} above the oracle limit; compared against recomputation only")

    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


# ─── top ─────────────────────────────────────────────────────

def cmd_top(args) -> int:
    if args.k < 1:
        raise ValueError(f"k must be at least 1, got {args.k}")
    state = EngineState.load(args.state_dir)
    labels = state.labels
    writer = csv.writer(sys.stdout)
    if args.edges:
        ranked = sorted(state.scores.ebc.items(), key=lambda item: (-item[1], item[0]))[:args.k]
        writer.writerow(["rank", "u", "v", "ebc"])
        for rank, ((u, v), value) in enumerate(ranked, start=1):
            writer.writerow([rank, labels[u], labels[v], format_score(value)])
    else:
        order = sorted(range(len(state.scores.vbc)), key=lambda v: (-state.scores.vbc[v], v))[:args.k]
        writer.writerow(["rank", "vertex", "vbc"])
        for rank, v in enumerate(order, start=1):
            writer.writerow([rank, labels[v], format_score(float(state.scores.vbc[v]))])
    return EXIT_OK


# ─── gn ──────────────────────────────────────────────────────

def cmd_gn(args) -> int:
    state = EngineState.load(args.state_dir)
    g = state.graph
    config = EngineConfig(workers=min(len(state.partitions), max(g.n, 1)), executor=args.executor,
                          one_level_drop=not args.no_one_level)
    dendrogram = girvan_newman(g, stop=args.stop, config=config, max_steps=args.max_steps)
    out = Path(args.out) if args.out else state.root / "dendrogram.csv"
    dendrogram.write_csv(out, state.labels)
    print(f"removals={len(dendrogram.steps)} components={dendrogram.components} "
          f"incremental_s={dendrogram.elapsed:.3f} -> {out}")

    if args.reference:
        baseline = gn_reference(g, stop=args.stop, max_steps=args.max_steps)
        baseline.write_csv(out.with_name(out.stem + "_reference.csv"), state.labels)
        same = baseline.removed_edges == dendrogram.removed_edges
        ratio = baseline.elapsed / dendrogram.elapsed if dendrogram.elapsed > 0 else float("inf")
        print(f"reference_s={baseline.elapsed:.3f} speed_ratio={ratio:.2f} identical={same}")
        if not same:
            return EXIT_VERIFY_FAILED
    return EXIT_OK


# ─── bench ───────────────────────────────────────────────────

def _write_rows(path: Path, rows) -> None:
    if not rows:
        return
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].model_dump()))
        writer.writeheader()
        for row in rows:
            writer.writerow(row.model_dump())


def cmd_bench(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    modes = [m for m in args.modes.split(",") if m]
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r} (choose from {', '.join(MODES)})")
    rows, full_rows = bench_sizes(
        _int_list(args.sizes), args.events, _int_list(args.workers_list), modes,
        [k for k in args.kinds.split(",") if k], seed=args.seed,
        keep_connected=args.keep_connected, executor=args.executor,
    )
    _write_rows(out_dir / "bench.csv", rows)
    _write_rows(out_dir / "full_recompute.csv", full_rows)
    for row in rows:
        context = f" (published {row.context_speedup:g})" if row.context_speedup else ""
        print(f"n={row.n} {row.kind} {row.mode} p={row.workers}: median speedup {row.median_speedup:.1f}{context}")

    if args.scaling:
        g = small_world_graph(max(_int_list(args.sizes)), seed=args.seed)
        workers = _int_list(args.workers_list)
        per_worker = max(1, args.events // max(workers))
        scaling = strong_scaling(g, workers, args.events, args.seed) + weak_scaling(g, workers, per_worker, args.seed)
        _write_rows(out_dir / "scaling.csv", scaling)
        for row in scaling:
            print(f"{row.scaling} p={row.workers}: {row.seconds:.3f}s efficiency={row.efficiency:.2f}")
    return EXIT_OK


# ─── Parser ──────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbc", description="Streaming exact betweenness centrality engine")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def engine_flags(p):
        p.add_argument("--executor", choices=["inline", "process"], default="inline")
        p.add_argument("--no-one-level", action="store_true", help="always use the generic pivot route for removals")
        p.add_argument("--staging-dir", default=None, help="staging directory (default: $SBC_STAGING_DIR or the store directory)")

    p = sub.add_parser("init", help="build stores, manifest and baseline scores")
    p.add_argument("graph")
    p.add_argument("out_dir")
    p.add_argument("-p", "--workers", type=int, default=1)
    p.add_argument("--sigma-width", type=int, choices=SIGMA_WIDTHS, default=SIGMA_WIDTH)
    p.add_argument("--force", action="store_true")
    engine_flags(p)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("apply", help="apply an event stream to a state")
    p.add_argument("state_dir")
    p.add_argument("stream")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--online-report", action="store_true")
    engine_flags(p)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("verify", help="check a state against a fresh recomputation")
    p.add_argument("state_dir")
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("top", help="top-k vertices or edges")
    p.add_argument("state_dir")
    p.add_argument("-k", type=int, default=10)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--vertices", action="store_true")
    group.add_argument("--edges", action="store_true")
    p.set_defaults(func=cmd_top)

    p = sub.add_parser("gn", help="Girvan–Newman communities")
    p.add_argument("state_dir")
    p.add_argument("--stop", type=int, default=None, help="target number of components (default: remove every edge)")
    p.add_argument("--max-steps", type=int, default=None, help="stop after this many removals")
    p.add_argument("--reference", action="store_true", help="also run the recompute baseline and compare")
    p.add_argument("--out", default=None)
    engine_flags(p)
    p.set_defaults(func=cmd_gn)

    p = sub.add_parser("bench", help="speedup and scaling benchmarks")
    p.add_argument("--sizes", default="1000")
    p.add_argument("--events", type=int, default=100)
    p.add_argument("--workers-list", default="1")
    p.add_argument("--modes", default="MO,DO")
    p.add_argument("--kinds", default="add,remove")
    p.add_argument("--keep-connected", action="store_true")
    p.add_argument("--scaling", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--executor", choices=["inline", "process"], default="inline")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    setup_logging(args.verbose)
    try:
        return args.func(args)
    except (BetweennessError, FileNotFoundError, FileExistsError, ValueError) as exc:
        log.error(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
