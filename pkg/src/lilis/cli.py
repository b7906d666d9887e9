"""Command-line front end: build, query, bench, gen.

Exit status: 0 on success, 1 on data errors (unreadable input, bad
snapshot), 2 on usage errors.  The LILIS_SEED environment variable, when
set, overrides every seed flag.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import bench as bench_mod
from .geometry import Circle, Point, Rect
from .partitioner import (
    AdaptiveGrid,
    FixedGrid,
    KDTree,
    Quadtree,
    RTreeLeaves,
    auto_max_leaf,
    partition_dataset,
)
from .runtime import CircleQuery, JoinQuery, KnnQuery, PointQuery, QueryEngine, RangeQuery
from .spline import KEY_NAMES, AxisX, AxisY, ZOrder, key_tag
from .storage import (
    CsvSchema,
    Gaussian,
    Skewed,
    SnapshotError,
    SyntheticSpec,
    Uniform,
    gen_synthetic,
    generate_convex_polygons,
    ingest_csv,
    load_snapshot,
    parse_polygons,
    save_snapshot,
    write_polygons,
)

_STRATEGIES = ("fixed", "adaptive", "quadtree", "kdtree", "rtree")
_DISTS = ("uniform", "gaussian", "skewed")


def _floats(text: str, n: int, what: str) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"{what} needs {n} comma-separated numbers")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad {what}: {exc}")


def _domain(text: str) -> Rect:
    return Rect(*_floats(text, 4, "domain"))


def _seed(args) -> int:
    env = os.environ.get("LILIS_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _distribution(args):
    if args.dist == "uniform":
        return Uniform()
    if args.dist == "gaussian":
        return Gaussian(clusters=args.clusters, sigma=args.sigma)
    return Skewed(zipf_s=args.zipf_s)


def _load_points(args, seed: int):
    if args.csv:
        schema = CsvSchema(
            x_column=args.x,
            y_column=args.y,
            payload_column=args.payload,
            delimiter=args.delimiter,
            has_header=args.header,
        )
        result = ingest_csv(args.csv, schema)
        if result.skipped:
            print(f"skipped {result.skipped} malformed rows", file=sys.stderr)
        return result
    dist, _, n = args.gen.partition(":")
    if dist not in _DISTS or not n.isdigit():
        raise ValueError(f"--gen wants DIST:N with DIST in {_DISTS}, got {args.gen!r}")
    args.dist = dist
    spec = SyntheticSpec(
        distribution=_distribution(args), n=int(n), domain=args.domain, seed=seed
    )
    return gen_synthetic(spec)


def _strategy(args, n_total: int, sample_rate: float):
    max_leaf = args.max_leaf or auto_max_leaf(n_total, sample_rate, args.workers)
    return {
        "fixed": FixedGrid(args.nx, args.ny),
        "adaptive": AdaptiveGrid(args.nx, args.ny),
        "quadtree": Quadtree(max_leaf),
        "kdtree": KDTree(max_leaf),
        "rtree": RTreeLeaves(args.fanout),
    }[args.strategy]


def _key_strategy(args, xs, ys):
    if args.key == "x":
        return AxisX()
    if args.key == "y":
        return AxisY()
    domain = Rect(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))
    if domain.width <= 0 or domain.height <= 0:
        domain = Rect(domain.x_lo, domain.y_lo, domain.x_lo + 1.0, domain.y_lo + 1.0)
    return ZOrder(bits_per_dim=args.zorder_bits, domain=domain)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_build(args) -> int:
    seed = _seed(args)
    data = _load_points(args, seed)
    strategy = _strategy(args, len(data.xs), args.sample_rate)
    key_strategy = _key_strategy(args, data.xs, data.ys)
    t0 = time.perf_counter()
    dataset = partition_dataset(
        data.xs,
        data.ys,
        data.payloads,
        strategy=strategy,
        key_strategy=key_strategy,
        epsilon=args.epsilon,
        radix_bits=args.radix_bits,
        sample_rate=args.sample_rate,
        seed=seed,
    )
    build_ms = (time.perf_counter() - t0) * 1e3
    save_snapshot(dataset, args.output)

    sizes = [d.count for d in dataset.descriptors if d.count > 0]
    overflow = dataset.descriptors[-1].count
    knots = sum(len(i.knot_keys) for i in dataset.indexes if i is not None)
    print(f"snapshot: {args.output}")
    print(f"objects: {dataset.total}")
    print(f"partitions: {len(dataset.descriptors)} (non-empty {len(sizes)})")
    print(f"partition sizes: min {min(sizes)} max {max(sizes)}")
    print(f"overflow count: {overflow}")
    print(f"spline knots total: {knots}")
    print(f"build ms: {build_ms:.1f}")
    if args.compare_rtree:
        cost = bench_mod.compare_build_cost(dataset, fanout=args.fanout)
        print(f"learned index build ms: {cost['learned_ms']:.1f}")
        print(f"rtree baseline build ms: {cost['rtree_ms']:.1f}")
        print(f"build speedup: {cost['speedup']:.2f}x")
    return 0


def _format_record(rec) -> str:
    return f"{float(rec['key'])!r}\t{float(rec['x'])!r}\t{float(rec['y'])!r}\t{int(rec['payload'])}"


def cmd_query(args) -> int:
    dataset = load_snapshot(args.snapshot)
    engine = QueryEngine(dataset, workers=args.workers)
    chosen = [v for v in (args.point, args.range, args.circle, args.knn, args.join) if v]
    if len(chosen) != 1:
        raise ValueError("pick exactly one of --point, --range, --circle, --knn, --join")
    if args.point:
        spec = PointQuery(Point(*_floats(args.point, 2, "point")))
    elif args.range:
        spec = RangeQuery(Rect(*_floats(args.range, 4, "range")))
    elif args.circle:
        cx, cy, r = _floats(args.circle, 3, "circle")
        spec = CircleQuery(Circle(Point(cx, cy), r))
    elif args.knn:
        spec = KnnQuery(Point(*_floats(args.knn, 2, "knn")), k=args.k)
    else:
        polygons, skipped = parse_polygons(args.join)
        if skipped:
            print(f"skipped {skipped} malformed polygon lines", file=sys.stderr)
        spec = JoinQuery(tuple(polygons))

    t0 = time.perf_counter()
    rs = engine.execute(spec)
    elapsed_ms = (time.perf_counter() - t0) * 1e3

    if rs.found is not None:
        print("true" if rs.found else "false")
    elif rs.groups is not None:
        for pid, records in rs.groups:
            for rec in records:
                print(f"{pid}\t{_format_record(rec)}")
    elif rs.distances is not None:
        for rec, d in zip(rs.records, rs.distances):
            print(f"{_format_record(rec)}\t{float(d)!r}")
        print(f"# rounds={rs.rounds}")
    else:
        for rec in rs.records:
            print(_format_record(rec))
    print(f"# elapsed_ms={elapsed_ms:.3f}")
    return 0


def cmd_bench(args) -> int:
    seed = _seed(args)
    dataset = load_snapshot(args.snapshot)
    engine = QueryEngine(dataset, workers=args.workers)
    base = {
        "snapshot": os.path.basename(args.snapshot),
        "type": args.type,
        "key": KEY_NAMES[key_tag(dataset.key_strategy)],
        "epsilon": dataset.epsilon,
        "radix_bits": dataset.radix_bits,
        "partitions": len(dataset.descriptors),
        "skew": args.skew,
        "selectivity": args.selectivity,
        "count": args.count,
        "runs": args.runs,
        "workers": args.workers,
        "seed": seed,
    }
    rows = []
    if args.type == "knn":
        ks = [int(v) for v in args.k.split(",")]
        for k in ks:
            row = dict(base, k=k)
            row.update(bench_mod.run_knn_rounds(engine, k=k, count=args.count, skew=args.skew, seed=seed))
            if not args.throughput:
                w = bench_mod.Workload(
                    query_type="knn", k=k, count=args.count, runs=args.runs, skew=args.skew, seed=seed
                )
                row.update(bench_mod.run_latency(engine, bench_mod.gen_workload(dataset, w), args.runs))
            rows.append(row)
    else:
        w = bench_mod.Workload(
            query_type=args.type,
            selectivity=args.selectivity,
            skew=args.skew,
            count=args.count,
            runs=args.runs,
            seed=seed,
        )
        specs = bench_mod.gen_workload(dataset, w)
        row = dict(base)
        if args.throughput:
            row.update(bench_mod.run_throughput(engine, specs, workers=args.workers))
        else:
            row.update(bench_mod.run_latency(engine, specs, runs=args.runs))
        rows.append(row)
    print(bench_mod.format_table(rows))
    if args.out:
        bench_mod.write_report_csv(rows, args.out)
        print(f"# report written to {args.out}")
    return 0


def cmd_gen(args) -> int:
    seed = _seed(args)
    if args.what == "points":
        spec = SyntheticSpec(
            distribution=_distribution(args), n=args.n, domain=args.domain, seed=seed
        )
        data = gen_synthetic(spec)
        with open(args.output, "w") as fh:
            fh.write("x,y\n")
            for x, y in zip(data.xs, data.ys):
                fh.write(f"{float(x)!r},{float(y)!r}\n")
        print(f"wrote {args.n} points to {args.output}")
    else:
        polygons = generate_convex_polygons(
            args.n, args.domain, seed=seed, mean_radius=args.mean_radius
        )
        write_polygons(polygons, args.output)
        print(f"wrote {args.n} polygons to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_gen_flags(p) -> None:
    p.add_argument("--domain", type=_domain, default=Rect(0.0, 0.0, 1.0, 1.0))
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--zipf-s", dest="zipf_s", type=float, default=1.2)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lilis", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="ingest or generate points, partition, index, snapshot")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--csv", help="input CSV of points")
    src.add_argument("--gen", help="synthetic input, DIST:N (e.g. uniform:100000)")
    b.add_argument("--x", type=int, default=0, help="x column index")
    b.add_argument("--y", type=int, default=1, help="y column index")
    b.add_argument("--payload", type=int, default=None, help="payload column index")
    b.add_argument("--delimiter", default=",")
    b.add_argument("--header", action="store_true", help="skip the first CSV row")
    _add_gen_flags(b)
    b.add_argument("--strategy", choices=_STRATEGIES, default="kdtree")
    b.add_argument("--key", choices=("x", "y", "zorder"), default="x")
    b.add_argument("--epsilon", type=int, default=32)
    b.add_argument("--radix-bits", dest="radix_bits", type=int, default=10)
    b.add_argument("--sample-rate", dest="sample_rate", type=float, default=0.01)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=8)
    b.add_argument("--nx", type=int, default=8)
    b.add_argument("--ny", type=int, default=8)
    b.add_argument("--max-leaf", dest="max_leaf", type=int, default=None)
    b.add_argument("--fanout", type=int, default=64)
    b.add_argument("--zorder-bits", dest="zorder_bits", type=int, default=16)
    b.add_argument("--compare-rtree", action="store_true", help="also time an R-tree build")
    b.add_argument("-o", "--output", required=True, help="snapshot path")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="run one query against a snapshot")
    q.add_argument("snapshot")
    q.add_argument("--point", help="X,Y membership test")
    q.add_argument("--range", help="XLO,YLO,XHI,YHI rectangle query")
    q.add_argument("--circle", help="X,Y,R circle query")
    q.add_argument("--knn", help="X,Y nearest-neighbor query center")
    q.add_argument("--k", type=int, default=10, help="neighbor count for --knn")
    q.add_argument("--join", help="polygon file for a containment join")
    q.add_argument("--workers", type=int, default=8)
    q.set_defaults(func=cmd_query)

    be = sub.add_parser("bench", help="latency / throughput benchmark over a snapshot")
    be.add_argument("snapshot")
    be.add_argument("--type", choices=bench_mod.QUERY_TYPES, default="range")
    be.add_argument("--selectivity", type=float, default=1e-7)
    be.add_argument("--skew", choices=("skewed", "uniform"), default="skewed")
    be.add_argument("--k", default="10", help="comma-separated k values for --type knn")
    be.add_argument("--count", type=int, default=100)
    be.add_argument("--runs", type=int, default=50)
    be.add_argument("--throughput", action="store_true", help="jobs-per-minute mode")
    be.add_argument("--workers", type=int, default=8)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--out", help="write a CSV report here")
    be.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen", help="write synthetic points or polygons to a file")
    g.add_argument("what", choices=("points", "polygons"))
    g.add_argument("--dist", choices=_DISTS, default="uniform")
    g.add_argument("--n", type=int, required=True)
    _add_gen_flags(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mean-radius", dest="mean_radius", type=float, default=None)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 0
    except (ValueError, OSError, SnapshotError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
