"""Command-line frontend.

Exit codes: 0 solved or certified, 2 infeasible or uncertified, 1 any
operational problem (bad flags, unreadable files, malformed input).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import env as envmod
from . import oracle, paths, petri, planner, spec, tu
from .errors import Infeasible, ParseError, TuplanError

log = logging.getLogger("tuplan")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2
CSV_VERSION = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**32))


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------- gen


def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else _fresh_seed()
    if args.regions + args.robots > args.width * args.height:
        raise _UsageError(f"{args.regions} regions and {args.robots} robots do not fit a {args.width}x{args.height} grid")
    e = envmod.generate(args.width, args.height, args.regions, args.robots, args.density, seed)
    _write(args.output, json.dumps(envmod.to_dict(e), indent=1) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- plan


def cmd_plan(args) -> int:
    e = envmod.load(args.env)
    net = petri.grid_to_rmpn(e)
    f = spec.load_dimacs(args.cnf) if args.cnf else spec.conjunction(e.n_symbols)
    seed = args.seed if args.seed is not None else _fresh_seed()
    cfg = planner.PlanConfig(big_n=args.big_n, collision_mode=args.collision, rng_seed=seed)
    try:
        out = planner.plan(net, f, cfg)
    except Infeasible as exc:
        doc = {"status": "infeasible", "phase": exc.phase, "message": str(exc), "seed": seed}
        _write(args.output, json.dumps(doc, indent=1) + "\n")
        return EXIT_INFEASIBLE
    _write(args.output, json.dumps(out.to_dict(), indent=1) + "\n")
    if args.paths or args.plot:
        trajs = paths.outcome_trajectories(net, out)
        if args.paths:
            _write(args.paths, json.dumps({"seed": seed, "robots": paths.to_json(trajs)}) + "\n")
        if args.plot:
            d = Path(args.plot)
            d.mkdir(parents=True, exist_ok=True)
            for i in range(len(out.stages)):
                (d / f"stage_{i + 1}.svg").write_text(paths.stage_svg(e, net, out, i, trajs, seed=seed))
    return EXIT_OK


# ---------------------------------------------------------------- check-tu


def cmd_check_tu(args) -> int:
    if bool(args.net) == bool(args.env):
        raise _UsageError("give exactly one of --net or --env")
    net = petri.load(args.net) if args.net else petri.grid_to_rmpn(envmod.load(args.env))
    seed = args.seed if args.seed is not None else _fresh_seed()
    rng = np.random.default_rng(seed)
    sm = petri.is_state_machine(net)
    layouts = [tu.build_theorem1_matrix(net, check=False), tu.build_theorem2_matrix(net, args.stages, check=False)]
    if not sm:
        # the constructive partition only holds for state machines
        layouts = [
            tu.StackedMatrix(m.data, "custom", m.n_places, m.stages, m.blocks) for m in layouts
        ]
    reports = []
    for m in layouts:
        r = tu.certify(m, args.max_order, args.budget, args.samples, rng)
        if r["method"] != "bruteforce":
            log.warning("brute force too large for %s matrix %s; sampled partitions instead", m.layout, m.data.shape)
        reports.append(r)
    doc = {"state_machine": sm, "stages": args.stages, "seed": seed, "certified": all(r["certified"] for r in reports), "reports": reports}
    _write(args.output, json.dumps(doc, indent=1) + "\n")
    return EXIT_OK if doc["certified"] else EXIT_INFEASIBLE


# ---------------------------------------------------------------- bench


@dataclass
class BenchRecord:
    row: str
    scenario: int
    repeat: int
    n_symbols: int
    n_robots: int
    places: int
    transitions: int
    runtime_total: float
    runtime_lp7: float
    runtime_lp7_fixed_s: float
    cost: float
    cell_capacity: float
    n_stages: float
    rounding_iterations: float
    relative_error: float | None
    status: str
    seed: int


def _bench_one(job) -> BenchRecord:
    k, j, seed, a = job
    rng = np.random.default_rng(seed)
    side = a["side"] or envmod.scaled_side(max(a["robots"], a["symbols"]))
    n_sym = a["robots"] if a["kind"] == "reach" else a["symbols"]
    scen = envmod.generate(side, side, n_sym, a["robots"], a["density"], a["scenario_seeds"][k])
    e = envmod.resample_robots(scen, a["robots"], rng)
    net = petri.grid_to_rmpn(e)
    if a["kind"] == "reach":
        f = spec.conjunction(n_sym)
    else:
        f, _ = spec.random_formula(n_sym, a["robots"], rng)
    cfg = planner.PlanConfig(collision_mode=a["collision"], rng_seed=seed)
    rec = dict(row="run", scenario=k, repeat=j, n_symbols=n_sym, n_robots=a["robots"], places=net.n_places,
               transitions=net.n_transitions, runtime_total=0.0, runtime_lp7=0.0, runtime_lp7_fixed_s=0.0,
               cost=float("nan"), cell_capacity=float("nan"), n_stages=float("nan"),
               rounding_iterations=float("nan"), relative_error=None, status="solved", seed=seed)
    t0 = time.perf_counter()
    try:
        out = planner.plan(net, f, cfg)
        rec.update(cost=out.cost_first_term, n_stages=len(out.stages), rounding_iterations=out.rounding_iterations,
                   cell_capacity=out.s_star if cfg.collision_mode == "capacity" else out.s_bar)
        rec["runtime_lp7"] = out.timings.get("boolean_task", 0.0)
        rec["runtime_lp7_fixed_s"] = out.timings.get("reachability", 0.0) + out.timings.get("staged", 0.0)
    except Infeasible as exc:
        rec["status"] = f"infeasible:{exc.phase}"
    except TuplanError as exc:
        rec["status"] = f"error:{type(exc).__name__}"
    rec["runtime_total"] = time.perf_counter() - t0
    if a["with_oracle"] and rec["status"] == "solved":
        rep = oracle.compare(net, f, cfg, a["node_budget"])
        rec["relative_error"] = rep["relative_error"]
        if rep["budget_exhausted"]:
            rec["status"] = "solved:oracle-budget"
    if a["no_timings"]:
        rec.update(runtime_total=0.0, runtime_lp7=0.0, runtime_lp7_fixed_s=0.0)
    return BenchRecord(**rec)


def _mean_row(k, recs: list[BenchRecord]) -> BenchRecord:
    ok = [r for r in recs if r.status.startswith("solved")]

    def mean(name):
        vals = [getattr(r, name) for r in ok if getattr(r, name) is not None]
        return float(np.mean(vals)) if vals else float("nan")

    r0 = recs[0]
    status = "solved" if len(ok) == len(recs) else f"partial:{len(recs) - len(ok)}-failed"
    return BenchRecord("mean", k, -1, r0.n_symbols, r0.n_robots, int(round(np.mean([r.places for r in recs]))),
                       int(round(np.mean([r.transitions for r in recs]))), mean("runtime_total"), mean("runtime_lp7"),
                       mean("runtime_lp7_fixed_s"), mean("cost"), mean("cell_capacity"), mean("n_stages"),
                       mean("rounding_iterations"), mean("relative_error") if any(r.relative_error is not None for r in ok) else None,
                       status, r0.seed)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if v != v else f"{v:.6g}"
    return str(v)


def bench_csv(records, seed) -> str:
    buf = io.StringIO()
    buf.write(f"# tuplan-bench v{CSV_VERSION} seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(BenchRecord)]
    w.writerow(names)
    for r in records:
        d = asdict(r)
        w.writerow([_fmt(d[n]) for n in names])
    return buf.getvalue()


def run_bench(args) -> list[BenchRecord]:
    seed = args.seed
    ss = np.random.SeedSequence(seed)
    scen_ss, rep_ss = ss.spawn(2)
    scenario_seeds = [int(s) for s in scen_ss.generate_state(args.scenarios)]
    rep_seeds = rep_ss.generate_state(args.scenarios * args.repeats).reshape(args.scenarios, args.repeats)
    a = dict(kind=args.kind, robots=args.robots, symbols=args.symbols or args.robots, side=args.side,
             density=args.density, collision=args.collision, with_oracle=args.with_oracle,
             node_budget=args.node_budget, no_timings=args.no_timings, scenario_seeds=scenario_seeds)
    jobs = [(k, j, int(rep_seeds[k, j]), a) for k in range(args.scenarios) for j in range(args.repeats)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_bench_one, jobs))
    else:
        results = [_bench_one(job) for job in jobs]
    records = []
    for k in range(args.scenarios):
        recs = [r for r in results if r.scenario == k]
        records += recs + [_mean_row(k, recs)]
    return records


def cmd_bench(args) -> int:
    if args.scenarios < 1 or args.repeats < 1:
        raise _UsageError("--scenarios and --repeats must be positive")
    if args.kind == "boolean" and not args.symbols:
        raise _UsageError("--symbols is required for boolean benchmarks")
    if args.seed is None:
        args.seed = _fresh_seed()
    records = run_bench(args)
    _write(args.output, bench_csv(records, args.seed))
    return EXIT_OK


# ---------------------------------------------------------------- entry


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tuplan", description="LP-based multi-robot task assignment and path planning.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random grid environment")
    g.add_argument("--width", type=int, required=True)
    g.add_argument("--height", type=int, required=True)
    g.add_argument("--regions", type=int, required=True)
    g.add_argument("--robots", type=int, required=True)
    g.add_argument("--density", type=float, default=0.0)
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    pl = sub.add_parser("plan", help="assign tasks and plan paths")
    pl.add_argument("--env", required=True)
    pl.add_argument("--cnf", help="DIMACS mission; default: every region must be reached")
    pl.add_argument("--collision", choices=[m.value for m in planner.CollisionMode], default="staged")
    pl.add_argument("--big-n", type=float)
    pl.add_argument("--seed", type=int)
    pl.add_argument("-o", "--output")
    pl.add_argument("--paths", help="write per-robot trajectories here")
    pl.add_argument("--plot", help="directory for one SVG per stage")
    pl.set_defaults(func=cmd_plan)

    c = sub.add_parser("check-tu", help="certify total unimodularity of the constraint matrices")
    c.add_argument("--net")
    c.add_argument("--env")
    c.add_argument("--stages", type=int, default=2)
    c.add_argument("--max-order", type=int, default=6)
    c.add_argument("--budget", type=int, default=tu.DEFAULT_BUDGET)
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_check_tu)

    b = sub.add_parser("bench", help="run benchmark scenarios and write a CSV")
    b.add_argument("--kind", choices=["reach", "boolean"], default="reach")
    b.add_argument("--robots", type=int, required=True)
    b.add_argument("--symbols", type=int)
    b.add_argument("--scenarios", type=int, default=10)
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--side", type=int, help="grid side; default scales with the team")
    b.add_argument("--density", type=float, default=0.1)
    b.add_argument("--collision", choices=[m.value for m in planner.CollisionMode], default="capacity")
    b.add_argument("--with-oracle", action="store_true")
    b.add_argument("--node-budget", type=int, default=oracle.DEFAULT_NODE_BUDGET)
    b.add_argument("--no-timings", action="store_true", help="write zero runtimes for byte-stable output")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--seed", type=int)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"tuplan: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ParseError as exc:
        print(f"tuplan: parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, TuplanError, ValueError) as exc:
        print(f"tuplan: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
