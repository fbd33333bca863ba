"""``ca-alloc`` command line: generate scenarios, export rates, solve, sweep Q, emit CSV reports.

Exit codes: 0 success, 2 invalid input, 3 infeasible, 4 time limit reached.
Output files never contain wall-clock times, so repeated runs are byte-identical;
timings go to stderr (or to an opt-in CSV column for ``sweep-q --timing``).
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

import numpy as np

from . import __version__
from .alloc import (
    SolverFailure,
    ValidationError,
    allocate_baseline_no_ca,
    allocate_ca,
    evolve,
)
from .linkbudget import rate_matrix
from .model import SCHEMA_VERSION, SchemaError, dumps, load_scenario, serialize_scenario
from .presets import PRESETS, generate
from .solver import INFEASIBLE, TIME_LIMIT

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_TIME_LIMIT = 4

MBPS = 1e6
SWEEP_COLUMNS = ["q", "psi", "unmet_mbps", "unused_mbps", "swaps", "status", "gap"]
REPORT_COLUMNS = ["id", "demand", "supply_ca", "supply_baseline", "unmet", "unused"]

log = logging.getLogger("ca_alloc")


class InputError(Exception):
    pass


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _mbps(x):
    return f"{x / MBPS:.6f}"


def _load(path):
    try:
        return load_scenario(path)
    except (OSError, json.JSONDecodeError, SchemaError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"cannot read scenario {path}: {exc}") from exc


def _with_overrides(s, args):
    over = {}
    if getattr(args, "q", None) is not None and args.command in ("solve",):
        over["swap_budget_q"] = args.q
    for name, attr in (("mip_gap", "mip_gap"), ("time_limit_s", "time_limit"), ("node_limit", "node_limit")):
        v = getattr(args, attr, None)
        if v is not None:
            over[name] = v
    if getattr(args, "allow_oversupply", False):
        over["no_oversupply"] = False
    if getattr(args, "no_phase2", False):
        over["lexicographic_phase2"] = False
    return s.with_solver(**over) if over else s


def _status_code(status):
    if status == TIME_LIMIT:
        return EXIT_TIME_LIMIT
    if status == INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_gen(args):
    s = generate(args.preset, args.seed)
    _write_text(args.output, serialize_scenario(s))
    return EXIT_OK


def cmd_rates(args):
    s = _load(args.scenario)
    r = rate_matrix(s)
    header = ["carrier"] + [f"user_{u.id}" for u in s.users]
    rows = [[c.id] + [_mbps(v) for v in r[i]] for i, c in enumerate(s.carriers)]
    _write_text(args.output, _csv_text(header, rows))
    return EXIT_OK


def cmd_solve(args):
    s = _with_overrides(_load(args.scenario), args)
    r = rate_matrix(s)
    fh = open(args.node_log, "w", encoding="utf-8") if args.node_log else None
    t0 = time.perf_counter()
    try:
        ca = allocate_ca(s, rates=r, node_log=fh)
    finally:
        if fh is not None:
            fh.close()
    log.info("solve finished in %.2f s (%s)", time.perf_counter() - t0, ca.status)
    doc = {
        "schema": SCHEMA_VERSION,
        "type": "solve",
        "user_ids": [u.id for u in s.users],
        "ca": ca.to_dict(),
    }
    if not args.no_baseline:
        doc["baseline"] = allocate_baseline_no_ca(s, rates=r).to_dict()
    _write_text(args.output, dumps(doc))
    return _status_code(ca.status)


def cmd_baseline(args):
    s = _load(args.scenario)
    res = allocate_baseline_no_ca(s)
    for w in res.warnings:
        log.warning(w)
    _write_text(args.output, dumps(res.to_dict()))
    return EXIT_OK


def cmd_evolve(args):
    s = _with_overrides(_load(args.scenario), args)
    trace = evolve(s, q=args.q)
    _write_text(args.output, dumps(trace.to_dict()))
    if trace.error:
        log.error(trace.error)
        return EXIT_INFEASIBLE
    return _status_code(trace.final.status)


def _sweep_one(s, q):
    t0 = time.perf_counter()
    trace = evolve(s, q=q)
    return trace, time.perf_counter() - t0


def parse_q_list(text):
    try:
        qs = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad --q list {text!r}") from None
    if not qs:
        raise InputError("--q list is empty")
    if any(q < 0 for q in qs):
        raise InputError("swap budgets must be nonnegative")
    return qs


def sweep_rows(s, qs, jobs=1, timing=False):
    """One row per q in the order given; also returns the worst exit code."""
    if jobs > 1 and len(qs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            runs = list(ex.map(_sweep_one, [s] * len(qs), qs))
    else:
        runs = [_sweep_one(s, q) for q in qs]
    rows = []
    code = EXIT_OK
    for q, (trace, wall) in zip(qs, runs):
        log.info("q=%d finished in %.2f s", q, wall)
        if trace.error:
            log.error("q=%d: %s", q, trace.error)
            code = max(code, EXIT_INFEASIBLE)
            row = [q, "", "", "", "", "error", ""]
        else:
            f = trace.final
            code = max(code, _status_code(f.status))
            row = [q, f"{f.psi:.9f}", _mbps(f.unmet_bps), _mbps(f.unused_bps), f.swap_count, f.status, f"{f.gap:.3e}"]
        if timing:
            row.append(f"{wall:.3f}")
        rows.append(row)
    return rows, code


def cmd_sweep(args):
    s = _with_overrides(_load(args.scenario), args)
    qs = parse_q_list(args.q)
    rows, code = sweep_rows(s, qs, jobs=args.jobs, timing=args.timing)
    header = SWEEP_COLUMNS + (["wall_s"] if args.timing else [])
    _write_text(args.output, _csv_text(header, rows))
    return code


def cmd_report(args):
    try:
        with open(args.result, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read result {args.result}: {exc}") from exc
    if doc.get("schema") != SCHEMA_VERSION or doc.get("type") != "solve":
        raise InputError("report needs a solve result document (written by `ca-alloc solve`)")
    if "baseline" not in doc:
        raise InputError("result document has no baseline section")
    ca, base = doc["ca"], doc["baseline"]
    d = np.asarray(ca["demand_bps"], dtype=float)
    s_ca = np.asarray(ca["supply_bps"], dtype=float)
    s_base = np.asarray(base["supply_bps"], dtype=float)
    rows = []
    for i, uid in enumerate(doc["user_ids"]):
        rows.append([
            uid,
            _mbps(d[i]),
            _mbps(s_ca[i]),
            _mbps(s_base[i]),
            _mbps(max(d[i] - s_ca[i], 0.0)),
            _mbps(max(s_ca[i] - d[i], 0.0)),
        ])
    _write_text(args.output, _csv_text(REPORT_COLUMNS, rows))
    return EXIT_OK


def _solver_opts(p):
    p.add_argument("--mip-gap", type=float, help="relative gap for optimality")
    p.add_argument("--time-limit", type=float, help="seconds per MILP solve")
    p.add_argument("--node-limit", type=int, help="branch-and-bound node cap per solve")
    p.add_argument("--allow-oversupply", action="store_true", help="drop the supply <= demand cap")
    p.add_argument("--no-phase2", action="store_true", help="skip the total-supply second pass")


def build_parser():
    ap = argparse.ArgumentParser(prog="ca-alloc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a seeded preset scenario")
    p.add_argument("--preset", choices=PRESETS, default="paper8")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("rates", help="export the achievable-rate matrix (Mbit/s)")
    p.add_argument("scenario")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("solve", help="carrier-aggregation solve plus the no-CA baseline")
    p.add_argument("scenario")
    p.add_argument("-o", "--output")
    p.add_argument("--q", type=int, help="swap budget against the scenario's previous association")
    p.add_argument("--node-log", help="write one line per branch-and-bound node here")
    p.add_argument("--no-baseline", action="store_true")
    _solver_opts(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("baseline", help="single-carrier proportional allocation only")
    p.add_argument("scenario")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evolve", help="solve each demand profile in turn under a swap budget")
    p.add_argument("scenario")
    p.add_argument("--q", type=int, help="swap budget per epoch (default: unconstrained)")
    p.add_argument("-o", "--output")
    _solver_opts(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sweep-q", help="one evolution per swap budget, as a CSV table")
    p.add_argument("scenario")
    p.add_argument("--q", default="0,1,2,3,4", help="comma-separated budgets")
    p.add_argument("--jobs", type=int, default=1, help="parallel evolutions")
    p.add_argument("--timing", action="store_true", help="add a wall_s column (breaks byte-identity)")
    p.add_argument("-o", "--output")
    _solver_opts(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="per-user CSV from a solve result")
    p.add_argument("result")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (InputError, ValidationError) as exc:
        print(f"ca-alloc: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverFailure as exc:
        print(f"ca-alloc: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE if exc.status == INFEASIBLE else EXIT_TIME_LIMIT
    except ValueError as exc:
        print(f"ca-alloc: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
