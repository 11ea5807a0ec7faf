"""Command-line interface: validation, scheduling, attacks, and reports.

Exit codes are a stable contract: 0 success, 1 domain failure (validation
failed, model infeasible), 2 input error (unreadable file, malformed spec,
bad flag value), 3 solver resource limit reached (the incumbent and bound
are still reported and written).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from dataclasses import dataclass

import numpy as np

from .analysis import (
    budget_sweep,
    emit_report,
    simulate_queues,
    vulnerability_report,
)
from .attacks import (
    AttackInstance,
    AttackKind,
    AttackSpecError,
    brute_force_oracle,
    load_attack_spec,
    solve_attack,
    validate_attack,
)
from .fixtures import GridGenerationError, build_grid_network
from .milp import MilpStatus
from .network import (
    NetworkFormatError,
    NetworkValidationError,
    check_conservation,
    load_network,
    save_network,
    validate_network,
)
from .scheduling import (
    cycle_length,
    is_feasible,
    schedule_csv,
    solve_fixed_time,
)

OK = 0
FAILURE = 1
INPUT_ERROR = 2
RESOURCE_LIMIT = 3


@dataclass(frozen=True)
class CliConfig:
    """Resolved invocation: subcommand plus every tunable the CLI accepts."""

    subcommand: str
    network: str | None = None
    spec: str | None = None
    out: str | None = None
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    gap_tol: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None
    workers: int = 1
    seed: int = 0

    def problems(self):
        out = []
        if not (self.feas_tol > 0) or not (self.opt_tol > 0) or not (self.gap_tol > 0):
            out.append("tolerances must be positive")
        if self.node_limit is not None and self.node_limit < 1:
            out.append("--node-limit must be >= 1")
        if self.time_limit is not None and not (self.time_limit > 0):
            out.append("--time-limit must be positive")
        if self.workers < 1:
            out.append("--workers must be >= 1")
        return out


def _config(args):
    return CliConfig(
        subcommand=args.subcommand,
        network=getattr(args, "network", None),
        spec=getattr(args, "spec", None) or getattr(args, "attack", None),
        out=getattr(args, "out", None),
        feas_tol=getattr(args, "feas_tol", 1e-9),
        opt_tol=getattr(args, "opt_tol", 1e-9),
        gap_tol=getattr(args, "gap_tol", 1e-6),
        node_limit=getattr(args, "node_limit", None),
        time_limit=getattr(args, "time_limit", None),
        workers=getattr(args, "workers", 1),
        seed=getattr(args, "seed", 0),
    )


def _fail(message, code):
    print(f"error: {message}", file=sys.stderr)
    return code


def _load(path):
    return load_network(path)


def cmd_validate(args):
    try:
        net, flows = _load(args.network)
    except (OSError, NetworkFormatError) as exc:
        return _fail(exc, INPUT_ERROR)
    except NetworkValidationError as exc:
        # the file parsed; reporting broken invariants is this command's job
        print(exc)
        return FAILURE
    problems, warnings = validate_network(net, flows)
    for v in check_conservation(net, flows, tol=args.tol):
        problems.append(
            f"conservation violated on link {v.link}: "
            f"inflow {v.inflow:g} != outflow {v.outflow:g} "
            f"(magnitude {v.magnitude:g})"
        )
    for w in warnings:
        print(f"warning: {w}")
    if problems:
        for p in problems:
            print(p)
        return FAILURE
    print(f"ok: {len(net.links)} links, {len(net.intersections)} intersections, "
          f"{net.n_movements} movements")
    return OK


def cmd_schedule(args):
    try:
        net, flows = _load(args.network)
    except (OSError, NetworkFormatError, NetworkValidationError) as exc:
        return _fail(exc, INPUT_ERROR)
    sched = solve_fixed_time(net, flows, feas_tol=args.feas_tol, opt_tol=args.opt_tol)
    csv_text = schedule_csv(net, sched)
    print(csv_text, end="")
    for nid, load in zip(sched.intersection_ids, sched.intersection_loads):
        print(f"intersection {nid}: sum lambda = {load:.12g}")
    report = is_feasible(sched)
    if not report.feasible:
        worst = max(sched.intersection_loads)
        print(f"INFEASIBLE (sum lambda = {worst:g})")
        return FAILURE
    lost = net.lost_time if args.lost_time is None else args.lost_time
    t = cycle_length(sched, lost, 1.0)
    print(f"T = {t:.6f} * tau")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv_text)
    return OK


def _load_instance(args):
    """Attack instance from --spec and flag overrides; raises AttackSpecError."""
    grid = None
    if args.spec:
        instance, grid = load_attack_spec(args.spec)
    else:
        if args.kind is None:
            raise AttackSpecError("need --spec FILE or --kind")
        targets = ()
        instance = AttackInstance(
            kind=AttackKind(args.kind),
            budget=args.budget if args.budget is not None else 1,
            target_lane=args.target_lane,
            targets=targets,
        )
    if args.budget is not None and instance.budget != args.budget:
        instance = dataclasses.replace(instance, budget=args.budget)
    return instance, grid


def cmd_attack(args):
    try:
        net, flows = _load(args.network)
        instance, grid = _load_instance(args)
    except (OSError, NetworkFormatError, NetworkValidationError, AttackSpecError) as exc:
        return _fail(exc, INPUT_ERROR)
    errors = validate_attack(net, flows, instance)
    if errors:
        return _fail(errors[0], INPUT_ERROR)
    result = solve_attack(
        net,
        flows,
        instance,
        node_limit=args.node_limit,
        time_limit=args.time_limit,
        gap_tol=args.gap_tol,
    )
    if result.status is MilpStatus.INFEASIBLE:
        print("INFEASIBLE: no falsification satisfies the attack constraints")
        return FAILURE
    print(f"status: {result.status.name}")
    print(f"objective = {result.objective:.6f}")
    if result.bound is not None:
        print(f"bound = {result.bound:.6f}")
    print(f"nodes = {result.nodes}")
    compromised = ", ".join(
        f"({net.movements[p].from_link},{net.movements[p].to_link})"
        for p in result.compromised
    )
    print(f"compromised sensors: [{compromised}]")
    for p in result.compromised:
        m = net.movements[p]
        print(
            f"  f({m.from_link},{m.to_link}): {flows.values[p]:g} -> "
            f"{result.flows.values[p]:g}"
        )
    if args.oracle:
        oracle = brute_force_oracle(net, flows, instance, value_grid=grid)
        gap = abs(result.objective - oracle.objective)
        print(f"milp objective = {result.objective:.6f}")
        print(f"oracle objective = {oracle.objective:.6f}")
        print(f"gap = {gap:.6g}")
    if args.out:
        report = vulnerability_report(
            net, flows, [result], budgets=[instance.budget]
        )
        trace = simulate_queues(net, flows, result.realized_schedule, args.periods)
        emit_report(report, trace, args.out, net=net, flows=flows)
        print(f"report written to {args.out}")
    if result.status is MilpStatus.BUDGET_EXCEEDED:
        return RESOURCE_LIMIT
    return OK


def cmd_sweep(args):
    try:
        net, flows = _load(args.network)
    except (OSError, NetworkFormatError, NetworkValidationError) as exc:
        return _fail(exc, INPUT_ERROR)
    if args.spec:
        try:
            template, _ = load_attack_spec(args.spec)
        except AttackSpecError as exc:
            return _fail(exc, INPUT_ERROR)
    else:
        template = args.kind
    if args.b_max > net.n_movements:
        return _fail(
            f"budget {args.b_max} exceeds the {net.n_movements} sensors", INPUT_ERROR
        )
    rows, results = budget_sweep(
        net,
        flows,
        template,
        args.b_max,
        target_lane=args.target_lane,
        workers=args.workers,
        node_limit=args.node_limit,
        time_limit=args.time_limit,
        gap_tol=args.gap_tol,
    )
    for row in rows:
        obj = "-" if row.objective is None else f"{row.objective:.6f}"
        nv = "-" if row.nv is None else f"{row.nv:.6f}"
        print(f"B={row.budget}: objective = {obj}, nv = {nv}")
    solved = [r for r in results if r.flows is not None]
    if not solved:
        return FAILURE
    report = vulnerability_report(
        net, flows, solved,
        budgets=[row.budget for row, r in zip(rows, results) if r.flows is not None],
    )
    trace = simulate_queues(
        net, flows, solved[-1].realized_schedule, args.periods
    )
    if args.out:
        emit_report(report, trace, args.out, net=net, flows=flows)
        print(f"report written to {args.out}")
    if any(r.status is MilpStatus.BUDGET_EXCEEDED for r in results):
        return RESOURCE_LIMIT
    return OK


def cmd_simulate(args):
    try:
        net, flows = _load(args.network)
    except (OSError, NetworkFormatError, NetworkValidationError) as exc:
        return _fail(exc, INPUT_ERROR)
    if args.attack:
        try:
            instance, _ = load_attack_spec(args.attack)
        except AttackSpecError as exc:
            return _fail(exc, INPUT_ERROR)
        errors = validate_attack(net, flows, instance)
        if errors:
            return _fail(errors[0], INPUT_ERROR)
        result = solve_attack(
            net,
            flows,
            instance,
            node_limit=args.node_limit,
            time_limit=args.time_limit,
            gap_tol=args.gap_tol,
        )
        if result.status is MilpStatus.INFEASIBLE:
            print("INFEASIBLE: no falsification satisfies the attack constraints")
            return FAILURE
        sched = result.realized_schedule
    else:
        sched = solve_fixed_time(net, flows)
    trace = simulate_queues(net, flows, sched, args.periods)
    final = trace.queues[-1]
    for pos, m in enumerate(net.movements):
        print(f"q({m.from_link},{m.to_link}) = {final[pos]:g}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "heatmap.csv")
        lines = ["link,intensity"]
        lines += [
            f"{link},{trace.link_intensity[link]:.12g}"
            for link in sorted(trace.link_intensity)
        ]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"heatmap written to {path}")
    return OK


def cmd_gen_grid(args):
    try:
        net, flows = build_grid_network(
            args.rows,
            args.cols,
            seed=args.seed,
            paths_per_intersection=args.paths,
            max_load=args.max_load,
        )
    except (ValueError, GridGenerationError) as exc:
        return _fail(exc, INPUT_ERROR)
    save_network(net, flows, args.out)
    print(
        f"wrote {args.out}: {len(net.links)} links, "
        f"{len(net.intersections)} intersections, {net.n_movements} movements, "
        f"total flow {float(np.sum(flows.values)):.6g}"
    )
    return OK


def _add_solver_flags(p):
    p.add_argument("--node-limit", type=int, default=None,
                   help="stop branch and bound after this many nodes")
    p.add_argument("--time-limit", type=float, default=None,
                   help="stop branch and bound after this many seconds")
    p.add_argument("--gap-tol", type=float, default=1e-6,
                   help="relative optimality gap tolerance (default 1e-6)")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="signalvuln",
        description=(
            "Fixed-time signal scheduling and exact sensor-falsification "
            "attack analysis for traffic networks."
        ),
    )
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("validate", help="check network invariants and conservation")
    p.add_argument("network", help="network file (.net JSON)")
    p.add_argument("--tol", type=float, default=0.0,
                   help="conservation tolerance (default exact)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("schedule", help="solve the fixed-time schedule")
    p.add_argument("network")
    p.add_argument("--lost-time", type=float, default=None,
                   help="lost time L per cycle (default: the network's)")
    p.add_argument("--feas-tol", type=float, default=1e-9)
    p.add_argument("--opt-tol", type=float, default=1e-9)
    p.add_argument("--csv", default=None, help="also write the stage table here")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("attack", help="solve one falsification attack exactly")
    p.add_argument("network")
    p.add_argument("--spec", default=None, help="attack spec (JSON)")
    p.add_argument("--kind", default=None,
                   choices=[k.value for k in AttackKind],
                   help="attack kind when no --spec is given")
    p.add_argument("--budget", type=int, default=None,
                   help="override the sensor budget")
    p.add_argument("--target-lane", type=int, default=None)
    p.add_argument("--oracle", action="store_true",
                   help="also run the exhaustive oracle and print the gap")
    p.add_argument("--out", default=None, help="directory for report CSVs")
    p.add_argument("--periods", type=int, default=100,
                   help="simulation horizon for the report (default 100)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="solve the attack for budgets 0..B")
    p.add_argument("network")
    p.add_argument("--kind", default=AttackKind.WORST_NETWORK.value,
                   choices=[k.value for k in AttackKind])
    p.add_argument("--spec", default=None,
                   help="template attack spec; its budget is swept")
    p.add_argument("--b-max", type=int, required=True)
    p.add_argument("--target-lane", type=int, default=None)
    p.add_argument("--workers", type=int, default=1,
                   help="solve budgets concurrently (default 1)")
    p.add_argument("--out", default=None, help="directory for report CSVs")
    p.add_argument("--periods", type=int, default=100)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="replay a schedule as fluid queues")
    p.add_argument("network")
    p.add_argument("--attack", default=None,
                   help="attack spec; simulates the attacked schedule")
    p.add_argument("--periods", type=int, default=100)
    p.add_argument("--out", default=None, help="directory for heatmap.csv")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-grid", help="generate a seeded grid network file")
    p.add_argument("rows", type=int)
    p.add_argument("cols", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=30,
                   help="random routes per intersection (default 30)")
    p.add_argument("--max-load", type=float, default=0.85,
                   help="target worst intersection load (default 0.85)")
    p.add_argument("--out", required=True, help="output network file")
    p.set_defaults(func=cmd_gen_grid)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    problems = _config(args).problems()
    if problems:
        return _fail(problems[0], INPUT_ERROR)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
