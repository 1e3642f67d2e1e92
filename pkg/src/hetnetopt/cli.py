"""Command-line front end.

    hetnetopt validate --scenario FILE
    hetnetopt optimize --scenario FILE [--out CSV] [--seed N]
    hetnetopt simulate --scenario FILE [--out CSV] [--seed N] [--snapshots N] [--threads N] [--full-scale]
    hetnetopt sweep    --scenario FILE [--out CSV] [--seed N] [--snapshots N] [--threads N]

Exit codes: 0 success, 1 invalid scenario, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import replace

from . import analytic, optimize, simulate
from .exceptions import HetNetError, ValidationError
from .model import Scheme, linear_to_db
from .scenario import FULL_SCALE_SNAPSHOTS, Scenario, load, with_value

OPTIMIZE_COLUMNS = [
    "tier", "a_star", "b_star", "b_star_db", "eta_star", "active",
    "utility", "solver", "starts_used", "local_optima", "converged",
]
SCALAR_METRICS = ["mean_rate", "p5_rate", "mean_finite_utility", "zero_rate_fraction"]
SWEEP_COLUMNS = ["value", "analytic_utility"] + SCALAR_METRICS


def fmt(x) -> str:
    """Locale-independent 12-significant-digit rendering."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    if x is None:
        return ""
    return str(x)


def write_csv(header, rows, out_path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _apply_overrides(sc: Scenario, args) -> Scenario:
    sim = sc.simulation
    if getattr(args, "seed", None) is not None:
        sim = replace(sim, seed=args.seed)
    if getattr(args, "full_scale", False):
        sim = replace(sim, snapshots=FULL_SCALE_SNAPSHOTS)
    if getattr(args, "snapshots", None) is not None:
        sim = replace(sim, snapshots=args.snapshots)
    return replace(sc, simulation=sim)


def analytic_utility(sc: Scenario) -> float:
    return analytic.mean_utility(sc.link, sc.allocation, sc.model, sc.tiers)


def cmd_validate(sc: Scenario, args) -> int:
    a = analytic.assoc_prob(sc.model, sc.tiers)
    rows = [
        (k, t.lambda_k, t.p_k, t.tau_k, t.b_k, a[k])
        for k, t in enumerate(sc.tiers)
    ]
    write_csv(["tier", "lambda", "p_watts", "tau", "bias", "assoc_prob"], rows, args.out)
    return 0


def cmd_optimize(sc: Scenario, args) -> int:
    seed = args.seed if args.seed is not None else sc.simulation.seed
    scheme = sc.allocation.scheme
    if scheme is Scheme.ORTHOGONAL:
        res = optimize.optimize_orthogonal(sc.link, sc.model, sc.tiers)
    else:
        res = optimize.optimize_shared(sc.link, sc.model, sc.tiers, seed=seed)
    rows = []
    for k in range(len(sc.tiers)):
        rows.append((
            k,
            res.a_star[k],
            res.b_star[k],
            linear_to_db(res.b_star[k]),
            None if res.eta_star is None else res.eta_star[k],
            not res.inactive[k] if res.inactive else True,
            res.utility,
            res.solver.value,
            res.starts_used,
            res.local_optima,
            res.converged,
        ))
    write_csv(OPTIMIZE_COLUMNS, rows, args.out)
    return 0


def metrics_row(sc: Scenario, m: simulate.CampaignMetrics):
    k = len(sc.tiers)
    a = analytic.assoc_prob(sc.model, sc.tiers)
    header = list(SCALAR_METRICS)
    row = [getattr(m, name) for name in SCALAR_METRICS]
    for name in SCALAR_METRICS:
        header.append(f"{name}_ci95")
        row.append(m.ci_halfwidths.get(name, math.nan))
    header += ["n_users", "n_snapshots", "resampled"]
    row += [m.n_users, m.n_snapshots, m.resampled]
    for j in range(k):
        analytic_elogc = analytic.mean_log_coverage(sc.link, sc.allocation, j, sc.model, sc.tiers)
        header += [
            f"empirical_assoc_{j}", f"analytic_assoc_{j}",
            f"empirical_elogc_{j}", f"empirical_elogc_conditional_{j}", f"analytic_elogc_{j}",
        ]
        row += [m.empirical_assoc[j], a[j], m.empirical_elogc[j], m.empirical_elogc_conditional[j], analytic_elogc]
    return header, row


def _campaign(sc: Scenario, args) -> simulate.CampaignMetrics:
    progress = None if getattr(args, "quiet", False) else simulate.stderr_progress
    return simulate.run_campaign(
        sc.model,
        sc.tiers,
        sc.allocation,
        sc.simulation.window,
        n_snapshots=sc.simulation.snapshots,
        n_slots=sc.simulation.slots,
        seed=sc.simulation.seed,
        fading=sc.simulation.fading,
        threads=args.threads,
        progress=progress,
    )


def cmd_simulate(sc: Scenario, args) -> int:
    header, row = metrics_row(sc, _campaign(sc, args))
    write_csv(header, [row], args.out)
    return 0


def cmd_sweep(sc: Scenario, args) -> int:
    if sc.sweep is None:
        raise ValidationError("scenario has no sweep block")
    rows = []
    for v in sc.sweep.values():
        point = _apply_overrides(with_value(sc, float(v)), args)
        u = analytic_utility(point)
        if sc.sweep.simulate:
            m = _campaign(point, args)
            rows.append([float(v), u] + [getattr(m, name) for name in SCALAR_METRICS])
        else:
            rows.append([float(v), u] + [math.nan] * len(SCALAR_METRICS))
    write_csv(SWEEP_COLUMNS, rows, args.out)
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hetnetopt", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", required=True, help="scenario YAML file")
        sp.add_argument("--out", help="also write the CSV here")
        sp.add_argument("--seed", type=int, help="override simulation.seed (also seeds multi-start)")
        sp.add_argument("--snapshots", type=int, help="override simulation.snapshots")
        sp.add_argument("--threads", type=int, default=1, help="worker processes for campaigns")
        sp.add_argument("--full-scale", action="store_true", help=f"use {FULL_SCALE_SNAPSHOTS} snapshots")
        sp.add_argument("--quiet", action="store_true", help="no progress on stderr")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = _apply_overrides(load(args.scenario), args)
    except (HetNetError, OSError, KeyError, TypeError, ValueError) as exc:
        # anything that stops the file from loading is an invalid scenario
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](sc, args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a runtime failure, not bad input
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
