"""Command-line driver: generate scenarios, solve equilibria, reduce games
and run the precision-vs-clusters sweep.

Exit codes: 0 success, 2 solver non-convergence, 3 invalid input, 4 I/O
error.  All outputs are JSON (specs, results, reports) or CSV (traces,
sweep tables, cluster labels); nothing depends on wall-clock state, so a
fixed seed reproduces files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np
from scipy.stats import spearmanr

from . import analysis, game as gm, reduction, scenario
from .solver import SolverConfig, EquilibriumResult, coupling_violation, gvi_residual, solve_svwe, solve_vne

EXIT_OK = 0
EXIT_NONCONVERGED = 2
EXIT_INVALID = 3
EXIT_IO = 4


class _ArgumentError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="aggeq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="sample a scenario and write the game JSON")
    p_gen.add_argument("--config", help="scenario config JSON (defaults to the benchmark setup)")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--shrink", type=float, help="desk-scale factor in (0, 1]")
    p_gen.add_argument("--scale-prices", action="store_true",
                       help="scale tariff thresholds along with --shrink")
    p_gen.add_argument("--seed", type=int, help="override the config seed")
    p_gen.add_argument("--n-players", type=int, help="override the population size")
    p_gen.add_argument("--convention", choices=[gm.AGG_SUM, gm.AGG_AVERAGE])

    p_solve = sub.add_parser("solve", help="solve one equilibrium")
    p_solve.add_argument("--scenario", required=True)
    p_solve.add_argument("--mode", choices=["vne", "svwe"], required=True)
    p_solve.add_argument("--out", required=True)
    p_solve.add_argument("--step-c", type=float, default=1.0)
    p_solve.add_argument("--stop-tol", type=float, default=1e-3)
    p_solve.add_argument("--max-iters", type=int, default=200_000)
    p_solve.add_argument("--trace", help="write the iteration trace CSV here")
    p_solve.add_argument("--probes", type=int, default=64,
                         help="probe count for the equilibrium gap estimate")
    p_solve.add_argument("--probe-seed", type=int, default=0)
    p_solve.add_argument("--population-loop", action="store_true",
                         help="sweep populations one at a time instead of batched")

    p_red = sub.add_parser("reduce", help="cluster players and certify the reduction")
    p_red.add_argument("--scenario", required=True)
    p_red.add_argument("--clusters", type=int, required=True)
    p_red.add_argument("--seed", type=int, default=0)
    p_red.add_argument("--n-dirs", type=int, default=512)
    p_red.add_argument("--out", required=True, help="reduction report JSON")
    p_red.add_argument("--aux-out", help="write the auxiliary game JSON here")
    p_red.add_argument("--labels-out", help="write (player_id, cluster_id) CSV here")

    p_sweep = sub.add_parser("sweep", help="precision/time study over cluster counts")
    p_sweep.add_argument("--scenario", required=True)
    p_sweep.add_argument("--clusters", default="5,10,20,50,100",
                         help="comma-separated cluster counts")
    p_sweep.add_argument("--seeds", default="0", help="comma-separated clustering seeds")
    p_sweep.add_argument("--out-dir", required=True)
    p_sweep.add_argument("--step-c", type=float, default=1.0)
    p_sweep.add_argument("--stop-tol", type=float, default=1e-3)
    p_sweep.add_argument("--max-iters", type=int, default=200_000)
    p_sweep.add_argument("--n-dirs", type=int, default=512)
    return parser


def _cmd_generate(args) -> int:
    cfg = scenario.load_config(args.config) if args.config else scenario.ScenarioConfig()
    overrides = {key: val for key, val in
                 (("seed", args.seed), ("n_players", args.n_players),
                  ("convention", args.convention)) if val is not None}
    if overrides:
        cfg = scenario.config_from_dict({**scenario.config_to_dict(cfg), **overrides})
    if args.shrink is not None:
        cfg = scenario.shrink(cfg, args.shrink, scale_prices=args.scale_prices)
    game = scenario.generate(cfg)
    gm.save_game(game, args.out)
    margin = reduction.max_coupling_margin(game)
    print(f"generated N={game.n_players} T={game.horizon} convention={game.convention} "
          f"coupling_margin={margin:.6g} -> {args.out}")
    return EXIT_OK


def _solver_config(args) -> SolverConfig:
    return SolverConfig(step_param=args.step_c, stop_tol=args.stop_tol,
                        max_iters=args.max_iters,
                        record_trace=bool(getattr(args, "trace", None)),
                        population_loop=bool(getattr(args, "population_loop", False)))


def _write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "iterate_distance", "coupling_violation", "wall_time_s"])
        writer.writerows(trace)


def _cmd_solve(args) -> int:
    game = gm.load_game(args.scenario)
    cfg = _solver_config(args)
    result = solve_vne(game, cfg) if args.mode == "vne" else solve_svwe(game, cfg=cfg)
    gap = gvi_residual(game, result, n_probe=args.probes, seed=args.probe_seed)
    viol = coupling_violation(game, result)
    doc = result.to_dict()
    doc["gvi_residual"] = gap
    doc["coupling_violation"] = viol
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.trace and result.trace is not None:
        _write_trace(args.trace, result.trace)
    print(f"{args.mode} iterations={result.iterations} wall_time_s={result.wall_time_s:.3f} "
          f"residual={gap:.3e} coupling_violation={viol:.3e} converged={result.converged}")
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def _cmd_reduce(args) -> int:
    game = gm.load_game(args.scenario)
    if not 1 <= args.clusters <= game.n_players:
        raise ValueError("clusters must lie in [1, n_players]")
    report = reduction.reduce_game(game, args.clusters, seed=args.seed, n_dirs=args.n_dirs)
    reduction.save_report(report, args.out)
    if args.aux_out:
        gm.save_game(report.auxiliary_game, args.aux_out)
    if args.labels_out:
        with open(args.labels_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["player_id", "cluster_id"])
            writer.writerows(enumerate(report.assignment.labels.tolist()))
    print(f"reduced N={game.n_players} -> I={args.clusters} set_gap={report.set_gap:.6g} "
          f"grad_gap={report.grad_gap:.6g} error_const={report.error_const:.6g} "
          f"margin_ok={report.margin_ok} -> {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    game = gm.load_game(args.scenario)
    clusters = [int(tok) for tok in args.clusters.split(",") if tok]
    seeds = [int(tok) for tok in args.seeds.split(",") if tok]
    if not clusters or not seeds:
        raise ValueError("need at least one cluster count and one seed")
    if max(clusters) > game.n_players:
        raise ValueError("cluster count exceeds the population size")
    os.makedirs(args.out_dir, exist_ok=True)
    cfg = SolverConfig(step_param=args.step_c, stop_tol=args.stop_tol, max_iters=args.max_iters)
    # The reduced solves run the per-population schedule so the reported
    # CPU times reflect the distributed sweep whose cost grows with I.
    reduced_cfg = SolverConfig(step_param=args.step_c, stop_tol=args.stop_tol,
                               max_iters=args.max_iters, population_loop=True)

    reference = solve_vne(game, cfg)
    if not reference.converged:
        print("reference equilibrium did not converge; aborting sweep", file=sys.stderr)
        return EXIT_NONCONVERGED
    mono = gm.classify_monotonicity(game)
    consts = reduction.compute_constants(game)

    rows = []
    all_converged = True
    for seed in seeds:
        for n_clusters in clusters:
            report = reduction.reduce_game(game, n_clusters, seed=seed, n_dirs=args.n_dirs)
            reduced = solve_svwe(report.auxiliary_game, weights=report.weights, cfg=reduced_cfg)
            all_converged &= reduced.converged
            lifted = reduction.lift_profile(reduced.profile, report.assignment)
            lifted_result = EquilibriumResult(
                profile=lifted, aggregate=reduced.aggregate, duals=reduced.duals,
                iterations=reduced.iterations, wall_time_s=reduced.wall_time_s,
                residual=reduced.residual, converged=reduced.converged,
                mode="svwe", weights=np.ones(game.n_players))
            rel_err = analysis.relative_aggregate_error(reference, lifted_result)
            red_bounds = {c.kind: c for c in analysis.reduction_bounds(
                report.error_const, game.n_players, alpha=mono.alpha)}
            comb = {c.kind: c for c in analysis.combined_bounds(
                consts.agg_lipschitz, game.n_players, report.error_const,
                alpha=mono.alpha, radius=report.radius, horizon=game.horizon)}
            rows.append({
                "I": n_clusters,
                "seed": seed,
                "rel_error": rel_err,
                "cpu_time_s": reduced.wall_time_s,
                "iterations": reduced.iterations,
                "K": report.error_const,
                "reduction_bound": red_bounds["reduction_aggregate_strong"].value,
                "combined_bound": comb["combined_aggregate"].value,
                "margin_ok": report.margin_ok,
                "converged": reduced.converged,
            })

    table_path = os.path.join(args.out_dir, "sweep.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)

    xs = [r["I"] for r in rows]
    errs = [r["rel_error"] for r in rows]
    times = [r["cpu_time_s"] for r in rows]
    rate_a, rate_r2 = (float("nan"), float("nan"))
    if len(set(xs)) >= 3 and all(e > 0 for e in errs):
        rate_a, rate_r2 = analysis.fit_rate(xs, errs)
    rho = spearmanr(xs, times).statistic if len(xs) >= 2 else float("nan")
    summary = {
        "reference_iterations": reference.iterations,
        "reference_wall_time_s": reference.wall_time_s,
        "rate_exponent": rate_a,
        "rate_r2": rate_r2,
        "time_spearman": float(rho),
    }
    with open(os.path.join(args.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"sweep rows={len(rows)} rate_exponent={rate_a:.3f} (r2={rate_r2:.3f}) "
          f"time_spearman={summary['time_spearman']:.3f} -> {table_path}")
    return EXIT_OK if all_converged else EXIT_NONCONVERGED


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "reduce":
            return _cmd_reduce(args)
        return _cmd_sweep(args)
    except _ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
