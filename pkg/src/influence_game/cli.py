"""Command-line entry point.

Every command prints ``key=value`` lines on stdout.  Exit codes: 0 success,
2 invalid input, 3 network generation failure, 4 solver failure, 5 a DC
identity check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dcform, harness, netgen
from .dynamics import (
    InfluenceAllocation,
    OpinionState,
    SingularSystemError,
    assemble,
    asymptotic_state,
    hull_check,
    trajectory,
)
from .game import objective_j2, simplex_references
from .solvers import ILParams, random_allocation

EXIT_OK, EXIT_INPUT, EXIT_GENERATION, EXIT_SOLVER, EXIT_IDENTITY = 0, 2, 3, 4, 5

MODELS = {
    "er": "erdos_renyi",
    "ws": "watts_strogatz",
    "sbm": "sbm",
    "star": "star",
    "two-cliques": "two_cliques",
    "three-node": "three_node_asymmetric",
}
# generator flags and the models that accept them
MODEL_FLAGS = {
    "nodes": {"er", "ws", "star", "two-cliques", "three-node"},
    "p": {"er"},
    "k": {"ws"},
    "rewire": {"ws"},
    "blocks": {"sbm"},
    "p_in": {"sbm"},
    "p_out": {"sbm"},
}
FIXED_SIZES = {"two-cliques": 9, "three-node": 3}
STOCHASTIC = {"er", "ws", "sbm"}

RESIDUAL_TOL = 1e-8
OBJECTIVE_TOL = 1e-9
POLARIZATION_TOL = 1e-12
SPLIT_TOL = 1e-10


class InputError(Exception):
    pass


def _emit(**pairs) -> None:
    for key, value in pairs.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        print(f"{key}={value}")


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _blocks_arg(text: str) -> list[int]:
    try:
        sizes = [int(b) for b in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return sizes


def _load_network(path) -> netgen.SocialNetwork:
    try:
        return netgen.SocialNetwork.load(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read network {path}: {exc}") from exc


def _check_game(players: int, budget: float) -> None:
    if not 2 <= players <= 12:
        raise InputError("--players must be between 2 and 12")
    if not budget > 0:
        raise InputError("--budget must be positive")


# --- generate ---------------------------------------------------------------


def cmd_generate(args) -> int:
    given = {f for f in MODEL_FLAGS if getattr(args, f) is not None}
    stray = sorted(f for f in given if args.model not in MODEL_FLAGS[f])
    if stray:
        flags = ", ".join("--" + f.replace("_", "-") for f in stray)
        raise InputError(f"{flags} not valid with --model {args.model}")
    if args.model in STOCHASTIC and args.seed is None:
        raise InputError(f"--seed is required for --model {args.model}")
    try:
        net = _generate(args)
    except netgen.GenerationError as exc:
        print(f"error={exc}", file=sys.stderr)
        return EXIT_GENERATION
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    net.save(args.out)
    _emit(model=args.model, M=net.size, edges=net.edge_count(), connected=net.is_connected(), out=args.out)
    return EXIT_OK


def _generate(args) -> netgen.SocialNetwork:
    m = args.model
    if m == "er":
        return netgen.gen_erdos_renyi(_need(args.nodes, "--nodes"), _need(args.p, "--p"), args.seed)
    if m == "ws":
        return netgen.gen_watts_strogatz(
            _need(args.nodes, "--nodes"), _need(args.k, "--k"), _need(args.rewire, "--rewire"), args.seed
        )
    if m == "sbm":
        return netgen.gen_sbm(
            _need(args.blocks, "--blocks"), _need(args.p_in, "--p-in"), _need(args.p_out, "--p-out"), args.seed
        )
    if m == "star":
        n = _need(args.nodes, "--nodes")
        if n < 3:
            raise InputError("a star needs at least 3 nodes")
        return netgen.gen_archetype("star", {"n": n - 1})
    if args.nodes is not None and args.nodes != FIXED_SIZES[m]:
        raise InputError(f"--model {m} always has {FIXED_SIZES[m]} nodes")
    return netgen.gen_archetype(MODELS[m])


def _need(value, flag):
    if value is None:
        raise InputError(f"{flag} is required for this model")
    return value


# --- solve / simulate ----------------------------------------------------


def _game_setup(args):
    net = _load_network(args.network)
    _check_game(args.players, args.budget)
    refs = simplex_references(args.players)
    cfg = harness.ScenarioConfig(
        experiment="compare",
        players=args.players,
        budget=args.budget,
        seeds=[args.seed],
        il_params=ILParams(),
    )
    opponents = harness.make_opponents(cfg, net.size, args.budget, args.seed)
    return net, refs, cfg, opponents


def cmd_solve(args) -> int:
    net, refs, cfg, opponents = _game_setup(args)
    p = args.players - 1
    try:
        report = harness.run_solver(args.solver, cfg, net, refs, p, opponents, args.budget, args.seed)
    except (SingularSystemError, RuntimeError, ValueError) as exc:
        print(f"error={exc}", file=sys.stderr)
        return EXIT_SOLVER
    w = report.allocation.weights
    if args.out:
        _write_json(
            args.out,
            {
                "solver": args.solver,
                "player": p,
                "budget": args.budget,
                "seed": args.seed,
                "weights": w.tolist(),
                "objective_j2_mean": report.objective / net.size,
            },
        )
    _emit(
        solver=args.solver,
        M=net.size,
        players=args.players,
        budget=args.budget,
        objective_j2_mean=report.objective / net.size,
        iterations=report.iterations,
        converged=report.converged,
        argmax_node=int(np.argmax(w)),
        max_share=float(w.max() / args.budget),
    )
    if args.out:
        _emit(out=args.out)
    return EXIT_OK


def _load_allocation(path, M: int, budget: float) -> InfluenceAllocation:
    try:
        data = json.loads(Path(path).read_text())
        return InfluenceAllocation(np.array(data["weights"], dtype=float), budget)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read allocation {path}: {exc}") from exc


def cmd_simulate(args) -> int:
    net, refs, cfg, opponents = _game_setup(args)
    p = args.players - 1
    if args.allocation:
        ego = _load_allocation(args.allocation, net.size, args.budget)
        if ego.size != net.size:
            raise InputError("allocation length does not match the network")
    else:
        ego = harness.baseline_allocation(net.size, args.budget, args.seed)
    if args.steps < 0:
        raise InputError("--steps must be nonnegative")
    allocs = list(opponents)
    allocs.insert(p, ego)
    sys_ = assemble(net, allocs, refs)
    rng = np.random.default_rng(args.seed)
    if args.init == "zero":
        x0 = OpinionState.zeros(net.size, refs.dim)
    else:
        gamma = rng.dirichlet(np.ones(refs.count), size=net.size)
        x0 = OpinionState.from_blocks(gamma @ refs.vectors)
    states = trajectory(sys_, x0, args.steps)
    try:
        x_inf = asymptotic_state(sys_)
    except SingularSystemError as exc:
        print(f"error={exc}", file=sys.stderr)
        return EXIT_SOLVER
    final = states[-1]
    if args.out:
        _write_json(
            args.out,
            {
                "dim": refs.dim,
                "states": [s.values.tolist() for s in states],
                "asymptotic": x_inf.values.tolist(),
            },
        )
    _emit(
        M=net.size,
        steps=args.steps,
        in_hull=hull_check(refs, states),
        distance_to_asymptotic=float(np.max(np.abs(final.values - x_inf.values))),
        objective_j2_mean_final=objective_j2(refs, p, final) / net.size,
        objective_j2_mean_asymptotic=objective_j2(refs, p, x_inf) / net.size,
    )
    if args.out:
        _emit(out=args.out)
    return EXIT_OK


# --- verify-dc -------------------------------------------------------------


def cmd_verify_dc(args) -> int:
    net = _load_network(args.network)
    _check_game(args.players, args.budget)
    refs = simplex_references(args.players)
    p = args.players - 1
    allocs = [
        random_allocation(net.size, args.budget, harness.derive_seed(args.seed, q)) for q in range(refs.count)
    ]
    try:
        inst = dcform.build_dc_instance(net, refs, p, allocs)
    except SingularSystemError as exc:
        print(f"error={exc}", file=sys.stderr)
        return EXIT_SOLVER
    objective = objective_j2(refs, p, asymptotic_state(assemble(net, allocs, refs)))
    if args.perturb:
        z = inst.z.copy()
        z[0] += args.perturb
        inst = dcform.DCInstance(z, inst.delta, inst.s, p)

    res = dcform.residuals(inst, net, refs)
    value = dcform.dc_objective(inst)[0]
    split_err = printed_max = 0.0
    for k in range(inst.z.size):
        convex, concave, printed = dcform.dc_decompose_row(inst, net, refs, k)
        # the parts carry O(z_k^2) magnitude, so compare relative to them
        split = abs(convex - concave - res[k]) / max(1.0, abs(convex), abs(concave))
        split_err = max(split_err, float(split))
        printed_max = max(printed_max, abs(printed))
    scale = max(1.0, abs(value))
    checks = {
        "max_row_residual": (float(np.max(np.abs(res))), RESIDUAL_TOL),
        "objective_error": (abs(value - objective) / scale, OBJECTIVE_TOL),
        "polarization_error": (abs(value - float(inst.z @ inst.delta)) / scale, POLARIZATION_TOL),
        "decomposition_error": (split_err, SPLIT_TOL),
    }
    _emit(M=net.size, rows=inst.z.size, **{k: v for k, (v, _) in checks.items()})
    _emit(printed_formula_max_abs=printed_max)
    ok = all(v < tol for v, tol in checks.values())
    _emit(identities_hold=ok)
    return EXIT_OK if ok else EXIT_IDENTITY


# --- bench -----------------------------------------------------------------


def cmd_bench(args) -> int:
    try:
        cfg = harness.ScenarioConfig.load(args.scenario)
    except OSError as exc:
        raise InputError(f"cannot read scenario: {exc}") from exc
    if args.workers is not None:
        cfg = harness.ScenarioConfig.from_dict({**cfg.to_dict(), "workers": args.workers})
    records = harness.run_scenario(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_csv(records, out / "results.csv", timing=args.timing)
    harness.write_jsonl(records, out / "results.jsonl", timing=args.timing)
    if cfg.experiment == "centrality_study":
        harness.write_hinge_csv(records, out / "hinge.csv")
    if cfg.experiment == "budget_sweep":
        harness.write_sweep_csv(records, out / "sweep.csv")
    _emit(experiment=cfg.experiment, records=len(records),
          failed=sum(r.status != "ok" for r in records), out_dir=str(out))
    for (M, budget, solver), stats in sorted(harness.summarize(records).items()):
        print(
            f"M={M} budget={budget!r} solver={solver} n={stats['n']} "
            f"objective_mean={stats['objective_mean']!r} objective_se={stats['objective_se']!r} "
            f"improvement_mean={stats['improvement_mean']!r} improvement_se={stats['improvement_se']!r}"
        )
    return EXIT_OK


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="influence-game", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample or build a social network")
    g.add_argument("--model", required=True, choices=sorted(MODELS))
    size = g.add_mutually_exclusive_group()
    size.add_argument("--nodes", type=int)
    size.add_argument("--blocks", type=_blocks_arg, help="comma-separated SBM block sizes")
    g.add_argument("--p", type=float, help="ER edge probability")
    g.add_argument("--k", type=int, help="WS ring degree")
    g.add_argument("--rewire", type=float, help="WS rewiring probability")
    g.add_argument("--p-in", dest="p_in", type=float)
    g.add_argument("--p-out", dest="p_out", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    def game_flags(sp):
        sp.add_argument("--network", required=True)
        sp.add_argument("--players", type=int, default=3)
        sp.add_argument("--budget", type=float, required=True)
        sp.add_argument("--seed", type=int, required=True)

    s = sub.add_parser("solve", help="optimize the last player against random opponents")
    game_flags(s)
    s.add_argument("--solver", default="il", choices=harness.SOLVERS)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="run the influenced dynamics forward")
    game_flags(m)
    m.add_argument("--allocation", help="ego allocation JSON written by solve")
    m.add_argument("--steps", type=int, default=100)
    m.add_argument("--init", choices=("zero", "random"), default="zero")
    m.add_argument("--out")
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify-dc", help="check the DC reformulation identities")
    v.add_argument("--network", required=True)
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--players", type=int, default=3)
    v.add_argument("--budget", type=float, default=0.5)
    v.add_argument("--perturb", type=float, default=0.0, help="add this to z[0] before checking")
    v.set_defaults(func=cmd_verify_dc)

    b = sub.add_parser("bench", help="run a scenario file through the harness")
    b.add_argument("--scenario", required=True)
    b.add_argument("--out-dir", required=True)
    b.add_argument("--workers", type=int)
    b.add_argument("--timing", action="store_true", help="keep wall times in the result files")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, harness.ScenarioError) as exc:
        print(f"error={exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
