"""Declarative experiment runner.

A :class:`ScenarioConfig` names an experiment, a network generator and the
game settings.  Each ``run_*`` function expands it into independent
``(size, budget, seed)`` tasks, runs them (optionally in worker processes) and
returns :class:`RunRecord` rows in a deterministic order.  All randomness is
derived from the configured seeds.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import netgen
from .dynamics import InfluenceAllocation, OpinionState, assemble, asymptotic_state, consensus_state
from .game import ReferenceSet, improvement, objective_j2, simplex_references
from .solvers import (
    ILParams,
    SolveReport,
    centrality_allocation,
    il_solve,
    pg_oracle,
    random_allocation,
)

EXPERIMENTS = ("compare", "scaling", "budget_sweep", "centrality_study", "archetype")
SOLVERS = ("il", "pg_oracle", "random", "centrality", "zero")
OPPONENT_POLICIES = ("random", "zero")
GENERATORS = ("erdos_renyi", "watts_strogatz", "sbm") + netgen.ARCHETYPES

DEFAULT_SCALING_SIZES = [10, 50, 100, 200, 500, 1000]
DEFAULT_SWEEP_BUDGETS = [0.1, 0.5, 1.0, 1.5]

# stream tags for seed derivation
_NETWORK, _BASELINE, _OPPONENT = 0, 1, 2


class ScenarioError(ValueError):
    """Scenario file does not match the ScenarioConfig schema."""


def derive_seed(seed: int, *tags: int) -> int:
    """Independent child seed for ``(seed, *tags)``."""
    return int(np.random.SeedSequence([int(seed), *[int(t) for t in tags]]).generate_state(1)[0])


@dataclass(frozen=True)
class ScenarioConfig:
    experiment: str
    generator: str = "erdos_renyi"
    generator_params: dict[str, Any] = field(default_factory=dict)
    M: int = 10
    players: int = 3
    budget: float = 0.5
    ego_solver: str = "il"
    opponent_policy: str = "random"
    seeds: list[int] = field(default_factory=lambda: [0])
    il_params: ILParams = field(default_factory=ILParams)
    # extensions beyond the single ego solver
    solvers: list[str] | None = None
    sizes: list[int] | None = None
    budgets: list[float] | None = None
    pg_iters: int = 200
    oracle_max_M: int = 200
    timeout: float = 300.0
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ScenarioError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.generator not in GENERATORS:
            raise ScenarioError(f"generator must be one of {GENERATORS}, got {self.generator!r}")
        if self.players < 2:
            raise ScenarioError("players must be >= 2")
        if not self.budget > 0:
            raise ScenarioError("budget must be positive")
        if not self.seeds:
            raise ScenarioError("seeds must be non-empty")
        if self.ego_solver not in SOLVERS:
            raise ScenarioError(f"ego_solver must be one of {SOLVERS}")
        for s in self.solvers or []:
            if s not in SOLVERS:
                raise ScenarioError(f"unknown solver {s!r}")
        if self.opponent_policy not in OPPONENT_POLICIES:
            raise ScenarioError(f"opponent_policy must be one of {OPPONENT_POLICIES}")
        if any(b <= 0 for b in self.budgets or []):
            raise ScenarioError("budgets must be positive")

    @property
    def solver_list(self) -> list[str]:
        return list(self.solvers) if self.solvers else [self.ego_solver]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["il_params"] = asdict(self.il_params)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        if "experiment" not in data:
            raise ScenarioError("scenario needs an 'experiment' field")
        data = dict(data)
        try:
            data["il_params"] = ILParams(**data.get("il_params", {}))
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad il_params: {exc}") from exc
        try:
            return cls(**data)
        except TypeError as exc:
            raise ScenarioError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ScenarioError("scenario must be a JSON object")
        return cls.from_dict(data)


@dataclass
class RunRecord:
    experiment: str
    generator: str
    M: int
    players: int
    budget: float
    seed: int
    solver: str
    baseline: str
    objective_j2_mean: float | None = None
    baseline_j2_mean: float | None = None
    improvement: float | None = None
    drift: float | None = None
    iterations: int | None = None
    converged: bool | None = None
    status: str = "ok"
    wall_time: float | None = None
    allocation: list[float] | None = None
    centrality_percentiles: list[float] | None = None
    final_opinions: list[float] | None = None
    generator_params: dict[str, Any] = field(default_factory=dict)


CSV_COLUMNS = [
    "experiment",
    "generator",
    "M",
    "players",
    "budget",
    "seed",
    "solver",
    "baseline",
    "objective_j2_mean",
    "baseline_j2_mean",
    "improvement",
    "drift",
    "iterations",
    "converged",
    "status",
    "wall_time",
]
_INT_COLS = {"M", "players", "seed", "iterations"}
_FLOAT_COLS = {"budget", "objective_j2_mean", "baseline_j2_mean", "improvement", "drift", "wall_time"}


# --- scenario building blocks ----------------------------------------------


def make_network(cfg: ScenarioConfig, M: int, seed: int) -> netgen.SocialNetwork:
    gp = dict(cfg.generator_params)
    net_seed = derive_seed(seed, _NETWORK, M)
    if cfg.generator == "erdos_renyi":
        return netgen.gen_erdos_renyi(M, gp.get("edge_prob", 0.6), net_seed)
    if cfg.generator == "watts_strogatz":
        return netgen.gen_watts_strogatz(
            M, gp.get("ring_degree", 4), gp.get("rewire_prob", 0.1), net_seed
        )
    if cfg.generator == "sbm":
        blocks = gp.get("block_sizes") or [M // 2, M - M // 2]
        return netgen.gen_sbm(blocks, gp.get("p_in", 0.3), gp.get("p_out", 0.05), net_seed)
    return netgen.gen_archetype(cfg.generator, gp)


def make_opponents(cfg: ScenarioConfig, M: int, budget: float, seed: int) -> list[InfluenceAllocation]:
    if cfg.opponent_policy == "zero":
        return [InfluenceAllocation.zeros(M, budget) for _ in range(cfg.players - 1)]
    return [
        random_allocation(M, budget, derive_seed(seed, _OPPONENT, M, q))
        for q in range(cfg.players - 1)
    ]


def baseline_allocation(M: int, budget: float, seed: int) -> InfluenceAllocation:
    return random_allocation(M, budget, derive_seed(seed, _BASELINE, M))


def limit_state(net, allocations, refs: ReferenceSet) -> OpinionState:
    """Asymptotic opinions; with no influence at all, the consensus reached from
    the origin."""
    if sum(a.weights.sum() for a in allocations) > 0:
        return asymptotic_state(assemble(net, allocations, refs))
    return consensus_state(net, OpinionState.zeros(net.size, refs.dim))


def run_solver(
    name: str,
    cfg: ScenarioConfig,
    net,
    refs: ReferenceSet,
    p: int,
    opponents,
    budget: float,
    seed: int,
    deadline: float | None = None,
) -> SolveReport:
    M = net.size
    if name == "il":
        return il_solve(net, refs, p, opponents, budget, cfg.il_params, deadline=deadline)
    if name == "pg_oracle":
        return pg_oracle(net, refs, p, opponents, budget, iters=cfg.pg_iters, deadline=deadline)
    start = time.perf_counter()
    if name == "random":
        ego = baseline_allocation(M, budget, seed)
    elif name == "centrality":
        ego = centrality_allocation(net, budget)
    elif name == "zero":
        ego = InfluenceAllocation.zeros(M, budget)
    else:
        raise ValueError(f"unknown solver {name!r}")
    allocs = list(opponents)
    allocs.insert(p, ego)
    x = limit_state(net, allocs, refs)
    return SolveReport(ego, objective_j2(refs, p, x), 0, True, time.perf_counter() - start)


def _solve_record(cfg, net, refs, p, opponents, budget, seed, solver, x_base, baseline_name,
                  M=None) -> tuple[RunRecord, OpinionState | None]:
    M = net.size
    rec = RunRecord(
        experiment=cfg.experiment,
        generator=cfg.generator,
        M=M,
        players=cfg.players,
        budget=budget,
        seed=seed,
        solver=solver,
        baseline=baseline_name,
        generator_params=dict(net.params) if cfg.generator in netgen.ARCHETYPES else dict(cfg.generator_params),
    )
    try:
        report = run_solver(
            solver, cfg, net, refs, p, opponents, budget, seed,
            deadline=time.perf_counter() + cfg.timeout,
        )
    except Exception as exc:  # one failed solve must not sink the batch
        rec.status = f"error: {type(exc).__name__}: {exc}"
        return rec, None
    allocs = list(opponents)
    allocs.insert(p, report.allocation)
    x = limit_state(net, allocs, refs)
    rec.objective_j2_mean = objective_j2(refs, p, x) / M
    rec.baseline_j2_mean = objective_j2(refs, p, x_base) / M
    rec.improvement = improvement(refs, p, x, x_base)
    rec.drift = float(np.linalg.norm(x.blocks.mean(axis=0) - x_base.blocks.mean(axis=0)))
    rec.iterations = report.iterations
    rec.converged = report.converged
    rec.wall_time = report.wall_time
    rec.allocation = report.allocation.weights.tolist()
    if report.timed_out:
        rec.status = "timeout"
    return rec, x


# --- task functions (module level so they pickle) ---------------------------


def _compare_task(cfg: ScenarioConfig, M: int, budget: float, seed: int, solvers) -> list[RunRecord]:
    refs = simplex_references(cfg.players)
    p = cfg.players - 1
    try:
        net = make_network(cfg, M, seed)
    except netgen.GenerationError as exc:
        return [
            RunRecord(cfg.experiment, cfg.generator, M, cfg.players, budget, seed, s, "random",
                      status=f"error: {exc}")
            for s in solvers
        ]
    M = net.size
    opponents = make_opponents(cfg, M, budget, seed)
    allocs = list(opponents)
    allocs.insert(p, baseline_allocation(M, budget, seed))
    x_base = limit_state(net, allocs, refs)
    return [
        _solve_record(cfg, net, refs, p, opponents, budget, seed, s, x_base, "random")[0]
        for s in solvers
    ]


def _sweep_task(cfg: ScenarioConfig, M: int, budget: float, seed: int, solvers) -> list[RunRecord]:
    refs = simplex_references(cfg.players)
    p = cfg.players - 1
    net = make_network(cfg, M, seed)
    opponents = make_opponents(cfg, net.size, budget, seed)
    x_zero = consensus_state(net, OpinionState.zeros(net.size, refs.dim))
    return [
        _solve_record(cfg, net, refs, p, opponents, budget, seed, s, x_zero, "zero_influence")[0]
        for s in solvers
    ]


def _centrality_task(cfg: ScenarioConfig, M: int, budget: float, seed: int, solvers) -> list[RunRecord]:
    records = _compare_task(cfg, M, budget, seed, solvers)
    net = make_network(cfg, M, seed)
    pct = netgen.eigenvector_centrality(net).percentiles.tolist()
    for rec in records:
        rec.centrality_percentiles = pct
    return records


def _run_tasks(func, cfg: ScenarioConfig, tasks) -> list[RunRecord]:
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(func, *zip(*[(cfg, *t) for t in tasks])))
    else:
        chunks = [func(cfg, *t) for t in tasks]
    records = [r for chunk in chunks for r in chunk]
    return sort_records(records, cfg.solver_list)


def sort_records(records: list[RunRecord], solver_order=SOLVERS) -> list[RunRecord]:
    order = {s: i for i, s in enumerate(solver_order)}
    return sorted(records, key=lambda r: (r.M, r.budget, r.seed, order.get(r.solver, len(order))))


# --- experiments -------------------------------------------------------------


def run_compare(cfg: ScenarioConfig) -> list[RunRecord]:
    """Every configured solver against the same networks, opponents and random baseline."""
    sizes = cfg.sizes or [cfg.M]
    tasks = [(M, cfg.budget, s, cfg.solver_list) for M in sizes for s in cfg.seeds]
    return _run_tasks(_compare_task, cfg, tasks)


def run_scaling(cfg: ScenarioConfig) -> list[RunRecord]:
    """IL wall time across network sizes; the oracle only runs up to ``oracle_max_M``."""
    sizes = sorted(cfg.sizes or DEFAULT_SCALING_SIZES)
    solvers = cfg.solvers or ["il"]
    tasks = []
    for M in sizes:
        use = [s for s in solvers if s != "pg_oracle" or M <= cfg.oracle_max_M]
        tasks += [(M, cfg.budget, s, use) for s in cfg.seeds]
    return _run_tasks(_compare_task, cfg, tasks)


def run_budget_sweep(cfg: ScenarioConfig) -> list[RunRecord]:
    """IL improvement over the zero-influence opinion for each (size, budget)."""
    if cfg.generator != "watts_strogatz":
        raise ScenarioError("budget_sweep uses the watts_strogatz generator")
    sizes = cfg.sizes or [cfg.M]
    budgets = cfg.budgets or DEFAULT_SWEEP_BUDGETS
    solvers = cfg.solvers or ["il"]
    tasks = [(M, lam, s, solvers) for M in sizes for lam in budgets for s in cfg.seeds]
    return _run_tasks(_sweep_task, cfg, tasks)


def run_centrality_study(cfg: ScenarioConfig) -> list[RunRecord]:
    """IL against centrality-proportional allocation on SBM networks."""
    if cfg.generator != "sbm":
        raise ScenarioError("centrality_study uses the sbm generator")
    solvers = cfg.solvers or ["il", "centrality"]
    tasks = [(cfg.M, cfg.budget, s, solvers) for s in cfg.seeds]
    return _run_tasks(_centrality_task, cfg, tasks)


ARCHETYPE_RUNS = (
    ("star", {"n": 4}),
    ("two_cliques", {}),
    ("three_node_asymmetric", {}),
)


def run_archetypes(seed: int = 0, il_params: ILParams | None = None) -> list[RunRecord]:
    """Player 3 optimized with IL against two random players, budget 1.0."""
    records = []
    for kind, params in ARCHETYPE_RUNS:
        cfg = ScenarioConfig(
            experiment="archetype",
            generator=kind,
            generator_params=params,
            players=3,
            budget=1.0,
            seeds=[seed],
            il_params=il_params or ILParams(),
        )
        net = make_network(cfg, 0, seed)
        refs = simplex_references(3)
        opponents = make_opponents(cfg, net.size, cfg.budget, seed)
        allocs = list(opponents)
        allocs.insert(2, baseline_allocation(net.size, cfg.budget, seed))
        x_base = limit_state(net, allocs, refs)
        rec, x = _solve_record(cfg, net, refs, 2, opponents, cfg.budget, seed, "il", x_base, "random")
        if x is not None:
            rec.final_opinions = x.values.tolist()
        records.append(rec)
    return records


def run_scenario(cfg: ScenarioConfig) -> list[RunRecord]:
    if cfg.experiment == "compare":
        return run_compare(cfg)
    if cfg.experiment == "scaling":
        return run_scaling(cfg)
    if cfg.experiment == "budget_sweep":
        return run_budget_sweep(cfg)
    if cfg.experiment == "centrality_study":
        return run_centrality_study(cfg)
    return run_archetypes(seed=cfg.seeds[0], il_params=cfg.il_params)


def reevaluate(rec: RunRecord, cfg: ScenarioConfig) -> float:
    """Recompute a record's per-individual objective from its stored allocation."""
    net = make_network(cfg, rec.M, rec.seed)
    refs = simplex_references(rec.players)
    p = rec.players - 1
    allocs = make_opponents(cfg, net.size, rec.budget, rec.seed)
    allocs.insert(p, InfluenceAllocation(np.array(rec.allocation), rec.budget))
    return objective_j2(refs, p, limit_state(net, allocs, refs)) / net.size


# --- summaries and plot data -------------------------------------------------


def summarize(records: list[RunRecord]) -> dict[tuple, dict[str, float]]:
    """Mean, standard error and count of objective and improvement per
    (M, budget, solver), over records with status ok."""
    groups: dict[tuple, list[RunRecord]] = {}
    for r in records:
        if r.status == "ok":
            groups.setdefault((r.M, r.budget, r.solver), []).append(r)
    out = {}
    for key, rs in groups.items():
        obj = np.array([r.objective_j2_mean for r in rs])
        imp = np.array([r.improvement for r in rs])
        n = len(rs)
        se = (lambda a: float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0)
        out[key] = {
            "n": n,
            "objective_mean": float(obj.mean()),
            "objective_se": se(obj),
            "improvement_mean": float(imp.mean()),
            "improvement_se": se(imp),
        }
    return out


def hinge_pairs(records: list[RunRecord], solver: str = "il") -> list[tuple[float, float]]:
    """(centrality percentile, allocation) for every node of every network."""
    pairs = []
    for r in records:
        if r.solver == solver and r.status == "ok" and r.centrality_percentiles is not None:
            pairs.extend(zip(r.centrality_percentiles, r.allocation))
    return pairs


def decile_shares(pairs) -> dict[str, float]:
    """Fraction of total allocation going to the top decile and to the bottom
    five deciles of centrality."""
    pct = np.array([p for p, _ in pairs])
    alloc = np.array([a for _, a in pairs])
    total = alloc.sum()
    return {
        "top_decile": float(alloc[pct >= 90].sum() / total),
        "bottom_five_deciles": float(alloc[pct < 50].sum() / total),
    }


# --- persistence -----------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(records, path, timing: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            row = asdict(r)
            if not timing:
                row["wall_time"] = None
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def _parse(col: str, text: str):
    if text == "":
        return None
    if col in _INT_COLS:
        return int(text)
    if col in _FLOAT_COLS:
        return float(text)
    if col == "converged":
        return text == "true"
    return text


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{c: _parse(c, row[c]) for c in CSV_COLUMNS} for row in csv.DictReader(fh)]


def write_jsonl(records, path, timing: bool = True) -> None:
    with open(path, "w") as fh:
        for r in records:
            row = asdict(r)
            if not timing:
                row["wall_time"] = None
            fh.write(json.dumps(row) + "\n")


def read_jsonl(path) -> list[RunRecord]:
    with open(path) as fh:
        return [RunRecord(**json.loads(line)) for line in fh if line.strip()]


def write_hinge_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["percentile", "allocation"])
        for pct, alloc in hinge_pairs(records):
            writer.writerow([repr(float(pct)), repr(float(alloc))])


def write_sweep_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["M", "budget", "improvement"])
        for r in records:
            if r.status == "ok":
                writer.writerow([r.M, repr(r.budget), repr(r.improvement)])
