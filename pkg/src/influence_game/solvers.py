"""Budget allocation for one player against fixed opponents.

``il_solve`` is the iterated linear solver: with everyone's influence frozen
inside the normalization, the objective is linear in the ego allocation, so
each iteration solves a linear program over the scaled simplex in closed form
and moves a damped, momentum-accelerated step toward its vertex.
``pg_oracle`` is an independent projected-gradient reference that only ever
looks at the true objective through finite differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .dynamics import (
    InfluenceAllocation,
    SingularSystemError,
    asymptotic_state,
    assemble,
)
from .game import ReferenceSet, objective_j2
from .netgen import SocialNetwork, eigenvector_centrality

MOMENTUM_KINDS = ("nesterov", "none")


@dataclass(frozen=True)
class ILParams:
    """Iterated linear solver settings.

    The move toward the LP vertex at iteration ``k`` (counting from 0) uses
    ``max(step_size, 2 / (k + 2))``: open-loop Frank-Wolfe steps early on,
    which clear the uniform start, then a constant damped step.
    """

    step_size: float = 0.05
    max_iters: int = 500
    tol: float = 1e-8
    momentum: str = "nesterov"
    # reset the momentum sequence whenever the true objective drops
    restart: bool = True

    def __post_init__(self):
        if self.step_size <= 0 or self.max_iters <= 0 or self.tol <= 0:
            raise ValueError("step_size, max_iters and tol must be positive")
        if self.momentum not in MOMENTUM_KINDS:
            raise ValueError(f"momentum must be one of {MOMENTUM_KINDS}")


@dataclass(frozen=True)
class SolveReport:
    allocation: InfluenceAllocation
    objective: float
    iterations: int
    converged: bool
    wall_time: float
    timed_out: bool = False


def project_budget(w: np.ndarray, budget: float) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum(w) <= budget}``."""
    w = np.maximum(np.asarray(w, dtype=float), 0.0)
    if w.sum() <= budget:
        return w
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - budget
    k = np.nonzero(u - css / np.arange(1, u.size + 1) > 0)[0][-1]
    out = np.maximum(w - css[k] / (k + 1), 0.0)
    total = out.sum()
    if total > budget:
        out *= budget / total
    return out


def _with_ego(opponents, p: int, ego: InfluenceAllocation) -> list[InfluenceAllocation]:
    allocs = list(opponents)
    allocs.insert(p, ego)
    return allocs


def _factor(net: SocialNetwork, total: np.ndarray):
    return lu_factor(np.diag(1.0 + total) - net.trust, check_finite=False)


def _frozen_coeffs(lu, M: int) -> np.ndarray:
    y = lu_solve(lu, np.ones(M), trans=1, check_finite=False)
    if not np.all(np.isfinite(y)):
        raise SingularSystemError("normalized Laplacian system is singular")
    return y


def linear_coeffs(net: SocialNetwork, refs: ReferenceSet, p: int, all_allocations) -> np.ndarray:
    """Objective coefficients of player ``p``'s weights with the normalization frozen.

    Solves ``(N_i - W~)^T y = 1``; the coefficient of ``W_p[k]`` is
    ``y[k] * |r_p|^2``.
    """
    total = np.zeros(net.size)
    for a in all_allocations:
        total += a.weights
    if total.sum() <= 0:
        raise SingularSystemError("total influence is zero")
    y = _frozen_coeffs(_factor(net, total), net.size)
    return y * float(refs[p] @ refs[p])


def lp_step(c: np.ndarray, budget: float) -> InfluenceAllocation:
    """Maximize ``c @ w`` over ``{w >= 0, sum(w) <= budget}``."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    c = np.asarray(c, dtype=float)
    w = np.zeros(c.size)
    k = int(np.argmax(c))
    if c[k] > 0:
        w[k] = budget
    return InfluenceAllocation(w, budget)


def il_solve(
    net: SocialNetwork,
    refs: ReferenceSet,
    p: int,
    opponents,
    budget: float,
    params: ILParams | None = None,
    deadline: float | None = None,
) -> SolveReport:
    """Iterated linear solve for player ``p``.

    ``deadline`` is an absolute ``time.perf_counter()`` value; when it passes
    the best iterate so far is returned with ``timed_out`` set.
    """
    params = params or ILParams()
    start = time.perf_counter()
    M = net.size
    opponents = list(opponents)
    if len(opponents) != refs.count - 1:
        raise ValueError(f"expected {refs.count - 1} opponents, got {len(opponents)}")
    fixed = np.zeros(M)
    for a in opponents:
        fixed += a.weights
    # alignment of each reference with the ego's: sum_j (y . W_j)(r_p . r_j)
    align = refs.vectors @ refs[p]
    opp_align = np.delete(align, p)
    opp_matrix = np.column_stack([a.weights for a in opponents]) if opponents else np.zeros((M, 0))

    w = np.full(M, budget / M)
    w_prev = w.copy()
    t = 1.0
    best_val, best_w = -np.inf, w.copy()
    last_val = -np.inf
    converged = timed_out = False
    it = 0
    for it in range(1, params.max_iters + 1):
        beta = 0.0
        if params.momentum == "nesterov":
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_next
            t = t_next
        v = project_budget(w + beta * (w - w_prev), budget)

        y = _frozen_coeffs(_factor(net, fixed + v), M)
        val = float(align[p] * (y @ v) + (y @ opp_matrix) @ opp_align)
        if val > best_val:
            best_val, best_w = val, v.copy()
        if params.restart and val < last_val:
            t = 1.0
        last_val = val

        target = lp_step(y * align[p], budget).weights
        eta = max(params.step_size, 2.0 / (it + 1))
        w_prev, w = w, project_budget(v + eta * (target - v), budget)
        if np.max(np.abs(w - w_prev)) < params.tol:
            converged = True
            break
        if deadline is not None and time.perf_counter() > deadline:
            timed_out = True
            break

    ego = InfluenceAllocation(best_w, budget)
    x_inf = asymptotic_state(assemble(net, _with_ego(opponents, p, ego), refs))
    return SolveReport(
        allocation=ego,
        objective=objective_j2(refs, p, x_inf),
        iterations=it,
        converged=converged,
        wall_time=time.perf_counter() - start,
        timed_out=timed_out,
    )


def random_allocation(M: int, budget: float, seed: int) -> InfluenceAllocation:
    """Uniform(0, 1] draws rescaled to spend the whole budget."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    u = 1.0 - np.random.default_rng(seed).random(M)
    w = u * (budget / u.sum())
    return InfluenceAllocation(np.minimum(w, budget), budget)


def centrality_allocation(net: SocialNetwork, budget: float) -> InfluenceAllocation:
    c = eigenvector_centrality(net).values
    return InfluenceAllocation(c * (budget / c.sum()), budget)


def evaluate(net: SocialNetwork, refs: ReferenceSet, p: int, opponents, ego: InfluenceAllocation) -> float:
    """True objective of ``ego`` for player ``p``."""
    return objective_j2(refs, p, asymptotic_state(assemble(net, _with_ego(opponents, p, ego), refs)))


def pg_oracle(
    net: SocialNetwork,
    refs: ReferenceSet,
    p: int,
    opponents,
    budget: float,
    iters: int = 200,
    fd_eps: float = 1e-6,
    step0: float = 0.5,
    deadline: float | None = None,
) -> SolveReport:
    """Projected gradient ascent on the exact objective.

    Gradients come from central finite differences of
    ``objective_j2(asymptotic_state(...))``; the step is normalized and
    shrinks as ``step0 * budget / sqrt(k + 1)``.
    """
    start = time.perf_counter()
    M = net.size
    opponents = list(opponents)

    def f(w):
        return evaluate(net, refs, p, opponents, InfluenceAllocation(w, budget + 2 * fd_eps))

    w = np.full(M, budget / M)
    best_val, best_w = -np.inf, w
    timed_out = False
    k = 0
    for k in range(iters):
        val = f(w)
        if val > best_val:
            best_val, best_w = val, w.copy()
        grad = np.empty(M)
        for i in range(M):
            up, down = w.copy(), w.copy()
            up[i] += fd_eps
            down[i] = max(down[i] - fd_eps, 0.0)
            grad[i] = (f(up) - f(down)) / (up[i] - down[i])
        norm = np.linalg.norm(grad)
        if norm == 0:
            break
        w = project_budget(w + step0 * budget / np.sqrt(k + 1) * grad / norm, budget)
        if deadline is not None and time.perf_counter() > deadline:
            timed_out = True
            break
    val = f(w)
    if val > best_val:
        best_val, best_w = val, w.copy()

    ego = InfluenceAllocation(best_w, budget)
    return SolveReport(
        allocation=ego,
        objective=evaluate(net, refs, p, opponents, ego),
        iterations=k + 1,
        converged=not timed_out,
        wall_time=time.perf_counter() - start,
        timed_out=timed_out,
    )
