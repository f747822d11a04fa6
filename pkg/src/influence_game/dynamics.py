"""Influenced DeGroot dynamics on a social network.

Players are fixed-opinion agents that place nonnegative influence weights on
individuals.  Individual ``i`` renormalizes its trust row plus the influence
it receives by ``1 + sum_p W_p[i]``, so the update stays a convex
combination.  Everything here works on ``M x D`` opinion blocks; the
``(P + M) D`` augmented matrix is never formed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.optimize import linprog

from .game import ReferenceSet
from .netgen import SocialNetwork

BUDGET_TOL = 1e-12


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when the asymptotic system has no unique solution."""


@dataclass(frozen=True, eq=False)
class InfluenceAllocation:
    """One player's nonnegative influence vector with total at most ``budget``."""

    weights: np.ndarray
    budget: float

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if np.any(w < 0):
            raise ValueError("influence weights must be nonnegative")
        if w.sum() > self.budget + BUDGET_TOL:
            raise ValueError(f"allocation total {w.sum()!r} exceeds budget {self.budget!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def size(self) -> int:
        return self.weights.size

    @classmethod
    def zeros(cls, M: int, budget: float = 1.0) -> "InfluenceAllocation":
        return cls(np.zeros(M), budget)


@dataclass(frozen=True, eq=False)
class OpinionState:
    """Stacked opinions; individual ``i`` occupies ``values[i*dim:(i+1)*dim]``."""

    values: np.ndarray
    dim: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if self.dim < 1 or v.size % self.dim:
            raise ValueError(f"length {v.size} is not a multiple of dim={self.dim}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def blocks(self) -> np.ndarray:
        return self.values.reshape(-1, self.dim)

    @property
    def size(self) -> int:
        return self.values.size // self.dim

    @classmethod
    def from_blocks(cls, blocks) -> "OpinionState":
        blocks = np.asarray(blocks, dtype=float)
        return cls(blocks.reshape(-1), blocks.shape[1])

    @classmethod
    def zeros(cls, M: int, dim: int) -> "OpinionState":
        return cls(np.zeros(M * dim), dim)


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    network: SocialNetwork
    allocations: tuple[InfluenceAllocation, ...]
    references: ReferenceSet
    n_inv_diag: np.ndarray
    _lu: tuple | None = None

    @property
    def influence(self) -> np.ndarray:
        """``M x P`` matrix whose column ``p`` is player ``p``'s weights."""
        return np.column_stack([a.weights for a in self.allocations])

    @property
    def total_influence(self) -> np.ndarray:
        return self.n_inv_diag - 1.0

    def system_matrix(self) -> np.ndarray:
        """``N_i - W~``, equal to ``diag(sum_p W_p) + L``."""
        return np.diag(self.n_inv_diag) - self.network.trust


def assemble(
    net: SocialNetwork, allocations, refs: ReferenceSet
) -> AugmentedSystem:
    allocations = tuple(allocations)
    if len(allocations) != refs.count:
        raise ValueError(f"{len(allocations)} allocations for {refs.count} references")
    for a in allocations:
        if a.size != net.size:
            raise ValueError(f"allocation of length {a.size} for network of size {net.size}")
    total = np.zeros(net.size)
    for a in allocations:
        total += a.weights
    n_inv = 1.0 + total
    n_inv.setflags(write=False)
    lu = None
    if total.sum() > 0:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            lu = lu_factor(np.diag(n_inv) - net.trust, check_finite=False)
    return AugmentedSystem(net, allocations, refs, n_inv, lu)


def _check_state(sys: AugmentedSystem, x: OpinionState) -> None:
    if x.dim != sys.references.dim:
        raise ValueError(f"state dim {x.dim} != reference dim {sys.references.dim}")
    if x.size != sys.network.size:
        raise ValueError(f"state covers {x.size} individuals, network has {sys.network.size}")


def step(sys: AugmentedSystem, x: OpinionState) -> OpinionState:
    """One synchronous update of every individual's opinion."""
    _check_state(sys, x)
    pulled = sys.influence @ sys.references.vectors + sys.network.trust @ x.blocks
    return OpinionState.from_blocks(pulled / sys.n_inv_diag[:, None])


def asymptotic_weights(sys: AugmentedSystem) -> np.ndarray:
    """Solve ``(N_i - W~) Y = [W_1 ... W_P]``; row ``i`` of ``Y`` gives the
    weight each reference carries in individual ``i``'s limit opinion."""
    if sys._lu is None:
        raise SingularSystemError("total influence is zero; use consensus_state instead")
    _check_factor(sys._lu)
    return lu_solve(sys._lu, sys.influence, check_finite=False)


def _check_factor(lu) -> None:
    pivots = np.abs(np.diag(lu[0]))
    if not np.all(np.isfinite(pivots)) or pivots.min() <= 1e-14 * max(pivots.max(), 1.0):
        raise SingularSystemError(
            "asymptotic system is singular (a component of the network receives no influence)"
        )


def asymptotic_state(sys: AugmentedSystem) -> OpinionState:
    """Limit of :func:`step` iterated from any starting state."""
    return OpinionState.from_blocks(asymptotic_weights(sys) @ sys.references.vectors)


def consensus_state(
    net: SocialNetwork, x0: OpinionState, tol: float = 1e-12, max_iter: int = 100_000
) -> OpinionState:
    """Opinions reached under plain DeGroot averaging with no players."""
    if x0.size != net.size:
        raise ValueError("initial state does not match network size")
    X = x0.blocks.copy()
    T = net.trust
    for _ in range(max_iter):
        nxt = T @ X
        if np.max(np.abs(nxt - X)) < tol:
            return OpinionState.from_blocks(nxt)
        X = nxt
    raise RuntimeError(f"no consensus after {max_iter} iterations (periodic chain?)")


def trajectory(sys: AugmentedSystem, x0: OpinionState, steps: int) -> list[OpinionState]:
    states = [x0]
    for _ in range(steps):
        states.append(step(sys, states[-1]))
    return states


def barycentric(refs: ReferenceSet, point: np.ndarray) -> np.ndarray | None:
    """Barycentric coordinates of ``point`` when the references are affinely
    independent and span their ambient space; ``None`` otherwise."""
    A = np.vstack([refs.vectors.T, np.ones(refs.count)])
    if A.shape[0] != A.shape[1] or np.linalg.matrix_rank(A) < A.shape[0]:
        return None
    return np.linalg.solve(A, np.append(point, 1.0))


def in_hull(refs: ReferenceSet, point: np.ndarray, tol: float = 1e-9) -> bool:
    gamma = barycentric(refs, point)
    if gamma is not None:
        return bool(gamma.min() >= -tol)
    # general case: is there gamma >= 0, sum gamma = 1, R^T gamma = point?
    A_eq = np.vstack([refs.vectors.T, np.ones(refs.count)])
    b_eq = np.append(point, 1.0)
    res = linprog(np.zeros(refs.count), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return False
    return bool(np.max(np.abs(A_eq @ res.x - b_eq)) <= tol)


def hull_check(refs: ReferenceSet, trajectory, tol: float = 1e-9) -> bool:
    """True iff every individual opinion in every state lies in the reference hull."""
    for x in trajectory:
        for point in x.blocks:
            if not in_hull(refs, point, tol):
                return False
    return True
