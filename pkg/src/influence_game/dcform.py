"""Difference-of-convex view of the single-player allocation problem.

With ``z`` solving ``(N_i - W~)^T``-blockwise ``z = 1_M (x) r_p`` the
objective becomes the bilinear ``z @ delta``, where ``delta`` stacks
``sum_j W_j[i] r_j`` per individual.  The bilinear products are split with
``2ab = (a + b)^2 - a^2 - b^2``.  This module evaluates those pieces so the
reformulation can be checked numerically; it does not run a DC solver.

Index convention: coordinate ``k`` of a stacked ``M * D`` vector belongs to
individual ``k // D`` and opinion component ``k % D``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .dynamics import SingularSystemError, _check_factor
from .game import ReferenceSet
from .netgen import SocialNetwork


@dataclass(frozen=True, eq=False)
class DCInstance:
    z: np.ndarray
    delta: np.ndarray
    s: np.ndarray
    player: int

    @property
    def dim(self) -> int:
        return self.z.size // self.s.size


def build_dc_instance(net: SocialNetwork, refs: ReferenceSet, p: int, allocations) -> DCInstance:
    """Solve for the consistent ``z`` and assemble ``delta`` and ``s``."""
    allocations = list(allocations)
    if len(allocations) != refs.count:
        raise ValueError(f"{len(allocations)} allocations for {refs.count} references")
    W = np.column_stack([a.weights for a in allocations])
    s = W.sum(axis=1)
    if s.sum() <= 0:
        raise SingularSystemError("total influence is zero")
    lu = lu_factor(np.diag(1.0 + s) - net.trust, check_finite=False)
    _check_factor(lu)
    # transposed system, one right-hand side per opinion component
    Z = lu_solve(lu, np.outer(np.ones(net.size), refs[p]), trans=1, check_finite=False)
    delta = W @ refs.vectors
    return DCInstance(Z.reshape(-1), delta.reshape(-1), s, p)


def _trust_term(z: np.ndarray, net: SocialNetwork, dim: int, k: int) -> float:
    i, d = divmod(k, dim)
    return float(net.trust[:, i] @ z.reshape(-1, dim)[:, d])


def _check_row(inst: DCInstance, k: int) -> None:
    if not 0 <= k < inst.z.size:
        raise IndexError(f"row {k} outside [0, {inst.z.size})")


def row_residual(inst: DCInstance, net: SocialNetwork, refs: ReferenceSet, k: int) -> float:
    """``(1 + s_i) z_k - sum_l W~[l, i] z_{l, d} - r_p[d]`` for ``(i, d) = divmod(k, D)``."""
    _check_row(inst, k)
    D = inst.dim
    i, d = divmod(k, D)
    u = _trust_term(inst.z, net, D, k)
    return float((1.0 + inst.s[i]) * inst.z[k] - u - refs[inst.player][d])


def residuals(inst: DCInstance, net: SocialNetwork, refs: ReferenceSet) -> np.ndarray:
    """All row residuals at once."""
    Z = inst.z.reshape(-1, inst.dim)
    return ((1.0 + inst.s)[:, None] * Z - net.trust.T @ Z - refs[inst.player]).reshape(-1)


def dc_objective(inst: DCInstance) -> tuple[float, float, float]:
    """``(value, convex_part, concave_part)`` with ``value = convex - concave``.

    ``convex_part = |z + delta|^2 / 2`` and ``concave_part`` collects the
    subtracted squares, so ``value`` equals ``z @ delta``.  The squares are
    accumulated exactly in rationals: in floating point their difference
    loses about ``eps * |z|^2``, which is large when influence is small.
    """
    convex = concave = Fraction(0)
    for zk, dk in zip(inst.z.tolist(), inst.delta.tolist()):
        a, b = Fraction(zk), Fraction(dk)
        convex += (a + b) ** 2
        concave += a * a + b * b
    convex /= 2
    concave /= 2
    return float(convex - concave), float(convex), float(concave)


def row_parts(
    s: np.ndarray, z: np.ndarray, net: SocialNetwork, refs: ReferenceSet, p: int, k: int
) -> tuple[float, float]:
    """Both convex pieces of row ``k`` as functions of ``(s, z)``.

    The bilinear ``s_i z_k`` is rewritten as ``((s_i + z_k)^2 - s_i^2 - z_k^2) / 2``.
    """
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    D = z.size // s.size
    i, d = divmod(k, D)
    u = _trust_term(z, net, D, k)
    convex = z[k] + 0.5 * (s[i] + z[k]) ** 2 - u - refs[p][d]
    concave = 0.5 * s[i] ** 2 + 0.5 * z[k] ** 2
    return float(convex), float(concave)


def printed_constraint(s_i: float, z_k: float, u_k: float, r_d: float) -> float:
    """The published row constraint, term for term."""
    plus = (2.0 + s_i + z_k) ** 2 + (2.0 * u_k + 2.0 * r_d) ** 2
    minus = (2.0 + 2.0 * s_i) ** 2 + z_k**2 + 4.0 * u_k**2 + 4.0 * r_d**2
    return plus - minus


def dc_decompose_row(
    inst: DCInstance, net: SocialNetwork, refs: ReferenceSet, k: int
) -> tuple[float, float, float]:
    """``(convex_g, concave_g, printed_g)`` for row ``k``.

    ``convex_g - concave_g`` reproduces :func:`row_residual`; ``printed_g`` is
    the published formula, which does not vanish at consistent points.
    """
    _check_row(inst, k)
    convex, concave = row_parts(inst.s, inst.z, net, refs, inst.player, k)
    D = inst.dim
    i, d = divmod(k, D)
    printed = printed_constraint(
        float(inst.s[i]), float(inst.z[k]), _trust_term(inst.z, net, D, k), float(refs[inst.player][d])
    )
    return convex, concave, printed
