"""Reference opinions and the two player objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_PLAYERS = 12


@dataclass(frozen=True, eq=False)
class ReferenceSet:
    """``P`` unit-norm reference opinions stored as rows of a ``P x D`` array."""

    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=float)
        if vecs.ndim != 2:
            raise ValueError("reference vectors must form a 2-D array")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __getitem__(self, p: int) -> np.ndarray:
        return self.vectors[p]

    def gram(self) -> np.ndarray:
        return self.vectors @ self.vectors.T


def simplex_references(P: int) -> ReferenceSet:
    """Vertices of a centered regular simplex, one per player, in ``P - 1`` dims.

    The standard simplex ``e_1 .. e_P`` is centered at its barycenter and
    expressed in the orthonormal basis obtained by Gram-Schmidt on the first
    ``P - 1`` centered vertices.  The first reference is therefore always
    ``[1, 0, ..., 0]`` and the output is bit-for-bit reproducible.
    """
    if not 2 <= P <= MAX_PLAYERS:
        raise ValueError(f"P must be in [2, {MAX_PLAYERS}], got {P}")
    centered = np.eye(P) - 1.0 / P
    basis = []
    for v in centered[: P - 1]:
        u = v.copy()
        for b in basis:
            u -= (u @ b) * b
        basis.append(u / np.linalg.norm(u))
    coords = centered @ np.array(basis).T
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    return ReferenceSet(coords)


def _blocks(x, dim: int) -> np.ndarray:
    values = getattr(x, "values", x)
    values = np.asarray(values, dtype=float)
    if values.size % dim:
        raise ValueError(f"state length {values.size} is not a multiple of D={dim}")
    return values.reshape(-1, dim)


def objective_j1(refs: ReferenceSet, p: int, x) -> float:
    """Distance between player ``p``'s reference and the mean opinion."""
    blocks = _blocks(x, refs.dim)
    return float(np.linalg.norm(refs[p] - blocks.mean(axis=0)))


def objective_j2(refs: ReferenceSet, p: int, x) -> float:
    """Projection of the summed opinions onto player ``p``'s reference.

    This is ``M`` times the projection of the mean opinion.
    """
    blocks = _blocks(x, refs.dim)
    return float(refs[p] @ blocks.sum(axis=0))


def improvement(refs: ReferenceSet, p: int, x_alg, x_base) -> float:
    """Per-individual gain in projected opinion of ``x_alg`` over ``x_base``."""
    a = _blocks(x_alg, refs.dim)
    b = _blocks(x_base, refs.dim)
    if a.shape != b.shape:
        raise ValueError("states have different shapes")
    return (objective_j2(refs, p, a) - objective_j2(refs, p, b)) / a.shape[0]
