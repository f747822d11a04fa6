"""Social network generators, archetypes and centrality.

Every generator returns a :class:`SocialNetwork` whose trust matrix is
row-stochastic and whose undirected skeleton is connected.  Random
generators add a self-loop at every node, draw an independent uniform(0, 1)
weight for each directed edge, normalize the rows, and regenerate (up to
``MAX_RETRIES`` times) until the skeleton is connected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.stats import rankdata

MAX_RETRIES = 100
ROW_SUM_TOL = 1e-12

ARCHETYPES = ("star", "two_cliques", "three_node_asymmetric")

# Archetype weights are fixtures, not measured quantities.  Peripheral nodes
# (star leaves, the two outer nodes of the three-node network) keep a quarter
# of their trust on themselves and give the rest to the node they hang off.
PERIPHERAL_SELF_TRUST = 0.25
THREE_NODE_CENTER_ROW = (0.1, 0.7, 0.2)  # (self, A, B)
TWO_CLIQUE_SIZES = (5, 3)


class GenerationError(RuntimeError):
    """A random generator could not produce a connected network."""


@dataclass(frozen=True, eq=False)
class SocialNetwork:
    """Row-stochastic trust matrix over ``size`` individuals.

    ``trust[i, j]`` is the trust individual ``i`` places in ``j``.
    ``adjacency`` is the unweighted skeleton the weights were drawn on.
    """

    trust: np.ndarray
    adjacency: np.ndarray
    generator: str = "manual"
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        trust = np.array(self.trust, dtype=float)
        adjacency = np.array(self.adjacency, dtype=bool)
        if trust.ndim != 2 or trust.shape[0] != trust.shape[1] or trust.shape[0] < 1:
            raise ValueError(f"trust must be a non-empty square matrix, got shape {trust.shape}")
        if adjacency.shape != trust.shape:
            raise ValueError("adjacency and trust shapes differ")
        if np.any(trust < 0):
            raise ValueError("trust entries must be nonnegative")
        if np.max(np.abs(trust.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("trust rows must sum to 1")
        if np.any((trust > 0) & ~adjacency):
            raise ValueError("positive trust on an edge missing from adjacency")
        trust.setflags(write=False)
        adjacency.setflags(write=False)
        object.__setattr__(self, "trust", trust)
        object.__setattr__(self, "adjacency", adjacency)

    @property
    def size(self) -> int:
        return self.trust.shape[0]

    def laplacian(self) -> np.ndarray:
        return np.eye(self.size) - self.trust

    def skeleton(self) -> np.ndarray:
        """Undirected skeleton without self-loops."""
        und = self.adjacency | self.adjacency.T
        np.fill_diagonal(und, False)
        return und

    def edge_count(self) -> int:
        return int(np.triu(self.skeleton(), 1).sum())

    def is_connected(self) -> bool:
        return _connected(self.adjacency)

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "trust": self.trust.tolist(),
            "adjacency": self.adjacency.tolist(),
            "generator": self.generator,
            "params": self.params,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SocialNetwork":
        net = cls(
            trust=np.asarray(data["trust"], dtype=float),
            adjacency=np.asarray(data["adjacency"], dtype=bool),
            generator=data.get("generator", "manual"),
            params=dict(data.get("params", {})),
            seed=data.get("seed"),
        )
        if "size" in data and data["size"] != net.size:
            raise ValueError(f"size field {data['size']} does not match matrix size {net.size}")
        return net

    def save(self, path) -> None:
        # json emits float repr, which round-trips every double exactly
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "SocialNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CentralityVector:
    values: np.ndarray
    percentiles: np.ndarray


def _connected(adjacency: np.ndarray) -> bool:
    n_comp, _ = connected_components(adjacency, directed=True, connection="weak")
    return n_comp == 1


def _weighted_from_skeleton(und: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    adjacency = und | np.eye(len(und), dtype=bool)
    weights = rng.random(adjacency.shape) * adjacency
    # a zero draw on a self-loop would still leave the row positive; guard the
    # measure-zero case of an all-zero row anyway
    empty = weights.sum(axis=1) == 0
    weights[empty, np.flatnonzero(empty)] = 1.0
    trust = weights / weights.sum(axis=1, keepdims=True)
    return trust, adjacency


def _retry(sample_skeleton, rng, generator, params, seed) -> SocialNetwork:
    for _ in range(MAX_RETRIES):
        und = sample_skeleton(rng)
        trust, adjacency = _weighted_from_skeleton(und, rng)
        if _connected(adjacency):
            return SocialNetwork(trust, adjacency, generator=generator, params=params, seed=seed)
    raise GenerationError(
        f"{generator}: no connected sample in {MAX_RETRIES} tries with params {params}"
    )


def _bernoulli_pairs(prob: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    upper = np.triu(rng.random(prob.shape) < prob, 1)
    return upper | upper.T


def gen_erdos_renyi(M: int, edge_prob: float, seed: int) -> SocialNetwork:
    if M < 2:
        raise ValueError("Erdos-Renyi networks need M >= 2")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    prob = np.full((M, M), float(edge_prob))
    return _retry(
        lambda rng: _bernoulli_pairs(prob, rng),
        np.random.default_rng(seed),
        "erdos_renyi",
        {"M": M, "edge_prob": edge_prob},
        seed,
    )


def _ws_skeleton(M: int, ring_degree: int, rewire_prob: float, rng: np.random.Generator) -> np.ndarray:
    und = np.zeros((M, M), dtype=bool)
    half = ring_degree // 2
    nodes = np.arange(M)
    for j in range(1, half + 1):
        und[nodes, (nodes + j) % M] = True
        und[(nodes + j) % M, nodes] = True
    # rewire each lattice edge (u, u+j) with probability rewire_prob, keeping
    # the edge count fixed and avoiding self-loops and duplicates
    for j in range(1, half + 1):
        for u in range(M):
            v = (u + j) % M
            if not und[u, v] or rng.random() >= rewire_prob:
                continue
            free = np.flatnonzero(~und[u])
            free = free[free != u]
            if free.size == 0:
                continue
            w = free[rng.integers(free.size)]
            und[u, v] = und[v, u] = False
            und[u, w] = und[w, u] = True
    return und


def gen_watts_strogatz(M: int, ring_degree: int, rewire_prob: float, seed: int) -> SocialNetwork:
    if ring_degree % 2 or ring_degree < 0:
        raise ValueError("ring_degree must be a nonnegative even integer")
    if ring_degree >= M:
        raise ValueError("ring_degree must be smaller than M")
    if not 0.0 <= rewire_prob <= 1.0:
        raise ValueError("rewire_prob must lie in [0, 1]")
    return _retry(
        lambda rng: _ws_skeleton(M, ring_degree, rewire_prob, rng),
        np.random.default_rng(seed),
        "watts_strogatz",
        {"M": M, "ring_degree": ring_degree, "rewire_prob": rewire_prob},
        seed,
    )


def gen_sbm(block_sizes: list[int], p_in: float, p_out: float, seed: int) -> SocialNetwork:
    block_sizes = [int(b) for b in block_sizes]
    if not block_sizes or min(block_sizes) < 1:
        raise ValueError("block sizes must all be >= 1")
    for name, val in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    labels = np.repeat(np.arange(len(block_sizes)), block_sizes)
    prob = np.where(labels[:, None] == labels[None, :], float(p_in), float(p_out))
    return _retry(
        lambda rng: _bernoulli_pairs(prob, rng),
        np.random.default_rng(seed),
        "sbm",
        {"block_sizes": block_sizes, "p_in": p_in, "p_out": p_out},
        seed,
    )


def block_labels(net: SocialNetwork) -> np.ndarray:
    """Block membership for an SBM network, from its recorded params."""
    sizes = net.params["block_sizes"]
    return np.repeat(np.arange(len(sizes)), sizes)


def _star(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("star needs at least 2 leaves")
    W = np.zeros((n + 1, n + 1))
    W[0, 1:] = 1.0 / n
    leaves = np.arange(1, n + 1)
    W[leaves, leaves] = PERIPHERAL_SELF_TRUST
    W[leaves, 0] = 1.0 - PERIPHERAL_SELF_TRUST
    return W


def two_clique_layout() -> dict[str, Any]:
    """Node roles of the two-cliques archetype.

    Nodes ``0..4`` form the larger clique, ``5..7`` the smaller one and node
    ``8`` is the bridge, linked to node 0 and node 5.
    """
    big, small = TWO_CLIQUE_SIZES
    return {
        "large": list(range(big)),
        "small": list(range(big, big + small)),
        "bridge": big + small,
        "contacts": (0, big),
    }


def _two_cliques() -> np.ndarray:
    lay = two_clique_layout()
    M = lay["bridge"] + 1
    adj = np.zeros((M, M), dtype=bool)
    for clique in (lay["large"], lay["small"]):
        adj[np.ix_(clique, clique)] = True
    bridge = lay["bridge"]
    adj[bridge, bridge] = True
    for c in lay["contacts"]:
        adj[c, bridge] = adj[bridge, c] = True
    # uniform rows: contacts count the bridge as one more neighbour, and the
    # bridge splits 1/3 between itself and each contact
    return adj / adj.sum(axis=1, keepdims=True)


def _three_node() -> np.ndarray:
    self_w, a_w, b_w = THREE_NODE_CENTER_ROW
    leaf = PERIPHERAL_SELF_TRUST
    return np.array(
        [
            [self_w, a_w, b_w],
            [1.0 - leaf, leaf, 0.0],
            [1.0 - leaf, 0.0, leaf],
        ]
    )


def gen_archetype(kind: str, params: dict | None = None) -> SocialNetwork:
    """Deterministic archetype networks.

    ``star`` takes ``{"n": leaves}`` (hub is node 0).  ``two_cliques`` and
    ``three_node_asymmetric`` take no parameters; in the latter node 0 is the
    center and nodes 1 and 2 are A and B.
    """
    params = dict(params or {})
    if kind == "star":
        W = _star(int(params.get("n", 4)))
        params = {"n": W.shape[0] - 1}
    elif kind == "two_cliques":
        W = _two_cliques()
    elif kind == "three_node_asymmetric":
        W = _three_node()
    else:
        raise ValueError(f"unknown archetype {kind!r}; expected one of {ARCHETYPES}")
    # renormalize so row sums are exact to rounding
    W = W / W.sum(axis=1, keepdims=True)
    adjacency = (W > 0) | (W.T > 0)
    return SocialNetwork(W, adjacency, generator=kind, params=params)


def network_from_trust(trust, generator: str = "manual") -> SocialNetwork:
    trust = np.asarray(trust, dtype=float)
    return SocialNetwork(trust, trust > 0, generator=generator)


def eigenvector_centrality(
    net: SocialNetwork, tol: float = 1e-12, max_iter: int = 10_000
) -> CentralityVector:
    """Eigenvector centrality of the symmetrized, loop-free trust matrix.

    Power iteration runs on ``A + I`` rather than ``A``; the shift has the
    same leading eigenvector but keeps bipartite graphs (stars, paths) from
    oscillating.
    """
    A = 0.5 * (net.trust + net.trust.T)
    np.fill_diagonal(A, 0.0)
    M = net.size
    x = np.full(M, 1.0 / M)
    for _ in range(max_iter):
        nxt = x + A @ x
        nxt /= nxt.sum()
        if np.abs(nxt - x).sum() < tol:
            x = nxt
            break
        x = nxt
    else:
        raise RuntimeError(f"eigenvector centrality did not converge in {max_iter} iterations")
    x = x / x.sum()
    ranks = rankdata(x, method="average")
    pct = np.full(M, 100.0) if M == 1 else 100.0 * (ranks - 1.0) / (M - 1.0)
    return CentralityVector(values=x, percentiles=pct)


def modularity(adjacency: np.ndarray, labels: np.ndarray) -> float:
    """Newman modularity of a partition of an undirected skeleton."""
    A = np.array(adjacency, dtype=float)
    np.fill_diagonal(A, 0.0)
    A = np.maximum(A, A.T)
    deg = A.sum(axis=1)
    two_m = deg.sum()
    same = labels[:, None] == labels[None, :]
    return float(((A - np.outer(deg, deg) / two_m) * same).sum() / two_m)
