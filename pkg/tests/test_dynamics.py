import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_allocations, random_trust
from influence_game import netgen
from influence_game.dynamics import (
    InfluenceAllocation,
    OpinionState,
    SingularSystemError,
    assemble,
    asymptotic_state,
    consensus_state,
    hull_check,
    in_hull,
    step,
    trajectory,
)
from influence_game.game import ReferenceSet, simplex_references

ONE = ReferenceSet(np.array([[1.0]]))


def dense_step(net, allocations, refs, x):
    """Full augmented update: players keep their references, individuals
    average players and neighbours, all as one (P + M) D matrix product."""
    P, D, M = refs.count, refs.dim, net.size
    W = np.zeros((P + M, P + M))
    W[:P, :P] = np.eye(P)
    for p, a in enumerate(allocations):
        W[P:, p] = a.weights
    W[P:, P:] = net.trust
    W /= W.sum(axis=1, keepdims=True)
    big = np.kron(W, np.eye(D))
    state = np.concatenate([refs.vectors.reshape(-1), np.asarray(x.values)])
    return (big @ state)[P * D:]


def fixed_point(sys, x0, tol=1e-12, max_iter=10_000):
    x = x0
    for _ in range(max_iter):
        nxt = step(sys, x)
        if np.max(np.abs(nxt.values - x.values)) < tol:
            return nxt
        x = nxt
    return x


def test_allocation_validation():
    with pytest.raises(ValueError):
        InfluenceAllocation(np.array([-0.1, 0.2]), 1.0)
    with pytest.raises(ValueError):
        InfluenceAllocation(np.array([0.6, 0.5]), 1.0)
    with pytest.raises(ValueError):
        InfluenceAllocation(np.array([0.1]), 0.0)
    InfluenceAllocation(np.array([0.5, 0.5 + 1e-13]), 1.0)


def test_state_length_checked():
    with pytest.raises(ValueError):
        OpinionState(np.zeros(5), 2)


def test_n_inv_diag():
    net = netgen.network_from_trust(np.full((2, 2), 0.5))
    refs = simplex_references(2)
    sys = assemble(net, [InfluenceAllocation([0.5, 0.0], 1), InfluenceAllocation([0.25, 0.25], 1)], refs)
    assert np.allclose(sys.n_inv_diag, [1.75, 1.25])
    zero = assemble(net, [InfluenceAllocation.zeros(2), InfluenceAllocation.zeros(2)], refs)
    assert np.array_equal(zero.n_inv_diag, [1.0, 1.0])
    one = assemble(netgen.network_from_trust([[1.0]]), [InfluenceAllocation([1.0], 1)], ONE)
    assert one.n_inv_diag[0] == 2.0


def test_assemble_dimension_checks():
    net = netgen.network_from_trust(np.full((2, 2), 0.5))
    with pytest.raises(ValueError):
        assemble(net, [InfluenceAllocation.zeros(3)] * 2, simplex_references(2))
    with pytest.raises(ValueError):
        assemble(net, [InfluenceAllocation.zeros(2)], simplex_references(2))


def test_scalar_step_and_limit():
    sys = assemble(netgen.network_from_trust([[1.0]]), [InfluenceAllocation([1.0], 1)], ONE)
    assert step(sys, OpinionState([0.0], 1)).values[0] == pytest.approx(0.5)
    assert asymptotic_state(sys).values[0] == pytest.approx(1.0)


def test_two_node_limit():
    net = netgen.network_from_trust(np.full((2, 2), 0.5))
    sys = assemble(net, [InfluenceAllocation([1.0, 0.0], 1)], ONE)
    assert np.allclose(asymptotic_state(sys).values, [1.0, 1.0])
    assert np.allclose(fixed_point(sys, OpinionState([0.0, 0.0], 1)).values, [1.0, 1.0], atol=1e-10)


def test_zero_allocation_step_is_plain_degroot(rng):
    net = random_trust(6, rng)
    refs = simplex_references(3)
    sys = assemble(net, [InfluenceAllocation.zeros(6)] * 3, refs)
    x = OpinionState(rng.random(12), 2)
    assert np.array_equal(step(sys, x).blocks, net.trust @ x.blocks)
    with pytest.raises(SingularSystemError):
        asymptotic_state(sys)


def test_star_step_matches_dense_oracle():
    net = netgen.gen_archetype("star", {"n": 4})
    refs = ReferenceSet(np.array([[1.0, 0.0]]))
    alloc = [InfluenceAllocation([0.8, 0, 0, 0, 0], 0.8)]
    sys = assemble(net, alloc, refs)
    x = OpinionState(np.arange(10) / 10.0, 2)
    assert np.allclose(step(sys, x).values, dense_step(net, alloc, refs, x), atol=1e-12)


@given(seed=st.integers(0, 2**31), P=st.sampled_from([2, 3, 4]), M=st.integers(1, 12))
def test_step_matches_dense_oracle(seed, P, M):
    rng = np.random.default_rng(seed)
    net = random_trust(M, rng)
    refs = simplex_references(P)
    allocs = random_allocations(M, P, float(rng.uniform(0.1, 2)), rng)
    sys = assemble(net, allocs, refs)
    x = OpinionState(rng.normal(size=M * refs.dim), refs.dim)
    assert np.allclose(step(sys, x).values, dense_step(net, allocs, refs, x), atol=1e-12)


@given(seed=st.integers(0, 2**31))
def test_effective_rows_stochastic(seed):
    rng = np.random.default_rng(seed)
    net = random_trust(8, rng)
    sys = assemble(net, random_allocations(8, 3, 0.7, rng), simplex_references(3))
    rows = (sys.influence.sum(axis=1) + net.trust.sum(axis=1)) / sys.n_inv_diag
    assert np.allclose(rows, 1.0, atol=1e-12)
    lap = np.diag(sys.influence.sum(axis=1)) + (np.eye(8) - net.trust)
    assert np.allclose(sys.system_matrix(), lap, atol=1e-12)


@given(seed=st.integers(0, 2**31))
def test_asymptotic_is_fixed_point_and_start_free(seed):
    rng = np.random.default_rng(seed)
    net = random_trust(10, rng)
    refs = simplex_references(3)
    sys = assemble(net, random_allocations(10, 3, 0.5, rng), refs)
    x_inf = asymptotic_state(sys)
    assert np.allclose(step(sys, x_inf).values, x_inf.values, atol=1e-9)
    for _ in range(2):
        x0 = OpinionState(rng.normal(size=20) * 5, 2)
        assert np.allclose(fixed_point(sys, x0).values, x_inf.values, atol=1e-8)


def test_disconnected_component_without_influence_is_singular():
    trust = np.eye(2)
    net = netgen.SocialNetwork(trust, np.eye(2, dtype=bool))
    sys = assemble(net, [InfluenceAllocation([1.0, 0.0], 1)], ONE)
    with pytest.raises(SingularSystemError):
        asymptotic_state(sys)


def test_consensus_doubly_stochastic():
    net = netgen.network_from_trust(np.full((2, 2), 0.5))
    out = consensus_state(net, OpinionState([0.0, 1.0], 1))
    assert np.allclose(out.values, [0.5, 0.5])


def test_consensus_constant_is_fixed(rng):
    net = random_trust(5, rng)
    out = consensus_state(net, OpinionState(np.full(5, 0.3), 1))
    assert np.allclose(out.values, 0.3, atol=1e-15)


def test_consensus_is_left_perron_average(rng):
    net = random_trust(3, rng, density=1.0)
    vals, vecs = np.linalg.eig(net.trust.T)
    pi = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
    pi /= pi.sum()
    x0 = rng.normal(size=(3, 2))
    out = consensus_state(net, OpinionState.from_blocks(x0))
    assert np.allclose(out.blocks, np.tile(pi @ x0, (3, 1)), atol=1e-8)


def test_consensus_periodic_chain_fails():
    net = netgen.network_from_trust([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(RuntimeError):
        consensus_state(net, OpinionState([0.0, 1.0], 1), max_iter=1000)


def test_hull_membership():
    refs = simplex_references(3)
    assert hull_check(refs, [OpinionState(np.tile(refs[1], 4), 2)])
    assert not hull_check(refs, [OpinionState(np.tile(1.01 * refs[1], 4), 2)])
    assert in_hull(refs, np.zeros(2))
    # degenerate reference sets go through the linear program
    line = ReferenceSet(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert in_hull(line, np.array([0.3, 0.0]))
    assert not in_hull(line, np.array([0.3, 0.1]))


@given(seed=st.integers(0, 2**31))
def test_trajectories_stay_in_hull(seed):
    rng = np.random.default_rng(seed)
    net = random_trust(8, rng)
    refs = simplex_references(3)
    sys = assemble(net, random_allocations(8, 3, 1.0, rng), refs)
    x0 = OpinionState.from_blocks(rng.dirichlet(np.ones(3), size=8) @ refs.vectors)
    states = trajectory(sys, x0, 30)
    assert len(states) == 31
    assert hull_check(refs, states)
