import json

import numpy as np
import pytest

from dsrl.errors import GenerationExhausted, IndexOutOfRange
from dsrl.network import (
    SensorNetwork,
    from_positions,
    generate_network,
    is_connected,
    neighbors,
)


def bfs_reachable(L, edges):
    """Independent reachability oracle over an explicit edge list."""
    adj = {i: set() for i in range(L)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    seen, frontier = {0}, [0]
    while frontier:
        nxt = []
        for i in frontier:
            for j in adj[i] - seen:
                seen.add(j)
                nxt.append(j)
        frontier = nxt
    return seen


def path_graph(L):
    return from_positions(np.arange(L, dtype=float)[:, None], 1.5)


@pytest.mark.parametrize("seed", range(5))
def test_reference_configuration_is_valid(seed):
    net = generate_network(seed, 31, 3, 3.0, 1.75, 2, 10)
    assert net.size == 31 and net.dimension == 3
    assert np.all((net.degrees >= 2) & (net.degrees <= 10))
    assert np.all(np.abs(net.positions) <= 3.0)
    assert bfs_reachable(31, net.edges()) == set(range(31))
    assert is_connected(net)


def test_adjacency_matches_distance_rule(ref_net):
    pos = ref_net.positions
    for i in range(ref_net.size):
        for j in range(ref_net.size):
            if i == j:
                assert not ref_net.adjacency[i, j]
            else:
                assert ref_net.adjacency[i, j] == (np.linalg.norm(pos[i] - pos[j]) < 1.75)


def test_two_nodes_at_origin():
    net = generate_network(0, 2, 1, 0.0, 1.0, 1, 1)
    assert net.edges() == [(0, 1)]
    assert neighbors(net, 0) == {1}
    assert neighbors(net, 1) == {0}


def test_same_seed_same_network():
    a = generate_network(42, 31, 3, 3.0, 1.75, 2, 10)
    b = generate_network(42, 31, 3, 3.0, 1.75, 2, 10)
    c = generate_network(43, 31, 3, 3.0, 1.75, 2, 10)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.adjacency, b.adjacency)
    assert not np.array_equal(a.positions, c.positions)


def test_rejection_method_on_easy_setting():
    net = generate_network(1, 8, 2, 1.0, 1.5, 1, 7, max_attempts=200, method="rejection")
    assert is_connected(net)
    assert net.degrees.min() >= 1


def test_exhausted_when_infeasible():
    # ten sensors cannot each have nine neighbours when the radius is tiny
    with pytest.raises(GenerationExhausted):
        generate_network(0, 10, 3, 3.0, 0.01, 9, 9, max_attempts=2)
    with pytest.raises(GenerationExhausted):
        generate_network(0, 3, 2, 1.0, 1.0, 3, 3, max_attempts=1)


def test_pure_rejection_is_hopeless_for_the_sparse_setting():
    with pytest.raises(GenerationExhausted):
        generate_network(0, 31, 3, 3.0, 1.75, 2, 10, max_attempts=200, method="rejection")


@pytest.mark.parametrize("kwargs", [
    dict(L=1), dict(connect_radius=0.0), dict(min_deg=3, max_deg=2), dict(max_attempts=0), dict(method="grid"),
])
def test_bad_arguments(kwargs):
    args = dict(L=5, n=2, half_width=1.0, connect_radius=1.0, min_deg=1, max_deg=4, max_attempts=5)
    args.update(kwargs)
    with pytest.raises(ValueError):
        generate_network(0, **args)


def test_neighbors(ref_net):
    pairs = set()
    for i in range(ref_net.size):
        nb = neighbors(ref_net, i)
        assert i not in nb
        assert len(nb) >= 2
        pairs |= {(i, j) for j in nb}
    assert pairs == {(i, j) for i, j in zip(*np.nonzero(ref_net.adjacency))}
    assert pairs == {(j, i) for i, j in pairs}


def test_neighbors_index_out_of_range(ref_net):
    with pytest.raises(IndexOutOfRange):
        neighbors(ref_net, 31)
    with pytest.raises(IndexError):
        neighbors(ref_net, -1)


def test_is_connected_examples():
    assert is_connected(path_graph(3))
    assert not is_connected(SensorNetwork(np.zeros((2, 1)), np.zeros((2, 2), dtype=bool)))


def test_boundary_distance_is_not_adjacent():
    net = from_positions([[0.0], [1.75]], 1.75)
    assert net.edges() == []


def test_invalid_adjacency_rejected():
    with pytest.raises(ValueError):
        SensorNetwork(np.zeros((2, 1)), np.array([[False, True], [False, False]]))
    with pytest.raises(ValueError):
        SensorNetwork(np.zeros((2, 1)), np.eye(2, dtype=bool))
    with pytest.raises(ValueError):
        SensorNetwork(np.array([[np.nan], [0.0]]), np.zeros((2, 2), dtype=bool))


def test_network_is_immutable(ref_net):
    with pytest.raises(ValueError):
        ref_net.positions[0, 0] = 1.0


def test_json_round_trip(ref_net):
    doc = json.loads(ref_net.to_json())
    assert doc["params"]["seed"] == 11
    assert doc["params"]["connect_radius"] == 1.75
    back = SensorNetwork.from_json(ref_net.to_json())
    assert np.array_equal(back.positions, ref_net.positions)
    assert np.array_equal(back.adjacency, ref_net.adjacency)


def test_neighbor_differences_match_dense_form(ref_net, rng):
    X = rng.normal(size=(31, 3))
    W = ref_net.adjacency.astype(float)
    dense = W @ X - ref_net.degrees[:, None] * X
    np.testing.assert_allclose(ref_net.neighbor_differences(X), dense, atol=1e-12)


def test_neighbor_differences_with_isolated_node():
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 1] = adj[1, 0] = True
    net = SensorNetwork(np.zeros((3, 1)), adj)
    X = np.array([[0.0], [2.0], [5.0]])
    np.testing.assert_array_equal(net.neighbor_differences(X), [[2.0], [-2.0], [0.0]])
