import itertools
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggtoll.errors import EmptyPathSet, ValidationError
from aggtoll.network import NetworkSpec, describe_path, enumerate_paths, incidence_matrix, link_loads, overlap_matrix

from conftest import BRAESS, TWO_PATHS


def brute_force_paths(net):
    """Every ordering of every edge subset that chains origin to destination."""
    found = []
    L = len(net.edges)
    for size in range(1, L + 1):
        for perm in itertools.permutations(range(L), size):
            node = net.origin
            valid = True
            for i, e in enumerate(perm):
                tail, head = net.edges[e]
                if tail != node or (i > 0 and node == net.destination):
                    valid = False
                    break
                node = head
            if valid and node == net.destination:
                found.append(perm)
    return sorted(found)


def test_parallel_edges_give_two_paths():
    assert enumerate_paths(TWO_PATHS) == ((0,), (1,))


def test_single_edge():
    net = NetworkSpec(2, ((1, 2),))
    assert enumerate_paths(net) == ((0,),)
    assert incidence_matrix(net, enumerate_paths(net)).tolist() == [[1]]


def test_braess_paths():
    paths = enumerate_paths(BRAESS)
    assert paths == ((0, 2), (0, 4, 3), (1, 3))
    assert list(paths) == brute_force_paths(BRAESS)
    assert [describe_path(BRAESS, p) for p in paths] == ["1->2->4", "1->2->3->4", "1->3->4"]


def test_braess_incidence_and_overlap():
    paths = enumerate_paths(BRAESS)
    delta = incidence_matrix(BRAESS, paths)
    assert delta[:, paths.index((0, 4, 3))].tolist() == [1, 0, 0, 1, 1]
    phi = overlap_matrix(delta)
    # hand count in the order [e1 e3], [e1 e5 e4], [e2 e4]
    assert phi.tolist() == [[2, 1, 0], [1, 3, 1], [0, 1, 2]]


def test_two_path_incidence_is_identity():
    delta = incidence_matrix(TWO_PATHS, enumerate_paths(TWO_PATHS))
    assert delta.tolist() == [[1, 0], [0, 1]]
    assert overlap_matrix(delta).tolist() == [[1, 0], [0, 1]]


def test_link_loads():
    assert link_loads(np.eye(2, dtype=int), np.array([0.3, 0.7])).tolist() == [0.3, 0.7]
    assert link_loads(np.array([[1]]), np.array([1.0])).tolist() == [1.0]
    paths = enumerate_paths(BRAESS)
    delta = incidence_matrix(BRAESS, paths)
    # path order here is [e1 e3], [e1 e5 e4], [e2 e4]; loads given per path below
    x = np.array([F(2, 10), F(5, 10), F(3, 10)], dtype=object)
    y = link_loads(delta, x)
    assert list(y) == [F(7, 10), F(3, 10), F(2, 10), F(8, 10), F(5, 10)]


def test_link_loads_dimension_mismatch():
    with pytest.raises(ValueError):
        link_loads(np.eye(2, dtype=int), np.array([1.0, 0.0, 0.0]))


def test_no_path_raises():
    with pytest.raises(EmptyPathSet):
        enumerate_paths(NetworkSpec(3, ((1, 2),)))


@pytest.mark.parametrize("kwargs", [
    dict(node_count=2, edges=((1, 3),)),
    dict(node_count=2, edges=((1, 2),), origin=2, destination=2),
    dict(node_count=0, edges=()),
])
def test_invalid_networks(kwargs):
    with pytest.raises(ValidationError):
        NetworkSpec(**kwargs)


def test_node_revisit_allowed_but_not_edge_reuse():
    # 1->2, 2->1, 1->3: the detour 1->2->1->3 uses distinct edges
    net = NetworkSpec(3, ((1, 2), (2, 1), (1, 3)))
    assert enumerate_paths(net) == ((0, 1, 2), (2,))
    assert list(enumerate_paths(net)) == brute_force_paths(net)


@st.composite
def small_networks(draw):
    n = draw(st.integers(2, 4))
    edges = draw(st.lists(st.tuples(st.integers(1, n), st.integers(1, n)), min_size=1, max_size=6))
    return NetworkSpec(n, tuple(edges))


@settings(max_examples=150, deadline=None)
@given(small_networks())
def test_enumeration_matches_brute_force(net):
    expected = brute_force_paths(net)
    if not expected:
        with pytest.raises(EmptyPathSet):
            enumerate_paths(net)
        return
    paths = enumerate_paths(net)
    assert list(paths) == expected
    for path in paths:
        assert len(set(path)) == len(path)
        node = net.origin
        for e in path:
            assert net.edges[e][0] == node
            node = net.edges[e][1]
        assert node == net.destination
    phi = overlap_matrix(incidence_matrix(net, paths))
    pairwise = [[len(set(a) & set(b)) for b in paths] for a in paths]
    assert phi.tolist() == pairwise
    assert (phi == phi.T).all()


@settings(max_examples=100, deadline=None)
@given(small_networks(), st.data())
def test_link_loads_exact(net, data):
    try:
        paths = enumerate_paths(net)
    except EmptyPathSet:
        return
    delta = incidence_matrix(net, paths)
    nums = data.draw(st.lists(st.integers(0, 20), min_size=len(paths), max_size=len(paths)))
    total = sum(nums) or 1
    x = np.array([F(v, total) for v in nums], dtype=object)
    y = link_loads(delta, x)
    for j in range(len(net.edges)):
        assert y[j] == sum(x[k] for k, p in enumerate(paths) if j in p)


def test_braess_overlap_matches_listed_order():
    # listed order [e1 e3], [e2 e4], [e1 e5 e4] is a permutation of the lexicographic one
    paths = enumerate_paths(BRAESS)
    order = [paths.index(p) for p in [(0, 2), (1, 3), (0, 4, 3)]]
    phi = overlap_matrix(incidence_matrix(BRAESS, paths))
    assert phi[np.ix_(order, order)].tolist() == [[2, 0, 1], [0, 2, 1], [1, 1, 3]]
