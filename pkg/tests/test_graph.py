"""Graph construction, ordering enumeration/sampling, and prefix sets."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icckit.errors import (
    CycleDetected,
    DanglingEdge,
    DuplicateNode,
    TooManyOrderings,
)
from icckit.graph import (
    CausalGraph,
    Ordering,
    build_graph,
    enumerate_topological_orderings,
    prefix_set,
    sample_topological_orderings,
)


def brute_force_orderings(g: CausalGraph):
    """Independent oracle: filter all p! permutations by edge precedence."""
    out = []
    for perm in itertools.permutations(range(g.p)):
        pos = {v: i for i, v in enumerate(perm)}
        if all(pos[a] < pos[b] for (a, b) in g.edges):
            out.append(perm)
    return sorted(out)


def test_minimal_chain():
    g = build_graph(["A", "B"], [("A", "B")])
    assert g.p == 2
    assert g.edges == frozenset({(0, 1)})


def test_two_cycle_rejected():
    with pytest.raises(CycleDetected):
        build_graph(["A", "B"], [("A", "B"), ("B", "A")])


def test_three_node_dag_brute_force_acyclic():
    # brute-force cycle search: every permutation-respecting assignment exists
    g = build_graph(["W", "Z", "X"], [("W", "Z"), ("W", "X"), ("Z", "X")])
    assert brute_force_orderings(g)  # nonempty <=> acyclic


def test_duplicate_node():
    with pytest.raises(DuplicateNode):
        build_graph(["A", "A"], [])


def test_dangling_edge():
    with pytest.raises(DanglingEdge):
        build_graph(["A", "B"], [("A", "C")])


def test_self_loop_rejected():
    with pytest.raises(CycleDetected):
        build_graph(["A"], [("A", "A")])


def test_longer_cycle_rejected():
    with pytest.raises(CycleDetected):
        build_graph(["a", "b", "c"], [("a", "b"), ("b", "c"), ("c", "a")])


def test_enumerate_empty_edges_factorial():
    g = build_graph(["a", "b", "c"], [])
    orderings = enumerate_topological_orderings(g)
    assert len(orderings) == 6
    assert [o.permutation for o in orderings] == brute_force_orderings(g)


def test_enumerate_unique_ordering():
    g = build_graph(["W", "Z", "X"], [("W", "Z"), ("W", "X"), ("Z", "X")])
    orderings = enumerate_topological_orderings(g)
    assert [o.permutation for o in orderings] == [(0, 1, 2)]


def test_enumerate_diamond():
    g = build_graph(["a", "b", "c", "d"],
                    [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])
    orderings = enumerate_topological_orderings(g)
    assert len(orderings) == 2
    assert [o.permutation for o in orderings] == brute_force_orderings(g)


def test_enumerate_lexicographic():
    g = build_graph(["a", "b", "c", "d"], [("a", "d")])
    perms = [o.permutation for o in enumerate_topological_orderings(g)]
    assert perms == sorted(perms)


def test_enumerate_cap_overflow():
    g = build_graph([f"n{i}" for i in range(6)], [])
    with pytest.raises(TooManyOrderings) as err:
        enumerate_topological_orderings(g, cap=100)
    assert err.value.found > 100


def test_sample_chain_unique():
    g = build_graph(["a", "b", "c"], [("a", "b"), ("b", "c")])
    for o in sample_topological_orderings(g, 20, seed=5):
        assert o.permutation == (0, 1, 2)


def test_sample_empty_graph_uniform():
    # sequential tie-breaking is exactly uniform on the empty graph
    g = build_graph(["a", "b", "c"], [])
    draws = sample_topological_orderings(g, 6000, seed=11)
    counts = {}
    for o in draws:
        counts[o.permutation] = counts.get(o.permutation, 0) + 1
    assert len(counts) == 6
    for c in counts.values():
        assert abs(c / 6000 - 1 / 6) < 0.03


def test_sample_deterministic():
    g = build_graph(["a", "b", "c", "d"], [("a", "c")])
    first = sample_topological_orderings(g, 50, seed=3)
    second = sample_topological_orderings(g, 50, seed=3)
    assert [o.permutation for o in first] == [o.permutation for o in second]


def test_prefix_set_examples():
    o = Ordering((0, 1, 2))  # (W, Z, X)
    assert prefix_set(o, 2) == {0, 1}
    assert prefix_set(o, 0) == frozenset()
    o4 = Ordering((0, 1, 2, 3))
    assert prefix_set(o4, 2) == {0, 1}


def test_ancestors():
    g = build_graph(["W", "Z", "X"], [("W", "Z"), ("W", "X"), ("Z", "X")])
    assert g.ancestors(2) == {0, 1}
    assert g.ancestors(0) == frozenset()
    assert g.is_ancestor_closed({0, 1})
    assert not g.is_ancestor_closed({2})


def test_graph_json_round_trip():
    g = build_graph(["W", "Z", "X"], [("W", "Z"), ("Z", "X")])
    assert CausalGraph.from_json(g.to_json()) == g


@st.composite
def random_dags(draw):
    p = draw(st.integers(min_value=1, max_value=5))
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    edges = [pair for pair in pairs if draw(st.booleans())]
    labels = draw(st.permutations(list(range(p))))
    names = [f"n{i}" for i in range(p)]
    return build_graph(names, [(labels[a], labels[b]) for (a, b) in edges])


@settings(max_examples=60, deadline=None)
@given(random_dags())
def test_enumeration_matches_brute_force(g):
    got = [o.permutation for o in enumerate_topological_orderings(g, cap=200)]
    assert got == brute_force_orderings(g)


@settings(max_examples=40, deadline=None)
@given(random_dags(), st.integers(min_value=0, max_value=2**16))
def test_sampled_orderings_respect_edges_and_ancestors(g, seed):
    for o in sample_topological_orderings(g, 5, seed=seed):
        pos = {v: i for i, v in enumerate(o.permutation)}
        assert all(pos[a] < pos[b] for (a, b) in g.edges)
        for j in range(g.p):
            assert g.ancestors(j) <= prefix_set(o, j)


def test_rejects_bad_cap_and_n():
    g = build_graph(["a"], [])
    with pytest.raises(ValueError):
        enumerate_topological_orderings(g, cap=0)
    with pytest.raises(ValueError):
        sample_topological_orderings(g, 0)
