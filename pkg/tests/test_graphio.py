import itertools
import warnings

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compograph.errors import Disconnected, EmptyGraph, ParseError, TooDense, UnknownNode
from compograph.graphio import (
    Graph,
    connected_link_split,
    edge_keys,
    largest_component,
    load_edge_list,
    load_labels,
    random_spanning_forest,
    sample_test_negatives,
    split_positive_edges,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def edge_set(edges):
    return {tuple(e) for e in np.asarray(edges).tolist()}


def to_nx(graph):
    G = nx.Graph()
    G.add_nodes_from(range(graph.num_nodes))
    G.add_edges_from(graph.edges.tolist())
    return G


def check_split(graph, split):
    orig = edge_set(graph.edges)
    res = edge_set(split.residual.edges)
    pos = edge_set(split.test_pos)
    neg = edge_set(split.test_neg)
    assert nx.is_connected(to_nx(split.residual))
    assert not (pos & res)
    assert pos | res == orig
    assert len(pos) == len(split.test_pos)
    assert len(neg) == len(split.test_neg) == len(split.test_pos)
    assert not (neg & orig)
    assert all(i < j for i, j in neg)


# loading


def test_load_edge_list_examples(tmp_path):
    g = load_edge_list(write(tmp_path, "a.txt", "a b\nb c\n"))
    assert g.num_nodes == 3
    assert edge_set(g.edges) == {(0, 1), (1, 2)}
    assert g.node_names == ("a", "b", "c")

    with pytest.warns(UserWarning, match="1 self-loops and 0 duplicate"):
        g = load_edge_list(write(tmp_path, "b.txt", "a a\na b\n"))
    assert g.num_nodes == 2 and edge_set(g.edges) == {(0, 1)}

    with pytest.warns(UserWarning, match="0 self-loops and 1 duplicate"):
        g = load_edge_list(write(tmp_path, "c.txt", "a b\nb a\n"))
    assert g.num_edges == 1


def test_load_edge_list_comments_tabs_and_blank_lines(tmp_path):
    g = load_edge_list(write(tmp_path, "g.txt", "# header\n\nx\ty\n  y   z  \n"))
    assert g.num_nodes == 3 and g.num_edges == 2


def test_load_edge_list_errors(tmp_path):
    with pytest.raises(ParseError) as info:
        load_edge_list(write(tmp_path, "bad.txt", "a b\na b c\n"))
    assert info.value.line == 2
    assert "bad.txt:2" in str(info.value)
    with pytest.raises(EmptyGraph):
        load_edge_list(write(tmp_path, "empty.txt", "# nothing\n"))
    with pytest.warns(UserWarning), pytest.raises(EmptyGraph):
        load_edge_list(write(tmp_path, "loops.txt", "a a\n"))
    with pytest.raises(FileNotFoundError):
        load_edge_list(tmp_path / "missing.txt")


def test_load_labels_examples(tmp_path):
    g = load_edge_list(write(tmp_path, "g.txt", "n1 n2\nn2 n3\n"))
    lab = load_labels(write(tmp_path, "l.txt", "n1\tx\nn2\ty\nn3\tx\n"), g)
    assert lab.num_classes == 2
    assert lab.labels.tolist() == [0, 1, 0]
    assert lab.nodes.tolist() == [0, 1, 2]
    assert lab.class_names == ("x", "y")

    with pytest.raises(UnknownNode):
        load_labels(write(tmp_path, "u.txt", "n9\tx\n"), g)
    empty = load_labels(write(tmp_path, "e.txt", ""), g)
    assert len(empty) == 0 and empty.num_classes == 0
    with pytest.raises(ParseError):
        load_labels(write(tmp_path, "p.txt", "n1\n"), g)
    with pytest.raises(ParseError):
        load_labels(write(tmp_path, "d.txt", "n1\tx\nn1\ty\n"), g)


def test_labels_may_contain_spaces_with_tab_separator(tmp_path):
    g = load_edge_list(write(tmp_path, "g.txt", "a b\n"))
    lab = load_labels(write(tmp_path, "l.txt", "a\tNeural Networks\nb\tTheory\n"), g)
    assert lab.class_names == ("Neural Networks", "Theory")


# graph invariants


def test_graph_rejects_invalid_edges():
    with pytest.raises(ValueError):
        Graph(3, [[1, 1]])
    with pytest.raises(ValueError):
        Graph(3, [[1, 0]])
    with pytest.raises(ValueError):
        Graph(3, [[0, 3]])
    with pytest.raises(ValueError):
        Graph(3, [[0, 1], [0, 1]])


def test_from_pairs_normalises():
    g = Graph.from_pairs(4, [[1, 0], [0, 1], [2, 2], [3, 2]])
    assert edge_set(g.edges) == {(0, 1), (2, 3)}


def test_components_and_lcc():
    g = Graph(6, [[0, 1], [1, 2], [3, 4]])
    assert not g.is_connected()
    sub, keep = largest_component(g)
    assert keep.tolist() == [0, 1, 2]
    assert sub.num_nodes == 3 and sub.num_edges == 2


# splits


def complete_graph(n):
    return Graph(n, list(itertools.combinations(range(n), 2)))


def test_triangle_positive_split():
    g = complete_graph(3)
    residual, pos = split_positive_edges(g, 0.5, np.random.default_rng(0))
    assert len(pos) == 1
    assert nx.is_connected(to_nx(residual))
    # no non-edges exist to pair with the held-out edge
    with pytest.raises(TooDense):
        connected_link_split(g, 0.5, seed=0)


def test_k5_positive_split_is_deterministic():
    g = complete_graph(5)
    r1, p1 = split_positive_edges(g, 0.5, np.random.default_rng(3))
    r2, p2 = split_positive_edges(g, 0.5, np.random.default_rng(3))
    assert len(p1) == 5
    assert nx.is_connected(to_nx(r1))
    np.testing.assert_array_equal(p1, p2)
    np.testing.assert_array_equal(r1.edges, r2.edges)
    with pytest.raises(TooDense):
        connected_link_split(g, 0.5, seed=3)


def test_tree_input_removes_nothing():
    g = Graph(5, [[0, 1], [1, 2], [1, 3], [3, 4]])
    with pytest.warns(UserWarning, match="removable"):
        split = connected_link_split(g, 0.5, seed=1)
    assert len(split.test_pos) == 0 and len(split.test_neg) == 0
    assert edge_set(split.residual.edges) == edge_set(g.edges)
    assert split.dropped == 2


def test_disconnected_input():
    g = Graph(4, [[0, 1], [2, 3]])
    with pytest.raises(Disconnected):
        connected_link_split(g, 0.5)


def test_preserve_components_keeps_forest():
    G = nx.disjoint_union(nx.cycle_graph(6), nx.complete_graph(4))
    g = Graph.from_pairs(G.number_of_nodes(), list(G.edges()))
    split = connected_link_split(g, 0.3, seed=2, preserve_components=True)
    assert nx.number_connected_components(to_nx(split.residual)) == 2


def test_spanning_forest_is_a_spanning_tree():
    G = nx.gnm_random_graph(40, 120, seed=5)
    G = G.subgraph(max(nx.connected_components(G), key=len)).copy()
    G = nx.convert_node_labels_to_integers(G)
    g = Graph.from_pairs(G.number_of_nodes(), list(G.edges()))
    mask = random_spanning_forest(g, np.random.default_rng(0))
    T = nx.Graph()
    T.add_nodes_from(range(g.num_nodes))
    T.add_edges_from(g.edges[mask].tolist())
    assert nx.is_tree(T)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(6, 40),
    st.floats(0.05, 0.6),
    st.floats(0.05, 0.95),
    st.integers(0, 10_000),
)
def test_split_invariants_random_graphs(n, p, fraction, seed):
    G = nx.gnp_random_graph(n, p, seed=seed)
    if not nx.is_connected(G) or G.number_of_edges() >= n * (n - 1) // 2:
        return
    g = Graph.from_pairs(n, list(G.edges()))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            split = connected_link_split(g, fraction, seed)
        except TooDense:
            return
    check_split(g, split)
    wanted = int(np.floor(fraction * g.num_edges))
    assert len(split.test_pos) == min(wanted, g.num_edges - (n - 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        again = connected_link_split(g, fraction, seed)
    np.testing.assert_array_equal(split.test_pos, again.test_pos)
    np.testing.assert_array_equal(split.test_neg, again.test_neg)


def test_sample_test_negatives_distinct_and_too_dense():
    g = Graph(6, [[0, 1], [1, 2], [2, 3]])
    neg = sample_test_negatives(g, 12, np.random.default_rng(0))
    assert len(neg) == 12 == g.num_non_edges
    assert len(set(edge_keys(neg, 6).tolist())) == 12
    with pytest.raises(TooDense):
        sample_test_negatives(g, 13, np.random.default_rng(0))


def test_eval_pairs_order():
    G = nx.connected_watts_strogatz_graph(30, 6, 0.2, seed=1)
    g = Graph.from_pairs(30, list(G.edges()))
    split = connected_link_split(g, 0.5, seed=0)
    pairs, y = split.eval_pairs()
    n = len(split.test_pos)
    np.testing.assert_array_equal(pairs[:n], split.test_pos)
    assert y[:n].all() and not y[n:].any()
