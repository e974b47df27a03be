"""Graph and label loading, and the connected link-prediction split."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import Disconnected, EmptyGraph, ParseError, TooDense, UnknownNode

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..num_nodes-1``.

    ``edges`` is an ``(E, 2)`` int64 array with ``edges[:, 0] < edges[:, 1]``.
    ``node_names`` maps dense ids back to the identifiers of the input file.
    """

    num_nodes: int
    edges: np.ndarray
    node_names: tuple = ()

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", e)
        if len(e):
            if np.any(e[:, 0] >= e[:, 1]):
                raise ValueError("edges must satisfy i < j (no self-loops)")
            if e.min() < 0 or e.max() >= self.num_nodes:
                raise ValueError("edge endpoint out of range")
            if len(np.unique(edge_keys(e, self.num_nodes))) != len(e):
                raise ValueError("duplicate edges")

    @classmethod
    def from_pairs(cls, num_nodes: int, pairs, node_names=()) -> "Graph":
        """Build a graph from arbitrary pairs, dropping self-loops and duplicates."""
        p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        p = np.sort(p, axis=1)
        p = p[p[:, 0] != p[:, 1]]
        _, first = np.unique(edge_keys(p, num_nodes), return_index=True)
        return cls(num_nodes, p[np.sort(first)], tuple(node_names))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_non_edges(self) -> int:
        n = self.num_nodes
        return n * (n - 1) // 2 - self.num_edges

    def name(self, i: int) -> str:
        return self.node_names[i] if self.node_names else str(i)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.num_nodes, self.num_nodes), dtype=np.int8)
        A[self.edges[:, 0], self.edges[:, 1]] = 1
        A[self.edges[:, 1], self.edges[:, 0]] = 1
        return A

    def components(self) -> np.ndarray:
        """Connected-component label of every node."""
        n = self.num_nodes
        A = coo_matrix(
            (np.ones(self.num_edges), (self.edges[:, 0], self.edges[:, 1])), shape=(n, n)
        )
        return connected_components(A, directed=False)[1]

    def is_connected(self) -> bool:
        return self.num_nodes <= 1 or int(self.components().max()) == 0


@dataclass(frozen=True)
class LabelTable:
    """Class labels for a subset of nodes, classes dense in ``0..C-1``."""

    nodes: np.ndarray
    labels: np.ndarray
    num_classes: int
    class_names: tuple = ()

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class LinkSplit:
    residual: Graph
    test_pos: np.ndarray
    test_neg: np.ndarray
    dropped: int = field(default=0, compare=False)

    def eval_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Test pairs stacked positives-first, with their 0/1 labels."""
        pairs = np.vstack([self.test_pos, self.test_neg]).astype(np.int64)
        y = np.r_[np.ones(len(self.test_pos)), np.zeros(len(self.test_neg))]
        return pairs, y


def edge_keys(pairs: np.ndarray, num_nodes: int) -> np.ndarray:
    """Scalar key ``i * N + j`` for pairs with ``i < j``."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return pairs[:, 0] * np.int64(num_nodes) + pairs[:, 1]


def _find(parent: list, i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def _data_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if line and not line.startswith("#"):
                yield lineno, line


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated edge list with arbitrary string ids.

    Ids are numbered in order of first appearance. Self-loops and repeated
    pairs are dropped with a single warning giving the counts.
    """
    path = Path(path)
    names: dict[str, int] = {}
    pairs = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 2 fields, got {len(parts)}", path, lineno)
        ids = []
        for tok in parts:
            if tok not in names:
                names[tok] = len(names)
            ids.append(names[tok])
        pairs.append(ids)
    n = len(names)
    raw = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    n_loops = int(np.sum(raw[:, 0] == raw[:, 1]))
    graph = Graph.from_pairs(n, raw, tuple(names))
    n_dups = len(raw) - n_loops - graph.num_edges
    if n_loops or n_dups:
        warnings.warn(
            f"{path}: dropped {n_loops} self-loops and {n_dups} duplicate edges",
            stacklevel=2,
        )
    if graph.num_edges == 0:
        raise EmptyGraph(f"{path}: no edges")
    return graph


def load_labels(path, graph: Graph) -> LabelTable:
    """Read ``node<TAB>label`` lines; labels are renumbered in first-appearance order."""
    path = Path(path)
    index = {name: i for i, name in enumerate(graph.node_names)}
    classes: dict[str, int] = {}
    nodes, labels = [], []
    seen = set()
    for lineno, line in _data_lines(path):
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ParseError("expected 'node<TAB>label'", path, lineno)
        node, lab = parts[0].strip(), parts[1].strip()
        if node not in index:
            raise UnknownNode(f"{path}:{lineno}: node {node!r} is not in the graph")
        i = index[node]
        if i in seen:
            raise ParseError(f"node {node!r} labelled twice", path, lineno)
        seen.add(i)
        if lab not in classes:
            classes[lab] = len(classes)
        nodes.append(i)
        labels.append(classes[lab])
    return LabelTable(
        np.asarray(nodes, dtype=np.int64),
        np.asarray(labels, dtype=np.int64),
        len(classes),
        tuple(classes),
    )


def largest_component(graph: Graph) -> tuple[Graph, np.ndarray]:
    """Induced subgraph on the largest connected component and the kept node ids."""
    comp = graph.components()
    big = np.argmax(np.bincount(comp))
    keep = np.flatnonzero(comp == big)
    remap = -np.ones(graph.num_nodes, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    e = remap[graph.edges]
    e = e[(e >= 0).all(axis=1)]
    names = tuple(graph.node_names[i] for i in keep) if graph.node_names else ()
    return Graph(len(keep), e, names), keep


def random_spanning_forest(graph: Graph, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of edges kept by union-find over a random edge order."""
    order = rng.permutation(graph.num_edges)
    parent = list(range(graph.num_nodes))
    edges = graph.edges.tolist()
    in_tree = np.zeros(graph.num_edges, dtype=bool)
    for k in order.tolist():
        i, j = edges[k]
        ri, rj = _find(parent, i), _find(parent, j)
        if ri != rj:
            parent[ri] = rj
            in_tree[k] = True
    return in_tree


def split_positive_edges(
    graph: Graph, fraction: float, rng: np.random.Generator
) -> tuple[Graph, np.ndarray]:
    """Remove a random share of non-tree edges; returns (residual, removed edges)."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    in_tree = random_spanning_forest(graph, rng)
    free = np.flatnonzero(~in_tree)
    wanted = int(np.floor(fraction * graph.num_edges))
    n_test = min(wanted, len(free))
    if n_test < wanted:
        warnings.warn(
            f"only {len(free)} removable edges; removing {n_test} instead of {wanted}",
            stacklevel=2,
        )
    chosen = np.sort(rng.choice(free, size=n_test, replace=False)) if n_test else free[:0]
    mask = np.ones(graph.num_edges, dtype=bool)
    mask[chosen] = False
    residual = Graph(graph.num_nodes, graph.edges[mask], graph.node_names)
    return residual, graph.edges[chosen]


def sample_test_negatives(graph: Graph, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct uniform non-edges of ``graph`` by rejection sampling."""
    if count > graph.num_non_edges:
        raise TooDense(f"need {count} non-edges, graph has {graph.num_non_edges}")
    n = graph.num_nodes
    taken = set(edge_keys(graph.edges, n).tolist())
    out = []
    while len(out) < count:
        need = count - len(out)
        cand = rng.integers(0, n, size=(2 * need + 16, 2))
        for i, j in cand:
            if i == j:
                continue
            if i > j:
                i, j = j, i
            key = int(i) * n + int(j)
            if key in taken:
                continue
            taken.add(key)
            out.append((i, j))
            if len(out) == count:
                break
    return np.asarray(out, dtype=np.int64).reshape(-1, 2)


def connected_link_split(
    graph: Graph, fraction: float = 0.5, seed: int = 0, preserve_components: bool = False
) -> LinkSplit:
    """Hold out edges for link prediction while keeping the residual connected.

    A random spanning tree is protected; up to ``floor(fraction * |E|)``
    of the remaining edges become test positives, matched by the same
    number of distinct non-edges of the original graph.

    With ``preserve_components`` a disconnected input is accepted and a
    spanning forest is protected instead, so the residual keeps the
    component structure of the input.
    """
    if not preserve_components and not graph.is_connected():
        raise Disconnected("input graph is not connected")
    rng = np.random.default_rng(seed)
    residual, test_pos = split_positive_edges(graph, fraction, rng)
    test_neg = sample_test_negatives(graph, len(test_pos), rng)
    wanted = int(np.floor(fraction * graph.num_edges))
    return LinkSplit(residual, test_pos, test_neg, dropped=wanted - len(test_pos))
