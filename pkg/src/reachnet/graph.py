"""Graph container, synthetic generators, and plain-text file IO.

Nodes are dense integers 0..n-1. Undirected edges are stored once in
canonical (min, max) order and exposed symmetrically through the
adjacency index. Edge weights are strictly positive and default to 1.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "GraphFormatError",
    "Graph",
    "AdjacencyIndex",
    "generate_grid",
    "generate_connected_caveman",
    "load_graph",
    "save_graph",
]


class GraphFormatError(ValueError):
    """Malformed or inconsistent graph data in an input file."""


def _canonical_edges(edges, n: int, directed: bool) -> list[tuple[int, int, float]]:
    canon: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()
    for edge in edges:
        if len(edge) == 2:
            u, v = edge
            w = 1.0
        else:
            u, v, w = edge
        u, v, w = int(u), int(v), float(w)
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) has endpoint outside [0, {n})")
        if u == v:
            raise ValueError(f"self-loop on node {u} is not allowed")
        if w <= 0.0:
            raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
        key = (u, v) if directed else (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"duplicate edge ({u}, {v})")
        seen.add(key)
        canon.append((key[0], key[1], w) if not directed else (u, v, w))
    canon.sort()
    return canon


@dataclass(frozen=True)
class Graph:
    """Immutable weighted graph with optional node attributes and labels."""

    n: int
    edges: tuple[tuple[int, int, float], ...]
    directed: bool = False
    attributes: np.ndarray | None = None
    labels: np.ndarray | None = None
    _adjacency: list = field(default_factory=list, repr=False, compare=False)

    @staticmethod
    def build(
        n: int,
        edges,
        directed: bool = False,
        attributes: np.ndarray | None = None,
        labels: np.ndarray | None = None,
    ) -> "Graph":
        if n < 0:
            raise ValueError("node count must be non-negative")
        canon = tuple(_canonical_edges(edges, n, directed))
        if attributes is not None:
            attributes = np.asarray(attributes, dtype=np.float64)
            if attributes.ndim != 2 or attributes.shape[0] != n:
                raise ValueError(
                    f"attribute matrix must be ({n}, d), got {attributes.shape}"
                )
            attributes = attributes.copy()
            attributes.setflags(write=False)
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (n,):
                raise ValueError(f"labels must have shape ({n},), got {labels.shape}")
            labels = labels.copy()
            labels.setflags(write=False)
        return Graph(n=n, edges=canon, directed=directed, attributes=attributes, labels=labels)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> "AdjacencyIndex":
        """Cached adjacency index; safe to share, the graph is immutable."""
        if not self._adjacency:
            self._adjacency.append(AdjacencyIndex.from_graph(self))
        return self._adjacency[0]

    def with_edges(self, edges) -> "Graph":
        """Same nodes/attributes/labels over a different edge set."""
        return Graph.build(
            self.n, edges, self.directed, self.attributes, self.labels
        )

    def structure_hash(self) -> str:
        """Hash of (n, directedness, weighted edge list); ignores attributes."""
        h = hashlib.blake2b(digest_size=16)
        h.update(self.n.to_bytes(8, "little"))
        h.update(b"d" if self.directed else b"u")
        for u, v, w in self.edges:
            h.update(u.to_bytes(8, "little"))
            h.update(v.to_bytes(8, "little"))
            h.update(np.float64(w).tobytes())
        return h.hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        if (self.n, self.directed, self.edges) != (other.n, other.directed, other.edges):
            return False
        for mine, theirs in ((self.attributes, other.attributes), (self.labels, other.labels)):
            if (mine is None) != (theirs is None):
                return False
            if mine is not None and not np.array_equal(mine, theirs):
                return False
        return True

    __hash__ = None


class AdjacencyIndex:
    """CSR-style neighbor lists sorted by id, with per-node weight totals."""

    def __init__(self, indptr: np.ndarray, neighbors: np.ndarray, weights: np.ndarray):
        self.indptr = indptr
        self.neighbors = neighbors
        self.weights = weights
        self.cum_weights = np.concatenate([[0.0], np.cumsum(weights)])
        self.total_weight = np.array(
            [self.cum_weights[indptr[i + 1]] - self.cum_weights[indptr[i]]
             for i in range(len(indptr) - 1)]
        )

    @staticmethod
    def from_graph(graph: Graph) -> "AdjacencyIndex":
        n = graph.n
        pairs: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for u, v, w in graph.edges:
            pairs[u].append((v, w))
            if not graph.directed:
                pairs[v].append((u, w))
        indptr = np.zeros(n + 1, dtype=np.int64)
        neigh: list[int] = []
        wts: list[float] = []
        for i, lst in enumerate(pairs):
            lst.sort()
            indptr[i + 1] = indptr[i] + len(lst)
            neigh.extend(x for x, _ in lst)
            wts.extend(w for _, w in lst)
        return AdjacencyIndex(
            indptr, np.asarray(neigh, dtype=np.int64), np.asarray(wts, dtype=np.float64)
        )

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.indptr[v]: self.indptr[v + 1]]

    def weights_of(self, v: int) -> np.ndarray:
        return self.weights[self.indptr[v]: self.indptr[v + 1]]


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------


def generate_grid(rows: int, cols: int) -> Graph:
    """2D lattice with 4-neighbor connectivity and unit weights."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph.build(rows * cols, edges)


def generate_connected_caveman(cliques: int, clique_size: int) -> Graph:
    """Ring of cliques, each labeled with its community index.

    In clique c the lexicographically smallest intra-clique edge (a, b) is
    replaced by (b, lowest node of clique c+1 mod cliques), which chains
    the cliques into a ring without any randomness. The degenerate
    clique_size=2 case keeps the edge count but cannot be connected.
    """
    if cliques < 2 or clique_size < 2:
        raise ValueError("need cliques >= 2 and clique_size >= 2")
    edges = []
    for c in range(cliques):
        base = c * clique_size
        for i in range(clique_size):
            for j in range(i + 1, clique_size):
                if i == 0 and j == 1:
                    continue  # rewired below
                edges.append((base + i, base + j))
        nxt = ((c + 1) % cliques) * clique_size
        edges.append((base + 1, nxt))
    labels = np.repeat(np.arange(cliques), clique_size)
    return Graph.build(cliques * clique_size, edges, labels=labels)


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------
#
# Edge list: one "u v" or "u v w" per line, '#' comments skipped.
# Attributes: CSV "node_id,f1,...,fd", optional header line.
# Labels: CSV "node_id,label", optional header line.
# Written files always end with a newline.


def _data_lines(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def _parse_csv_rows(path: Path, what: str):
    rows = []
    for lineno, line in _data_lines(path):
        parts = [p.strip() for p in line.split(",")]
        try:
            int(parts[0])
        except ValueError:
            if rows:
                raise GraphFormatError(
                    f"{path}:{lineno}: unexpected non-numeric {what} row"
                )
            continue  # header line
        rows.append((lineno, parts))
    return rows


def load_graph(
    edge_path,
    attr_path=None,
    label_path=None,
    directed: bool = False,
    write_id_map: bool = True,
) -> Graph:
    """Load a graph from text files, remapping arbitrary node ids to 0..n-1.

    When the input ids are not already dense 0-based integers, the mapping
    "original_id,new_id" is written next to the edge file as
    "<edge_path>.nodemap" (disable with write_id_map=False).
    """
    edge_path = Path(edge_path)
    raw_edges: list[tuple[int, int, float]] = []
    for lineno, line in _data_lines(edge_path):
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(
                f"{edge_path}:{lineno}: expected 'u v' or 'u v w', got {line!r}"
            )
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise GraphFormatError(f"{edge_path}:{lineno}: {exc}") from None
        if u == v:
            raise GraphFormatError(f"{edge_path}:{lineno}: self-loop on node {u}")
        if w <= 0:
            raise GraphFormatError(f"{edge_path}:{lineno}: non-positive weight {w}")
        raw_edges.append((u, v, w))

    ids = sorted({u for u, _, _ in raw_edges} | {v for _, v, _ in raw_edges})
    remap = {orig: new for new, orig in enumerate(ids)}
    n = len(ids)
    if write_id_map and ids != list(range(n)):
        map_path = edge_path.with_name(edge_path.name + ".nodemap")
        with open(map_path, "w", encoding="utf-8") as fh:
            fh.write("# original_id,new_id\n")
            for orig, new in remap.items():
                fh.write(f"{orig},{new}\n")

    edges = [(remap[u], remap[v], w) for u, v, w in raw_edges]

    attributes = None
    if attr_path is not None:
        rows = _parse_csv_rows(Path(attr_path), "attribute")
        values: dict[int, list[float]] = {}
        dim = None
        for lineno, parts in rows:
            orig = int(parts[0])
            if orig not in remap:
                raise GraphFormatError(
                    f"{attr_path}:{lineno}: unknown node id {orig}"
                )
            try:
                vec = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise GraphFormatError(f"{attr_path}:{lineno}: {exc}") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise GraphFormatError(
                    f"{attr_path}:{lineno}: expected {dim} attribute values, got {len(vec)}"
                )
            values[remap[orig]] = vec
        if len(values) != n:
            missing = sorted(set(range(n)) - set(values))[:5]
            raise GraphFormatError(
                f"{attr_path}: attributes missing for {n - len(values)} nodes "
                f"(first remapped ids: {missing})"
            )
        attributes = np.array([values[i] for i in range(n)], dtype=np.float64)

    labels = None
    if label_path is not None:
        rows = _parse_csv_rows(Path(label_path), "label")
        got: dict[int, int] = {}
        for lineno, parts in rows:
            if len(parts) != 2:
                raise GraphFormatError(
                    f"{label_path}:{lineno}: expected 'node_id,label'"
                )
            orig = int(parts[0])
            if orig not in remap:
                raise GraphFormatError(f"{label_path}:{lineno}: unknown node id {orig}")
            got[remap[orig]] = int(parts[1])
        if len(got) != n:
            raise GraphFormatError(
                f"{label_path}: labels missing for {n - len(got)} nodes"
            )
        labels = np.array([got[i] for i in range(n)], dtype=np.int64)

    try:
        return Graph.build(n, edges, directed=directed, attributes=attributes, labels=labels)
    except ValueError as exc:
        raise GraphFormatError(f"{edge_path}: {exc}") from None


def save_graph(
    graph: Graph,
    edge_path,
    attr_path=None,
    label_path=None,
    header: str | None = None,
) -> None:
    """Write a graph back to text files; load(save(g)) == g."""
    edge_path = Path(edge_path)
    with open(edge_path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for u, v, w in graph.edges:
            if w == 1.0:
                fh.write(f"{u} {v}\n")
            else:
                fh.write(f"{u} {v} {w!r}\n")
    if attr_path is not None:
        if graph.attributes is None:
            raise ValueError("graph has no attributes to save")
        with open(Path(attr_path), "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write("node_id," + ",".join(
                f"f{i}" for i in range(graph.attributes.shape[1])) + "\n")
            for i, row in enumerate(graph.attributes):
                fh.write(f"{i}," + ",".join(repr(float(x)) for x in row) + "\n")
    if label_path is not None:
        if graph.labels is None:
            raise ValueError("graph has no labels to save")
        with open(Path(label_path), "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            fh.write("node_id,label\n")
            for i, lab in enumerate(graph.labels):
                fh.write(f"{i},{int(lab)}\n")
