"""Fixed-length random walks and reachability-similarity estimation.

From every node we run a fixed number of walks, stepping to a neighbor
with probability proportional to edge weight. Two similarity estimates
are derived from the stored traces:

* count similarity: total visits to a target across all walks, divided
  by (walk length * walk count), so values lie in [0, 1];
* order-weighted similarity: sum over walks of 1 / (first-visit step),
  unnormalized, so values lie in [0, walk count].

Traces are kept (not just counts) so anchor selection can rebuild its
reachability structure from sampled walk subsets without re-walking.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph

__all__ = [
    "WalkConfig",
    "WalkSet",
    "SimilarityMatrix",
    "sample_walks",
    "bfs_distances",
    "estimate_diameter",
    "coverage_bound_walk_count",
    "similarity_count",
    "similarity_ordered",
    "similarity_matrix",
    "save_walk_cache",
    "load_walk_cache",
]

_CACHE_VERSION = 1


@dataclass(frozen=True)
class WalkConfig:
    """Walks per source, steps per walk, and the sampling seed."""

    n_w: int = 50
    l_w: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_w < 1:
            raise ValueError("n_w must be >= 1")
        if self.l_w < 1:
            raise ValueError("l_w must be >= 1")


class WalkSet:
    """Walk traces for every source node.

    traces[v, j, t] is the node visited at step t+1 of walk j from source
    v, or -1 once the walk was truncated at a dead end. The start node is
    not part of the trace.
    """

    def __init__(self, traces: np.ndarray, config: WalkConfig):
        if traces.ndim != 3 or traces.shape[1:] != (config.n_w, config.l_w):
            raise ValueError("traces must have shape (n, n_w, l_w)")
        self.traces = traces
        self.config = config

    @property
    def n(self) -> int:
        return self.traces.shape[0]

    def visit_counts(self, v: int) -> np.ndarray:
        """Total visits from source v to every node, over all walks."""
        flat = self.traces[v].ravel()
        flat = flat[flat >= 0]
        return np.bincount(flat, minlength=self.n).astype(np.int64)

    def harmonic_first_visits(self, v: int) -> np.ndarray:
        """Sum over walks of 1 / first-visit step, per target node."""
        acc = np.zeros(self.n, dtype=np.float64)
        for row in self.traces[v]:
            nodes, first = np.unique(row, return_index=True)
            keep = nodes >= 0
            acc[nodes[keep]] += 1.0 / (first[keep] + 1.0)
        return acc


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense node-to-anchor similarities, in both walk directions.

    to_anchor[v, i] estimates similarity from node v to anchor a_i (walks
    sourced at v); from_anchor[v, i] estimates similarity from a_i to v
    (walks sourced at a_i).
    """

    anchors: tuple[int, ...]
    to_anchor: np.ndarray
    from_anchor: np.ndarray
    kind: str  # "count" | "ordered"

    @property
    def k(self) -> int:
        return len(self.anchors)


def sample_walks(graph: Graph, config: WalkConfig) -> WalkSet:
    """Run config.n_w weighted random walks of config.l_w steps per node.

    Each source uses its own generator seeded from (config.seed, source),
    and all walks of a source advance one step per draw round, so results
    are identical no matter how sources are scheduled. Dead ends truncate
    a walk; there is no restart.
    """
    if graph.n == 0:
        raise ValueError("graph has no nodes")
    adj = graph.adjacency()
    n, n_w, l_w = graph.n, config.n_w, config.l_w
    traces = np.full((n, n_w, l_w), -1, dtype=np.int32)
    indptr, cumw = adj.indptr, adj.cum_weights
    base = cumw[indptr[:-1]]
    total = adj.total_weight
    for v in range(n):
        rng = np.random.default_rng([config.seed, v])
        cur = np.full(n_w, v, dtype=np.int64)
        active = total[cur] > 0
        for t in range(l_w):
            if not active.any():
                break
            r = rng.random(n_w)  # drawn every round to keep the stream fixed
            who = np.flatnonzero(active)
            nodes = cur[who]
            targets = base[nodes] + r[who] * total[nodes]
            idx = np.searchsorted(cumw, targets, side="right")
            idx = np.clip(idx - 1, indptr[nodes], indptr[nodes + 1] - 1)
            nxt = adj.neighbors[idx]
            traces[v, who, t] = nxt
            cur[who] = nxt
            active[who] = total[nxt] > 0
    return WalkSet(traces, config)


def bfs_distances(adj, source: int) -> np.ndarray:
    """Hop distances from source; -1 for unreachable nodes."""
    dist = np.full(adj.n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    d = 0
    while frontier.size:
        starts = adj.indptr[frontier]
        counts = adj.indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        offsets = np.repeat(starts, counts)
        within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        neigh = np.unique(adj.neighbors[offsets + within])
        frontier = neigh[dist[neigh] < 0]
        d += 1
        dist[frontier] = d
    return dist


def estimate_diameter(graph: Graph, exact_limit: int = 10_000, sweeps: int = 16) -> int:
    """Diameter of the largest connected component.

    Exact all-sources BFS up to exact_limit nodes; above that, a
    double-sweep lower bound maximized over several random starts.
    """
    if graph.n == 0:
        raise ValueError("graph has no nodes")
    adj = graph.adjacency()
    if graph.n <= exact_limit:
        # restrict to the largest component
        seen = np.zeros(graph.n, dtype=bool)
        best_component = np.array([0], dtype=np.int64)
        for s in range(graph.n):
            if seen[s]:
                continue
            dist = bfs_distances(adj, s)
            comp = np.flatnonzero(dist >= 0)
            seen[comp] = True
            if comp.size > best_component.size:
                best_component = comp
        return max(
            int(bfs_distances(adj, int(s)).max()) for s in best_component
        )
    rng = np.random.default_rng(0)
    best = 0
    for _ in range(sweeps):
        s = int(rng.integers(graph.n))
        dist = bfs_distances(adj, s)
        far = int(dist.argmax())
        best = max(best, int(bfs_distances(adj, far).max()))
    return best


def coverage_bound_walk_count(n: int) -> int:
    """Walk count (n^2 ln n)^(1/3) that finds an existing path w.h.p.

    Far above the practical default of 50; exposed as a named preset for
    experiments that want the guarantee.
    """
    if n < 2:
        return 1
    return max(1, int(np.ceil((n * n * np.log(n)) ** (1.0 / 3.0))))


def similarity_count(walkset: WalkSet, v: int, u: int) -> float:
    """Visit-count similarity: total visits / (l_w * n_w), in [0, 1]."""
    cfg = walkset.config
    return float(walkset.visit_counts(v)[u]) / (cfg.l_w * cfg.n_w)


def similarity_ordered(
    walkset: WalkSet, v: int, u: int, normalized: bool = False
) -> float:
    """Order-weighted similarity: sum over walks of 1 / first-visit step.

    Walks that never reach u contribute 0. Unnormalized by default
    (range [0, n_w]); normalized=True divides by n_w.
    """
    value = float(walkset.harmonic_first_visits(v)[u])
    return value / walkset.config.n_w if normalized else value


def similarity_matrix(
    walkset: WalkSet,
    anchors,
    kind: str = "count",
    normalized: bool = False,
) -> SimilarityMatrix:
    """Both-direction similarities between every node and every anchor."""
    anchors = tuple(int(a) for a in anchors)
    n = walkset.n
    for a in anchors:
        if not 0 <= a < n:
            raise ValueError(f"anchor id {a} out of range [0, {n})")
    if kind not in ("count", "ordered"):
        raise ValueError(f"unknown similarity kind {kind!r}")
    cfg = walkset.config
    k = len(anchors)
    to_anchor = np.zeros((n, k), dtype=np.float64)
    from_anchor = np.zeros((n, k), dtype=np.float64)
    anchor_idx = np.asarray(anchors, dtype=np.int64)
    if kind == "count":
        norm = float(cfg.l_w * cfg.n_w)
        for v in range(n):
            to_anchor[v] = walkset.visit_counts(v)[anchor_idx] / norm
        for i, a in enumerate(anchors):
            from_anchor[:, i] = walkset.visit_counts(a) / norm
    else:
        norm = float(cfg.n_w) if normalized else 1.0
        for v in range(n):
            to_anchor[v] = walkset.harmonic_first_visits(v)[anchor_idx] / norm
        for i, a in enumerate(anchors):
            from_anchor[:, i] = walkset.harmonic_first_visits(a) / norm
    return SimilarityMatrix(anchors, to_anchor, from_anchor, kind)


# ---------------------------------------------------------------------------
# Binary walk cache, keyed by (graph structure hash, walk config)
# ---------------------------------------------------------------------------


def save_walk_cache(path, walkset: WalkSet, graph: Graph) -> None:
    np.savez_compressed(
        Path(path),
        version=np.int64(_CACHE_VERSION),
        graph_hash=np.frombuffer(bytes.fromhex(graph.structure_hash()), dtype=np.uint8),
        n_w=np.int64(walkset.config.n_w),
        l_w=np.int64(walkset.config.l_w),
        seed=np.int64(walkset.config.seed),
        traces=walkset.traces,
    )


def load_walk_cache(path, graph: Graph, config: WalkConfig) -> WalkSet | None:
    """Load a cached WalkSet; returns None when the key does not match."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        with np.load(path) as data:
            if int(data["version"]) != _CACHE_VERSION:
                return None
            stored_hash = bytes(data["graph_hash"].tobytes()).hex()
            if stored_hash != graph.structure_hash():
                return None
            if (int(data["n_w"]), int(data["l_w"]), int(data["seed"])) != (
                config.n_w, config.l_w, config.seed,
            ):
                return None
            return WalkSet(data["traces"].copy(), config)
    except (OSError, KeyError, ValueError):
        return None
