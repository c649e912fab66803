"""Anchor selection by maximizing walk-reachability coverage.

Reachability is summarized as a bipartite relation between two copies of
the node set: candidate u on the left covers node v on the right when
some retained walk started at v visits u. Selecting k anchors that cover
the most right-side nodes is a maximum-coverage problem; the coverage
function is monotone submodular, so greedy selection is within (1 - 1/e)
of the optimum. A brute-force enumerator is kept as the test oracle.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .walks import WalkSet

__all__ = [
    "BipartiteReach",
    "AnchorSet",
    "build_bipartite",
    "greedy_select",
    "frequency_select",
    "random_select",
    "brute_force_select",
    "default_anchor_count",
    "save_anchors",
    "load_anchors",
]


@dataclass(frozen=True)
class AnchorSet:
    """Chosen anchor ids plus how they were chosen.

    Greedy sets keep selection order; frequency/random sets are sorted.
    """

    ids: tuple[int, ...]
    provenance: str

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("anchor ids must be distinct")

    @property
    def k(self) -> int:
        return len(self.ids)


class BipartiteReach:
    """Per-candidate reachability sets over the right-side node copy."""

    def __init__(self, reach: list[frozenset[int]], n_right: int):
        self.reach = reach
        self.n_right = n_right

    @property
    def n_left(self) -> int:
        return len(self.reach)

    def coverage(self, ids) -> int:
        covered: set[int] = set()
        for u in ids:
            covered |= self.reach[u]
        return len(covered)

    def covered_by(self, ids) -> set[int]:
        covered: set[int] = set()
        for u in ids:
            covered |= self.reach[u]
        return covered


def build_bipartite(walkset: WalkSet, subset: np.ndarray | None = None) -> BipartiteReach:
    """Invert walk traces into reachability sets.

    subset, when given, is an (n, m) array of walk indices retained per
    source; None keeps every walk.
    """
    n = walkset.n
    reach: list[set[int]] = [set() for _ in range(n)]
    for v in range(n):
        rows = walkset.traces[v] if subset is None else walkset.traces[v][subset[v]]
        visited = np.unique(rows)
        for u in visited:
            if u >= 0:
                reach[u].add(v)
    return BipartiteReach([frozenset(s) for s in reach], n)


def greedy_select(bipartite: BipartiteReach, k: int) -> AnchorSet:
    """Pick k candidates by largest marginal coverage, ties to lowest id.

    Lazy evaluation: stale marginals sit in a max-heap and are recomputed
    on pop; because marginals only shrink as coverage grows, an entry that
    recomputes to its stored key is the true (marginal, lowest-id) argmax.
    Output is identical to the naive greedy scan.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = bipartite.n_left
    covered: set[int] = set()
    heap = [(-len(bipartite.reach[u]), u) for u in range(n)]
    heapq.heapify(heap)
    chosen: list[int] = []
    while heap and len(chosen) < k:
        neg_stale, u = heapq.heappop(heap)
        margin = len(bipartite.reach[u] - covered)
        if margin == -neg_stale:
            chosen.append(u)
            covered |= bipartite.reach[u]
        else:
            heapq.heappush(heap, (-margin, u))
    return AnchorSet(tuple(chosen), "greedy")


def brute_force_select(
    bipartite: BipartiteReach, k: int, max_combinations: int = 1_000_000
) -> tuple[AnchorSet, int]:
    """Exact optimum by enumeration; guarded against large instances."""
    import itertools

    n = bipartite.n_left
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, n)
    if math.comb(n, k) > max_combinations:
        raise ValueError(
            f"C({n}, {k}) exceeds the {max_combinations} enumeration guard"
        )
    best_ids: tuple[int, ...] | None = None
    best_cov = -1
    for combo in itertools.combinations(range(n), k):
        cov = bipartite.coverage(combo)
        if cov > best_cov:
            best_cov = cov
            best_ids = combo
    return AnchorSet(best_ids, "exhaustive"), best_cov


def _rank_by_frequency(
    counts: dict[int, int], k: int, full: BipartiteReach
) -> list[int]:
    """Most-often-selected first; frequency ties broken by marginal
    coverage on the full reachability structure, then lowest id."""
    chosen: list[int] = []
    covered: set[int] = set()
    remaining = dict(counts)
    while remaining and len(chosen) < k:
        top = max(remaining.values())
        group = [u for u, c in remaining.items() if c == top]
        while group and len(chosen) < k:
            best_margin = max(len(full.reach[u] - covered) for u in group)
            pick = min(u for u in group if len(full.reach[u] - covered) == best_margin)
            chosen.append(pick)
            covered |= full.reach[pick]
            group.remove(pick)
            del remaining[pick]
    return chosen


def frequency_select(
    walkset: WalkSet,
    k: int,
    sample_fraction: float = 0.30,
    rounds: int = 5,
    seed: int = 0,
) -> AnchorSet:
    """Repeat greedy selection on sampled walk subsets, keep frequent picks.

    Each round samples ceil(sample_fraction * n_w) walk indices per source
    without replacement (independent per-round generators), runs greedy
    selection on that subset's reachability, and tallies the winners. The
    final k are the most frequently selected nodes.
    """
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError("sample_fraction must be in (0, 1]")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    n, n_w = walkset.n, walkset.config.n_w
    m = int(np.ceil(sample_fraction * n_w))
    counts: dict[int, int] = {}
    for r in range(rounds):
        rng = np.random.default_rng([seed, r])
        subset = np.empty((n, m), dtype=np.int64)
        for v in range(n):
            subset[v] = rng.choice(n_w, size=m, replace=False)
        picked = greedy_select(build_bipartite(walkset, subset), k)
        for u in picked.ids:
            counts[u] = counts.get(u, 0) + 1
    full = build_bipartite(walkset)
    chosen = _rank_by_frequency(counts, k, full)
    return AnchorSet(tuple(sorted(chosen)), "frequency")


def random_select(n: int, k: int, seed: int = 0) -> AnchorSet:
    """Uniform sample of k distinct nodes (the selection baseline)."""
    if k > n:
        raise ValueError(f"cannot pick {k} anchors from {n} nodes")
    rng = np.random.default_rng(seed)
    ids = rng.choice(n, size=k, replace=False)
    return AnchorSet(tuple(sorted(int(x) for x in ids)), "random")


def default_anchor_count(n: int) -> int:
    """ceil(ln(n)^2), floored at one anchor."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return max(1, int(np.ceil(np.log(n) ** 2)))


def save_anchors(path, anchors: AnchorSet, k: int | None = None,
                 seed: int | None = None, config_hash: str | None = None) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        fh.write(
            f"# provenance={anchors.provenance} k={k if k is not None else anchors.k}"
            f" seed={seed} config={config_hash}\n"
        )
        for a in anchors.ids:
            fh.write(f"{a}\n")


def load_anchors(path) -> AnchorSet:
    provenance = "unknown"
    ids: list[int] = []
    with open(Path(path), "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("provenance="):
                        provenance = token.split("=", 1)[1]
                continue
            if line:
                ids.append(int(line))
    return AnchorSet(tuple(ids), provenance)
