"""Task construction, training loop, scoring, and collusion attacks.

Tasks
-----
* lp: predict whether a node pair is an edge. Held-out (val/test)
  positive edges are removed from the graph the walks run on, so the
  model never observes what it must predict.
* pnc: predict whether two nodes share a class label.
* nc: predict the class of a node (log-probabilities per class).

Units (edges, labeled pairs, nodes) are split 80:10:10 with negatives
sampled to match positives one-to-one. On inductive datasets with three
or more connected components, whole components are assigned to splits
instead, so evaluation components are disjoint from training ones.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .anchors import (
    AnchorSet,
    build_bipartite,
    default_anchor_count,
    frequency_select,
    greedy_select,
    random_select,
)
from .autodiff import NonFiniteError, Tape, Tensor
from .graph import Graph
from .model import (
    ModelConfig,
    bce_loss,
    embeddings,
    forward,
    init_params,
    nll_loss,
    node_logprobs,
    pair_probabilities,
)
from .seeding import derive_rng, derive_seed
from .walks import (
    SimilarityMatrix,
    WalkConfig,
    bfs_distances,
    estimate_diameter,
    sample_walks,
    similarity_matrix,
)

__all__ = [
    "DivergenceError",
    "TaskDataset",
    "TrainConfig",
    "TrainedModel",
    "RunResult",
    "make_splits",
    "roc_auc",
    "macro_ovr_auc",
    "score_pairs",
    "AdamState",
    "adam_step",
    "train",
    "evaluate_split",
    "adversarial_pnc",
    "adversarial_lp",
    "evaluate_attack",
    "run_collusion_attack",
    "select_anchors",
    "run_experiment",
]

TASKS = ("lp", "pnc", "nc")
SETTINGS = ("inductive", "transductive")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or activation."""


@dataclass
class TaskDataset:
    """Split units plus the graph and features the model actually sees."""

    task: str
    setting: str
    features: np.ndarray
    walk_graph: Graph
    train: np.ndarray  # lp/pnc: rows (u, v, label); nc: rows (node, label)
    val: np.ndarray
    test: np.ndarray
    n_classes: int | None = None
    train_components: list[np.ndarray] | None = None  # unit rows per component


@dataclass
class TrainConfig:
    epochs: int = 2000
    lr: float = 0.01
    lr_late: float = 0.001
    lr_switch: int = 200
    batch_graphs: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    eval_interval: int = 20
    early_stop_perfect: int = 0  # consecutive perfect val scores; 0 = off

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr <= 0 or self.lr_late <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_graphs < 1:
            raise ValueError("batch_graphs must be >= 1")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be >= 1")


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------


def _component_ids(graph: Graph) -> np.ndarray:
    adj = graph.adjacency()
    comp = np.full(graph.n, -1, dtype=np.int64)
    cur = 0
    for s in range(graph.n):
        if comp[s] >= 0:
            continue
        dist = bfs_distances(adj, s)
        comp[dist >= 0] = cur
        cur += 1
    return comp


def _split_counts(m: int) -> tuple[int, int, int]:
    tr, va = int(m * 0.8), int(m * 0.1)
    te = m - tr - va
    if tr < 1 or va < 1 or te < 1:
        raise ValueError(f"{m} units are too few for an 80:10:10 split")
    return tr, va, te


def _features_for(graph: Graph, setting: str) -> np.ndarray:
    """Inductive: raw attributes (constant 1 when absent). Transductive:
    attributes augmented with one-hot node identity."""
    if setting == "inductive":
        if graph.attributes is not None:
            return np.array(graph.attributes, dtype=np.float64)
        return np.ones((graph.n, 1))
    eye = np.eye(graph.n)
    if graph.attributes is not None:
        return np.concatenate([np.array(graph.attributes), eye], axis=1)
    return eye


def _sample_distinct_pairs(
    rng: np.random.Generator,
    count: int,
    nodes: np.ndarray,
    accept,
    max_tries_factor: int = 200,
) -> list[tuple[int, int]]:
    """Distinct unordered pairs over `nodes` satisfying `accept(u, v)`."""
    picked: set[tuple[int, int]] = set()
    tries = 0
    limit = max(1000, count * max_tries_factor)
    while len(picked) < count:
        if tries > limit:
            raise ValueError(
                f"could not sample {count} pairs (found {len(picked)})"
            )
        tries += 1
        u, v = (int(x) for x in rng.choice(nodes, size=2, replace=False))
        key = (min(u, v), max(u, v))
        if key in picked or not accept(*key):
            continue
        picked.add(key)
    return sorted(picked)


def _assign_components(
    rng: np.random.Generator, unit_counts: list[int]
) -> tuple[list[int], list[int], list[int]]:
    """Shuffle components and fill train/val/test to roughly 80:10:10."""
    order = list(rng.permutation(len(unit_counts)))
    total = sum(unit_counts)
    groups: list[list[int]] = [[], [], []]
    targets = [0.8 * total, 0.9 * total]
    acc = 0
    for c in order:
        if acc < targets[0]:
            groups[0].append(c)
        elif acc < targets[1]:
            groups[1].append(c)
        else:
            groups[2].append(c)
        acc += unit_counts[c]
    if any(not g for g in groups):
        raise ValueError("too few components for a component-wise split")
    return tuple(groups)  # type: ignore[return-value]


def make_splits(graph: Graph, task: str, setting: str, seed: int = 0) -> TaskDataset:
    """80:10:10 task dataset with verified, balanced negatives."""
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    if setting not in SETTINGS:
        raise ValueError(f"setting must be one of {SETTINGS}")
    if task in ("pnc", "nc") and graph.labels is None:
        raise ValueError(f"task {task!r} needs node labels")
    rng = np.random.default_rng(seed)
    features = _features_for(graph, setting)
    comp = _component_ids(graph)
    n_comp = int(comp.max()) + 1
    by_component = setting == "inductive" and n_comp >= 3

    edge_set = {(u, v) for u, v, _ in graph.edges}

    def is_non_edge(u: int, v: int) -> bool:
        return u != v and (u, v) not in edge_set

    if task == "nc":
        nodes = np.arange(graph.n)
        labels = np.asarray(graph.labels)
        if by_component:
            counts = [int((comp == c).sum()) for c in range(n_comp)]
            tr_c, va_c, te_c = _assign_components(rng, counts)
            parts = [
                nodes[np.isin(comp, list(grp))] for grp in (tr_c, va_c, te_c)
            ]
        else:
            perm = rng.permutation(graph.n)
            tr, va, _ = _split_counts(graph.n)
            parts = [perm[:tr], perm[tr: tr + va], perm[tr + va:]]
        arrays = [
            np.stack([p, labels[p]], axis=1).astype(np.int64) for p in parts
        ]
        train_components = None
        if by_component:
            train_components = [
                arrays[0][comp[arrays[0][:, 0]] == c]
                for c in tr_c
            ]
        return TaskDataset(
            task, setting, features, graph, arrays[0], arrays[1], arrays[2],
            n_classes=int(labels.max()) + 1, train_components=train_components,
        )

    if task == "lp":
        positives = [(u, v) for u, v, _ in graph.edges]
    else:  # pnc: all same-label pairs
        labels = np.asarray(graph.labels)
        positives = []
        for lab in np.unique(labels):
            members = np.flatnonzero(labels == lab)
            if by_component:
                for c in np.unique(comp[members]):
                    sub = members[comp[members] == c]
                    positives.extend(itertools.combinations(sub.tolist(), 2))
            else:
                positives.extend(itertools.combinations(members.tolist(), 2))
        if not positives:
            raise ValueError("no same-label pairs exist for pnc")

    def negatives_for(count: int, nodes: np.ndarray, used: set) -> list[tuple[int, int]]:
        if task == "lp":
            def ok(u, v):
                return is_non_edge(u, v) and (u, v) not in used and (
                    not by_component or comp[u] == comp[v])
        else:
            labels_arr = np.asarray(graph.labels)

            def ok(u, v):
                return (labels_arr[u] != labels_arr[v]) and (u, v) not in used and (
                    not by_component or comp[u] == comp[v])
        return _sample_distinct_pairs(rng, count, nodes, ok)

    if by_component:
        pos_by_comp: dict[int, list[tuple[int, int]]] = {}
        for u, v in positives:
            pos_by_comp.setdefault(int(comp[u]), []).append((u, v))
        counts = [len(pos_by_comp.get(c, [])) for c in range(n_comp)]
        tr_c, va_c, te_c = _assign_components(rng, counts)
        pos_parts = []
        node_pools = []
        for grp in (tr_c, va_c, te_c):
            pool = [p for c in sorted(grp) for p in pos_by_comp.get(c, [])]
            if not pool:
                raise ValueError("a split received no positive pairs")
            pos_parts.append(pool)
            node_pools.append(np.flatnonzero(np.isin(comp, list(grp))))
    else:
        perm = rng.permutation(len(positives))
        tr, va, _ = _split_counts(len(positives))
        ordered = [positives[i] for i in perm]
        pos_parts = [ordered[:tr], ordered[tr: tr + va], ordered[tr + va:]]
        node_pools = [np.arange(graph.n)] * 3

    used_negatives: set[tuple[int, int]] = set()
    arrays = []
    for pos, pool in zip(pos_parts, node_pools):
        neg = negatives_for(len(pos), pool, used_negatives)
        used_negatives.update(neg)
        rows = [(u, v, 1) for u, v in pos] + [(u, v, 0) for u, v in neg]
        arrays.append(np.asarray(rows, dtype=np.int64))

    if task == "lp":
        keep = set(pos_parts[0])
        walk_edges = [e for e in graph.edges if (e[0], e[1]) in keep]
        walk_graph = graph.with_edges(walk_edges)
    else:
        walk_graph = graph

    train_components = None
    if by_component:
        train_arr = arrays[0]
        train_components = [
            train_arr[comp[train_arr[:, 0]] == c] for c in sorted(tr_c)
        ]
    n_classes = int(np.asarray(graph.labels).max()) + 1 if graph.labels is not None else None
    return TaskDataset(
        task, setting, features, walk_graph, arrays[0], arrays[1], arrays[2],
        n_classes=n_classes, train_components=train_components,
    )


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=np.float64)
    sorted_x = x[order]
    boundaries = np.flatnonzero(np.diff(sorted_x)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(x)]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative (ties = 1/2)."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative")
    ranks = _average_ranks(scores)
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_ovr_auc(probs: np.ndarray, labels) -> float:
    """Macro-averaged one-vs-rest AUC over classes present in labels."""
    labels = np.asarray(labels).reshape(-1)
    present = np.unique(labels)
    aucs = []
    for c in present:
        mask = (labels == c).astype(np.int64)
        if 0 < mask.sum() < len(mask):
            aucs.append(roc_auc(probs[:, int(c)], mask))
    if not aucs:
        raise ValueError("macro AUC needs at least two classes present")
    return float(np.mean(aucs))


def score_pairs(z: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """sigmoid(z_u . z_v) per (u, v) row."""
    x = (z[pairs[:, 0]] * z[pairs[:, 1]]).sum(axis=1)
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    ex = np.exp(x[~positive])
    out[~positive] = ex / (1.0 + ex)
    return out


def _class_probs(z: np.ndarray, nodes: np.ndarray, cls_w: np.ndarray, cls_b: np.ndarray) -> np.ndarray:
    logits = z[nodes] @ cls_w + cls_b.reshape(1, -1)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def evaluate_split(
    dataset: TaskDataset,
    which: str,
    sim: SimilarityMatrix,
    params: dict[str, Tensor],
    config: ModelConfig,
) -> float:
    """Test/val/train AUC of the current parameters on one split."""
    units = getattr(dataset, which)
    z = embeddings(dataset.features, sim, params, config)
    if dataset.task in ("lp", "pnc"):
        return roc_auc(score_pairs(z, units[:, :2]), units[:, 2])
    probs = _class_probs(z, units[:, 0], params["cls_w"].data, params["cls_b"].data)
    return macro_ovr_auc(probs, units[:, 1])


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @staticmethod
    def for_params(params: dict[str, Tensor]) -> "AdamState":
        return AdamState(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected moment update, in place."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * (g * g)
        m_hat = state.m[name] / (1 - beta1 ** t)
        v_hat = state.v[name] / (1 - beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _loss_on_units(tape, z_t, units, task, params):
    if task in ("lp", "pnc"):
        probs = pair_probabilities(tape, z_t, units[:, :2])
        return bce_loss(tape, probs, units[:, 2])
    logprobs = node_logprobs(tape, z_t, units[:, 0], params["cls_w"], params["cls_b"])
    return nll_loss(tape, logprobs, units[:, 1])


def train(
    dataset: TaskDataset,
    sim: SimilarityMatrix,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> tuple[dict[str, Tensor], list[dict]]:
    """Full-batch training with the two-phase learning-rate schedule.

    Validation AUC is recorded every eval_interval epochs and the
    parameters with the best validation score are returned. When the
    dataset has per-component train units, components are processed in
    groups of batch_graphs per optimizer step.
    """
    n_classes = dataset.n_classes if dataset.task == "nc" else None
    params = init_params(
        model_config,
        dataset.features.shape[1],
        sim.k,
        n_classes=n_classes,
        rng=derive_rng(train_config.seed, "init"),
    )
    state = AdamState.for_params(params)
    drop_rng = derive_rng(train_config.seed, "dropout")

    if dataset.train_components:
        batches = [
            np.concatenate(dataset.train_components[i: i + train_config.batch_graphs])
            for i in range(0, len(dataset.train_components), train_config.batch_graphs)
        ]
    else:
        batches = [dataset.train]

    history: list[dict] = []
    best_val = -np.inf
    best_params = {k: p.data.copy() for k, p in params.items()}
    perfect_streak = 0

    for epoch in range(train_config.epochs):
        lr = train_config.lr if epoch < train_config.lr_switch else train_config.lr_late
        epoch_loss = 0.0
        try:
            for batch in batches:
                tape = Tape()
                z_t = forward(
                    dataset.features, sim, params, model_config, tape,
                    train=True, dropout_rng=drop_rng,
                )
                loss = _loss_on_units(tape, z_t, batch, dataset.task, params)
                tape.backward(loss)
                grads = {
                    k: (p.grad if p.grad is not None else np.zeros_like(p.data))
                    for k, p in params.items()
                }
                adam_step(
                    params, grads, state, lr,
                    train_config.beta1, train_config.beta2, train_config.eps,
                )
                for p in params.values():
                    p.zero_grad()
                tape.clear()
                epoch_loss += loss.item() * len(batch)
        except NonFiniteError as exc:
            raise DivergenceError(f"epoch {epoch}: {exc}") from exc
        epoch_loss /= sum(len(b) for b in batches)

        if epoch % train_config.eval_interval == 0 or epoch == train_config.epochs - 1:
            val_auc = evaluate_split(dataset, "val", sim, params, model_config)
            history.append(
                {"epoch": epoch, "loss": epoch_loss, "val_auc": val_auc, "lr": lr}
            )
            if val_auc > best_val:
                best_val = val_auc
                best_params = {k: p.data.copy() for k, p in params.items()}
            if train_config.early_stop_perfect:
                perfect_streak = perfect_streak + 1 if val_auc >= 1.0 else 0
                if perfect_streak >= train_config.early_stop_perfect:
                    break

    for name, p in params.items():
        p.data = best_params[name]
        p.zero_grad()
    return params, history


# ---------------------------------------------------------------------------
# Collusion attacks
# ---------------------------------------------------------------------------


def adversarial_pnc(graph: Graph, fraction: float = 0.10, seed: int = 0):
    """Add a clique among a random fraction of nodes.

    Returns the perturbed graph and the sorted colluding node ids.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    rng = np.random.default_rng(seed)
    m = int(np.ceil(fraction * graph.n))
    colluders = np.sort(rng.choice(graph.n, size=m, replace=False))
    existing = {(u, v) for u, v, _ in graph.edges}
    new_edges = list(graph.edges)
    for u, v in itertools.combinations(colluders.tolist(), 2):
        if (u, v) not in existing:
            new_edges.append((u, v, 1.0))
    return graph.with_edges(new_edges), colluders


def adversarial_lp(
    graph: Graph,
    pair_fraction: float = 0.10,
    hub_fraction: float = 0.02,
    seed: int = 0,
):
    """Wire colluders to the highest-degree colluders ("hubs").

    Samples pair_fraction of the non-adjacent node pairs, pools their
    endpoints as the colluding set, promotes the top hub_fraction of that
    set by degree (ties to lowest id) to hubs, and connects every other
    colluder to every hub. The colluding group then has diameter <= 2.
    Returns (perturbed graph, colluders, hubs).
    """
    rng = np.random.default_rng(seed)
    n = graph.n
    existing = {(u, v) for u, v, _ in graph.edges}
    non_edges = [
        (u, v)
        for u in range(n)
        for v in range(u + 1, n)
        if (u, v) not in existing
    ]
    if not non_edges:
        raise ValueError("graph has no non-adjacent pairs to collude on")
    count = max(1, int(round(pair_fraction * len(non_edges))))
    chosen = rng.choice(len(non_edges), size=count, replace=False)
    colluders = np.unique([x for i in chosen for x in non_edges[int(i)]])

    adj = graph.adjacency()
    degrees = np.array([adj.degree(int(u)) for u in colluders])
    n_hubs = max(1, int(np.ceil(hub_fraction * len(colluders))))
    order = np.lexsort((colluders, -degrees))  # degree desc, then id asc
    hubs = np.sort(colluders[order[:n_hubs]])
    hub_set = set(hubs.tolist())

    new_edges = list(graph.edges)
    for u in colluders.tolist():
        if u in hub_set:
            continue
        for h in hubs.tolist():
            key = (min(u, h), max(u, h))
            if key not in existing:
                new_edges.append((key[0], key[1], 1.0))
                existing.add(key)
    return graph.with_edges(new_edges), colluders, hubs


@dataclass
class TrainedModel:
    """Frozen parameters plus everything needed to re-embed a graph."""

    params: dict[str, Tensor]
    model_config: ModelConfig
    anchors: AnchorSet
    walk_config: WalkConfig


def _embed_graph(model: TrainedModel, graph: Graph, features: np.ndarray,
                 walk_seed: int) -> np.ndarray:
    cfg = replace(model.walk_config, seed=walk_seed)
    ws = sample_walks(graph, cfg)
    kind = "ordered" if model.model_config.similarity == "ordered" else "count"
    sim = similarity_matrix(ws, model.anchors.ids, kind)
    return embeddings(features, sim, model.params, model.model_config)


def evaluate_attack(
    model: TrainedModel,
    features: np.ndarray,
    base_graph: Graph,
    perturbed_graph: Graph,
    pairs: np.ndarray,
    labels: np.ndarray,
    walk_seed: int = 0,
) -> tuple[float, float, float]:
    """(AUC before, AUC after, drop) on fixed pairs with frozen parameters.

    Walks and similarities are recomputed on each graph with the same
    seed, so an unperturbed graph yields a drop of exactly zero.
    """
    z_before = _embed_graph(model, base_graph, features, walk_seed)
    before = roc_auc(score_pairs(z_before, pairs), labels)
    z_after = _embed_graph(model, perturbed_graph, features, walk_seed)
    after = roc_auc(score_pairs(z_after, pairs), labels)
    return before, after, before - after


def _colluder_pairs_pnc(graph: Graph, colluders: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(graph.labels)
    pos = [
        (u, v)
        for u, v in itertools.combinations(colluders.tolist(), 2)
        if labels[u] == labels[v]
    ]
    if not pos:
        raise ValueError("colluding set has no same-label pair to score")
    neg_pool = [
        (u, v)
        for u, v in itertools.combinations(colluders.tolist(), 2)
        if labels[u] != labels[v]
    ]
    if len(neg_pool) < len(pos):
        raise ValueError("colluding set has too few different-label pairs")
    idx = rng.choice(len(neg_pool), size=len(pos), replace=False)
    neg = [neg_pool[int(i)] for i in idx]
    pairs = np.asarray(pos + neg, dtype=np.int64)
    labels_arr = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))]).astype(np.int64)
    return pairs, labels_arr


def _colluder_pairs_lp(original: Graph, colluders: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    coll = set(colluders.tolist())
    pos = [(u, v) for u, v, _ in original.edges if u in coll and v in coll]
    if not pos:
        raise ValueError("colluding set spans no original edges to score")
    existing = {(u, v) for u, v, _ in original.edges}
    nodes = np.asarray(sorted(coll), dtype=np.int64)
    neg = _sample_distinct_pairs(
        rng, len(pos), nodes, lambda u, v: (u, v) not in existing
    )
    pairs = np.asarray(pos + neg, dtype=np.int64)
    labels_arr = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))]).astype(np.int64)
    return pairs, labels_arr


def run_collusion_attack(
    model: TrainedModel,
    dataset: TaskDataset,
    original_graph: Graph,
    samples: int = 5,
    seed: int = 0,
    fraction: float = 0.10,
    pair_fraction: float = 0.10,
    hub_fraction: float = 0.02,
) -> dict:
    """Attack protocol: mean before/after AUC over sampled colluding groups.

    The base graph is the one the model walks at evaluation time (for lp
    that excludes held-out edges); scoring labels always come from the
    original graph.
    """
    if dataset.task not in ("lp", "pnc"):
        raise ValueError("the collusion protocol applies to lp and pnc")
    records = []
    for s in range(samples):
        sample_seed = derive_seed(seed, "attack-sample", s)
        rng = np.random.default_rng(sample_seed)
        if dataset.task == "pnc":
            perturbed, colluders = adversarial_pnc(
                dataset.walk_graph, fraction, sample_seed
            )
            pairs, labels = _colluder_pairs_pnc(original_graph, colluders, rng)
        else:
            perturbed, colluders, _ = adversarial_lp(
                dataset.walk_graph, pair_fraction, hub_fraction, sample_seed
            )
            pairs, labels = _colluder_pairs_lp(original_graph, colluders, rng)
        before, after, delta = evaluate_attack(
            model, dataset.features, dataset.walk_graph, perturbed, pairs, labels,
            walk_seed=derive_seed(seed, "attack-walks", s),
        )
        records.append(
            {"sample": s, "colluders": len(colluders), "before": before,
             "after": after, "delta": delta}
        )
    return {
        "samples": records,
        "before_mean": float(np.mean([r["before"] for r in records])),
        "after_mean": float(np.mean([r["after"] for r in records])),
        "delta_mean": float(np.mean([r["delta"] for r in records])),
    }


# ---------------------------------------------------------------------------
# End-to-end orchestration
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    test_auc: float
    val_auc: float
    history: list[dict]
    model: TrainedModel
    dataset: TaskDataset
    sim: SimilarityMatrix
    diameter: int
    k: int


def _resolve_anchor_count(spec, n: int) -> int:
    if spec is None or spec == "log2n":
        return default_anchor_count(n)
    if isinstance(spec, str) and spec.endswith("%"):
        return max(1, int(round(float(spec[:-1]) / 100.0 * n)))
    k = int(spec)
    if k < 1:
        raise ValueError("anchor count must be >= 1")
    return min(k, n)


def select_anchors(
    walkset, strategy: str, k: int, seed: int,
    sample_fraction: float = 0.30, rounds: int = 5,
) -> AnchorSet:
    if strategy == "greedy":
        return greedy_select(build_bipartite(walkset), k)
    if strategy == "frequency":
        return frequency_select(
            walkset, k, sample_fraction=sample_fraction, rounds=rounds, seed=seed
        )
    if strategy == "random":
        return random_select(walkset.n, k, seed)
    raise ValueError(f"unknown anchor strategy {strategy!r}")


def run_experiment(
    graph: Graph,
    task: str,
    setting: str = "inductive",
    n_walks: int = 50,
    walk_length: int | None = None,
    anchor_strategy: str = "greedy",
    anchor_count=None,
    model_config: ModelConfig | None = None,
    train_config: TrainConfig | None = None,
    seed: int = 0,
) -> RunResult:
    """Split, walk, select anchors, train, and score one seed end to end.

    walk_length=None uses the exact diameter of the walk graph's largest
    component; anchor_count may be an int, "log2n", or a percentage
    string like "2.5%".
    """
    model_config = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    dataset = make_splits(graph, task, setting, derive_seed(seed, "split"))
    diameter = walk_length or max(1, estimate_diameter(dataset.walk_graph))
    walk_config = WalkConfig(n_walks, diameter, derive_seed(seed, "walks"))
    walkset = sample_walks(dataset.walk_graph, walk_config)
    k = _resolve_anchor_count(anchor_count, graph.n)
    anchors = select_anchors(
        walkset, anchor_strategy, k, derive_seed(seed, "anchors")
    )
    sim = similarity_matrix(walkset, anchors.ids, model_config.similarity)
    run_train_config = replace(train_config, seed=derive_seed(seed, "train"))
    params, history = train(dataset, sim, model_config, run_train_config)
    val_auc = max((h["val_auc"] for h in history), default=float("nan"))
    test_auc = evaluate_split(dataset, "test", sim, params, model_config)
    model = TrainedModel(params, model_config, anchors, walk_config)
    return RunResult(test_auc, val_auc, history, model, dataset, sim, diameter, k)
