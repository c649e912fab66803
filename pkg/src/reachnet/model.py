"""Anchor-message network over reachability similarities.

Each layer builds one message per (node, anchor) pair by weighting the
two feature vectors with the walk similarities in both directions,
concatenating, and projecting:

    msg(v, a) = (s(v,a) * h_v || s(a,v) * h_a) @ W

The k per-anchor message rows are aggregated into the next hidden state
by a plain mean or by learned attention coefficients (with a residual
projection of the layer input). No aggregation happens in the final
layer; instead the k message rows are collapsed by an output vector, so
the embedding width equals the anchor count.

The ablated "equal" variant drops the similarity weights from the
message (plain concatenation with mean pooling), which removes the
positional signal and serves as the control model.

The module keeps two implementations: per-node reference functions
(`message`, `message_matrix`, `mean_pool`, `attention_aggregate`,
`forward_reference`) and the algebraically equivalent vectorized
`forward` used for training. Tests hold them to the same outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor
from .walks import SimilarityMatrix

__all__ = [
    "ModelConfig",
    "init_params",
    "message",
    "message_matrix",
    "mean_pool",
    "attention_aggregate",
    "forward",
    "forward_reference",
    "embeddings",
    "pair_probabilities",
    "node_logprobs",
    "decode_pair",
    "decode_node",
    "bce_loss",
    "nll_loss",
]

AGGREGATORS = ("attention", "mean", "equal")
SIMILARITIES = ("count", "ordered")
FINAL_ACTIVATIONS = ("identity", "sigmoid")


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    hidden: int = 32
    aggregator: str = "attention"
    similarity: str = "count"
    dropout: float = 0.5
    final_activation: str = "identity"
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.hidden < 1:
            raise ValueError("hidden width must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"similarity must be one of {SIMILARITIES}")
        if self.final_activation not in FINAL_ACTIVATIONS:
            raise ValueError(f"final_activation must be one of {FINAL_ACTIVATIONS}")


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def init_params(
    config: ModelConfig,
    in_dim: int,
    n_anchors: int,
    n_classes: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict[str, Tensor]:
    """Trainable tensors for the given configuration.

    Layer l's message projection is (2 * in_width, hidden) where in_width
    is the raw attribute width at layer 1 and the hidden width after.
    Attention parameters exist only for layers that aggregate (l < L).
    The classification head (n_anchors x n_classes weights, zero bias)
    is added when n_classes is given.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    h = config.hidden
    params: dict[str, Tensor] = {}
    width = in_dim
    for layer in range(1, config.layers + 1):
        params[f"msg_w{layer}"] = Tensor(_glorot(rng, 2 * width, h), requires_grad=True)
        width = h
    if config.aggregator == "attention":
        for layer in range(1, config.layers):
            params[f"att_mat{layer}"] = Tensor(_glorot(rng, h, h), requires_grad=True)
            params[f"att_vec{layer}"] = Tensor(_glorot(rng, 2 * h, 1), requires_grad=True)
    params["out_w"] = Tensor(_glorot(rng, h, 1), requires_grad=True)
    if n_classes is not None:
        params["cls_w"] = Tensor(_glorot(rng, n_anchors, n_classes), requires_grad=True)
        params["cls_b"] = Tensor(np.zeros((1, n_classes)), requires_grad=True)
    return params


# ---------------------------------------------------------------------------
# Per-node reference operations (plain numpy; the oracle implementation)
# ---------------------------------------------------------------------------


def message(h_v, h_a, s_to: float, s_from: float, equal: bool = False) -> np.ndarray:
    """Similarity-weighted concatenation of node and anchor features."""
    h_v = np.asarray(h_v, dtype=np.float64).reshape(-1)
    h_a = np.asarray(h_a, dtype=np.float64).reshape(-1)
    if h_v.shape != h_a.shape:
        raise ValueError(f"feature width mismatch {h_v.shape} vs {h_a.shape}")
    if equal:
        return np.concatenate([h_v, h_a])
    return np.concatenate([s_to * h_v, s_from * h_a])


def message_matrix(
    h_v, anchor_feats, s_to_row, s_from_row, weight, equal: bool = False
) -> np.ndarray:
    """Stack the k anchor messages as rows and project: (k, hidden)."""
    anchor_feats = np.asarray(anchor_feats, dtype=np.float64)
    rows = [
        message(h_v, anchor_feats[i], s_to_row[i], s_from_row[i], equal)
        for i in range(anchor_feats.shape[0])
    ]
    return np.stack(rows, axis=0) @ np.asarray(weight, dtype=np.float64)


def mean_pool(message_rows) -> np.ndarray:
    """Arithmetic mean over the k message rows."""
    return np.asarray(message_rows, dtype=np.float64).mean(axis=0)


def attention_aggregate(
    h_query, message_rows, att_mat, att_vec, slope: float = 0.2
) -> tuple[np.ndarray, np.ndarray]:
    """Attention-weighted sum of projected message rows plus residual.

    Scores per anchor come from the concatenated projections of the query
    and the anchor's message row through the attention vector, passed
    through a leaky rectifier and softmax-normalized. Returns the
    aggregated vector and the coefficients.
    """
    m = np.asarray(message_rows, dtype=np.float64)
    att_mat = np.asarray(att_mat, dtype=np.float64)
    att_vec = np.asarray(att_vec, dtype=np.float64).reshape(-1)
    q = np.asarray(h_query, dtype=np.float64).reshape(-1) @ att_mat
    t = m @ att_mat
    scores = np.array(
        [np.concatenate([q, t[i]]) @ att_vec for i in range(m.shape[0])]
    )
    scores = np.where(scores > 0, scores, slope * scores)
    shifted = np.exp(scores - scores.max())
    alpha = shifted / shifted.sum()
    return alpha @ t + q, alpha


def forward_reference(
    features: np.ndarray,
    sim: SimilarityMatrix,
    params: dict[str, np.ndarray],
    config: ModelConfig,
) -> np.ndarray:
    """Per-node composition of the reference ops (evaluation mode)."""
    n = features.shape[0]
    k = sim.k
    equal = config.aggregator == "equal"
    h = np.asarray(features, dtype=np.float64)
    for layer in range(1, config.layers + 1):
        weight = np.asarray(params[f"msg_w{layer}"], dtype=np.float64)
        anchor_feats = h[list(sim.anchors)]
        msgs = np.stack([
            message_matrix(
                h[v], anchor_feats, sim.to_anchor[v], sim.from_anchor[v], weight, equal
            )
            for v in range(n)
        ])
        if layer == config.layers:
            out_w = np.asarray(params["out_w"], dtype=np.float64).reshape(-1)
            z = msgs @ out_w
            if config.final_activation == "sigmoid":
                z = 1.0 / (1.0 + np.exp(-z))
            return z
        if config.aggregator == "attention":
            att_mat = params[f"att_mat{layer}"]
            att_vec = params[f"att_vec{layer}"]
            nxt = np.empty((n, config.hidden))
            for v in range(n):
                query = h[v] if h.shape[1] == config.hidden else mean_pool(msgs[v])
                nxt[v], _ = attention_aggregate(
                    query, msgs[v], att_mat, att_vec, config.leaky_slope
                )
            h = nxt
        else:
            h = np.stack([mean_pool(msgs[v]) for v in range(n)])
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# Vectorized forward (training path)
# ---------------------------------------------------------------------------


def forward(
    features: np.ndarray,
    sim: SimilarityMatrix,
    params: dict[str, Tensor],
    config: ModelConfig,
    tape: Tape,
    train: bool = False,
    dropout_rng: np.random.Generator | None = None,
    return_attention: bool = False,
):
    """Embeddings for every node, shape (n, k).

    Equivalent to the per-node reference composition but expressed with
    whole-matrix primitives: with P = H @ W_top and Q = H[anchors] @
    W_bot, the message row for (v, i) is s_to[v,i] * P[v] + s_from[v,i] *
    Q[i], so aggregations and the output projection reduce to elementwise
    products and matmuls against the similarity matrices.

    Attention layers whose input width differs from the hidden width
    (e.g. raw attributes at layer 1) use the mean message row as the
    query/residual vector; otherwise the layer input itself is used.
    """
    n = features.shape[0]
    k = sim.k
    if sim.to_anchor.shape != (n, k) or sim.from_anchor.shape != (n, k):
        raise ValueError("similarity matrices do not match the feature rows")
    if params["msg_w1"].shape[0] != 2 * features.shape[1]:
        raise ValueError(
            f"layer-1 weights expect input width {params['msg_w1'].shape[0] // 2}, "
            f"features have width {features.shape[1]}"
        )
    if train and config.dropout > 0 and dropout_rng is None:
        raise ValueError("training forward needs a dropout generator")

    equal = config.aggregator == "equal"
    hid = config.hidden
    anchor_ids = np.asarray(sim.anchors, dtype=np.int64)

    s_to = Tensor(sim.to_anchor)
    s_from = Tensor(sim.from_anchor)
    ones_1k = Tensor(np.ones((1, k)))
    ones_n1 = Tensor(np.ones((n, 1)))
    ones_1h = Tensor(np.ones((1, hid)))

    def mean_of_messages(p_t: Tensor, q_t: Tensor) -> Tensor:
        if equal:
            return tape.add(p_t, tape.matmul(ones_n1, tape.mean_rows(q_t)))
        weighted_p = tape.mul(p_t, tape.matmul(tape.sum_cols(s_to), ones_1h))
        return tape.scale(tape.add(weighted_p, tape.matmul(s_from, q_t)), 1.0 / k)

    attention_weights: list[np.ndarray] = []
    h_t = Tensor(np.asarray(features, dtype=np.float64))
    width = features.shape[1]
    for layer in range(1, config.layers + 1):
        w_t = params[f"msg_w{layer}"]
        w_top = tape.slice_rows(w_t, 0, width)
        w_bot = tape.slice_rows(w_t, width, 2 * width)
        p_t = tape.matmul(h_t, w_top)
        q_t = tape.matmul(tape.gather_rows(h_t, anchor_ids), w_bot)

        if layer == config.layers:
            p_out = tape.matmul(p_t, params["out_w"])
            q_out = tape.matmul(q_t, params["out_w"])
            p_cols = tape.matmul(p_out, ones_1k)
            q_rows = tape.matmul(ones_n1, tape.transpose(q_out))
            if equal:
                z_t = tape.add(p_cols, q_rows)
            else:
                z_t = tape.add(tape.mul(s_to, p_cols), tape.mul(s_from, q_rows))
            if config.final_activation == "sigmoid":
                z_t = tape.sigmoid(z_t)
            if return_attention:
                return z_t, attention_weights
            return z_t

        if config.aggregator == "attention":
            att_mat = params[f"att_mat{layer}"]
            att_vec = params[f"att_vec{layer}"]
            a_top = tape.slice_rows(att_vec, 0, hid)
            a_bot = tape.slice_rows(att_vec, hid, 2 * hid)
            query = h_t if width == hid else mean_of_messages(p_t, q_t)
            g_t = tape.matmul(query, att_mat)
            p2 = tape.matmul(p_t, att_mat)
            q2 = tape.matmul(q_t, att_mat)
            g_cols = tape.matmul(tape.matmul(g_t, a_top), ones_1k)
            u_cols = tape.matmul(tape.matmul(p2, a_bot), ones_1k)
            w_rows = tape.matmul(ones_n1, tape.transpose(tape.matmul(q2, a_bot)))
            if equal:
                raw = tape.add(tape.add(g_cols, u_cols), w_rows)
            else:
                raw = tape.add(
                    tape.add(g_cols, tape.mul(s_to, u_cols)), tape.mul(s_from, w_rows)
                )
            alpha = tape.softmax(tape.leaky_relu(raw, config.leaky_slope))
            if return_attention:
                attention_weights.append(alpha.data.copy())
            if equal:
                h_next = tape.add(tape.add(p2, tape.matmul(alpha, q2)), g_t)
            else:
                aw_to = tape.mul(alpha, s_to)
                aw_from = tape.mul(alpha, s_from)
                h_next = tape.add(
                    tape.add(
                        tape.mul(p2, tape.matmul(tape.sum_cols(aw_to), ones_1h)),
                        tape.matmul(aw_from, q2),
                    ),
                    g_t,
                )
        else:
            h_next = mean_of_messages(p_t, q_t)

        h_t = tape.dropout(h_next, config.dropout, train, dropout_rng)
        width = hid
    raise AssertionError("unreachable")


def embeddings(
    features: np.ndarray,
    sim: SimilarityMatrix,
    params: dict[str, Tensor],
    config: ModelConfig,
) -> np.ndarray:
    """Evaluation-mode embeddings as a plain array."""
    return forward(features, sim, params, config, Tape(record=False)).data


# ---------------------------------------------------------------------------
# Decoders and losses
# ---------------------------------------------------------------------------


def decode_pair(z_u, z_v) -> float:
    """Probability that a pair is linked / same-class: sigmoid(z_u . z_v)."""
    x = float(np.dot(np.asarray(z_u).reshape(-1), np.asarray(z_v).reshape(-1)))
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    return np.exp(x) / (1.0 + np.exp(x))


def decode_node(z_v, cls_w, cls_b) -> np.ndarray:
    """Per-class log-probabilities of one node embedding."""
    logits = np.asarray(z_v).reshape(-1) @ np.asarray(cls_w) + np.asarray(cls_b).reshape(-1)
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def pair_probabilities(tape: Tape, z_t: Tensor, pairs: np.ndarray) -> Tensor:
    """Column of sigmoid(z_u . z_v) for each (u, v) row of pairs."""
    z_u = tape.gather_rows(z_t, pairs[:, 0])
    z_v = tape.gather_rows(z_t, pairs[:, 1])
    return tape.sigmoid(tape.sum_cols(tape.mul(z_u, z_v)))


def node_logprobs(tape: Tape, z_t: Tensor, nodes: np.ndarray,
                  cls_w: Tensor, cls_b: Tensor) -> Tensor:
    """Log-probabilities over classes for a batch of nodes."""
    z_b = tape.gather_rows(z_t, np.asarray(nodes, dtype=np.int64))
    ones = Tensor(np.ones((z_b.shape[0], 1)))
    logits = tape.add(tape.matmul(z_b, cls_w), tape.matmul(ones, cls_b))
    return tape.log_softmax(logits)


def bce_loss(tape: Tape, probs: Tensor, labels) -> Tensor:
    """Mean binary cross entropy; probabilities clamped away from {0, 1}."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if y.shape != probs.shape:
        raise ValueError(f"labels shape {y.shape} does not match probs {probs.shape}")
    p = tape.clamp(probs, 1e-12, 1.0 - 1e-12)
    one_minus_p = tape.add_scalar(tape.scale(p, -1.0), 1.0)
    pos = tape.mul(Tensor(y), tape.log(p))
    neg = tape.mul(Tensor(1.0 - y), tape.log(one_minus_p))
    return tape.scale(tape.total_mean(tape.add(pos, neg)), -1.0)


def nll_loss(tape: Tape, logprobs: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of the true classes."""
    idx = np.asarray(labels, dtype=np.int64).reshape(-1)
    m, c = logprobs.shape
    if idx.shape[0] != m:
        raise ValueError("one label per row required")
    onehot = np.zeros((m, c))
    onehot[np.arange(m), idx] = 1.0
    picked = tape.total_sum(tape.mul(logprobs, Tensor(onehot)))
    return tape.scale(picked, -1.0 / m)
