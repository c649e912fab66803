"""Position-aware node embeddings from random-walk reachability to anchors.

The pipeline: sample fixed-length weighted random walks from every node,
summarize them as node-to-anchor similarities in both directions, select
the anchors that maximize walk-reachability coverage, and train a small
anchor-message network (with its own reverse-mode gradient engine) for
link prediction, pairwise node classification, or node classification.
"""

from .graph import (
    AdjacencyIndex,
    Graph,
    GraphFormatError,
    generate_connected_caveman,
    generate_grid,
    load_graph,
    save_graph,
)
from .walks import (
    SimilarityMatrix,
    WalkConfig,
    WalkSet,
    coverage_bound_walk_count,
    estimate_diameter,
    load_walk_cache,
    sample_walks,
    save_walk_cache,
    similarity_count,
    similarity_matrix,
    similarity_ordered,
)
from .anchors import (
    AnchorSet,
    BipartiteReach,
    brute_force_select,
    build_bipartite,
    default_anchor_count,
    frequency_select,
    greedy_select,
    load_anchors,
    random_select,
    save_anchors,
)
from .autodiff import (
    NonFiniteError,
    Tape,
    Tensor,
    grad_check,
    load_checkpoint,
    save_checkpoint,
)
from .model import (
    ModelConfig,
    attention_aggregate,
    bce_loss,
    decode_node,
    decode_pair,
    embeddings,
    forward,
    forward_reference,
    init_params,
    mean_pool,
    message,
    message_matrix,
    nll_loss,
)
from .training import (
    AdamState,
    DivergenceError,
    RunResult,
    TaskDataset,
    TrainConfig,
    TrainedModel,
    adam_step,
    adversarial_lp,
    adversarial_pnc,
    evaluate_attack,
    evaluate_split,
    macro_ovr_auc,
    make_splits,
    roc_auc,
    run_collusion_attack,
    run_experiment,
    score_pairs,
    select_anchors,
    train,
)

__version__ = "0.1.0"
