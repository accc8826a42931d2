"""Structural document embeddings from link-prediction training.

The heterogeneous attention encoder (see :mod:`graphret.gnn`) is trained on
the base graph edges with a binary cross-entropy link-prediction objective:
true edges against destination-corrupted negatives.  After training the
encoder is frozen; every document's structural embedding is its Paper node's
final-layer state, and every passage of a document shares that embedding
verbatim.

Training is full-batch and bit-deterministic given the config seed, which
fans out into independent sub-seeds for features, parameter init, the
holdout split, and negative sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.stats import rankdata

from .corpus import Passage
from .embfile import write_kv_report
from .gnn import (
    Adam,
    CompiledGraph,
    GnnParams,
    NodeEmbeddings,
    compile_graph,
    edge_scores,
    gnn_forward_compiled,
    init_gnn_params,
    link_pred_loss_and_grad,
    sample_negatives,
)
from .hashing import derive_seed
from .hdg import EDGE_SIGNATURES, PAPER, HeteroGraph
from .text_embed import EmbedderSpec, embed_text

DEFAULT_STRUCT_DIM = 64


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    learning_rate: float = 0.05
    k_neg: int = 1
    seed: int = 0
    holdout_frac: float = 0.15
    dim: int = DEFAULT_STRUCT_DIM
    layers: int = 2
    heads: int = 2
    feature_dim: int = 64

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.k_neg < 1:
            raise ValueError("k_neg must be >= 1")
        if not 0.0 <= self.holdout_frac < 1.0:
            raise ValueError("holdout_frac must be in [0, 1)")


@dataclass
class TrainReport:
    epochs: int
    final_loss: float
    loss_history: list[float]
    auc_pretrain: dict[str, float]
    auc: dict[str, float]


@dataclass
class TrainedEncoder:
    """Frozen encoder: trained parameters plus the node embedding table."""

    params: GnnParams
    config: TrainConfig
    node_embeddings: NodeEmbeddings
    report: TrainReport

    def document_embedding(self, doc_id: str) -> np.ndarray:
        return self.node_embeddings.get(PAPER, doc_id)

    def document_embeddings(self) -> dict[str, np.ndarray]:
        index = self.node_embeddings.node_index[PAPER]
        return {doc_id: self.node_embeddings.vectors[PAPER][row] for doc_id, row in index.items()}


def title_projection_matrix(seed: int, dim: int, title_dim: int) -> np.ndarray:
    """Seeded Gaussian projection taking hashed-TF title vectors to the
    feature dimension."""
    rng = np.random.default_rng(derive_seed(seed, "title-projection"))
    return rng.normal(0.0, 1.0 / np.sqrt(title_dim), size=(dim, title_dim))


def init_node_features(
    graph: HeteroGraph,
    seed: int,
    dim: int = 64,
    title_dim: int = 256,
) -> dict[str, np.ndarray]:
    """Deterministic input features, node order sorted by key per type.

    Paper nodes get the hashed-TF embedding of their title projected to
    ``dim`` (blank titles fall back to a seeded random unit vector); every
    other node type gets seeded random unit vectors.
    """
    spec = EmbedderSpec(dim=title_dim, normalize=True)
    projection = title_projection_matrix(seed, dim, title_dim)
    features: dict[str, np.ndarray] = {}
    for node_type in sorted(t for t in graph.nodes if graph.nodes[t]):
        keys = sorted(graph.nodes[node_type])
        rng = np.random.default_rng(derive_seed(seed, f"features:{node_type}"))
        random_rows = rng.normal(size=(len(keys), dim))
        random_rows /= np.linalg.norm(random_rows, axis=1, keepdims=True)
        mat = random_rows
        if node_type == PAPER:
            for row, key in enumerate(keys):
                title = graph.paper_titles.get(key, "")
                if title.strip():
                    mat[row] = projection @ embed_text(title, spec)
        features[node_type] = mat
    return features


def auc_score(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties averaged)."""
    n_pos, n_neg = pos_scores.shape[0], neg_scores.shape[0]
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(np.concatenate([pos_scores, neg_scores]))
    return float((ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _holdout_auc(
    compiled_train: CompiledGraph,
    params: GnnParams,
    features: dict[str, np.ndarray],
    holdout: dict[str, tuple[np.ndarray, np.ndarray]],
    eval_negatives: dict[str, np.ndarray],
) -> dict[str, float]:
    embeddings = gnn_forward_compiled(compiled_train, params, features)
    out = {}
    for name, (src, dst) in holdout.items():
        signature = EDGE_SIGNATURES[name]
        pos = edge_scores(embeddings, signature, src, dst)
        neg = edge_scores(embeddings, signature, src, eval_negatives[name])
        out[name] = auc_score(pos, neg)
    return out


def train_link_prediction(graph: HeteroGraph, config: TrainConfig) -> TrainedEncoder:
    """Train the structural encoder with link prediction and freeze it.

    A ``holdout_frac`` share of each base relation's edges is excluded from
    both the training objective and the message-passing adjacency, and scored
    against destination-corrupted negatives for the per-relation AUC report
    (before and after training).  The returned encoder's embedding table is
    computed over the full adjacency.
    """
    if graph.n_edges() == 0:
        raise ValueError("untrainable: no edges")

    features = init_node_features(
        graph, derive_seed(config.seed, "node-features"), dim=config.feature_dim
    )
    cg_full = compile_graph(graph)

    rng_split = np.random.default_rng(derive_seed(config.seed, "holdout-split"))
    train_subset: dict[str, list] = {}
    holdout_pairs: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name in sorted(EDGE_SIGNATURES):
        edges = graph.edges[name]
        if not edges:
            continue
        n_hold = int(round(config.holdout_frac * len(edges)))
        n_hold = min(n_hold, len(edges) - 1)  # always keep >= 1 training edge
        perm = rng_split.permutation(len(edges))
        held = [edges[i] for i in perm[:n_hold]]
        train_subset[name] = [edges[i] for i in perm[n_hold:]]
        if held:
            src_type, dst_type = EDGE_SIGNATURES[name]
            src_index = cg_full.node_index[src_type]
            dst_index = cg_full.node_index[dst_type]
            holdout_pairs[name] = (
                np.array([src_index[e.src.key] for e in held], dtype=np.intp),
                np.array([dst_index[e.dst.key] for e in held], dtype=np.intp),
            )

    cg_train = compile_graph(graph, edge_subset=train_subset)
    params = init_gnn_params(
        cg_full,
        in_dim=config.feature_dim,
        dim=config.dim,
        layers=config.layers,
        heads=config.heads,
        seed=derive_seed(config.seed, "gnn-init"),
    )

    positives: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    n_dst_nodes: dict[str, int] = {}
    for rel in cg_train.relations:
        if rel.name in EDGE_SIGNATURES:  # base relations only
            positives[rel.name] = (rel.src, rel.dst)
            n_dst_nodes[rel.name] = cg_train.n_nodes(rel.dst_type)

    rng_eval = np.random.default_rng(derive_seed(config.seed, "auc-negatives"))
    eval_negatives: dict[str, np.ndarray] = {}
    for name in sorted(holdout_pairs):
        src, dst = holdout_pairs[name]
        dst_type = EDGE_SIGNATURES[name][1]
        n_dst = cg_full.n_nodes(dst_type)
        if n_dst < 2:
            continue
        neg = rng_eval.integers(0, n_dst, size=dst.shape[0])
        clash = neg == dst
        while np.any(clash):
            neg[clash] = rng_eval.integers(0, n_dst, size=int(clash.sum()))
            clash = neg == dst
        eval_negatives[name] = neg.astype(np.intp)
    holdout_pairs = {k: v for k, v in holdout_pairs.items() if k in eval_negatives}

    auc_pretrain = _holdout_auc(cg_train, params, features, holdout_pairs, eval_negatives)

    rng_train = np.random.default_rng(derive_seed(config.seed, "negatives"))
    optimizer = Adam(params, lr=config.learning_rate)
    losses: list[float] = []
    for _ in range(config.epochs):
        batch = sample_negatives(positives, n_dst_nodes, config.k_neg, rng_train)
        loss, grads = link_pred_loss_and_grad(cg_train, params, features, batch)
        optimizer.step(params, grads)
        losses.append(loss)

    auc_post = _holdout_auc(cg_train, params, features, holdout_pairs, eval_negatives)

    final_embeddings = gnn_forward_compiled(cg_full, params, features)
    report = TrainReport(
        epochs=config.epochs,
        final_loss=losses[-1],
        loss_history=losses,
        auc_pretrain=auc_pretrain,
        auc=auc_post,
    )
    return TrainedEncoder(
        params=params,
        config=config,
        node_embeddings=NodeEmbeddings(final_embeddings, cg_full),
        report=report,
    )


def document_embedding(encoder: TrainedEncoder, doc_id: str) -> np.ndarray:
    """The document's structural embedding: its Paper node's final state."""
    return encoder.document_embedding(doc_id)


def passage_structural_embedding(
    passage: Passage, doc_embeddings: Mapping[str, np.ndarray]
) -> np.ndarray:
    """All passages of a document share the document embedding, verbatim."""
    try:
        return doc_embeddings[passage.doc_id]
    except KeyError:
        raise KeyError(f"no structural embedding for document {passage.doc_id!r}") from None


def write_train_report(path: str | Path, report: TrainReport) -> None:
    items: list[tuple[str, object]] = [
        ("epochs", report.epochs),
        ("final_loss", report.final_loss),
    ]
    for name in sorted(report.auc):
        items.append((f"auc_{name}", report.auc[name]))
    for name in sorted(report.auc_pretrain):
        items.append((f"auc_pretrain_{name}", report.auc_pretrain[name]))
    write_kv_report(path, items)
