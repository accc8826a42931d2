"""Structure-aware dense passage retrieval over heterogeneous document graphs.

The pipeline: chunk documents into passages, build a typed graph from their
metadata, train a graph encoder with link prediction, fuse text and
structural embeddings per passage, and serve exact top-k retrieval with an
optional structural re-ranking pass.  Training-signal kernels (span masking,
passage posteriors, KL distillation) and retrieval-quality metrics round out
the stack.
"""

from .corpus import (
    Corpus,
    CorpusFormatError,
    Document,
    DuplicateDocumentError,
    Passage,
    chunk_corpus,
    chunk_document,
    ingest_corpus,
    make_passage_id,
    passage_doc_id,
)
from .eval_metrics import (
    MetricReport,
    QueryEval,
    diversity,
    evaluate_queries,
    exact_match,
    faithfulness,
    query_relevance,
    token_f1,
)
from .fusion_index import (
    FlatIndex,
    FusedRecord,
    RetrievalResult,
    ScoredPassage,
    build_index,
    fuse,
    load_index,
    make_reader_input,
    rerank_with_structure,
    save_index,
    topk,
)
from .hdg import (
    DocLink,
    GraphStats,
    HeteroGraph,
    NodeRef,
    TypedEdge,
    build_graph,
    export_edge_list,
    graph_stats,
    project_document_links,
)
from .struct_embed import (
    TrainConfig,
    TrainedEncoder,
    document_embedding,
    init_node_features,
    passage_structural_embedding,
    train_link_prediction,
)
from .text_embed import EmbedderSpec, embed_query, embed_text
from .training_signals import (
    DistillInputs,
    MaskedSample,
    MaskingConfig,
    distill_loss,
    kl_divergence,
    mask_spans,
    passage_posterior,
    retriever_distribution,
    unmask,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusFormatError",
    "DistillInputs",
    "DocLink",
    "Document",
    "DuplicateDocumentError",
    "EmbedderSpec",
    "FlatIndex",
    "FusedRecord",
    "GraphStats",
    "HeteroGraph",
    "MaskedSample",
    "MaskingConfig",
    "MetricReport",
    "NodeRef",
    "Passage",
    "QueryEval",
    "RetrievalResult",
    "ScoredPassage",
    "TrainConfig",
    "TrainedEncoder",
    "TypedEdge",
    "build_graph",
    "build_index",
    "chunk_corpus",
    "chunk_document",
    "distill_loss",
    "diversity",
    "document_embedding",
    "evaluate_queries",
    "exact_match",
    "export_edge_list",
    "faithfulness",
    "fuse",
    "graph_stats",
    "ingest_corpus",
    "init_node_features",
    "kl_divergence",
    "load_index",
    "make_passage_id",
    "make_reader_input",
    "mask_spans",
    "passage_doc_id",
    "passage_posterior",
    "passage_structural_embedding",
    "project_document_links",
    "query_relevance",
    "rerank_with_structure",
    "retriever_distribution",
    "save_index",
    "token_f1",
    "topk",
    "train_link_prediction",
    "unmask",
]
