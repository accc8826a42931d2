"""Embedding fusion, exact top-k retrieval, and structural re-ranking.

A fused record concatenates a passage's text vector with its document's
structural vector; a reader input further prefixes the query vector.  The
flat index is exact: top-k is a full dot-product scan with deterministic
tie-breaking (ascending passage id), so a brute-force sort is a usable
oracle for it.

``rerank_with_structure`` is an optional extension beyond the core
retrieval contract: queries have no structural embedding (they are not graph
nodes), so it derives structure awareness from the coherence of the
retrieved pool instead, and flags its output accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import embfile

DEFAULT_TOP_K = 20
MANIFEST_NAME = "manifest.json"


def _check_finite(name: str, vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} contains non-finite values")
    return vec


def fuse(text_vec: np.ndarray, struct_vec: np.ndarray) -> np.ndarray:
    """Fused passage vector: text embedding then structural embedding."""
    return np.concatenate([_check_finite("text_vec", text_vec),
                           _check_finite("struct_vec", struct_vec)])


def make_reader_input(query_vec: np.ndarray, fused_vec: np.ndarray) -> np.ndarray:
    """Reader input vector: query embedding prefixed to the fused vector."""
    return np.concatenate([_check_finite("query_vec", query_vec),
                           _check_finite("fused_vec", fused_vec)])


@dataclass(frozen=True)
class FusedRecord:
    """One indexed passage: id, text vector, structural vector."""

    passage_id: str
    text_vec: np.ndarray
    struct_vec: np.ndarray

    @property
    def fused(self) -> np.ndarray:
        return fuse(self.text_vec, self.struct_vec)


@dataclass(frozen=True)
class ScoredPassage:
    passage_id: str
    text_score: float
    combined_score: float | None = None


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked passages; scores non-increasing, ties broken by ascending id."""

    entries: tuple[ScoredPassage, ...]
    k_requested: int
    k_returned: int
    method: str = "text_dot_product"

    def passage_ids(self) -> list[str]:
        return [e.passage_id for e in self.entries]


class FlatIndex:
    """Immutable exact-search store over fused records."""

    def __init__(self, ids: tuple[str, ...], text_mat: np.ndarray, struct_mat: np.ndarray):
        self.ids = ids
        self._id_array = np.array(ids, dtype=object)
        self._row_of = {pid: i for i, pid in enumerate(ids)}
        text_mat = np.asarray(text_mat, dtype=np.float64).copy()
        struct_mat = np.asarray(struct_mat, dtype=np.float64).copy()
        text_mat.setflags(write=False)
        struct_mat.setflags(write=False)
        self.text_mat = text_mat
        self.struct_mat = struct_mat

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def text_dim(self) -> int | None:
        return self.text_mat.shape[1] if len(self.ids) else None

    @property
    def struct_dim(self) -> int | None:
        return self.struct_mat.shape[1] if len(self.ids) else None

    def row(self, passage_id: str) -> int:
        try:
            return self._row_of[passage_id]
        except KeyError:
            raise KeyError(f"passage not in index: {passage_id!r}") from None


def build_index(records: list[FusedRecord]) -> FlatIndex:
    """Build an immutable flat index; rejects duplicate ids and ragged dims."""
    if not records:
        return FlatIndex((), np.zeros((0, 0)), np.zeros((0, 0)))
    text_dim = records[0].text_vec.shape[0]
    struct_dim = records[0].struct_vec.shape[0]
    seen: set[str] = set()
    for rec in records:
        if rec.text_vec.shape != (text_dim,):
            raise ValueError(
                f"record {rec.passage_id!r}: text dim {rec.text_vec.shape[0]} != {text_dim}"
            )
        if rec.struct_vec.shape != (struct_dim,):
            raise ValueError(
                f"record {rec.passage_id!r}: struct dim {rec.struct_vec.shape[0]} != {struct_dim}"
            )
        if rec.passage_id in seen:
            raise ValueError(f"duplicate passage id: {rec.passage_id!r}")
        seen.add(rec.passage_id)
    ids = tuple(r.passage_id for r in records)
    text_mat = np.stack([r.text_vec for r in records]).astype(np.float64)
    struct_mat = np.stack([r.struct_vec for r in records]).astype(np.float64)
    return FlatIndex(ids, text_mat, struct_mat)


def _ranked(ids: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the top-k by (score desc, id asc); full deterministic sort."""
    order = np.lexsort((ids, -scores))
    return order[:k]


def topk(index: FlatIndex, query_vec: np.ndarray, k: int = DEFAULT_TOP_K) -> RetrievalResult:
    """Exact top-k by dot(query, text vector).

    Scoring uses the text embedding only: retrieval is semantic, structure is
    attached to the retrieved passages downstream.  Ties break by ascending
    passage id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query_vec = _check_finite("query_vec", query_vec)
    if len(index) == 0:
        return RetrievalResult(entries=(), k_requested=k, k_returned=0)
    if query_vec.shape[0] != index.text_dim:
        raise ValueError(f"query dim {query_vec.shape[0]} != index text dim {index.text_dim}")
    scores = index.text_mat @ query_vec
    take = _ranked(index._id_array, scores, min(k, len(index)))
    entries = tuple(
        ScoredPassage(passage_id=index.ids[i], text_score=float(scores[i])) for i in take
    )
    return RetrievalResult(entries=entries, k_requested=k, k_returned=len(entries))


def rerank_with_structure(
    result: RetrievalResult,
    index: FlatIndex,
    beta: float = 0.5,
    k: int | None = None,
) -> RetrievalResult:
    """Re-rank a retrieved pool by structural coherence (extension).

    Each pooled passage's combined score is its text score plus ``beta``
    times the mean dot product of its L2-normalized structural embedding
    with every other pool member's.  The pool is the input result's entry
    list; ``k`` (default: pool size) entries are returned, re-sorted by
    combined score with ties broken by ascending passage id.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    pool = result.entries
    m = len(pool)
    if k is None:
        k = m
    if k < 0 or k > m:
        raise ValueError(f"k ({k}) must be between 0 and the pool size ({m})")
    if m == 0:
        return RetrievalResult(entries=(), k_requested=k, k_returned=0,
                               method="structural_rerank")

    rows = np.array([index.row(e.passage_id) for e in pool], dtype=np.intp)
    struct = index.struct_mat[rows]
    norms = np.linalg.norm(struct, axis=1, keepdims=True)
    unit = np.divide(struct, norms, out=np.zeros_like(struct), where=norms > 0)
    if m > 1:
        total = unit.sum(axis=0)
        self_sim = np.einsum("ij,ij->i", unit, unit)
        coherence = (unit @ total - self_sim) / (m - 1)
    else:
        coherence = np.zeros(m)

    text_scores = np.array([e.text_score for e in pool])
    combined = text_scores + beta * coherence
    pool_ids = np.array([e.passage_id for e in pool], dtype=object)
    take = _ranked(pool_ids, combined, k)
    entries = tuple(
        ScoredPassage(
            passage_id=pool[i].passage_id,
            text_score=pool[i].text_score,
            combined_score=float(combined[i]),
        )
        for i in take
    )
    return RetrievalResult(entries=entries, k_requested=k, k_returned=len(entries),
                           method="structural_rerank")


def save_index(
    index: FlatIndex,
    dirpath: str | Path,
    default_k: int = DEFAULT_TOP_K,
    extra: dict | None = None,
) -> None:
    """Persist as (matrix, id sidecar) pairs for text and structure plus a
    manifest with the dimensions and default k.  ``extra`` entries are merged
    into the manifest (e.g. the embedder settings queries must replay)."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    embfile.write_embedding_matrix(dirpath / "text.semb", index.text_mat)
    embfile.write_id_sidecar(dirpath / "text.ids", index.ids)
    embfile.write_embedding_matrix(dirpath / "struct.semb", index.struct_mat)
    embfile.write_id_sidecar(dirpath / "struct.ids", index.ids)
    manifest = {
        "rows": len(index),
        "text_dim": index.text_dim if len(index) else 0,
        "struct_dim": index.struct_dim if len(index) else 0,
        "default_k": default_k,
        "files": {
            "text": ["text.semb", "text.ids"],
            "struct": ["struct.semb", "struct.ids"],
        },
    }
    if extra:
        manifest.update(extra)
    embfile.write_manifest(dirpath / MANIFEST_NAME, manifest)


def load_index(dirpath: str | Path) -> tuple[FlatIndex, dict]:
    """Load an index directory; returns the index and its manifest."""
    dirpath = Path(dirpath)
    manifest = embfile.read_manifest(dirpath / MANIFEST_NAME)
    text_mat = embfile.read_embedding_matrix(dirpath / "text.semb").astype(np.float64)
    struct_mat = embfile.read_embedding_matrix(dirpath / "struct.semb").astype(np.float64)
    text_ids = embfile.read_id_sidecar(dirpath / "text.ids")
    struct_ids = embfile.read_id_sidecar(dirpath / "struct.ids")
    if text_ids != struct_ids:
        raise ValueError("text and struct id sidecars disagree")
    if len(text_ids) != text_mat.shape[0] or len(struct_ids) != struct_mat.shape[0]:
        raise ValueError("id sidecar length does not match matrix rows")
    return FlatIndex(tuple(text_ids), text_mat, struct_mat), manifest
