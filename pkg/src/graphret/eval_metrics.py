"""Retrieval and generation quality metrics.

Accuracy side: exact match and token F1 over normalized answers.  Retriever
side: query relevance (mean dot product of the query embedding with the
retrieved passages' embeddings) and diversity (unique retrieved evidences
over total).  The faithfulness score combines accuracy and relevance via
their harmonic mean.

Relevance is a raw dot product, so it is not bounded by 1, and neither is
faithfulness; values above 1 are legitimate and are never clamped.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .embfile import write_kv_report

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def exact_match(prediction: str, gold: str) -> int:
    """1 iff the normalized token sequences are identical."""
    return int(normalize_answer(prediction) == normalize_answer(gold))


def token_f1(prediction: str, gold: str) -> float:
    """Harmonic mean of token precision and recall over normalized multisets.

    Both empty -> 1.0; exactly one empty -> 0.0.
    """
    pred = normalize_answer(prediction)
    ref = normalize_answer(gold)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    from collections import Counter

    overlap = sum((Counter(pred) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2.0 * precision * recall / (precision + recall)


def query_relevance(query_vec: np.ndarray, retrieved_vecs) -> float:
    """Mean dot product of the query embedding with each retrieved passage's
    text embedding."""
    query_vec = np.asarray(query_vec, dtype=np.float64)
    mat = np.asarray(retrieved_vecs, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    if mat.shape[0] == 0:
        raise ValueError("no retrieved passages")
    if mat.shape[1] != query_vec.shape[0]:
        raise ValueError(f"dimension mismatch: query {query_vec.shape[0]}, passages {mat.shape[1]}")
    return float(np.mean(mat @ query_vec))


def diversity(retrieved_ids: Sequence[str]) -> float:
    """Ratio of unique evidences to total evidences."""
    if len(retrieved_ids) == 0:
        raise ValueError("no retrieved evidences")
    return len(set(retrieved_ids)) / len(retrieved_ids)


def faithfulness(accuracy: float, relevance: float) -> float:
    """Harmonic mean of generation accuracy and retrieval relevance.

    Relevance above 1 is not clamped, so the result may exceed 1 as well.
    Undefined when both inputs are zero.
    """
    if accuracy < 0 or relevance < 0:
        raise ValueError("accuracy and relevance must be non-negative")
    if accuracy == 0.0 and relevance == 0.0:
        raise ValueError("faithfulness undefined: accuracy and relevance are both zero")
    return 2.0 * accuracy * relevance / (accuracy + relevance)


@dataclass(frozen=True)
class QueryEval:
    """Per-query inputs for the aggregate report.

    ``doc_ids`` (parallel to ``retrieved_ids``) enables document-level
    diversity counting.
    """

    prediction: str
    gold: str
    query_vec: np.ndarray
    retrieved_vecs: np.ndarray
    retrieved_ids: tuple[str, ...]
    doc_ids: tuple[str, ...] | None = None


@dataclass(frozen=True)
class MetricReport:
    exact_match: float
    f1: float
    relevance: float
    diversity: float
    faithfulness: float
    n_queries: int


def evaluate_queries(
    queries: Sequence[QueryEval], unique_by: str = "passage"
) -> tuple[MetricReport, list[dict]]:
    """Aggregate a query set: arithmetic mean of the per-query metrics.

    ``unique_by`` is ``passage`` (default) or ``document`` and selects the id
    space for diversity.  The report-level faithfulness is the harmonic mean
    of mean accuracy and mean relevance, defined as 0 when either is 0.
    """
    if unique_by not in ("passage", "document"):
        raise ValueError(f"unique_by must be 'passage' or 'document', got {unique_by!r}")
    if not queries:
        raise ValueError("no queries to evaluate")
    rows = []
    for i, q in enumerate(queries):
        ids: Sequence[str] = q.retrieved_ids
        if unique_by == "document":
            if q.doc_ids is None:
                raise ValueError(f"query {i}: document-level diversity needs doc_ids")
            ids = q.doc_ids
        rows.append(
            {
                "query_index": i,
                "exact_match": exact_match(q.prediction, q.gold),
                "f1": token_f1(q.prediction, q.gold),
                "relevance": query_relevance(q.query_vec, q.retrieved_vecs),
                "diversity": diversity(ids),
            }
        )
    mean = lambda key: float(np.mean([r[key] for r in rows]))  # noqa: E731
    acc = mean("exact_match")
    rel = mean("relevance")
    if acc == 0.0 or rel == 0.0:
        faith = 0.0
    else:
        faith = faithfulness(acc, rel)
    report = MetricReport(
        exact_match=acc,
        f1=mean("f1"),
        relevance=rel,
        diversity=mean("diversity"),
        faithfulness=faith,
        n_queries=len(rows),
    )
    return report, rows


def write_metric_report(path: str | Path, report: MetricReport) -> None:
    """Flat key-value text report."""
    write_kv_report(
        path,
        [
            ("n_queries", report.n_queries),
            ("exact_match", report.exact_match),
            ("f1", report.f1),
            ("relevance", report.relevance),
            ("diversity", report.diversity),
            ("faithfulness", report.faithfulness),
        ],
    )


def write_per_query_jsonl(path: str | Path, rows: Sequence[dict]) -> None:
    """Machine-readable per-query records, one JSON object per line."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
