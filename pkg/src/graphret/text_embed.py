"""Dense text embeddings with a deterministic default encoder.

The default encoder is feature-hashed term frequency: lowercased whitespace
tokens, each hashed to one of ``dim`` buckets (FNV-1a) with an independent
sign hash, weighted by ``1 + ln(tf)``.  It is a bag of words, so it is exact,
bit-stable across platforms, and keeps dot-product ranking semantics without
any pretrained weights.  Queries and passages share the encoder.

Real transformer vectors can be swapped in through the ``external`` kind,
which looks embeddings up from a precomputed table (see
:func:`load_external_table`) keyed by exact string.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .hashing import token_bucket, token_sign

DEFAULT_TEXT_DIM = 256


@dataclass(frozen=True)
class EmbedderSpec:
    """Configuration of the text encoder.

    kind: ``hashed_tf`` (default) or ``external``.
    dim: embedding dimension.
    normalize: L2-normalize the output vector.
    table: required for ``external``; maps lookup key -> vector.
    """

    kind: str = "hashed_tf"
    dim: int = DEFAULT_TEXT_DIM
    normalize: bool = False
    table: Mapping[str, np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in ("hashed_tf", "external"):
            raise ValueError(f"unknown embedder kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        if self.kind == "external" and self.table is None:
            raise ValueError("external embedder needs a lookup table")


def _hashed_tf(text: str, spec: EmbedderSpec) -> np.ndarray:
    tokens = text.lower().split()
    if not tokens:
        raise ValueError("empty text")
    vec = np.zeros(spec.dim, dtype=np.float64)
    # Iterate terms in sorted order so the float accumulation order (and thus
    # the exact bit pattern) is independent of token order in the text.
    for term, count in sorted(Counter(tokens).items()):
        weight = 1.0 + math.log(count)
        vec[token_bucket(term, spec.dim)] += token_sign(term) * weight
    return vec


def _external(key: str, spec: EmbedderSpec) -> np.ndarray:
    assert spec.table is not None
    try:
        vec = np.asarray(spec.table[key], dtype=np.float64)
    except KeyError:
        raise KeyError(f"no external embedding for key {key!r}") from None
    if vec.shape != (spec.dim,):
        raise ValueError(f"external embedding for {key!r} has shape {vec.shape}, want ({spec.dim},)")
    return vec.copy()


def embed_text(text: str, spec: EmbedderSpec | None = None) -> np.ndarray:
    """Embed one text independently of all others (pure function).

    Raises ValueError on empty/whitespace-only text: a zero vector would make
    dot-product ranking degenerate.
    """
    spec = spec or EmbedderSpec()
    if spec.kind == "hashed_tf":
        vec = _hashed_tf(text, spec)
    else:
        vec = _external(text, spec)
    if spec.normalize:
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero embedding (total sign cancellation)")
        vec = vec / norm
    return vec


def embed_query(text: str, spec: EmbedderSpec | None = None) -> np.ndarray:
    """Embed a query. The default encoder is dual with shared weights, so this
    is the same map as :func:`embed_text`."""
    return embed_text(text, spec)


def load_external_table(matrix_path: str | Path, ids_path: str | Path) -> dict[str, np.ndarray]:
    """Load a precomputed embedding table from the binary matrix format plus
    its id sidecar; keys are the sidecar strings."""
    from .embfile import read_embedding_matrix, read_id_sidecar

    matrix = read_embedding_matrix(matrix_path).astype(np.float64)
    ids = read_id_sidecar(ids_path)
    if len(ids) != matrix.shape[0]:
        raise ValueError(
            f"id sidecar has {len(ids)} entries but matrix has {matrix.shape[0]} rows"
        )
    return {key: matrix[i] for i, key in enumerate(ids)}
