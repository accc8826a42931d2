"""Retriever-reader training couplings: span masking and KL distillation.

Span masking corrupts a token sequence for masked-language-model pretraining:
sampled spans (geometric lengths, configurable mean) are each replaced by one
sentinel token ``<extra_id_N>``; the target sequence lists the dropped spans
delimited by the same sentinels, so corruption is exactly invertible.

The distillation kernels turn per-passage reader log-likelihoods into a
posterior over passages (softmax) and drive the retriever's score
distribution toward it by minimizing a KL divergence, with the analytic
gradient in the retriever scores.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SENTINEL_PATTERN = re.compile(r"^<extra_id_(\d+)>$")

DIRECTION_RETRIEVER_TO_POSTERIOR = "retriever-to-posterior"
DIRECTION_POSTERIOR_TO_RETRIEVER = "posterior-to-retriever"


def sentinel_token(index: int) -> str:
    return f"<extra_id_{index}>"


@dataclass(frozen=True)
class MaskingConfig:
    mask_ratio: float = 0.15
    mean_span: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mask_ratio < 1.0:
            raise ValueError("mask_ratio must be in (0, 1)")
        if self.mean_span < 1.0:
            raise ValueError("mean_span must be >= 1")


@dataclass(frozen=True)
class MaskedSample:
    """Corrupted sequence plus the sentinel-delimited dropped spans."""

    corrupted: tuple[str, ...]
    target: tuple[str, ...]


def _merge_interval(intervals: list[list[int]], start: int, end: int) -> None:
    """Insert [start, end) into a sorted list of disjoint, non-adjacent
    intervals, merging anything it overlaps or touches."""
    merged = [start, end]
    out = []
    for iv in intervals:
        if iv[1] < merged[0] or iv[0] > merged[1]:  # strictly apart, not even adjacent
            out.append(iv)
        else:
            merged[0] = min(merged[0], iv[0])
            merged[1] = max(merged[1], iv[1])
    out.append(merged)
    out.sort()
    intervals[:] = out


def mask_spans(tokens: Sequence[str], config: MaskingConfig) -> MaskedSample:
    """Corrupt a token sequence with sentinel-replaced spans.

    Span lengths are geometric with mean ``mean_span`` (minimum 1), clamped
    so the total masked count hits ``round(mask_ratio * len(tokens))``
    exactly whenever placement succeeds; spans that touch merge into one.
    Deterministic given (tokens, config).
    """
    tokens = list(tokens)
    n = len(tokens)
    if n < 2:
        raise ValueError("too short to mask")
    for tok in tokens:
        if SENTINEL_PATTERN.match(tok):
            raise ValueError(f"input token collides with sentinel literal: {tok!r}")

    target_count = max(1, round(config.mask_ratio * n))
    rng = np.random.default_rng(config.seed)
    intervals: list[list[int]] = []
    total = 0
    max_attempts = 50 * n + 100
    for _ in range(max_attempts):
        if total >= target_count:
            break
        if config.mean_span > 1.0:
            length = int(rng.geometric(1.0 / config.mean_span))
        else:
            length = 1
        length = min(length, target_count - total)
        start = int(rng.integers(0, n - length + 1))
        _merge_interval(intervals, start, start + length)
        total = sum(end - begin for begin, end in intervals)

    corrupted: list[str] = []
    target: list[str] = []
    cursor = 0
    for i, (start, end) in enumerate(intervals):
        corrupted.extend(tokens[cursor:start])
        corrupted.append(sentinel_token(i))
        target.append(sentinel_token(i))
        target.extend(tokens[start:end])
        cursor = end
    corrupted.extend(tokens[cursor:])
    return MaskedSample(corrupted=tuple(corrupted), target=tuple(target))


def _sentinel_indices(seq: Sequence[str]) -> list[int]:
    out = []
    for tok in seq:
        m = SENTINEL_PATTERN.match(tok)
        if m:
            out.append(int(m.group(1)))
    return out


def unmask(corrupted: Sequence[str], target: Sequence[str]) -> list[str]:
    """Splice the target spans back at the sentinel positions.

    Raises ValueError if the sentinel sequences of the two inputs disagree.
    """
    c_ids = _sentinel_indices(corrupted)
    t_ids = _sentinel_indices(target)
    if c_ids != t_ids:
        raise ValueError(f"sentinel mismatch: corrupted has {c_ids}, target has {t_ids}")
    if c_ids != list(range(len(c_ids))):
        raise ValueError(f"sentinels out of order: {c_ids}")
    if not c_ids:
        if list(target):
            raise ValueError("sentinel mismatch: target has tokens but no sentinels")
        return list(corrupted)

    spans: dict[int, list[str]] = {}
    current: int | None = None
    for tok in target:
        m = SENTINEL_PATTERN.match(tok)
        if m:
            current = int(m.group(1))
            spans[current] = []
        elif current is None:
            raise ValueError("sentinel mismatch: target tokens before first sentinel")
        else:
            spans[current].append(tok)

    out: list[str] = []
    for tok in corrupted:
        m = SENTINEL_PATTERN.match(tok)
        if m:
            out.extend(spans[int(m.group(1))])
        else:
            out.append(tok)
    return out


def _validated_1d(name: str, values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _log_softmax(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max()
    return shifted - np.log(np.exp(shifted).sum())


def passage_posterior(loglik) -> np.ndarray:
    """Posterior over passages: softmax of the reader log-likelihoods,
    computed with max-subtraction for stability."""
    loglik = _validated_1d("loglik", loglik)
    return np.exp(_log_softmax(loglik))


def retriever_distribution(scores, temperature: float) -> np.ndarray:
    """Retriever's passage distribution: softmax(scores / temperature)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    scores = _validated_1d("scores", scores)
    return np.exp(_log_softmax(scores / temperature))


def kl_divergence(p, q) -> float:
    """KL(p || q) = sum p_i ln(p_i / q_i), with 0 ln(0/q) = 0.

    Both inputs must be normalized within 1e-9; q must be strictly positive
    wherever p is.  The result is clamped at zero against float rounding.
    """
    p = _validated_1d("p", p)
    q = _validated_1d("q", q)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("distributions must be non-negative")
    if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("distributions must sum to 1 within 1e-9")
    support = p > 0
    if np.any(q[support] == 0.0):
        raise ValueError("infinite divergence: q is zero on p's support")
    value = float(np.sum(p[support] * np.log(p[support] / q[support])))
    return max(value, 0.0)


@dataclass(frozen=True)
class DistillInputs:
    """Per-passage reader log-likelihoods and retriever scores for one query."""

    reader_loglik: tuple[float, ...]
    retriever_scores: tuple[float, ...]
    temperature: float = 1.0

    def __post_init__(self):
        if len(self.reader_loglik) == 0:
            raise ValueError("need at least one passage")
        if len(self.reader_loglik) != len(self.retriever_scores):
            raise ValueError("reader_loglik and retriever_scores must have equal length")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        for v in (*self.reader_loglik, *self.retriever_scores):
            if not np.isfinite(v):
                raise ValueError("inputs must be finite")


def distill_loss(
    inputs: DistillInputs,
    direction: str = DIRECTION_RETRIEVER_TO_POSTERIOR,
) -> tuple[float, np.ndarray]:
    """Distillation loss and its analytic gradient in the retriever scores.

    Default direction minimizes KL(retriever distribution || passage
    posterior); the flag flips it.  Either gradient lives in the softmax
    tangent space, so it sums to zero.
    """
    scores = np.asarray(inputs.retriever_scores, dtype=np.float64)
    loglik = np.asarray(inputs.reader_loglik, dtype=np.float64)
    theta = inputs.temperature
    log_p = _log_softmax(scores / theta)
    log_q = _log_softmax(loglik)
    p = np.exp(log_p)
    q = np.exp(log_q)

    if direction == DIRECTION_RETRIEVER_TO_POSTERIOR:
        kl = float(np.sum(p * (log_p - log_q)))
        grad = (p / theta) * ((log_p - log_q) - kl)
    elif direction == DIRECTION_POSTERIOR_TO_RETRIEVER:
        kl = float(np.sum(q * (log_q - log_p)))
        grad = (p - q) / theta
    else:
        raise ValueError(f"unknown KL direction: {direction!r}")
    return max(kl, 0.0), grad


def write_masked_samples_jsonl(
    samples: Iterable[tuple[MaskedSample, int]], path: str | Path
) -> None:
    """Serialize masked samples, one per line: {corrupted, target, seed}."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for sample, seed in samples:
            fh.write(
                json.dumps(
                    {
                        "corrupted": list(sample.corrupted),
                        "target": list(sample.target),
                        "seed": seed,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_masked_samples_jsonl(path: str | Path) -> list[tuple[MaskedSample, int]]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                (
                    MaskedSample(
                        corrupted=tuple(rec["corrupted"]), target=tuple(rec["target"])
                    ),
                    rec["seed"],
                )
            )
    return out
