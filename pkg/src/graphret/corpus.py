"""Corpus ingestion and passage chunking.

A corpus is a set of documents with scholarly metadata (authors, venue,
institutions, topics, citations).  Documents are split into disjoint
whitespace-word chunks; each chunk, prefixed with the document title, becomes
a passage -- the fundamental retrieval unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

DEFAULT_MAX_WORDS = 100
DEFAULT_MAX_TOKENS = 512

# Separator between the title prefix and the chunk text inside a passage.
# A single newline keeps the split reversible.
TITLE_SEPARATOR = "\n"


class CorpusFormatError(ValueError):
    """A corpus record could not be parsed or fails a document invariant."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class DuplicateDocumentError(CorpusFormatError):
    """Two corpus records share the same doc_id."""


@dataclass(frozen=True)
class Document:
    """One corpus document plus the metadata that feeds the document graph."""

    doc_id: str
    title: str
    body: str
    domain: str = ""
    authors: tuple[str, ...] = ()
    venue: str | None = None
    institutions: tuple[str, ...] = ()
    topics: tuple[str, ...] = ()
    cited_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if self.doc_id in self.cited_ids:
            raise ValueError(f"document {self.doc_id!r} cites itself")


@dataclass(frozen=True)
class Passage:
    """A title-prefixed chunk of one document.

    ``word_count`` counts only chunk (body) words; ``token_count`` counts
    title plus chunk words under the same whitespace tokenizer.
    """

    passage_id: str
    doc_id: str
    seq_no: int
    text: str
    word_count: int
    token_count: int


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    by_id: dict[str, Document] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.by_id:
            object.__setattr__(self, "by_id", {d.doc_id: d for d in self.documents})

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def get(self, doc_id: str) -> Document:
        try:
            return self.by_id[doc_id]
        except KeyError:
            raise KeyError(f"unknown document: {doc_id!r}") from None


def make_passage_id(doc_id: str, seq_no: int) -> str:
    """Passage id is a pure function of (doc_id, seq_no)."""
    if seq_no < 0:
        raise ValueError("seq_no must be >= 0")
    return f"{doc_id}.{seq_no:05d}"


def passage_doc_id(passage_id: str) -> str:
    """Inverse of :func:`make_passage_id` on the doc_id part."""
    doc_id, sep, seq = passage_id.rpartition(".")
    if not sep or not seq.isdigit():
        raise ValueError(f"not a passage id: {passage_id!r}")
    return doc_id


def _string_list(record: dict, key: str, line_no: int) -> tuple[str, ...]:
    value = record.get(key, [])
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise CorpusFormatError(f"field {key!r} must be a list of strings", line_no)
    return tuple(value)


def _document_from_record(record: dict, line_no: int) -> Document:
    for key in ("doc_id", "title", "body"):
        if key not in record:
            raise CorpusFormatError(f"missing required field {key!r}", line_no)
        if not isinstance(record[key], str):
            raise CorpusFormatError(f"field {key!r} must be a string", line_no)
    venue = record.get("venue")
    if venue is not None and not isinstance(venue, str):
        raise CorpusFormatError("field 'venue' must be a string or null", line_no)
    domain = record.get("domain", "")
    if not isinstance(domain, str):
        raise CorpusFormatError("field 'domain' must be a string", line_no)
    try:
        return Document(
            doc_id=record["doc_id"],
            title=record["title"],
            body=record["body"],
            domain=domain,
            authors=_string_list(record, "authors", line_no),
            venue=venue,
            institutions=_string_list(record, "institutions", line_no),
            topics=_string_list(record, "topics", line_no),
            cited_ids=_string_list(record, "cited_ids", line_no),
        )
    except ValueError as exc:
        raise CorpusFormatError(str(exc), line_no) from exc


def ingest_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a corpus file: one JSON object per line, UTF-8, Document fields.

    Raises :class:`CorpusFormatError` (with the offending line number) on
    malformed records and :class:`DuplicateDocumentError` on repeated doc_ids.
    An empty file yields an empty corpus.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format: {format!r}")
    path = Path(path)
    documents: list[Document] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON ({exc.msg})", line_no) from exc
            if not isinstance(record, dict):
                raise CorpusFormatError("record must be a JSON object", line_no)
            doc = _document_from_record(record, line_no)
            if doc.doc_id in seen:
                raise DuplicateDocumentError(
                    f"duplicate doc_id {doc.doc_id!r} (first seen on line {seen[doc.doc_id]})",
                    line_no,
                )
            seen[doc.doc_id] = line_no
            documents.append(doc)
    return Corpus(documents=tuple(documents))


def document_to_record(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "title": doc.title,
        "body": doc.body,
        "domain": doc.domain,
        "authors": list(doc.authors),
        "venue": doc.venue,
        "institutions": list(doc.institutions),
        "topics": list(doc.topics),
        "cited_ids": list(doc.cited_ids),
    }


def write_corpus_jsonl(documents: Iterable[Document], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(json.dumps(document_to_record(doc), sort_keys=True) + "\n")


def chunk_document(
    doc: Document,
    max_words: int = DEFAULT_MAX_WORDS,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> list[Passage]:
    """Split a document body into disjoint chunks of at most ``max_words``
    whitespace words; every chunk becomes a title-prefixed passage.

    The word limit applies first; the token cap is then enforced by
    truncating the chunk, never the title (a passage whose title alone
    exceeds ``max_tokens`` keeps the full title).  With default limits and
    sane titles the cap never binds, so concatenating the chunk words of all
    passages reproduces the body word sequence exactly.

    An empty body yields a single passage containing only the title.
    """
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    title_words = doc.title.split()
    body_words = doc.body.split()

    chunks: list[list[str]]
    if body_words:
        chunks = [body_words[i : i + max_words] for i in range(0, len(body_words), max_words)]
    else:
        chunks = [[]]

    passages = []
    budget = max_tokens - len(title_words)
    for seq_no, chunk in enumerate(chunks):
        if len(chunk) > budget:
            chunk = chunk[: max(0, budget)]
        text = doc.title + TITLE_SEPARATOR + " ".join(chunk) if chunk else doc.title
        passages.append(
            Passage(
                passage_id=make_passage_id(doc.doc_id, seq_no),
                doc_id=doc.doc_id,
                seq_no=seq_no,
                text=text,
                word_count=len(chunk),
                token_count=len(title_words) + len(chunk),
            )
        )
    return passages


def chunk_corpus(
    corpus: Corpus,
    max_words: int = DEFAULT_MAX_WORDS,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> list[Passage]:
    """Chunk every document, in corpus order."""
    out: list[Passage] = []
    for doc in corpus:
        out.extend(chunk_document(doc, max_words=max_words, max_tokens=max_tokens))
    return out


def write_passages_jsonl(passages: Iterable[Passage], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for p in passages:
            fh.write(
                json.dumps(
                    {
                        "passage_id": p.passage_id,
                        "doc_id": p.doc_id,
                        "seq_no": p.seq_no,
                        "text": p.text,
                        "word_count": p.word_count,
                        "token_count": p.token_count,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_passages_jsonl(path: str | Path) -> list[Passage]:
    passages = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                passages.append(
                    Passage(
                        passage_id=rec["passage_id"],
                        doc_id=rec["doc_id"],
                        seq_no=rec["seq_no"],
                        text=rec["text"],
                        word_count=rec["word_count"],
                        token_count=rec["token_count"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"invalid passage record ({exc})", line_no) from exc
    return passages
