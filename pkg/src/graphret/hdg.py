"""Heterogeneous document graph: typed nodes, typed edges, document links.

Documents map one-to-one onto Paper nodes; metadata fans out into Author,
Venue, Institution and Topic nodes.  Document-document relationships
(co-citation, co-topic, co-venue, co-institution) are projections over the
base edges and are kept separate from them: the graph encoder trains on the
base edges, the projections serve analysis and diagnostics.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus

PAPER = "Paper"
AUTHOR = "Author"
VENUE = "Venue"
INSTITUTION = "Institution"
TOPIC = "Topic"

NODE_TYPES = (PAPER, AUTHOR, VENUE, INSTITUTION, TOPIC)

# edge_type -> (source node type, destination node type)
EDGE_SIGNATURES: dict[str, tuple[str, str]] = {
    "cites": (PAPER, PAPER),
    "writes": (PAPER, AUTHOR),
    "published_in": (PAPER, VENUE),
    "affiliated_with": (PAPER, INSTITUTION),
    "has_topic": (PAPER, TOPIC),
}

# Directed link: citing document -> cited document.
CO_CITATION = "co_citation"
# Symmetric links, stored with doc_a < doc_b.
CO_TOPIC = "co_topic"
CO_VENUE = "co_venue"
CO_INSTITUTION = "co_institution"

LINK_TYPES = (CO_CITATION, CO_TOPIC, CO_VENUE, CO_INSTITUTION)
_SYMMETRIC_LINKS = frozenset({CO_TOPIC, CO_VENUE, CO_INSTITUTION})


@dataclass(frozen=True, order=True)
class NodeRef:
    node_type: str
    key: str

    def __post_init__(self):
        if self.node_type not in NODE_TYPES:
            raise ValueError(f"unknown node type: {self.node_type!r}")
        if not self.key:
            raise ValueError("node key must be non-empty")


@dataclass(frozen=True, order=True)
class TypedEdge:
    edge_type: str
    src: NodeRef
    dst: NodeRef

    def __post_init__(self):
        try:
            want_src, want_dst = EDGE_SIGNATURES[self.edge_type]
        except KeyError:
            raise ValueError(f"unknown edge type: {self.edge_type!r}") from None
        if (self.src.node_type, self.dst.node_type) != (want_src, want_dst):
            raise ValueError(
                f"{self.edge_type} edge must be {want_src}->{want_dst}, "
                f"got {self.src.node_type}->{self.dst.node_type}"
            )


@dataclass(frozen=True, order=True)
class DocLink:
    """A projected document-document link.

    Symmetric link types are canonicalized to doc_a < doc_b at construction;
    co_citation stays directed from citer to cited.
    """

    link_type: str
    doc_a: str
    doc_b: str

    def __post_init__(self):
        if self.link_type not in LINK_TYPES:
            raise ValueError(f"unknown link type: {self.link_type!r}")
        if self.doc_a == self.doc_b:
            raise ValueError("document link endpoints must differ")
        if self.link_type in _SYMMETRIC_LINKS and self.doc_a > self.doc_b:
            a, b = self.doc_a, self.doc_b
            object.__setattr__(self, "doc_a", b)
            object.__setattr__(self, "doc_b", a)


@dataclass
class HeteroGraph:
    """Typed node sets and per-edge-type adjacency built from one corpus.

    ``paper_titles`` keeps each Paper node's title so node features can be
    derived from it without going back to the corpus.
    """

    nodes: dict[str, set[str]] = field(default_factory=lambda: {t: set() for t in NODE_TYPES})
    edges: dict[str, list[TypedEdge]] = field(
        default_factory=lambda: {t: [] for t in EDGE_SIGNATURES}
    )
    paper_titles: dict[str, str] = field(default_factory=dict)
    dropped_citations: int = 0

    def add_node(self, node_type: str, key: str) -> NodeRef:
        ref = NodeRef(node_type, key)
        self.nodes[node_type].add(key)
        return ref

    def add_edge(self, edge_type: str, src_key: str, dst_key: str) -> None:
        want_src, want_dst = EDGE_SIGNATURES[edge_type]
        if src_key not in self.nodes[want_src] or dst_key not in self.nodes[want_dst]:
            raise ValueError(f"dangling endpoint for {edge_type} edge {src_key!r}->{dst_key!r}")
        self.edges[edge_type].append(
            TypedEdge(edge_type, NodeRef(want_src, src_key), NodeRef(want_dst, dst_key))
        )

    def paper_ids(self) -> list[str]:
        return sorted(self.nodes[PAPER])

    def n_edges(self) -> int:
        return sum(len(es) for es in self.edges.values())


def build_graph(corpus: Corpus) -> HeteroGraph:
    """Build the heterogeneous graph from corpus metadata.

    One Paper node per document; writes/published_in/affiliated_with/has_topic
    edges from metadata (duplicate metadata entries within a document collapse
    to one edge); cites edges restricted to in-corpus targets.  Citations of
    unknown documents are dropped and counted in ``dropped_citations``.
    """
    if len(corpus) == 0:
        raise ValueError("cannot build a graph from an empty corpus")
    graph = HeteroGraph()
    for doc in corpus:
        graph.add_node(PAPER, doc.doc_id)
        graph.paper_titles[doc.doc_id] = doc.title
    for doc in corpus:
        for author in dict.fromkeys(doc.authors):
            graph.add_node(AUTHOR, author)
            graph.add_edge("writes", doc.doc_id, author)
        if doc.venue:
            graph.add_node(VENUE, doc.venue)
            graph.add_edge("published_in", doc.doc_id, doc.venue)
        for inst in dict.fromkeys(doc.institutions):
            graph.add_node(INSTITUTION, inst)
            graph.add_edge("affiliated_with", doc.doc_id, inst)
        for topic in dict.fromkeys(doc.topics):
            graph.add_node(TOPIC, topic)
            graph.add_edge("has_topic", doc.doc_id, topic)
        for cited in dict.fromkeys(doc.cited_ids):
            if cited in graph.nodes[PAPER]:
                graph.add_edge("cites", doc.doc_id, cited)
            else:
                graph.dropped_citations += 1
    return graph


def _group_pairs(groups: dict[str, set[str]], link_type: str) -> set[DocLink]:
    links: set[DocLink] = set()
    for members in groups.values():
        ordered = sorted(members)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                links.add(DocLink(link_type, a, b))
    return links


def project_document_links(graph: HeteroGraph) -> set[DocLink]:
    """Project document-document links from the base graph.

    co_citation: one directed link per cites edge.  co_topic / co_venue /
    co_institution: one canonical link per unordered document pair sharing at
    least one topic / the venue / at least one institution.
    """
    links: set[DocLink] = set()
    for edge in graph.edges["cites"]:
        links.add(DocLink(CO_CITATION, edge.src.key, edge.dst.key))

    by_attr: dict[str, dict[str, set[str]]] = {
        "has_topic": defaultdict(set),
        "published_in": defaultdict(set),
        "affiliated_with": defaultdict(set),
    }
    for edge_type, groups in by_attr.items():
        for edge in graph.edges[edge_type]:
            groups[edge.dst.key].add(edge.src.key)
    links |= _group_pairs(by_attr["has_topic"], CO_TOPIC)
    links |= _group_pairs(by_attr["published_in"], CO_VENUE)
    links |= _group_pairs(by_attr["affiliated_with"], CO_INSTITUTION)
    return links


@dataclass(frozen=True)
class GraphStats:
    node_counts: dict[str, int]
    edge_counts: dict[str, int]

    def flat(self) -> dict[str, int]:
        out = dict(self.node_counts)
        out.update(self.edge_counts)
        return out


def graph_stats(graph: HeteroGraph) -> GraphStats:
    """Exact per-type node and edge counts."""
    return GraphStats(
        node_counts={t: len(graph.nodes[t]) for t in NODE_TYPES},
        edge_counts={t: len(graph.edges[t]) for t in EDGE_SIGNATURES},
    )


def export_edge_list(graph: HeteroGraph) -> str:
    """Tab-separated edge list, sorted lexicographically for byte-stable output.

    One edge per line: ``edge_type<TAB>src_type:src_key<TAB>dst_type:dst_key``.
    """
    lines = []
    for edges in graph.edges.values():
        for e in edges:
            lines.append(
                f"{e.edge_type}\t{e.src.node_type}:{e.src.key}\t{e.dst.node_type}:{e.dst.key}"
            )
    lines.sort()
    return "".join(line + "\n" for line in lines)


def write_edge_list(graph: HeteroGraph, path: str | Path) -> None:
    Path(path).write_text(export_edge_list(graph), encoding="utf-8")
