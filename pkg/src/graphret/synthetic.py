"""Seeded synthetic corpora for demos, experiments, and verification.

Three generators:

* :func:`demo_corpus` -- a small mixed-domain corpus with authors, venues,
  institutions, topics, and citations; the bundled 50-document corpus is
  this generator at its defaults.
* :func:`two_block_corpus` -- two citation communities for link-prediction
  experiments; citations are dense inside a block (and concentrate among
  papers sharing authors) and sparse across blocks.
* :func:`ambiguous_cluster_corpus` -- two clusters whose wording heavily
  overlaps (text retrieval is noisy between them) while citations separate
  them cleanly; used to show what structural re-ranking adds.

Everything is driven by explicit seeds; no generator touches global RNG
state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Document

# A fixed science-flavored vocabulary; indices into it are what the seeded
# generators draw, so the word list must stay append-only.
WORDS = (
    "absorption acoustic adiabatic algebra alloy amplitude anion anode atom axial "
    "bacteria baseline bandgap basalt beam binding biomass boson boundary buffer "
    "carbon catalyst cathode cavity cell chirality chromatic cluster coefficient collision "
    "compound condensate conductivity convection copolymer coupling crystal current cytoplasm decay "
    "density dielectric diffraction diffusion dipole dislocation dopant dynamics eigenvalue elasticity "
    "electrode electrolyte emission energy entropy enzyme epitaxy equilibrium excitation fermion "
    "fiber field filament fission flux fracture frequency fusion genome glacier "
    "gradient granite graphene gravity hadron harmonic helix hydrate hydrolysis impedance "
    "impurity inductance inertia infrared interface interferometer ion isotope kinetics lattice "
    "ligand lithography luminescence magma magnetization manifold matrix membrane mesoscale metabolite "
    "microscopy mineral modulus molecule momentum monomer morphology mutation nanotube neutron "
    "nucleation nucleus operator orbital oscillation osmosis oxidation particle peptide permeability "
    "perturbation phase phonon photon plasma plasmid polymer porosity potential precipitate "
    "pressure protein proton quantum quasar radiation reactor receptor recombination refraction "
    "relativity resonance ribosome rotation scattering sediment semiconductor sensor silicate soliton "
    "solvent spectrum spin strain stratification stress substrate superconductor surface symmetry "
    "synthesis tectonics temperature tensor thermocouple topology torque transistor transition turbulence "
    "vacancy valence vapor velocity viscosity voltage vortex wave wavelength zeolite"
).split()

DEMO_DOMAINS = ("physics", "chemistry", "biology", "mathematics", "geology")


def _words(rng: np.random.Generator, count: int, pool=WORDS) -> list[str]:
    return [pool[i] for i in rng.integers(0, len(pool), size=count)]


def demo_corpus(n_docs: int = 50, seed: int = 7) -> list[Document]:
    """A mixed-domain corpus with full metadata and in-corpus citations."""
    rng = np.random.default_rng(seed)
    authors = [f"author-{i:02d}" for i in range(25)]
    venues = [f"venue-{i:02d}" for i in range(8)]
    institutions = [f"inst-{i:02d}" for i in range(6)]
    topics = [f"topic-{i:02d}" for i in range(12)]

    docs: list[Document] = []
    for i in range(n_docs):
        domain = DEMO_DOMAINS[i % len(DEMO_DOMAINS)]
        doc_id = f"doc-{i:04d}"
        title = " ".join(_words(rng, int(rng.integers(3, 7))))
        body = " ".join(_words(rng, int(rng.integers(80, 350))))
        n_authors = int(rng.integers(1, 4))
        doc_authors = [authors[j] for j in rng.choice(len(authors), size=n_authors, replace=False)]
        venue = venues[int(rng.integers(0, len(venues)))]
        doc_institutions = [institutions[int(rng.integers(0, len(institutions)))]]
        n_topics = int(rng.integers(1, 4))
        doc_topics = sorted({topics[int(t)] for t in rng.integers(0, len(topics), size=n_topics)})
        # cite earlier documents, biased toward the same domain
        cited: list[str] = []
        if i > 0:
            for _ in range(int(rng.integers(0, 5))):
                j = int(rng.integers(0, i))
                if rng.random() < 0.7:
                    same = [m for m in range(i) if m % len(DEMO_DOMAINS) == i % len(DEMO_DOMAINS)]
                    if same:
                        j = same[int(rng.integers(0, len(same)))]
                cited.append(f"doc-{j:04d}")
        docs.append(
            Document(
                doc_id=doc_id,
                title=title,
                body=body,
                domain=domain,
                authors=tuple(doc_authors),
                venue=venue,
                institutions=tuple(doc_institutions),
                topics=tuple(doc_topics),
                cited_ids=tuple(sorted(set(cited))),
            )
        )
    return docs


def demo_queries(seed: int = 7, n_queries: int = 8) -> list[tuple[str, str]]:
    """(query text, gold domain) pairs built from demo-corpus titles."""
    docs = demo_corpus(seed=seed)
    rng = np.random.default_rng(seed + 1)
    picks = rng.choice(len(docs), size=n_queries, replace=False)
    queries = []
    for i in picks:
        doc = docs[int(i)]
        body_words = doc.body.split()
        extra = [body_words[int(j)] for j in rng.integers(0, len(body_words), size=4)]
        queries.append((doc.title + " " + " ".join(extra), doc.domain))
    return queries


@dataclass(frozen=True)
class TwoBlockCorpus:
    documents: tuple[Document, ...]
    block_of: dict[str, int]


def two_block_corpus(
    seed: int,
    n_papers: int = 200,
    n_authors: int = 40,
    n_venues: int = 10,
    cites_per_paper: int = 8,
    author_bias: float = 0.7,
    inter_block_rate: float = 0.3,
) -> TwoBlockCorpus:
    """Two citation communities over a heterogeneous scaffold.

    Authors and venues are split between the blocks; each paper cites
    ``cites_per_paper`` block-mates, preferring papers that share one of its
    authors with probability ``author_bias``, plus a sparse number of
    cross-block citations (``inter_block_rate`` expected per paper).  Titles
    are drawn from the shared vocabulary, so input features carry no block
    signal by themselves.
    """
    rng = np.random.default_rng(seed)
    half = n_papers // 2
    block_of_idx = [0 if i < half else 1 for i in range(n_papers)]
    author_pool = {
        0: [f"author-a{i:02d}" for i in range(n_authors // 2)],
        1: [f"author-b{i:02d}" for i in range(n_authors - n_authors // 2)],
    }
    venue_pool = {
        0: [f"venue-a{i}" for i in range(n_venues // 2)],
        1: [f"venue-b{i}" for i in range(n_venues - n_venues // 2)],
    }

    paper_authors: list[tuple[str, ...]] = []
    for i in range(n_papers):
        pool = author_pool[block_of_idx[i]]
        picks = rng.choice(len(pool), size=2, replace=False)
        paper_authors.append(tuple(pool[j] for j in picks))

    by_author: dict[str, list[int]] = {}
    for i, names in enumerate(paper_authors):
        for name in names:
            by_author.setdefault(name, []).append(i)

    docs: list[Document] = []
    for i in range(n_papers):
        block = block_of_idx[i]
        doc_id = f"p{i:04d}"
        title = " ".join(_words(rng, 4))
        body = " ".join(_words(rng, 30))
        venue = venue_pool[block][int(rng.integers(0, len(venue_pool[block])))]

        peers = sorted({j for a in paper_authors[i] for j in by_author[a] if j != i})
        block_members = [j for j in range(n_papers) if block_of_idx[j] == block and j != i]
        cited: set[int] = set()
        while len(cited) < min(cites_per_paper, len(block_members)):
            if peers and rng.random() < author_bias:
                j = peers[int(rng.integers(0, len(peers)))]
            else:
                j = block_members[int(rng.integers(0, len(block_members)))]
            cited.add(j)
        if rng.random() < inter_block_rate:
            other = [j for j in range(n_papers) if block_of_idx[j] != block]
            cited.add(other[int(rng.integers(0, len(other)))])

        docs.append(
            Document(
                doc_id=doc_id,
                title=title,
                body=body,
                domain=f"block-{block}",
                authors=paper_authors[i],
                venue=venue,
                cited_ids=tuple(sorted(f"p{j:04d}" for j in cited)),
            )
        )
    block_of = {doc.doc_id: block_of_idx[i] for i, doc in enumerate(docs)}
    return TwoBlockCorpus(documents=tuple(docs), block_of=block_of)


@dataclass(frozen=True)
class AmbiguousClusterCorpus:
    documents: tuple[Document, ...]
    cluster_of: dict[str, int]
    queries: tuple[tuple[str, int], ...]  # (query text, intended cluster)


def ambiguous_cluster_corpus(
    seed: int,
    docs_per_cluster: int = 30,
    shared_vocab: int = 150,
    signal_vocab: int = 8,
    body_shared: int = 50,
    body_signal: int = 6,
    cites_per_doc: int = 6,
    queries_per_cluster: int = 2,
) -> AmbiguousClusterCorpus:
    """Two clusters that text retrieval struggles to separate.

    Bodies are mostly drawn from a shared vocabulary with only a few
    cluster-specific signal words, so dot-product scores between a query and
    the two clusters overlap heavily; citations stay inside a cluster, so the
    graph separates them cleanly.
    """
    rng = np.random.default_rng(seed)
    shared = WORDS[:shared_vocab]
    signal = {
        0: [f"alphaterm{i}" for i in range(signal_vocab)],
        1: [f"betaterm{i}" for i in range(signal_vocab)],
    }
    author_pool = {
        0: [f"ca{i:02d}" for i in range(10)],
        1: [f"cb{i:02d}" for i in range(10)],
    }

    docs: list[Document] = []
    cluster_of: dict[str, int] = {}
    for cluster in (0, 1):
        for i in range(docs_per_cluster):
            doc_id = f"c{cluster}-{i:03d}"
            words = _words(rng, body_shared, shared)
            words += [
                signal[cluster][int(j)]
                for j in rng.integers(0, signal_vocab, size=body_signal)
            ]
            rng.shuffle(words)
            title = " ".join(_words(rng, 3, shared))
            picks = rng.choice(10, size=2, replace=False)
            authors = tuple(author_pool[cluster][j] for j in picks)
            peers = [j for j in range(docs_per_cluster) if j != i]
            cited_idx = rng.choice(len(peers), size=min(cites_per_doc, len(peers)), replace=False)
            cited = tuple(sorted(f"c{cluster}-{peers[j]:03d}" for j in cited_idx))
            docs.append(
                Document(
                    doc_id=doc_id,
                    title=title,
                    body=" ".join(words),
                    domain=f"cluster-{cluster}",
                    authors=authors,
                    venue=f"v{cluster}",
                    cited_ids=cited,
                )
            )
            cluster_of[doc_id] = cluster

    queries: list[tuple[str, int]] = []
    for cluster in (0, 1):
        for _ in range(queries_per_cluster):
            terms = _words(rng, 8, shared)
            terms += [
                signal[cluster][int(j)] for j in rng.integers(0, signal_vocab, size=2)
            ]
            rng.shuffle(terms)
            queries.append((" ".join(terms), cluster))
    return AmbiguousClusterCorpus(
        documents=tuple(docs),
        cluster_of=cluster_of,
        queries=tuple(queries),
    )


def corpus_from_documents(documents) -> Corpus:
    return Corpus(documents=tuple(documents))
