"""Command-line pipeline: every stage of the library as a subcommand.

Stages communicate only through documented on-disk formats inside one
working directory (``--out``): the corpus JSONL feeds ``ingest``, which
writes ``passages.jsonl``; ``embed`` and ``train-gnn`` write binary
embedding matrices with id sidecars; ``index`` assembles them into an index
directory with a manifest; ``query``/``rerank``/``eval`` consume the index.
A single ``--seed`` fans out into per-stage seeds, so one flag reproduces
every artifact byte for byte.

Exit codes: 0 success, 1 stage failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import embfile, eval_metrics, fusion_index, hdg, struct_embed, training_signals
from .corpus import (
    Corpus,
    chunk_corpus,
    ingest_corpus,
    passage_doc_id,
    read_passages_jsonl,
    write_passages_jsonl,
)
from .hashing import derive_seed
from .text_embed import EmbedderSpec, embed_query, embed_text

SUBCOMMANDS = (
    "ingest",
    "build-graph",
    "train-gnn",
    "embed",
    "index",
    "query",
    "rerank",
    "mask",
    "distill",
    "eval",
    "stats",
)


@dataclass
class PipelineConfig:
    corpus: str | None = None
    out: str | None = None
    seed: int = 0
    k: int = fusion_index.DEFAULT_TOP_K
    beta: float = 0.5
    theta: float = 1.0
    domain: str | None = None
    pool: int = 50
    d_t: int = 256
    d_s: int = 64
    epochs: int = 150
    learning_rate: float = 0.05
    k_neg: int = 1
    holdout_frac: float = 0.15
    layers: int = 2
    heads: int = 2
    feature_dim: int = 64
    mask_ratio: float = 0.15
    mean_span: float = 3.0


_INT_KEYS = {"seed", "k", "pool", "d_t", "d_s", "epochs", "k_neg", "layers", "heads",
             "feature_dim"}
_FLOAT_KEYS = {"beta", "theta", "learning_rate", "holdout_frac", "mask_ratio", "mean_span"}


def parse_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` config file; '#' starts a comment line."""
    values: dict = {}
    known = {f.name for f in fields(PipelineConfig)}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {line!r}")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
        if key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        else:
            values[key] = value
    return values


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        for key, value in parse_config_file(args.config).items():
            setattr(cfg, key, value)
    for f in fields(PipelineConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            setattr(cfg, f.name, flag_value)
    return cfg


def _load_corpus(cfg: PipelineConfig) -> Corpus:
    if not cfg.corpus:
        raise ValueError("no corpus given (use --corpus or the config file)")
    corpus = ingest_corpus(cfg.corpus)
    if cfg.domain:
        kept = tuple(d for d in corpus if d.domain == cfg.domain)
        if not kept:
            raise ValueError(f"no documents in domain {cfg.domain!r}")
        in_domain = {d.doc_id for d in kept}
        kept = tuple(
            type(d)(
                doc_id=d.doc_id, title=d.title, body=d.body, domain=d.domain,
                authors=d.authors, venue=d.venue, institutions=d.institutions,
                topics=d.topics,
                cited_ids=tuple(c for c in d.cited_ids if c in in_domain),
            )
            for d in kept
        )
        corpus = Corpus(documents=kept)
    return corpus


def _out_dir(cfg: PipelineConfig) -> Path:
    if not cfg.out:
        raise ValueError("no output directory given (use --out or the config file)")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    corpus = _load_corpus(cfg)
    passages = chunk_corpus(corpus)
    write_passages_jsonl(passages, out / "passages.jsonl")
    print(f"documents={len(corpus)} passages={len(passages)}")
    return 0


def cmd_build_graph(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    graph = hdg.build_graph(_load_corpus(cfg))
    hdg.write_edge_list(graph, out / "edges.tsv")
    stats = hdg.graph_stats(graph)
    embfile.write_kv_report(out / "graph_stats.txt", sorted(stats.flat().items()))
    for key, value in sorted(stats.flat().items()):
        print(f"{key}={value}")
    if graph.dropped_citations:
        print(f"warning: dropped {graph.dropped_citations} out-of-corpus citations",
              file=sys.stderr)
    return 0


def cmd_stats(args) -> int:
    cfg = resolve_config(args)
    graph = hdg.build_graph(_load_corpus(cfg))
    for key, value in sorted(hdg.graph_stats(graph).flat().items()):
        print(f"{key}={value}")
    return 0


def cmd_train_gnn(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    graph = hdg.build_graph(_load_corpus(cfg))
    encoder = struct_embed.train_link_prediction(
        graph,
        struct_embed.TrainConfig(
            epochs=cfg.epochs,
            learning_rate=cfg.learning_rate,
            k_neg=cfg.k_neg,
            seed=derive_seed(cfg.seed, "train-gnn"),
            holdout_frac=cfg.holdout_frac,
            dim=cfg.d_s,
            layers=cfg.layers,
            heads=cfg.heads,
            feature_dim=cfg.feature_dim,
        ),
    )
    doc_vecs = encoder.document_embeddings()
    doc_ids = sorted(doc_vecs)
    matrix = np.stack([doc_vecs[d] for d in doc_ids])
    embfile.write_embedding_matrix(out / "struct_docs.semb", matrix)
    embfile.write_id_sidecar(out / "struct_docs.ids", doc_ids)
    struct_embed.write_train_report(out / "train_report.txt", encoder.report)
    print(f"documents={len(doc_ids)} dim={cfg.d_s} final_loss={encoder.report.final_loss:.6f}")
    for name in sorted(encoder.report.auc):
        print(f"auc_{name}={encoder.report.auc[name]:.4f}")
    return 0


def cmd_embed(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    passages_path = out / "passages.jsonl"
    if not passages_path.exists():
        raise ValueError(f"{passages_path} not found; run ingest first")
    passages = read_passages_jsonl(passages_path)
    spec = EmbedderSpec(dim=cfg.d_t)
    matrix = np.stack([embed_text(p.text, spec) for p in passages])
    embfile.write_embedding_matrix(out / "text.semb", matrix)
    embfile.write_id_sidecar(out / "text.ids", [p.passage_id for p in passages])
    print(f"passages={len(passages)} dim={cfg.d_t}")
    return 0


def cmd_index(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    for name in ("text.semb", "text.ids", "struct_docs.semb", "struct_docs.ids"):
        if not (out / name).exists():
            raise ValueError(f"{out / name} not found; run embed and train-gnn first")
    text_mat = embfile.read_embedding_matrix(out / "text.semb").astype(np.float64)
    passage_ids = embfile.read_id_sidecar(out / "text.ids")
    doc_mat = embfile.read_embedding_matrix(out / "struct_docs.semb").astype(np.float64)
    doc_ids = embfile.read_id_sidecar(out / "struct_docs.ids")
    doc_row = {d: i for i, d in enumerate(doc_ids)}
    struct_rows = []
    for pid in passage_ids:
        doc = passage_doc_id(pid)
        if doc not in doc_row:
            raise ValueError(f"no structural embedding for document {doc!r}")
        struct_rows.append(doc_mat[doc_row[doc]])
    index = fusion_index.FlatIndex(tuple(passage_ids), text_mat, np.stack(struct_rows))
    fusion_index.save_index(
        index,
        out / "index",
        default_k=cfg.k,
        extra={"embedder": {"kind": "hashed_tf", "dim": cfg.d_t, "normalize": False}},
    )
    print(f"indexed={len(index)} text_dim={index.text_dim} struct_dim={index.struct_dim}")
    return 0


def _load_index_and_spec(cfg: PipelineConfig):
    out = _out_dir(cfg)
    index, manifest = fusion_index.load_index(out / "index")
    emb = manifest.get("embedder", {})
    spec = EmbedderSpec(
        dim=int(emb.get("dim", manifest["text_dim"])),
        normalize=bool(emb.get("normalize", False)),
    )
    return index, manifest, spec


def _print_result(result: fusion_index.RetrievalResult) -> None:
    for entry in result.entries:
        if entry.combined_score is None:
            print(f"{entry.passage_id}\t{entry.text_score:.6f}")
        else:
            print(f"{entry.passage_id}\t{entry.text_score:.6f}\t{entry.combined_score:.6f}")


def _save_result(path: str, query: str, result: fusion_index.RetrievalResult) -> None:
    with Path(path).open("a", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {
                    "query": query,
                    "method": result.method,
                    "k": result.k_requested,
                    "retrieved": [
                        {
                            "passage_id": e.passage_id,
                            "text_score": e.text_score,
                            "combined_score": e.combined_score,
                        }
                        for e in result.entries
                    ],
                },
                sort_keys=True,
            )
            + "\n"
        )


def cmd_query(args) -> int:
    cfg = resolve_config(args)
    index, _, spec = _load_index_and_spec(cfg)
    result = fusion_index.topk(index, embed_query(args.text, spec), k=cfg.k)
    _print_result(result)
    if args.save:
        _save_result(args.save, args.text, result)
    return 0


def cmd_rerank(args) -> int:
    cfg = resolve_config(args)
    index, _, spec = _load_index_and_spec(cfg)
    pooled = fusion_index.topk(index, embed_query(args.text, spec), k=max(cfg.pool, cfg.k))
    result = fusion_index.rerank_with_structure(pooled, index, beta=cfg.beta, k=cfg.k)
    _print_result(result)
    if args.save:
        _save_result(args.save, args.text, result)
    return 0


def cmd_mask(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    passages_path = out / "passages.jsonl"
    if not passages_path.exists():
        raise ValueError(f"{passages_path} not found; run ingest first")
    passages = read_passages_jsonl(passages_path)
    samples = []
    skipped = 0
    for p in passages:
        tokens = p.text.split()
        seed = derive_seed(cfg.seed, f"mask:{p.passage_id}")
        if len(tokens) < 2:
            skipped += 1
            continue
        config = training_signals.MaskingConfig(
            mask_ratio=cfg.mask_ratio, mean_span=cfg.mean_span, seed=seed
        )
        samples.append((training_signals.mask_spans(tokens, config), seed))
    training_signals.write_masked_samples_jsonl(samples, out / "masked.jsonl")
    print(f"masked={len(samples)} skipped={skipped}")
    return 0


def cmd_distill(args) -> int:
    cfg = resolve_config(args)
    payload = json.loads(Path(args.inputs).read_text(encoding="utf-8"))
    inputs = training_signals.DistillInputs(
        reader_loglik=tuple(payload["reader_loglik"]),
        retriever_scores=tuple(payload["retriever_scores"]),
        temperature=float(payload.get("temperature", cfg.theta)),
    )
    loss, grad = training_signals.distill_loss(inputs, direction=args.direction)
    print(f"loss={loss!r}")
    print("gradient=" + " ".join(repr(g) for g in grad))
    if args.save:
        Path(args.save).write_text(
            json.dumps(
                {"loss": loss, "gradient": list(grad), "direction": args.direction},
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(cfg)
    index, _, spec = _load_index_and_spec(cfg)
    queries = []
    with Path(args.predictions).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            ids = tuple(rec["retrieved_ids"])
            rows = [index.row(pid) for pid in ids]
            queries.append(
                eval_metrics.QueryEval(
                    prediction=rec["prediction"],
                    gold=rec["gold"],
                    query_vec=embed_query(rec["query"], spec),
                    retrieved_vecs=index.text_mat[rows],
                    retrieved_ids=ids,
                    doc_ids=tuple(passage_doc_id(pid) for pid in ids),
                )
            )
    unique_by = "document" if args.unique_docs else "passage"
    report, rows = eval_metrics.evaluate_queries(queries, unique_by=unique_by)
    eval_metrics.write_metric_report(out / "report.txt", report)
    eval_metrics.write_per_query_jsonl(out / "per_query.jsonl", rows)
    for key in ("n_queries", "exact_match", "f1", "relevance", "diversity", "faithfulness"):
        print(f"{key}={getattr(report, key)}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", help="corpus JSONL file")
    parser.add_argument("--out", help="working/output directory")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="master pipeline seed")
    parser.add_argument("--k", type=int, help="number of passages to retrieve")
    parser.add_argument("--beta", type=float, help="structural re-rank weight")
    parser.add_argument("--theta", type=float, help="retriever softmax temperature")
    parser.add_argument("--domain", help="restrict the corpus to one domain label")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphret",
        description="Structure-aware dense passage retrieval pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    handlers = {
        "ingest": cmd_ingest,
        "build-graph": cmd_build_graph,
        "train-gnn": cmd_train_gnn,
        "embed": cmd_embed,
        "index": cmd_index,
        "query": cmd_query,
        "rerank": cmd_rerank,
        "mask": cmd_mask,
        "distill": cmd_distill,
        "eval": cmd_eval,
        "stats": cmd_stats,
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(handler=handlers[name])
        if name in ("train-gnn",):
            p.add_argument("--epochs", type=int)
            p.add_argument("--learning-rate", dest="learning_rate", type=float)
            p.add_argument("--d-s", dest="d_s", type=int)
            p.add_argument("--feature-dim", dest="feature_dim", type=int)
        if name in ("embed",):
            p.add_argument("--d-t", dest="d_t", type=int)
        if name in ("query", "rerank"):
            p.add_argument("text", help="query text")
            p.add_argument("--save", help="append the result as JSONL to this file")
        if name == "rerank":
            p.add_argument("--pool", type=int, help="candidate pool size before re-ranking")
        if name == "mask":
            p.add_argument("--mask-ratio", dest="mask_ratio", type=float)
            p.add_argument("--mean-span", dest="mean_span", type=float)
        if name == "distill":
            p.add_argument("--inputs", required=True, help="JSON file with distillation inputs")
            p.add_argument(
                "--direction",
                default=training_signals.DIRECTION_RETRIEVER_TO_POSTERIOR,
                choices=[
                    training_signals.DIRECTION_RETRIEVER_TO_POSTERIOR,
                    training_signals.DIRECTION_POSTERIOR_TO_RETRIEVER,
                ],
            )
            p.add_argument("--save", help="write loss and gradient to this JSON file")
        if name == "eval":
            p.add_argument("--predictions", required=True,
                           help="JSONL with query/prediction/gold/retrieved_ids records")
            p.add_argument("--unique-docs", action="store_true",
                           help="count diversity over documents instead of passages")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001 - map any stage failure to exit 1
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
