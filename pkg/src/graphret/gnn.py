"""Heterogeneous attention message passing with hand-written gradients.

The encoder is a compact heterogeneous attention network: per node type an
input projection, then ``layers`` rounds in which every node aggregates
neighbor messages per edge type through edge-type-specific linear maps,
weighted by a softmax attention over its incoming edges, sums the per-type
aggregates, adds a projected residual of its own state, and applies tanh.

Forward and backward are written directly in numpy (float64) so training is
bit-deterministic given a seed and the analytic gradients can be verified
against central finite differences.

Message passing uses the base edges plus a reverse relation per edge type
(``rev_<name>``, its own parameters), so information also flows from
metadata nodes back into Paper nodes; link-prediction objectives only ever
score the base relations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .hdg import EDGE_SIGNATURES, HeteroGraph

REVERSE_PREFIX = "rev_"


def reverse_relation(name: str) -> str:
    return REVERSE_PREFIX + name


@dataclass(frozen=True)
class RelationEdges:
    """Edges of one relation, as index arrays into the per-type node order."""

    name: str
    src_type: str
    dst_type: str
    src: np.ndarray  # (E,) int
    dst: np.ndarray  # (E,) int

    @property
    def n_edges(self) -> int:
        return int(self.src.shape[0])


@dataclass(frozen=True)
class CompiledGraph:
    """A HeteroGraph lowered to arrays with a canonical node order per type.

    Node order is sorted by key, so embeddings are independent of insertion
    order.  ``relations`` contains the base relations (sorted by name) and,
    when built with reverse relations, one ``rev_`` relation per base one.
    """

    node_types: tuple[str, ...]
    node_keys: dict[str, tuple[str, ...]]
    node_index: dict[str, dict[str, int]]
    relations: tuple[RelationEdges, ...]

    def n_nodes(self, node_type: str) -> int:
        return len(self.node_keys[node_type])

    def relation(self, name: str) -> RelationEdges:
        for rel in self.relations:
            if rel.name == name:
                return rel
        raise KeyError(f"no relation named {name!r}")


def compile_graph(
    graph: HeteroGraph,
    include_reverse: bool = True,
    edge_subset: dict[str, list] | None = None,
) -> CompiledGraph:
    """Lower a HeteroGraph for message passing.

    ``edge_subset`` optionally replaces the edges of the named base relations
    (used to exclude held-out edges from the training adjacency).
    """
    node_types = tuple(sorted(t for t in graph.nodes if graph.nodes[t]))
    node_keys = {t: tuple(sorted(graph.nodes[t])) for t in node_types}
    node_index = {t: {k: i for i, k in enumerate(node_keys[t])} for t in node_types}

    relations: list[RelationEdges] = []
    for name in sorted(EDGE_SIGNATURES):
        src_type, dst_type = EDGE_SIGNATURES[name]
        if src_type not in node_index or dst_type not in node_index:
            continue
        edges = edge_subset[name] if edge_subset and name in edge_subset else graph.edges[name]
        if not edges:
            continue
        src = np.array([node_index[src_type][e.src.key] for e in edges], dtype=np.intp)
        dst = np.array([node_index[dst_type][e.dst.key] for e in edges], dtype=np.intp)
        relations.append(RelationEdges(name, src_type, dst_type, src, dst))
        if include_reverse:
            relations.append(
                RelationEdges(reverse_relation(name), dst_type, src_type, dst.copy(), src.copy())
            )
    return CompiledGraph(node_types, node_keys, node_index, tuple(relations))


@dataclass
class GnnParams:
    """All trainable arrays, keyed by a stable hierarchical name.

    Keys: ``in/<type>/{w,b}`` for input projections, and per layer ``l<i>``
    ``l<i>/<type>/{self_w,self_b}`` plus ``l<i>/<rel>/{msg_w,att_src,att_dst}``.
    """

    layers: int
    dim: int
    heads: int
    in_dim: int
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    def names(self) -> list[str]:
        return sorted(self.arrays)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.arrays[n].ravel() for n in self.names()])

    def from_vector(self, vec: np.ndarray) -> None:
        offset = 0
        for name in self.names():
            arr = self.arrays[name]
            size = arr.size
            arr[...] = vec[offset : offset + size].reshape(arr.shape)
            offset += size
        if offset != vec.size:
            raise ValueError(f"vector has {vec.size} entries, params need {offset}")

    def copy(self) -> "GnnParams":
        return GnnParams(
            self.layers,
            self.dim,
            self.heads,
            self.in_dim,
            {k: v.copy() for k, v in self.arrays.items()},
        )


def init_gnn_params(
    compiled: CompiledGraph,
    in_dim: int,
    dim: int = 64,
    layers: int = 2,
    heads: int = 2,
    seed: int = 0,
) -> GnnParams:
    """Seeded Glorot-style initialization; draw order is fixed by sorted
    parameter names, so identical seeds give identical parameters."""
    if dim % heads != 0:
        raise ValueError(f"dim ({dim}) must be divisible by heads ({heads})")
    head_dim = dim // heads
    shapes: dict[str, tuple[int, ...]] = {}
    for t in compiled.node_types:
        shapes[f"in/{t}/w"] = (dim, in_dim)
        shapes[f"in/{t}/b"] = (dim,)
    for layer in range(layers):
        for t in compiled.node_types:
            shapes[f"l{layer}/{t}/self_w"] = (dim, dim)
            shapes[f"l{layer}/{t}/self_b"] = (dim,)
        for rel in compiled.relations:
            shapes[f"l{layer}/{rel.name}/msg_w"] = (heads, head_dim, dim)
            shapes[f"l{layer}/{rel.name}/att_src"] = (heads, head_dim)
            shapes[f"l{layer}/{rel.name}/att_dst"] = (heads, dim)

    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name in sorted(shapes):
        shape = shapes[name]
        if name.endswith("/b") or name.endswith("self_b"):
            arrays[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in = shape[-1]
            fan_out = int(np.prod(shape[:-1])) or 1
            scale = np.sqrt(2.0 / (fan_in + fan_out))
            arrays[name] = rng.normal(0.0, scale, size=shape).astype(np.float64)
    return GnnParams(layers, dim, heads, in_dim, arrays)


def gnn_forward_compiled(
    compiled: CompiledGraph,
    params: GnnParams,
    features: dict[str, np.ndarray],
    want_cache: bool = False,
):
    """Run the network; returns final per-type embeddings and, on request,
    the intermediate values the backward pass needs."""
    h = {}
    for t in compiled.node_types:
        x = features[t]
        if x.shape != (compiled.n_nodes(t), params.in_dim):
            raise ValueError(
                f"features[{t!r}] has shape {x.shape}, "
                f"want ({compiled.n_nodes(t)}, {params.in_dim})"
            )
        h[t] = x @ params.arrays[f"in/{t}/w"].T + params.arrays[f"in/{t}/b"]

    states = [h]
    rel_caches: list[dict[str, tuple]] = []
    for layer in range(params.layers):
        h_prev = states[-1]
        agg = {
            t: np.zeros((compiled.n_nodes(t), params.heads, params.head_dim))
            for t in compiled.node_types
        }
        cache: dict[str, tuple] = {}
        for rel in compiled.relations:
            h_src = h_prev[rel.src_type][rel.src]
            h_dst = h_prev[rel.dst_type][rel.dst]
            msg_w = params.arrays[f"l{layer}/{rel.name}/msg_w"]
            att_src = params.arrays[f"l{layer}/{rel.name}/att_src"]
            att_dst = params.arrays[f"l{layer}/{rel.name}/att_dst"]

            msg = np.einsum("ed,chd->ech", h_src, msg_w)  # (E, heads, head_dim)
            logits = np.tanh(np.einsum("ech,ch->ec", msg, att_src) + h_dst @ att_dst.T)

            # softmax over the incoming edges of each destination node
            n_dst = compiled.n_nodes(rel.dst_type)
            seg_max = np.full((n_dst, params.heads), -np.inf)
            np.maximum.at(seg_max, rel.dst, logits)
            unnorm = np.exp(logits - seg_max[rel.dst])
            seg_sum = np.zeros((n_dst, params.heads))
            np.add.at(seg_sum, rel.dst, unnorm)
            alpha = unnorm / seg_sum[rel.dst]

            np.add.at(agg[rel.dst_type], rel.dst, alpha[:, :, None] * msg)
            cache[rel.name] = (msg, logits, alpha)

        h_next = {}
        for t in compiled.node_types:
            self_w = params.arrays[f"l{layer}/{t}/self_w"]
            self_b = params.arrays[f"l{layer}/{t}/self_b"]
            z = h_prev[t] @ self_w.T + self_b + agg[t].reshape(compiled.n_nodes(t), params.dim)
            h_next[t] = np.tanh(z)
        states.append(h_next)
        rel_caches.append(cache)

    if want_cache:
        return states[-1], (states, rel_caches)
    return states[-1]


def gnn_backward_compiled(
    compiled: CompiledGraph,
    params: GnnParams,
    features: dict[str, np.ndarray],
    cache,
    grad_out: dict[str, np.ndarray],
) -> dict[str, np.ndarray]:
    """Backpropagate d(loss)/d(final embeddings) to all parameters."""
    states, rel_caches = cache
    grads = {name: np.zeros_like(arr) for name, arr in params.arrays.items()}
    g = {t: grad_out[t].copy() for t in compiled.node_types}

    for layer in reversed(range(params.layers)):
        h_prev = states[layer]
        h_out = states[layer + 1]
        g_prev = {t: np.zeros_like(h_prev[t]) for t in compiled.node_types}
        d_agg = {}
        for t in compiled.node_types:
            dz = g[t] * (1.0 - h_out[t] ** 2)
            grads[f"l{layer}/{t}/self_w"] += dz.T @ h_prev[t]
            grads[f"l{layer}/{t}/self_b"] += dz.sum(axis=0)
            g_prev[t] += dz @ params.arrays[f"l{layer}/{t}/self_w"]
            d_agg[t] = dz.reshape(compiled.n_nodes(t), params.heads, params.head_dim)

        for rel in compiled.relations:
            msg, logits, alpha = rel_caches[layer][rel.name]
            msg_w = params.arrays[f"l{layer}/{rel.name}/msg_w"]
            att_src = params.arrays[f"l{layer}/{rel.name}/att_src"]
            att_dst = params.arrays[f"l{layer}/{rel.name}/att_dst"]
            h_src = h_prev[rel.src_type][rel.src]
            h_dst = h_prev[rel.dst_type][rel.dst]

            d_contrib = d_agg[rel.dst_type][rel.dst]  # (E, heads, head_dim)
            d_alpha = np.einsum("ech,ech->ec", d_contrib, msg)
            d_msg = alpha[:, :, None] * d_contrib

            # softmax backward within each destination segment
            n_dst = compiled.n_nodes(rel.dst_type)
            seg_dot = np.zeros((n_dst, params.heads))
            np.add.at(seg_dot, rel.dst, alpha * d_alpha)
            d_logits = alpha * (d_alpha - seg_dot[rel.dst])
            d_pre = d_logits * (1.0 - logits**2)  # tanh on the attention logit

            d_msg += d_pre[:, :, None] * att_src[None, :, :]
            grads[f"l{layer}/{rel.name}/att_src"] += np.einsum("ec,ech->ch", d_pre, msg)
            grads[f"l{layer}/{rel.name}/att_dst"] += np.einsum("ec,ed->cd", d_pre, h_dst)
            np.add.at(g_prev[rel.dst_type], rel.dst, d_pre @ att_dst)

            grads[f"l{layer}/{rel.name}/msg_w"] += np.einsum("ech,ed->chd", d_msg, h_src)
            np.add.at(g_prev[rel.src_type], rel.src, np.einsum("ech,chd->ed", d_msg, msg_w))

        g = g_prev

    for t in compiled.node_types:
        grads[f"in/{t}/w"] += g[t].T @ features[t]
        grads[f"in/{t}/b"] += g[t].sum(axis=0)
    return grads


@dataclass(frozen=True)
class LinkPredBatch:
    """Positive edges plus destination-corrupted negatives, per relation.

    Negatives are drawn uniformly among nodes of the relation's destination
    type and never equal the positive they corrupt.
    """

    positives: dict[str, tuple[np.ndarray, np.ndarray]]
    negatives: dict[str, tuple[np.ndarray, np.ndarray]]

    def samples(self):
        """Yield (relation name, src indices, dst indices, labels)."""
        for name in sorted(set(self.positives) | set(self.negatives)):
            srcs, dsts, labels = [], [], []
            if name in self.positives:
                s, d = self.positives[name]
                srcs.append(s)
                dsts.append(d)
                labels.append(np.ones(s.shape[0]))
            if name in self.negatives:
                s, d = self.negatives[name]
                srcs.append(s)
                dsts.append(d)
                labels.append(np.zeros(s.shape[0]))
            yield name, np.concatenate(srcs), np.concatenate(dsts), np.concatenate(labels)

    def size(self) -> int:
        return sum(s.shape[0] for s, _ in self.positives.values()) + sum(
            s.shape[0] for s, _ in self.negatives.values()
        )


def sample_negatives(
    positives: dict[str, tuple[np.ndarray, np.ndarray]],
    n_dst_nodes: dict[str, int],
    k_neg: int,
    rng: np.random.Generator,
) -> LinkPredBatch:
    """Corrupt each positive's destination ``k_neg`` times, uniformly within
    the destination type, resampling collisions with the true destination.

    Relations whose destination type has a single node are skipped (every
    corruption would reproduce the positive).
    """
    negatives: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name in sorted(positives):
        src, dst = positives[name]
        n_dst = n_dst_nodes[name]
        if n_dst < 2 or src.size == 0:
            continue
        neg_src = np.repeat(src, k_neg)
        neg_dst = rng.integers(0, n_dst, size=neg_src.shape[0])
        true_dst = np.repeat(dst, k_neg)
        clash = neg_dst == true_dst
        while np.any(clash):
            neg_dst[clash] = rng.integers(0, n_dst, size=int(clash.sum()))
            clash = neg_dst == true_dst
        negatives[name] = (neg_src, neg_dst.astype(np.intp))
    return LinkPredBatch(positives=positives, negatives=negatives)


def edge_scores(
    embeddings: dict[str, np.ndarray],
    rel_signature: tuple[str, str],
    src: np.ndarray,
    dst: np.ndarray,
) -> np.ndarray:
    """Link score: dot product of the endpoint embeddings."""
    src_type, dst_type = rel_signature
    return np.einsum("ed,ed->e", embeddings[src_type][src], embeddings[dst_type][dst])


def link_pred_loss_and_grad(
    compiled: CompiledGraph,
    params: GnnParams,
    features: dict[str, np.ndarray],
    batch: LinkPredBatch,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean binary cross-entropy of sigmoid(dot(h_src, h_dst)) over the batch,
    with analytic gradients for every parameter."""
    total = batch.size()
    if total == 0:
        raise ValueError("empty link-prediction batch")
    h, cache = gnn_forward_compiled(compiled, params, features, want_cache=True)
    grad_h = {t: np.zeros_like(h[t]) for t in compiled.node_types}

    loss = 0.0
    for name, src, dst, labels in batch.samples():
        src_type, dst_type = EDGE_SIGNATURES[name]
        scores = np.einsum("ed,ed->e", h[src_type][src], h[dst_type][dst])
        # numerically stable BCE-with-logits
        loss += float(
            np.sum(np.maximum(scores, 0.0) - scores * labels + np.log1p(np.exp(-np.abs(scores))))
        )
        d_score = (expit(scores) - labels) / total
        np.add.at(grad_h[src_type], src, d_score[:, None] * h[dst_type][dst])
        np.add.at(grad_h[dst_type], dst, d_score[:, None] * h[src_type][src])
    loss /= total

    grads = gnn_backward_compiled(compiled, params, features, cache, grad_h)
    return loss, grads


def link_pred_loss(
    compiled: CompiledGraph,
    params: GnnParams,
    features: dict[str, np.ndarray],
    batch: LinkPredBatch,
) -> float:
    """Loss only; used by finite-difference checks."""
    total = batch.size()
    h = gnn_forward_compiled(compiled, params, features)
    loss = 0.0
    for name, src, dst, labels in batch.samples():
        src_type, dst_type = EDGE_SIGNATURES[name]
        scores = np.einsum("ed,ed->e", h[src_type][src], h[dst_type][dst])
        loss += float(
            np.sum(np.maximum(scores, 0.0) - scores * labels + np.log1p(np.exp(-np.abs(scores))))
        )
    return loss / total


class Adam:
    """Plain deterministic Adam over a GnnParams arrays dict."""

    def __init__(self, params: GnnParams, lr: float = 0.05, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays.items()}

    def step(self, params: GnnParams, grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        b1c = 1.0 - self.beta1**self.step_count
        b2c = 1.0 - self.beta2**self.step_count
        for name in params.names():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[name] / b1c
            v_hat = self.v[name] / b2c
            params.arrays[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class NodeEmbeddings:
    """Read-only per-node embedding table produced by a forward pass."""

    def __init__(self, vectors: dict[str, np.ndarray], compiled: CompiledGraph):
        self.vectors = {}
        for t, mat in vectors.items():
            mat = mat.copy()
            mat.setflags(write=False)
            self.vectors[t] = mat
        self.node_index = {t: dict(compiled.node_index[t]) for t in compiled.node_types}

    def get(self, node_type: str, key: str) -> np.ndarray:
        try:
            row = self.node_index[node_type][key]
        except KeyError:
            raise KeyError(f"unknown {node_type} node: {key!r}") from None
        return self.vectors[node_type][row]


def gnn_forward(
    graph: HeteroGraph,
    params: GnnParams,
    features: dict[str, np.ndarray],
    include_reverse: bool = True,
) -> NodeEmbeddings:
    """Public forward pass over a HeteroGraph: embeddings for all nodes."""
    compiled = compile_graph(graph, include_reverse=include_reverse)
    out = gnn_forward_compiled(compiled, params, features)
    return NodeEmbeddings(out, compiled)
