"""Graph-attention link model: per-layer temporal attention over each
node's most recent interaction events.

Layer l computes a node's representation at time t by attending from the
query [h^(l-1)(t); Phi(0)] over neighbor rows [h^(l-1)(t'); edge_attrs;
Phi(t-t')], then merging the attention message with the node's raw
attributes through a two-layer ReLU MLP. The recursion bottoms out at
the raw (zero-padded) node attributes.
"""

from __future__ import annotations

import numpy as np

from ..graph import TemporalGraph, recent_neighbors_batch
from ..nn import MLP, Dropout, Linear, Module
from ..tensor import Tensor, concat, masked_softmax, matmul
from ..time_encoding import build_time_encoder
from .common import LinkModel, LinkPredictor
from .config import ModelConfig


class TGATLayer(Module):
    """One hop of temporal attention plus the attribute-merge MLP.

    All three projection matrices are bias-free; the key/value input is
    wider than the query's by the edge-feature block.
    """

    def __init__(self, node_dim: int, d_E: int, enc_dim: int, attn_dim: int,
                 mlp_hidden: int, dropout: float, rng: np.random.Generator):
        super().__init__()
        self.attn_dim = attn_dim
        self.w_q = Linear(node_dim + enc_dim, attn_dim, rng, bias=False)
        self.w_k = Linear(node_dim + d_E + enc_dim, attn_dim, rng, bias=False)
        self.w_v = Linear(node_dim + d_E + enc_dim, attn_dim, rng, bias=False)
        self.merge = MLP([attn_dim + node_dim, mlp_hidden, node_dim], rng,
                         activation="relu")
        self.drop_attn = Dropout(dropout,
                                 rng=np.random.default_rng(rng.integers(2**63)))

    def forward(self, h_self: Tensor, x_raw: Tensor, neighbor_rows: Tensor,
                phi_zero: Tensor, valid: np.ndarray) -> Tensor:
        """h_self/x_raw: (B, d); neighbor_rows: (B, K, d+d_E+enc);
        phi_zero: (B, enc); valid: (B, K) mask of real events."""
        b, k, _ = neighbor_rows.shape
        q = self.w_q(concat([h_self, phi_zero], axis=-1))        # (B, dh)
        keys = self.w_k(neighbor_rows)                           # (B, K, dh)
        values = self.w_v(neighbor_rows)                         # (B, K, dh)
        scores = matmul(keys, q.reshape(b, self.attn_dim, 1))    # (B, K, 1)
        scores = scores.reshape(b, k) * (1.0 / np.sqrt(self.attn_dim))
        attn = masked_softmax(scores, valid, axis=-1)            # (B, K)
        attn = self.drop_attn(attn)
        # rows with no valid event produce an all-zero attention row and
        # therefore a zero message: "attend to nothing, say nothing"
        message = matmul(attn.reshape(b, 1, k), values).reshape(b, self.attn_dim)
        return self.merge(concat([message, x_raw], axis=-1))     # (B, d)


class TGAT(LinkModel):
    def __init__(self, cfg: ModelConfig, graph_d_V: int, graph_d_E: int,
                 rng: np.random.Generator):
        super().__init__()
        if graph_d_V > cfg.node_dim:
            raise ValueError(
                f"node attributes ({graph_d_V}) wider than node_dim "
                f"({cfg.node_dim}); raise node_dim"
            )
        self.cfg = cfg
        self.d_V = graph_d_V
        self.d_E = graph_d_E
        self.embed_dim = cfg.node_dim
        self.time_encoder = build_time_encoder(
            cfg.time_family, cfg.d_T,
            np.random.default_rng(rng.integers(2**63)))
        enc_dim = self.time_encoder.d_out
        self.layers = [
            TGATLayer(cfg.node_dim, graph_d_E, enc_dim, cfg.attn_dim,
                      cfg.mlp_hidden, cfg.dropout, rng)
            for _ in range(cfg.layers)
        ]
        self.head = LinkPredictor(2 * cfg.node_dim, cfg.head_hidden, rng)

    def _raw_features(self, g: TemporalGraph, nodes: np.ndarray) -> np.ndarray:
        x = np.zeros((len(nodes), self.cfg.node_dim))
        if g.d_V:
            x[:, :g.d_V] = g.node_features[nodes]
        return x

    def embed(self, g: TemporalGraph, nodes: np.ndarray, times: np.ndarray,
              depth: int | None = None) -> Tensor:
        """Representation of each (node, time) query after `depth` hops
        (default: all layers). Recursion over depth; every level runs as
        one batched attention call."""
        nodes = np.asarray(nodes, dtype=np.int64)
        times = np.asarray(times, dtype=np.float64)
        if depth is None:
            depth = len(self.layers)
        x_raw = Tensor(self._raw_features(g, nodes))
        if depth == 0:
            return x_raw
        b = len(nodes)
        k = self.cfg.num_neighbors
        nbr, ts, eidx, valid = recent_neighbors_batch(g, nodes, times, k)
        h_self = self.embed(g, nodes, times, depth - 1)              # (B, d)
        h_nbr = self.embed(g, nbr.ravel(), ts.ravel(), depth - 1)    # (B*K, d)
        h_nbr = h_nbr.reshape(b, k, self.cfg.node_dim)
        parts = [h_nbr]
        if self.d_E:
            feats = np.where(valid[:, :, None], g.edge_features[eidx], 0.0)
            parts.append(Tensor(feats))
        dts = np.where(valid, times[:, None] - ts, 0.0)
        parts.append(self.time_encoder.encode(dts))                  # (B, K, enc)
        neighbor_rows = concat(parts, axis=-1)
        phi_zero = self.time_encoder.encode(np.zeros(b))             # (B, enc)
        return self.layers[depth - 1](h_self, x_raw, neighbor_rows,
                                      phi_zero, valid)

    def embed_pair(self, g: TemporalGraph, src, dst, times):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        times = np.asarray(times, dtype=np.float64)
        # one batched call for both endpoints halves the recursion count
        both = self.embed(g, np.concatenate([src, dst]),
                          np.concatenate([times, times]))
        b = len(src)
        return both[:b], both[b:]
