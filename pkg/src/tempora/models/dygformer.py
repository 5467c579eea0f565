"""Sequence-transformer link models.

Three variants share the channel pipeline (neighbor-node, edge, time,
co-occurrence features -> patches -> per-channel linear projections ->
transformer):

* DyGFormer          — the two endpoint sequences are concatenated along
                       the sequence axis so attention crosses them.
* DyGFormerSeparate  — each sequence rides through the shared transformer
                       alone; endpoints only interact through the
                       co-occurrence counts.
* DyGDecoder         — like separate, plus a learnable beginning-of-
                       sequence row and a causal mask; the node
                       representation is the final position's output.

All use mean pooling over a node's own positions (the decoder takes the
last position instead) followed by one shared linear map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..graph import TemporalGraph
from ..nn import MLP, Linear, Module, TransformerLayer
from ..tensor import Tensor, concat, matmul
from ..time_encoding import build_time_encoder
from .common import LinkModel, LinkPredictor
from .config import ModelConfig
from .sequences import (EventSequence, build_event_sequence,
                        cooccurrence_counts, patch_array, patch_tensor)


@dataclass
class _RowMeta:
    """Per-transformer-row bookkeeping for pooling and attention export.

    position_dt[p] is t - t' for the event at position p, NaN where the
    position is padding or the BOS row; position_role[p] is "source",
    "destination", or "" likewise.
    """

    length: int                      # valid positions incl. BOS if any
    position_dt: np.ndarray          # (Lmax,)
    position_role: np.ndarray        # (Lmax,) of str
    causal: bool


class _SequenceModelBase(LinkModel):
    causal = False
    uses_bos = False

    def __init__(self, cfg: ModelConfig, graph_d_V: int, graph_d_E: int,
                 rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.d_V = graph_d_V
        self.d_E = graph_d_E
        self.embed_dim = cfg.out_dim
        self.time_encoder = build_time_encoder(
            cfg.time_family, cfg.d_T,
            np.random.default_rng(rng.integers(2**63)))
        p = cfg.patch_size
        enc_dim = self.time_encoder.d_out
        self.proj_node = Linear(p * graph_d_V, cfg.d_ch, rng)
        self.proj_edge = Linear(p * graph_d_E, cfg.d_ch, rng)
        self.proj_time = Linear(p * enc_dim, cfg.d_tc_effective, rng)
        self.proj_cooc = Linear(p * cfg.d_C, cfg.d_ch, rng)
        self.f_C = MLP([1, cfg.d_C, cfg.d_C], rng, activation="relu")
        self.transformer = [
            TransformerLayer(cfg.d_model, 1, rng, dropout_rate=cfg.dropout)
            for _ in range(cfg.layers)
        ]
        self.out_proj = Linear(cfg.d_model, cfg.out_dim, rng)
        if self.uses_bos:
            self.bos = Tensor(np.zeros(cfg.d_model), requires_grad=True)
        self.head = LinkPredictor(2 * cfg.out_dim, cfg.head_hidden, rng)
        self._export_rows: list | None = None

    # -- channel construction -------------------------------------------------

    def _channel_features(self, g: TemporalGraph, seq: EventSequence,
                          cooc: np.ndarray) -> Tensor:
        """One node's patched, projected, concatenated input (L, d_model)."""
        n = len(seq)
        p = self.cfg.patch_size
        node_feats = g.node_features[seq.neighbor_ids]          # (n, d_V)
        edge_feats = np.zeros((n, self.d_E))
        real = seq.edge_idx >= 0
        if self.d_E and real.any():
            edge_feats[real] = g.edge_features[seq.edge_idx[real]]
        x_node = self.proj_node(Tensor(patch_array(node_feats, p)))
        x_edge = self.proj_edge(Tensor(patch_array(edge_feats, p)))
        phi = self.time_encoder.encode(seq.deltas)              # (n, enc)
        x_time = self.proj_time(patch_tensor(phi, p))
        counts = self.f_C(Tensor(cooc[:, :1])) + self.f_C(Tensor(cooc[:, 1:]))
        x_cooc = self.proj_cooc(patch_tensor(counts, p))
        return concat([x_node, x_edge, x_time, x_cooc], axis=-1)

    def _build_pair_inputs(self, g: TemporalGraph, src, dst, times):
        """Per-example (X_i, X_j) channel tensors plus their sequences."""
        out = []
        for b in range(len(times)):
            seq_i = build_event_sequence(g, int(src[b]), int(dst[b]),
                                         float(times[b]), self.cfg.seq_budget)
            seq_j = build_event_sequence(g, int(dst[b]), int(src[b]),
                                         float(times[b]), self.cfg.seq_budget)
            c_i, c_j = cooccurrence_counts(seq_i, seq_j)
            x_i = self._channel_features(g, seq_i, c_i)
            x_j = self._channel_features(g, seq_j, c_j)
            out.append((seq_i, seq_j, x_i, x_j))
        return out

    # -- batching helpers -----------------------------------------------------

    def _pad_stack(self, rows: list[Tensor]):
        """Stack variable-length (L_b, d) tensors into (B, Lmax, d) plus
        a validity mask."""
        d = self.cfg.d_model
        lmax = max(r.shape[0] for r in rows)
        stacked = []
        valid = np.zeros((len(rows), lmax), dtype=bool)
        for b, r in enumerate(rows):
            n = r.shape[0]
            valid[b, :n] = True
            if n < lmax:
                r = concat([r, Tensor(np.zeros((lmax - n, d)))], axis=0)
            stacked.append(r.reshape(1, lmax, d))
        return concat(stacked, axis=0), valid

    def _run_transformer(self, z: Tensor, valid: np.ndarray,
                         record: bool) -> Tensor:
        for li, layer in enumerate(self.transformer):
            last = li == len(self.transformer) - 1
            z = layer(z, key_valid=valid, causal=self.causal,
                      record=record and last)
        return z

    def _pool(self, z: Tensor, weights: np.ndarray) -> Tensor:
        """weights: (B, 1, Lmax) constant pooling matrix -> (B, out_dim)."""
        pooled = matmul(Tensor(weights), z)                  # (B, 1, d_model)
        return self.out_proj(pooled.reshape(weights.shape[0],
                                            self.cfg.d_model))

    def _patch_dt(self, seq: EventSequence) -> np.ndarray:
        """Per-position time differences for attention export; only
        meaningful when each position is a single event."""
        if self.cfg.patch_size != 1:
            raise RuntimeError(
                "attention export requires patch_size == 1 so that "
                "positions correspond to single events"
            )
        return seq.deltas

    # -- attention export -----------------------------------------------------

    def collect_attention_records(self):
        """(role, t - t_q, t - t_k, score) tuples from the last forward
        pass run with record=True.

        Only positions carrying a real event are emitted: padding and the
        BOS row have no timestamp. Causal rows therefore never contain a
        key newer than the query."""
        if self._export_rows is None:
            raise RuntimeError("run a forward pass with record=True first")
        attn = self.transformer[-1].last_attention    # (rows, Lmax, Lmax)
        records = []
        for r, meta in enumerate(self._export_rows):
            for qp in range(meta.length):
                if not np.isfinite(meta.position_dt[qp]):
                    continue
                keys = range(qp + 1) if meta.causal else range(meta.length)
                for kp in keys:
                    if not np.isfinite(meta.position_dt[kp]):
                        continue
                    records.append((
                        str(meta.position_role[qp]),
                        float(meta.position_dt[qp]),
                        float(meta.position_dt[kp]),
                        float(attn[r, qp, kp]),
                    ))
        return records


class DyGFormer(_SequenceModelBase):
    """Joint-sequence variant: [X_i; X_j] feeds one transformer stack, so
    queries in i's segment attend into j's and vice versa."""

    def embed_pair(self, g: TemporalGraph, src, dst, times,
                   record: bool = False):
        built = self._build_pair_inputs(g, src, dst, times)
        rows, li_patches, lj_patches = [], [], []
        for seq_i, seq_j, x_i, x_j in built:
            rows.append(concat([x_i, x_j], axis=0))
            li_patches.append(x_i.shape[0])
            lj_patches.append(x_j.shape[0])
        z, valid = self._pad_stack(rows)
        if record:
            self._export_rows = []
            for b, (seq_i, seq_j, x_i, x_j) in enumerate(built):
                lmax = valid.shape[1]
                dt = np.full(lmax, np.nan)
                role = np.array([""] * lmax, dtype=object)
                li, lj = li_patches[b], lj_patches[b]
                dt[:li] = self._patch_dt(seq_i)
                dt[li:li + lj] = self._patch_dt(seq_j)
                role[:li] = "source"
                role[li:li + lj] = "destination"
                self._export_rows.append(_RowMeta(
                    length=li + lj, position_dt=dt, position_role=role,
                    causal=False))
        z = self._run_transformer(z, valid, record)
        b = len(built)
        lmax = valid.shape[1]
        w_i = np.zeros((b, 1, lmax))
        w_j = np.zeros((b, 1, lmax))
        for k in range(b):
            li, lj = li_patches[k], lj_patches[k]
            w_i[k, 0, :li] = 1.0 / li
            w_j[k, 0, li:li + lj] = 1.0 / lj
        return self._pool(z, w_i), self._pool(z, w_j)


class _PerNodeSequenceModel(_SequenceModelBase):
    """Shared forward for the separate and decoder variants: 2B rows,
    sources first then destinations, one sequence per row."""

    def _node_representation(self, z: Tensor, lengths: np.ndarray) -> Tensor:
        raise NotImplementedError

    def embed_pair(self, g: TemporalGraph, src, dst, times,
                   record: bool = False):
        built = self._build_pair_inputs(g, src, dst, times)
        seqs = [bi[0] for bi in built] + [bi[1] for bi in built]
        rows = [bi[2] for bi in built] + [bi[3] for bi in built]
        if self.uses_bos:
            d = self.cfg.d_model
            rows = [concat([self.bos.reshape(1, d), r], axis=0) for r in rows]
        z, valid = self._pad_stack(rows)
        lengths = valid.sum(axis=1)
        if record:
            self._export_rows = []
            lmax = valid.shape[1]
            n = len(built)
            for r, seq in enumerate(seqs):
                dt = np.full(lmax, np.nan)
                role = np.array([""] * lmax, dtype=object)
                offset = 1 if self.uses_bos else 0
                dts = self._patch_dt(seq)
                dt[offset:offset + len(dts)] = dts
                role[offset:offset + len(dts)] = \
                    "source" if r < n else "destination"
                self._export_rows.append(_RowMeta(
                    length=int(lengths[r]), position_dt=dt,
                    position_role=role, causal=self.causal))
        z = self._run_transformer(z, valid, record)
        reps = self._node_representation(z, lengths)        # (2B, out_dim)
        n = len(built)
        return reps[:n], reps[n:]


class DyGFormerSeparate(_PerNodeSequenceModel):
    """No cross-sequence attention; mean pooling over each row."""

    def _node_representation(self, z: Tensor, lengths: np.ndarray) -> Tensor:
        b, lmax, _ = z.shape
        w = np.zeros((b, 1, lmax))
        for r in range(b):
            w[r, 0, :int(lengths[r])] = 1.0 / lengths[r]
        return self._pool(z, w)


class DyGDecoder(_PerNodeSequenceModel):
    """Causal attention over [BOS; events...]; the representation is the
    output at the final (target-edge) position."""

    causal = True
    uses_bos = True

    def _node_representation(self, z: Tensor, lengths: np.ndarray) -> Tensor:
        b, lmax, _ = z.shape
        w = np.zeros((b, 1, lmax))
        for r in range(b):
            w[r, 0, int(lengths[r]) - 1] = 1.0  # last valid position
        return self._pool(z, w)
