"""Per-node event sequences for the sequence-transformer models: history
retrieval with the target edge appended, neighbor co-occurrence counts,
and the patching reshape."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ..graph import TemporalGraph, recent_neighbors
from ..tensor import Tensor, concat

__all__ = ["EventSequence", "build_event_sequence", "cooccurrence_counts",
           "patch_array", "patch_tensor"]


@dataclass
class EventSequence:
    """A node's interaction history, oldest first, with the pending
    target edge as the final row.

    edge_idx -1 marks the target row: it has no stored edge yet, so its
    edge attributes read as zeros.
    """

    node: int
    neighbor_ids: np.ndarray   # (len,) int64; last entry = target partner
    times: np.ndarray          # (len,) float64, non-decreasing; last = t
    edge_idx: np.ndarray       # (len,) int64; -1 on the target row
    target_time: float

    def __len__(self) -> int:
        return len(self.times)

    @property
    def deltas(self) -> np.ndarray:
        """t - t' per row; the target row is exactly 0."""
        return self.target_time - self.times


def build_event_sequence(g: TemporalGraph, node: int, partner: int, t: float,
                         budget: int) -> EventSequence:
    """At most `budget` rows: the most recent budget-1 strictly-past
    events plus the target row."""
    if budget < 1:
        raise ValueError("budget must allow at least the target row")
    hist = recent_neighbors(g, node, t, budget - 1)
    ids = np.array([v for v, _, _ in hist] + [partner], dtype=np.int64)
    times = np.array([tt for _, tt, _ in hist] + [t], dtype=np.float64)
    eidx = np.array([e for _, _, e in hist] + [-1], dtype=np.int64)
    return EventSequence(node=node, neighbor_ids=ids, times=times,
                         edge_idx=eidx, target_time=t)


def cooccurrence_counts(seq_i: EventSequence, seq_j: EventSequence):
    """Two-column count matrices: row m of C_* holds how often that row's
    neighbor appears in i's and in j's history (target rows included in
    both multisets)."""
    bag_i = Counter(seq_i.neighbor_ids.tolist())
    bag_j = Counter(seq_j.neighbor_ids.tolist())

    def table(seq):
        out = np.zeros((len(seq), 2))
        for m, v in enumerate(seq.neighbor_ids.tolist()):
            out[m, 0] = bag_i[v]
            out[m, 1] = bag_j[v]
        return out

    return table(seq_i), table(seq_j)


def patch_array(rows: np.ndarray, patch_size: int) -> np.ndarray:
    """Group consecutive rows into ceil(len/P) patches of concatenated
    features; the last patch is zero-padded. Constant-data variant."""
    n, d = rows.shape
    n_patches = -(-n // patch_size)
    padded = np.zeros((n_patches * patch_size, d))
    padded[:n] = rows
    return padded.reshape(n_patches, patch_size * d)


def patch_tensor(rows: Tensor, patch_size: int) -> Tensor:
    """Differentiable patching for channel features that carry gradients
    (time encodings, co-occurrence features)."""
    n, d = rows.shape
    n_patches = -(-n // patch_size)
    pad = n_patches * patch_size - n
    if pad:
        rows = concat([rows, Tensor(np.zeros((pad, d)))], axis=0)
    return rows.reshape(n_patches, patch_size * d)
