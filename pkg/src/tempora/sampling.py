"""Negative-edge samplers for link-prediction training and evaluation.

Two strategies:

* random     — substitute both endpoints with uniform draws over the node
               set, keeping the positive timestamps; collisions with real
               edges and self-loops are allowed (uniform over all pairs
               means exactly that).
* historical — draw pairs that interacted before the evaluation window
               but not inside it; sampled without replacement per batch,
               with a flagged per-sample fallback to random once the
               candidate pool runs dry.

Pairs are ordered (source, destination) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NegativeBatch",
    "sample_random_negatives",
    "sample_historical_negatives",
    "HistoricalPairTracker",
]


@dataclass
class NegativeBatch:
    src: np.ndarray          # (B,) int64
    dst: np.ndarray          # (B,) int64
    t: np.ndarray            # (B,) float64, copied from the positives
    strategy: str            # "random" or "historical"
    fallback: np.ndarray     # (B,) bool; True where a random substitute was used

    def __len__(self) -> int:
        return len(self.src)


def sample_random_negatives(pos_src, pos_dst, pos_t, num_nodes: int,
                            rng: np.random.Generator) -> NegativeBatch:
    """One uniform (u, v) pair per positive, timestamps preserved."""
    b = len(pos_t)
    if b == 0:
        raise ValueError("positive batch is empty")
    u = rng.integers(1, num_nodes + 1, size=b)
    v = rng.integers(1, num_nodes + 1, size=b)
    return NegativeBatch(src=u.astype(np.int64), dst=v.astype(np.int64),
                         t=np.asarray(pos_t, dtype=np.float64).copy(),
                         strategy="random",
                         fallback=np.zeros(b, dtype=bool))


def sample_historical_negatives(pos_src, pos_dst, pos_t,
                                history_pairs: set,
                                rng: np.random.Generator,
                                num_nodes: int | None = None,
                                allow_fallback: bool = True) -> NegativeBatch:
    """Sample from (pairs seen before the window) minus (pairs inside it).

    ``history_pairs`` is the set of ordered pairs interacting strictly
    before the batch window; the positives passed in define the window
    itself. Candidates are drawn without replacement; if the batch wants
    more than the pool holds, the remainder falls back to random pairs
    (flagged) or, with fallback disabled, raises.
    """
    b = len(pos_t)
    if b == 0:
        raise ValueError("positive batch is empty")
    window_pairs = set(zip(np.asarray(pos_src).tolist(),
                           np.asarray(pos_dst).tolist()))
    pool = sorted(history_pairs - window_pairs)  # sorted => reproducible
    n_hist = min(b, len(pool))
    src = np.zeros(b, dtype=np.int64)
    dst = np.zeros(b, dtype=np.int64)
    fallback = np.zeros(b, dtype=bool)
    if n_hist:
        chosen = rng.choice(len(pool), size=n_hist, replace=False)
        for i, c in enumerate(chosen):
            src[i], dst[i] = pool[c]
    if n_hist < b:
        if not allow_fallback:
            raise RuntimeError(
                f"historical candidate pool exhausted: need {b}, have "
                f"{len(pool)}; enable fallback or shrink the batch"
            )
        if num_nodes is None:
            raise ValueError("num_nodes required when fallback can trigger")
        short = b - n_hist
        src[n_hist:] = rng.integers(1, num_nodes + 1, size=short)
        dst[n_hist:] = rng.integers(1, num_nodes + 1, size=short)
        fallback[n_hist:] = True
    return NegativeBatch(src=src, dst=dst,
                         t=np.asarray(pos_t, dtype=np.float64).copy(),
                         strategy="historical", fallback=fallback)


@dataclass
class HistoricalPairTracker:
    """Incrementally maintained set of ordered pairs seen so far.

    Feed batches in chronological order: read ``pairs`` *before* adding
    the current batch so it represents exactly the strictly-earlier
    history.
    """

    pairs: set = field(default_factory=set)

    def add_batch(self, src, dst) -> None:
        self.pairs.update(zip(np.asarray(src).tolist(),
                              np.asarray(dst).tolist()))

    @classmethod
    def from_edges(cls, src, dst) -> "HistoricalPairTracker":
        tr = cls()
        tr.add_batch(src, dst)
        return tr
