"""Ranking metrics for link prediction, reported on a 0-100 scale.

Tie conventions are pinned down because they change results on datasets
with duplicated scores: average precision breaks ties by stable input
order (first-come keeps its rank), ROC-AUC counts ties as half wins via
midranks.
"""

from __future__ import annotations

from math import fsum

import numpy as np
from scipy.stats import rankdata

__all__ = ["average_precision", "roc_auc"]


def _validate(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D arrays")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return scores, labels.astype(np.int64)


def average_precision(scores, labels) -> float:
    """Mean of precision evaluated at each positive, scores descending.

    Equal scores keep their input order in the ranking (stable sort), so
    the value is deterministic for any input.
    """
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("average precision undefined without positive labels")
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    hits = np.cumsum(ranked)
    ranks = np.arange(1, len(ranked) + 1)
    precision_at_pos = hits[ranked == 1] / ranks[ranked == 1]
    # fsum: exactly-rounded accumulation, so the result is independent of
    # summation order and bit-reproducible against any faithful reference
    return 100.0 * fsum(precision_at_pos) / n_pos


def roc_auc(scores, labels) -> float:
    """Probability that a uniformly chosen positive outscores a uniformly
    chosen negative, ties worth half, via the midrank identity:

        sum(midranks of positives) - P(P+1)/2 == wins + ties/2
    """
    scores, labels = _validate(scores, labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC undefined unless both classes are present")
    ranks = rankdata(scores, method="average")
    # midranks are exact multiples of 1/2, so this sum and subtraction are
    # exact in float64 and equal the pairwise win count bit-for-bit
    wins = float(ranks[labels == 1].sum()) - n_pos * (n_pos + 1) / 2.0
    return 100.0 * wins / (n_pos * n_neg)
