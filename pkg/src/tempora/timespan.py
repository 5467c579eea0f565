"""Exact time-span factorization through attention weights.

With an affine time encoder, two pinned encoder dimensions and two pinned
weight columns are enough to make every query/key inner product split into
a term proportional to the time span between the two events plus a term
carried entirely by the remaining free dimensions:

    <q_m, k_n> = -w1 * (t_m - t_n) + sum_{i>=3} q_{m,i} k_{n,i}

The first encoder dimension is w1*(t - t') + b1, the second is the
constant 1. Query column 1 reads dimension 1 and column 2 reads the
negated constant; key columns do the reverse, so the b1 offsets cancel in
the product. All other entries may be arbitrary, which the randomized
check below exercises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TimeSpanInstance", "construct", "encode_times",
           "queries_and_keys", "verify_factorization", "randomized_check"]


@dataclass
class TimeSpanInstance:
    d_T: int                 # encoder width, >= 2
    d: int                   # event-feature width, >= 0
    d_h: int                 # attention width, >= 2
    slopes: np.ndarray       # (d_T,), slopes[1] == 0
    offsets: np.ndarray      # (d_T,), offsets[1] == 1
    w_q: np.ndarray          # (d_T + d, d_h)
    w_k: np.ndarray          # (d_T + d, d_h)

    @property
    def w1(self) -> float:
        return float(self.slopes[0])


def construct(d_T: int, d: int, d_h: int, w1: float, b1: float,
              rng: np.random.Generator) -> TimeSpanInstance:
    """Pin the four required entries and draw every free parameter from a
    standard normal."""
    if d_T < 2 or d_h < 2 or d < 0:
        raise ValueError("need d_T >= 2, d_h >= 2, d >= 0")
    if w1 == 0.0:
        raise ValueError("w1 must be nonzero: a zero slope erases the "
                         "time span from the product")
    slopes = rng.standard_normal(d_T)
    offsets = rng.standard_normal(d_T)
    slopes[0], offsets[0] = w1, b1
    slopes[1], offsets[1] = 0.0, 1.0
    w_q = rng.standard_normal((d_T + d, d_h))
    w_k = rng.standard_normal((d_T + d, d_h))
    w_q[:, 0] = 0.0
    w_q[0, 0] = 1.0
    w_q[:, 1] = 0.0
    w_q[1, 1] = -1.0
    w_k[:, 0] = 0.0
    w_k[1, 0] = 1.0
    w_k[:, 1] = 0.0
    w_k[0, 1] = 1.0
    return TimeSpanInstance(d_T=d_T, d=d, d_h=d_h, slopes=slopes,
                            offsets=offsets, w_q=w_q, w_k=w_k)


def encode_times(inst: TimeSpanInstance, ages: np.ndarray) -> np.ndarray:
    """(M, d_T) affine encodings of t - t_m; column 1 is constant 1."""
    ages = np.asarray(ages, dtype=np.float64)
    return ages[:, None] * inst.slopes + inst.offsets


def queries_and_keys(inst: TimeSpanInstance, features: np.ndarray,
                     times: np.ndarray, t: float):
    """Per-event query/key vectors for target time t, both (M, d_h)."""
    features = np.asarray(features, dtype=np.float64)
    rows = np.concatenate([encode_times(inst, t - np.asarray(times)),
                           features], axis=1)
    return rows @ inst.w_q, rows @ inst.w_k


def verify_factorization(inst: TimeSpanInstance, features: np.ndarray,
                         times: np.ndarray, t: float) -> float:
    """Worst absolute residual of the factorization identity over all
    ordered event pairs (m, n)."""
    times = np.asarray(times, dtype=np.float64)
    if len(times) < 2:
        raise ValueError("need at least two events to form a pair")
    q, k = queries_and_keys(inst, features, times, t)
    inner = q @ k.T
    free_part = q[:, 2:] @ k[:, 2:].T
    span_part = -inst.w1 * (times[:, None] - times[None, :])
    return float(np.abs(inner - free_part - span_part).max())


def randomized_check(trials: int, rng: np.random.Generator,
                     max_events: int = 10) -> float:
    """Max residual over `trials` random instances with random shapes,
    free parameters, and event sets."""
    worst = 0.0
    for _ in range(trials):
        d_T = int(rng.integers(2, 9))
        d = int(rng.integers(0, 5))
        d_h = int(rng.integers(2, 9))
        w1 = 0.0
        while w1 == 0.0:
            w1 = float(rng.uniform(-2.0, 2.0))
        inst = construct(d_T, d, d_h, w1, float(rng.normal()), rng)
        m = int(rng.integers(2, max_events + 1))
        times = np.sort(rng.uniform(0.0, 100.0, size=m))
        features = rng.standard_normal((m, d))
        t = float(times[-1] + rng.uniform(0.0, 50.0))
        worst = max(worst, verify_factorization(inst, features, times, t))
    return worst
