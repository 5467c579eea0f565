"""Learnable encodings of time differences.

Five interchangeable families, all mapping an array of time differences to
a trailing feature axis consumed by attention:

* ``linear``               — per-dimension affine map of the *standardized*
                             difference; injective whenever any weight is
                             nonzero.
* ``sinusoidal_cos``       — cos(ω·Δt + φ) on the raw difference; bounded,
                             periodic, collision-prone at float32 when ω·Δt
                             stays tiny.
* ``sinusoidal_scale``     — same cosines, but fed the standardized
                             difference.
* ``sinusoidal_pair``      — √(1/d_T)·interleaved (cos, sin) pairs without
                             phases; inner products depend only on the gap
                             between the two encoded times.
* ``positional_sinusoidal``— cosines of the event's *rank* within its
                             sequence (0 = oldest) instead of its time.

Standardization statistics (mean, population std) must come from the
training split only; encoders that require them raise until fitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Module
from .tensor import Tensor, concat, cos_elem, sin_elem

__all__ = [
    "TimeStandardizer",
    "LinearTimeEncoder",
    "CosineTimeEncoder",
    "SinCosPairTimeEncoder",
    "PositionalIndexEncoder",
    "build_time_encoder",
    "ENCODER_FAMILIES",
    "frequency_ladder",
]


@dataclass(frozen=True)
class TimeStandardizer:
    """Shift/scale fitted on observed time differences."""

    mu: float
    sigma: float

    @classmethod
    def fit(cls, diffs) -> "TimeStandardizer":
        """Mean and population standard deviation; a zero sigma (all
        differences identical) degrades to 1 so the transform stays
        well-defined."""
        diffs = np.asarray(diffs, dtype=np.float64)
        if diffs.size == 0:
            raise ValueError("cannot fit standardizer on an empty difference list")
        mu = float(diffs.mean())
        sigma = float(diffs.std())  # population (ddof=0)
        if sigma == 0.0:
            sigma = 1.0
        return cls(mu=mu, sigma=sigma)

    def transform(self, deltas: np.ndarray) -> np.ndarray:
        return (np.asarray(deltas, dtype=np.float64) - self.mu) / self.sigma


def frequency_ladder(d_T: int) -> np.ndarray:
    """Geometric frequency grid 1/10^a, a linearly spaced over [0, 9]:
    periods from ~2π units up to ~10^9·2π, covering second-to-month
    scales when timestamps are in seconds."""
    return 1.0 / 10.0 ** np.linspace(0.0, 9.0, d_T)


class _TimeEncoderBase(Module):
    """Shared plumbing: dimension bookkeeping plus an optional fitted
    standardizer."""

    family: str
    requires_standardizer = False

    def __init__(self, d_T: int):
        super().__init__()
        if d_T < 1:
            raise ValueError(f"d_T must be positive, got {d_T}")
        self.d_T = d_T
        self.d_out = d_T
        self.standardizer: TimeStandardizer | None = None

    def fit_standardizer(self, diffs) -> None:
        self.standardizer = TimeStandardizer.fit(diffs)

    def _standardized(self, deltas: np.ndarray) -> np.ndarray:
        if self.standardizer is None:
            raise RuntimeError(
                f"{self.family} encoder requires a fitted standardizer; "
                "call fit_standardizer with training-split time differences first"
            )
        return self.standardizer.transform(deltas)

    def encode(self, deltas: np.ndarray) -> Tensor:
        raise NotImplementedError

    def forward(self, deltas: np.ndarray) -> Tensor:
        return self.encode(deltas)


class LinearTimeEncoder(_TimeEncoderBase):
    """Phi(dt)_i = w_i * ((dt - mu)/sigma) + b_i.

    Two trainable vectors; distinct inputs stay distinct as long as some
    w_i is nonzero, and composing with standardization is still an affine
    function of the raw difference."""

    family = "linear"
    requires_standardizer = True

    def __init__(self, d_T: int, rng: np.random.Generator):
        super().__init__(d_T)
        self.weight = Tensor(rng.standard_normal(d_T) / np.sqrt(d_T),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(d_T), requires_grad=True)

    def encode(self, deltas: np.ndarray) -> Tensor:
        scaled = self._standardized(deltas)
        return Tensor(scaled[..., None]) * self.weight + self.bias


class CosineTimeEncoder(_TimeEncoderBase):
    """Phi(dt)_i = cos(omega_i * dt~ + phi_i), with dt~ the raw difference
    (``sinusoidal_cos``) or the standardized one (``sinusoidal_scale``)."""

    def __init__(self, d_T: int, rng: np.random.Generator,
                 standardize: bool = False):
        super().__init__(d_T)
        del rng  # ladder init is deterministic; accepted for API symmetry
        self.family = "sinusoidal_scale" if standardize else "sinusoidal_cos"
        self.requires_standardizer = standardize
        self._standardize = standardize
        self.freq = Tensor(frequency_ladder(d_T), requires_grad=True)
        self.phase = Tensor(np.zeros(d_T), requires_grad=True)

    def encode(self, deltas: np.ndarray) -> Tensor:
        dt = np.asarray(deltas, dtype=np.float64)
        if self._standardize:
            dt = self._standardized(dt)
        return cos_elem(Tensor(dt[..., None]) * self.freq + self.phase)


class SinCosPairTimeEncoder(_TimeEncoderBase):
    """Phase-free interleaved pairs sqrt(1/d_T)*(cos(w_i dt), sin(w_i dt)),
    output dimension 2*d_T.

    The point of the pair form: <Phi(t1), Phi(t2)> collapses to
    (1/d_T) * sum_i cos(w_i (t1 - t2)), a function of the gap alone."""

    family = "sinusoidal_pair"

    def __init__(self, d_T: int, rng: np.random.Generator):
        super().__init__(d_T)
        del rng
        self.d_out = 2 * d_T
        self.freq = Tensor(frequency_ladder(d_T), requires_grad=True)

    def encode(self, deltas: np.ndarray) -> Tensor:
        dt = np.asarray(deltas, dtype=np.float64)
        angles = Tensor(dt[..., None]) * self.freq          # (..., d_T)
        lead = dt.shape
        c = cos_elem(angles).reshape(*lead, self.d_T, 1)
        s = sin_elem(angles).reshape(*lead, self.d_T, 1)
        pairs = concat([c, s], axis=-1)                      # (..., d_T, 2)
        return pairs.reshape(*lead, self.d_out) * np.sqrt(1.0 / self.d_T)


class PositionalIndexEncoder(_TimeEncoderBase):
    """Cosine encoder over sequence ranks: feeding it the event's index
    (0 = oldest) instead of a time difference removes all dependence on
    the actual timestamps."""

    family = "positional_sinusoidal"

    def __init__(self, d_T: int, rng: np.random.Generator):
        super().__init__(d_T)
        del rng
        self.freq = Tensor(frequency_ladder(d_T), requires_grad=True)
        self.phase = Tensor(np.zeros(d_T), requires_grad=True)

    def encode(self, ranks: np.ndarray) -> Tensor:
        r = np.asarray(ranks, dtype=np.float64)
        if np.any(r < 0):
            raise ValueError("ranks must be non-negative")
        return cos_elem(Tensor(r[..., None]) * self.freq + self.phase)


def _make_linear(d_T, rng):
    return LinearTimeEncoder(d_T, rng)


def _make_cos(d_T, rng):
    return CosineTimeEncoder(d_T, rng, standardize=False)


def _make_scale(d_T, rng):
    return CosineTimeEncoder(d_T, rng, standardize=True)


def _make_pair(d_T, rng):
    return SinCosPairTimeEncoder(d_T, rng)


def _make_positional(d_T, rng):
    return PositionalIndexEncoder(d_T, rng)


ENCODER_FAMILIES = {
    "linear": _make_linear,
    "sinusoidal_cos": _make_cos,
    "sinusoidal_scale": _make_scale,
    "sinusoidal_pair": _make_pair,
    "positional_sinusoidal": _make_positional,
}


def build_time_encoder(family: str, d_T: int,
                       rng: np.random.Generator) -> _TimeEncoderBase:
    try:
        factory = ENCODER_FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown time-encoder family {family!r}; "
            f"choose from {sorted(ENCODER_FAMILIES)}"
        ) from None
    return factory(d_T, rng)
