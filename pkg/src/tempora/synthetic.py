"""Event-sequence classification benchmark with a known labeling rule.

Each sequence holds M scalar events (feature +-1, random timestamps) and a
target time. The label is the sign of the exponentially recency-weighted
feature sum plus Gaussian noise, so more recent events matter more and the
ground-truth attention profile over events is known in closed form. A small
transformer with a time encoder is trained to recover the rule; its
attention can then be compared against the true decay profile.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .nn import Linear, Module, TransformerLayer
from .optim import Adam
from .tensor import Tensor, bce_with_logits, concat
from .time_encoding import build_time_encoder

__all__ = [
    "SyntheticConfig", "LabeledSequence", "SyntheticDataset",
    "generate_sequences", "true_label", "true_attention",
    "build_sequence_input", "SequenceClassifier", "accuracy",
    "train_sequence_classifier", "extract_avg_attention",
    "write_sequences_csv", "write_attention_csv",
]


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator parameters.

    ``noise_variance`` is the variance (not the standard deviation) of the
    label noise.
    """

    intensity: float = 0.01          # event rate: gaps ~ Exp(intensity)
    decay: float = 0.003             # recency weight exp(-decay * age)
    events_per_sequence: int = 7
    num_sequences: int = 2000
    noise_variance: float = 0.01
    train_fraction: float = 0.70
    val_fraction: float = 0.15
    test_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.intensity <= 0 or self.decay < 0:
            raise ValueError("intensity must be positive and decay >= 0")
        if self.events_per_sequence < 1 or self.num_sequences < 1:
            raise ValueError("need at least one event and one sequence")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"split fractions sum to {total}, expected 1")


@dataclass
class LabeledSequence:
    x: np.ndarray          # (M,) in {-1, +1}
    times: np.ndarray      # (M,) strictly increasing
    target_time: float     # > times[-1]
    noise: float           # the stored label-noise draw
    label: int             # 0/1, equals true_label(self, noise, decay)


@dataclass
class SyntheticDataset:
    sequences: list        # all sequences in generation order
    train: list
    val: list
    test: list
    cfg: SyntheticConfig


def true_label(seq: LabeledSequence, noise: float, decay: float) -> int:
    """Exact labeling rule: sign of the recency-weighted feature sum."""
    weighted = np.exp(-decay * (seq.target_time - seq.times)) @ seq.x
    return int(weighted + noise > 0)


def true_attention(seq: LabeledSequence, decay: float) -> np.ndarray:
    """Normalized recency weights exp(-decay*(t - t_m)) / sum, one per
    event. decay == 0 gives the uniform profile."""
    w = np.exp(-decay * (seq.target_time - seq.times))
    return w / w.sum()


def generate_sequences(cfg: SyntheticConfig) -> SyntheticDataset:
    """Draw the full dataset and split it by generation order.

    Per sequence the draw order is fixed (features, then all M+1
    exponential gaps, then the noise), so a seed pins every byte.
    """
    rng = np.random.default_rng(cfg.seed)
    scale = 1.0 / cfg.intensity
    sigma = math.sqrt(cfg.noise_variance)
    m = cfg.events_per_sequence
    seqs = []
    for _ in range(cfg.num_sequences):
        x = rng.integers(0, 2, size=m) * 2.0 - 1.0
        gaps = rng.exponential(scale, size=m + 1)
        times = np.cumsum(gaps[:m])
        target_time = float(times[-1] + gaps[m])
        noise = float(rng.normal(0.0, sigma))
        seq = LabeledSequence(x=x, times=times, target_time=target_time,
                              noise=noise, label=0)
        seq.label = true_label(seq, noise, cfg.decay)
        seqs.append(seq)
    n_train = round(cfg.train_fraction * cfg.num_sequences)
    n_val = round(cfg.val_fraction * cfg.num_sequences)
    return SyntheticDataset(
        sequences=seqs,
        train=seqs[:n_train],
        val=seqs[n_train:n_train + n_val],
        test=seqs[n_train + n_val:],
        cfg=cfg,
    )


def _stack_inputs(seqs):
    """(B, M+1) age matrix and (B, M+1, 1) feature column; the final
    position is the target row with age 0 and feature 0."""
    m = len(seqs[0].x)
    if any(len(s.x) != m for s in seqs):
        raise ValueError("sequences in one batch must share a length")
    deltas = np.zeros((len(seqs), m + 1))
    feats = np.zeros((len(seqs), m + 1, 1))
    for b, s in enumerate(seqs):
        deltas[b, :m] = s.target_time - s.times
        feats[b, :m, 0] = s.x
    return deltas, feats


def build_sequence_input(seq: LabeledSequence, encoder) -> Tensor:
    """(M+1, d_T+1) input: rows [Phi(t - t_m), x_m], then [Phi(0), 0]."""
    deltas, feats = _stack_inputs([seq])
    phi = encoder.encode(deltas[0])
    return concat([phi, Tensor(feats[0])], axis=-1)


class SequenceClassifier(Module):
    """L-layer transformer over [time encoding, feature] rows.

    mode "full" averages all positions; mode "autoregressive" applies a
    causal mask and reads the final (target-row) position.
    """

    def __init__(self, d_T: int, rng: np.random.Generator,
                 time_family: str = "linear", mode: str = "full",
                 d_h: int = 32, layers: int = 1, dropout: float = 0.0):
        super().__init__()
        if mode not in ("full", "autoregressive"):
            raise ValueError(f"unknown attention mode {mode!r}")
        self.mode = mode
        self.time_encoder = build_time_encoder(
            time_family, d_T, np.random.default_rng(rng.integers(2**63)))
        self.input_proj = Linear(d_T + 1, d_h, rng)
        self.blocks = [TransformerLayer(d_h, 1, rng, dropout_rate=dropout)
                       for _ in range(layers)]
        self.head = Linear(d_h, 1, rng)

    def fit_time_standardizer(self, train_seqs) -> None:
        if self.time_encoder.requires_standardizer:
            ages = np.concatenate(
                [s.target_time - s.times for s in train_seqs])
            self.time_encoder.fit_standardizer(ages)

    def forward(self, seqs, record: bool = False) -> Tensor:
        deltas, feats = _stack_inputs(seqs)
        phi = self.time_encoder.encode(deltas)        # (B, M+1, d_T)
        z = self.input_proj(concat([phi, Tensor(feats)], axis=-1))
        causal = self.mode == "autoregressive"
        for li, block in enumerate(self.blocks):
            z = block(z, causal=causal,
                      record=record and li == len(self.blocks) - 1)
        if self.mode == "full":
            pooled = z.mean(axis=1)
        else:
            pooled = z[:, -1, :]
        return self.head(pooled).reshape(len(seqs))


def accuracy(model: SequenceClassifier, seqs, batch_size: int = 500) -> float:
    """Fraction of sequences whose logit sign matches the label."""
    correct = 0
    for start in range(0, len(seqs), batch_size):
        batch = seqs[start:start + batch_size]
        pred = model(batch).data > 0.0
        labels = np.array([s.label for s in batch], dtype=bool)
        correct += int((pred == labels).sum())
    return correct / len(seqs)


def train_sequence_classifier(model: SequenceClassifier,
                              data: SyntheticDataset,
                              epochs: int = 100, batch_size: int = 200,
                              lr: float = 1e-3, patience: int = 20,
                              shuffle_seed: int = 0) -> dict:
    """Minibatch Adam on binary cross-entropy; keeps the parameters of
    the best validation-accuracy epoch and stops after `patience` epochs
    without improvement."""
    model.fit_time_standardizer(data.train)
    opt = Adam(model.parameters(), lr=lr)
    order = np.random.default_rng(shuffle_seed)
    history = {"train_loss": [], "val_accuracy": []}
    best_acc, best_state, best_epoch = -1.0, None, -1
    for epoch in range(epochs):
        model.train()
        perm = order.permutation(len(data.train))
        losses = []
        for start in range(0, len(data.train), batch_size):
            batch = [data.train[i] for i in perm[start:start + batch_size]]
            y = np.array([s.label for s in batch], dtype=np.float64)
            model.zero_grad()
            loss = bce_with_logits(model(batch), y)
            if not np.isfinite(loss.data):
                raise RuntimeError(
                    f"training diverged at epoch {epoch}: loss={loss.data}")
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        model.eval()
        val_acc = accuracy(model, data.val)
        history["train_loss"].append(float(np.mean(losses)))
        history["val_accuracy"].append(val_acc)
        if val_acc > best_acc:
            best_acc, best_state, best_epoch = val_acc, model.state_dict(), epoch
        elif epoch - best_epoch >= patience:
            break
    model.load_state_dict(best_state)
    history["best_epoch"] = best_epoch
    history["best_val_accuracy"] = best_acc
    return history


def extract_avg_attention(model: SequenceClassifier, seqs, decay: float,
                          batch_size: int = 500):
    """Per-event-index mean of the target-row attention, paired with the
    mean true decay profile.

    Reads the single layer's final-position attention over the M event
    positions, so the model must be 1-layer autoregressive: the target
    row is then exactly the query that scores the events.
    """
    if model.mode != "autoregressive" or len(model.blocks) != 1:
        raise ValueError("attention extraction expects a 1-layer "
                         "autoregressive model")
    model.eval()
    m = len(seqs[0].x)
    learned = np.zeros(m)
    true = np.zeros(m)
    for start in range(0, len(seqs), batch_size):
        batch = seqs[start:start + batch_size]
        model(batch, record=True)
        attn = model.blocks[-1].last_attention     # (B, M+1, M+1)
        learned += attn[:, -1, :-1].sum(axis=0)
        true += sum(true_attention(s, decay) for s in batch)
    return learned / len(seqs), true / len(seqs)


def write_sequences_csv(data: SyntheticDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seq_id", "event_idx", "x", "t_event", "t_target",
                         "y"])
        for sid, seq in enumerate(data.sequences):
            for m in range(len(seq.x)):
                writer.writerow([sid, m, int(seq.x[m]),
                                 repr(float(seq.times[m])),
                                 repr(seq.target_time), seq.label])


def write_attention_csv(learned: np.ndarray, true: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event_idx", "learned_mean", "true_mean"])
        for m in range(len(learned)):
            writer.writerow([m, repr(float(learned[m])),
                             repr(float(true[m]))])
