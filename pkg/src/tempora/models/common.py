"""Shared link-model machinery: the scoring head, the model base class,
and parameter accounting."""

from __future__ import annotations

import numpy as np

from ..nn import MLP, Module
from ..tensor import Tensor, concat

PARAMETER_GROUPS = ("time_encoder", "attention", "mlp", "head", "embeddings")


class LinkPredictor(Module):
    """Two-layer ReLU MLP mapping [z_i; z_j] to a single logit."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.net = MLP([in_dim, hidden, 1], rng, activation="relu")

    def forward(self, z_i: Tensor, z_j: Tensor) -> Tensor:
        logits = self.net(concat([z_i, z_j], axis=-1))   # (B, 1)
        return logits.reshape(logits.shape[0])


class LinkModel(Module):
    """Base class: subclasses provide embed_pair; scoring and parameter
    grouping are shared.

    embed_pair(graph, src, dst, times) -> (z_i, z_j), each (B, embed_dim).
    Models that need to see both endpoints jointly (cross-attention or
    co-occurrence features) implement the pairing internally.
    """

    def embed_pair(self, graph, src, dst, times):
        raise NotImplementedError

    def score(self, graph, src, dst, times) -> Tensor:
        z_i, z_j = self.embed_pair(graph, src, dst, times)
        return self.head(z_i, z_j)

    def predict_proba(self, graph, src, dst, times) -> np.ndarray:
        from ..tensor import sigmoid
        return sigmoid(self.score(graph, src, dst, times)).data

    def parameter_group(self, name: str) -> str:
        """Coarse functional bucket for a parameter path; order matters
        (a time encoder has 'weight' in its parameter names too)."""
        if name.startswith("time_encoder."):
            return "time_encoder"
        if "bos" in name:
            return "embeddings"
        if name.startswith("head."):
            return "head"
        if any(k in name for k in ("w_q.", "w_k.", "w_v.", "norm_attn.")):
            return "attention"
        return "mlp"


def count_parameters(model: LinkModel):
    """Exact trainable-scalar count plus the per-group breakdown."""
    groups = {g: 0 for g in PARAMETER_GROUPS}
    total = 0
    for name, p in model.named_parameters():
        groups[model.parameter_group(name)] += p.size
        total += p.size
    return total, groups
