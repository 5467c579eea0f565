"""Model hyperparameter schema and the architecture factory."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

ARCHITECTURES = ("tgat", "dygformer", "dygformer_separate", "dygdecoder")


@dataclass
class ModelConfig:
    """Everything needed to construct a link model.

    The graph-attention architecture uses node_dim/attn_dim/mlp_hidden/
    num_neighbors; the sequence architectures use d_ch/d_tc/d_C/
    patch_size/seq_budget. The transformer width for the sequence family
    is derived, never set directly: 3*d_ch + (d_tc or d_ch).
    """

    architecture: str = "tgat"
    time_family: str = "sinusoidal_cos"
    d_T: int = 100
    layers: int = 2
    dropout: float = 0.1
    out_dim: int = 32              # final per-node representation width
    # graph-attention family
    node_dim: int = 32             # d: width node attributes are padded to
    attn_dim: int = 32             # d_h of each attention layer
    mlp_hidden: int = 32           # d_f of the per-layer merge MLP
    num_neighbors: int = 20        # K most recent events per hop
    # sequence family
    d_ch: int = 50                 # per-channel projection width
    d_tc: int | None = None        # time-channel override (None -> d_ch)
    d_C: int = 50                  # co-occurrence feature width
    patch_size: int = 1
    seq_budget: int = 32           # max events per sequence incl. target
    head_hidden: int = 64          # link-scorer hidden width

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(
                f"unknown architecture {self.architecture!r}; "
                f"choose from {ARCHITECTURES}"
            )
        for name in ("d_T", "layers", "out_dim", "attn_dim", "mlp_hidden",
                     "num_neighbors", "d_ch", "d_C", "patch_size",
                     "seq_budget", "head_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.node_dim < 0:
            raise ValueError("node_dim must be >= 0")
        if self.d_tc is not None and self.d_tc < 1:
            raise ValueError("d_tc override must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def d_tc_effective(self) -> int:
        return self.d_ch if self.d_tc is None else self.d_tc

    @property
    def d_model(self) -> int:
        """Sequence-transformer width: three d_ch channels plus the
        (possibly overridden) time channel."""
        return 3 * self.d_ch + self.d_tc_effective

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def build_model(cfg: ModelConfig, graph_d_V: int, graph_d_E: int,
                rng: np.random.Generator):
    """Construct the configured architecture wired for a graph with the
    given raw feature widths. Import here avoids a config<->model cycle."""
    from .tgat import TGAT
    from .dygformer import DyGFormer, DyGFormerSeparate, DyGDecoder

    if cfg.architecture == "tgat":
        return TGAT(cfg, graph_d_V, graph_d_E, rng)
    if cfg.architecture == "dygformer":
        return DyGFormer(cfg, graph_d_V, graph_d_E, rng)
    if cfg.architecture == "dygformer_separate":
        return DyGFormerSeparate(cfg, graph_d_V, graph_d_E, rng)
    return DyGDecoder(cfg, graph_d_V, graph_d_E, rng)
