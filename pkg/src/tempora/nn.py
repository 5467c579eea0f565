"""Neural-network building blocks on top of the tensor engine.

Conventions
-----------
* Activations are row vectors: ``y = x @ W + b`` with ``W`` of shape
  ``(in, out)``, matching the matrix layouts used throughout the models.
* Weights are drawn ``N(0, 1/sqrt(fan_in))`` from a caller-supplied
  Generator so a run is reproducible from a single seed; biases start 0.
* ``Module.train(False)`` disables dropout everywhere beneath it.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    Tensor,
    concat,
    dropout as dropout_op,
    gelu,
    layer_norm,
    masked_softmax,
    matmul,
    relu,
)

__all__ = ["Module", "Linear", "MLP", "Dropout", "TransformerLayer"]


class Module:
    """Base class: recursive parameter discovery, train/eval mode,
    state-dict save/load keyed by dotted attribute paths."""

    def __init__(self):
        self.training = True

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        unexpected = set(state) - set(own)
        if missing or unexpected:
            raise KeyError(
                f"state dict mismatch: missing={sorted(missing)}, "
                f"unexpected={sorted(unexpected)}"
            )
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: "
                    f"checkpoint {arr.shape} vs model {p.data.shape}"
                )
            p.data[...] = arr

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    """Affine map ``x @ W + b``.

    ``in_features == 0`` is legal and yields a constant bias output —
    used when a feature block (node or edge attributes) is absent but the
    downstream shape contract still expects a projection.
    """

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        scale = 1.0 / np.sqrt(max(in_features, 1))
        self.weight = Tensor(
            rng.standard_normal((in_features, out_features)) * scale,
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_features), requires_grad=True) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = matmul(x, self.weight)
        if self.bias is not None:
            out = out + self.bias
        return out


_ACTIVATIONS = {"relu": relu, "gelu": gelu}


class MLP(Module):
    """Stack of Linear layers with an activation between them (not after
    the last): dims [d0, d1, ..., dk] gives k layers."""

    def __init__(self, dims: list[int], rng: np.random.Generator,
                 activation: str = "relu"):
        super().__init__()
        if len(dims) < 2:
            raise ValueError("MLP needs at least input and output dims")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        self.layers = [Linear(dims[i], dims[i + 1], rng) for i in range(len(dims) - 1)]

    def forward(self, x: Tensor) -> Tensor:
        act = _ACTIVATIONS[self.activation]
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = act(x)
        return x


class Dropout(Module):
    """Inverted dropout with its own Generator; identity in eval mode."""

    def __init__(self, rate: float, rng: np.random.Generator):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng

    def forward(self, x: Tensor) -> Tensor:
        if not self.training or self.rate == 0.0:
            return x
        return dropout_op(x, self.rate, self.rng)


class LayerNormParams(Module):
    """Learnable scale/shift for layer normalization over the last axis."""

    def __init__(self, dim: int):
        super().__init__()
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)


class TransformerLayer(Module):
    """Pre-norm encoder block whose attention output feeds the residual
    stream directly (heads are concatenated; there is no output
    projection after them).

    Dataflow for input Z of shape (batch, length, d_model):

        A  = softmax(mask(Q K^T / sqrt(d_head)))      per head
        H  = Z + drop(concat_heads(A V))
        Z' = H + drop(W2 gelu(W1 LN(H) + b1) + b2)

    ``key_valid`` (batch, length) marks real rows; False keys can never
    receive attention. ``causal=True`` additionally restricts queries to
    positions at or before themselves. A query whose mask row is empty
    gets a zero attention message (residual then passes its input
    through unchanged).

    When ``record=True`` the post-softmax weights, averaged over heads,
    are kept in ``self.last_attention`` as a (batch, length, length)
    array for offline inspection.
    """

    def __init__(self, d_model: int, num_heads: int, rng: np.random.Generator,
                 dropout_rate: float = 0.1, ff_multiplier: int = 4):
        super().__init__()
        if d_model % num_heads != 0:
            raise ValueError(
                f"d_model={d_model} not divisible by num_heads={num_heads}"
            )
        self.d_model = d_model
        self.num_heads = num_heads
        self.d_head = d_model // num_heads
        self.w_q = Linear(d_model, d_model, rng, bias=False)
        self.w_k = Linear(d_model, d_model, rng, bias=False)
        self.w_v = Linear(d_model, d_model, rng, bias=False)
        self.norm_attn = LayerNormParams(d_model)
        self.norm_ff = LayerNormParams(d_model)
        self.ff_in = Linear(d_model, ff_multiplier * d_model, rng)
        self.ff_out = Linear(ff_multiplier * d_model, d_model, rng)
        self.drop_attn = Dropout(dropout_rate, rng=np.random.default_rng(rng.integers(2**63)))
        self.drop_resid = Dropout(dropout_rate, rng=np.random.default_rng(rng.integers(2**63)))
        self.drop_ff = Dropout(dropout_rate, rng=np.random.default_rng(rng.integers(2**63)))
        self.last_attention: np.ndarray | None = None

    def _split_heads(self, x: Tensor, batch: int, length: int) -> Tensor:
        # (B, L, D) -> (B, H, L, Dh)
        return x.reshape(batch, length, self.num_heads, self.d_head).swapaxes(1, 2)

    def forward(self, x: Tensor, key_valid: np.ndarray | None = None,
                causal: bool = False, record: bool = False) -> Tensor:
        batch, length, _ = x.shape
        xn = self.norm_attn(x)
        q = self._split_heads(self.w_q(xn), batch, length)
        k = self._split_heads(self.w_k(xn), batch, length)
        v = self._split_heads(self.w_v(xn), batch, length)

        scores = matmul(q, k.swapaxes(2, 3)) * (1.0 / np.sqrt(self.d_head))
        # scores: (B, H, L, L); build the validity mask at the same shape
        mask = np.ones((batch, 1, length, length), dtype=bool)
        if key_valid is not None:
            mask &= np.asarray(key_valid, dtype=bool)[:, None, None, :]
        if causal:
            mask &= np.tril(np.ones((length, length), dtype=bool))[None, None]
        mask = np.broadcast_to(mask, (batch, self.num_heads, length, length))

        attn = masked_softmax(scores, mask, axis=-1)
        if record:
            self.last_attention = attn.data.mean(axis=1).copy()
        attn = self.drop_attn(attn)
        msg = matmul(attn, v)  # (B, H, L, Dh)
        msg = msg.swapaxes(1, 2).reshape(batch, length, self.d_model)
        h = x + self.drop_resid(msg)

        y = self.ff_out(gelu(self.ff_in(self.norm_ff(h))))
        return h + self.drop_ff(y)
