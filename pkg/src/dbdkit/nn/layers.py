"""Neural building blocks on top of the autograd tensor.

Modules own Parameters (tensors with requires_grad=True) and expose
`parameters()` for optimizers and `state_dict()`/`load_state_dict()` for
checkpointing. Initialization draws from the package-wide seeded generator,
in construction order, so a fixed seed reproduces identical weights.
"""
from __future__ import annotations

import math

import numpy as np

from .seeding import get_rng
from .tensor import Tensor, concat, conv1d_same, matmul

__all__ = [
    "Parameter", "Module", "Linear", "Conv1dSame", "LayerNorm", "Dropout",
    "LSTM", "AdditiveAttention", "MultiheadAttention", "TransformerLayer",
    "sinusoidal_positions",
]


class Parameter(Tensor):
    def __init__(self, data: np.ndarray):
        super().__init__(np.asarray(data), requires_grad=True)


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape, dtype) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    training: bool = True

    def parameters(self, prefix: str = "") -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for name, value in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(value, Parameter):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.parameters(prefix=f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.parameters(prefix=f"{key}.{i}."))
                    elif isinstance(item, Parameter):
                        out[f"{key}.{i}"] = item
        return out

    def train(self) -> "Module":
        self._set_mode(True)
        return self

    def eval(self) -> "Module":
        self._set_mode(False)
        return self

    def _set_mode(self, training: bool) -> None:
        self.training = training
        for value in vars(self).values():
            if isinstance(value, Module):
                value._set_mode(training)
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        item._set_mode(training)

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing={missing}, unexpected={unexpected}")
        for k, p in params.items():
            if p.data.shape != state[k].shape:
                raise ValueError(f"shape mismatch for {k}: {p.data.shape} vs {state[k].shape}")
            p.data = state[k].astype(p.data.dtype, copy=True)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, dtype=np.float64):
        rng = get_rng()
        self.weight = Parameter(_xavier(rng, in_dim, out_dim, (in_dim, out_dim), dtype))
        self.bias = Parameter(np.zeros(out_dim, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class Conv1dSame(Module):
    """Same-padded 1-D convolution, (B, T, C_in) -> (B, T, C_out)."""

    def __init__(self, in_ch: int, out_ch: int, kernel: int, dtype=np.float64):
        if kernel % 2 != 1:
            raise ValueError("kernel size must be odd for same-padding")
        rng = get_rng()
        fan_in = kernel * in_ch
        self.weight = Parameter(_xavier(rng, fan_in, out_ch, (kernel, in_ch, out_ch), dtype))
        self.bias = Parameter(np.zeros(out_ch, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return conv1d_same(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5, dtype=np.float64):
        self.gain = Parameter(np.ones(dim, dtype=dtype))
        self.shift = Parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        inv = (var + self.eps).pow(-0.5)
        return centered * inv * self.gain + self.shift


class Dropout(Module):
    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout probability must be in [0, 1)")
        self.p = p

    def __call__(self, x: Tensor) -> Tensor:
        if not self.training or self.p == 0.0:
            return x
        keep = 1.0 - self.p
        mask = (get_rng().random(x.data.shape) < keep).astype(x.data.dtype) / keep
        return x * mask


class LSTM(Module):
    """Single-direction LSTM over (B, T, D) inputs.

    `mask` (B, T) applies step-holding semantics: on inactive steps the
    hidden and cell states pass through unchanged, so front- or tail-padded
    batches reproduce exactly what the unpadded sequences would compute.
    `reverse=True` walks time backwards (for the backward half of a Bi-LSTM).
    Gate layout along the 4H axis: input, forget, candidate, output.
    """

    def __init__(self, in_dim: int, hidden_dim: int, dtype=np.float64):
        rng = get_rng()
        H = hidden_dim
        self.w_in = Parameter(_xavier(rng, in_dim, 4 * H, (in_dim, 4 * H), dtype))
        self.w_rec = Parameter(_xavier(rng, H, 4 * H, (H, 4 * H), dtype))
        bias = np.zeros(4 * H, dtype=dtype)
        bias[H:2 * H] = 1.0  # forget-gate bias keeps early memory open
        self.bias = Parameter(bias)
        self.hidden_dim = H

    def __call__(self, x: Tensor, mask: np.ndarray | None = None,
                 reverse: bool = False) -> Tensor:
        B, T, _ = x.shape
        H = self.hidden_dim
        dtype = x.data.dtype
        h = Tensor(np.zeros((B, H), dtype=dtype))
        c = Tensor(np.zeros((B, H), dtype=dtype))
        xw = matmul(x, self.w_in)  # (B, T, 4H), one GEMM for all steps
        steps = range(T - 1, -1, -1) if reverse else range(T)
        outputs: list[Tensor] = [None] * T  # type: ignore[list-item]
        for t in steps:
            gates = xw[:, t, :] + matmul(h, self.w_rec) + self.bias
            i = gates[:, 0 * H:1 * H].sigmoid()
            f = gates[:, 1 * H:2 * H].sigmoid()
            g = gates[:, 2 * H:3 * H].tanh()
            o = gates[:, 3 * H:4 * H].sigmoid()
            c_new = f * c + i * g
            h_new = o * c_new.tanh()
            if mask is not None:
                m = mask[:, t:t + 1].astype(dtype)
                c = c_new * m + c * (1.0 - m)
                h = h_new * m + h * (1.0 - m)
            else:
                c, h = c_new, h_new
            outputs[t] = h
        stacked = concat([o.reshape(B, 1, H) for o in outputs], axis=1)
        return stacked


class AdditiveAttention(Module):
    """Tanh-scored attention pooling over a sequence of state vectors.

    score_i = v . tanh(W h_i + b); weights = softmax(scores) over valid
    positions; context = sum_i weights_i h_i.
    """

    def __init__(self, state_dim: int, attention_dim: int, dtype=np.float64):
        rng = get_rng()
        self.proj = Parameter(_xavier(rng, state_dim, attention_dim,
                                      (state_dim, attention_dim), dtype))
        self.proj_bias = Parameter(np.zeros(attention_dim, dtype=dtype))
        self.score = Parameter(
            _xavier(rng, attention_dim, 1, (attention_dim,), dtype))

    def __call__(self, states: Tensor, mask: np.ndarray | None = None
                 ) -> tuple[Tensor, Tensor]:
        """states: (B, T, H) -> (context (B, H), weights (B, T))."""
        hidden = (matmul(states, self.proj) + self.proj_bias).tanh()  # (B, T, A)
        scores = matmul(hidden, self.score.reshape(-1, 1))[:, :, 0]   # (B, T)
        weights = scores.softmax(axis=-1, mask=mask)
        context = matmul(weights.reshape(weights.shape[0], 1, -1), states)
        return context[:, 0, :], weights


class MultiheadAttention(Module):
    """Scaled dot-product attention with separate query and key/value inputs."""

    def __init__(self, model_dim: int, n_heads: int, dtype=np.float64):
        if model_dim % n_heads != 0:
            raise ValueError("model_dim must divide evenly across heads")
        self.n_heads = n_heads
        self.head_dim = model_dim // n_heads
        self.q_proj = Linear(model_dim, model_dim, dtype)
        self.k_proj = Linear(model_dim, model_dim, dtype)
        self.v_proj = Linear(model_dim, model_dim, dtype)
        self.out_proj = Linear(model_dim, model_dim, dtype)

    def _split(self, x: Tensor) -> Tensor:
        B, T, D = x.shape
        return x.reshape(B, T, self.n_heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(self, query: Tensor, keyvalue: Tensor,
                 kv_mask: np.ndarray | None = None,
                 return_weights: bool = False):
        B, Tq, D = query.shape
        q = self._split(self.q_proj(query))      # (B, H, Tq, Dh)
        k = self._split(self.k_proj(keyvalue))   # (B, H, Tk, Dh)
        v = self._split(self.v_proj(keyvalue))
        scores = matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(self.head_dim))
        mask4 = None
        if kv_mask is not None:
            mask4 = np.broadcast_to(kv_mask[:, None, None, :], scores.shape)
        weights = scores.softmax(axis=-1, mask=mask4)  # (B, H, Tq, Tk)
        mixed = matmul(weights, v)                     # (B, H, Tq, Dh)
        merged = mixed.transpose(0, 2, 1, 3).reshape(B, Tq, D)
        out = self.out_proj(merged)
        if return_weights:
            return out, weights
        return out


class TransformerLayer(Module):
    """Pre-norm attention block with a position-wise feed-forward sublayer.

    With `keyvalue is None` it is a self-attention layer; otherwise queries
    come from `x` and keys/values from the other stream (crossmodal use).
    """

    def __init__(self, model_dim: int, n_heads: int, ffn_dim: int,
                 dropout: float = 0.0, dtype=np.float64):
        self.attn = MultiheadAttention(model_dim, n_heads, dtype)
        self.norm_q = LayerNorm(model_dim, dtype=dtype)
        self.norm_kv = LayerNorm(model_dim, dtype=dtype)
        self.norm_ffn = LayerNorm(model_dim, dtype=dtype)
        self.ffn_in = Linear(model_dim, ffn_dim, dtype)
        self.ffn_out = Linear(ffn_dim, model_dim, dtype)
        self.drop = Dropout(dropout)

    def __call__(self, x: Tensor, keyvalue: Tensor | None = None,
                 kv_mask: np.ndarray | None = None) -> Tensor:
        q = self.norm_q(x)
        kv = q if keyvalue is None else self.norm_kv(keyvalue)
        x = x + self.drop(self.attn(q, kv, kv_mask=kv_mask))
        x = x + self.drop(self.ffn_out(self.ffn_in(self.norm_ffn(x)).relu()))
        return x


def sinusoidal_positions(length: int, dim: int, dtype=np.float64) -> np.ndarray:
    """Fixed sin/cos position table, (length, dim)."""
    position = np.arange(length, dtype=np.float64)[:, None]
    half = (dim + 1) // 2
    freq = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / max(half, 1))
    angles = position * freq[None, :]
    table = np.zeros((length, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)[:, : table[:, 0::2].shape[1]]
    table[:, 1::2] = np.cos(angles)[:, : table[:, 1::2].shape[1]]
    return table.astype(dtype)
