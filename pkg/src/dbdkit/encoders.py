"""Shared encoder blocks for the turn-level detectors.

Four building blocks recur across the architectures:

* TemporalConvEncoder - stacked same-padded 1-D convolutions that
  contextualize frames/tokens without changing sequence length.
* max-pool over time - one embedding vector per utterance.
* BiLSTMAttentionEncoder - bidirectional recurrence plus additive attention
  pooling (utterance encoder for token/frame sequences).
* ContextEncoder - unidirectional recurrence over a window of up to
  `context_window` turn embeddings ending at the current turn, additive
  attention over its states, then a linear projection. Unidirectional by
  design: streaming inference must never read future turns.

Module classes carry the parameters; the lowercase functional forms operate
on FeatureSequences / plain arrays for contract-level use.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frontends import FeatureSequence
from .nn import (
    AdditiveAttention, Conv1dSame, LSTM, Linear, Module, Tensor, concat,
)

__all__ = [
    "EncoderConfig", "AttentionWeights", "EncoderError",
    "TemporalConvEncoder", "BiLSTMAttentionEncoder", "ContextEncoder",
    "UtteranceConvEncoder", "temporal_conv", "max_pool_time",
    "additive_attention", "bilstm_attend", "contextualize",
]


class EncoderError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    conv_channels: int = 256
    conv_kernel: int = 5
    conv_layers: int = 2
    hidden_dim: int = 128
    context_window: int = 5
    attention_dim: int = 128
    dropout: float = 0.1

    def validate(self) -> None:
        if self.conv_kernel % 2 != 1:
            raise EncoderError(f"conv_kernel must be odd, got {self.conv_kernel}")
        if self.context_window < 1:
            raise EncoderError("context_window must be >= 1")
        if min(self.conv_channels, self.conv_layers, self.hidden_dim,
               self.attention_dim) < 1:
            raise EncoderError("encoder dimensions must be >= 1")


@dataclass
class AttentionWeights:
    weights: np.ndarray

    def __post_init__(self):
        if np.any(self.weights < -1e-12):
            raise EncoderError("attention weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-6:
            raise EncoderError(
                f"attention weights must sum to 1, got {self.weights.sum()!r}")


def _apply_mask(x: Tensor, mask: np.ndarray | None) -> Tensor:
    if mask is None:
        return x
    return x * mask[:, :, None].astype(x.data.dtype)


class TemporalConvEncoder(Module):
    """Stacked same-padded convolutions with ReLU; (B, T, D) -> (B, T, C).

    Padded positions are re-zeroed between layers so a batched padded
    sequence computes exactly what the unpadded sequence would.
    """

    def __init__(self, in_dim: int, cfg: EncoderConfig, dtype=np.float64):
        cfg.validate()
        dims = [in_dim] + [cfg.conv_channels] * cfg.conv_layers
        self.layers = [Conv1dSame(dims[i], dims[i + 1], cfg.conv_kernel, dtype)
                       for i in range(cfg.conv_layers)]

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        x = _apply_mask(x, mask)
        for layer in self.layers:
            x = _apply_mask(layer(x).relu(), mask)
        return x


def max_pool_time_tensor(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    if mask is not None:
        neg = (1.0 - mask[:, :, None].astype(x.data.dtype)) * -1e30
        x = x + neg
    return x.max(axis=1)


class UtteranceConvEncoder(Module):
    """temporal conv stack + max-pool over time -> one vector per utterance."""

    def __init__(self, in_dim: int, cfg: EncoderConfig, dtype=np.float64):
        self.conv = TemporalConvEncoder(in_dim, cfg, dtype)
        self.out_dim = cfg.conv_channels

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        return max_pool_time_tensor(self.conv(x, mask), mask)


class BiLSTMAttentionEncoder(Module):
    """Bi-LSTM over a sequence, additive attention pooling; out dim 2H."""

    def __init__(self, in_dim: int, cfg: EncoderConfig, dtype=np.float64):
        cfg.validate()
        self.fwd = LSTM(in_dim, cfg.hidden_dim, dtype)
        self.bwd = LSTM(in_dim, cfg.hidden_dim, dtype)
        self.attn = AdditiveAttention(2 * cfg.hidden_dim, cfg.attention_dim, dtype)
        self.out_dim = 2 * cfg.hidden_dim

    def states(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        return concat([self.fwd(x, mask=mask),
                       self.bwd(x, mask=mask, reverse=True)], axis=-1)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None,
                 return_weights: bool = False):
        states = self.states(x, mask)
        context, weights = self.attn(states, mask=mask)
        if return_weights:
            return context, weights
        return context


class ContextEncoder(Module):
    """Causal contextualizer over up to `context_window` turn embeddings.

    Unidirectional LSTM (oldest -> current) over the window, additive
    attention across its states, then a linear projection to 2*hidden_dim.
    The projection reads the attention context concatenated with the final
    recurrent state (the current turn's contextual state), which keeps the
    current turn sharply distinguishable from its neighbours in the window.
    Windows are aligned so the current turn sits at the last position; any
    front padding is masked out of both the recurrence and the attention.
    """

    def __init__(self, in_dim: int, cfg: EncoderConfig, dtype=np.float64):
        cfg.validate()
        self.window = cfg.context_window
        out = 2 * cfg.hidden_dim
        self.rnn = LSTM(in_dim, out, dtype)
        self.attn = AdditiveAttention(out, cfg.attention_dim, dtype)
        self.proj = Linear(2 * out, out, dtype)
        self.out_dim = out

    def __call__(self, window: Tensor, mask: np.ndarray | None = None) -> Tensor:
        if window.shape[1] > self.window:
            raise EncoderError(
                f"window of {window.shape[1]} turns exceeds context_window "
                f"{self.window}")
        states = self.rnn(window, mask=mask)
        context, _ = self.attn(states, mask=mask)
        current = states[:, -1, :]
        return self.proj(concat([context, current], axis=-1))


# --------------------------------------------------------------------------
# Functional forms over FeatureSequences / arrays
# --------------------------------------------------------------------------

def temporal_conv(seq: FeatureSequence, cfg: EncoderConfig,
                  module: TemporalConvEncoder | None = None,
                  layers: int | None = None) -> FeatureSequence:
    """Same-length convolution of a feature sequence; dim -> conv_channels.

    `layers` overrides the stack depth (1 isolates the single-layer
    receptive-field contract: output frame t depends on input frames
    t-(k-1)/2 .. t+(k-1)/2 only).
    """
    if module is None:
        if layers is not None:
            cfg = EncoderConfig(**{**cfg.__dict__, "conv_layers": layers})
        module = TemporalConvEncoder(seq.dim, cfg)
    out = module(Tensor(seq.data[None, :, :]))
    return FeatureSequence(seq.modality, out.data[0])


def max_pool_time(seq: FeatureSequence) -> np.ndarray:
    return seq.data.max(axis=0)


def additive_attention(states: list[np.ndarray] | np.ndarray,
                       params: AdditiveAttention
                       ) -> tuple[np.ndarray, AttentionWeights]:
    arr = np.stack(states, axis=0) if isinstance(states, list) else states
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise EncoderError("additive_attention expects >= 1 state vectors")
    context, weights = params(Tensor(arr[None]))
    return context.data[0], AttentionWeights(weights.data[0])


def bilstm_attend(seq: FeatureSequence, cfg: EncoderConfig,
                  module: BiLSTMAttentionEncoder | None = None) -> np.ndarray:
    if module is None:
        module = BiLSTMAttentionEncoder(seq.dim, cfg)
    return module(Tensor(seq.data[None])).data[0]


def contextualize(history: list[np.ndarray], cfg: EncoderConfig,
                  module: ContextEncoder | None = None) -> np.ndarray:
    """history: up to context_window embeddings ordered oldest -> current."""
    if not 1 <= len(history) <= cfg.context_window:
        raise EncoderError(
            f"history of {len(history)} outside [1, {cfg.context_window}]")
    arr = np.stack(history, axis=0)[None]
    if module is None:
        module = ContextEncoder(arr.shape[-1], cfg)
    return module(Tensor(arr)).data[0]
