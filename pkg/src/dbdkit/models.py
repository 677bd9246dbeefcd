"""The four turn-level breakdown detectors behind one prediction interface.

* MultConDB - two unimodal conv+pool branches (audio frames, text tokens) and
  one multimodal branch (per-modality Bi-LSTM+attention, concatenated), each
  contextualized over a causal window of up to five turns; the three
  contextual embeddings concatenate into a fusion embedding feeding a
  256-unit hidden layer and a 2-way classifier.
* TextLSTM - token Bi-LSTM+attention per utterance, a second Bi-LSTM+attention
  over the utterance-embedding window, then a linear classifier.
* E2ELLM - the formatted current-plus-four-context string runs through a
  pluggable text encoder (here a compact trainable transformer); the
  start-token embedding feeds a 784-unit layer and the classifier.
* MultAT - conv-projected audio and text streams exchange information through
  two stacks of crossmodal attention (audio queries text, text queries
  audio), pass through self-attention stacks, mean-pool, and classify.

Every model implements `predict(turn, state) -> (Prediction, state)` with the
same causal-window semantics; `predict_call` replays a call turn by turn with
exactly the computation a streaming session performs, so offline and online
inference agree bitwise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .corpus import Call, Cause, Label, SpeakerTag, Turn, format_e2e_input, format_utterance
from .encoders import (
    BiLSTMAttentionEncoder, ContextEncoder, EncoderConfig, TemporalConvEncoder,
    UtteranceConvEncoder,
)
from .frontends import (
    FrontendConfig, get_audio_frontend, get_text_frontend,
)
from .nn import (
    Dropout, LayerNorm, Linear, Module, Parameter, Tensor, TransformerLayer,
    concat, get_rng, index_select, sinusoidal_positions,
)

__all__ = [
    "Architecture", "Logits", "Prediction", "FusionEmbedding", "ModelConfig",
    "ModelStateError", "Featurizer", "TurnClassifier", "MultConDB",
    "TextLSTM", "E2ELLM", "MultAT", "build_model", "model_card",
    "export_fusion_embedding", "ExportRecord",
]


class Architecture(enum.Enum):
    MULTCONDB = "multcondb"
    TEXT_LSTM = "text_lstm"
    E2E_LLM = "e2e_llm"
    MULT_AT = "mult_at"


class ModelStateError(RuntimeError):
    pass


@dataclass
class Logits:
    """values[0] is the no-breakdown logit, values[1] the breakdown logit."""
    values: np.ndarray

    @property
    def score(self) -> float:
        v = self.values - self.values.max()
        e = np.exp(v)
        return float(e[1] / e.sum())

    @property
    def label(self) -> Label:
        # argmax with ties resolved to NO_BREAKDOWN
        return Label.BREAKDOWN if self.values[1] > self.values[0] else Label.NO_BREAKDOWN


@dataclass
class Prediction:
    call_id: str
    turn_index: int
    score: float
    label: Label


@dataclass
class FusionEmbedding:
    vector: np.ndarray
    segment_dims: tuple[int, int, int]

    def __post_init__(self):
        if self.vector.shape[0] != sum(self.segment_dims):
            raise ValueError("fusion vector length != sum of segment dims")


@dataclass(frozen=True)
class ModelConfig:
    architecture: Architecture
    encoder: EncoderConfig = EncoderConfig()
    frontend: FrontendConfig = FrontendConfig()
    head_hidden: int = 256           # fusion hidden layer width
    e2e_head_hidden: int = 784
    e2e_model_dim: int = 128
    e2e_layers: int = 2
    e2e_heads: int = 4
    crossmodal_layers: int = 12
    crossmodal_heads: int = 4
    self_layers: int = 6
    self_heads: int = 4
    ffn_multiple: int = 2
    dropout: float = 0.1
    dtype: str = "float64"

    @property
    def np_dtype(self):
        return {"float64": np.float64, "float32": np.float32}[self.dtype]

    def validate(self) -> None:
        self.encoder.validate()
        self.frontend.validate()
        if self.head_hidden < 1 or self.e2e_head_hidden < 1:
            raise ValueError("head widths must be >= 1")


class Featurizer:
    """Turn -> feature arrays, with an optional per-turn cache for training."""

    def __init__(self, cfg: FrontendConfig, cache: bool = False):
        self.cfg = cfg
        self.audio_frontend = get_audio_frontend(cfg)
        self.text_frontend = get_text_frontend(cfg)
        self._cache_on = cache
        self._audio: dict[tuple[str, int], np.ndarray] = {}
        self._text: dict[tuple[str, int], np.ndarray] = {}

    def enable_cache(self) -> None:
        self._cache_on = True

    def audio(self, turn: Turn) -> np.ndarray:
        key = (turn.call_id, turn.index)
        if self._cache_on and key in self._audio:
            return self._audio[key]
        feats = self.audio_frontend.extract(turn.waveform)
        if self._cache_on:
            self._audio[key] = feats
        return feats

    def text(self, turn: Turn) -> np.ndarray:
        key = (turn.call_id, turn.index)
        if self._cache_on and key in self._text:
            return self._text[key]
        feats = self.text_frontend.extract(format_utterance(turn))
        if self._cache_on:
            self._text[key] = feats
        return feats

    def e2e_text(self, formatted: str) -> np.ndarray:
        return self.text_frontend.extract(formatted)


@dataclass
class TurnState:
    """Per-call causal context: ring buffers of at most `window` entries."""
    window: int
    turns_seen: int = 0
    buffers: dict = field(default_factory=dict)

    def push(self, name: str, value) -> None:
        buf = self.buffers.setdefault(name, [])
        buf.append(value)
        if len(buf) > self.window:
            del buf[0]

    def buffer_lengths(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.buffers.items()}


def _pad_stack(arrays: list[np.ndarray], dtype) -> tuple[np.ndarray, np.ndarray]:
    """Tail-pad variable-length (L, D) arrays into (N, Lmax, D) plus mask."""
    n = len(arrays)
    lmax = max(a.shape[0] for a in arrays)
    dim = arrays[0].shape[1]
    out = np.zeros((n, lmax, dim), dtype=dtype)
    mask = np.zeros((n, lmax), dtype=dtype)
    for i, a in enumerate(arrays):
        out[i, :a.shape[0]] = a
        mask[i, :a.shape[0]] = 1.0
    return out, mask


def _window_gather(embs: Tensor, window_slices: list[tuple[int, int]],
                   dtype) -> tuple[Tensor, np.ndarray]:
    """Regroup flat per-turn embeddings into front-padded causal windows.

    `window_slices[i] = (start, stop)` indexes rows of `embs` belonging to
    sample i, oldest first, stop-1 being the current turn.
    """
    wmax = max(stop - start for start, stop in window_slices)
    n = len(window_slices)
    idx = np.zeros((n, wmax), dtype=np.int64)
    mask = np.zeros((n, wmax), dtype=dtype)
    for i, (start, stop) in enumerate(window_slices):
        w = stop - start
        idx[i, wmax - w:] = np.arange(start, stop)
        mask[i, wmax - w:] = 1.0
    gathered = index_select(embs, idx.reshape(-1)).reshape(n, wmax, embs.shape[-1])
    gathered = gathered * mask[:, :, None]
    return gathered, mask


class TurnClassifier(Module):
    """Shared surface of the four architectures."""

    architecture: Architecture

    def __init__(self, config: ModelConfig):
        config.validate()
        self.config = config
        self.featurizer = Featurizer(config.frontend)
        self.window = config.encoder.context_window
        self.dt = config.np_dtype

    # --- state ------------------------------------------------------------
    def init_state(self, window: int | None = None) -> TurnState:
        return TurnState(window=min(window or self.window, self.window))

    # --- single-turn inference (the streaming path) ------------------------
    def forward_turn(self, turn: Turn, state: TurnState
                     ) -> tuple[Logits, dict, TurnState]:
        raise NotImplementedError

    def predict(self, turn: Turn, state: TurnState
                ) -> tuple[Prediction, TurnState]:
        logits, _, state = self.forward_turn(turn, state)
        return Prediction(turn.call_id, turn.index, logits.score,
                          logits.label), state

    def predict_call(self, call: Call, window: int | None = None
                     ) -> list[Prediction]:
        state = self.init_state(window)
        preds = []
        for turn in call.turns:
            pred, state = self.predict(turn, state)
            preds.append(pred)
        return preds

    # --- batched training path ---------------------------------------------
    def make_sample(self, call: Call, index: int) -> dict:
        raise NotImplementedError

    def forward_batch(self, samples: list[dict]) -> Tensor:
        raise NotImplementedError

    # --- embedding export ---------------------------------------------------
    def export_turn(self, turn: Turn, state: TurnState
                    ) -> tuple[np.ndarray, np.ndarray, TurnState]:
        """(before, after, state): the raw pooled input concatenation and the
        penultimate activation feeding the classifier."""
        logits, aux, state = self.forward_turn(turn, state)
        return aux["before"], aux["after"], state

    def _before_vector(self, audio_feats: np.ndarray, text_feats: np.ndarray | None
                       ) -> np.ndarray:
        parts = []
        if text_feats is not None:
            parts.append(text_feats.mean(axis=0))
        if audio_feats is not None:
            parts.append(audio_feats.mean(axis=0))
        return np.concatenate(parts)


# ---------------------------------------------------------------------------
# MultConDB
# ---------------------------------------------------------------------------

class MultConDB(TurnClassifier):
    architecture = Architecture.MULTCONDB

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        enc = config.encoder
        dt = self.dt
        fa, ft = config.frontend.audio_dim, config.frontend.text_dim
        self.acoustic_utt = UtteranceConvEncoder(fa, enc, dt)
        self.textual_utt = UtteranceConvEncoder(ft, enc, dt)
        self.mm_audio = BiLSTMAttentionEncoder(fa, enc, dt)
        self.mm_text = BiLSTMAttentionEncoder(ft, enc, dt)
        self.ctx_acoustic = ContextEncoder(enc.conv_channels, enc, dt)
        self.ctx_textual = ContextEncoder(enc.conv_channels, enc, dt)
        self.ctx_multimodal = ContextEncoder(self.mm_audio.out_dim
                                             + self.mm_text.out_dim, enc, dt)
        fusion_dim = (self.ctx_acoustic.out_dim + self.ctx_textual.out_dim
                      + self.ctx_multimodal.out_dim)
        self.fusion_dims = (self.ctx_acoustic.out_dim, self.ctx_textual.out_dim,
                            self.ctx_multimodal.out_dim)
        self.head_hidden = Linear(fusion_dim, config.head_hidden, dt)
        self.head_out = Linear(config.head_hidden, 2, dt)
        self.drop = Dropout(config.dropout)

    # one turn -> the three branch embeddings, as plain arrays
    def _branch_embeddings(self, turn: Turn) -> dict[str, np.ndarray]:
        audio = Tensor(self.featurizer.audio(turn)[None].astype(self.dt))
        text = Tensor(self.featurizer.text(turn)[None].astype(self.dt))
        ua = self.acoustic_utt(audio).data[0]
        ut = self.textual_utt(text).data[0]
        ma = self.mm_audio(audio).data[0]
        mt = self.mm_text(text).data[0]
        return {"acoustic": ua, "textual": ut,
                "multimodal": np.concatenate([ma, mt])}

    def forward_turn(self, turn: Turn, state: TurnState
                     ) -> tuple[Logits, dict, TurnState]:
        lengths = set(state.buffer_lengths().values())
        if len(lengths) > 1:
            raise ModelStateError(
                f"mismatched branch buffer lengths: {state.buffer_lengths()}")
        embs = self._branch_embeddings(turn)
        ctx_parts = []
        for name, module in (("acoustic", self.ctx_acoustic),
                             ("textual", self.ctx_textual),
                             ("multimodal", self.ctx_multimodal)):
            prior = state.buffers.get(name, [])[-(state.window - 1):] \
                if state.window > 1 else []
            window = np.stack(list(prior) + [embs[name]], axis=0)[None]
            ctx_parts.append(module(Tensor(window.astype(self.dt))).data[0])
        fusion = FusionEmbedding(np.concatenate(ctx_parts), self.fusion_dims)
        hidden = self.head_hidden(Tensor(fusion.vector[None])).relu()
        logits = self.head_out(hidden).data[0]
        for name in ("acoustic", "textual", "multimodal"):
            state.push(name, embs[name])
        state.turns_seen += 1
        aux = {"fusion": fusion, "after": hidden.data[0],
               "before": self._before_vector(self.featurizer.audio(turn),
                                             self.featurizer.text(turn))}
        return Logits(logits), aux, state

    def make_sample(self, call: Call, index: int) -> dict:
        lo = max(0, index - (self.window - 1))
        return {
            "label": call.turns[index].label,
            "call_id": call.id, "index": index,
            "audio": [self.featurizer.audio(t) for t in call.turns[lo:index + 1]],
            "text": [self.featurizer.text(t) for t in call.turns[lo:index + 1]],
        }

    def forward_batch(self, samples: list[dict]) -> Tensor:
        dt = self.dt
        slices = []
        flat_audio, flat_text = [], []
        for s in samples:
            start = len(flat_audio)
            flat_audio.extend(s["audio"])
            flat_text.extend(s["text"])
            slices.append((start, len(flat_audio)))
        audio = Tensor(np.stack(flat_audio).astype(dt))
        text_np, text_mask = _pad_stack(flat_text, dt)
        text = Tensor(text_np)
        ua = self.acoustic_utt(audio)
        ut = self.textual_utt(text, mask=text_mask)
        mm = concat([self.mm_audio(audio),
                     self.mm_text(text, mask=text_mask)], axis=-1)
        ctx_parts = []
        for embs, module in ((ua, self.ctx_acoustic), (ut, self.ctx_textual),
                             (mm, self.ctx_multimodal)):
            windows, wmask = _window_gather(embs, slices, dt)
            ctx_parts.append(module(windows, mask=wmask))
        fusion = concat(ctx_parts, axis=-1)
        hidden = self.drop(self.head_hidden(fusion).relu())
        return self.head_out(hidden)


# ---------------------------------------------------------------------------
# Text LSTM
# ---------------------------------------------------------------------------

class TextLSTM(TurnClassifier):
    architecture = Architecture.TEXT_LSTM

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        enc = config.encoder
        self.utterance = BiLSTMAttentionEncoder(config.frontend.text_dim, enc, self.dt)
        self.context = BiLSTMAttentionEncoder(self.utterance.out_dim, enc, self.dt)
        self.head = Linear(self.context.out_dim, 2, self.dt)
        self.drop = Dropout(config.dropout)

    def _utterance_embedding(self, turn: Turn) -> np.ndarray:
        text = Tensor(self.featurizer.text(turn)[None].astype(self.dt))
        return self.utterance(text).data[0]

    def forward_turn(self, turn, state):
        emb = self._utterance_embedding(turn)
        prior = state.buffers.get("utterance", [])[-(state.window - 1):] \
            if state.window > 1 else []
        window = np.stack(list(prior) + [emb], axis=0)[None]
        ctx = self.context(Tensor(window.astype(self.dt)))
        logits = self.head(ctx).data[0]
        state.push("utterance", emb)
        state.turns_seen += 1
        aux = {"after": ctx.data[0],
               "before": self._before_vector(None, self.featurizer.text(turn))}
        return Logits(logits), aux, state

    def make_sample(self, call, index):
        lo = max(0, index - (self.window - 1))
        return {"label": call.turns[index].label, "call_id": call.id,
                "index": index,
                "text": [self.featurizer.text(t) for t in call.turns[lo:index + 1]]}

    def forward_batch(self, samples):
        dt = self.dt
        slices, flat_text = [], []
        for s in samples:
            start = len(flat_text)
            flat_text.extend(s["text"])
            slices.append((start, len(flat_text)))
        text_np, text_mask = _pad_stack(flat_text, dt)
        embs = self.utterance(Tensor(text_np), mask=text_mask)
        windows, wmask = _window_gather(embs, slices, dt)
        ctx = self.context(windows, mask=wmask)
        return self.head(self.drop(ctx))


# ---------------------------------------------------------------------------
# End-to-end classifier over the formatted context string
# ---------------------------------------------------------------------------

class KitTextEncoder(Module):
    """Compact trainable transformer standing in for a pretrained encoder:
    projects token features to the model width, prepends a learned start
    token, adds sinusoidal positions, runs self-attention layers, and
    returns the start-token embedding."""

    def __init__(self, in_dim: int, model_dim: int, n_layers: int, n_heads: int,
                 ffn_multiple: int, dropout: float, dtype):
        self.proj = Linear(in_dim, model_dim, dtype)
        bound = 1.0 / np.sqrt(model_dim)
        self.start = Parameter(get_rng().uniform(-bound, bound, model_dim).astype(dtype))
        self.layers = [TransformerLayer(model_dim, n_heads,
                                        ffn_multiple * model_dim, dropout, dtype)
                       for _ in range(n_layers)]
        self.final_norm = LayerNorm(model_dim, dtype=dtype)
        self.model_dim = model_dim
        self._dtype = dtype
        self._pe: dict[int, np.ndarray] = {}

    def _positions(self, length: int) -> np.ndarray:
        if length not in self._pe:
            self._pe[length] = sinusoidal_positions(length, self.model_dim,
                                                    self._dtype)
        return self._pe[length]

    def __call__(self, tokens: Tensor, mask: np.ndarray | None = None) -> Tensor:
        B, L, _ = tokens.shape
        x = self.proj(tokens)
        start = Tensor(np.zeros((B, 1, self.model_dim), dtype=self._dtype)) + self.start
        x = concat([start, x], axis=1)
        x = x + self._positions(L + 1)[None]
        kv_mask = None
        if mask is not None:
            kv_mask = np.concatenate(
                [np.ones((B, 1), dtype=mask.dtype), mask], axis=1)
        for layer in self.layers:
            x = layer(x, kv_mask=kv_mask)
        return self.final_norm(x)[:, 0, :]


class E2ELLM(TurnClassifier):
    architecture = Architecture.E2E_LLM

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        dt = self.dt
        self.encoder = KitTextEncoder(
            config.frontend.text_dim, config.e2e_model_dim, config.e2e_layers,
            config.e2e_heads, config.ffn_multiple, config.dropout, dt)
        self.head_hidden = Linear(config.e2e_model_dim, config.e2e_head_hidden, dt)
        self.head_out = Linear(config.e2e_head_hidden, 2, dt)
        self.drop = Dropout(config.dropout)

    def classify_vector(self, encoded: Tensor) -> Tensor:
        return self.head_out(self.drop(self.head_hidden(encoded).relu()))

    def forward_turn(self, turn, state):
        context_strings = list(reversed(state.buffers.get("formatted", [])))[:4]
        formatted = f"<s> {format_utterance(turn)} </s>"
        for prev in context_strings:
            formatted += f" {prev} </s>"
        feats = self.featurizer.e2e_text(formatted)
        encoded = self.encoder(Tensor(feats[None].astype(self.dt)))
        hidden = self.head_hidden(encoded).relu()
        logits = self.head_out(hidden).data[0]
        state.push("formatted", format_utterance(turn))
        state.turns_seen += 1
        aux = {"after": hidden.data[0],
               "before": self._before_vector(None, feats)}
        return Logits(logits), aux, state

    def make_sample(self, call, index):
        lo = max(0, index - 4)
        context = list(reversed(call.turns[lo:index]))
        formatted = format_e2e_input(call.turns[index], context)
        return {"label": call.turns[index].label, "call_id": call.id,
                "index": index, "tokens": self.featurizer.e2e_text(formatted)}

    def forward_batch(self, samples):
        tokens, mask = _pad_stack([s["tokens"] for s in samples], self.dt)
        encoded = self.encoder(Tensor(tokens), mask=mask)
        return self.classify_vector(encoded)


# ---------------------------------------------------------------------------
# Multimodal transformer (audio + text crossmodal attention)
# ---------------------------------------------------------------------------

class MultAT(TurnClassifier):
    architecture = Architecture.MULT_AT

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        enc = config.encoder
        dt = self.dt
        dim = enc.conv_channels  # model width after conv projection
        conv_cfg = EncoderConfig(**{**enc.__dict__, "conv_layers": 2})
        self.conv_audio = TemporalConvEncoder(config.frontend.audio_dim, conv_cfg, dt)
        self.conv_text = TemporalConvEncoder(config.frontend.text_dim, conv_cfg, dt)
        ffn = config.ffn_multiple * dim
        self.cross_audio = [TransformerLayer(dim, config.crossmodal_heads, ffn,
                                             config.dropout, dt)
                            for _ in range(config.crossmodal_layers)]
        self.cross_text = [TransformerLayer(dim, config.crossmodal_heads, ffn,
                                            config.dropout, dt)
                           for _ in range(config.crossmodal_layers)]
        self.self_audio = [TransformerLayer(dim, config.self_heads, ffn,
                                            config.dropout, dt)
                           for _ in range(config.self_layers)]
        self.self_text = [TransformerLayer(dim, config.self_heads, ffn,
                                           config.dropout, dt)
                          for _ in range(config.self_layers)]
        self.proj1 = Linear(2 * dim, dim, dt)
        self.proj2 = Linear(dim, dim, dt)
        self.classifier = Linear(dim, 2, dt)
        self.drop = Dropout(config.dropout)
        self.model_dim = dim
        self._pe: dict[int, np.ndarray] = {}

    def _positions(self, length: int) -> np.ndarray:
        if length not in self._pe:
            self._pe[length] = sinusoidal_positions(length, self.model_dim, self.dt)
        return self._pe[length]

    def _streams(self, audio: Tensor, text: Tensor,
                 text_mask: np.ndarray | None) -> Tensor:
        a0 = self.conv_audio(audio) + self._positions(audio.shape[1])[None]
        t0 = self.conv_text(text, mask=text_mask) + self._positions(text.shape[1])[None]
        if text_mask is not None:
            t0 = t0 * text_mask[:, :, None]
        xa = a0
        for layer in self.cross_audio:
            xa = layer(xa, keyvalue=t0, kv_mask=text_mask)
        xt = t0
        for layer in self.cross_text:
            xt = layer(xt, keyvalue=a0)
        for layer in self.self_audio:
            xa = layer(xa)
        for layer in self.self_text:
            xt = layer(xt, kv_mask=text_mask)
        pooled_a = xa.mean(axis=1)
        if text_mask is None:
            pooled_t = xt.mean(axis=1)
        else:
            counts = text_mask.sum(axis=1, keepdims=True)
            pooled_t = (xt * text_mask[:, :, None]).sum(axis=1) * (1.0 / counts)
        merged = concat([pooled_a, pooled_t], axis=-1)
        hidden = self.drop(self.proj1(merged).relu())
        return self.drop(self.proj2(hidden).relu())

    def forward_turn(self, turn, state):
        audio_np = self.featurizer.audio(turn)
        text_np = self.featurizer.text(turn)
        audio = Tensor(audio_np[None].astype(self.dt))
        text = Tensor(text_np[None].astype(self.dt))
        penultimate = self._streams(audio, text, None)
        logits = self.classifier(penultimate).data[0]
        state.turns_seen += 1
        aux = {"after": penultimate.data[0],
               "before": self._before_vector(audio_np, text_np)}
        return Logits(logits), aux, state

    def make_sample(self, call, index):
        turn = call.turns[index]
        return {"label": turn.label, "call_id": call.id, "index": index,
                "audio": self.featurizer.audio(turn),
                "text": self.featurizer.text(turn)}

    def forward_batch(self, samples):
        audio = Tensor(np.stack([s["audio"] for s in samples]).astype(self.dt))
        text_np, text_mask = _pad_stack([s["text"] for s in samples], self.dt)
        penultimate = self._streams(audio, Tensor(text_np), text_mask)
        return self.classifier(penultimate)


# ---------------------------------------------------------------------------
# Factory, model card, embedding export
# ---------------------------------------------------------------------------

_ARCHITECTURES = {
    Architecture.MULTCONDB: MultConDB,
    Architecture.TEXT_LSTM: TextLSTM,
    Architecture.E2E_LLM: E2ELLM,
    Architecture.MULT_AT: MultAT,
}


def build_model(config: ModelConfig) -> TurnClassifier:
    return _ARCHITECTURES[config.architecture](config)


def model_card(model: TurnClassifier) -> dict:
    params = model.parameters()
    cfg = model.config
    return {
        "architecture": model.architecture.value,
        "parameter_count": int(sum(p.data.size for p in params.values())),
        "shape_manifest": {k: list(p.data.shape) for k, p in sorted(params.items())},
        "config": {
            "encoder": dict(cfg.encoder.__dict__),
            "frontend": dict(cfg.frontend.__dict__),
            "head_hidden": cfg.head_hidden,
            "e2e_head_hidden": cfg.e2e_head_hidden,
            "e2e_model_dim": cfg.e2e_model_dim,
            "crossmodal_layers": cfg.crossmodal_layers,
            "crossmodal_heads": cfg.crossmodal_heads,
            "self_layers": cfg.self_layers,
            "self_heads": cfg.self_heads,
            "dropout": cfg.dropout,
            "dtype": cfg.dtype,
        },
    }


@dataclass
class ExportRecord:
    call_id: str
    turn_index: int
    speaker: SpeakerTag
    label: Label
    cause: Cause | None
    before: np.ndarray
    after: np.ndarray


def export_fusion_embedding(model: TurnClassifier, calls: list[Call]
                            ) -> list[ExportRecord]:
    """Per turn: the raw input-concatenation embedding ("before") and the
    penultimate pre-classifier activation ("after")."""
    model.eval()
    records = []
    for call in calls:
        state = model.init_state()
        for turn in call.turns:
            before, after, state = model.export_turn(turn, state)
            records.append(ExportRecord(call.id, turn.index, turn.speaker,
                                        turn.label, turn.cause, before, after))
    return records
