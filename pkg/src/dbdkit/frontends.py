"""Feature frontends: turns become frame-level audio and token-level text
feature sequences behind one interface.

The synthetic frontends are pure functions of (input, config seed) and are
the default everywhere, including tests: audio frames carry interpretable
energy statistics (windowed RMS, first-difference energy, peak, mean
magnitude) plus a seeded bounded projection, so silence, overlap bursts and
broadband noise injected by the corpus generator stay linearly detectable.
Pretrained encoders plug in as adapters registered by name ("adapter:<id>");
they are never required by the test suite.
"""
from __future__ import annotations

import enum
import hashlib
import math
import re
import threading
from dataclasses import dataclass

import numpy as np

from .corpus import Waveform

__all__ = [
    "Modality", "FeatureSequence", "FrontendConfig", "FrontendError",
    "pad_or_trim", "frame_count", "extract_audio_features",
    "extract_text_features", "tokenize", "SyntheticAudioFrontend",
    "SyntheticTextFrontend", "register_adapter", "get_audio_frontend",
    "get_text_frontend",
]


class Modality(enum.Enum):
    AUDIO = "audio"
    TEXT = "text"


class FrontendError(RuntimeError):
    pass


@dataclass
class FeatureSequence:
    modality: Modality
    data: np.ndarray  # (length, dim)

    def __post_init__(self):
        if self.data.ndim != 2:
            raise FrontendError(f"feature matrix must be 2-D, got {self.data.shape}")
        if self.length < 1 or self.dim < 1:
            raise FrontendError(f"degenerate feature shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise FrontendError("non-finite feature values")

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FrontendConfig:
    audio_dim: int = 64
    text_dim: int = 64
    target_duration_s: float = 15.0
    frame_ms: float = 25.0
    stride_ms: float = 20.0
    sample_rate: int = 16000
    seed: int = 0
    audio_frontend: str = "synthetic"
    text_frontend: str = "synthetic"

    def validate(self) -> None:
        if self.frame_ms <= 0:
            raise FrontendError("frame_ms must be positive")
        if self.stride_ms <= 0:
            raise FrontendError("stride_ms must be positive")
        if self.target_duration_s * 1000.0 < self.frame_ms:
            raise FrontendError("target duration shorter than one frame")
        if self.audio_dim < 1 or self.text_dim < 1:
            raise FrontendError("feature dims must be >= 1")
        if self.sample_rate <= 0:
            raise FrontendError("sample_rate must be positive")


def pad_or_trim(waveform: Waveform | np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    """Fix the sample count to round(target_duration_s * sample_rate).

    Shorter inputs are zero-padded at the tail, longer inputs tail-trimmed,
    preserving the utterance onset. An empty waveform maps to all-zero
    samples of the target length (pure silence).
    """
    if isinstance(waveform, Waveform):
        if waveform.sample_rate != cfg.sample_rate:
            raise FrontendError(
                f"waveform sample rate {waveform.sample_rate} != config "
                f"{cfg.sample_rate}; resampling is out of scope")
        samples = waveform.samples
    else:
        samples = np.asarray(waveform)
    target = int(round(cfg.target_duration_s * cfg.sample_rate))
    out = np.zeros(target, dtype=samples.dtype if samples.size else np.float32)
    take = min(target, len(samples))
    out[:take] = samples[:take]
    return out


def frame_count(cfg: FrontendConfig) -> int:
    """Sliding-window count: 1 + floor((target_ms - frame_ms) / stride_ms)."""
    target_ms = cfg.target_duration_s * 1000.0
    return 1 + int(math.floor((target_ms - cfg.frame_ms) / cfg.stride_ms))


# --------------------------------------------------------------------------
# Tokenization (shared by the synthetic text frontend and its callers)
# --------------------------------------------------------------------------

# <s> and </s> stay atomic; words and single punctuation marks otherwise.
_TOKEN_RE = re.compile(r"</?s>|\w+|[^\w\s]")
EMPTY_SENTINEL = "<empty>"


def tokenize(text: str) -> list[str]:
    tokens = _TOKEN_RE.findall(text)
    return tokens if tokens else [EMPTY_SENTINEL]


# --------------------------------------------------------------------------
# Synthetic frontends
# --------------------------------------------------------------------------

class SyntheticAudioFrontend:
    """Frame-level statistics plus a fixed seeded projection; bounded in
    [-10, 10] and bit-reproducible across processes."""

    name = "synthetic"

    # saturating copies of the base statistics; steep slopes keep the
    # silence/voice/burst/noise contrasts near full scale
    _COMPRESS = np.array([6.0, 10.0, 4.0, 8.0])

    def __init__(self, cfg: FrontendConfig):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        extra = max(0, cfg.audio_dim - 8)
        self._mix = rng.normal(0.0, 1.2, size=(7, extra))
        self._mix_bias = rng.normal(0.0, 0.3, size=extra)

    def extract(self, waveform: Waveform | np.ndarray) -> np.ndarray:
        cfg = self.cfg
        samples = pad_or_trim(waveform, cfg).astype(np.float64)
        n_frames = frame_count(cfg)
        flen = max(1, int(round(cfg.frame_ms / 1000.0 * cfg.sample_rate)))
        stride = max(1, int(round(cfg.stride_ms / 1000.0 * cfg.sample_rate)))
        need = (n_frames - 1) * stride + flen
        if need > len(samples):  # guard odd sample rates where ms*sr rounds up
            samples = np.concatenate([samples, np.zeros(need - len(samples))])
        windows = np.lib.stride_tricks.sliding_window_view(samples, flen)[::stride]
        windows = windows[:n_frames]
        rms = np.sqrt(np.mean(windows ** 2, axis=1))
        diff_energy = np.mean(np.abs(np.diff(windows, axis=1)), axis=1)
        peak = np.abs(windows).max(axis=1)
        mean_abs = np.mean(np.abs(windows), axis=1)
        base = np.stack([rms, diff_energy, peak, mean_abs], axis=1)
        compressed = np.tanh(base * self._COMPRESS)
        stats = np.concatenate([base, compressed], axis=1)
        if cfg.audio_dim <= 8:
            return stats[:, :cfg.audio_dim]
        idx = np.arange(n_frames, dtype=np.float64)
        drivers = np.concatenate([
            base, np.sin(idx / 16.0)[:, None], np.cos(idx / 16.0)[:, None],
            np.ones((n_frames, 1))], axis=1)
        extra = np.tanh(drivers @ self._mix + self._mix_bias)
        return np.concatenate([stats, extra], axis=1)

    def __call__(self, waveform) -> np.ndarray:
        return self.extract(waveform)


class SyntheticTextFrontend:
    """One deterministic hash-seeded embedding per token."""

    name = "synthetic"

    def __init__(self, cfg: FrontendConfig):
        cfg.validate()
        self.cfg = cfg
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(
                token.encode("utf-8"),
                key=str(self.cfg.seed).encode("utf-8"),
                digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.uniform(-1.0, 1.0, size=self.cfg.text_dim)
            self._cache[token] = vec
        return vec

    def extract(self, text: str) -> np.ndarray:
        return np.stack([self._vector(tok) for tok in tokenize(text)], axis=0)

    def __call__(self, text: str) -> np.ndarray:
        return self.extract(text)


# --------------------------------------------------------------------------
# Adapter registry for pretrained encoders
# --------------------------------------------------------------------------

_ADAPTERS: dict[str, object] = {}
_ADAPTER_LOCK = threading.Lock()


def register_adapter(adapter_id: str, factory) -> None:
    """Register `factory(cfg) -> callable` under "adapter:<id>"."""
    _ADAPTERS[adapter_id] = factory


class _SerializedAdapter:
    """Adapters are serialized by default; they must opt in to concurrency
    by documenting their own thread-safety and registering a raw callable."""

    def __init__(self, name: str, inner, expected_dim: int,
                 expected_len: int | None):
        self.name = name
        self._inner = inner
        self._dim = expected_dim
        self._len = expected_len

    def extract(self, payload) -> np.ndarray:
        with _ADAPTER_LOCK:
            try:
                out = np.asarray(self._inner(payload))
            except Exception as exc:
                raise FrontendError(
                    f"adapter {self.name!r} failed on frames "
                    f"[0, {self._len or 'L'}): {exc}") from exc
        if out.ndim != 2 or out.shape[1] != self._dim:
            raise FrontendError(
                f"adapter {self.name!r} returned shape {out.shape}, expected "
                f"(*, {self._dim})")
        if self._len is not None and out.shape[0] != self._len:
            raise FrontendError(
                f"adapter {self.name!r} returned {out.shape[0]} frames for "
                f"frame range [0, {self._len})")
        return out

    def __call__(self, payload) -> np.ndarray:
        return self.extract(payload)


def _resolve(selector: str, cfg: FrontendConfig, modality: Modality):
    if selector == "synthetic":
        return (SyntheticAudioFrontend(cfg) if modality is Modality.AUDIO
                else SyntheticTextFrontend(cfg))
    if selector.startswith("adapter:"):
        adapter_id = selector.split(":", 1)[1]
        if adapter_id not in _ADAPTERS:
            raise FrontendError(f"no adapter registered under {adapter_id!r}")
        inner = _ADAPTERS[adapter_id](cfg)
        dim = cfg.audio_dim if modality is Modality.AUDIO else cfg.text_dim
        length = frame_count(cfg) if modality is Modality.AUDIO else None
        return _SerializedAdapter(selector, inner, dim, length)
    raise FrontendError(f"unknown frontend selector {selector!r}")


def get_audio_frontend(cfg: FrontendConfig):
    return _resolve(cfg.audio_frontend, cfg, Modality.AUDIO)


def get_text_frontend(cfg: FrontendConfig):
    return _resolve(cfg.text_frontend, cfg, Modality.TEXT)


def extract_audio_features(waveform: Waveform | np.ndarray, cfg: FrontendConfig,
                           frontend=None) -> FeatureSequence:
    frontend = frontend if frontend is not None else get_audio_frontend(cfg)
    data = frontend.extract(waveform)
    seq = FeatureSequence(Modality.AUDIO, np.asarray(data))
    if seq.length != frame_count(cfg):
        raise FrontendError(
            f"audio frontend produced {seq.length} frames, expected {frame_count(cfg)}")
    if seq.dim != cfg.audio_dim:
        raise FrontendError(f"audio frontend dim {seq.dim} != {cfg.audio_dim}")
    return seq


def extract_text_features(text: str, cfg: FrontendConfig,
                          frontend=None) -> FeatureSequence:
    frontend = frontend if frontend is not None else get_text_frontend(cfg)
    data = frontend.extract(text)
    seq = FeatureSequence(Modality.TEXT, np.asarray(data))
    if seq.dim != cfg.text_dim:
        raise FrontendError(f"text frontend dim {seq.dim} != {cfg.text_dim}")
    return seq
