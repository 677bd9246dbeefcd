"""Run configuration: one structured JSON file driving every command.

Sections mirror the library dataclasses (corpus, frontend, encoder, model,
training, split, evaluation, streaming, icl, paths). Unknown keys are
rejected; validation reports every offending key at once. A canonical hash
of the resolved config is recorded into every output artifact so any
artifact is reproducible from its config hash plus seeds.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import (
    AudioSpec, Cause, CorpusSpec, SignalChannel, TurnsPerCall,
)
from .encoders import EncoderConfig
from .frontends import FrontendConfig
from .models import Architecture, ModelConfig
from .training import ClassWeighting, TrainConfig

CONFIG_SCHEMA_VERSION = "v1"

__all__ = ["ConfigError", "RunConfig", "SplitOptions", "EvalOptions",
           "StreamOptions", "ICLOptions", "PathOptions", "parse_run_config",
           "load_run_config", "config_hash", "canonical_dict",
           "CONFIG_SCHEMA_VERSION"]


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(f"  - {e}" for e in errors))


@dataclass(frozen=True)
class SplitOptions:
    ratios: tuple = (0.7, 0.2, 0.1)
    seed: int = 0


@dataclass(frozen=True)
class EvalOptions:
    bootstrap_resamples: int = 1000
    bootstrap_seed: int = 0
    split: str = "test"  # train | validation | test | all


@dataclass(frozen=True)
class StreamOptions:
    window: int | None = None


@dataclass(frozen=True)
class ICLOptions:
    n_examples: tuple = (0, 1, 2, 4)
    budget_tokens: int = 32000
    seeds: tuple = tuple(range(11))
    client: str = "oracle"  # oracle | refusing


@dataclass(frozen=True)
class PathOptions:
    corpus: str | None = None
    out_root: str = "runs"
    checkpoint: str | None = None


@dataclass(frozen=True)
class RunConfig:
    corpus: CorpusSpec = CorpusSpec(n_calls=20)
    frontend: FrontendConfig = FrontendConfig()
    encoder: EncoderConfig = EncoderConfig()
    architecture: Architecture = Architecture.MULTCONDB
    model_extras: dict = field(default_factory=dict)
    training: TrainConfig = TrainConfig()
    split: SplitOptions = SplitOptions()
    evaluation: EvalOptions = EvalOptions()
    streaming: StreamOptions = StreamOptions()
    icl: ICLOptions = ICLOptions()
    paths: PathOptions = PathOptions()

    def model_config(self) -> ModelConfig:
        return ModelConfig(architecture=self.architecture,
                           encoder=self.encoder, frontend=self.frontend,
                           **self.model_extras)


def _parse_section(raw: dict, path: str, fields: dict, errors: list[str]) -> dict:
    out = {}
    if not isinstance(raw, dict):
        errors.append(f"{path}: expected an object")
        return out
    for key, value in raw.items():
        if key not in fields:
            errors.append(f"{path}.{key}: unknown key")
            continue
        try:
            out[key] = fields[key](value)
        except (ValueError, TypeError, KeyError) as exc:
            errors.append(f"{path}.{key}: {exc}")
    return out


def _enum_by_value(enum_cls):
    def parse(v):
        return enum_cls(v)
    return parse


_MODEL_EXTRA_FIELDS = {
    "head_hidden": int, "e2e_head_hidden": int, "e2e_model_dim": int,
    "e2e_layers": int, "e2e_heads": int, "crossmodal_layers": int,
    "crossmodal_heads": int, "self_layers": int, "self_heads": int,
    "ffn_multiple": int, "dropout": float, "dtype": str,
}


def parse_run_config(raw: dict) -> RunConfig:
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected an object"])
    version = raw.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        errors.append(f"schema_version: expected {CONFIG_SCHEMA_VERSION!r}, "
                      f"got {version!r}")
    known_sections = {"schema_version", "corpus", "frontend", "encoder",
                      "model", "training", "split", "evaluation", "streaming",
                      "icl", "paths"}
    for key in raw:
        if key not in known_sections:
            errors.append(f"{key}: unknown section")

    corpus_kwargs = _parse_section(raw.get("corpus", {}), "corpus", {
        "n_calls": int,
        "turns_per_call": lambda v: TurnsPerCall(float(v["mean"]), float(v["stdev"])),
        "breakdown_rate": float,
        "cause_mix": lambda v: {Cause(k): float(w) for k, w in v.items()},
        "audio": lambda v: AudioSpec(**{k: (int(x) if k == "sample_rate" else float(x))
                                        for k, x in v.items()}),
        "signal_channels": lambda v: frozenset(SignalChannel(c) for c in v),
        "seed": int,
        "max_breakdowns_per_call": int,
        "period_tag": str,
    }, errors)

    frontend_kwargs = _parse_section(raw.get("frontend", {}), "frontend", {
        "audio_dim": int, "text_dim": int, "target_duration_s": float,
        "frame_ms": float, "stride_ms": float, "sample_rate": int,
        "seed": int, "audio_frontend": str, "text_frontend": str,
    }, errors)

    encoder_kwargs = _parse_section(raw.get("encoder", {}), "encoder", {
        "conv_channels": int, "conv_kernel": int, "conv_layers": int,
        "hidden_dim": int, "context_window": int, "attention_dim": int,
        "dropout": float,
    }, errors)

    model_section = dict(raw.get("model", {}))
    architecture = Architecture.MULTCONDB
    if "architecture" in model_section:
        try:
            architecture = Architecture(model_section.pop("architecture"))
        except ValueError as exc:
            errors.append(f"model.architecture: {exc}")
    model_extras = _parse_section(model_section, "model", _MODEL_EXTRA_FIELDS, errors)

    training_kwargs = _parse_section(raw.get("training", {}), "training", {
        "batch_size": int, "max_epochs": int, "patience": int,
        "seeds": lambda v: tuple(int(s) for s in v),
        "learning_rate": float,
        "class_weighting": _enum_by_value(ClassWeighting),
        "selection_metric": str,
    }, errors)

    split_kwargs = _parse_section(raw.get("split", {}), "split", {
        "ratios": lambda v: tuple(float(r) for r in v),
        "seed": int,
    }, errors)

    eval_kwargs = _parse_section(raw.get("evaluation", {}), "evaluation", {
        "bootstrap_resamples": int, "bootstrap_seed": int, "split": str,
    }, errors)

    stream_kwargs = _parse_section(raw.get("streaming", {}), "streaming", {
        "window": lambda v: None if v is None else int(v),
    }, errors)

    icl_kwargs = _parse_section(raw.get("icl", {}), "icl", {
        "n_examples": lambda v: tuple(int(n) for n in v),
        "budget_tokens": int,
        "seeds": lambda v: tuple(int(s) for s in v),
        "client": str,
    }, errors)

    path_kwargs = _parse_section(raw.get("paths", {}), "paths", {
        "corpus": lambda v: None if v is None else str(v),
        "out_root": str,
        "checkpoint": lambda v: None if v is None else str(v),
    }, errors)

    if errors:
        raise ConfigError(errors)

    config = RunConfig(
        corpus=CorpusSpec(**{"n_calls": 20, **corpus_kwargs}),
        frontend=FrontendConfig(**frontend_kwargs),
        encoder=EncoderConfig(**encoder_kwargs),
        architecture=architecture,
        model_extras=model_extras,
        training=TrainConfig(**training_kwargs),
        split=SplitOptions(**split_kwargs),
        evaluation=EvalOptions(**eval_kwargs),
        streaming=StreamOptions(**stream_kwargs),
        icl=ICLOptions(**icl_kwargs),
        paths=PathOptions(**path_kwargs),
    )
    # dataclass-level invariants, reported with their section prefix
    post: list[str] = []
    for section, check in (("corpus", config.corpus.validate),
                           ("frontend", config.frontend.validate),
                           ("encoder", config.encoder.validate),
                           ("training", config.training.validate)):
        try:
            check()
        except Exception as exc:
            post.append(f"{section}: {exc}")
    if config.evaluation.split not in ("train", "validation", "test", "all"):
        post.append(f"evaluation.split: unknown split {config.evaluation.split!r}")
    if config.icl.client not in ("oracle", "refusing"):
        post.append(f"icl.client: unknown client {config.icl.client!r}")
    if post:
        raise ConfigError(post)
    return config


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    return parse_run_config(raw)


def canonical_dict(config: RunConfig) -> dict:
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "corpus": {
            "n_calls": config.corpus.n_calls,
            "turns_per_call": {"mean": config.corpus.turns_per_call.mean,
                               "stdev": config.corpus.turns_per_call.stdev},
            "breakdown_rate": config.corpus.breakdown_rate,
            "cause_mix": {c.value: w for c, w in sorted(
                config.corpus.cause_mix.items(), key=lambda kv: kv[0].value)},
            "audio": dict(config.corpus.audio.__dict__),
            "signal_channels": sorted(c.value for c in config.corpus.signal_channels),
            "seed": config.corpus.seed,
            "max_breakdowns_per_call": config.corpus.max_breakdowns_per_call,
            "period_tag": config.corpus.period_tag,
        },
        "frontend": dict(config.frontend.__dict__),
        "encoder": dict(config.encoder.__dict__),
        "model": {"architecture": config.architecture.value,
                  **{k: config.model_extras[k] for k in sorted(config.model_extras)}},
        "training": {
            "batch_size": config.training.batch_size,
            "max_epochs": config.training.max_epochs,
            "patience": config.training.patience,
            "seeds": list(config.training.seeds),
            "learning_rate": config.training.learning_rate,
            "class_weighting": config.training.class_weighting.value,
            "selection_metric": config.training.selection_metric,
        },
        "split": {"ratios": list(config.split.ratios), "seed": config.split.seed},
        "evaluation": dict(config.evaluation.__dict__),
        "streaming": dict(config.streaming.__dict__),
        "icl": {"n_examples": list(config.icl.n_examples),
                "budget_tokens": config.icl.budget_tokens,
                "seeds": list(config.icl.seeds),
                "client": config.icl.client},
        "paths": dict(config.paths.__dict__),
    }


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(canonical_dict(config), sort_keys=True,
                         separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]
