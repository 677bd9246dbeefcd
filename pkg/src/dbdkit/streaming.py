"""Online turn-by-turn inference sessions.

A session owns a model reference and per-branch ring buffers capped at the
context window; feeding a call turn by turn produces exactly the bits the
offline per-turn evaluation produces, because both paths run the identical
single-turn forward. Sessions are mutually isolated and strictly sequential;
many sessions may share one read-only model.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .corpus import Call, Label, Turn
from .models import TurnClassifier, TurnState

__all__ = ["SessionState", "TurnVerdict", "LatencySummary", "SequencingError",
           "open_session", "feed_turn", "measure_latency"]

_session_counter = itertools.count()


class SequencingError(RuntimeError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"out-of-order turn: expected index {expected}, got {got}")


@dataclass
class TurnVerdict:
    turn_index: int
    score: float
    label: Label
    latency_ms: float
    stage_ms: dict = field(default_factory=dict)


@dataclass
class SessionState:
    session_id: str
    model: TurnClassifier
    turn_state: TurnState
    turns_seen: int = 0

    @property
    def window(self) -> int:
        return self.turn_state.window

    def buffer_lengths(self) -> dict[str, int]:
        return self.turn_state.buffer_lengths()


@dataclass
class LatencySummary:
    frontend: str
    n_turns: int
    mean_ms: float
    p50_ms: float
    p95_ms: float


def open_session(model: TurnClassifier, window: int | None = None) -> SessionState:
    """Fresh session: empty buffers, zero turns seen. `window` may lower the
    context cap below the model's configured window."""
    model.eval()
    return SessionState(session_id=f"session-{next(_session_counter)}",
                        model=model, turn_state=model.init_state(window))


def feed_turn(session: SessionState, turn: Turn) -> tuple[TurnVerdict, SessionState]:
    """Score one turn using only buffered context; strict in-order feeding."""
    if turn.index != session.turns_seen:
        raise SequencingError(expected=session.turns_seen, got=turn.index)
    t0 = time.perf_counter()
    logits, _, session.turn_state = session.model.forward_turn(
        turn, session.turn_state)
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    session.turns_seen += 1
    verdict = TurnVerdict(turn_index=turn.index, score=logits.score,
                          label=logits.label, latency_ms=elapsed_ms,
                          stage_ms={"forward": elapsed_ms})
    return verdict, session


def measure_latency(model: TurnClassifier, calls: list[Call],
                    window: int | None = None) -> LatencySummary:
    """Wall-clock per-turn latency over fresh sessions, one per call. The
    summary names the frontend so numbers are never compared across feature
    extractors silently."""
    if not calls:
        raise ValueError("measure_latency needs at least one call")
    samples: list[float] = []
    for call in calls:
        session = open_session(model, window)
        for turn in call.turns:
            verdict, session = feed_turn(session, turn)
            samples.append(verdict.latency_ms)
    arr = np.asarray(samples)
    frontend = getattr(model.featurizer.audio_frontend, "name",
                       model.config.frontend.audio_frontend)
    return LatencySummary(frontend=frontend, n_turns=len(samples),
                          mean_ms=float(arr.mean()),
                          p50_ms=float(np.percentile(arr, 50)),
                          p95_ms=float(np.percentile(arr, 95)))
