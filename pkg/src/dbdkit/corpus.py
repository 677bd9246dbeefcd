"""Call/turn data model, synthetic corpus generation, persistence, formatting.

A corpus is a list of Calls; each Call is an ordered list of Turns carrying
speaker, ASR-style transcript text, an intent label, a waveform, and a binary
breakdown label. The synthetic generator scripts benefit-verification phone
calls from a fixed dialogue flow table and injects exactly one breakdown per
selected call, drawn from three causes:

* SILENCE - the agent turn after a user question is empty/silent.
* INTERRUPTION - the agent fires its next question while the user is mid
  sequence; the agent turn's audio contains an overlapping-voice burst.
* SKIPPED_ACTION - the agent's intent is inconsistent with the required
  follow-up for the preceding user intent (it loops back and re-asks a
  question that was just answered).

`signal_channels` controls through which modality each breakdown is made
detectable:

* TEXT   - the utterance text stream is edited (empty text; truncated
           predecessor plus a barge-in phrase on the agent turn; re-ask
           phrasing).
* STRUCTURE - the intent/turn sequence is edited (a "silence" intent, a
           "_partial" suffix on the interrupted turn, a flow-table
           violation with a re-provide exchange).
* AUDIO  - the waveform is edited (near-zero energy, a mixed-energy
           overlap burst, broadband noise).

Channels that are off stay byte-for-byte clean: an {AUDIO}-only corpus has
fully normal transcripts and intents, a {TEXT, STRUCTURE} corpus has fully
normal waveforms. Note STRUCTURE edits surface in formatted text too (intents
are part of the model input string), so "text-only" detectability corpora
should enable both TEXT and STRUCTURE, and audio-only corpora neither.
"""
from __future__ import annotations

import enum
import json
import math
import wave
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CORPUS_SCHEMA_VERSION = "v1"

__all__ = [
    "SpeakerTag", "Label", "Cause", "SignalChannel", "Waveform", "Turn",
    "Call", "TurnsPerCall", "AudioSpec", "CorpusSpec", "DatasetSplit",
    "CorpusValidationError", "CorpusFormatError", "generate_synthetic_corpus",
    "split_corpus", "save_corpus", "load_corpus", "format_utterance",
    "format_e2e_input", "e2e_context", "validate_call",
]


class SpeakerTag(enum.Enum):
    AI_AGENT = "AI Agent"
    USER = "User"


class Label(enum.Enum):
    NO_BREAKDOWN = "no_breakdown"
    BREAKDOWN = "breakdown"


class Cause(enum.Enum):
    SILENCE = "silence"
    INTERRUPTION = "interruption"
    SKIPPED_ACTION = "skipped_action"


class SignalChannel(enum.Enum):
    TEXT = "text"
    AUDIO = "audio"
    STRUCTURE = "structure"


ALL_CHANNELS = frozenset(SignalChannel)


class CorpusValidationError(ValueError):
    def __init__(self, fieldname: str, message: str):
        self.field = fieldname
        super().__init__(f"{fieldname}: {message}")


class CorpusFormatError(ValueError):
    def __init__(self, line: int, fieldname: str, message: str):
        self.line = line
        self.field = fieldname
        super().__init__(f"line {line}, field {fieldname!r}: {message}")


@dataclass
class Waveform:
    """Mono audio. Samples live on the signed 16-bit grid (k/32767) so the
    WAV round-trip through persistence is exact."""
    samples: np.ndarray
    sample_rate: int

    def __eq__(self, other) -> bool:
        return (isinstance(other, Waveform)
                and self.sample_rate == other.sample_rate
                and self.samples.shape == other.samples.shape
                and np.array_equal(self.samples, other.samples))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def _quantize(samples: np.ndarray) -> np.ndarray:
    clipped = np.clip(samples, -1.0, 1.0)
    return (np.round(clipped * 32767.0) / np.float32(32767.0)).astype(np.float32)


@dataclass
class Turn:
    call_id: str
    index: int
    speaker: SpeakerTag
    text: str
    intent: str
    waveform: Waveform
    label: Label
    cause: Cause | None = None


@dataclass
class Call:
    id: str
    turns: list[Turn]
    period_tag: str = "aug"


@dataclass(frozen=True)
class TurnsPerCall:
    mean: float
    stdev: float


@dataclass(frozen=True)
class AudioSpec:
    sample_rate: int = 16000
    duration_mean_s: float = 2.0
    duration_stdev_s: float = 0.6


@dataclass(frozen=True)
class CorpusSpec:
    n_calls: int
    turns_per_call: TurnsPerCall = TurnsPerCall(30.0, 4.0)
    breakdown_rate: float = 0.5
    cause_mix: dict = field(default_factory=lambda: {
        Cause.SILENCE: 1 / 3, Cause.INTERRUPTION: 1 / 3, Cause.SKIPPED_ACTION: 1 / 3})
    audio: AudioSpec = AudioSpec()
    signal_channels: frozenset = ALL_CHANNELS
    seed: int = 0
    max_breakdowns_per_call: int = 1
    period_tag: str = "aug"

    def validate(self) -> None:
        if self.n_calls < 1:
            raise CorpusValidationError("n_calls", f"must be >= 1, got {self.n_calls}")
        if self.turns_per_call.mean < 8:
            raise CorpusValidationError("turns_per_call.mean", "must be >= 8")
        if self.turns_per_call.stdev < 0:
            raise CorpusValidationError("turns_per_call.stdev", "must be >= 0")
        if not 0.0 <= self.breakdown_rate <= 1.0:
            raise CorpusValidationError(
                "breakdown_rate", f"must be in [0, 1], got {self.breakdown_rate}")
        total = sum(self.cause_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise CorpusValidationError(
                "cause_mix", f"weights must sum to 1 within 1e-9, got {total!r}")
        if any(w < 0 for w in self.cause_mix.values()):
            raise CorpusValidationError("cause_mix", "weights must be nonnegative")
        if not set(self.cause_mix) <= set(Cause):
            raise CorpusValidationError("cause_mix", "keys must be Cause values")
        if self.audio.sample_rate <= 0:
            raise CorpusValidationError("audio.sample_rate", "must be positive")
        if self.audio.duration_mean_s <= 0:
            raise CorpusValidationError("audio.duration_mean_s", "must be positive")
        if not self.signal_channels:
            raise CorpusValidationError("signal_channels", "at least one channel required")
        if not set(self.signal_channels) <= set(SignalChannel):
            raise CorpusValidationError("signal_channels", "unknown channel")
        if self.max_breakdowns_per_call < 1:
            raise CorpusValidationError("max_breakdowns_per_call", "must be >= 1")


@dataclass
class DatasetSplit:
    train: list[Call]
    validation: list[Call]
    test: list[Call]


def validate_call(call: Call) -> None:
    if len(call.turns) < 2:
        raise CorpusValidationError("turns", f"call {call.id} has < 2 turns")
    for i, turn in enumerate(call.turns):
        if turn.index != i:
            raise CorpusValidationError(
                "index", f"call {call.id}: turn {i} carries index {turn.index}")
        if (turn.cause is not None) != (turn.label is Label.BREAKDOWN):
            raise CorpusValidationError(
                "cause", f"call {call.id} turn {i}: cause present iff label is breakdown")


# --------------------------------------------------------------------------
# Input formatting
# --------------------------------------------------------------------------

def format_utterance(turn: Turn) -> str:
    """`speaker: <tag> | utterance: <text> | intent: <intent>`.

    Delimiter characters inside text/intent pass through unescaped; the
    synthetic generator never emits "|" in those fields.
    """
    return (f"speaker: {turn.speaker.value} | utterance: {turn.text} "
            f"| intent: {turn.intent}")


def format_e2e_input(current: Turn, context: list[Turn]) -> str:
    """Start-token framing of the current turn plus up to four previous turns.

    `context` is ordered most recent first. Each element is rendered with
    format_utterance and closed by a separator token.
    """
    parts = [f"<s> {format_utterance(current)} </s>"]
    for prev in context[:4]:
        parts.append(f"{format_utterance(prev)} </s>")
    return " ".join(parts)


def e2e_context(call: Call, index: int) -> list[Turn]:
    """The up-to-four turns preceding `index`, most recent first."""
    lo = max(0, index - 4)
    return list(reversed(call.turns[lo:index]))


# --------------------------------------------------------------------------
# Synthetic dialogue script
# --------------------------------------------------------------------------

_MONTHS = ["january", "march", "april", "june", "july", "september", "november"]
_DRUGS = ["adalimab", "etanercil", "rituxolol", "infliximet", "secukinab",
          "dupilumet", "ustekinol"]
_PLANS = ["commercial", "medicare advantage", "managed medicaid", "exchange"]
_DIGITS = ["zero", "one", "two", "three", "four", "five", "six", "seven",
           "eight", "nine"]

# Each chain item: (topic, ask text, provide prefix, kind)
# kind "seq" marks digit-sequence answers (eligible predecessors for
# interruption breakdowns); they are spread through the chain so breakdown
# anchor positions vary call to call.
_CHAIN = [
    ("member_id", "could you share the member id for the patient", "the member id is", "seq"),
    ("date_of_birth", "what is the date of birth for the member", "the date of birth is", "date"),
    ("group_number", "could you read me the group number", "the group number is", "seq"),
    ("bin_number", "what is the bin number on the card", "the bin number is", "seq"),
    ("medication", "which medication are we verifying today", "the medication is", "drug"),
    ("pcn_number", "could you give me the processor control number", "the processor control number is", "seq"),
    ("plan_type", "is the plan commercial or government sponsored", "it is a", "plan"),
    ("payer_phone", "what is the provider services phone number", "the provider services number is", "seq"),
    ("effective_date", "what is the effective date of the policy", "the policy is effective since", "date"),
    ("authorization_number", "is there an authorization number on file", "the authorization number is", "seq"),
    ("copay", "what is the copay for a thirty day supply", "the copay is", "amount"),
    ("reference_number", "could i get a call reference number for this verification", "the call reference number is", "seq"),
    ("prior_auth", "is a prior authorization required for this medication", "", "yesno"),
    ("claims_address", "where should paper claims be mailed", "claims go to the main office at", "addr"),
    ("deductible", "has the member met the deductible this year", "", "yesno"),
    ("specialty_pharmacy", "is a specialty pharmacy required for dispensing", "", "yesno"),
    ("refill_limit", "how many refills are allowed per authorization", "the allowed refills are", "amount"),
    ("quantity_limit", "is there a quantity limit for this medication", "", "yesno"),
    ("step_therapy", "does the plan require step therapy first", "", "yesno"),
    ("renewal_date", "when does the authorization come up for renewal", "the renewal date is", "date"),
]

_QUESTION_TEXTS = [
    "sorry could you repeat that question",
    "can you confirm which patient you are calling about",
    "may i ask which provider submitted this request",
    "could you speak up a little the line is faint",
]
_ANSWER_TEXTS = [
    "of course let me repeat that for you",
    "sure this is regarding the benefit verification request",
    "certainly the request came from the prescribing clinic",
    "no problem i will say that again more clearly",
]

MAX_PLANNED_TURNS = 2 + 2 * len(_CHAIN) + 6 + 3

# Required agent follow-up for each user intent: the fixed flow table that
# SKIPPED_ACTION breakdowns violate.
FLOW_TABLE = {"greeting_reply": "ask_member_id", "user_question": "provide_answer"}
for _i, (_topic, _, _, _) in enumerate(_CHAIN):
    _next = ("confirm_coverage" if _i + 1 == len(_CHAIN)
             else f"ask_{_CHAIN[_i + 1][0]}")
    FLOW_TABLE[f"provide_{_topic}"] = _next


def _digit_words(rng: np.random.Generator, low: int = 6, high: int = 10) -> list[str]:
    n = int(rng.integers(low, high))
    return [_DIGITS[int(d)] for d in rng.integers(0, 10, size=n)]


def _provide_parts(rng: np.random.Generator, topic: str, prefix: str, kind: str
                   ) -> tuple[str, list[str]]:
    """Returns (prefix words, tail words). Sequence answers keep the digit
    tail separate so interruption truncation can cut inside it."""
    if kind == "seq":
        return prefix, _digit_words(rng)
    if kind == "date":
        day = _DIGITS[int(rng.integers(1, 10))]
        return prefix, [str(rng.choice(_MONTHS)), day, "nineteen",
                        str(rng.choice(["seventy", "eighty", "ninety"]))]
    if kind == "drug":
        return prefix, [str(rng.choice(_DRUGS))]
    if kind == "plan":
        return prefix, [str(rng.choice(_PLANS)), "plan"]
    if kind == "amount":
        return prefix, [_DIGITS[int(rng.integers(1, 10))],
                        str(rng.choice(["dollars", "per month", "per fill"]))]
    if kind == "addr":
        return prefix, [_DIGITS[int(rng.integers(1, 10))],
                        str(rng.choice(["maple", "union", "harbor"])), "street"]
    if kind == "yesno":
        yes = rng.random() < 0.6
        head = "yes" if yes else "no"
        return f"{head} {('it is' if yes else 'it is not')} for {topic.replace('_', ' ')}", []
    raise ValueError(kind)


@dataclass
class _Planned:
    speaker: SpeakerTag
    intent: str
    text: str
    voice_kind: str = "normal"  # normal | silent | burst | noisy
    label: Label = Label.NO_BREAKDOWN
    cause: Cause | None = None
    seq_parts: tuple[str, list[str]] | None = None  # for truncation edits


def _finish(prefix: str, tail: list[str]) -> str:
    words = ([prefix] if prefix else []) + tail
    return " ".join(" ".join(words).split()) + " ."


def _plan_call(rng: np.random.Generator, n_target: int, cause: Cause | None,
               channels: frozenset) -> list[_Planned]:
    text_on = SignalChannel.TEXT in channels
    structure_on = SignalChannel.STRUCTURE in channels
    audio_on = SignalChannel.AUDIO in channels

    n_interludes = max(1, int(round(n_target / 16.0)))
    n_pairs = (n_target - 5 - 2 * n_interludes) // 2
    n_pairs = max(3, min(n_pairs, len(_CHAIN)))
    interlude_at = set(
        int(i) for i in rng.choice(np.arange(1, n_pairs), size=min(n_interludes, n_pairs - 1),
                                   replace=False))

    # Breakdown anchors. SILENCE needs a user question right before, so it
    # lands on an interlude's answer turn; the others land after a scripted
    # provide turn (sequence-type provides for INTERRUPTION).
    silence_pair = interruption_pair = skipped_pair = None
    mid = [k for k in range(1, n_pairs - 1)]
    if cause is Cause.SILENCE:
        silence_pair = int(rng.choice(sorted(interlude_at)))
    elif cause is Cause.INTERRUPTION:
        seq_pairs = [k for k in mid if _CHAIN[k][3] == "seq"] or [0]
        interruption_pair = int(rng.choice(seq_pairs))
    elif cause is Cause.SKIPPED_ACTION:
        skipped_pair = int(rng.choice(mid)) if mid else 1

    turns: list[_Planned] = [
        _Planned(SpeakerTag.AI_AGENT, "greeting",
                 "hello this is the benefits assistant calling to verify coverage"
                 " for a patient prescription ."),
        _Planned(SpeakerTag.USER, "greeting_reply",
                 "hi you have reached the benefits line how can i help you today ."),
    ]

    for k in range(n_pairs):
        topic, ask_text, prefix, kind = _CHAIN[k]
        ask = _Planned(SpeakerTag.AI_AGENT, f"ask_{topic}", ask_text + " .")

        # INTERRUPTION and SKIPPED_ACTION break at the agent turn that
        # follows pair k-1's provide turn, i.e. this ask turn.
        if interruption_pair is not None and k == interruption_pair + 1:
            ask.label, ask.cause = Label.BREAKDOWN, Cause.INTERRUPTION
            if audio_on:
                ask.voice_kind = "burst"
            if text_on:
                # barge-in shows on the agent turn itself too, so models
                # without cross-turn context can see it in the text channel
                ask.text = "pardon me for cutting in " + ask.text
        if skipped_pair is not None and k == skipped_pair + 1:
            prev_topic, prev_ask_text, _, _ = _CHAIN[skipped_pair]
            ask.label, ask.cause = Label.BREAKDOWN, Cause.SKIPPED_ACTION
            if audio_on:
                ask.voice_kind = "noisy"
            if text_on:
                ask.text = "sorry i need to ask that again " + prev_ask_text + " ."
            if structure_on:
                ask.intent = f"ask_{prev_topic}"
                if not text_on:
                    ask.text = prev_ask_text + " ."
        turns.append(ask)

        if skipped_pair is not None and k == skipped_pair + 1 and structure_on:
            # The user re-provides the looped-back answer, then the script
            # resumes; every transition except the breakdown one stays clean.
            prev_topic, _, prev_prefix, prev_kind = _CHAIN[skipped_pair]
            pfx, tail = _provide_parts(rng, prev_topic, prev_prefix, prev_kind)
            turns.append(_Planned(SpeakerTag.USER, f"provide_{prev_topic}",
                                  _finish("as i said " + pfx, tail)))
            turns.append(_Planned(SpeakerTag.AI_AGENT, f"ask_{topic}", ask_text + " ."))

        if k in interlude_at:
            q_i = int(rng.integers(0, len(_QUESTION_TEXTS)))
            turns.append(_Planned(SpeakerTag.USER, "user_question",
                                  _QUESTION_TEXTS[q_i] + " ."))
            answer = _Planned(SpeakerTag.AI_AGENT, "provide_answer",
                              _ANSWER_TEXTS[int(rng.integers(0, len(_ANSWER_TEXTS)))] + " .")
            if silence_pair is not None and k == silence_pair:
                answer.label, answer.cause = Label.BREAKDOWN, Cause.SILENCE
                if audio_on:
                    answer.voice_kind = "silent"
                if text_on:
                    answer.text = ""
                if structure_on:
                    answer.intent = "silence"
            turns.append(answer)

        pfx, tail = _provide_parts(rng, topic, prefix, kind)
        provide = _Planned(SpeakerTag.USER, f"provide_{topic}",
                           _finish(pfx, tail), seq_parts=(pfx, tail))
        if interruption_pair is not None and k == interruption_pair:
            if text_on and tail:
                cut = int(rng.integers(1, max(2, len(tail))))
                provide.text = " ".join(([pfx] if pfx else []) + tail[:cut])
            if structure_on:
                provide.intent = f"provide_{topic}_partial"
        turns.append(provide)

    turns.append(_Planned(SpeakerTag.AI_AGENT, "confirm_coverage",
                          "thank you i have confirmed the coverage details for"
                          " this medication ."))
    turns.append(_Planned(SpeakerTag.USER, "acknowledge",
                          "you are welcome glad that is sorted ."))
    turns.append(_Planned(SpeakerTag.AI_AGENT, "goodbye",
                          "thanks again for your help have a nice day ."))
    return turns


def _synth_voice(rng: np.random.Generator, n: int, sr: int,
                 speaker: SpeakerTag, kind: str) -> np.ndarray:
    """Speech proxy: a few harmonics under a syllabic envelope. Breakdown
    kinds reshape energy in ways the synthetic audio frontend exposes."""
    if kind == "silent":
        return _quantize(0.0008 * rng.standard_normal(n))
    t = np.arange(n) / sr

    def voice(base_lo: float, base_hi: float, amp: float,
              flat: bool = False) -> np.ndarray:
        f0 = rng.uniform(base_lo, base_hi)
        phases = rng.uniform(0, 2 * math.pi, size=4)
        sig = (np.sin(2 * math.pi * f0 * t + phases[0])
               + 0.45 * np.sin(2 * math.pi * 2.1 * f0 * t + phases[1])
               + 0.22 * np.sin(2 * math.pi * 3.2 * f0 * t + phases[2]))
        if flat:
            syllab = 1.0
        else:
            syllab = 0.55 + 0.45 * np.sin(2 * math.pi * rng.uniform(2.0, 4.5) * t
                                          + phases[3])
        edge = min(n, max(1, int(0.04 * sr)))
        ramp = np.ones(n)
        ramp[:edge] = np.linspace(0.0, 1.0, edge)
        ramp[-edge:] = np.linspace(1.0, 0.0, edge)
        return amp * (sig / 1.67) * syllab * ramp

    base = ((105.0, 150.0) if speaker is SpeakerTag.USER else (160.0, 215.0))
    amp = rng.uniform(0.20, 0.28)
    x = voice(*base, amp) + 0.004 * rng.standard_normal(n)
    if kind == "burst":
        # second-voice overlap: a flat-envelope burst so the extra energy is
        # present throughout the overlap region regardless of turn length
        other = ((160.0, 215.0) if speaker is SpeakerTag.USER else (105.0, 150.0))
        lo = int(0.30 * n)
        hi = max(lo + 1, int(0.75 * n))
        overlap = voice(*other, rng.uniform(0.72, 0.88), flat=True)
        x[lo:hi] += overlap[lo:hi]
    elif kind == "noisy":
        x = x + rng.uniform(0.28, 0.36) * rng.standard_normal(n)
    return _quantize(x)


def generate_synthetic_corpus(spec: CorpusSpec) -> list[Call]:
    """Deterministic labeled corpus per `spec`; see the module docstring for
    how causes manifest through the requested signal channels."""
    spec.validate()
    causes = sorted(spec.cause_mix, key=lambda c: c.value)
    weights = np.array([spec.cause_mix[c] for c in causes], dtype=float)
    weights = weights / weights.sum()
    calls: list[Call] = []
    for ci in range(spec.n_calls):
        rng = np.random.default_rng([spec.seed & 0xFFFFFFFF, ci])
        n_target = int(np.clip(round(rng.normal(spec.turns_per_call.mean,
                                                spec.turns_per_call.stdev)),
                               8, MAX_PLANNED_TURNS))
        n_breakdowns = 0
        if rng.random() < spec.breakdown_rate:
            n_breakdowns = (1 if spec.max_breakdowns_per_call == 1 else
                            int(rng.integers(1, spec.max_breakdowns_per_call + 1)))
        cause = Cause(str(rng.choice([c.value for c in causes], p=weights))) \
            if n_breakdowns else None

        call_id = f"{spec.period_tag}-{ci:05d}"
        if n_breakdowns <= 1:
            planned = _plan_call(rng, n_target, cause, spec.signal_channels)
        else:
            # Multi-breakdown calls: concatenate independently planned halves.
            per = max(8, n_target // n_breakdowns)
            planned = []
            for b in range(n_breakdowns):
                c_b = Cause(str(rng.choice([c.value for c in causes], p=weights)))
                planned.extend(_plan_call(rng, per, c_b, spec.signal_channels))

        turns: list[Turn] = []
        for idx, p in enumerate(planned):
            dur = max(0.3, rng.normal(spec.audio.duration_mean_s,
                                      spec.audio.duration_stdev_s))
            n_samples = max(1, int(round(dur * spec.audio.sample_rate)))
            samples = _synth_voice(rng, n_samples, spec.audio.sample_rate,
                                   p.speaker, p.voice_kind)
            turns.append(Turn(
                call_id=call_id, index=idx, speaker=p.speaker, text=p.text,
                intent=p.intent,
                waveform=Waveform(samples, spec.audio.sample_rate),
                label=p.label, cause=p.cause))
        call = Call(id=call_id, turns=turns, period_tag=spec.period_tag)
        validate_call(call)
        calls.append(call)
    return calls


# --------------------------------------------------------------------------
# Splitting
# --------------------------------------------------------------------------

def split_corpus(calls: list[Call], ratios: tuple[float, float, float] = (0.7, 0.2, 0.1),
                 seed: int = 0) -> DatasetSplit:
    """Call-level split into train/validation/test.

    Sizing convention: train and validation take the floor of their ratio
    shares and test absorbs the remainder. Assignment is a seeded permutation
    of whole calls; turns never cross splits.
    """
    if len(ratios) != 3:
        raise CorpusValidationError("ratios", "expected (train, validation, test)")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusValidationError(
            "ratios", f"must sum to 1 within 1e-9, got {sum(ratios)!r}")
    if any(r < 0 for r in ratios):
        raise CorpusValidationError("ratios", "must be nonnegative")
    n = len(calls)
    if n < 10:
        raise CorpusValidationError("calls", f"need at least 10 calls, got {n}")
    n_train = int(math.floor(n * ratios[0]))
    n_val = int(math.floor(n * ratios[1]))
    perm = np.random.default_rng(seed).permutation(n)
    order = [calls[i] for i in perm]
    return DatasetSplit(train=order[:n_train],
                        validation=order[n_train:n_train + n_val],
                        test=order[n_train + n_val:])


# --------------------------------------------------------------------------
# Persistence: one call per line, WAV sidecars
# --------------------------------------------------------------------------

def _wav_dir_name(path: Path) -> str:
    return path.stem + "_wav"


def _write_wav(path: Path, wf: Waveform) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    ints = np.round(np.clip(wf.samples, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(wf.sample_rate)
        handle.writeframes(ints.tobytes())


def _read_wav(path: Path) -> Waveform:
    with wave.open(str(path), "rb") as handle:
        sr = handle.getframerate()
        raw = handle.readframes(handle.getnframes())
    ints = np.frombuffer(raw, dtype="<i2")
    return Waveform((ints / np.float32(32767.0)).astype(np.float32), sr)


def save_corpus(calls: list[Call], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wav_dir = _wav_dir_name(path)
    lines = []
    for call in calls:
        rec_turns = []
        for turn in call.turns:
            rel = f"{wav_dir}/{call.id}/{turn.index:04d}.wav"
            _write_wav(path.parent / rel, turn.waveform)
            rec_turns.append({
                "index": turn.index,
                "speaker": turn.speaker.value,
                "text": turn.text,
                "intent": turn.intent,
                "label": turn.label.value,
                "cause": turn.cause.value if turn.cause else None,
                "sample_rate": turn.waveform.sample_rate,
                "audio": rel,
            })
        lines.append(json.dumps(
            {"schema": CORPUS_SCHEMA_VERSION, "id": call.id,
             "period_tag": call.period_tag, "turns": rec_turns},
            ensure_ascii=False, sort_keys=True))
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


_REQUIRED_TURN_FIELDS = ("index", "speaker", "text", "intent", "label",
                         "sample_rate", "audio")


def load_corpus(path: str | Path) -> list[Call]:
    path = Path(path)
    if not path.exists():
        raise CorpusFormatError(0, "path", f"no corpus file at {path}")
    calls: list[Call] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(lineno, "record", f"invalid JSON: {exc}") from exc
            if record.get("schema") != CORPUS_SCHEMA_VERSION:
                raise CorpusFormatError(lineno, "schema",
                                        f"expected {CORPUS_SCHEMA_VERSION!r}")
            for key in ("id", "turns"):
                if key not in record:
                    raise CorpusFormatError(lineno, key, "missing")
            turns = []
            for ti, rec in enumerate(record["turns"]):
                for key in _REQUIRED_TURN_FIELDS:
                    if key not in rec:
                        raise CorpusFormatError(lineno, key, f"missing in turn {ti}")
                try:
                    speaker = SpeakerTag(rec["speaker"])
                except ValueError as exc:
                    raise CorpusFormatError(lineno, "speaker",
                                            f"unknown tag {rec['speaker']!r}") from exc
                try:
                    label = Label(rec["label"])
                except ValueError as exc:
                    raise CorpusFormatError(lineno, "label",
                                            f"unknown label {rec['label']!r}") from exc
                cause = None
                if rec.get("cause") is not None:
                    try:
                        cause = Cause(rec["cause"])
                    except ValueError as exc:
                        raise CorpusFormatError(lineno, "cause",
                                                f"unknown cause {rec['cause']!r}") from exc
                wav_path = path.parent / rec["audio"]
                if not wav_path.exists():
                    raise CorpusFormatError(lineno, "audio", f"missing file {wav_path}")
                wf = _read_wav(wav_path)
                if wf.sample_rate != rec["sample_rate"]:
                    raise CorpusFormatError(
                        lineno, "sample_rate",
                        f"record says {rec['sample_rate']}, wav says {wf.sample_rate}")
                turns.append(Turn(call_id=record["id"], index=rec["index"],
                                  speaker=speaker, text=rec["text"],
                                  intent=rec["intent"], waveform=wf,
                                  label=label, cause=cause))
            calls.append(Call(id=record["id"], turns=turns,
                              period_tag=record.get("period_tag", "")))
    return calls
