"""In-context-learning harness: prompt construction under a token budget,
seeded example sampling, answer parsing, and percentile F1 reporting against
a pluggable completion client.

No vendor SDK ships with the kit; any object with
`complete(prompt: str, config: LLMClientConfig) -> str` plugs in. Mock
clients cover the harness's own contract (a perfect oracle, a refuser, and
a scripted client).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .corpus import Call, Label
from .evaluation import compute_prf
from .models import Prediction

__all__ = [
    "PROMPT_PREAMBLE_VERSION", "LLMClientConfig", "PromptBundle",
    "PromptBudgetError", "format_call_for_prompt", "gold_breakdown_turn",
    "approx_token_count", "build_prompt", "parse_answer", "evaluate_icl",
    "ICLReportRow", "OracleClient", "RefusingClient", "ScriptedClient",
]

PROMPT_PREAMBLE_VERSION = "v1"

# The fixed instruction block: task description, format explanation, a worked
# example, and the question. Kept verbatim as a versioned text asset.
_PREAMBLE = """\
Given a conversation between an AI agent and a user, find a dialogue breakdown turn which may need a human intervention.

The conversation is in the following format "(turn number)[AI Agent]: what the AI Agent said|(turn number)[User]: what the user said".
Return which turn needs human intervention due to dialogue breakdown.
For example, from the conversation input "(1)[User]: How are you today|(2)[AI Agent]:I want to eat ice cream", you can return 2 because the second turn was off-the-topic.

Which turn do you think may cause a dialogue breakdown so it may need some human intervention from the following conversation?
"""

_EXAMPLES_HEADER = "Here are some real phone call conversation examples:"
_TEST_HEADER = "Now, provide your answer from this conversation:"


class PromptBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class LLMClientConfig:
    temperature: float = 0.0
    top_p: float = 1.0
    top_k: int = 40
    candidate_count: int = 1
    max_output_tokens: int = 8000


@dataclass
class PromptBundle:
    prompt_text: str
    included_example_count: int
    token_estimate: int
    test_call_id: str


def format_call_for_prompt(call: Call) -> str:
    """Turns joined by "|", 1-based numbering, bracketed speaker names."""
    return "|".join(f"({t.index + 1})[{t.speaker.value}]: {t.text}"
                    for t in call.turns)


def gold_breakdown_turn(call: Call) -> int | None:
    """1-based index of the first breakdown turn, None if the call has none."""
    for t in call.turns:
        if t.label is Label.BREAKDOWN:
            return t.index + 1
    return None


def approx_token_count(text: str, chars_per_token: int = 4) -> int:
    """ceil(characters / divisor): a vendor-free estimate, divisor configurable."""
    return math.ceil(len(text) / chars_per_token)


def _render(examples: list[tuple[Call, int | None]], test_call: Call) -> str:
    blocks = [_PREAMBLE, _EXAMPLES_HEADER, ""]
    for call, answer in examples:
        blocks.append(format_call_for_prompt(call))
        blocks.append(f"Answer: {answer if answer is not None else 'none'}")
        blocks.append("")
    blocks.append(_TEST_HEADER)
    blocks.append("")
    blocks.append(format_call_for_prompt(test_call))
    return "\n".join(blocks)


def build_prompt(examples: list[tuple[Call, int | None]], test_call: Call,
                 budget_tokens: int = 32000, n_requested: int | None = None
                 ) -> PromptBundle:
    """Pack up to `n_requested` worked examples ahead of the test call,
    greedily dropping trailing examples until the token estimate fits the
    budget. Deterministic; errors if even the zero-example prompt overruns."""
    if n_requested is None:
        n_requested = len(examples)
    if n_requested < 0:
        raise ValueError("n_requested must be >= 0")
    chosen = list(examples[:n_requested])
    while True:
        text = _render(chosen, test_call)
        estimate = approx_token_count(text)
        if estimate <= budget_tokens:
            return PromptBundle(prompt_text=text,
                                included_example_count=len(chosen),
                                token_estimate=estimate,
                                test_call_id=test_call.id)
        if not chosen:
            raise PromptBudgetError(
                f"prompt for call {test_call.id} needs ~{estimate} tokens with "
                f"no examples; budget is {budget_tokens}")
        chosen.pop()


_INT_RE = re.compile(r"-?\d+")


def parse_answer(response_text: str, call_length: int) -> int | None:
    """First integer in the response if it lies in [1, call_length]; prose
    refusals and out-of-range integers map to None."""
    match = _INT_RE.search(response_text)
    if not match:
        return None
    value = int(match.group())
    return value if 1 <= value <= call_length else None


# ---------------------------------------------------------------------------
# Mock clients
# ---------------------------------------------------------------------------

class OracleClient:
    """Answers the gold turn for whichever call closes the prompt."""

    def __init__(self, answer_by_rendered: dict[str, int | None]):
        self._answers = answer_by_rendered

    @classmethod
    def for_calls(cls, calls: list[Call]) -> "OracleClient":
        return cls({format_call_for_prompt(c): gold_breakdown_turn(c)
                    for c in calls})

    def complete(self, prompt: str, config: LLMClientConfig) -> str:
        tail = prompt.rstrip()
        for rendered, answer in self._answers.items():
            if tail.endswith(rendered):
                if answer is None:
                    return "There is no dialogue breakdown in this conversation."
                return str(answer)
        raise KeyError("prompt does not end with a known call")


class RefusingClient:
    def complete(self, prompt: str, config: LLMClientConfig) -> str:
        return "There is no dialogue breakdown in this conversation."


class ScriptedClient:
    """Returns responses from a per-call mapping (rendered call -> text)."""

    def __init__(self, response_by_rendered: dict[str, str]):
        self._responses = response_by_rendered

    def complete(self, prompt: str, config: LLMClientConfig) -> str:
        tail = prompt.rstrip()
        for rendered, response in self._responses.items():
            if tail.endswith(rendered):
                return response
        raise KeyError("prompt does not end with a known call")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class ICLReportRow:
    n_examples: int
    mean_f1: float
    p25_f1: float
    p75_f1: float
    per_seed_f1: list[float] = field(default_factory=list)
    client_failures: int = 0


def _nearest_rank(sorted_values: list[float], pct: float) -> float:
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


def evaluate_icl(client, train_calls: list[Call], test_calls: list[Call],
                 n_examples: list[int] | int, seeds=tuple(range(11)),
                 budget_tokens: int = 32000,
                 client_config: LLMClientConfig = LLMClientConfig()
                 ) -> list[ICLReportRow]:
    """For each example count: per seed, sample that many train calls as
    in-context examples, prompt the client per test call, mark exactly the
    parsed turn as a breakdown prediction, and score turn-level F1; report
    mean and nearest-rank 25th/75th percentiles across seeds. Client
    failures exclude the affected call and are counted."""
    if isinstance(n_examples, int):
        n_examples = [n_examples]
    rows: list[ICLReportRow] = []
    for n in n_examples:
        if n < 0:
            raise ValueError("n_examples entries must be >= 0")
        per_seed: list[float] = []
        failures = 0
        for seed in seeds:
            rng = np.random.default_rng(seed)
            k = min(n, len(train_calls))
            picked = [train_calls[i] for i in
                      rng.choice(len(train_calls), size=k, replace=False)] if k else []
            examples = [(c, gold_breakdown_turn(c)) for c in picked]
            predictions: list[Prediction] = []
            scored_calls: list[Call] = []
            for call in test_calls:
                bundle = build_prompt(examples, call, budget_tokens, n)
                try:
                    response = client.complete(bundle.prompt_text, client_config)
                except Exception:
                    failures += 1
                    continue
                answer = parse_answer(response, len(call.turns))
                scored_calls.append(call)
                for t in call.turns:
                    hit = answer is not None and t.index == answer - 1
                    predictions.append(Prediction(
                        call.id, t.index, 1.0 if hit else 0.0,
                        Label.BREAKDOWN if hit else Label.NO_BREAKDOWN))
            if scored_calls:
                per_seed.append(compute_prf(predictions, scored_calls).f1)
            else:
                per_seed.append(0.0)
        ordered = sorted(per_seed)
        rows.append(ICLReportRow(
            n_examples=n, mean_f1=float(np.mean(per_seed)),
            p25_f1=_nearest_rank(ordered, 25), p75_f1=_nearest_rank(ordered, 75),
            per_seed_f1=per_seed, client_failures=failures))
    return rows
