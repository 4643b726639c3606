"""Selective retrieval over the dialogue history.

Given the history so far and the current question, retrieval produces the
subset of past QA turns worth re-reading plus a text-only flag ``delta``:
when ``delta`` is 1 the question is about the conversation itself and the
visual context should be dropped entirely.

Provider replies are restricted to the grammar

    delta=<0|1>;selected=<id(,id)*>          (selected may be empty)

which ``parse_constrained`` enforces; the offline fallback ranks history
items by term-frequency cosine overlap instead of calling any model.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ProviderError, RetrievalParseError
from .providers import Retriever
from .text import tf_cosine, tokenize

logger = logging.getLogger(__name__)

DEFAULT_OVERLAP_THRESHOLD = 0.3

#: Overlap a history item must exceed before a recall cue can set delta=1.
DELTA_OVERLAP = 0.8

#: Phrases that mark a question as being about the dialogue itself.
RECALL_CUES = ("what did i ask", "how did you respond", "you said")


@dataclass(frozen=True)
class HistoryItem:
    """One past turn: the question, the answer it got, and when it was asked."""

    qa_id: int
    question: str
    answer: str
    ask_time: float


@dataclass(frozen=True)
class DialogueHistory:
    items: tuple[HistoryItem, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        ids = [i.qa_id for i in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("dialogue history repeats a qa_id")
        times = [i.ask_time for i in self.items]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("dialogue history ask times must be non-decreasing")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def ids(self) -> frozenset[int]:
        return frozenset(i.qa_id for i in self.items)

    def extended(self, item: HistoryItem) -> "DialogueHistory":
        return DialogueHistory(self.items + (item,))


@dataclass(frozen=True)
class RetrievalOutput:
    selected_ids: frozenset[int]
    delta: int

    def __post_init__(self):
        object.__setattr__(self, "selected_ids", frozenset(int(i) for i in self.selected_ids))
        if self.delta not in (0, 1):
            raise ValueError(f"delta must be 0 or 1, got {self.delta}")


_GRAMMAR = re.compile(
    r"\s*delta\s*=\s*([01])\s*;\s*selected\s*=\s*((?:\d+\s*(?:,\s*\d+\s*)*)?)\s*"
)


def render_constrained(output: RetrievalOutput) -> str:
    """The canonical grammar string for an output; inverse of parse_constrained."""
    ids = ",".join(str(i) for i in sorted(output.selected_ids))
    return f"delta={output.delta};selected={ids}"


def parse_constrained(text: str, valid_ids: Iterable[int] | None = None) -> RetrievalOutput:
    """Parse a provider reply against the constrained grammar.

    Whitespace around tokens is tolerated, duplicate ids collapse, and when
    ``valid_ids`` is given any id outside it is rejected.  Anything else —
    prose, missing fields, stray characters — is a parse error carrying the
    raw reply.
    """
    if not isinstance(text, str):
        raise RetrievalParseError(f"reply must be a string, got {type(text).__name__}")
    m = _GRAMMAR.fullmatch(text)
    if m is None:
        raise RetrievalParseError(f"reply does not match the constrained grammar: {text!r}",
                                  raw_reply=text)
    delta = int(m.group(1))
    id_part = m.group(2).strip()
    ids = frozenset(int(tok) for tok in id_part.split(",")) if id_part else frozenset()
    if valid_ids is not None:
        allowed = frozenset(int(i) for i in valid_ids)
        stray = ids - allowed
        if stray:
            raise RetrievalParseError(
                f"reply selects ids outside the history: {sorted(stray)}", raw_reply=text
            )
    return RetrievalOutput(selected_ids=ids, delta=delta)


def build_retrieval_request(history: DialogueHistory, question: str) -> dict:
    """The documented JSON body for the retrieve provider call."""
    return {
        "kind": "retrieve",
        "history": [
            {"qa_id": item.qa_id, "question": item.question, "answer": item.answer}
            for item in history
        ],
        "question": question,
    }


def lexical_fallback(
    history: DialogueHistory,
    question: str,
    threshold: float = DEFAULT_OVERLAP_THRESHOLD,
) -> RetrievalOutput:
    """Model-free retrieval from term overlap.

    A history item is selected when the term-frequency cosine between the
    question and the item's combined question+answer text reaches
    ``threshold``.  ``delta`` flips to 1 only when the best overlap exceeds
    DELTA_OVERLAP *and* the question contains one of the fixed recall cues —
    near-verbatim repetition alone is not treated as dialogue recall.
    """
    overlaps = {
        item.qa_id: tf_cosine(question, f"{item.question} {item.answer}") for item in history
    }
    selected = frozenset(qa_id for qa_id, ov in overlaps.items() if ov >= threshold)
    normalized = " ".join(tokenize(question))
    delta = int(
        bool(overlaps)
        and max(overlaps.values()) > DELTA_OVERLAP
        and any(cue in normalized for cue in RECALL_CUES)
    )
    return RetrievalOutput(selected_ids=selected, delta=delta)


def retrieve(
    history: DialogueHistory,
    question: str,
    provider: Retriever | None = None,
    *,
    threshold: float = DEFAULT_OVERLAP_THRESHOLD,
) -> RetrievalOutput:
    """Select past turns for the current question.

    With no provider this is ``lexical_fallback``.  With one, the documented
    request goes out, the reply must parse under the constrained grammar
    (ids restricted to the actual history), and a single retry is attempted
    on a malformed reply before the parse error is surfaced.
    """
    if provider is None:
        return lexical_fallback(history, question, threshold)
    request = build_retrieval_request(history, question)
    last_error: RetrievalParseError | None = None
    for attempt in range(2):
        try:
            reply = provider.select(request)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"retrieval provider failed: {exc}") from exc
        try:
            return parse_constrained(reply, valid_ids=history.ids)
        except RetrievalParseError as exc:
            logger.warning("unparseable retrieval reply (attempt %d): %r", attempt + 1, reply)
            last_error = exc
    assert last_error is not None
    raise last_error


# ---------------------------------------------------------------------------
# scoring


@dataclass(frozen=True)
class RetrievalMetrics:
    """Confusion counts over a history of N items; metrics derive from them.

    With nothing to find and nothing found (tp+fp == 0 or tp+fn == 0) the
    corresponding precision/recall is defined as 1, so an empty gold set
    matched by an empty prediction scores a perfect 1/1/1.
    """

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def history_size(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.history_size if self.history_size else 1.0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 1.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 1.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def score_retrieval(
    predicted: RetrievalOutput | Iterable[int],
    gold: Iterable[int],
    history_ids: Iterable[int],
) -> RetrievalMetrics:
    """Confusion of one retrieval decision against its gold set.

    Every one of the N history items counts: selected-and-gold is a true
    positive, unselected-and-not-gold a true negative, and so on.  Predicted
    or gold ids outside the history are an error, not a silent drop.
    """
    pred = predicted.selected_ids if isinstance(predicted, RetrievalOutput) else frozenset(
        int(i) for i in predicted
    )
    gold_set = frozenset(int(i) for i in gold)
    ids = frozenset(int(i) for i in history_ids)
    if not pred <= ids:
        raise ValueError(f"predicted ids outside the history: {sorted(pred - ids)}")
    if not gold_set <= ids:
        raise ValueError(f"gold ids outside the history: {sorted(gold_set - ids)}")
    tp = len(pred & gold_set)
    fp = len(pred - gold_set)
    fn = len(gold_set - pred)
    return RetrievalMetrics(tp=tp, fp=fp, fn=fn, tn=len(ids) - tp - fp - fn)


def micro_metrics(per_question: Sequence[RetrievalMetrics]) -> RetrievalMetrics:
    """Micro-aggregation: confusion counts summed across questions."""
    return RetrievalMetrics(
        tp=sum(m.tp for m in per_question),
        fp=sum(m.fp for m in per_question),
        fn=sum(m.fn for m in per_question),
        tn=sum(m.tn for m in per_question),
    )
