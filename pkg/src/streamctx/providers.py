"""Provider interfaces, their JSON wire format, and offline fallbacks.

Five provider roles exist: event summarizer, question embedder, dialogue
retriever, relevance scorer, and answer generator.  Each request is a JSON
object carrying a ``kind`` discriminator:

    {"kind": "summarize", "features": [[...], ...], "prompt": "..."}
        -> {"hidden_states": [[...], ...]}
    {"kind": "embed", "text": "..."}
        -> {"vector": [...]}
    {"kind": "retrieve", "history": [{"qa_id": 1, "question": "...",
        "answer": "..."}, ...], "question": "..."}
        -> {"reply": "delta=0;selected=1,2"}
    {"kind": "score", "current": {"question": "...", "answer": "..."},
        "prior": {...}}
        -> {"score": 5.5}
    {"kind": "generate", "payload": "<rendered context JSON>"}
        -> {"answer": "..."}

``JsonProviderClient`` speaks this format over any transport callable, so
tests exercise the full encode/decode path without a network.  The answer
judge ({"kind": "judge", ...}) is declared for completeness but has no local
implementation: judged answer quality is out of scope here.
"""

from __future__ import annotations

import hashlib
import json
import urllib.request
from typing import Callable, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ProviderError
from .text import tokenize

#: Instruction sent alongside concatenated frame features on the summarize path.
SUMMARY_PROMPT = (
    "Condense the visual content of this event into a single dense "
    "representation covering its objects, actions, and setting."
)

#: Aspects an answer judge is expected to score; no local scorer exists.
JUDGE_ASPECTS = (
    "information_accuracy",
    "detail_completeness",
    "context_awareness",
    "temporal_precision",
    "logical_consistency",
)


@runtime_checkable
class Summarizer(Protocol):
    provider_id: str

    def hidden_states(self, features: np.ndarray, prompt: str) -> np.ndarray:
        """Map (tokens, dim) features + a prompt to (tokens', hidden) states."""


@runtime_checkable
class TextEmbedder(Protocol):
    provider_id: str

    def embed(self, text: str) -> np.ndarray: ...


@runtime_checkable
class Retriever(Protocol):
    provider_id: str

    def select(self, request: Mapping) -> str:
        """Return the raw constrained-grammar reply for a retrieve request."""


@runtime_checkable
class RelevanceScorer(Protocol):
    provider_id: str

    def score(self, current: Mapping, prior: Mapping) -> float: ...


@runtime_checkable
class Generator(Protocol):
    provider_id: str

    def generate(self, payload: str) -> str: ...


@runtime_checkable
class AnswerJudge(Protocol):
    """Scores a generated answer against a reference on JUDGE_ASPECTS.

    Interface only: no fallback implementation ships with this package.
    """

    provider_id: str

    def judge(self, question: str, reference: str, generated: str) -> Mapping[str, float]: ...


# ---------------------------------------------------------------------------
# offline fallbacks


class HashingQuestionEmbedder:
    """Deterministic bag-of-terms embedding, no model required.

    Every vocabulary term hashes (stably, via blake2b) to a fixed pseudo-
    random Gaussian direction in R^dim; a text embeds as the term-frequency
    weighted sum, L2-normalized.  Texts differing only in whitespace or
    punctuation embed identically; disjoint vocabularies land on nearly
    orthogonal vectors for reasonably large dim.
    """

    provider_id = "fallback-hashing-embedder"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _term_vector(self, term: str) -> np.ndarray:
        vec = self._cache.get(term)
        if vec is None:
            seed = int.from_bytes(hashlib.blake2b(term.encode("utf-8"), digest_size=8).digest(), "little")
            vec = np.random.default_rng(seed).standard_normal(self.dim)
            self._cache[term] = vec
        return vec

    def embed(self, text: str) -> np.ndarray:
        terms = tokenize(text)
        if not terms:
            raise ValueError("cannot embed text with no alphanumeric tokens")
        out = np.zeros(self.dim)
        for term in terms:
            out += self._term_vector(term)
        norm = np.linalg.norm(out)
        if norm > 0:
            out /= norm
        return out


class EchoGenerator:
    """Offline answer generator: a deterministic digest of the context package."""

    provider_id = "fallback-echo"

    def generate(self, payload: str) -> str:
        try:
            obj = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise ProviderError(f"echo generator expects the rendered JSON payload: {exc}") from exc
        visual_ids = sorted(
            b["event_id"] for b in obj.get("blocks", ()) if b.get("kind") == "visual"
        )
        text_ids = sorted(b["qa_id"] for b in obj.get("blocks", ()) if b.get("kind") == "text")
        return (
            f"echo(question={obj.get('question', '')!r}; delta={obj.get('delta', 0)}; "
            f"visual_events={visual_ids}; text_qas={text_ids})"
        )


# ---------------------------------------------------------------------------
# wire helpers


def summarize_request(features: np.ndarray, prompt: str) -> dict:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise ProviderError(f"summarize features must be 2-D, got shape {arr.shape}")
    return {"kind": "summarize", "features": arr.tolist(), "prompt": prompt}


def embed_request(text: str) -> dict:
    return {"kind": "embed", "text": text}


def score_request(current: Mapping, prior: Mapping) -> dict:
    return {
        "kind": "score",
        "current": {"question": current["question"], "answer": current["answer"]},
        "prior": {"question": prior["question"], "answer": prior["answer"]},
    }


def generate_request(payload: str) -> dict:
    return {"kind": "generate", "payload": payload}


def _require(response: Mapping, key: str):
    if not isinstance(response, Mapping) or key not in response:
        raise ProviderError(f"provider response is missing {key!r}: {response!r}")
    return response[key]


Transport = Callable[[str, dict], Mapping]


def _http_post_json(url: str, body: dict) -> Mapping:
    data = json.dumps(body).encode("utf-8")
    req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read().decode("utf-8"))
    except Exception as exc:  # URLError, JSONDecodeError, ...
        raise ProviderError(f"provider request to {url} failed: {exc}") from exc


class JsonProviderClient:
    """All five provider roles over one endpoint speaking the wire format.

    ``transport(url, body) -> response`` defaults to an HTTP POST; tests and
    embedded deployments can pass any callable instead.
    """

    def __init__(self, endpoint: str, transport: Transport | None = None, provider_id: str | None = None):
        self.endpoint = endpoint
        self.provider_id = provider_id or f"json:{endpoint}"
        self._transport = transport or _http_post_json

    def _call(self, body: dict) -> Mapping:
        try:
            return self._transport(self.endpoint, body)
        except ProviderError:
            raise
        except Exception as exc:
            raise ProviderError(f"provider transport failed: {exc}") from exc

    def hidden_states(self, features: np.ndarray, prompt: str) -> np.ndarray:
        resp = self._call(summarize_request(features, prompt))
        states = np.asarray(_require(resp, "hidden_states"), dtype=np.float64)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ProviderError(f"hidden_states must be a non-empty 2-D array, got shape {states.shape}")
        return states

    def embed(self, text: str) -> np.ndarray:
        resp = self._call(embed_request(text))
        vec = np.asarray(_require(resp, "vector"), dtype=np.float64).reshape(-1)
        if vec.size < 1:
            raise ProviderError("embedding vector is empty")
        return vec

    def select(self, request: Mapping) -> str:
        reply = _require(self._call(dict(request)), "reply")
        if not isinstance(reply, str):
            raise ProviderError(f"retrieve reply must be a string, got {type(reply).__name__}")
        return reply

    def score(self, current: Mapping, prior: Mapping) -> float:
        value = _require(self._call(score_request(current, prior)), "score")
        try:
            return float(value)
        except (TypeError, ValueError) as exc:
            raise ProviderError(f"relevance score is not numeric: {value!r}") from exc

    def generate(self, payload: str) -> str:
        answer = _require(self._call(generate_request(payload)), "answer")
        if not isinstance(answer, str):
            raise ProviderError(f"generated answer must be a string, got {type(answer).__name__}")
        return answer

    def judge(self, question: str, reference: str, generated: str) -> Mapping[str, float]:
        resp = self._call(
            {"kind": "judge", "question": question, "reference": reference, "generated": generated}
        )
        scores = _require(resp, "scores")
        missing = [a for a in JUDGE_ASPECTS if a not in scores]
        if missing:
            raise ProviderError(f"judge response is missing aspects {missing}")
        return {a: float(scores[a]) for a in JUDGE_ASPECTS}
