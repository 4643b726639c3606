"""Question-aware compression of an event stream.

Every event gets a relevance score: the cosine between its embedding and the
current question's embedding.  Events at or above the threshold keep their
full patch tokens ("preserved"); the rest collapse each frame to a single
mean-pooled token ("pooled").  Either way no event disappears and no frame
timestamp is lost — compression only reduces token counts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clustering import Event
from .errors import DegenerateVectorError, DimensionMismatchError, InvalidConfigError
from .providers import SUMMARY_PROMPT, HashingQuestionEmbedder, Summarizer, TextEmbedder
from .store import cosine, mean_pool

logger = logging.getLogger(__name__)

DEFAULT_THETA = 0.45

PRESERVED = "preserved"
POOLED = "pooled"


@dataclass(frozen=True)
class CompressionConfig:
    """theta is the preserve/pool relevance threshold, a cosine in [-1, 1]."""

    theta: float = DEFAULT_THETA

    def __post_init__(self):
        if not (-1.0 <= self.theta <= 1.0) or not math.isfinite(self.theta):
            raise InvalidConfigError(f"theta must be in [-1, 1], got {self.theta}")


@dataclass(frozen=True, eq=False)
class EventEmbedding:
    """An event's summary vector plus where it came from."""

    vector: np.ndarray
    provenance: str

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True, eq=False)
class VisualUnit:
    """One event after compression.

    Preserved units keep ``data`` with shape (frames, patches, dim); pooled
    units carry one token per frame, shape (frames, dim).  ``patch_count``
    remembers the original patch rows so token accounting can reconstruct
    the uncompressed size either way.
    """

    kind: str
    event_id: int
    timestamps: np.ndarray  # (frames,)
    data: np.ndarray
    patch_count: int
    relevance: float
    start_s: float
    time_centroid: float

    @property
    def num_frames(self) -> int:
        return self.timestamps.shape[0]

    @property
    def tokens(self) -> int:
        return self.num_frames * (self.patch_count if self.kind == PRESERVED else 1)


def embed_event(
    event: Event,
    summarizer: Summarizer | None = None,
    *,
    fallback_on_error: bool = False,
) -> EventEmbedding:
    """Embed one event, via the summarizer provider or the local fallback.

    The provider receives the event's frame features concatenated along the
    patch axis together with a fixed summarization prompt, and its returned
    hidden states are mean-pooled over the token axis.  Without a provider
    the embedding is simply the mean over all patch rows of all frames.
    Provider failures propagate unless ``fallback_on_error`` is set, in which
    case the fallback result is used and the failure logged.
    """
    stacked = np.concatenate([f.patches for f in event.frames], axis=0)
    if summarizer is not None:
        try:
            states = summarizer.hidden_states(stacked.astype(np.float64), SUMMARY_PROMPT)
            return EventEmbedding(mean_pool(states), provenance=summarizer.provider_id)
        except Exception:
            if not fallback_on_error:
                raise
            logger.warning(
                "summarizer %s failed for event %d; using mean-pool fallback",
                getattr(summarizer, "provider_id", "?"),
                event.event_id,
                exc_info=True,
            )
    return EventEmbedding(mean_pool(stacked), provenance="fallback-meanpool")


def embed_question(
    question: str,
    embedder: TextEmbedder | None = None,
    *,
    dim: int | None = None,
) -> np.ndarray:
    """Embed the current question with a provider or the hashing fallback.

    The fallback needs ``dim`` so its vectors live in the same space as the
    fallback event embeddings (the raw feature dimension).
    """
    if not question or not question.strip():
        raise ValueError("question text must be non-empty")
    if embedder is None:
        if dim is None:
            raise InvalidConfigError("dim is required when no embedder provider is given")
        embedder = HashingQuestionEmbedder(dim)
    return np.asarray(embedder.embed(question), dtype=np.float64).reshape(-1)


def compress_stream(
    events: Sequence[Event],
    embeddings: Sequence[EventEmbedding],
    question_vec,
    config: CompressionConfig = CompressionConfig(),
) -> list[VisualUnit]:
    """Score every event against the question and compress the stream.

    Relevance is ``cosine(event embedding, question embedding)``; a zero-norm
    vector on either side scores -1 (never preserved) and is logged rather
    than raised, since an all-zero event is valid input.  Output units are
    ordered by event time centroid.
    """
    if len(events) != len(embeddings):
        raise DimensionMismatchError(
            f"got {len(events)} events but {len(embeddings)} embeddings"
        )
    q = np.asarray(question_vec, dtype=np.float64).reshape(-1)
    for emb in embeddings:
        if emb.vector.shape != q.shape:
            raise DimensionMismatchError(
                f"event embedding dim {emb.vector.shape[0]} != question dim {q.shape[0]}"
            )

    units = []
    for event, emb in zip(events, embeddings):
        try:
            score = cosine(emb.vector, q)
        except DegenerateVectorError:
            logger.warning(
                "zero-norm embedding for event %d; scoring -1 (always pooled)", event.event_id
            )
            score = -1.0
        stamps = np.asarray([f.timestamp for f in event.frames], dtype=np.float64)
        if score >= config.theta:
            data = np.stack([f.patches for f in event.frames])
            kind = PRESERVED
        else:
            data = np.stack([f.patches.mean(axis=0) for f in event.frames])
            kind = POOLED
        units.append(
            VisualUnit(
                kind=kind,
                event_id=event.event_id,
                timestamps=stamps,
                data=data,
                patch_count=event.frames[0].num_patches,
                relevance=score,
                start_s=event.start_s,
                time_centroid=event.time_centroid,
            )
        )
    units.sort(key=lambda u: (u.time_centroid, u.event_id))
    return units


def token_count(units: Sequence[VisualUnit]) -> int:
    """Tokens the compressed stream occupies: frames*patches preserved, frames pooled."""
    return sum(u.tokens for u in units)


def original_token_count(units: Sequence[VisualUnit]) -> int:
    return sum(u.num_frames * u.patch_count for u in units)


def compression_ratio(units: Sequence[VisualUnit]) -> float:
    """Compressed tokens over original tokens, in (0, 1]."""
    original = original_token_count(units)
    if original == 0:
        raise ValueError("compression ratio is undefined for an empty stream")
    return token_count(units) / original
