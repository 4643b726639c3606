"""Streaming replay of a dialogue over a recorded session.

For each question on a dialogue path, in ask order, the simulator gathers
every frame from segments that have already finished, clusters them into
events, compresses the events against the question, retrieves relevant past
turns, assembles the context package, and generates an answer.  Frame access
runs through a guard that counts any read from a segment still in the future;
a correct run reports zero violations.

Reports are JSON lines: one ``record`` object per question followed by one
``summary`` object.  Per-record wall-clock timings are diagnostics and are
excluded from the canonical byte form used for determinism comparisons.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .assembly import answer as generate_answer
from .assembly import assemble
from .clustering import ClusterConfig, choose_k, cluster, events_from
from .compression import (
    CompressionConfig,
    compress_stream,
    compression_ratio,
    embed_event,
    embed_question,
)
from .errors import InvalidConfigError, StreamContextError
from .paths import DEFAULT_ALPHA_LEN, DEFAULT_NUM_PATHS
from .providers import Generator, Retriever, Summarizer, TextEmbedder
from .retrieval import (
    DialogueHistory,
    HistoryItem,
    RetrievalOutput,
    micro_metrics,
    retrieve,
    score_retrieval,
)
from .store import FrameFeature, SessionManifest, load_session_frames

logger = logging.getLogger(__name__)

#: Report fields that vary run to run and are dropped from canonical bytes.
VOLATILE_FIELDS = ("wall_ms",)

RETRIEVAL_MODES = ("fallback", "provider", "oracle")


@dataclass(frozen=True)
class EngineConfig:
    """Every tunable of the streaming engine, JSON round-trippable."""

    cluster_ratio: float = 1.0 / 15.0
    alpha_time: float = 1.0
    epsilon: float = 1e-4
    max_iters: int = 100
    theta: float = 0.45
    retrieval_mode: str = "fallback"
    retrieval_threshold: float = 0.3
    use_gold_answers: bool = False
    alpha_len: float = DEFAULT_ALPHA_LEN
    num_paths: int = DEFAULT_NUM_PATHS
    seed: int = 0
    endpoints: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.retrieval_mode not in RETRIEVAL_MODES:
            raise InvalidConfigError(
                f"retrieval_mode must be one of {RETRIEVAL_MODES}, got {self.retrieval_mode!r}"
            )
        if not (0 < self.cluster_ratio and math.isfinite(self.cluster_ratio)):
            raise InvalidConfigError(f"cluster_ratio must be positive, got {self.cluster_ratio}")
        object.__setattr__(self, "endpoints", dict(self.endpoints))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, obj: Mapping) -> "EngineConfig":
        known = {f.name for f in fields(cls)}
        stray = set(obj) - known
        if stray:
            raise InvalidConfigError(f"unknown config keys: {sorted(stray)}")
        return cls(**obj)

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"config file is not valid JSON: {exc}") from exc


@dataclass
class ProviderSet:
    """Optional injected providers; any left as None uses the local fallback."""

    summarizer: Summarizer | None = None
    embedder: TextEmbedder | None = None
    retriever: Retriever | None = None
    generator: Generator | None = None


class _FrameGuard:
    """Hands out cumulative frames and counts any future-segment access."""

    def __init__(self, manifest: SessionManifest, frames: Mapping[int, Sequence[FrameFeature]]):
        self._windows = [
            (seg.segment_id, seg.end_s, list(frames[seg.segment_id])) for seg in manifest.segments
        ]
        self.violations = 0

    def frames_until(self, ask_time: float) -> list[FrameFeature]:
        """Frames of every segment already finished at ask_time.

        Segments still open stay out entirely, even for their elapsed part;
        any returned frame stamped after ask_time counts as a violation.
        """
        out: list[FrameFeature] = []
        for _segment_id, end_s, seg_frames in self._windows:
            if end_s <= ask_time:
                out.extend(seg_frames)
        for f in out:
            if f.timestamp > ask_time:
                self.violations += 1
        return out


def _question_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class SimulationReport:
    video_id: str
    stream_index: int
    records: tuple[dict, ...]
    summary: dict
    config: EngineConfig

    def lines(self, *, canonical: bool = False) -> list[str]:
        out = []
        for rec in self.records:
            body = dict(rec)
            if canonical:
                for key in VOLATILE_FIELDS:
                    body.pop(key, None)
            out.append(json.dumps({"kind": "record", **body}, sort_keys=True))
        out.append(json.dumps({"kind": "summary", **self.summary}, sort_keys=True))
        return out

    def canonical_bytes(self) -> bytes:
        return ("\n".join(self.lines(canonical=True)) + "\n").encode("utf-8")

    def write(self, path) -> None:
        Path(path).write_text("\n".join(self.lines()) + "\n")


def simulate(
    manifest: SessionManifest,
    stream_index: int,
    config: EngineConfig = EngineConfig(),
    *,
    base_dir=None,
    frames: Mapping[int, Sequence[FrameFeature]] | None = None,
    providers: ProviderSet | None = None,
) -> SimulationReport:
    """Replay one dialogue stream end to end.

    Frames come either from ``frames`` directly or from the manifest's
    embedding files resolved against ``base_dir``.  An error inside one
    question's pipeline aborts that question (recorded with its error kind)
    and the stream moves on; the dialogue history then carries the dataset's
    gold answer so later questions still see the turn.
    """
    if not 0 <= stream_index < len(manifest.dialogue_streams):
        raise InvalidConfigError(
            f"stream_index {stream_index} out of range; manifest has "
            f"{len(manifest.dialogue_streams)} streams"
        )
    if frames is None:
        if base_dir is None:
            raise InvalidConfigError("need either preloaded frames or a base_dir to load from")
        frames = load_session_frames(manifest, base_dir)
    prov = providers or ProviderSet()

    guard = _FrameGuard(manifest, frames)
    qa_by_id = {qa.qa_id: qa for qa in manifest.qa_pool}
    history = DialogueHistory()
    path = manifest.dialogue_streams[stream_index]

    records: list[dict] = []
    confusions = []
    for index, entry in enumerate(path.entries):
        qa = qa_by_id[entry.qa_id]
        started = time.perf_counter()
        record: dict = {
            "qa_id": qa.qa_id,
            "qa_type": qa.qa_type,
            "ask_time": entry.ask_time,
            "history_size": len(history),
            "gold_relevant": sorted(entry.gold_relevant),
        }
        generated_answer: str | None = None
        try:
            visible = guard.frames_until(entry.ask_time)
            if not visible:
                raise StreamContextError(
                    f"no finished segment before ask_time {entry.ask_time}"
                )
            k = choose_k(len(visible), config.cluster_ratio)
            result = cluster(
                visible,
                ClusterConfig(
                    k=k,
                    alpha_time=config.alpha_time,
                    max_iters=config.max_iters,
                    epsilon=config.epsilon,
                    seed=_question_seed(config.seed, index),
                ),
            )
            events = events_from(result, visible)
            embeddings = [embed_event(ev, prov.summarizer) for ev in events]
            qvec = embed_question(qa.question, prov.embedder, dim=visible[0].dim)
            units = compress_stream(events, embeddings, qvec, CompressionConfig(config.theta))

            if config.retrieval_mode == "oracle":
                retrieval = RetrievalOutput(
                    selected_ids=entry.gold_relevant & history.ids, delta=0
                )
            elif config.retrieval_mode == "provider":
                retrieval = retrieve(history, qa.question, prov.retriever)
            else:
                retrieval = retrieve(
                    history, qa.question, None, threshold=config.retrieval_threshold
                )
            selected_items = [h for h in history if h.qa_id in retrieval.selected_ids]

            package = assemble(units, selected_items, retrieval.delta, qa.question)
            answer_record = generate_answer(package, prov.generator, qa_id=qa.qa_id)
            generated_answer = answer_record.answer

            confusion = score_retrieval(retrieval, entry.gold_relevant, history.ids)
            confusions.append(confusion)
            record.update(
                {
                    "num_frames": len(visible),
                    "k": k,
                    "cluster_iterations": result.iterations,
                    "cluster_delta": result.final_delta,
                    "num_events": len(events),
                    "preserved_events": sum(1 for u in units if u.kind == "preserved"),
                    "pooled_events": sum(1 for u in units if u.kind == "pooled"),
                    "compression_ratio": compression_ratio(units),
                    "visual_tokens": answer_record.visual_tokens,
                    "text_tokens": answer_record.text_tokens,
                    "retrieval": {
                        "selected_ids": sorted(retrieval.selected_ids),
                        "delta": retrieval.delta,
                    },
                    "retrieval_confusion": confusion.to_dict(),
                    "answer": answer_record.answer,
                    "answer_provider": answer_record.provider_id,
                }
            )
        except Exception as exc:
            logger.exception("question %d failed; continuing the stream", qa.qa_id)
            record["error"] = {"type": type(exc).__name__, "message": str(exc)}
        record["wall_ms"] = (time.perf_counter() - started) * 1000.0
        records.append(record)

        spoken = qa.answer if (config.use_gold_answers or generated_answer is None) else generated_answer
        history = history.extended(
            HistoryItem(qa_id=qa.qa_id, question=qa.question, answer=spoken, ask_time=entry.ask_time)
        )

    corpus = micro_metrics(confusions) if confusions else None
    ok = [r for r in records if "error" not in r]
    summary = {
        "video_id": manifest.video_id,
        "stream_index": stream_index,
        "questions": len(records),
        "failed_questions": len(records) - len(ok),
        "leakage_violations": guard.violations,
        "retrieval": corpus.to_dict() if corpus else None,
        "mean_compression_ratio": (
            float(np.mean([r["compression_ratio"] for r in ok])) if ok else None
        ),
        "mean_tokens_per_question": (
            float(np.mean([r["visual_tokens"] + r["text_tokens"] for r in ok])) if ok else None
        ),
        "config": config.to_dict(),
    }
    return SimulationReport(
        video_id=manifest.video_id,
        stream_index=stream_index,
        records=tuple(records),
        summary=summary,
        config=config,
    )


# ---------------------------------------------------------------------------
# report schema + evaluation

_CONFUSION_SCHEMA = {
    "type": "object",
    "required": ["tp", "fp", "fn", "tn", "accuracy", "precision", "recall", "f1"],
    "properties": {
        "tp": {"type": "integer", "minimum": 0},
        "fp": {"type": "integer", "minimum": 0},
        "fn": {"type": "integer", "minimum": 0},
        "tn": {"type": "integer", "minimum": 0},
        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
        "precision": {"type": "number", "minimum": 0, "maximum": 1},
        "recall": {"type": "number", "minimum": 0, "maximum": 1},
        "f1": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

REPORT_LINE_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "required": ["kind", "qa_id", "qa_type", "ask_time", "history_size", "gold_relevant"],
            "properties": {
                "kind": {"const": "record"},
                "qa_id": {"type": "integer"},
                "qa_type": {"type": "string"},
                "ask_time": {"type": "number"},
                "history_size": {"type": "integer", "minimum": 0},
                "gold_relevant": {"type": "array", "items": {"type": "integer"}},
                "num_frames": {"type": "integer", "minimum": 1},
                "k": {"type": "integer", "minimum": 1},
                "cluster_iterations": {"type": "integer", "minimum": 1},
                "cluster_delta": {"type": "number", "minimum": 0},
                "num_events": {"type": "integer", "minimum": 1},
                "preserved_events": {"type": "integer", "minimum": 0},
                "pooled_events": {"type": "integer", "minimum": 0},
                "compression_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "visual_tokens": {"type": "integer", "minimum": 0},
                "text_tokens": {"type": "integer", "minimum": 0},
                "retrieval": {
                    "type": "object",
                    "required": ["selected_ids", "delta"],
                    "properties": {
                        "selected_ids": {"type": "array", "items": {"type": "integer"}},
                        "delta": {"enum": [0, 1]},
                    },
                },
                "retrieval_confusion": _CONFUSION_SCHEMA,
                "answer": {"type": "string", "minLength": 1},
                "answer_provider": {"type": "string"},
                "error": {
                    "type": "object",
                    "required": ["type", "message"],
                    "properties": {"type": {"type": "string"}, "message": {"type": "string"}},
                },
                "wall_ms": {"type": "number", "minimum": 0},
            },
        },
        {
            "type": "object",
            "required": [
                "kind", "video_id", "stream_index", "questions",
                "failed_questions", "leakage_violations",
            ],
            "properties": {
                "kind": {"const": "summary"},
                "video_id": {"type": "string"},
                "stream_index": {"type": "integer", "minimum": 0},
                "questions": {"type": "integer", "minimum": 0},
                "failed_questions": {"type": "integer", "minimum": 0},
                "leakage_violations": {"type": "integer", "minimum": 0},
                "retrieval": {"oneOf": [_CONFUSION_SCHEMA, {"type": "null"}]},
                "mean_compression_ratio": {"type": ["number", "null"]},
                "mean_tokens_per_question": {"type": ["number", "null"]},
                "config": {"type": "object"},
            },
        },
    ]
}


def validate_report(report: SimulationReport | Sequence[str]) -> None:
    """Check every report line against the schema; raises on the first defect."""
    import jsonschema

    lines = report.lines() if isinstance(report, SimulationReport) else list(report)
    for line in lines:
        jsonschema.validate(json.loads(line) if isinstance(line, str) else line, REPORT_LINE_SCHEMA)


def load_report_records(path) -> list[dict]:
    """Records (not the summary) from a JSON-lines report file."""
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("kind") == "record":
            records.append(obj)
    return records


def evaluate(record_sets: Sequence[Sequence[dict]]) -> dict:
    """Corpus metrics across one or more reports' records.

    Retrieval confusions micro-aggregate; compression ratios and token
    totals average over questions that completed.
    """
    all_records = [rec for records in record_sets for rec in records]
    if not all_records:
        raise ValueError("no records to evaluate")
    ok = [r for r in all_records if "error" not in r]
    from .retrieval import RetrievalMetrics

    confusions = [
        RetrievalMetrics(
            tp=r["retrieval_confusion"]["tp"],
            fp=r["retrieval_confusion"]["fp"],
            fn=r["retrieval_confusion"]["fn"],
            tn=r["retrieval_confusion"]["tn"],
        )
        for r in ok
        if "retrieval_confusion" in r
    ]
    corpus = micro_metrics(confusions) if confusions else None
    return {
        "questions": len(all_records),
        "failed_questions": len(all_records) - len(ok),
        "retrieval": corpus.to_dict() if corpus else None,
        "mean_compression_ratio": (
            float(np.mean([r["compression_ratio"] for r in ok])) if ok else None
        ),
        "mean_tokens_per_question": (
            float(np.mean([r["visual_tokens"] + r["text_tokens"] for r in ok])) if ok else None
        ),
    }
