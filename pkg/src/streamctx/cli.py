"""Command-line entry point.

Every subcommand accepts ``--config <json>`` (an EngineConfig file),
``--seed`` (overrides the config seed), and ``--out`` (output file; stdout
otherwise).  Results are JSON; failures print ``{"error": ..., "message":
...}`` to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .clustering import ClusterConfig, choose_k, cluster, events_from
from .compression import CompressionConfig, compress_stream, compression_ratio, embed_event, embed_question, token_count
from .errors import InvalidConfigError, StreamContextError
from .paths import PathConfig, attach_streams, build_relevant_sets, score_all_pairs
from .retrieval import DialogueHistory, HistoryItem, RetrievalOutput, retrieve
from .simulate import EngineConfig, evaluate, load_report_records, simulate
from .store import load_embeddings, load_manifest, save_manifest, with_updated_pool
from .synthetic import SyntheticSpec, make_synthetic


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    config = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def _emit(args: argparse.Namespace, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2)
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_cluster(args) -> None:
    config = _engine_config(args)
    frames = load_embeddings(args.embeddings)
    k = args.k if args.k is not None else choose_k(len(frames), config.cluster_ratio)
    alpha = args.alpha_time if args.alpha_time is not None else config.alpha_time
    result = cluster(
        frames,
        ClusterConfig(
            k=k,
            alpha_time=alpha,
            max_iters=config.max_iters,
            epsilon=config.epsilon,
            seed=config.seed,
        ),
    )
    _emit(args, result.to_dict())


def _cmd_compress(args) -> None:
    config = _engine_config(args)
    frames = load_embeddings(args.embeddings)
    k = args.k if args.k is not None else choose_k(len(frames), config.cluster_ratio)
    result = cluster(
        frames,
        ClusterConfig(
            k=k,
            alpha_time=config.alpha_time,
            max_iters=config.max_iters,
            epsilon=config.epsilon,
            seed=config.seed,
        ),
    )
    events = events_from(result, frames)
    embeddings = [embed_event(ev) for ev in events]
    qvec = embed_question(args.question, dim=frames[0].dim)
    theta = args.theta if args.theta is not None else config.theta
    units = compress_stream(events, embeddings, qvec, CompressionConfig(theta))
    _emit(
        args,
        {
            "question": args.question,
            "theta": theta,
            "token_count": token_count(units),
            "compression_ratio": compression_ratio(units),
            "units": [
                {
                    "event_id": u.event_id,
                    "kind": u.kind,
                    "relevance": u.relevance,
                    "frames": u.num_frames,
                    "tokens": u.tokens,
                    "start_s": u.start_s,
                }
                for u in units
            ],
        },
    )


def _cmd_retrieve(args) -> None:
    config = _engine_config(args)
    manifest = load_manifest(args.manifest)
    if not 0 <= args.stream < len(manifest.dialogue_streams):
        raise InvalidConfigError(
            f"stream {args.stream} out of range ({len(manifest.dialogue_streams)} streams)"
        )
    path = manifest.dialogue_streams[args.stream]
    qa_by_id = {qa.qa_id: qa for qa in manifest.qa_pool}
    items = []
    target = None
    for entry in path.entries:
        if entry.qa_id == args.qa_id:
            target = entry
            break
        qa = qa_by_id[entry.qa_id]
        items.append(HistoryItem(qa.qa_id, qa.question, qa.answer, entry.ask_time))
    if target is None:
        raise InvalidConfigError(f"qa_id {args.qa_id} is not on stream {args.stream}")
    history = DialogueHistory(tuple(items))
    question = qa_by_id[args.qa_id].question
    if config.retrieval_mode == "oracle":
        output = RetrievalOutput(selected_ids=target.gold_relevant & history.ids, delta=0)
    else:
        output = retrieve(history, question, None, threshold=config.retrieval_threshold)
    _emit(
        args,
        {
            "qa_id": args.qa_id,
            "question": question,
            "history_size": len(history),
            "selected_ids": sorted(output.selected_ids),
            "delta": output.delta,
        },
    )


def _cmd_score_relevance(args) -> None:
    manifest = load_manifest(args.manifest)
    pool = score_all_pairs(manifest.qa_pool)
    pool = build_relevant_sets(pool, threshold=args.threshold)
    updated = with_updated_pool(manifest, pool)
    save_manifest(args.out or args.manifest, updated)
    scored = sum(len(qa.relevance_scores) for qa in pool)
    sys.stdout.write(
        json.dumps({"pairs_scored": scored, "threshold": args.threshold}) + "\n"
    )


def _cmd_build_paths(args) -> None:
    config = _engine_config(args)
    manifest = load_manifest(args.manifest)
    path_config = PathConfig(
        alpha_len=args.alpha_len if args.alpha_len is not None else config.alpha_len,
        num_paths=args.num_paths if args.num_paths is not None else config.num_paths,
        complex_per_segment=args.complex_per_segment,
        force_include_global=args.force_include_global,
        seed=config.seed,
    )
    updated = attach_streams(manifest, path_config)
    save_manifest(args.out or args.manifest, updated)
    sys.stdout.write(
        json.dumps(
            {
                "paths": len(updated.dialogue_streams),
                "lengths": [len(p) for p in updated.dialogue_streams],
            }
        )
        + "\n"
    )


def _cmd_simulate(args) -> None:
    config = _engine_config(args)
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    report = simulate(manifest, args.stream, config, base_dir=manifest_path.parent)
    if args.out:
        report.write(args.out)
        sys.stdout.write(json.dumps(report.summary) + "\n")
    else:
        sys.stdout.write("\n".join(report.lines()) + "\n")


def _cmd_eval(args) -> None:
    record_sets = [load_report_records(path) for path in args.reports]
    _emit(args, evaluate(record_sets))


def _cmd_make_synthetic(args) -> None:
    spec = SyntheticSpec(
        segments=args.segments,
        frames_per_segment=args.frames_per_segment,
        patches=args.patches,
        dim=args.dim,
        events_per_segment=args.events_per_segment,
        basic_per_segment=args.basic_per_segment,
        streaming_per_segment=args.streaming_per_segment,
        global_count=args.global_count,
        num_streams=args.num_streams,
        seed=args.seed if args.seed is not None else 0,
    )
    session = make_synthetic(spec, args.out_dir)
    sys.stdout.write(
        json.dumps(
            {
                "out_dir": str(session.out_dir),
                "segments": len(session.manifest.segments),
                "qa_pool": len(session.manifest.qa_pool),
                "streams": len(session.manifest.dialogue_streams),
            }
        )
        + "\n"
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="EngineConfig JSON file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", help="write the result here instead of stdout")

    parser = argparse.ArgumentParser(
        prog="streamctx",
        description="Streaming video QA context engine.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", parents=[common], help="cluster a frame stream into events")
    p.add_argument("--embeddings", required=True, help="binary frame-embedding file")
    p.add_argument("--k", type=int, default=None, help="cluster count (default: ratio rule)")
    p.add_argument("--alpha-time", type=float, default=None, dest="alpha_time")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("compress", parents=[common], help="compress events against a question")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.set_defaults(func=_cmd_compress)

    p = sub.add_parser("retrieve", parents=[common], help="retrieve history for one question")
    p.add_argument("--manifest", required=True)
    p.add_argument("--qa-id", type=int, required=True, dest="qa_id")
    p.add_argument("--stream", type=int, default=0)
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser(
        "score-relevance", parents=[common],
        help="fill relevance scores and relevant sets in a manifest",
    )
    p.add_argument("--manifest", required=True)
    p.add_argument("--threshold", type=float, default=4.0)
    p.set_defaults(func=_cmd_score_relevance)

    p = sub.add_parser("build-paths", parents=[common], help="sample dialogue streams")
    p.add_argument("--manifest", required=True)
    p.add_argument("--num-paths", type=int, default=None, dest="num_paths")
    p.add_argument("--alpha-len", type=float, default=None, dest="alpha_len")
    p.add_argument("--complex-per-segment", type=int, default=2, dest="complex_per_segment")
    p.add_argument("--force-include-global", action="store_true", dest="force_include_global")
    p.set_defaults(func=_cmd_build_paths)

    p = sub.add_parser("simulate", parents=[common], help="replay a dialogue stream")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stream", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("eval", parents=[common], help="corpus metrics over report files")
    p.add_argument("reports", nargs="+", help="JSON-lines report files")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("make-synthetic", parents=[common], help="generate a synthetic session")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--segments", type=int, default=5)
    p.add_argument("--frames-per-segment", type=int, default=10, dest="frames_per_segment")
    p.add_argument("--patches", type=int, default=2)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--events-per-segment", type=int, default=2, dest="events_per_segment")
    p.add_argument("--basic-per-segment", type=int, default=2, dest="basic_per_segment")
    p.add_argument("--streaming-per-segment", type=int, default=2, dest="streaming_per_segment")
    p.add_argument("--global-count", type=int, default=0, dest="global_count")
    p.add_argument("--num-streams", type=int, default=1, dest="num_streams")
    p.set_defaults(func=_cmd_make_synthetic)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (StreamContextError, ValueError, OSError, KeyError) as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
