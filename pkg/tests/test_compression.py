import numpy as np
import pytest

from streamctx.clustering import Event
from streamctx.compression import (
    DEFAULT_THETA,
    POOLED,
    PRESERVED,
    CompressionConfig,
    EventEmbedding,
    compress_stream,
    compression_ratio,
    embed_event,
    embed_question,
    original_token_count,
    token_count,
)
from streamctx.errors import DimensionMismatchError, InvalidConfigError, ProviderError
from streamctx.providers import SUMMARY_PROMPT, HashingQuestionEmbedder
from streamctx.store import FrameFeature


def make_event(event_id, frames):
    stamps = [f.timestamp for f in frames]
    x = np.stack([np.asarray(f.patches, dtype=np.float64) for f in frames])
    return Event(
        event_id=event_id,
        cluster_index=event_id - 1,
        frame_indices=tuple(range(len(frames))),
        frames=tuple(frames),
        feature_centroid=x.mean(axis=0),
        time_centroid=float(np.mean(stamps)),
        start_s=min(stamps),
        end_s=max(stamps),
    )


def filled_event(event_id, n_frames, patches, dim, value=1.0, t0=0.0):
    frames = [
        FrameFeature(np.full((patches, dim), value, dtype=np.float32), t0 + float(i))
        for i in range(n_frames)
    ]
    return make_event(event_id, frames)


class _ScriptedSummarizer:
    provider_id = "scripted-summarizer"

    def __init__(self, states):
        self.states = states
        self.calls = []

    def hidden_states(self, features, prompt):
        self.calls.append((np.asarray(features), prompt))
        if isinstance(self.states, Exception):
            raise self.states
        return self.states


class TestConfig:
    def test_default_theta(self):
        assert CompressionConfig().theta == DEFAULT_THETA == 0.45

    @pytest.mark.parametrize("theta", [1.5, -1.5, float("nan")])
    def test_rejects_out_of_range(self, theta):
        with pytest.raises(InvalidConfigError):
            CompressionConfig(theta=theta)


class TestEmbedEvent:
    def _event(self):
        frames = [
            FrameFeature([[0.0, 0.0], [2.0, 2.0]], 0.0),
            FrameFeature([[4.0, 4.0], [6.0, 6.0]], 1.0),
        ]
        return make_event(1, frames)

    def test_fallback_is_mean_over_all_patch_rows(self):
        emb = embed_event(self._event())
        assert emb.vector.tolist() == [3.0, 3.0]
        assert emb.provenance == "fallback-meanpool"

    def test_provider_path_pools_hidden_states(self):
        summarizer = _ScriptedSummarizer(np.asarray([[0.0, 4.0], [2.0, 0.0]]))
        emb = embed_event(self._event(), summarizer)
        assert emb.vector.tolist() == [1.0, 2.0]
        assert emb.provenance == "scripted-summarizer"
        feats, prompt = summarizer.calls[0]
        # all patch rows of all frames, concatenated in frame order
        assert feats.tolist() == [[0.0, 0.0], [2.0, 2.0], [4.0, 4.0], [6.0, 6.0]]
        assert prompt == SUMMARY_PROMPT

    def test_provider_failure_propagates_by_default(self):
        summarizer = _ScriptedSummarizer(ProviderError("down"))
        with pytest.raises(ProviderError):
            embed_event(self._event(), summarizer)

    def test_provider_failure_can_fall_back(self):
        summarizer = _ScriptedSummarizer(ProviderError("down"))
        emb = embed_event(self._event(), summarizer, fallback_on_error=True)
        assert emb.vector.tolist() == [3.0, 3.0]
        assert emb.provenance == "fallback-meanpool"


class TestEmbedQuestion:
    def test_fallback_matches_hashing_embedder(self):
        direct = HashingQuestionEmbedder(12).embed("where is the box")
        assert np.array_equal(embed_question("where is the box", dim=12), direct)

    def test_provider_wins_over_dim(self):
        class Emb:
            provider_id = "e"

            def embed(self, text):
                return [1.0, 0.0]

        assert embed_question("q", Emb(), dim=99).tolist() == [1.0, 0.0]

    def test_empty_question_rejected(self):
        with pytest.raises(ValueError):
            embed_question("   ", dim=4)

    def test_dim_required_without_provider(self):
        with pytest.raises(InvalidConfigError):
            embed_question("q")


class TestCompressStream:
    def test_threshold_is_inclusive(self):
        # cosine([3,4],[1,0]) is exactly 3/5, the same float as theta=0.6
        event = filled_event(1, n_frames=2, patches=3, dim=2)
        units = compress_stream(
            [event], [EventEmbedding([3.0, 4.0], "t")], [1.0, 0.0], CompressionConfig(theta=0.6)
        )
        assert units[0].kind == PRESERVED
        assert units[0].relevance == 0.6

    def test_below_threshold_pools(self):
        event = filled_event(1, n_frames=2, patches=3, dim=2)
        units = compress_stream(
            [event], [EventEmbedding([0.0, 1.0], "t")], [1.0, 0.0], CompressionConfig(theta=0.6)
        )
        assert units[0].kind == POOLED
        assert units[0].relevance == 0.0

    def test_preserved_keeps_full_patch_grid(self):
        frames = [
            FrameFeature([[0.0, 2.0], [4.0, 6.0]], 0.0),
            FrameFeature([[1.0, 1.0], [3.0, 3.0]], 1.0),
        ]
        event = make_event(1, frames)
        units = compress_stream(
            [event], [EventEmbedding([1.0, 0.0], "t")], [1.0, 0.0], CompressionConfig(theta=0.0)
        )
        u = units[0]
        assert u.kind == PRESERVED
        assert u.data.shape == (2, 2, 2)
        assert u.data[0].tolist() == [[0.0, 2.0], [4.0, 6.0]]
        assert u.tokens == 4
        assert u.timestamps.tolist() == [0.0, 1.0]

    def test_pooled_averages_each_frame(self):
        frames = [FrameFeature([[0.0, 2.0], [4.0, 6.0]], 0.0)]
        event = make_event(1, frames)
        units = compress_stream(
            [event], [EventEmbedding([0.0, 1.0], "t")], [1.0, 0.0], CompressionConfig(theta=0.5)
        )
        u = units[0]
        assert u.kind == POOLED
        assert u.data.shape == (1, 2)
        assert u.data[0].tolist() == [2.0, 4.0]
        assert u.patch_count == 2  # original patches remembered for accounting
        assert u.tokens == 1

    def test_zero_norm_embedding_scores_minus_one(self):
        event = filled_event(1, n_frames=1, patches=2, dim=2)
        units = compress_stream(
            [event], [EventEmbedding([0.0, 0.0], "t")], [1.0, 0.0], CompressionConfig(theta=-1.0)
        )
        assert units[0].relevance == -1.0
        assert units[0].kind == PRESERVED  # -1 >= theta == -1 still passes the gate

    def test_units_sorted_by_time_centroid(self):
        late = filled_event(1, n_frames=1, patches=1, dim=2, t0=50.0)
        early = filled_event(2, n_frames=1, patches=1, dim=2, t0=0.0)
        units = compress_stream(
            [late, early],
            [EventEmbedding([1.0, 0.0], "t"), EventEmbedding([1.0, 0.0], "t")],
            [1.0, 0.0],
        )
        assert [u.event_id for u in units] == [2, 1]

    def test_length_mismatch_rejected(self):
        event = filled_event(1, 1, 1, 2)
        with pytest.raises(DimensionMismatchError):
            compress_stream([event], [], [1.0, 0.0])

    def test_dim_mismatch_rejected(self):
        event = filled_event(1, 1, 1, 2)
        with pytest.raises(DimensionMismatchError):
            compress_stream([event], [EventEmbedding([1.0, 0.0, 0.0], "t")], [1.0, 0.0])


class TestAccounting:
    def _mixed_units(self):
        # two events, five frames each, four patches per frame; the first
        # stays preserved, the second pools
        relevant = filled_event(1, n_frames=5, patches=4, dim=2, t0=0.0)
        irrelevant = filled_event(2, n_frames=5, patches=4, dim=2, t0=10.0)
        return compress_stream(
            [relevant, irrelevant],
            [EventEmbedding([1.0, 0.0], "t"), EventEmbedding([0.0, 1.0], "t")],
            [1.0, 0.0],
            CompressionConfig(theta=0.45),
        )

    def test_token_counts(self):
        units = self._mixed_units()
        assert [u.kind for u in units] == [PRESERVED, POOLED]
        assert token_count(units) == 5 * 4 + 5 == 25
        assert original_token_count(units) == 40

    def test_ratio_is_exact(self):
        units = self._mixed_units()
        assert compression_ratio(units) == 25 / 40

    def test_all_preserved_means_ratio_one(self):
        event = filled_event(1, 3, 2, 2)
        units = compress_stream(
            [event], [EventEmbedding([1.0, 0.0], "t")], [1.0, 0.0], CompressionConfig(theta=-1.0)
        )
        assert compression_ratio(units) == 1.0

    def test_empty_stream_has_no_ratio(self):
        assert token_count([]) == 0
        with pytest.raises(ValueError):
            compression_ratio([])
