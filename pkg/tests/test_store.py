import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamctx.errors import (
    BadMagicError,
    DegenerateVectorError,
    DimensionMismatchError,
    EmbeddingFormatError,
    ManifestError,
    NonFiniteValueError,
    TimestampOrderError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from streamctx.store import (
    FrameFeature,
    PathEntry,
    DialoguePath,
    QARecord,
    SegmentMeta,
    SessionManifest,
    cosine,
    load_embeddings,
    load_manifest,
    load_session_frames,
    manifest_from_dict,
    manifest_to_dict,
    mean_pool,
    minmax_normalize,
    save_embeddings,
    save_manifest,
)

from conftest import make_frames


class TestFrameFeature:
    def test_basic_construction(self):
        f = FrameFeature([[1.0, 2.0], [3.0, 4.0]], 1.5)
        assert f.num_patches == 2 and f.dim == 2
        assert f.patches.dtype == np.float32
        assert f.flat().tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_patches_are_immutable(self):
        f = FrameFeature([[1.0]], 0.0)
        with pytest.raises(ValueError):
            f.patches[0, 0] = 5.0

    @pytest.mark.parametrize("bad", [[1.0, 2.0], [[[1.0]]], np.zeros((0, 3)), np.zeros((3, 0))])
    def test_rejects_non_matrix_shapes(self, bad):
        with pytest.raises(DimensionMismatchError):
            FrameFeature(bad, 0.0)

    def test_rejects_non_finite(self):
        with pytest.raises(NonFiniteValueError):
            FrameFeature([[np.nan, 1.0]], 0.0)
        with pytest.raises(NonFiniteValueError):
            FrameFeature([[1.0]], float("inf"))
        with pytest.raises(NonFiniteValueError):
            FrameFeature([[1.0]], -0.5)


class TestCosine:
    def test_identical_vector_is_exactly_one(self):
        assert cosine([1, 2, 2], [1, 2, 2]) == 1.0

    def test_orthogonal_is_zero(self):
        assert cosine([1, 0], [0, 3]) == 0.0

    def test_opposite_is_minus_one(self):
        assert cosine([3, 0], [-2, 0]) == -1.0

    def test_known_fraction(self):
        # dot 8 over norms 3 * 3
        assert cosine([1, 2, 2], [2, 1, 2]) == 8 / 9

    def test_zero_norm_raises(self):
        with pytest.raises(DegenerateVectorError):
            cosine([0, 0], [1, 2])

    def test_dimension_mismatch_raises(self):
        with pytest.raises(DimensionMismatchError):
            cosine([1, 2], [1, 2, 3])

    def test_scale_invariance_and_symmetry(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            a = rng.normal(size=6)
            b = rng.normal(size=6)
            s = cosine(a, b)
            assert abs(s - cosine(b, a)) < 1e-12
            assert abs(s - cosine(3.7 * a, 0.002 * b)) < 1e-12
            assert -1.0 <= s <= 1.0


class TestMeanPool:
    def test_two_rows(self):
        assert mean_pool([[1, 3], [5, 7]]).tolist() == [3.0, 5.0]

    def test_three_rows(self):
        assert mean_pool([[0, 0], [0, 0], [6, 3]]).tolist() == [2.0, 1.0]

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            mean_pool(np.zeros((0, 4)))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        rows = rng.normal(size=(9, 5))
        shuffled = rows[rng.permutation(9)]
        assert np.allclose(mean_pool(rows), mean_pool(shuffled))


class TestMinmaxNormalize:
    def test_known_values(self):
        assert minmax_normalize([2, 4, 10]).tolist() == [0.0, 0.25, 1.0]

    def test_constant_input_maps_to_zeros(self):
        assert minmax_normalize([5, 5, 5]).tolist() == [0.0, 0.0, 0.0]

    def test_single_value(self):
        assert minmax_normalize([42.0]).tolist() == [0.0]

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            minmax_normalize([])

    @given(st.lists(st.floats(-1e9, 1e9), min_size=1, max_size=40))
    def test_range_and_order_preserved(self, values):
        out = minmax_normalize(values)
        assert np.all(out >= 0.0) and np.all(out <= 1.0)
        order = np.argsort(np.asarray(values, dtype=np.float64), kind="stable")
        assert np.all(np.diff(out[order]) >= 0)


class TestEmbeddingFiles:
    def test_round_trip_is_bit_exact(self, tmp_path):
        frames = make_frames(7, patches=3, dim=5, seed=1)
        path = tmp_path / "frames.bin"
        save_embeddings(path, frames)
        loaded = load_embeddings(path)
        assert len(loaded) == 7
        for a, b in zip(frames, loaded):
            assert a.timestamp == b.timestamp
            assert np.array_equal(a.patches, b.patches)
            assert a.patches.dtype == b.patches.dtype == np.float32

    def test_file_size_accounting(self, tmp_path):
        # header 20 + timestamps 2*8 + features 2*3*4*4
        frames = make_frames(2, patches=3, dim=4)
        path = tmp_path / "f.bin"
        save_embeddings(path, frames)
        assert path.stat().st_size == 20 + 16 + 96

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.bin"
        frames = make_frames(2)
        save_embeddings(path, frames)
        data = bytearray(path.read_bytes())
        data[:4] = b"NOPE"
        path.write_bytes(bytes(data))
        with pytest.raises(BadMagicError):
            load_embeddings(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "f.bin"
        save_embeddings(path, make_frames(2))
        data = bytearray(path.read_bytes())
        data[4] = 9
        path.write_bytes(bytes(data))
        with pytest.raises(VersionMismatchError):
            load_embeddings(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "f.bin"
        save_embeddings(path, make_frames(4))
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        with pytest.raises(TruncatedPayloadError):
            load_embeddings(path)
        path.write_bytes(data[:3])
        with pytest.raises(TruncatedPayloadError):
            load_embeddings(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "f.bin"
        save_embeddings(path, make_frames(2))
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(path)

    def test_non_finite_payload(self, tmp_path):
        path = tmp_path / "f.bin"
        save_embeddings(path, make_frames(2, patches=1, dim=1))
        data = bytearray(path.read_bytes())
        data[-4:] = np.array([np.inf], dtype="<f4").tobytes()
        path.write_bytes(bytes(data))
        with pytest.raises(NonFiniteValueError):
            load_embeddings(path)

    def test_decreasing_timestamps(self, tmp_path):
        path = tmp_path / "f.bin"
        save_embeddings(path, make_frames(2, patches=1, dim=1))
        data = bytearray(path.read_bytes())
        # overwrite the second timestamp with something before the first
        data[28:36] = np.array([-1.0], dtype="<f8").tobytes()
        path.write_bytes(bytes(data))
        with pytest.raises(TimestampOrderError):
            load_embeddings(path)

    def test_save_rejects_mixed_shapes_and_bad_order(self, tmp_path):
        a = FrameFeature([[1.0, 2.0]], 0.0)
        b = FrameFeature([[1.0], [2.0]], 1.0)
        with pytest.raises(DimensionMismatchError):
            save_embeddings(tmp_path / "x.bin", [a, b])
        c = FrameFeature([[1.0, 2.0]], 2.0)
        d = FrameFeature([[1.0, 2.0]], 1.0)
        with pytest.raises(TimestampOrderError):
            save_embeddings(tmp_path / "y.bin", [c, d])
        with pytest.raises(ValueError):
            save_embeddings(tmp_path / "z.bin", [])

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(1, 6),
        p=st.integers(1, 3),
        d=st.integers(1, 4),
        seed=st.integers(0, 2**16),
    )
    def test_round_trip_property(self, tmp_path_factory, n, p, d, seed):
        rng = np.random.default_rng(seed)
        stamps = np.cumsum(rng.uniform(0, 3, size=n))
        frames = [
            FrameFeature(rng.normal(scale=100, size=(p, d)).astype(np.float32), float(t))
            for t in stamps
        ]
        path = tmp_path_factory.mktemp("rt") / "f.bin"
        save_embeddings(path, frames)
        loaded = load_embeddings(path)
        assert all(
            a.timestamp == b.timestamp and np.array_equal(a.patches, b.patches)
            for a, b in zip(frames, loaded)
        )


def _tiny_manifest():
    segments = (
        SegmentMeta(1, 0.0, 10.0, "embeddings/s1.bin"),
        SegmentMeta(2, 10.0, 20.0, "embeddings/s2.bin"),
    )
    pool = (
        QARecord(1, 1, "attributes", "What color is the lamp?", "Red."),
        QARecord(
            2, 2, "dynamic-updating", "How did the lamp change?", "It moved.",
            relevant_ids={1}, relevance_scores={1: 6.5},
        ),
    )
    streams = (
        DialoguePath((
            PathEntry(1, 10.0),
            PathEntry(2, 20.0, gold_relevant={1}),
        )),
    )
    return SessionManifest("vid-1", segments, pool, streams)


class TestManifest:
    def test_json_round_trip(self, tmp_path):
        manifest = _tiny_manifest()
        path = tmp_path / "manifest.json"
        save_manifest(path, manifest)
        loaded = load_manifest(path)
        assert manifest_to_dict(loaded) == manifest_to_dict(manifest)
        # relevance score keys come back as ints
        assert loaded.qa_pool[1].relevance_scores == {1: 6.5}

    def test_schema_version_checked(self):
        obj = manifest_to_dict(_tiny_manifest())
        obj["schema_version"] = 99
        with pytest.raises(ManifestError):
            manifest_from_dict(obj)

    def test_overlapping_segments_rejected(self):
        with pytest.raises(ManifestError):
            SessionManifest(
                "v",
                (SegmentMeta(1, 0.0, 10.0, "a"), SegmentMeta(2, 9.0, 20.0, "b")),
                (),
            )

    def test_unordered_segments_rejected(self):
        with pytest.raises(ManifestError):
            SessionManifest(
                "v",
                (SegmentMeta(2, 10.0, 20.0, "b"), SegmentMeta(1, 0.0, 10.0, "a")),
                (),
            )

    def test_unknown_qa_type_rejected(self):
        with pytest.raises(ManifestError):
            QARecord(1, 1, "trivia", "q", "a")

    def test_score_out_of_range_rejected(self):
        with pytest.raises(ManifestError):
            QARecord(2, 2, "actions", "q", "a", relevance_scores={1: 7.5})

    def test_relevant_ref_must_be_earlier_segment(self):
        segments = (SegmentMeta(1, 0.0, 10.0, "a"),)
        pool = (
            QARecord(1, 1, "attributes", "q1", "a1"),
            QARecord(2, 1, "actions", "q2", "a2", relevant_ids={1}),
        )
        with pytest.raises(ManifestError):
            SessionManifest("v", segments, pool)

    def test_stream_referencing_unknown_qa_rejected(self):
        segments = (SegmentMeta(1, 0.0, 10.0, "a"),)
        pool = (QARecord(1, 1, "attributes", "q", "a"),)
        stream = DialoguePath((PathEntry(7, 10.0),))
        with pytest.raises(ManifestError):
            SessionManifest("v", segments, pool, (stream,))

    def test_path_invariants(self):
        with pytest.raises(ManifestError):
            DialoguePath((PathEntry(1, 5.0), PathEntry(1, 6.0)))
        with pytest.raises(ManifestError):
            DialoguePath((PathEntry(1, 5.0), PathEntry(2, 4.0)))
        with pytest.raises(ManifestError):
            DialoguePath((PathEntry(1, 5.0, gold_relevant={2}),))

    def test_load_session_frames_checks_windows(self, tmp_path):
        (tmp_path / "embeddings").mkdir()
        save_embeddings(tmp_path / "embeddings" / "s1.bin", make_frames(3, t0=0.0))
        # frame at t=25 is outside segment 2's window
        save_embeddings(tmp_path / "embeddings" / "s2.bin", make_frames(3, t0=15.0, dt=5.0))
        manifest = SessionManifest(
            "v",
            (
                SegmentMeta(1, 0.0, 10.0, "embeddings/s1.bin"),
                SegmentMeta(2, 10.0, 20.0, "embeddings/s2.bin"),
            ),
            (),
        )
        with pytest.raises(ManifestError):
            load_session_frames(manifest, tmp_path)
