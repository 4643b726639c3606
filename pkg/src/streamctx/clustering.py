"""Time-weighted K-means: groups a frame stream into temporally coherent events.

Each frame is flattened to a single feature vector and carries a timestamp.
Assignment uses a composite distance: per frame, the k feature distances and
the k time distances are separately min-max normalized across clusters, then
combined as ``sqrt(nf**2 + alpha_time * nt**2)``.  With ``alpha_time = 0``
this reduces exactly to ordinary nearest-centroid assignment, because min-max
rescaling is monotone per frame.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidConfigError
from .store import FrameFeature

logger = logging.getLogger(__name__)

#: Default cluster-count ratio: one event per 15 frames.
DEFAULT_RATIO = 1.0 / 15.0
DEFAULT_MAX_ITERS = 100
DEFAULT_EPSILON = 1e-4


def choose_k(num_frames: int, ratio: float = DEFAULT_RATIO) -> int:
    """Cluster count for a stream: ``max(1, floor(num_frames * ratio))``.

    The result is additionally capped at ``num_frames`` so every cluster can
    hold at least one frame.
    """
    if num_frames < 1:
        raise InvalidConfigError(f"num_frames must be >= 1, got {num_frames}")
    if not (ratio > 0 and math.isfinite(ratio)):
        raise InvalidConfigError(f"ratio must be a positive finite number, got {ratio}")
    return min(max(1, math.floor(num_frames * ratio)), num_frames)


@dataclass(frozen=True)
class ClusterConfig:
    """Knobs for one clustering run.

    alpha_time weights the (normalized, squared) time distance inside the
    composite metric; 0 ignores time entirely.
    """

    k: int
    alpha_time: float = 1.0
    max_iters: int = DEFAULT_MAX_ITERS
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfigError(f"k must be >= 1, got {self.k}")
        if self.alpha_time < 0 or not math.isfinite(self.alpha_time):
            raise InvalidConfigError(f"alpha_time must be >= 0, got {self.alpha_time}")
        if self.max_iters < 1:
            raise InvalidConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.epsilon < 0:
            raise InvalidConfigError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class ClusterResult:
    """Final state of a clustering run.

    ``assignments`` holds 0-based cluster indices (one per frame, in input
    order) that index directly into the centroid arrays.
    """

    feature_centroids: np.ndarray  # (k, P, D)
    time_centroids: np.ndarray  # (k,)
    assignments: np.ndarray  # (N,) int
    iterations: int
    final_delta: float

    @property
    def k(self) -> int:
        return self.feature_centroids.shape[0]

    def to_dict(self) -> dict:
        k, p, d = self.feature_centroids.shape
        return {
            "k": k,
            "patches": p,
            "dim": d,
            "assignments": self.assignments.tolist(),
            "time_centroids": self.time_centroids.tolist(),
            "iterations": self.iterations,
            "final_delta": self.final_delta,
        }


def _rowwise_minmax(mat: np.ndarray) -> np.ndarray:
    # Same rule as store.minmax_normalize, applied to each row: a constant
    # row (including k == 1) maps to all zeros instead of dividing by zero.
    low = mat.min(axis=1, keepdims=True)
    span = mat.max(axis=1, keepdims=True) - low
    out = np.zeros_like(mat)
    np.divide(mat - low, span, out=out, where=span > 0)
    return out


def _composite_matrix(
    x: np.ndarray, t: np.ndarray, centroids: np.ndarray, taus: np.ndarray, alpha_time: float
) -> np.ndarray:
    """Composite distances for every (frame, cluster) pair; shape (N, k)."""
    d_feat = np.linalg.norm(x[:, None, :] - centroids[None, :, :], axis=2)
    d_time = np.abs(t[:, None] - taus[None, :])
    nf = _rowwise_minmax(d_feat)
    nt = _rowwise_minmax(d_time)
    return np.sqrt(nf**2 + alpha_time * nt**2)


def composite_distances(
    frame_vec, timestamp: float, centroids, time_centroids, alpha_time: float
) -> np.ndarray:
    """Composite distance from one flattened frame to each of k centroids."""
    x = np.asarray(frame_vec, dtype=np.float64).reshape(1, -1)
    c = np.asarray(centroids, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != x.shape[1]:
        raise DimensionMismatchError(
            f"centroids shape {c.shape} incompatible with frame vector of length {x.shape[1]}"
        )
    taus = np.asarray(time_centroids, dtype=np.float64).reshape(-1)
    if taus.shape[0] != c.shape[0]:
        raise DimensionMismatchError("need exactly one time centroid per feature centroid")
    t = np.asarray([timestamp], dtype=np.float64)
    return _composite_matrix(x, t, c, taus, alpha_time)[0]


def _kmeanspp_indices(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding over flattened features only; returns k distinct rows.

    When every remaining candidate sits at squared distance zero from the
    chosen set (duplicate-heavy data), the next seed falls back to a uniform
    draw over the unchosen rows so the seeds stay distinct frames.
    """
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            pool = np.setdiff1d(np.arange(n), np.asarray(chosen))
            nxt = int(rng.choice(pool))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return np.asarray(chosen)


def kmeanspp_init(
    frames: Sequence[FrameFeature], k: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seed centroids from k distinct frames.

    Feature distances alone drive the k-means++ probabilities; each chosen
    frame's timestamp becomes the initial time centroid of its cluster.

    Returns:
        (feature_centroids (k, P, D), time_centroids (k,), chosen indices (k,))
    """
    n = len(frames)
    if not 1 <= k <= n:
        raise InvalidConfigError(f"k must be in [1, {n}], got {k}")
    x, t, (p, d) = _flatten(frames)
    idx = _kmeanspp_indices(x, k, rng)
    return x[idx].reshape(k, p, d).copy(), t[idx].copy(), idx


def _flatten(frames: Sequence[FrameFeature]) -> tuple[np.ndarray, np.ndarray, tuple[int, int]]:
    if not frames:
        raise InvalidConfigError("cannot cluster an empty frame list")
    p, d = frames[0].patches.shape
    for f in frames:
        if f.patches.shape != (p, d):
            raise DimensionMismatchError(
                f"all frames must share patch shape ({p}, {d}), got {f.patches.shape}"
            )
    x = np.stack([f.patches for f in frames]).astype(np.float64).reshape(len(frames), p * d)
    t = np.asarray([f.timestamp for f in frames], dtype=np.float64)
    return x, t, (p, d)


IterationHook = Callable[[int, np.ndarray, np.ndarray, np.ndarray, float], None]


def cluster(
    frames: Sequence[FrameFeature],
    config: ClusterConfig,
    on_iteration: IterationHook | None = None,
) -> ClusterResult:
    """Run time-weighted K-means over a chronological frame stream.

    Each iteration assigns every frame to the composite-distance argmin
    (ties break toward the lowest cluster index), then recomputes each
    centroid as the feature mean and time mean of its members.  A cluster
    left empty by assignment is reseeded from a uniformly random frame drawn
    from the run's seeded generator, keeping whole runs reproducible.  The
    loop stops once the total centroid movement

        delta = sum_j ||c'_j - c_j|| + sum_j |tau'_j - tau_j|

    drops to ``config.epsilon`` or below (checked after each update), or
    after ``config.max_iters`` iterations.

    ``on_iteration(iteration, assignments, centroids, taus, delta)`` fires
    after every update with the assignments that produced it; tests use the
    hook to compare against reference runs iteration by iteration.
    """
    x, t, (p, d) = _flatten(frames)
    n = x.shape[0]
    if config.k > n:
        raise InvalidConfigError(f"k={config.k} exceeds the number of frames ({n})")

    rng = np.random.default_rng(config.seed)
    idx = _kmeanspp_indices(x, config.k, rng)
    centroids = x[idx].copy()
    taus = t[idx].copy()

    assignments = np.zeros(n, dtype=np.intp)
    delta = math.inf
    iterations = 0
    while iterations < config.max_iters:
        dist = _composite_matrix(x, t, centroids, taus, config.alpha_time)
        assignments = dist.argmin(axis=1)

        new_centroids = np.empty_like(centroids)
        new_taus = np.empty_like(taus)
        for j in range(config.k):
            members = assignments == j
            if members.any():
                new_centroids[j] = x[members].mean(axis=0)
                new_taus[j] = t[members].mean()
            else:
                r = int(rng.integers(n))
                logger.debug("cluster %d empty at iteration %d; reseeding from frame %d",
                             j, iterations + 1, r)
                new_centroids[j] = x[r]
                new_taus[j] = t[r]

        delta = float(
            np.linalg.norm(new_centroids - centroids, axis=1).sum()
            + np.abs(new_taus - taus).sum()
        )
        centroids, taus = new_centroids, new_taus
        iterations += 1
        if on_iteration is not None:
            on_iteration(iterations, assignments.copy(), centroids.copy(), taus.copy(), delta)
        if delta <= config.epsilon:
            break

    return ClusterResult(
        feature_centroids=centroids.reshape(config.k, p, d),
        time_centroids=taus,
        assignments=assignments,
        iterations=iterations,
        final_delta=delta,
    )


@dataclass(frozen=True, eq=False)
class Event:
    """A cluster of frames presented as one temporally ordered unit.

    ``event_id`` is the 1-based rank of the event by time centroid;
    ``cluster_index`` points back into the originating ClusterResult.
    """

    event_id: int
    cluster_index: int
    frame_indices: tuple[int, ...]
    frames: tuple[FrameFeature, ...]
    feature_centroid: np.ndarray  # (P, D)
    time_centroid: float
    start_s: float
    end_s: float

    @property
    def num_frames(self) -> int:
        return len(self.frames)


def events_from(result: ClusterResult, frames: Sequence[FrameFeature]) -> list[Event]:
    """One Event per cluster, members and events both ordered by time.

    A cluster with no assigned frames (possible only in degenerate runs) is
    skipped with a warning rather than emitted as an empty event.
    """
    if len(frames) != result.assignments.shape[0]:
        raise DimensionMismatchError(
            f"result covers {result.assignments.shape[0]} frames, got {len(frames)}"
        )
    order: list[tuple[float, int, list[int]]] = []
    for j in range(result.k):
        members = [i for i in range(len(frames)) if result.assignments[i] == j]
        if not members:
            logger.warning("cluster %d has no members; skipping empty event", j)
            continue
        members.sort(key=lambda i: (frames[i].timestamp, i))
        order.append((float(result.time_centroids[j]), j, members))
    order.sort(key=lambda item: (item[0], item[1]))

    events = []
    for rank, (tau, j, members) in enumerate(order, start=1):
        stamps = [frames[i].timestamp for i in members]
        events.append(
            Event(
                event_id=rank,
                cluster_index=j,
                frame_indices=tuple(members),
                frames=tuple(frames[i] for i in members),
                feature_centroid=result.feature_centroids[j],
                time_centroid=tau,
                start_s=min(stamps),
                end_s=max(stamps),
            )
        )
    return events
