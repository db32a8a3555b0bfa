"""Keypoint sampling, handcrafted local descriptors and the matching cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_positive, frozen
from .errors import PreconditionError

N_BINS = 8
MIN_NEIGHBORS = 5
DESCRIPTOR_DIM = 3 + 2 * N_BINS


@dataclass(frozen=True, eq=False)
class KeypointSet:
    positions: np.ndarray
    source_indices: np.ndarray
    ground_prob: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        idx = np.asarray(self.source_indices, dtype=np.int64).reshape(-1)
        gp = np.asarray(self.ground_prob, dtype=np.float64).reshape(-1)
        if not len(pos) == len(idx) == len(gp):
            raise PreconditionError("keypoint fields differ in length")
        if len(np.unique(idx)) != len(idx):
            raise PreconditionError("keypoint source indices must be unique")
        object.__setattr__(self, "positions", frozen(pos))
        object.__setattr__(self, "source_indices", frozen(idx))
        object.__setattr__(self, "ground_prob", frozen(gp))

    def __len__(self):
        return len(self.positions)

    @classmethod
    def from_points(cls, points, ground_prob=None):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        gp = np.zeros(len(pts)) if ground_prob is None else ground_prob
        return cls(pts, np.arange(len(pts)), gp)

    def subset(self, index):
        return KeypointSet(self.positions[index], self.source_indices[index],
                           self.ground_prob[index])


@dataclass(frozen=True, eq=False)
class DescriptorSet:
    vectors: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=np.float64)
        if vec.ndim != 2:
            raise PreconditionError("descriptor vectors must be a 2-D array")
        if len(vec) and not np.allclose(np.linalg.norm(vec, axis=1), 1.0, atol=1e-6):
            raise PreconditionError("descriptors must be L2-normalized")
        object.__setattr__(self, "vectors", frozen(vec))

    def __len__(self):
        return len(self.vectors)

    @property
    def dim(self):
        return self.vectors.shape[1]


def null_descriptor(dim=DESCRIPTOR_DIM):
    d = np.zeros(dim)
    d[0] = 1.0
    return d


def farthest_point_sampling(points, m, start):
    """Greedy max-min selection; ties resolve to the lowest index."""
    n = len(points)
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = start
    min_d2 = np.sum((points - points[start]) ** 2, axis=1)
    for k in range(1, m):
        nxt = int(np.argmax(min_d2))
        chosen[k] = nxt
        np.minimum(min_d2, np.sum((points - points[nxt]) ** 2, axis=1), out=min_d2)
    return chosen


def sample_keypoints(cloud, m, seed=0, start=None):
    """Farthest-point sample ``m`` keypoints from ``cloud``.

    Sampling starts from the point nearest the centroid (or ``start``) and is
    fully deterministic; ``seed`` is accepted for pipeline uniformity.
    """
    n = len(cloud)
    if n == 0:
        raise PreconditionError("cannot sample keypoints from an empty cloud")
    pts = cloud.points
    gp = cloud.ground_prob if cloud.ground_prob is not None else np.zeros(n)
    if n <= m:
        idx = np.arange(n)
    else:
        if start is None:
            start = int(np.argmin(np.sum((pts - pts.mean(axis=0)) ** 2, axis=1)))
        idx = farthest_point_sampling(pts, m, start)
    return KeypointSet(pts[idx], idx, gp[idx])


def _soft_histogram(values, upper, bins=N_BINS):
    """Linearly interpolated histogram over [0, upper], normalized to sum 1."""
    pos = np.clip(values / upper * bins - 0.5, 0.0, bins - 1.0)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, bins - 1)
    frac = pos - lo
    hist = np.bincount(lo, 1.0 - frac, minlength=bins)
    hist += np.bincount(hi, frac, minlength=bins)
    return hist / hist.sum()


def describe_neighborhood(center, neighbors, radius):
    """Descriptor of one keypoint from its neighbor coordinates."""
    if len(neighbors) < MIN_NEIGHBORS:
        return null_descriptor()
    centered = neighbors - neighbors.mean(axis=0)
    evals = np.linalg.eigvalsh(centered.T @ centered / len(neighbors))
    evals = np.clip(evals[::-1], 0.0, None)
    total = evals.sum()
    if total <= 0:
        return null_descriptor()
    offsets = neighbors - center
    height = offsets[:, 2] + radius
    dist = np.linalg.norm(offsets, axis=1)
    desc = np.concatenate([evals / total,
                           _soft_histogram(height, 2 * radius),
                           _soft_histogram(dist, radius)])
    return desc / np.linalg.norm(desc)


def compute_descriptors(cloud, keys, radius=1.0, tree=None):
    check_positive(radius, "radius")
    out = np.empty((len(keys), DESCRIPTOR_DIM))
    if len(keys) == 0:
        return DescriptorSet(out)
    tree = tree if tree is not None else cKDTree(cloud.points)
    neighborhoods = tree.query_ball_point(keys.positions, radius)
    for row, (center, src, nbrs) in enumerate(
            zip(keys.positions, keys.source_indices, neighborhoods)):
        if 0 <= src < len(cloud) and np.array_equal(cloud.points[src], center):
            nbrs = [j for j in nbrs if j != src]
        out[row] = describe_neighborhood(center, cloud.points[nbrs], radius)
    return DescriptorSet(out)


def cost_matrix(FA, FB):
    """Cosine matching cost ``1 - <f_i, f_j>`` clamped to [0, 2]."""
    if FA.dim != FB.dim:
        raise PreconditionError(f"descriptor dims differ: {FA.dim} vs {FB.dim}")
    return np.clip(1.0 - FA.vectors @ FB.vectors.T, 0.0, 2.0)
