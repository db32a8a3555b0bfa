"""VLAD place descriptors and loop-candidate retrieval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import frozen
from .errors import PreconditionError
from .features import DescriptorSet, compute_descriptors, sample_keypoints
from .ground_model import annotate_ground, remove_ground


@dataclass(frozen=True, eq=False)
class Vocabulary:
    centroids: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.ndim != 2 or len(c) < 1:
            raise PreconditionError("vocabulary needs at least one centroid")
        object.__setattr__(self, "centroids", frozen(c))

    @property
    def k(self):
        return len(self.centroids)

    @property
    def dim(self):
        return self.centroids.shape[1]


class DescriptorDatabase:
    """Global descriptors keyed by strictly increasing scan index."""

    def __init__(self, entries=()):
        self.indices = []
        self._rows = []
        for index, vector in entries:
            self.add(index, vector)

    def add(self, index, vector):
        if self.indices and index <= self.indices[-1]:
            raise PreconditionError("scan indices must be strictly increasing")
        self.indices.append(int(index))
        self._rows.append(np.asarray(vector, dtype=np.float64))

    def __len__(self):
        return len(self.indices)

    @property
    def matrix(self):
        return np.vstack(self._rows) if self._rows else np.zeros((0, 0))

    def vector(self, index):
        return self._rows[self.indices.index(index)]

    @property
    def entries(self):
        return list(zip(self.indices, self._rows))


def _sq_dists(X, C):
    return (np.sum(X ** 2, axis=1)[:, None] - 2 * X @ C.T
            + np.sum(C ** 2, axis=1)[None, :])


def _assign(X, C):
    # argmin returns the first minimum, i.e. the lowest centroid index on ties
    return np.argmin(_sq_dists(X, C), axis=1)


def _kmeans_pp(X, k, rng):
    centers = [X[rng.integers(len(X))]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(len(X))
        else:
            idx = rng.choice(len(X), p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def train_vocabulary(descriptor_sets, k, seed=0, max_iters=100):
    """Lloyd k-means with k-means++ seeding over all descriptors.

    Stops when assignments stop changing or after ``max_iters`` rounds.
    Empty clusters keep their previous centroid.
    """
    sets = [d.vectors if isinstance(d, DescriptorSet) else np.asarray(d)
            for d in descriptor_sets]
    X = np.vstack(sets) if sets else np.zeros((0, 0))
    if len(X) < k:
        raise PreconditionError(f"need at least k={k} descriptors, got {len(X)}")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(X, k, rng)
    labels = None
    for _ in range(max_iters):
        new = _assign(X, C)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            members = X[labels == c]
            if len(members):
                C[c] = members.mean(axis=0)
    return Vocabulary(C)


def aggregate(descriptors, vocab):
    """Hard-assignment VLAD with intra-block and global L2 normalization."""
    X = descriptors.vectors if isinstance(descriptors, DescriptorSet) else np.asarray(descriptors)
    if len(X) == 0:
        raise PreconditionError("cannot aggregate an empty descriptor set")
    if X.shape[1] != vocab.dim:
        raise PreconditionError(f"descriptor dim {X.shape[1]} != vocabulary dim {vocab.dim}")
    labels = _assign(X, vocab.centroids)
    blocks = np.zeros_like(vocab.centroids)
    np.add.at(blocks, labels, X - vocab.centroids[labels])
    norms = np.linalg.norm(blocks, axis=1)
    # a block whose residuals cancel to rounding noise is treated as empty
    counts = np.bincount(labels, minlength=len(blocks))
    nz = norms > 1e-9 * np.maximum(counts, 1)
    blocks[nz] /= norms[nz, None]
    blocks[~nz] = 0.0
    vec = blocks.reshape(-1)
    total = np.linalg.norm(vec)
    if total == 0:
        raise PreconditionError("all VLAD residuals are zero")
    return vec / total


def query_candidates(db, query, query_index, top_k, exclusion_window):
    """Rank scans at least ``exclusion_window`` before ``query_index``.

    Returns ``[(scan_index, similarity), ...]`` by descending inner
    product, ties to the lower scan index.
    """
    if len(db) == 0:
        raise PreconditionError("descriptor database is empty")
    idx = np.asarray(db.indices)
    eligible = idx <= query_index - exclusion_window
    if not eligible.any() or top_k <= 0:
        return []
    sims = db.matrix[eligible] @ np.asarray(query, dtype=np.float64)
    cand = idx[eligible]
    order = np.lexsort((cand, -sims))[:top_k]
    return [(int(cand[o]), float(sims[o])) for o in order]


def scan_descriptors(cloud, config):
    """Local descriptors of one scan as fed to the aggregation step."""
    annotated = annotate_ground(cloud, config.grid(), config.ground_params())
    if config.global_remove_ground:
        kept = remove_ground(annotated, config.ground_params())
        annotated = kept if len(kept) else annotated
    if len(annotated) == 0:
        raise PreconditionError("scan is empty")
    keys = sample_keypoints(annotated, config.global_keypoints)
    return compute_descriptors(annotated, keys, config.descriptor_radius)


class VLADEncoder(TransformerMixin, BaseEstimator):
    """Learns a k-means vocabulary in ``fit``; ``transform`` yields VLAD rows."""

    def __init__(self, n_clusters=32, max_iter=100, random_state=0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        self.vocabulary_ = train_vocabulary(X, self.n_clusters, self.random_state,
                                            self.max_iter)
        return self

    def transform(self, X):
        if not hasattr(self, "vocabulary_"):
            raise NotFittedError("VLADEncoder is not fitted yet")
        return np.vstack([aggregate(d, self.vocabulary_) for d in X])
