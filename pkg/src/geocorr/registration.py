"""Rigid pose recovery from correspondences and the pairwise pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from .config import PipelineConfig, derive_seed
from .correspondence import apply_weights, ground_weights, soft_projection, solve_uot
from .errors import (DegenerateConfigurationError, InsufficientMatchesError,
                     PipelineError, PreconditionError)
from .features import compute_descriptors, cost_matrix, sample_keypoints
from .core_geometry import RigidTransform
from .ground_model import annotate_ground, remove_ground


@dataclass(frozen=True, eq=False)
class MatchSet:
    source: np.ndarray
    target: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        for name in ("source", "target"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=np.int64).reshape(-1))
        w = np.asarray(self.weight, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "weight", w)
        if not len(self.source) == len(self.target) == len(w):
            raise PreconditionError("match fields differ in length")
        if len(w) and (w.min() <= 0 or w.max() > 1):
            raise PreconditionError("match weights must lie in (0, 1]")

    def __len__(self):
        return len(self.source)

    @property
    def pairs(self):
        return list(zip(self.source.tolist(), self.target.tolist(), self.weight.tolist()))


@dataclass(frozen=True)
class RegistrationResult:
    transform: RigidTransform
    inlier_count: int
    residual_rms: float
    method: str
    match_count: int = 0

    @property
    def inlier_ratio(self):
        return self.inlier_count / self.match_count if self.match_count else 0.0


def kabsch_weighted(src, dst, weights):
    """Weighted least-squares rigid transform taking ``src`` onto ``dst``."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if src.shape != dst.shape or src.shape[0] != len(w):
        raise PreconditionError("src, dst and weights must have matching lengths")
    if np.any(w < 0):
        raise PreconditionError("weights must be nonnegative")
    if np.count_nonzero(w) < 3:
        raise DegenerateConfigurationError("need at least 3 positively weighted pairs")
    w = w / w.sum()
    s_bar = w @ src
    d_bar = w @ dst
    H = (src - s_bar).T @ ((dst - d_bar) * w[:, None])
    U, S, Vt = np.linalg.svd(H)
    if S[0] <= 0 or S[1] <= 1e-12 * S[0]:
        raise DegenerateConfigurationError("correspondences are collinear or coincident")
    V = Vt.T
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(V @ U.T))])
    R = V @ D @ U.T
    return RigidTransform(R, d_bar - R @ s_bar)


def extract_matches(plan, min_weight):
    """Mutual row/column argmax pairs whose plan mass reaches ``min_weight``.

    Weights are the kept masses divided by the largest kept mass.
    """
    C = plan.values if hasattr(plan, "values") else np.asarray(plan, dtype=np.float64)
    if C.size == 0:
        return MatchSet([], [], [])
    rows = np.arange(C.shape[0])
    best_j = np.argmax(C, axis=1)
    best_i = np.argmax(C, axis=0)
    value = C[rows, best_j]
    keep = (best_i[best_j] == rows) & (value >= min_weight) & (value > 0)
    if not keep.any():
        return MatchSet([], [], [])
    return MatchSet(rows[keep], best_j[keep], value[keep] / value[keep].max())


def _inliers(T, src, dst, radius):
    return np.linalg.norm(T.apply(src) - dst, axis=1) <= radius


def ransac_register(keysA, keysB, matches, iters=1000, inlier_radius=0.6, seed=0):
    if len(matches) < 3:
        raise InsufficientMatchesError(f"RANSAC needs >= 3 matches, got {len(matches)}")
    src = keysA.positions[matches.source]
    dst = keysB.positions[matches.target]
    ones = np.ones(3)
    rng = np.random.default_rng(seed)
    best, best_count = None, -1
    for _ in range(iters):
        pick = rng.choice(len(matches), 3, replace=False)
        try:
            T = kabsch_weighted(src[pick], dst[pick], ones)
        except DegenerateConfigurationError:
            continue
        count = int(np.count_nonzero(_inliers(T, src, dst, inlier_radius)))
        if count > best_count:
            best, best_count = T, count
    if best is None:
        raise DegenerateConfigurationError("every RANSAC sample was degenerate")
    T = best
    mask = _inliers(T, src, dst, inlier_radius)
    for _ in range(3):
        try:
            refit = kabsch_weighted(src[mask], dst[mask], matches.weight[mask])
        except DegenerateConfigurationError:
            break
        new_mask = _inliers(refit, src, dst, inlier_radius)
        if new_mask.sum() < mask.sum():
            break
        T, stable, mask = refit, np.array_equal(new_mask, mask), new_mask
        if stable:
            break
    resid = np.linalg.norm(T.apply(src[mask]) - dst[mask], axis=1)
    rms = float(np.sqrt(np.mean(resid ** 2))) if len(resid) else float("inf")
    return RegistrationResult(T, int(mask.sum()), rms, "ransac_hard", len(matches))


def soft_svd_register(plan, keysA, keysB):
    """Weighted SVD between keypoints of A and their soft projections in B."""
    proj = soft_projection(plan, keysB)
    valid = proj.valid
    T = kabsch_weighted(keysA.positions[valid], proj.points[valid], proj.row_mass[valid])
    w = proj.row_mass[valid] / proj.row_mass[valid].sum()
    resid = np.linalg.norm(T.apply(keysA.positions[valid]) - proj.points[valid], axis=1)
    rms = float(np.sqrt(w @ resid ** 2))
    n = int(valid.sum())
    return RegistrationResult(T, n, rms, "svd_soft", n)


@dataclass(frozen=True)
class PairCorrespondence:
    """Intermediate products of the pairwise pipeline, kept for diagnostics."""

    keysA: object
    keysB: object
    cost: np.ndarray
    plan: object
    weighted_plan: object


def _prepare(cloud, config, label):
    annotated = annotate_ground(cloud, config.grid(), config.ground_params())
    if config.remove_ground:
        annotated = remove_ground(annotated, config.ground_params())
    if len(annotated) == 0:
        raise PipelineError(f"cloud {label} is empty after ground processing")
    return annotated


def correspond_pair(cloudA, cloudB, config=PipelineConfig()):
    """Run ground annotation through the weighted transport plan."""
    if len(cloudA) == 0 or len(cloudB) == 0:
        raise PipelineError("register_pair needs two nonempty clouds")
    A = _prepare(cloudA, config, "A")
    B = _prepare(cloudB, config, "B")
    keysA = sample_keypoints(A, config.num_keypoints, derive_seed(config.seed, "keypoints"))
    keysB = sample_keypoints(B, config.num_keypoints, derive_seed(config.seed, "keypoints"))
    n = min(len(keysA), len(keysB))
    # FPS prefixes are themselves FPS samples, so truncation keeps the layout
    keysA, keysB = keysA.subset(slice(0, n)), keysB.subset(slice(0, n))
    FA = compute_descriptors(A, keysA, config.descriptor_radius, cKDTree(A.points))
    FB = compute_descriptors(B, keysB, config.descriptor_radius, cKDTree(B.points))
    K = cost_matrix(FA, FB)
    plan = solve_uot(K, config.uot_params())
    weighted = apply_weights(plan, ground_weights(keysA, keysB)) \
        if config.ground_weighting else plan
    return PairCorrespondence(keysA, keysB, K, plan, weighted)


def register_correspondence(corr, config=PipelineConfig()):
    """Pose from an already computed :class:`PairCorrespondence`."""
    if config.pose_method == "svd":
        return soft_svd_register(corr.weighted_plan, corr.keysA, corr.keysB)
    n = len(corr.keysA)
    min_weight = config.min_weight if config.min_weight is not None else 1.0 / (2 * n)
    matches = extract_matches(corr.weighted_plan, min_weight)
    return ransac_register(corr.keysA, corr.keysB, matches, config.ransac_iters,
                           config.inlier_radius, derive_seed(config.seed, "ransac"))


def register_pair(cloudA, cloudB, config=PipelineConfig()):
    """Estimate ``T`` with ``T * cloudA ~ cloudB``."""
    return register_correspondence(correspond_pair(cloudA, cloudB, config), config)


class PairRegistrar(BaseEstimator):
    """Estimator facade over :func:`register_pair`.

    ``predict`` takes a list of ``(cloudA, cloudB)`` pairs and returns one
    :class:`RegistrationResult` per pair.
    """

    def __init__(self, config=None):
        self.config = config

    def fit(self, X=None, y=None):
        self.config_ = self.config if self.config is not None else PipelineConfig()
        return self

    def predict(self, X):
        config = getattr(self, "config_", None) or self.fit().config_
        return [register_pair(a, b, config) for a, b in X]
