"""Patch-wise ground probability on a polar grid.

A cloud is cut into ring/sector patches around the sensor.  Every patch with
enough points gets a PCA plane fit, and the fit is scored by three factors:
how upright its normal is, how far its centroid rises above the expected
ground height, and how thin it is along the normal.  Points inherit the
probability of their patch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_positive, check_probability
from .errors import DegeneratePatchError, PreconditionError
from .core_geometry import PointCloud

_VERTICAL_EPS = 1e-12


@dataclass(frozen=True)
class PatchGrid:
    num_rings: int = 4
    num_sectors: int = 16
    max_range: float = 80.0
    min_points_per_patch: int = 10

    def __post_init__(self):
        if self.num_rings < 1 or self.num_sectors < 1:
            raise PreconditionError("num_rings and num_sectors must be >= 1")
        check_positive(self.max_range, "max_range")

    def bin_points(self, points):
        """Return (ring, sector) per point; ring is -1 beyond ``max_range``."""
        pts = np.asarray(points, dtype=np.float64)
        r = np.hypot(pts[:, 0], pts[:, 1])
        ring = np.floor(r * (self.num_rings / self.max_range)).astype(np.int64)
        ring = np.minimum(ring, self.num_rings - 1)
        ring[r > self.max_range] = -1
        theta = np.arctan2(pts[:, 1], pts[:, 0]) % (2 * np.pi)
        sector = np.floor(theta * (self.num_sectors / (2 * np.pi))).astype(np.int64)
        sector = np.minimum(sector, self.num_sectors - 1)
        return ring, sector


@dataclass(frozen=True)
class PatchStats:
    centroid: np.ndarray
    normal: np.ndarray
    eigenvalues: np.ndarray
    point_count: int


@dataclass(frozen=True)
class GroundParams:
    uprightness_sharpness: float = 4.0
    elevation_mean: float = -1.7
    elevation_sigma: float = 0.3
    flatness_sigma: float = 0.01
    ground_prob_threshold: float = 0.5

    def __post_init__(self):
        check_positive(self.elevation_sigma, "elevation_sigma")
        check_positive(self.flatness_sigma, "flatness_sigma")
        check_probability(self.ground_prob_threshold, "ground_prob_threshold")
        if self.uprightness_sharpness < 0:
            raise PreconditionError("uprightness_sharpness must be >= 0")


@dataclass(frozen=True)
class Patch:
    ring: int
    sector: int
    indices: np.ndarray
    stats: Optional[PatchStats]


def segment_patches(cloud, grid):
    """Partition ``cloud`` into populated polar patches, ordered by (ring, sector).

    Patches below ``grid.min_points_per_patch`` or whose plane fit is
    degenerate carry ``stats=None``.  Points beyond ``max_range`` belong to
    no patch.
    """
    if len(cloud) == 0:
        return []
    ring, sector = grid.bin_points(cloud.points)
    valid = np.flatnonzero(ring >= 0)
    patch_id = ring[valid] * grid.num_sectors + sector[valid]
    order = np.argsort(patch_id, kind="stable")
    ids, starts = np.unique(patch_id[order], return_index=True)
    patches = []
    for pid, members in zip(ids, np.split(valid[order], starts[1:])):
        stats = None
        if len(members) >= grid.min_points_per_patch:
            try:
                stats = fit_plane_pca(cloud.points[members])
            except DegeneratePatchError:
                stats = None
        patches.append(Patch(int(pid // grid.num_sectors),
                             int(pid % grid.num_sectors), members, stats))
    return patches


def fit_plane_pca(points):
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 3:
        raise DegeneratePatchError(f"plane fit needs >= 3 points, got {len(pts)}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals[::-1], 0.0, None)
    evecs = evecs[:, ::-1]
    if evals[0] <= 0 or evals[1] <= 1e-12 * evals[0]:
        raise DegeneratePatchError("points are collinear or coincident")
    normal = evecs[:, 2] / np.linalg.norm(evecs[:, 2])
    if abs(normal[2]) > _VERTICAL_EPS:
        if normal[2] < 0:
            normal = -normal
    else:
        normal[2] = 0.0
        normal /= np.linalg.norm(normal)
        first = normal[np.flatnonzero(np.abs(normal) > _VERTICAL_EPS)[0]]
        if first < 0:
            normal = -normal
    return PatchStats(centroid, normal, evals, len(pts))


def patch_ground_probability(stats, params):
    upright = max(0.0, float(stats.normal[2])) ** params.uprightness_sharpness
    rise = max(0.0, float(stats.centroid[2]) - params.elevation_mean)
    elevation = np.exp(-rise ** 2 / (2 * params.elevation_sigma ** 2))
    flat = np.exp(-float(stats.eigenvalues[2]) / params.flatness_sigma)
    return float(np.clip(upright * elevation * flat, 0.0, 1.0))


def annotate_ground(cloud, grid, params):
    """Return ``cloud`` with a per-point ``ground_prob`` attribute."""
    probs = np.zeros(len(cloud))
    for patch in segment_patches(cloud, grid):
        if patch.stats is not None:
            probs[patch.indices] = patch_ground_probability(patch.stats, params)
    return cloud.with_ground_prob(probs)


def remove_ground(cloud, params):
    """Keep points whose ground probability is below the threshold."""
    if not cloud.is_annotated:
        raise PreconditionError("remove_ground needs an annotated cloud")
    return cloud.subset(cloud.ground_prob < params.ground_prob_threshold)


class GroundSegmenter(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``transform`` annotates (and optionally filters) clouds.

    Accepts a single :class:`PointCloud` or a list of them.
    """

    def __init__(self, num_rings=4, num_sectors=16, max_range=80.0,
                 min_points_per_patch=10, uprightness_sharpness=4.0,
                 elevation_mean=-1.7, elevation_sigma=0.3, flatness_sigma=0.01,
                 ground_prob_threshold=0.5, drop_ground=False):
        self.num_rings = num_rings
        self.num_sectors = num_sectors
        self.max_range = max_range
        self.min_points_per_patch = min_points_per_patch
        self.uprightness_sharpness = uprightness_sharpness
        self.elevation_mean = elevation_mean
        self.elevation_sigma = elevation_sigma
        self.flatness_sigma = flatness_sigma
        self.ground_prob_threshold = ground_prob_threshold
        self.drop_ground = drop_ground

    def _build(self):
        grid = PatchGrid(self.num_rings, self.num_sectors, self.max_range,
                         self.min_points_per_patch)
        params = GroundParams(self.uprightness_sharpness, self.elevation_mean,
                              self.elevation_sigma, self.flatness_sigma,
                              self.ground_prob_threshold)
        return grid, params

    def fit(self, X=None, y=None):
        # stateless; fitting only validates the parameters
        self._build()
        return self

    def transform(self, X):
        grid, params = self._build()

        def one(cloud):
            out = annotate_ground(cloud, grid, params)
            return remove_ground(out, params) if self.drop_ground else out

        if isinstance(X, PointCloud):
            return one(X)
        return [one(c) for c in X]
