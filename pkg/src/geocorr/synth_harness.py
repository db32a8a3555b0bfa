"""Seeded synthetic scenes, scan pairs and looping scan sequences.

Scenes are a noisy ground disk on ``z = 0`` plus parametric structures
(walls, poles, boxes) whose surfaces are sampled uniformly by area.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core_geometry import PointCloud, RigidTransform, compose, invert, transform_cloud
from .io import write_poses, write_scan
from .errors import PreconditionError

SENSOR_HEIGHT = 1.7


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    ground_extent: float = 25.0
    ground_point_count: int = 6000
    num_walls: int = 4
    num_boxes: int = 6
    num_poles: int = 8
    noise_sigma: float = 0.0
    overlap_fraction: float = 1.0
    density: float = 25.0

    def __post_init__(self):
        counts = (self.ground_point_count, self.num_walls, self.num_boxes, self.num_poles)
        if min(counts) < 0:
            raise PreconditionError("scene counts must be >= 0")
        if self.noise_sigma < 0:
            raise PreconditionError("noise_sigma must be >= 0")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise PreconditionError("overlap_fraction must lie in [0, 1]")
        if self.ground_extent <= 0 or self.density <= 0:
            raise PreconditionError("ground_extent and density must be > 0")


@dataclass(frozen=True, eq=False)
class LabeledScene:
    cloud: PointCloud
    is_ground: np.ndarray

    def __post_init__(self):
        if len(self.is_ground) != len(self.cloud):
            raise PreconditionError("label count differs from point count")


class SyntheticPair(NamedTuple):
    cloudA: PointCloud
    cloudB: PointCloud
    T_gt: RigidTransform
    correspondences: np.ndarray
    is_ground_A: np.ndarray
    is_ground_B: np.ndarray


# -- surface primitives ------------------------------------------------------

@dataclass(frozen=True)
class Wall:
    center: tuple
    yaw: float
    length: float
    height: float

    def area(self):
        return self.length * self.height

    def sample(self, rng, n):
        u = rng.uniform(-0.5, 0.5, n) * self.length
        z = rng.uniform(0.0, self.height, n)
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        return np.column_stack([self.center[0] + c * u, self.center[1] + s * u, z])


@dataclass(frozen=True)
class Pole:
    center: tuple
    height: float
    radius: float = 0.15

    def area(self):
        return 2 * np.pi * self.radius * self.height

    def sample(self, rng, n):
        theta = rng.uniform(0, 2 * np.pi, n)
        z = rng.uniform(0.0, self.height, n)
        return np.column_stack([self.center[0] + self.radius * np.cos(theta),
                                self.center[1] + self.radius * np.sin(theta), z])


@dataclass(frozen=True)
class Box:
    center: tuple
    size: tuple

    def _faces(self):
        sx, sy, sz = self.size
        # four sides and the roof; the bottom rests on the ground
        return np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy])

    def area(self):
        return float(self._faces().sum())

    def sample(self, rng, n):
        sx, sy, sz = self.size
        faces = self._faces()
        which = rng.choice(5, size=n, p=faces / faces.sum())
        u, v = rng.uniform(-0.5, 0.5, (2, n))
        pts = np.column_stack([u * sx, v * sy, (v + 0.5) * sz])
        for face, sign in ((0, -0.5), (1, 0.5)):
            m = which == face
            pts[m] = np.column_stack([np.full(m.sum(), sign * sx), u[m] * sy, (v[m] + 0.5) * sz])
        for face, sign in ((2, -0.5), (3, 0.5)):
            m = which == face
            pts[m] = np.column_stack([u[m] * sx, np.full(m.sum(), sign * sy), (v[m] + 0.5) * sz])
        pts[which == 4, 2] = sz
        return pts + np.array([self.center[0], self.center[1], 0.0])


def random_structures(rng, spec, region=None):
    """Place ``spec``'s walls, boxes and poles uniformly inside a disk."""
    reach = 0.8 * spec.ground_extent if region is None else region

    def spot():
        r = reach * np.sqrt(rng.uniform())
        a = rng.uniform(0, 2 * np.pi)
        return (r * np.cos(a), r * np.sin(a))

    out = []
    for _ in range(spec.num_walls):
        out.append(Wall(spot(), rng.uniform(0, np.pi), rng.uniform(4, 12), rng.uniform(2, 5)))
    for _ in range(spec.num_boxes):
        out.append(Box(spot(), (rng.uniform(1, 4.5), rng.uniform(1, 4.5), rng.uniform(1, 3))))
    for _ in range(spec.num_poles):
        out.append(Pole(spot(), rng.uniform(2.5, 7), rng.uniform(0.1, 0.3)))
    return out


def sample_structures(rng, structures, density):
    parts = []
    for s in structures:
        n = int(round(s.area() * density))
        if n:
            parts.append(s.sample(rng, n))
    return np.vstack(parts) if parts else np.zeros((0, 3))


def sample_ground_disk(rng, n, radius, center=(0.0, 0.0)):
    r = radius * np.sqrt(rng.uniform(size=n))
    a = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([center[0] + r * np.cos(a), center[1] + r * np.sin(a), np.zeros(n)])


def generate_scene(spec):
    rng = np.random.default_rng(spec.seed)
    ground = sample_ground_disk(rng, spec.ground_point_count, spec.ground_extent)
    structure = sample_structures(rng, random_structures(rng, spec), spec.density)
    pts = np.vstack([ground, structure])
    if spec.noise_sigma > 0:
        pts = pts + rng.normal(0.0, spec.noise_sigma, pts.shape)
    labels = np.concatenate([np.ones(len(ground), bool), np.zeros(len(structure), bool)])
    return LabeledScene(PointCloud(pts), labels)


def make_pair(scene, T, spec):
    """Build (A, B = T * subset(A) + clutter) with known correspondences.

    ``round(overlap_fraction * N)`` points of A survive into B with fresh
    noise; the rest of B is structure clutter from an unrelated layout.
    """
    rng = np.random.default_rng([spec.seed, 1])
    n = len(scene.cloud)
    keep = int(round(spec.overlap_fraction * n))
    kept = np.sort(rng.choice(n, size=keep, replace=False)) if keep else np.zeros(0, np.int64)
    pts = scene.cloud.points[kept]
    if spec.noise_sigma > 0:
        pts = pts + rng.normal(0.0, spec.noise_sigma, pts.shape)
    extra = n - keep
    clutter = np.zeros((0, 3))
    if extra:
        layout = random_structures(rng, spec)
        pool = sample_structures(rng, layout, spec.density)
        while len(pool) < extra:
            pool = np.vstack([pool, sample_structures(rng, layout, spec.density)])
        clutter = pool[rng.choice(len(pool), size=extra, replace=False)]
        if spec.noise_sigma > 0:
            clutter = clutter + rng.normal(0.0, spec.noise_sigma, clutter.shape)
    cloudB = transform_cloud(PointCloud(np.vstack([pts, clutter])), T)
    corr = np.column_stack([kept, np.arange(keep)]).astype(np.int64)
    ground_B = np.concatenate([scene.is_ground[kept], np.zeros(extra, bool)])
    return SyntheticPair(scene.cloud, cloudB, T, corr, scene.is_ground, ground_B)


def random_planar_transform(rng, max_yaw=np.pi, max_translation=5.0):
    """Yaw about z plus a horizontal translation, as between two LiDAR scans."""
    yaw = rng.uniform(-max_yaw, max_yaw)
    t = np.append(rng.uniform(-max_translation, max_translation, 2), 0.0)
    return RigidTransform.from_yaw(yaw, t)


# -- looping sequences ---------------------------------------------------------

@dataclass(frozen=True)
class LoopSequenceSpec:
    seed: int = 0
    num_scans: int = 50
    loop_scans: int = 36
    step: float = 8.0
    revisit_offset: float = 1.0
    sensor_range: float = 20.0
    ground_points: int = 3000
    density: float = 15.0
    noise_sigma: float = 0.02
    structures_per_scan: float = 4.0
    reverse_revisits: bool = True


def loop_trajectory(spec, rng):
    """Rectangle loop of ``loop_scans`` poses, then revisits of its start."""
    perimeter = spec.loop_scans * spec.step
    width = perimeter / 6.0
    length = 2 * width
    corners = np.array([[0, 0], [length, 0], [length, width], [0, width], [0, 0]])
    seg = np.linalg.norm(np.diff(corners, axis=0), axis=1)
    cum = np.concatenate([[0], np.cumsum(seg)])

    def at(s):
        s = s % perimeter
        k = min(np.searchsorted(cum, s, side="right") - 1, 3)
        d = (corners[k + 1] - corners[k]) / seg[k]
        return corners[k] + d * (s - cum[k]), np.arctan2(d[1], d[0])

    poses = []
    for i in range(spec.num_scans):
        if i < spec.loop_scans:
            xy, heading = at(i * spec.step)
            jitter = np.zeros(2)
        else:
            xy, heading = at((i - spec.loop_scans) * spec.step)
            a = rng.uniform(0, 2 * np.pi)
            jitter = spec.revisit_offset * rng.uniform() * np.array([np.cos(a), np.sin(a)])
            if spec.reverse_revisits and (i - spec.loop_scans) % 2:
                heading += np.pi
        heading += rng.normal(0, 0.05)
        poses.append(RigidTransform.from_yaw(heading, (*(xy + jitter), SENSOR_HEIGHT)))
    return poses


def generate_loop_sequence(spec=LoopSequenceSpec()):
    """Return ``(scans, poses)``; each scan is expressed in its sensor frame."""
    rng = np.random.default_rng(spec.seed)
    poses = loop_trajectory(spec, rng)
    centers = np.array([p.translation[:2] for p in poses[:spec.loop_scans]])
    lo, hi = centers.min(axis=0) - spec.sensor_range, centers.max(axis=0) + spec.sensor_range
    n_struct = int(spec.structures_per_scan * spec.loop_scans)
    kinds = rng.choice(3, size=n_struct)
    structures = []
    for kind in kinds:
        # keep structures off the driven path
        while True:
            c = rng.uniform(lo, hi)
            if np.min(np.linalg.norm(centers - c, axis=1)) > 3.0:
                break
        if kind == 0:
            structures.append(Wall(tuple(c), rng.uniform(0, np.pi), rng.uniform(4, 15),
                                   rng.uniform(2, 8)))
        elif kind == 1:
            structures.append(Box(tuple(c), (rng.uniform(1, 5), rng.uniform(1, 5),
                                             rng.uniform(1, 4))))
        else:
            structures.append(Pole(tuple(c), rng.uniform(2.5, 8), rng.uniform(0.1, 0.35)))
    scans = []
    for i, pose in enumerate(poses):
        srng = np.random.default_rng([spec.seed, i])
        xy = pose.translation[:2]
        near = [s for s in structures
                if np.linalg.norm(np.asarray(s.center) - xy) < spec.sensor_range + 8]
        world = np.vstack([sample_ground_disk(srng, spec.ground_points, spec.sensor_range, xy),
                           sample_structures(srng, near, spec.density)])
        world = world[np.linalg.norm(world[:, :2] - xy, axis=1) <= spec.sensor_range]
        if spec.noise_sigma > 0:
            world = world + srng.normal(0, spec.noise_sigma, world.shape)
        scans.append(transform_cloud(PointCloud(world), invert(pose)))
    return scans, poses


def relative_transform(pose_from, pose_to):
    """Transform taking points in ``pose_from``'s frame into ``pose_to``'s frame."""
    return compose(invert(pose_to), pose_from)


def write_sequence(directory, scans, poses):
    os.makedirs(os.path.join(directory, "velodyne"), exist_ok=True)
    for i, scan in enumerate(scans):
        write_scan(os.path.join(directory, "velodyne", f"{i:06d}.bin"), scan)
    write_poses(os.path.join(directory, "poses.txt"), poses)


def write_labels_csv(path, scene):
    with open(path, "w") as fh:
        fh.write("index,is_ground\n")
        for i, g in enumerate(scene.is_ground):
            fh.write(f"{i},{int(g)}\n")
