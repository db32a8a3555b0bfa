"""Readers and writers for KITTI-style scans and poses, binary matrices and CSV."""

from __future__ import annotations

import csv
import os
import struct

import numpy as np

from .errors import FormatError
from .core_geometry import PointCloud, RigidTransform, SequenceMeta, compose, orthonormalize

SCAN_DTYPE = np.dtype("<f4")
RECORD_BYTES = 16
_MATRIX_HEADER = struct.Struct("<ii")


def load_scan(path):
    """Read a headerless little-endian float32 (x, y, z, intensity) scan."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) % RECORD_BYTES:
        raise FormatError(
            f"{path}: {len(raw)} bytes is not a multiple of {RECORD_BYTES}")
    data = np.frombuffer(raw, dtype=SCAN_DTYPE).reshape(-1, 4)
    if not np.all(np.isfinite(data[:, :3])):
        raise FormatError(f"{path}: non-finite coordinates")
    return PointCloud(data[:, :3].astype(np.float64),
                      intensity=data[:, 3].astype(np.float64))


def write_scan(path, cloud):
    data = np.zeros((len(cloud), 4), dtype=SCAN_DTYPE)
    data[:, :3] = cloud.points
    if cloud.intensity is not None:
        data[:, 3] = cloud.intensity
    with open(path, "wb") as fh:
        fh.write(data.tobytes())


def _rigid(M, tol=1e-4):
    """[R|t] from printed text; rounding is projected away, real skew is not."""
    R = M[:, :3]
    if not np.all(np.isfinite(M)) or np.abs(R.T @ R - np.eye(3)).max() > tol:
        raise FormatError("rotation block is not orthonormal")
    return RigidTransform(orthonormalize(R), M[:, 3])


def load_poses(poses_path, calib=None):
    """Parse a KITTI pose file (12 reals per line, row-major 3x4).

    With ``calib`` (sensor-to-reference extrinsic) each pose ``P`` becomes
    ``P @ calib`` so it maps sensor coordinates into the world frame.
    """
    poses = []
    with open(poses_path) as fh:
        for lineno, line in enumerate(fh, 1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 12:
                raise FormatError(
                    f"{poses_path}:{lineno}: expected 12 values, got {len(tokens)}")
            try:
                values = np.array([float(tok) for tok in tokens])
            except ValueError as exc:
                raise FormatError(f"{poses_path}:{lineno}: {exc}") from None
            M = values.reshape(3, 4)
            try:
                pose = _rigid(M)
            except ValueError as exc:
                raise FormatError(f"{poses_path}:{lineno}: {exc}") from None
            poses.append(compose(pose, calib) if calib is not None else pose)
    return poses


def write_poses(path, poses):
    with open(path, "w") as fh:
        for T in poses:
            M = np.hstack([T.rotation, T.translation[:, None]])
            fh.write(" ".join(repr(float(v)) for v in M.reshape(-1)) + "\n")


def load_calib(path, key="Tr"):
    """Read the ``Tr:`` line of a KITTI calib file as a RigidTransform."""
    with open(path) as fh:
        for line in fh:
            name, _, rest = line.partition(":")
            if name.strip() == key:
                values = [float(v) for v in rest.split()]
                if len(values) != 12:
                    raise FormatError(f"{path}: {key} needs 12 values")
                try:
                    return _rigid(np.reshape(values, (3, 4)))
                except ValueError as exc:
                    raise FormatError(f"{path}: {exc}") from None
    raise FormatError(f"{path}: no '{key}:' entry")


def load_sequence(directory):
    """Collect ``velodyne/*.bin`` scans and ``poses.txt`` from a sequence dir.

    An optional ``calib.txt`` with a ``Tr:`` line is applied to the poses.
    """
    scan_dir = os.path.join(directory, "velodyne")
    if not os.path.isdir(scan_dir):
        raise FileNotFoundError(f"{scan_dir}: no such directory")
    scans = sorted(f for f in os.listdir(scan_dir) if f.endswith(".bin"))
    calib_path = os.path.join(directory, "calib.txt")
    calib = load_calib(calib_path) if os.path.exists(calib_path) else None
    poses = load_poses(os.path.join(directory, "poses.txt"), calib)
    return SequenceMeta([os.path.join(scan_dir, f) for f in scans], poses)


def write_matrix(path, matrix):
    """Row-major float32 matrix prefixed by two little-endian int32 (rows, cols)."""
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2:
        raise FormatError("only 2-D matrices can be written")
    with open(path, "wb") as fh:
        fh.write(_MATRIX_HEADER.pack(*arr.shape))
        fh.write(arr.tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _MATRIX_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    rows, cols = _MATRIX_HEADER.unpack_from(raw)
    body = raw[_MATRIX_HEADER.size:]
    if rows < 0 or cols < 0 or len(body) != rows * cols * 4:
        raise FormatError(f"{path}: header ({rows}, {cols}) does not match payload")
    return np.frombuffer(body, dtype="<f4").reshape(rows, cols).copy()


def write_ground_csv(path_or_file, cloud):
    """Write ``x,y,z,ground_prob`` rows for an annotated cloud."""
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh)
        writer.writerow(["x_m", "y_m", "z_m", "ground_prob"])
        probs = cloud.ground_prob if cloud.ground_prob is not None else np.zeros(len(cloud))
        for p, g in zip(cloud.points, probs):
            writer.writerow([f"{p[0]:.6f}", f"{p[1]:.6f}", f"{p[2]:.6f}", f"{g:.6f}"])
    finally:
        if own:
            fh.close()
