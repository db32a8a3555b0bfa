import numpy as np
import pytest

from geocorr.errors import FormatError
from geocorr.core_geometry import PointCloud, RigidTransform, compose
from geocorr.io import (load_calib, load_poses, load_scan, load_sequence, read_matrix,
                        write_ground_csv, write_matrix, write_poses, write_scan)


def test_single_record(tmp_path):
    p = tmp_path / "one.bin"
    p.write_bytes(np.array([1.0, 2.0, 3.0, 0.5], dtype="<f4").tobytes())
    c = load_scan(p)
    np.testing.assert_array_equal(c.points, [[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(c.intensity, [0.5])


def test_empty_scan(tmp_path):
    p = tmp_path / "empty.bin"
    p.write_bytes(b"")
    assert len(load_scan(p)) == 0


def test_bad_length(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"\0" * 17)
    with pytest.raises(FormatError):
        load_scan(p)


def test_missing_scan_is_io_error(tmp_path):
    with pytest.raises(OSError):
        load_scan(tmp_path / "nope.bin")


def test_scan_round_trip_is_bit_exact(tmp_path):
    raw = np.random.default_rng(1).normal(size=(50, 4)).astype("<f4").tobytes()
    src = tmp_path / "a.bin"
    src.write_bytes(raw)
    dst = tmp_path / "b.bin"
    write_scan(dst, load_scan(src))
    assert dst.read_bytes() == raw


def test_pose_identity_line(tmp_path):
    p = tmp_path / "poses.txt"
    p.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n")
    (T,) = load_poses(p)
    assert T.allclose(RigidTransform.identity(), 1e-12)


def test_pose_translation(tmp_path):
    p = tmp_path / "poses.txt"
    p.write_text("1 0 0 0 0 1 0 0 0 0 1 5\n")
    (T,) = load_poses(p)
    np.testing.assert_allclose(T.translation, [0, 0, 5])


def test_pose_token_count(tmp_path):
    p = tmp_path / "poses.txt"
    p.write_text("1 0 0 0 0 1 0 0 0 0 1\n")
    with pytest.raises(FormatError):
        load_poses(p)


def test_poses_with_calib_hand_product(tmp_path):
    # P1: yaw 90 deg, t = (1, 0, 0); P2: pure translation (0, 2, 0)
    # calib: pure translation (0, 0, 1)
    p = tmp_path / "poses.txt"
    p.write_text("0 -1 0 1 1 0 0 0 0 0 1 0\n1 0 0 0 0 1 0 2 0 0 1 0\n")
    calib = RigidTransform(np.eye(3), [0.0, 0.0, 1.0])
    P1, P2 = load_poses(p, calib)
    np.testing.assert_allclose(P1.rotation, [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-12)
    np.testing.assert_allclose(P1.translation, [1, 0, 1], atol=1e-12)
    np.testing.assert_allclose(P2.translation, [0, 2, 1], atol=1e-12)


def test_printed_precision_rotation_accepted(tmp_path):
    c, s = np.cos(0.3), np.sin(0.3)
    vals = [c, -s, 0, 1, s, c, 0, 2, 0, 0, 1, 3]
    p = tmp_path / "poses.txt"
    p.write_text(" ".join(f"{v:.6e}" for v in vals) + "\n")
    (T,) = load_poses(p)
    assert T.allclose(RigidTransform.from_yaw(0.3, (1, 2, 3)), 1e-6)


def test_pose_round_trip(tmp_path):
    poses = [RigidTransform.from_yaw(a, (a, 2 * a, 0)) for a in (0.0, 0.5, -2.0)]
    write_poses(tmp_path / "p.txt", poses)
    for a, b in zip(poses, load_poses(tmp_path / "p.txt")):
        assert a.allclose(b, 1e-12)


def test_calib_file(tmp_path):
    p = tmp_path / "calib.txt"
    p.write_text("P0: " + " ".join(["0"] * 12) + "\nTr: 1 0 0 0.5 0 1 0 0 0 0 1 0\n")
    np.testing.assert_allclose(load_calib(p).translation, [0.5, 0, 0])


def test_sequence_directory(tmp_path):
    (tmp_path / "velodyne").mkdir()
    for i in range(3):
        write_scan(tmp_path / "velodyne" / f"{i:06d}.bin", PointCloud(np.full((2, 3), i)))
    write_poses(tmp_path / "poses.txt",
                [RigidTransform(np.eye(3), [i, 0, 0]) for i in range(3)])
    (tmp_path / "calib.txt").write_text("Tr: 1 0 0 0 0 1 0 0 0 0 1 1\n")
    meta = load_sequence(tmp_path)
    assert len(meta) == 3
    assert meta.scan_paths[2].endswith("000002.bin")
    np.testing.assert_allclose(meta.poses[1].translation, [1, 0, 1])


def test_matrix_round_trip(tmp_path):
    M = np.arange(12, dtype=np.float32).reshape(3, 4)
    write_matrix(tmp_path / "m.bin", M)
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[:8] == np.array([3, 4], dtype="<i4").tobytes()
    np.testing.assert_array_equal(read_matrix(tmp_path / "m.bin"), M)


def test_matrix_payload_mismatch(tmp_path):
    (tmp_path / "m.bin").write_bytes(np.array([2, 2], "<i4").tobytes() + b"\0" * 12)
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "m.bin")


def test_ground_csv_header(tmp_path):
    c = PointCloud([[1, 2, 3]], ground_prob=[0.25])
    write_ground_csv(tmp_path / "g.csv", c)
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines == ["x_m,y_m,z_m,ground_prob", "1.000000,2.000000,3.000000,0.250000"]
