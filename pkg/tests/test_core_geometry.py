import numpy as np
import pytest
from hypothesis import given, strategies as st

from geocorr.errors import PreconditionError
from geocorr.core_geometry import (PointCloud, RigidTransform, SequenceMeta, compose, invert,
                              orthonormalize, random_transform, transform_cloud)

seeds = st.integers(0, 2**32 - 1)


def test_pointcloud_rejects_nonfinite():
    with pytest.raises(PreconditionError):
        PointCloud([[0.0, np.nan, 1.0]])


def test_pointcloud_attribute_length_checked():
    with pytest.raises(PreconditionError):
        PointCloud(np.zeros((3, 3)), intensity=np.zeros(2))


def test_ground_prob_range_checked():
    with pytest.raises(PreconditionError):
        PointCloud(np.zeros((1, 3)), ground_prob=[1.5])


def test_pointcloud_is_immutable():
    c = PointCloud(np.ones((2, 3)))
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0


def test_rigid_transform_rejects_reflection():
    with pytest.raises(PreconditionError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_rigid_transform_rejects_skew():
    R = np.eye(3)
    R[0, 1] = 1e-6
    with pytest.raises(PreconditionError):
        RigidTransform(R, np.zeros(3))


def test_sequence_meta_lengths_must_agree():
    with pytest.raises(PreconditionError):
        SequenceMeta(["a.bin", "b.bin"], [RigidTransform.identity()])


def test_identity_transform_leaves_cloud():
    pts = np.random.default_rng(0).normal(size=(20, 3))
    out = transform_cloud(PointCloud(pts, intensity=np.arange(20.0)), RigidTransform.identity())
    np.testing.assert_array_equal(out.points, pts)
    np.testing.assert_array_equal(out.intensity, np.arange(20.0))


def test_quarter_yaw_maps_x_to_y():
    out = transform_cloud(PointCloud([[1.0, 0.0, 0.0]]), RigidTransform.from_yaw(np.pi / 2))
    np.testing.assert_allclose(out.points[0], [0.0, 1.0, 0.0], atol=1e-12)


def test_attributes_carried_through():
    c = PointCloud(np.zeros((2, 3)), intensity=[0.1, 0.2], ground_prob=[0.0, 1.0])
    out = transform_cloud(c, RigidTransform.from_yaw(0.3, (1, 2, 3)))
    np.testing.assert_array_equal(out.ground_prob, [0.0, 1.0])
    np.testing.assert_array_equal(out.intensity, [0.1, 0.2])


@given(seeds)
def test_round_trip_through_inverse(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(scale=10, size=(10, 3))
    T = random_transform(rng, np.pi, 20.0)
    back = transform_cloud(transform_cloud(PointCloud(pts), T), invert(T))
    np.testing.assert_allclose(back.points, pts, atol=1e-9)


@given(seeds)
def test_transform_preserves_pairwise_distances(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(scale=10, size=(15, 3))
    out = random_transform(rng, np.pi, 50.0).apply(pts)
    d0 = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    d1 = np.linalg.norm(out[:, None] - out[None], axis=-1)
    assert np.abs(d0 - d1).max() < 1e-9


def test_compose_order_and_formula():
    T1 = RigidTransform.from_yaw(0.4, (1.0, 0.0, 2.0))
    T2 = RigidTransform.from_yaw(-1.1, (0.0, 3.0, 0.0))
    T = compose(T1, T2)
    np.testing.assert_allclose(T.rotation, T1.rotation @ T2.rotation, atol=1e-12)
    np.testing.assert_allclose(T.translation, T1.rotation @ T2.translation + T1.translation,
                               atol=1e-12)


def test_compose_with_identity():
    T = RigidTransform.from_yaw(0.7, (1, 2, 3))
    assert compose(T, RigidTransform.identity()).allclose(T, 1e-12)


@given(seeds)
def test_compose_matches_sequential_application(seed):
    rng = np.random.default_rng(seed)
    T1, T2 = random_transform(rng, np.pi, 5.0), random_transform(rng, np.pi, 5.0)
    p = rng.normal(size=(4, 3))
    np.testing.assert_allclose((T1 @ T2).apply(p), T1.apply(T2.apply(p)), atol=1e-9)
    assert compose(invert(T1), T1).allclose(RigidTransform.identity(), 1e-9)


@given(seeds)
def test_compose_is_associative(seed):
    rng = np.random.default_rng(seed)
    A, B, C = (random_transform(rng, np.pi, 5.0) for _ in range(3))
    assert compose(compose(A, B), C).allclose(compose(A, compose(B, C)), 1e-9)


def test_invert_examples():
    assert invert(RigidTransform.identity()).allclose(RigidTransform.identity(), 0)
    inv = invert(RigidTransform(np.eye(3), [1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(inv.translation, [-1.0, -2.0, -3.0])


@given(seeds)
def test_invert_is_an_involution(seed):
    T = random_transform(np.random.default_rng(seed), np.pi, 10.0)
    assert invert(invert(T)).allclose(T, 1e-12)


def test_orthonormalize_restores_long_products():
    R = np.eye(3)
    step = RigidTransform.from_yaw(0.001).rotation + 1e-10
    for _ in range(1000):
        R = R @ step
    Q = orthonormalize(R)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
    assert np.linalg.det(Q) == pytest.approx(1.0, abs=1e-12)
