import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biadapt.binfmt import decode_blocks, encode_blocks, read_file, write_file
from biadapt.errors import BiAdaptError, DataError
from biadapt.geometry import (
    CameraModel, PointCloud, axis_angle, back_project, back_project_pixels, check_rotation, cosine_similarities,
    cosine_similarity, farthest_point_sample, geodesic_distance, gripper_orientation, look_at_camera,
    orthonormalize, project, random_rotation,
)
from biadapt.seeding import derive_seed, rng_for

seeds = st.integers(0, 2**32 - 1)


def rot(seed):
    return random_rotation(np.random.default_rng(seed))


# --- rotations ------------------------------------------------------------

def test_geodesic_examples():
    R = rot(3)
    assert geodesic_distance(R, R) == pytest.approx(0.0, abs=1e-7)
    assert geodesic_distance(np.eye(3), axis_angle([0, 0, 1], math.pi)) == pytest.approx(math.pi, abs=1e-9)
    assert geodesic_distance(np.eye(3), axis_angle([1, 0, 0], 0.3)) == pytest.approx(0.3, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(seeds, seeds, seeds)
def test_geodesic_metric_properties(a, b, c):
    A, B, C = rot(a), rot(b), rot(c)
    ab = geodesic_distance(A, B)
    assert ab == pytest.approx(geodesic_distance(B, A), abs=1e-12)
    assert 0.0 <= ab <= math.pi
    assert geodesic_distance(A, C) <= ab + geodesic_distance(B, C) + 1e-8


@given(seeds)
def test_random_rotation_is_valid(s):
    R = rot(s)
    check_rotation(R)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 2 * math.pi))
def test_gripper_orientation_approach(x, y, z, roll):
    a = np.array([x, y, z])
    if np.linalg.norm(a) < 1e-3:
        return
    R = check_rotation(gripper_orientation(a, roll))
    assert np.allclose(-R[:, 2], a / np.linalg.norm(a), atol=1e-12)


def test_check_rotation_rejects():
    with pytest.raises(BiAdaptError) as e:
        check_rotation(np.diag([1.0, 1.0, -1.0]))
    assert e.value.code == "invalid-rotation"
    with pytest.raises(BiAdaptError):
        check_rotation(np.eye(3) * 1.01)
    with pytest.raises(BiAdaptError):
        check_rotation(np.eye(2))


def test_orthonormalize_projects_to_rotation():
    R = rot(5) + 1e-3 * np.random.default_rng(0).normal(size=(3, 3))
    check_rotation(orthonormalize(R))


# --- camera ---------------------------------------------------------------

CAM = CameraModel(100.0, 100.0, 50.0, 50.0, 101, 101)


def test_project_examples():
    assert project([0.1, 0.0, 1.0], CAM) == (60.0, 50.0, 1.0)
    u, v, d = project([0.0, 0.0, 3.0], CAM)
    assert (u, v, d) == (50.0, 50.0, 3.0)
    assert np.allclose(back_project((50, 50), 2.0, CAM), [0, 0, 2])
    assert back_project((60, 50), 1.0, CAM)[0] == pytest.approx(0.1, abs=1e-15)


def test_project_errors():
    with pytest.raises(BiAdaptError) as e:
        project([0, 0, -1], CAM)
    assert e.value.code == "behind-camera"
    with pytest.raises(BiAdaptError) as e:
        project([10, 0, 1], CAM)
    assert e.value.code == "out-of-frame"
    with pytest.raises(BiAdaptError) as e:
        back_project((1, 1), 0.0, CAM)
    assert e.value.code == "invalid-depth"


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_round_trip_posed_camera(s):
    rng = np.random.default_rng(s)
    cam = look_at_camera(rng.uniform(-1, 1, 3) + [0, 0, 2], rng.uniform(-0.1, 0.1, 3), 80.0, 64, 64)
    px = rng.uniform(0, 63, 2)
    d = rng.uniform(0.2, 3.0)
    p = back_project(px, d, cam)
    u, v, z = project(p, cam)
    assert np.allclose([u, v, z], [px[0], px[1], d], atol=1e-9)
    assert np.linalg.norm(back_project((u, v), z, cam) - p) < 1e-9


def test_vectorised_back_projection_matches():
    rng = np.random.default_rng(0)
    cam = look_at_camera([0.5, 0.3, 1.0], [0, 0, 0], 70.0, 64, 64)
    us, vs, ds = rng.uniform(0, 63, 20), rng.uniform(0, 63, 20), rng.uniform(0.3, 2, 20)
    batch = back_project_pixels(us, vs, ds, cam)
    for i in range(20):
        assert np.allclose(batch[i], back_project((us[i], vs[i]), ds[i], cam), rtol=0, atol=1e-15)


# --- similarity -----------------------------------------------------------

def test_cosine_examples():
    v = np.array([0.3, -2.0, 5.0])
    assert cosine_similarity(v, v) == 1.0
    assert cosine_similarity(v, -v) == -1.0
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    with pytest.raises(BiAdaptError):
        cosine_similarity([0, 0], [1, 0])
    with pytest.raises(BiAdaptError):
        cosine_similarity([1, 0, 0], [1, 0])


@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4), st.floats(0.01, 100))
def test_cosine_scale_invariant(vals, s):
    a = np.array(vals)
    if np.linalg.norm(a) < 1e-3:
        return
    table = np.random.default_rng(0).normal(size=(5, 4))
    assert np.allclose(cosine_similarities(a, table), cosine_similarities(a, s * table), atol=1e-12)
    assert np.all(np.abs(cosine_similarities(a, table)) <= 1.0)


# --- point clouds ---------------------------------------------------------

def test_fps_examples():
    sq = PointCloud(np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float))
    for seed in range(4):
        pts = farthest_point_sample(sq, 2, seed).points
        assert np.linalg.norm(pts[0] - pts[1]) == pytest.approx(math.sqrt(2))
    one = farthest_point_sample(sq, 1, 7).points
    assert any(np.array_equal(one[0], p) for p in sq.points)
    full = farthest_point_sample(sq, 4, 0).points
    assert sorted(map(tuple, full)) == sorted(map(tuple, sq.points))
    with pytest.raises(BiAdaptError) as e:
        farthest_point_sample(sq, 5, 0)
    assert e.value.code == "insufficient-points"


def test_point_cloud_validation():
    with pytest.raises(BiAdaptError):
        PointCloud(np.zeros((0, 3)))
    with pytest.raises(BiAdaptError):
        PointCloud(np.array([[np.nan, 0, 0]]))
    with pytest.raises(BiAdaptError):
        PointCloud(np.zeros((2, 3)), labels=[0])


# --- seeding and containers -----------------------------------------------

def test_derive_seed_stable_and_separated():
    assert derive_seed(0, "a", 1) == derive_seed(0, "a", 1)
    assert derive_seed(0, "a", 1) != derive_seed(0, "a", 2)
    assert derive_seed(0, "a") != derive_seed(1, "a")
    assert np.array_equal(rng_for(3, "x").normal(size=4), rng_for(3, "x").normal(size=4))


def test_blocks_round_trip(tmp_path):
    blocks = {"a": np.arange(6, dtype=np.float64).reshape(2, 3), "b": np.array([1, -2], dtype=np.int8),
              "c": "text é", "d": np.array(3, dtype=np.int64), "e": np.zeros((0, 4))}
    data = encode_blocks(b"TEST", 1, blocks)
    version, back = decode_blocks(data, b"TEST", 1)
    assert version == 1 and list(back) == list(blocks)
    assert encode_blocks(b"TEST", 1, back) == data
    write_file(tmp_path / "sub" / "x.bin", data)
    assert read_file(tmp_path / "sub" / "x.bin") == data


def test_blocks_errors():
    data = encode_blocks(b"TEST", 2, {"a": np.zeros(3)})
    for bad, code in ((b"NOPE" + data[4:], "bad-magic"), (data[:-3], "truncated"), (data + b"x", "corrupt")):
        with pytest.raises(DataError) as e:
            decode_blocks(bad, b"TEST", 2)
        assert e.value.code == code
    with pytest.raises(DataError) as e:
        decode_blocks(data, b"TEST", 1)
    assert e.value.code == "bad-version"
    with pytest.raises(DataError):
        encode_blocks(b"TEST", 1, {"a": np.zeros(2, dtype=np.int32)})
