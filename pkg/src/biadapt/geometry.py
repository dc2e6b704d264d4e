"""Rotations, pinhole camera geometry, feature similarity and point-cloud utilities.

Conventions
-----------
* Rotations are plain ``(3, 3)`` float64 arrays with orthonormal columns.
* Cameras follow the OpenCV frame: +x right, +y down, +z forward. The camera
  pose stores the camera-to-world rotation and the camera centre in world
  coordinates.
* Integer pixel ``(u, v)`` is the centre of the cell ``[u-0.5, u+0.5) x [v-0.5, v+0.5)``.
  :func:`project` returns continuous coordinates so that it is an exact inverse
  of :func:`back_project`; :func:`to_pixel` rounds onto the grid.
* Depth is always the camera-frame z coordinate, never the ray length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BiAdaptError

ORTHO_TOL = 1e-9


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------

def check_rotation(R: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise BiAdaptError("invalid-rotation", f"expected finite 3x3 matrix, got shape {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise BiAdaptError("invalid-rotation", "matrix is not a proper orthonormal rotation")
    return R


def geodesic_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Angle of the relative rotation ``a^T b`` in ``[0, pi]``."""
    a = check_rotation(a)
    b = check_rotation(b)
    c = (np.trace(a.T @ b) - 1.0) / 2.0
    return float(math.acos(min(1.0, max(-1.0, c))))


def axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation of ``angle`` radians about ``axis`` (normalised here)."""
    k = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(k)
    if n == 0.0:
        return np.eye(3)
    k = k / n
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Nearest rotation in the Frobenius sense (SVD projection)."""
    u, _, vt = np.linalg.svd(R)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation via a normalised Gaussian quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def gripper_orientation(approach, roll: float = 0.0) -> np.ndarray:
    """Gripper frame whose forward axis (the negated third column) is ``approach``.

    The first column is the horizontal direction closest to world ``+x`` rolled
    about the approach axis by ``roll``; a vertical approach falls back to a
    world ``+y`` reference so the frame is always defined.
    """
    a = np.asarray(approach, dtype=np.float64)
    a = a / np.linalg.norm(a)
    z = -a
    ref = np.array([0.0, 0.0, 1.0])
    if abs(z @ ref) > 0.99:
        ref = np.array([0.0, 1.0, 0.0])
    x = np.cross(ref, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    if roll:
        c, s = math.cos(roll), math.sin(roll)
        x, y = c * x + s * y, -s * x + c * y
    return np.column_stack([x, y, z])


def approach_axis(R: np.ndarray) -> np.ndarray:
    """Gripper forward direction: the negated third column of ``R``."""
    return -np.asarray(R)[:, 2]


# ---------------------------------------------------------------------------
# Camera
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise BiAdaptError("invalid-camera", "focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise BiAdaptError("invalid-camera", "image size must be at least 1x1")
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3))

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation

    def camera_to_world(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def ray_directions(self) -> np.ndarray:
        """Camera-frame rays through every pixel centre, shaped ``(H, W, 3)`` with unit z."""
        u = (np.arange(self.width) - self.cx) / self.fx
        v = (np.arange(self.height) - self.cy) / self.fy
        d = np.empty((self.height, self.width, 3))
        d[..., 0] = u[None, :]
        d[..., 1] = v[:, None]
        d[..., 2] = 1.0
        return d

    def __eq__(self, other):
        if not isinstance(other, CameraModel):
            return NotImplemented
        return (
            (self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            == (other.fx, other.fy, other.cx, other.cy, other.width, other.height)
            and np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )


def look_at_camera(eye, target, fx: float, width: int, height: int, fy: float | None = None) -> CameraModel:
    """Camera at ``eye`` looking at ``target`` with image ``-y`` roughly along world ``+z``."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd /= np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.array([0.0, -1.0, 0.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    R = np.column_stack([right, down, fwd])
    return CameraModel(
        fx=fx, fy=fx if fy is None else fy,
        cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height,
        rotation=orthonormalize(R), translation=eye,
    )


def to_pixel(u: float, v: float, cam: CameraModel) -> tuple[int, int]:
    """Round continuous image coordinates onto the pixel grid, checking bounds."""
    iu, iv = int(math.floor(u + 0.5)), int(math.floor(v + 0.5))
    if not (0 <= iu < cam.width and 0 <= iv < cam.height):
        raise BiAdaptError("out-of-frame", f"pixel ({iu}, {iv}) outside {cam.width}x{cam.height}")
    return iu, iv


def project(point, cam: CameraModel) -> tuple[float, float, float]:
    """Pinhole projection. Returns continuous ``(u, v)`` and the camera-frame depth."""
    pc = cam.world_to_camera(np.asarray(point, dtype=np.float64).reshape(3))
    z = float(pc[2])
    if z <= 0.0:
        raise BiAdaptError("behind-camera", f"camera-frame depth {z:.6g} <= 0")
    u = cam.cx + cam.fx * pc[0] / z
    v = cam.cy + cam.fy * pc[1] / z
    to_pixel(u, v, cam)
    return float(u), float(v), z


def back_project(px, depth: float, cam: CameraModel) -> np.ndarray:
    """Lift pixel ``(u, v)`` at camera-frame depth ``depth`` to a world point."""
    if not depth > 0.0:
        raise BiAdaptError("invalid-depth", f"depth {depth!r} must be positive")
    u, v = float(px[0]), float(px[1])
    pc = np.array([(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth])
    return cam.camera_to_world(pc)


def back_project_pixels(us: np.ndarray, vs: np.ndarray, depths: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Vectorised :func:`back_project`; rows agree with it to floating-point rounding."""
    depths = np.asarray(depths, dtype=np.float64)
    if np.any(~(depths > 0.0)):
        raise BiAdaptError("invalid-depth", "all depths must be positive")
    pc = np.stack([
        (np.asarray(us, dtype=np.float64) - cam.cx) / cam.fx * depths,
        (np.asarray(vs, dtype=np.float64) - cam.cy) / cam.fy * depths,
        depths,
    ], axis=-1)
    return cam.camera_to_world(pc)


# ---------------------------------------------------------------------------
# Similarity
# ---------------------------------------------------------------------------

def cosine_similarities(query: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Cosine similarity of one vector against every row of ``table``.

    Dot products and squared norms go through the same row-wise reduction and
    the denominator is ``sqrt(|a|^2 |b|^2)``, so a row identical to the query
    scores exactly 1.0.
    """
    q = np.asarray(query, dtype=np.float64)[None, :]
    t = np.asarray(table, dtype=np.float64)
    if t.shape[1] != q.shape[1]:
        raise BiAdaptError("shape-mismatch", f"feature lengths {q.shape[1]} and {t.shape[1]} differ")
    dots = (t * q).sum(axis=1)
    qq = (q * q).sum(axis=1)[0]
    tt = (t * t).sum(axis=1)
    if qq == 0.0 or np.any(tt == 0.0):
        raise BiAdaptError("degenerate-feature", "zero-norm feature vector")
    return np.clip(dots / np.sqrt(qq * tt), -1.0, 1.0)


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    return float(cosine_similarities(a, b[None, :])[0])


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PointCloud:
    """Observed points (metres) with optional oracle part labels and estimated normals."""

    points: np.ndarray
    labels: np.ndarray | None = None
    normals: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise BiAdaptError("invalid-cloud", f"expected (N>=1, 3) points, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise BiAdaptError("invalid-cloud", "non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise BiAdaptError("invalid-cloud", "labels must have one entry per point")
            object.__setattr__(self, "labels", lab)
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=np.float64)
            if nrm.shape != pts.shape:
                raise BiAdaptError("invalid-cloud", "normals must match points")
            object.__setattr__(self, "normals", nrm)

    def __len__(self):
        return self.points.shape[0]

    def subset(self, idx) -> "PointCloud":
        idx = np.asarray(idx)
        return PointCloud(
            self.points[idx],
            None if self.labels is None else self.labels[idx],
            None if self.normals is None else self.normals[idx],
        )

    def nearest(self, point) -> tuple[int, float]:
        d = np.linalg.norm(self.points - np.asarray(point, dtype=np.float64), axis=1)
        i = int(np.argmin(d))
        return i, float(d[i])


def farthest_point_indices(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    n = points.shape[0]
    if k > n:
        raise BiAdaptError("insufficient-points", f"asked for {k} of {n} points")
    if k < 1:
        raise BiAdaptError("insufficient-points", "k must be positive")
    first = int(np.random.default_rng(seed).integers(n))
    idx = np.empty(k, dtype=np.int64)
    idx[0] = first
    dist = np.sum((points - points[first]) ** 2, axis=1)
    for j in range(1, k):
        nxt = int(np.argmax(dist))
        idx[j] = nxt
        np.minimum(dist, np.sum((points - points[nxt]) ** 2, axis=1), out=dist)
    return idx


def farthest_point_sample(cloud: PointCloud, k: int, seed: int) -> PointCloud:
    """Seeded farthest-point subsample of exactly ``k`` points."""
    return cloud.subset(farthest_point_indices(cloud.points, k, seed))
