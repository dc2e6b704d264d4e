"""Analytic depth rendering of :class:`ObjectSpec` instances.

Rays go through pixel centres with camera-frame direction ``((u-cx)/fx, (v-cy)/fy, 1)``,
so the ray parameter at a hit *is* the camera-frame depth. The observation cloud
is the back-projection of (a sample of) the hit pixels, so it agrees with the
depth map by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import BiAdaptError
from ..geometry import CameraModel, PointCloud, back_project_pixels, look_at_camera
from ..seeding import rng_for
from .objects import ObjectSpec, canonical_coords, part_surface

IMAGE_SIZE = 64
FOV_DEG = 50.0


def _intersect_box(o: np.ndarray, d: np.ndarray, h: np.ndarray):
    d = np.where(d == 0.0, 1e-300, d)
    inv = 1.0 / d
    t1 = (-h - o) * inv
    t2 = (h - o) * inv
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    tmin = lo.max(axis=1)
    tmax = hi.min(axis=1)
    hit = (tmax >= tmin) & (tmin > 0.0)
    ax = np.argmax(lo, axis=1)
    n = np.zeros_like(o)
    rows = np.arange(o.shape[0])
    n[rows, ax] = -np.sign(d[rows, ax])
    return np.where(hit, tmin, np.inf), n


def _intersect_cylinder(o: np.ndarray, d: np.ndarray, r: float, hh: float):
    n_rays = o.shape[0]
    best = np.full(n_rays, np.inf)
    normal = np.zeros_like(o)
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2.0 * (o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1])
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
    disc = b * b - 4.0 * a * c
    ok = (a > 1e-300) & (disc >= 0.0)
    ts = np.full(n_rays, np.inf)
    ts[ok] = (-b[ok] - np.sqrt(disc[ok])) / (2.0 * a[ok])
    zs = o[:, 2] + ts * d[:, 2]
    side = ok & (ts > 0.0) & (np.abs(zs) <= hh)
    best = np.where(side, ts, best)
    side_pt = o + ts[:, None] * d
    normal[side, 0] = side_pt[side, 0] / r
    normal[side, 1] = side_pt[side, 1] / r
    dz = np.where(d[:, 2] == 0.0, 1e-300, d[:, 2])
    for sgn in (1.0, -1.0):
        tc = (sgn * hh - o[:, 2]) / dz
        px = o[:, 0] + tc * d[:, 0]
        py = o[:, 1] + tc * d[:, 1]
        cap = (tc > 0.0) & (px * px + py * py <= r * r) & (tc < best)
        best = np.where(cap, tc, best)
        normal[cap] = [0.0, 0.0, sgn]
    return best, normal


def intersect_part(obj: ObjectSpec, i: int, origin: np.ndarray, dirs: np.ndarray):
    """Ray parameters (inf on miss) and outward world normals for part ``i``."""
    R, t = obj.part_pose(i, None)
    o = np.broadcast_to((origin - t) @ R, dirs.shape)
    d = dirs @ R
    part = obj.parts[i]
    if part.shape == "box":
        tt, n = _intersect_box(o, d, part.dims / 2.0)
    else:
        tt, n = _intersect_cylinder(o, d, part.dims[0], part.dims[1] / 2.0)
    return tt, n @ R.T


@dataclass(frozen=True, eq=False)
class RenderedScene:
    """Depth map, part-label map and back-projected observation of one object view.

    ``obs_pixels`` holds the ``(u, v)`` pixel of every observation point; the
    observation itself is reconstructed from the depth map, so serialising the
    pixels is enough.
    """

    depth: np.ndarray
    labels: np.ndarray
    camera: CameraModel
    obs_pixels: np.ndarray
    obj: ObjectSpec

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int8)
        pix = np.asarray(self.obs_pixels, dtype=np.int64).reshape(-1, 2)
        if depth.shape != (self.camera.height, self.camera.width) or labels.shape != depth.shape:
            raise BiAdaptError("invalid-scene", "depth/label maps must match the camera image size")
        if np.any((labels >= 0) != (depth > 0)):
            raise BiAdaptError("invalid-scene", "labelled pixels and positive depths must coincide")
        if len(pix) == 0 or np.any(pix < 0) or np.any(pix[:, 0] >= depth.shape[1]) or np.any(pix[:, 1] >= depth.shape[0]):
            raise BiAdaptError("invalid-scene", "observation pixels must be inside the image")
        if np.any(depth[pix[:, 1], pix[:, 0]] <= 0):
            raise BiAdaptError("invalid-scene", "observation pixels must have depth")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "obs_pixels", pix)

    @cached_property
    def observation(self) -> PointCloud:
        u, v = self.obs_pixels[:, 0], self.obs_pixels[:, 1]
        pts = back_project_pixels(u, v, self.depth[v, u], self.camera)
        return PointCloud(pts, self.labels[v, u].astype(np.int64), self.normal_map[v, u])

    @property
    def valid(self) -> np.ndarray:
        return self.depth > 0.0

    @cached_property
    def point_map(self) -> np.ndarray:
        """World point per pixel (zeros where invalid)."""
        out = np.zeros(self.depth.shape + (3,))
        v, u = np.nonzero(self.valid)
        out[v, u] = back_project_pixels(u, v, self.depth[v, u], self.camera)
        return out

    @cached_property
    def normal_map(self) -> np.ndarray:
        return estimate_normals(self.depth, self.camera)

    @cached_property
    def surface_normal_map(self) -> np.ndarray:
        """Exact outward world normal of the surface seen at each pixel (zeros where invalid)."""
        out = np.zeros(self.depth.shape + (3,))
        for i in (0, 1):
            v, u = np.nonzero(self.labels == i)
            if len(u):
                out[v, u] = part_surface(self.obj, i, self.point_map[v, u])[1]
        return out

    @cached_property
    def canonical_map(self) -> np.ndarray:
        out = np.zeros(self.depth.shape + (3,))
        v, u = np.nonzero(self.valid)
        out[v, u] = canonical_coords(self.obj, self.point_map[v, u], self.labels[v, u])
        return out

    def pixel_of(self, index: int) -> tuple[int, int]:
        return int(self.obs_pixels[index, 0]), int(self.obs_pixels[index, 1])


def estimate_normals(depth: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Per-pixel world normals from finite differences of the depth map.

    Neighbours across a depth jump larger than three pixel footprints are
    ignored; central differences are used when both neighbours qualify.
    Normals face the camera. Invalid pixels get zeros.
    """
    H, W = depth.shape
    valid = depth > 0
    rays = cam.ray_directions()
    P = rays * depth[..., None]
    foot = depth / cam.fx
    tol = 3.0 * foot

    def tangent(axis: int):
        fwd = np.zeros_like(P)
        bwd = np.zeros_like(P)
        okf = np.zeros((H, W), dtype=bool)
        okb = np.zeros((H, W), dtype=bool)
        if axis == 1:
            fwd[:, :-1] = P[:, 1:] - P[:, :-1]
            okf[:, :-1] = valid[:, 1:] & valid[:, :-1] & (np.abs(depth[:, 1:] - depth[:, :-1]) < tol[:, :-1])
            bwd[:, 1:] = P[:, 1:] - P[:, :-1]
            okb[:, 1:] = okf[:, :-1]
        else:
            fwd[:-1] = P[1:] - P[:-1]
            okf[:-1] = valid[1:] & valid[:-1] & (np.abs(depth[1:] - depth[:-1]) < tol[:-1])
            bwd[1:] = P[1:] - P[:-1]
            okb[1:] = okf[:-1]
        both = okf & okb
        t = np.where(both[..., None], fwd + bwd, np.where(okf[..., None], fwd, bwd))
        return t, okf | okb

    tu, oku = tangent(1)
    tv, okv = tangent(0)
    n = np.cross(tu, tv)
    norm = np.linalg.norm(n, axis=-1)
    good = oku & okv & (norm > 0)
    n = np.where(good[..., None], n / np.where(norm > 0, norm, 1.0)[..., None], 0.0)
    fallback = -rays / np.linalg.norm(rays, axis=-1, keepdims=True)
    n = np.where(good[..., None], n, fallback)
    flip = np.sum(n * P, axis=-1) > 0
    n[flip] *= -1.0
    out = n @ cam.rotation.T
    out[~valid] = 0.0
    return out


def frame_camera(obj: ObjectSpec, seed: int, size: int = IMAGE_SIZE, azimuth_jitter: float = 0.17,
                 elevation: float = 0.61, elevation_jitter: float = 0.09) -> CameraModel:
    """Seeded front-above camera that fits the object's bounding sphere into view."""
    rng = rng_for(seed, "camera")
    az = float(rng.uniform(-azimuth_jitter, azimuth_jitter))
    el = elevation + float(rng.uniform(-elevation_jitter, elevation_jitter))
    center, radius = obj.bounding_sphere()
    half = math.radians(FOV_DEG) / 2.0
    dist = 1.08 * radius / math.sin(half)
    eye = center + dist * np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    fx = (size / 2.0) / math.tan(half)
    return look_at_camera(eye, center, fx, size, size)


def render(obj: ObjectSpec, cam: CameraModel, n_points: int = 4096, seed: int = 0) -> RenderedScene:
    """Ray-cast ``obj`` into ``cam``; the observation keeps up to ``n_points`` hit pixels."""
    dirs_cam = cam.ray_directions().reshape(-1, 3)
    dirs = dirs_cam @ cam.rotation.T
    best = np.full(dirs.shape[0], np.inf)
    label = np.full(dirs.shape[0], -1, dtype=np.int8)
    for i in (0, 1):
        t, _ = intersect_part(obj, i, cam.translation, dirs)
        closer = t < best
        best = np.where(closer, t, best)
        label[closer] = i
    hit = np.isfinite(best)
    if not np.any(hit):
        raise BiAdaptError("empty-render", "object is entirely out of frame")
    depth = np.where(hit, best, 0.0).reshape(cam.height, cam.width)
    labels = label.reshape(cam.height, cam.width)
    v, u = np.nonzero(depth > 0)
    if len(u) > n_points:
        keep = np.sort(np.random.default_rng(seed).choice(len(u), size=n_points, replace=False))
        u, v = u[keep], v[keep]
    return RenderedScene(depth, labels, cam, np.stack([u, v], axis=1).astype(np.int64), obj)
