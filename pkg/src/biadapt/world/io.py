"""The "BIAW" world container for objects, rendered scenes and feature fields.

Blocks are prefixed so several values can share one file (a support record
stores its scene under ``scene.`` and the scene stores its object under
``scene.obj.``). Doubles are little-endian IEEE-754; depth and label maps are
row-major ``H x W``.
"""

from __future__ import annotations

import numpy as np

from ..binfmt import decode_blocks, encode_blocks, read_file, write_file
from ..errors import DataError
from ..geometry import CameraModel
from .objects import JointSpec, ObjectSpec, Part
from .render import RenderedScene

MAGIC = b"BIAW"
VERSION = 1


def object_blocks(obj: ObjectSpec, prefix: str = "obj.") -> dict:
    j = obj.joint
    out = {
        prefix + "category": obj.category,
        prefix + "joint.kind": j.kind,
        prefix + "joint": np.concatenate([j.axis, j.origin, [j.limits[0], j.limits[1], j.q, j.resistance]]),
        prefix + "base_rotation": obj.base_rotation,
        prefix + "base_translation": obj.base_translation,
        prefix + "friction": np.array([obj.friction]),
        prefix + "seed": np.array([obj.seed], dtype=np.int64),
    }
    for i, p in enumerate(obj.parts):
        k = f"{prefix}part{i}."
        out[k + "shape"] = p.shape
        out[k + "dims"] = p.dims
        out[k + "rotation"] = p.rotation
        out[k + "translation"] = p.translation
        out[k + "mass"] = np.array([p.mass])
        out[k + "canon_origin"] = p.canon_origin
        out[k + "canon_axes"] = p.canon_axes
        out[k + "canon_scale"] = p.canon_scale
    return out


def object_from_blocks(b: dict, prefix: str = "obj.") -> ObjectSpec:
    try:
        jv = b[prefix + "joint"]
        joint = JointSpec(b[prefix + "joint.kind"], jv[0:3], jv[3:6], (jv[6], jv[7]), jv[8], jv[9])
        parts = []
        for i in (0, 1):
            k = f"{prefix}part{i}."
            parts.append(Part(
                b[k + "shape"], b[k + "dims"], b[k + "rotation"], b[k + "translation"], float(b[k + "mass"][0]),
                b[k + "canon_origin"], b[k + "canon_axes"], b[k + "canon_scale"],
            ))
        return ObjectSpec(
            b[prefix + "category"], tuple(parts), joint, b[prefix + "base_rotation"],
            b[prefix + "base_translation"], float(b[prefix + "friction"][0]), int(b[prefix + "seed"][0]),
        )
    except KeyError as exc:
        raise DataError("missing-block", f"object block {exc} not found") from exc


def camera_blocks(cam: CameraModel, prefix: str = "camera.") -> dict:
    return {
        prefix + "intrinsics": np.array([cam.fx, cam.fy, cam.cx, cam.cy, cam.width, cam.height], dtype=np.float64),
        prefix + "rotation": cam.rotation,
        prefix + "translation": cam.translation,
    }


def camera_from_blocks(b: dict, prefix: str = "camera.") -> CameraModel:
    fx, fy, cx, cy, w, h = b[prefix + "intrinsics"]
    return CameraModel(float(fx), float(fy), float(cx), float(cy), int(w), int(h),
                       b[prefix + "rotation"], b[prefix + "translation"])


def scene_blocks(scene: RenderedScene, prefix: str = "scene.") -> dict:
    out = {
        prefix + "depth": scene.depth,
        prefix + "labels": scene.labels.astype(np.int8),
        prefix + "obs_pixels": scene.obs_pixels.astype(np.int64),
    }
    out.update(camera_blocks(scene.camera, prefix + "camera."))
    out.update(object_blocks(scene.obj, prefix + "obj."))
    return out


def scene_from_blocks(b: dict, prefix: str = "scene.") -> RenderedScene:
    try:
        return RenderedScene(
            b[prefix + "depth"], b[prefix + "labels"], camera_from_blocks(b, prefix + "camera."),
            b[prefix + "obs_pixels"], object_from_blocks(b, prefix + "obj."),
        )
    except KeyError as exc:
        raise DataError("missing-block", f"scene block {exc} not found") from exc


def encode(blocks: dict) -> bytes:
    return encode_blocks(MAGIC, VERSION, blocks)


def decode(data: bytes) -> dict:
    return decode_blocks(data, MAGIC, VERSION)[1]


def save_scene(path, scene: RenderedScene) -> None:
    write_file(path, encode(scene_blocks(scene)))


def load_scene(path) -> RenderedScene:
    return scene_from_blocks(decode(read_file(path)))


def save_object(path, obj: ObjectSpec) -> None:
    write_file(path, encode(object_blocks(obj)))


def load_object(path) -> ObjectSpec:
    return object_from_blocks(decode(read_file(path)))
