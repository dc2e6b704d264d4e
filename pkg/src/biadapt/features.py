"""Per-pixel descriptor fields and cosine-similarity correspondence.

The default extractor builds a 16-channel descriptor per valid pixel:

====  =====================================================
0-1   part one-hot
2-4   c1, sin(pi c1), cos(pi c1)
5-7   c2, sin(pi c2), cos(pi c2)
8-10  c3, sin(pi c3), cos(pi c3)
11-13 surface normal in the camera frame
14    distance from the joint axis, sqrt(c2^2 + c3^2)
15    depth-gradient magnitude
====  =====================================================

``(c1, c2, c3)`` are the canonical part coordinates of the surface point (shared
by every category of a joint kind). Each channel is then z-normalised over the
valid pixels of the field, so any uniform rescaling of the scene cancels out.
Extractors are looked up by id, so a learned descriptor can replace this one
without touching the matching code.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import BiAdaptError
from .geometry import cosine_similarities
from .world.io import decode, encode
from .world.render import RenderedScene

FEATURE_DIM = 16
DEFAULT_EXTRACTOR = "canonical-geo-v1"


@dataclass(frozen=True, eq=False)
class FeatureField:
    features: np.ndarray
    valid: np.ndarray
    extractor_id: str

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float32)
        valid = np.asarray(self.valid, dtype=bool)
        if f.ndim != 3 or valid.shape != f.shape[:2]:
            raise BiAdaptError("shape-mismatch", f"features {f.shape} and mask {valid.shape} disagree")
        if not np.all(np.isfinite(f)):
            raise BiAdaptError("non-finite-feature", "feature field contains NaN or Inf")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "valid", valid)

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.features.shape[:2]

    @cached_property
    def valid_pixels(self) -> np.ndarray:
        """``(u, v)`` of every valid pixel in row-major order."""
        v, u = np.nonzero(self.valid)
        return np.stack([u, v], axis=1)

    @cached_property
    def table(self) -> np.ndarray:
        return self.features[self.valid].astype(np.float64)

    def scaled(self, s: float) -> "FeatureField":
        return FeatureField(self.features * np.float32(s), self.valid, self.extractor_id)


@dataclass(frozen=True)
class ContactPairCandidate:
    p1: np.ndarray
    p2: np.ndarray
    px1: tuple[int, int]
    px2: tuple[int, int]
    similarity1: float
    similarity2: float
    source_record_id: str


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def _masked_diffs(depth: np.ndarray, valid: np.ndarray, tol: np.ndarray, axis: int):
    """Forward/backward depth differences along ``axis`` with their usability masks."""
    fwd = np.zeros_like(depth)
    okf = np.zeros_like(valid)
    a = [slice(None)] * 2
    b = [slice(None)] * 2
    a[axis], b[axis] = slice(1, None), slice(None, -1)
    a, b = tuple(a), tuple(b)
    diff = depth[a] - depth[b]
    ok = valid[a] & valid[b] & (np.abs(diff) < tol[b])
    fwd[b] = np.where(ok, diff, 0.0)
    okf[b] = ok
    bwd = np.zeros_like(depth)
    okb = np.zeros_like(valid)
    bwd[a] = fwd[b]
    okb[a] = ok
    return fwd, okf, bwd, okb


def depth_gradient(depth: np.ndarray, fx: float) -> np.ndarray:
    """Depth-gradient magnitude per pixel (zero where invalid).

    Differences across a jump larger than three pixel footprints are dropped;
    central differences are used where both neighbours qualify.
    """
    valid = depth > 0
    tol = 3.0 * depth / fx
    grad_sq = np.zeros_like(depth)
    for axis in (0, 1):
        fwd, okf, bwd, okb = _masked_diffs(depth, valid, tol, axis)
        g = np.where(okf & okb, (fwd + bwd) / 2.0, np.where(okf, fwd, bwd))
        grad_sq += g * g
    return np.where(valid, np.sqrt(grad_sq), 0.0)


def _zscore(raw: np.ndarray, valid: np.ndarray) -> np.ndarray:
    vals = raw[valid]
    mean = vals.mean(axis=0)
    std = vals.std(axis=0)
    out = np.zeros_like(raw)
    # a constant channel carries no information about the pixel; drop it
    scale = np.where(std > 0, std, np.inf)
    out[valid] = (vals - mean) / scale
    return out


def canonical_geometric_descriptor(scene: RenderedScene) -> np.ndarray:
    valid = scene.valid
    H, W = valid.shape
    raw = np.zeros((H, W, FEATURE_DIM))
    lab = scene.labels
    raw[..., 0] = lab == 0
    raw[..., 1] = lab == 1
    c = scene.canonical_map
    for k in range(3):
        raw[..., 2 + 3 * k] = c[..., k]
        raw[..., 3 + 3 * k] = np.sin(np.pi * c[..., k])
        raw[..., 4 + 3 * k] = np.cos(np.pi * c[..., k])
    raw[..., 11:14] = scene.surface_normal_map @ scene.camera.rotation
    raw[..., 14] = np.hypot(c[..., 1], c[..., 2])
    raw[..., 15] = depth_gradient(scene.depth, scene.camera.fx)
    raw[~valid] = 0.0
    return _zscore(raw, valid)


EXTRACTORS: dict[str, Callable[[RenderedScene], np.ndarray]] = {
    DEFAULT_EXTRACTOR: canonical_geometric_descriptor,
}


def register_extractor(extractor_id: str, fn: Callable[[RenderedScene], np.ndarray]) -> None:
    if extractor_id in EXTRACTORS:
        raise BiAdaptError("duplicate-extractor", f"{extractor_id!r} already registered")
    EXTRACTORS[extractor_id] = fn


def extract_field(scene: RenderedScene, extractor_id: str = DEFAULT_EXTRACTOR) -> FeatureField:
    if extractor_id not in EXTRACTORS:
        raise BiAdaptError("unknown-extractor", f"{extractor_id!r} not in {sorted(EXTRACTORS)}")
    if not np.any(scene.valid):
        raise BiAdaptError("empty-render", "scene has no valid pixel")
    feats = EXTRACTORS[extractor_id](scene)
    return FeatureField(feats, scene.valid, extractor_id)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

def match_point(src: FeatureField, src_px, tgt: FeatureField) -> tuple[tuple[int, int], float]:
    """Most similar valid target pixel to ``src_px``; ties go to the lowest row-major index."""
    if src.extractor_id != tgt.extractor_id or src.dim != tgt.dim:
        raise BiAdaptError("incompatible-fields",
                           f"{src.extractor_id}/{src.dim} vs {tgt.extractor_id}/{tgt.dim}")
    u, v = int(src_px[0]), int(src_px[1])
    H, W = src.shape
    if not (0 <= u < W and 0 <= v < H) or not src.valid[v, u]:
        raise BiAdaptError("invalid-pixel", f"source pixel ({u}, {v}) is not valid")
    if tgt.table.shape[0] == 0:
        raise BiAdaptError("empty-target", "target field has no valid pixel")
    sims = cosine_similarities(src.features[v, u].astype(np.float64), tgt.table)
    i = int(np.argmax(sims))
    tu, tv = tgt.valid_pixels[i]
    return (int(tu), int(tv)), float(sims[i])


def map_contact_pair(record, tgt_scene: RenderedScene, tgt_field: FeatureField,
                     src_field: FeatureField | None = None) -> ContactPairCandidate:
    """Transfer a record's two contact pixels onto the target scene and lift them to 3D."""
    if src_field is None:
        src_field = extract_field(record.scene, tgt_field.extractor_id)
    (px1, s1) = match_point(src_field, record.px1, tgt_field)
    (px2, s2) = match_point(src_field, record.px2, tgt_field)
    pm = tgt_scene.point_map
    return ContactPairCandidate(
        pm[px1[1], px1[0]].copy(), pm[px2[1], px2[0]].copy(), px1, px2, s1, s2, str(record.id),
    )


# ---------------------------------------------------------------------------
# Serialisation (inside the world container)
# ---------------------------------------------------------------------------

def field_blocks(field: FeatureField, prefix: str = "field.") -> dict:
    return {
        prefix + "extractor_id": field.extractor_id,
        prefix + "features": np.ascontiguousarray(np.moveaxis(field.features, 2, 0)),
        prefix + "valid": field.valid.astype(np.int8),
    }


def field_from_blocks(b: dict, prefix: str = "field.") -> FeatureField:
    try:
        return FeatureField(np.moveaxis(b[prefix + "features"], 0, 2), b[prefix + "valid"].astype(bool),
                            b[prefix + "extractor_id"])
    except KeyError as exc:
        raise BiAdaptError("missing-block", f"field block {exc} not found") from exc


def encode_field(field: FeatureField) -> bytes:
    return encode(field_blocks(field))


def decode_field(data: bytes) -> FeatureField:
    return field_from_blocks(decode(data))
