"""Procedural two-part articulated objects.

Object frame: +x points towards the nominal camera side ("front"), +z is up and
the object rests on the plane ``z = 0``. Part 0 is the base, part 1 is attached
to it by a single revolute or prismatic joint.

Every surface point has canonical part coordinates ``(c1, c2, c3)``:
``c1`` in ``[0, 1]`` runs along the part's principal axis starting at the joint
end, ``c2`` and ``c3`` in ``[-1, 1]`` are signed offsets from the joint axis
normalised by the part's half-extents. Templates of the same joint kind share
this parametrisation, which is what makes cross-category ground-truth
correspondence well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import BiAdaptError
from ..geometry import axis_angle, check_rotation
from ..seeding import rng_for

REVOLUTE = "revolute"
PRISMATIC = "prismatic"

CATEGORIES = {
    "laptop": REVOLUTE,
    "box_lid": REVOLUTE,
    "scissors": REVOLUTE,
    "bottle_cap": PRISMATIC,
    "pen_cap": PRISMATIC,
    "jar": PRISMATIC,
}
DEFAULT_TRAIN = ("laptop", "box_lid", "bottle_cap", "pen_cap")
DEFAULT_NOVEL = ("scissors", "jar")

F_PULL = 10.0  # N, constant gripper pull magnitude


@dataclass(frozen=True, eq=False)
class JointSpec:
    kind: str
    axis: np.ndarray
    origin: np.ndarray
    limits: tuple[float, float]
    q: float
    resistance: float

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise BiAdaptError("invalid-joint", f"unknown joint kind {self.kind!r}")
        axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise BiAdaptError("invalid-joint", "joint axis must be unit length")
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if not lo < hi:
            raise BiAdaptError("invalid-joint", "q_min must be below q_max")
        if not lo <= self.q <= hi:
            raise BiAdaptError("invalid-joint", f"q={self.q} outside [{lo}, {hi}]")
        if not self.resistance > 0:
            raise BiAdaptError("invalid-joint", "resistance must be positive")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3))
        object.__setattr__(self, "limits", (lo, hi))
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "resistance", float(self.resistance))

    @property
    def range(self) -> float:
        return self.limits[1] - self.limits[0]

    def transform(self, q: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Rigid motion of part 1 in the object frame relative to ``q = 0``."""
        q = self.q if q is None else q
        if self.kind == REVOLUTE:
            R = axis_angle(self.axis, q)
            return R, self.origin - R @ self.origin
        return np.eye(3), q * self.axis


@dataclass(frozen=True, eq=False)
class Part:
    """A box (``dims`` = full extents) or a z-aligned cylinder (``dims`` = radius, height).

    ``rotation``/``translation`` place the primitive in the object frame at
    ``q = 0``. ``canon_*`` map part-local points to canonical coordinates:
    ``c = ((x - canon_origin) @ canon_axes.T) / canon_scale``.
    """

    shape: str
    dims: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    mass: float
    canon_origin: np.ndarray
    canon_axes: np.ndarray
    canon_scale: np.ndarray

    def __post_init__(self):
        if self.shape not in ("box", "cylinder"):
            raise BiAdaptError("invalid-part", f"unknown shape {self.shape!r}")
        dims = np.asarray(self.dims, dtype=np.float64)
        if dims.shape != ((3,) if self.shape == "box" else (2,)) or np.any(dims <= 0):
            raise BiAdaptError("invalid-part", f"bad dimensions {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        for name in ("translation", "canon_origin", "canon_scale"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(3))
        object.__setattr__(self, "canon_axes", np.asarray(self.canon_axes, dtype=np.float64).reshape(3, 3))

    @property
    def half_extents(self) -> np.ndarray:
        if self.shape == "box":
            return self.dims / 2.0
        r, h = self.dims
        return np.array([r, r, h / 2.0])

    def scaled(self, s: float) -> "Part":
        return replace(
            self, dims=self.dims * s, translation=self.translation * s,
            canon_origin=self.canon_origin * s, canon_scale=self.canon_scale * s,
        )


@dataclass(frozen=True, eq=False)
class ObjectSpec:
    category: str
    parts: tuple[Part, Part]
    joint: JointSpec
    base_rotation: np.ndarray
    base_translation: np.ndarray
    friction: float
    seed: int = 0

    def __post_init__(self):
        if len(self.parts) != 2:
            raise BiAdaptError("invalid-object", "exactly two parts required")
        if self.friction < 0:
            raise BiAdaptError("invalid-object", "friction must be non-negative")
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "base_rotation", check_rotation(self.base_rotation))
        object.__setattr__(self, "base_translation", np.asarray(self.base_translation, dtype=np.float64).reshape(3))

    @property
    def total_mass(self) -> float:
        return self.parts[0].mass + self.parts[1].mass

    def part_pose(self, i: int, q: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """World pose (rotation, translation) of part ``i`` at joint value ``q``."""
        part = self.parts[i]
        R, t = part.rotation, part.translation
        if i == 1:
            Rj, tj = self.joint.transform(q)
            R, t = Rj @ R, Rj @ t + tj
        return self.base_rotation @ R, self.base_rotation @ t + self.base_translation

    def joint_world(self) -> tuple[np.ndarray, np.ndarray]:
        """Joint axis and origin in world coordinates."""
        return self.base_rotation @ self.joint.axis, self.base_rotation @ self.joint.origin + self.base_translation

    def with_q(self, q: float) -> "ObjectSpec":
        return replace(self, joint=replace(self.joint, q=float(q)))

    def with_pose(self, rotation: np.ndarray, translation) -> "ObjectSpec":
        return replace(self, base_rotation=rotation, base_translation=np.asarray(translation, dtype=np.float64))

    def scaled(self, s: float) -> "ObjectSpec":
        """Uniform geometric scaling about the world origin (joint values unchanged)."""
        j = self.joint
        lim = j.limits if j.kind == REVOLUTE else (j.limits[0] * s, j.limits[1] * s)
        q = j.q if j.kind == REVOLUTE else j.q * s
        joint = replace(j, origin=j.origin * s, limits=lim, q=q)
        return replace(
            self, parts=tuple(p.scaled(s) for p in self.parts), joint=joint,
            base_translation=self.base_translation * s,
        )

    def corners(self) -> np.ndarray:
        out = []
        for i, part in enumerate(self.parts):
            R, t = self.part_pose(i)
            h = part.half_extents
            signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64)
            out.append((signs * h) @ R.T + t)
        return np.concatenate(out)

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        c = self.corners()
        center = (c.min(axis=0) + c.max(axis=0)) / 2.0
        return center, float(np.max(np.linalg.norm(c - center, axis=1)))


# ---------------------------------------------------------------------------
# Surface queries (used by the grasp check, heuristics and canonical coordinates)
# ---------------------------------------------------------------------------

def _box_surface(q: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    inside = np.all(np.abs(q) <= h, axis=1)
    gap = h - np.abs(q)
    ax = np.argmin(gap, axis=1)
    n_in = np.zeros_like(q)
    rows = np.arange(q.shape[0])
    n_in[rows, ax] = np.where(q[rows, ax] >= 0, 1.0, -1.0)
    d_in = gap[rows, ax]
    clamped = np.clip(q, -h, h)
    diff = q - clamped
    d_out = np.linalg.norm(diff, axis=1)
    n_out = diff / np.maximum(d_out, 1e-300)[:, None]
    dist = np.where(inside, d_in, d_out)
    normal = np.where(inside[:, None], n_in, n_out)
    return np.abs(dist), normal


def _cylinder_surface(q: np.ndarray, r: float, hh: float) -> tuple[np.ndarray, np.ndarray]:
    rho = np.hypot(q[:, 0], q[:, 1])
    radial = np.zeros_like(q)
    safe = rho > 1e-300
    radial[safe, 0] = q[safe, 0] / rho[safe]
    radial[safe, 1] = q[safe, 1] / rho[safe]
    radial[~safe, 0] = 1.0
    cap = np.zeros_like(q)
    cap[:, 2] = np.where(q[:, 2] >= 0, 1.0, -1.0)
    inside = (rho <= r) & (np.abs(q[:, 2]) <= hh)
    side_gap = r - rho
    cap_gap = hh - np.abs(q[:, 2])
    use_side = side_gap <= cap_gap
    d_in = np.where(use_side, side_gap, cap_gap)
    n_in = np.where(use_side[:, None], radial, cap)
    # outside: distance to the closest point of the solid cylinder
    cr = np.minimum(rho, r)
    cz = np.clip(q[:, 2], -hh, hh)
    closest = radial * cr[:, None]
    closest[:, 2] = cz
    diff = q - closest
    d_out = np.linalg.norm(diff, axis=1)
    n_out = diff / np.maximum(d_out, 1e-300)[:, None]
    # a point a rounding error outside the side can land exactly on its own closest point
    inside = inside | (d_out == 0.0)
    dist = np.where(inside, d_in, d_out)
    normal = np.where(inside[:, None], n_in, n_out)
    return np.abs(dist), normal


def part_surface(obj: ObjectSpec, i: int, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distance of world ``points`` to the surface of part ``i`` and the outward world normal there."""
    R, t = obj.part_pose(i)
    q = (np.atleast_2d(points) - t) @ R
    part = obj.parts[i]
    if part.shape == "box":
        d, n = _box_surface(q, part.dims / 2.0)
    else:
        d, n = _cylinder_surface(q, part.dims[0], part.dims[1] / 2.0)
    return d, n @ R.T


def nearest_surface(obj: ObjectSpec, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Owning part index (ties to the lower index), distance and outward normal per point."""
    d0, n0 = part_surface(obj, 0, points)
    d1, n1 = part_surface(obj, 1, points)
    own = (d1 < d0).astype(np.int64)
    d = np.where(own == 1, d1, d0)
    n = np.where(own[:, None] == 1, n1, n0)
    return own, d, n


def canonical_coords(obj: ObjectSpec, points: np.ndarray, parts: np.ndarray) -> np.ndarray:
    """Canonical ``(c1, c2, c3)`` for world points on the given parts."""
    points = np.atleast_2d(points)
    out = np.zeros((points.shape[0], 3))
    for i in (0, 1):
        m = parts == i
        if not np.any(m):
            continue
        R, t = obj.part_pose(i)
        p = obj.parts[i]
        local = (points[m] - t) @ R
        out[m] = ((local - p.canon_origin) @ p.canon_axes.T) / p.canon_scale
    return out


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

def _u(rng, lo, hi):
    return float(rng.uniform(lo, hi))


_REVOLUTE_TEMPLATES = {
    # base (L, W, H), lid (L fraction, W fraction, T), q_max, theta_nom, masses, friction
    "laptop": dict(base=((0.26, 0.34), (0.22, 0.28), (0.018, 0.026)), lid=((0.97, 1.0), (0.97, 1.0), (0.008, 0.014)),
                   q_max=(1.8, 2.1), theta=(0.36, 0.46), m0=(3.3, 4.5), m1=(0.3, 0.5), mu=(0.3, 0.38)),
    "box_lid": dict(base=((0.16, 0.24), (0.14, 0.20), (0.08, 0.13)), lid=((1.0, 1.04), (1.0, 1.04), (0.012, 0.02)),
                    q_max=(1.5, 1.9), theta=(0.36, 0.46), m0=(3.0, 4.2), m1=(0.2, 0.35), mu=(0.3, 0.38)),
    "scissors": dict(base=((0.22, 0.28), (0.05, 0.07), (0.016, 0.024)), lid=((0.85, 0.95), (0.9, 1.0), (0.012, 0.018)),
                     q_max=(1.3, 1.6), theta=(0.24, 0.30), m0=(2.4, 3.3), m1=(0.15, 0.25), mu=(0.3, 0.38)),
}

_PRISMATIC_TEMPLATES = {
    # body (r, h), cap (r factor, h), q_max, stroke_nom = F_PULL / k, masses, friction
    "bottle_cap": dict(body=((0.032, 0.042), (0.15, 0.2)), cap=((0.45, 0.6), (0.025, 0.04)),
                       q_max=(0.1, 0.14), stroke=(0.075, 0.095), m0=(6.0, 8.4), m1=(0.05, 0.1), mu=(0.15, 0.19)),
    "pen_cap": dict(body=((0.022, 0.028), (0.13, 0.17)), cap=((0.7, 0.85), (0.06, 0.08)),
                    q_max=(0.09, 0.12), stroke=(0.075, 0.095), m0=(6.0, 8.4), m1=(0.05, 0.1), mu=(0.15, 0.19)),
    "jar": dict(body=((0.05, 0.065), (0.08, 0.12)), cap=((1.02, 1.08), (0.02, 0.035)),
                q_max=(0.1, 0.14), stroke=(0.056, 0.066), m0=(7.2, 9.6), m1=(0.08, 0.14), mu=(0.15, 0.19)),
}


def _revolute(category: str, rng) -> ObjectSpec:
    t = _REVOLUTE_TEMPLATES[category]
    Lb, Wb, Hb = (_u(rng, *t["base"][k]) for k in range(3))
    Ll, Wl = Lb * _u(rng, *t["lid"][0]), Wb * _u(rng, *t["lid"][1])
    Tl = _u(rng, *t["lid"][2])
    q_max = _u(rng, *t["q_max"])
    theta = _u(rng, *t["theta"])
    eye = np.eye(3)
    # canonical frame: c1 along +x from the hinge end, c2 along the joint axis (-y), c3 along z
    axes = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    base = Part("box", [Lb, Wb, Hb], eye, [0.0, 0.0, Hb / 2], _u(rng, *t["m0"]),
                canon_origin=[-Lb / 2, 0.0, 0.0], canon_axes=axes, canon_scale=[Lb, Wb / 2, Hb / 2])
    lid = Part("box", [Ll, Wl, Tl], eye, [-Lb / 2 + Ll / 2, 0.0, Hb + Tl / 2], _u(rng, *t["m1"]),
               canon_origin=[-Ll / 2, 0.0, 0.0], canon_axes=axes, canon_scale=[Ll, Wl / 2, Tl / 2])
    k = F_PULL * Ll / theta
    joint = JointSpec(REVOLUTE, [0.0, -1.0, 0.0], [-Lb / 2, 0.0, Hb], (0.0, q_max), 0.0, k)
    return ObjectSpec(category, (base, lid), joint, eye, np.zeros(3), _u(rng, *t["mu"]))


def _prismatic(category: str, rng) -> ObjectSpec:
    t = _PRISMATIC_TEMPLATES[category]
    rb, hb = _u(rng, *t["body"][0]), _u(rng, *t["body"][1])
    rc, hc = rb * _u(rng, *t["cap"][0]), _u(rng, *t["cap"][1])
    q_max = _u(rng, *t["q_max"])
    stroke = _u(rng, *t["stroke"])
    eye = np.eye(3)
    down = np.array([[0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    up = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    body = Part("cylinder", [rb, hb], eye, [0.0, 0.0, hb / 2], _u(rng, *t["m0"]),
                canon_origin=[0.0, 0.0, hb / 2], canon_axes=down, canon_scale=[hb, rb, rb])
    cap = Part("cylinder", [rc, hc], eye, [0.0, 0.0, hb + hc / 2], _u(rng, *t["m1"]),
               canon_origin=[0.0, 0.0, -hc / 2], canon_axes=up, canon_scale=[hc, rc, rc])
    joint = JointSpec(PRISMATIC, [0.0, 0.0, 1.0], [0.0, 0.0, hb], (0.0, q_max), 0.0, F_PULL / stroke)
    return ObjectSpec(category, (body, cap), joint, eye, np.zeros(3), _u(rng, *t["mu"]))


def generate_object(category: str, seed: int) -> ObjectSpec:
    """Deterministic instance of a built-in category at rest pose, joint at ``q_min``."""
    if category not in CATEGORIES:
        raise BiAdaptError("unknown-category", f"{category!r} not in {sorted(CATEGORIES)}")
    rng = rng_for(seed, "object", category)
    obj = _revolute(category, rng) if CATEGORIES[category] == REVOLUTE else _prismatic(category, rng)
    return replace(obj, seed=int(seed))


def yaw_rotation(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
