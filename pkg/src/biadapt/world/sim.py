"""Tasks, the quasi-static dual-gripper pull model and the success judge.

One interaction is a single fixed-orientation pull by each gripper. The model,
applied in order:

1. Grasp check per gripper: the contact lies within ``contact_eps`` of a part
   surface and the approach axis (``-R[:, 2]``) is within ``grasp_cone`` of the
   inward surface normal. Invalid grasps apply no force.
2. A valid gripper applies ``f = f_pull * R[:, 2]`` (it retreats along its own
   approach axis).
3. ``dq = clamp(sum_{grippers on part 1} J(p)^T f / k)`` with the point Jacobian
   ``J(p) = axis x (p - origin)`` (revolute) or ``axis`` (prismatic).
4. The whole object rests on the ground held by friction: the net applied force
   gives ``base_displacement = |sum f| / k_base`` with
   ``k_base = mu * m * g / slip_length``; the horizontal part of the net torque
   about the footprint centre gives ``tilt = |tau_xy| / k_tilt`` with
   ``k_tilt = m * g * r_support / tip_angle``. With the defaults the base
   displacement threshold is crossed exactly when the net force exceeds the
   friction limit, and the tilt threshold when the torque exceeds the
   gravitational restoring moment.
5. ``success = judge(...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import BiAdaptError
from ..geometry import PointCloud, check_rotation
from ..seeding import rng_for
from .objects import F_PULL, PRISMATIC, REVOLUTE, ObjectSpec, nearest_surface, yaw_rotation
from .render import RenderedScene, frame_camera, render

TASKS = ("Unfolding", "Opening", "Uncapping", "Closing", "Capping")
TASK_JOINT = {
    "Unfolding": REVOLUTE,
    "Opening": REVOLUTE,
    "Closing": REVOLUTE,
    "Uncapping": PRISMATIC,
    "Capping": PRISMATIC,
}
# +1: the task needs the joint value to grow, -1: to shrink
TASK_SIGN = {"Unfolding": 1, "Opening": 1, "Closing": -1, "Uncapping": 1, "Capping": -1}


@dataclass(frozen=True)
class TaskSpec:
    task: str
    joint_fraction_threshold: float = 0.10
    prismatic_distance_threshold: float = 0.05
    base_displacement_threshold: float = 0.05
    tilt_threshold: float = 0.35

    def __post_init__(self):
        if self.task not in TASK_JOINT:
            raise BiAdaptError("unknown-task", f"{self.task!r} not in {TASKS}")
        for name in ("joint_fraction_threshold", "prismatic_distance_threshold",
                     "base_displacement_threshold", "tilt_threshold"):
            if not getattr(self, name) > 0:
                raise BiAdaptError("invalid-task", f"{name} must be positive")

    @property
    def joint_kind(self) -> str:
        return TASK_JOINT[self.task]

    @property
    def sign(self) -> int:
        return TASK_SIGN[self.task]


@dataclass(frozen=True)
class Physics:
    f_pull: float = F_PULL
    contact_eps: float = 0.005
    grasp_cone: float = math.radians(60.0)
    gravity: float = 9.81
    slip_length: float = 0.05
    tip_angle: float = 0.35


DEFAULT_PHYSICS = Physics()


@dataclass(frozen=True, eq=False)
class GripperAction:
    contact: np.ndarray
    orientation: np.ndarray
    pull_distance: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "contact", np.asarray(self.contact, dtype=np.float64).reshape(3))
        object.__setattr__(self, "orientation", check_rotation(self.orientation))
        if not self.pull_distance > 0:
            raise BiAdaptError("invalid-action", "pull_distance must be positive")

    @property
    def approach(self) -> np.ndarray:
        return -self.orientation[:, 2]

    @property
    def pull(self) -> np.ndarray:
        return self.orientation[:, 2]


@dataclass(frozen=True)
class InteractionOutcome:
    delta_q: float
    base_displacement: float
    tilt: float
    grasp_valid: tuple[bool, bool]
    success: bool
    contact_parts: tuple[int, int] = field(default=(-1, -1))

    def __post_init__(self):
        if self.success and not all(self.grasp_valid):
            raise BiAdaptError("invalid-outcome", "success requires both grasps valid")


def base_stiffness(obj: ObjectSpec, physics: Physics = DEFAULT_PHYSICS) -> float:
    return obj.friction * obj.total_mass * physics.gravity / physics.slip_length


def support_radius(obj: ObjectSpec) -> float:
    base = obj.parts[0]
    if base.shape == "box":
        return float(min(base.dims[0], base.dims[1]) / 2.0)
    return float(base.dims[0])


def tilt_stiffness(obj: ObjectSpec, physics: Physics = DEFAULT_PHYSICS) -> float:
    return obj.total_mass * physics.gravity * support_radius(obj) / physics.tip_angle


def joint_jacobian(obj: ObjectSpec, point: np.ndarray) -> np.ndarray:
    axis, origin = obj.joint_world()
    if obj.joint.kind == REVOLUTE:
        return np.cross(axis, np.asarray(point) - origin)
    return axis


def check_contact(action: GripperAction, observation: PointCloud, eps: float) -> None:
    _, d = observation.nearest(action.contact)
    if d > eps:
        raise BiAdaptError("invalid-contact", f"contact is {d * 1000:.2f} mm from the observation")


def judge(delta_q: float, base_displacement: float, tilt: float, grasp_valid, obj: ObjectSpec,
          task: TaskSpec) -> bool:
    if obj.joint.kind != task.joint_kind:
        raise BiAdaptError("task-object-mismatch", f"{task.task} needs a {task.joint_kind} joint, "
                                                  f"{obj.category} has {obj.joint.kind}")
    if not all(grasp_valid):
        return False
    if not (base_displacement < task.base_displacement_threshold and tilt < task.tilt_threshold):
        return False
    if task.joint_kind == REVOLUTE:
        need = task.joint_fraction_threshold * obj.joint.range
        return delta_q >= need if task.sign > 0 else delta_q <= -need
    need = task.prismatic_distance_threshold
    return delta_q > need if task.sign > 0 else delta_q < -need


def grasp_check(obj: ObjectSpec, action: GripperAction, physics: Physics = DEFAULT_PHYSICS):
    """Owning part, validity flag and outward normal for one gripper."""
    own, dist, normal = nearest_surface(obj, action.contact[None, :])
    n = normal[0]
    cos_angle = float(np.clip(action.approach @ (-n), -1.0, 1.0))
    valid = bool(dist[0] <= physics.contact_eps and math.acos(cos_angle) <= physics.grasp_cone)
    return int(own[0]), valid, n


def execute(obj: ObjectSpec, u1: GripperAction, u2: GripperAction, task: TaskSpec,
            physics: Physics = DEFAULT_PHYSICS, observation: PointCloud | None = None) -> InteractionOutcome:
    if observation is not None:
        check_contact(u1, observation, physics.contact_eps)
        check_contact(u2, observation, physics.contact_eps)
    j = obj.joint
    raw = 0.0
    f_net = np.zeros(3)
    tau = np.zeros(3)
    center = obj.base_translation
    valid, parts = [], []
    for u in (u1, u2):
        part, ok, _ = grasp_check(obj, u, physics)
        valid.append(ok)
        parts.append(part)
        if not ok:
            continue
        f = physics.f_pull * u.pull
        if part == 1:
            raw += float(joint_jacobian(obj, u.contact) @ f) / j.resistance
        f_net += f
        tau += np.cross(u.contact - center, f)
    q_new = min(max(j.q + raw, j.limits[0]), j.limits[1])
    dq = q_new - j.q
    base_disp = float(np.linalg.norm(f_net)) / base_stiffness(obj, physics)
    tilt = float(np.hypot(tau[0], tau[1])) / tilt_stiffness(obj, physics)
    ok = judge(dq, base_disp, tilt, valid, obj, task)
    return InteractionOutcome(dq, base_disp, tilt, (valid[0], valid[1]), ok, (parts[0], parts[1]))


# ---------------------------------------------------------------------------
# Episode set-up
# ---------------------------------------------------------------------------

def place_for_task(obj: ObjectSpec, task: TaskSpec, seed: int, yaw_range: float = 0.35) -> ObjectSpec:
    """Initial joint state for ``task`` plus a seeded yaw about the vertical axis."""
    if obj.joint.kind != task.joint_kind:
        raise BiAdaptError("task-object-mismatch", f"{task.task} cannot use {obj.category}")
    rng = rng_for(seed, "place", task.task)
    lo, hi = obj.joint.limits
    span = hi - lo
    frac = {
        "Unfolding": 0.0,
        "Opening": float(rng.uniform(0.15, 0.35)),
        "Closing": float(rng.uniform(0.55, 0.8)),
        "Uncapping": 0.0,
        "Capping": float(rng.uniform(0.6, 0.9)),
    }[task.task]
    yaw = float(rng.uniform(-yaw_range, yaw_range))
    return obj.with_q(lo + frac * span).with_pose(yaw_rotation(yaw), obj.base_translation)


def make_scene(obj: ObjectSpec, task: TaskSpec, seed: int, n_points: int = 4096,
               image_size: int = 64) -> RenderedScene:
    """Place ``obj`` for ``task``, frame a camera and render; all seeded from ``seed``."""
    placed = place_for_task(obj, task, seed)
    cam = frame_camera(placed, seed, size=image_size)
    return render(placed, cam, n_points=n_points, seed=seed)
