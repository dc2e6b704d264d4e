"""Scripted action samplers used to populate the supporting set and as a baseline."""

from __future__ import annotations

import math

import numpy as np

from ..errors import BiAdaptError
from ..geometry import gripper_orientation
from ..seeding import rng_for
from .objects import PRISMATIC, part_surface
from .render import RenderedScene
from .sim import GripperAction, TaskSpec


def _into_cone(direction: np.ndarray, center: np.ndarray, max_angle: float) -> np.ndarray:
    """Rotate ``direction`` towards ``center`` until the angle between them is at most ``max_angle``."""
    d = direction / np.linalg.norm(direction)
    c = center / np.linalg.norm(center)
    cos_a = float(np.clip(d @ c, -1.0, 1.0))
    if math.acos(cos_a) <= max_angle:
        return d
    w = d - cos_a * c
    nw = np.linalg.norm(w)
    if nw < 1e-9:
        w = np.cross(c, [1.0, 0.0, 0.0])
        if np.linalg.norm(w) < 1e-6:
            w = np.cross(c, [0.0, 1.0, 0.0])
        nw = np.linalg.norm(w)
    w /= nw
    return math.cos(max_angle) * c + math.sin(max_angle) * w


def sample_cone(axis: np.ndarray, max_angle: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction within ``max_angle`` of ``axis`` (solid-angle measure)."""
    a = axis / np.linalg.norm(axis)
    cos_t = rng.uniform(math.cos(max_angle), 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    return cos_t * a + sin_t * (math.cos(phi) * e1 + math.sin(phi) * e2)


def desired_pulls(scene: RenderedScene, task: TaskSpec, p1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Oracle pull directions for the moving part (first) and the base (second)."""
    obj = scene.obj
    axis, origin = obj.joint_world()
    if obj.joint.kind == PRISMATIC:
        d1 = task.sign * axis
    else:
        t = np.cross(axis, p1 - origin)
        d1 = task.sign * t / np.linalg.norm(t)
    return d1, -d1


def heuristic_policy(scene: RenderedScene, task: TaskSpec, seed: int, cone_margin: float = math.radians(55.0),
                     with_indices: bool = False, jitter: float = 0.0):
    """Hand-engineered rule using the oracle object pose.

    One contact is drawn per part (gripper 1 on the moving part, gripper 2 on
    the base). Each gripper pulls along the joint axis (prismatic) or along the
    rotation-arc tangent (revolute), the two in opposite directions with signs
    set by the task, after tilting the approach into the grasp cone around the
    local inward normal. ``jitter > 0`` perturbs each approach uniformly within
    that angle (then re-tilts it into the cone) for exploratory data collection.
    """
    obs = scene.observation
    rng = rng_for(seed, "heuristic", task.task)
    picks = []
    for part in (1, 0):
        idx = np.flatnonzero(obs.labels == part)
        if idx.size == 0:
            raise BiAdaptError("part-occluded", f"part {part} has no visible points")
        picks.append(int(idx[rng.integers(idx.size)]))
    p1, p2 = obs.points[picks[0]], obs.points[picks[1]]
    d1, d2 = desired_pulls(scene, task, p1)
    actions = []
    for part, p, d in ((1, p1, d1), (0, p2, d2)):
        _, n = part_surface(scene.obj, part, p[None, :])
        approach = _into_cone(-d, -n[0], cone_margin)
        if jitter > 0:
            approach = _into_cone(sample_cone(approach, jitter, rng), -n[0], cone_margin)
        actions.append(GripperAction(p, gripper_orientation(approach)))
    if with_indices:
        return actions[0], actions[1], tuple(picks)
    return actions[0], actions[1]


def random_policy(scene: RenderedScene, seed: int, cone: float = math.radians(75.0), with_indices: bool = False):
    """Two distinct uniformly drawn contacts; approaches within ``cone`` of the estimated inward normal."""
    obs = scene.observation
    if len(obs) < 2:
        raise BiAdaptError("insufficient-points", "need at least two observed points")
    rng = rng_for(seed, "random-policy")
    picks = [int(i) for i in rng.choice(len(obs), size=2, replace=False)]
    actions = []
    for i in picks:
        approach = sample_cone(-obs.normals[i], cone, rng)
        actions.append(GripperAction(obs.points[i], gripper_orientation(approach)))
    if with_indices:
        return actions[0], actions[1], tuple(picks)
    return actions[0], actions[1]
