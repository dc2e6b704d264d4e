"""Procedural articulated objects, depth rendering and the quasi-static interaction model."""

from .objects import (
    CATEGORIES, DEFAULT_NOVEL, DEFAULT_TRAIN, PRISMATIC, REVOLUTE,
    JointSpec, ObjectSpec, Part, generate_object,
)
from .policies import heuristic_policy, random_policy
from .render import RenderedScene, frame_camera, render
from .sim import (
    DEFAULT_PHYSICS, TASK_JOINT, TASKS, GripperAction, InteractionOutcome, Physics, TaskSpec,
    execute, judge, make_scene, place_for_task,
)
