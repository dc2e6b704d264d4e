"""Experiment configuration: a line-oriented ``key = value`` file with dotted keys.

Blank lines and lines starting with ``#`` are ignored. Lists are comma
separated. Every key is optional; unknown keys are errors so typos surface.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..errors import BiAdaptError, ConfigError
from ..features import EXTRACTORS, DEFAULT_EXTRACTOR
from ..perception import PerceptionConfig
from ..transfer import AdaptConfig
from ..world import CATEGORIES, DEFAULT_NOVEL, DEFAULT_TRAIN, TASKS, TaskSpec

METHODS = ("heuristic", "independent", "ours_wo_AT", "ours_wo_FA", "ours")
SPLITS = ("train", "novel-seen", "novel-unseen")


@dataclass(frozen=True)
class Thresholds:
    joint_fraction_threshold: float = 0.10
    prismatic_distance_threshold: float = 0.05
    base_displacement_threshold: float = 0.05
    tilt_threshold: float = 0.35

    def task_spec(self, task: str) -> TaskSpec:
        return TaskSpec(task, **asdict(self))


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out: str = "runs/default"
    train_categories: tuple = DEFAULT_TRAIN
    novel_categories: tuple = DEFAULT_NOVEL
    tasks: tuple = TASKS
    extractor_id: str = DEFAULT_EXTRACTOR
    # supporting set
    episodes: int = 200
    policy_mix: float = 0.5
    train_instances: int = 8
    heuristic_jitter: float = 0.44
    holdout: float = 0.2
    # experiment protocol
    budgets: tuple = (0, 3, 10, 25, 50)
    eval_seeds: tuple = (0, 1, 2, 3, 4)
    trials: int = 100
    novel_instances: int = 20
    seen_fraction: float = 0.3
    splits: tuple = ("novel-unseen",)
    methods: tuple = METHODS
    overlay_scenes: int = 2
    perception: PerceptionConfig = field(default_factory=lambda: PerceptionConfig(
        k_points=128, steps_c2=300, steps_a2=600, steps_c1=600, steps_a1=600))
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        validate(self)

    def task_spec(self, task: str) -> TaskSpec:
        return self.thresholds.task_spec(task)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")).hexdigest()


def _split(v: str) -> tuple:
    return tuple(x.strip() for x in v.split(",") if x.strip())


def _ints(v: str) -> tuple:
    return tuple(int(x) for x in _split(v))


# dotted key -> (section, attribute, parser); section None is the top level
KEYS: dict[str, tuple] = {
    "seed": (None, "seed", int),
    "out": (None, "out", str),
    "split.train": (None, "train_categories", _split),
    "split.novel": (None, "novel_categories", _split),
    "tasks": (None, "tasks", _split),
    "extractor_id": (None, "extractor_id", str),
    "support.episodes": (None, "episodes", int),
    "support.policy_mix": (None, "policy_mix", float),
    "support.instances": (None, "train_instances", int),
    "support.heuristic_jitter": (None, "heuristic_jitter", float),
    "train.holdout": (None, "holdout", float),
    "budgets": (None, "budgets", _ints),
    "eval.seeds": (None, "eval_seeds", _ints),
    "eval.trials": (None, "trials", int),
    "eval.novel_instances": (None, "novel_instances", int),
    "eval.seen_fraction": (None, "seen_fraction", float),
    "eval.splits": (None, "splits", _split),
    "eval.methods": (None, "methods", _split),
    "eval.overlay_scenes": (None, "overlay_scenes", int),
    "transfer.num_sources": ("adapt", "num_sources", int),
}
for _f in fields(PerceptionConfig):
    KEYS[f"perception.{_f.name}"] = ("perception", _f.name, float if _f.type in ("float", float) else int)
for _f in fields(AdaptConfig):
    if _f.name != "num_sources":
        KEYS[f"adapt.{_f.name}"] = ("adapt", _f.name, float if _f.type in ("float", float) else int)
for _f in fields(Thresholds):
    KEYS[f"task.{_f.name}"] = ("thresholds", _f.name, float)


def validate(cfg: ExperimentConfig) -> None:
    cats = list(cfg.train_categories) + list(cfg.novel_categories)
    unknown = [c for c in cats if c not in CATEGORIES]
    if unknown:
        raise ConfigError("invalid-config", f"unknown categories {unknown}")
    if len(set(cats)) != len(cats) or set(cats) != set(CATEGORIES):
        raise ConfigError("invalid-config", "train/novel split must cover all 6 categories with no overlap")
    if not cfg.tasks or any(t not in TASKS for t in cfg.tasks):
        raise ConfigError("invalid-config", f"tasks must be drawn from {TASKS}")
    if list(cfg.budgets) != sorted(set(cfg.budgets)) or not cfg.budgets or cfg.budgets[0] < 0:
        raise ConfigError("invalid-config", "budgets must be non-negative, distinct and sorted ascending")
    if not cfg.eval_seeds:
        raise ConfigError("invalid-config", "at least one evaluation seed is required")
    if cfg.trials <= 0 or cfg.episodes < 0 or cfg.train_instances <= 0:
        raise ConfigError("invalid-config", "trials and instance counts must be positive, episodes non-negative")
    if not 0.0 <= cfg.policy_mix <= 1.0 or not 0.0 < cfg.holdout < 1.0:
        raise ConfigError("invalid-config", "policy_mix must lie in [0, 1] and holdout in (0, 1)")
    if not 0.0 < cfg.seen_fraction <= 0.3:
        raise ConfigError("invalid-config", "seen_fraction must lie in (0, 0.3]")
    if math.floor(cfg.seen_fraction * cfg.novel_instances + 1e-9) < 1 and cfg.budgets[-1] > 0:
        raise ConfigError("invalid-config", "the seen pool would be empty with a positive budget")
    if any(s not in SPLITS for s in cfg.splits) or any(m not in METHODS for m in cfg.methods):
        raise ConfigError("invalid-config", f"splits must be in {SPLITS} and methods in {METHODS}")
    if cfg.extractor_id not in EXTRACTORS:
        raise ConfigError("invalid-config", f"unknown extractor {cfg.extractor_id!r}")
    if cfg.adapt.update_every <= 0 or cfg.adapt.num_sources <= 0 or cfg.adapt.lr_scale <= 0:
        raise ConfigError("invalid-config", "adaptation cadence, sources and learning-rate scale must be positive")
    for task in cfg.tasks:
        try:
            cfg.task_spec(task)
        except BiAdaptError as exc:
            raise ConfigError("invalid-config", f"thresholds for {task}: {exc}") from exc
        if not any(CATEGORIES[c] == TaskSpec(task).joint_kind for c in cfg.novel_categories):
            raise ConfigError("invalid-config", f"no novel category has the joint kind of {task}")
        if not any(CATEGORIES[c] == TaskSpec(task).joint_kind for c in cfg.train_categories):
            raise ConfigError("invalid-config", f"no training category has the joint kind of {task}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    top: dict = {}
    sections: dict = {"perception": {}, "adapt": {}, "thresholds": {}}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("parse", f"{source} line {n}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError("unknown-key", f"{source} line {n}: unknown key {key!r}")
        section, attr, conv = KEYS[key]
        try:
            parsed = conv(value)
        except ValueError as exc:
            raise ConfigError("parse", f"{source} line {n}: bad value for {key}: {exc}") from exc
        (top if section is None else sections[section])[attr] = parsed
    defaults = {f.name: getattr(_DEFAULT, f.name) for f in fields(ExperimentConfig)}
    defaults.update(top)
    try:
        defaults["perception"] = replace(_DEFAULT.perception, **sections["perception"])
        defaults["adapt"] = replace(_DEFAULT.adapt, **sections["adapt"])
        defaults["thresholds"] = replace(_DEFAULT.thresholds, **sections["thresholds"])
        return ExperimentConfig(**defaults)
    except ConfigError:
        raise
    except Exception as exc:  # e.g. a TaskSpec threshold rejected
        raise ConfigError("invalid-config", f"{source}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("io", f"cannot read config {p}: {exc.strerror}") from exc
    return parse_config(text, str(p))


def format_config(cfg: ExperimentConfig) -> str:
    """Render ``cfg`` back to the file format (round-trips through :func:`parse_config`)."""
    lines = []
    for key, (section, attr, conv) in KEYS.items():
        v = getattr(cfg if section is None else getattr(cfg, section), attr)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


_DEFAULT = ExperimentConfig()
DEFAULT_CONFIG = _DEFAULT
