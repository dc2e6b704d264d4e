"""Supporting set, affordance retrieval, candidate generation, few-shot adaptation and evaluation."""

from __future__ import annotations

import hashlib
import io
import json
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .binfmt import decode_blocks, encode_blocks, read_file, write_file
from .errors import BiAdaptError, DataError
from .features import DEFAULT_EXTRACTOR, ContactPairCandidate, FeatureField, extract_field, map_contact_pair
from .geometry import back_project
from .nn import Proposal, Scorer
from .nn.checkpoint import decode_checkpoint, encode_checkpoint
from .perception import (
    GripperModule, InteractionSample, PerceptionConfig, PerceptionModule, SampleTable, collaboration_targets,
    make_batch, propose, scene_input, score_pairs, train_proposal, train_scorer,
)
from .seeding import derive_seed, rng_for
from .world import CATEGORIES, DEFAULT_TRAIN, GripperAction, TaskSpec, execute, generate_object, make_scene
from .world import heuristic_policy, random_policy
from .world.io import MAGIC as WORLD_MAGIC, VERSION as WORLD_VERSION, scene_blocks, scene_from_blocks
from .world.render import RenderedScene
from .world.sim import TASK_JOINT, TASKS

INDEX_HEADER = "id\tcategory\ttask\toutcome"
BACKPROJECT_TOL = 1e-9


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SupportRecord:
    id: str
    category: str
    task: str
    scene: RenderedScene
    px1: tuple[int, int]
    px2: tuple[int, int]
    u1: GripperAction
    u2: GripperAction
    r: int

    def __post_init__(self):
        if self.r not in (0, 1):
            raise DataError("invalid-record", f"{self.id}: outcome must be 0 or 1")
        for px, u in ((self.px1, self.u1), (self.px2, self.u2)):
            d = self.scene.depth[px[1], px[0]]
            if d <= 0 or np.max(np.abs(back_project(px, d, self.scene.camera) - u.contact)) > BACKPROJECT_TOL:
                raise DataError("invalid-record", f"{self.id}: contact is not the back-projection of its pixel")

    @property
    def p1(self) -> np.ndarray:
        return self.u1.contact

    @property
    def p2(self) -> np.ndarray:
        return self.u2.contact

    @property
    def eligible(self) -> bool:
        return self.r == 1

    def sample(self) -> InteractionSample:
        return InteractionSample(self.scene, self.p1, self.p2, self.u1.orientation, self.u2.orientation,
                                 float(self.r), self.task)


def record_blocks(rec: SupportRecord) -> dict:
    b = {
        "rec.id": rec.id,
        "rec.category": rec.category,
        "rec.task": rec.task,
        "rec.pixels": np.array([rec.px1, rec.px2], dtype=np.int64),
        "rec.contacts": np.array([rec.p1, rec.p2]),
        "rec.orientations": np.array([rec.u1.orientation, rec.u2.orientation]),
        "rec.outcome": np.array([rec.r], dtype=np.int64),
    }
    b.update(scene_blocks(rec.scene))
    return b


def record_from_blocks(b: dict) -> SupportRecord:
    try:
        px = b["rec.pixels"]
        p, R = b["rec.contacts"], b["rec.orientations"]
        return SupportRecord(
            b["rec.id"], b["rec.category"], b["rec.task"], scene_from_blocks(b),
            (int(px[0, 0]), int(px[0, 1])), (int(px[1, 0]), int(px[1, 1])),
            GripperAction(p[0], R[0]), GripperAction(p[1], R[1]), int(b["rec.outcome"][0]),
        )
    except (KeyError, IndexError, BiAdaptError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError("corrupt", f"bad record blocks: {exc}") from exc


def encode_record(rec: SupportRecord) -> bytes:
    return encode_blocks(WORLD_MAGIC, WORLD_VERSION, record_blocks(rec))


def decode_record(data: bytes) -> SupportRecord:
    return record_from_blocks(decode_blocks(data, WORLD_MAGIC, WORLD_VERSION)[1])


# ---------------------------------------------------------------------------
# Supporting set
# ---------------------------------------------------------------------------

class SupportSet:
    """Read-only collection of interaction records with generator provenance."""

    def __init__(self, records, provenance: dict):
        self._records = tuple(records)
        ids = [r.id for r in self._records]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate-id", "record ids must be unique")
        self._provenance = json.loads(json.dumps(provenance))
        self._fields: dict[str, FeatureField] = {}

    @property
    def records(self) -> tuple[SupportRecord, ...]:
        return self._records

    @property
    def provenance(self) -> dict:
        return json.loads(json.dumps(self._provenance))

    def __len__(self):
        return len(self._records)

    def for_task(self, task: str) -> list[SupportRecord]:
        return [r for r in self._records if r.task == task]

    def eligible(self, task: str) -> list[SupportRecord]:
        return [r for r in self._records if r.task == task and r.eligible]

    def counts(self) -> dict[tuple[str, str], tuple[int, int]]:
        """(task, category) to (positives, total)."""
        out: dict = {}
        for r in self._records:
            pos, tot = out.get((r.task, r.category), (0, 0))
            out[(r.task, r.category)] = (pos + r.r, tot + 1)
        return out

    def field(self, rec: SupportRecord, extractor_id: str = DEFAULT_EXTRACTOR) -> FeatureField:
        key = f"{rec.id}|{extractor_id}"
        if key not in self._fields:
            self._fields[key] = extract_field(rec.scene, extractor_id)
        return self._fields[key]

    def index_text(self) -> str:
        lines = [INDEX_HEADER] + [f"{r.id}\t{r.category}\t{r.task}\t{r.r}" for r in self._records]
        return "\n".join(lines) + "\n"

    def save(self, directory) -> None:
        d = Path(directory)
        write_file(d / "index.tsv", self.index_text().encode("utf-8"))
        write_file(d / "provenance.json",
                   (json.dumps(self._provenance, sort_keys=True, indent=1) + "\n").encode("utf-8"))
        for r in self._records:
            write_file(d / "records" / f"{r.id}.biaw", encode_record(r))

    @classmethod
    def load(cls, directory) -> "SupportSet":
        d = Path(directory)
        if not (d / "index.tsv").is_file():
            raise DataError("missing-support-set", f"no index.tsv in {d}")
        lines = read_file(d / "index.tsv").decode("utf-8").splitlines()
        if not lines or lines[0] != INDEX_HEADER:
            raise DataError("corrupt-index", f"{d / 'index.tsv'}: bad header")
        records = []
        for n, line in enumerate(lines[1:], start=2):
            cols = line.split("\t")
            if len(cols) != 4:
                raise DataError("corrupt-index", f"{d / 'index.tsv'} line {n}: expected 4 columns")
            rec = decode_record(read_file(d / "records" / f"{cols[0]}.biaw"))
            if [rec.id, rec.category, rec.task, str(rec.r)] != cols:
                raise DataError("corrupt-index", f"{d / 'index.tsv'} line {n}: does not match its record")
            records.append(rec)
        try:
            prov = json.loads(read_file(d / "provenance.json").decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError("corrupt", f"provenance: {exc}") from exc
        return cls(records, prov)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()


def training_instance(category: str, index: int, seed: int):
    return generate_object(category, derive_seed(seed, "train-instance", category, index) % (1 << 31))


def build_support_set(categories=DEFAULT_TRAIN, per_category_episodes: int = 100, policy_mix: float = 0.5,
                      seed: int = 0, tasks=TASKS, instances_per_category: int = 8,
                      heuristic_jitter: float = 0.0, thresholds: dict | None = None) -> SupportSet:
    """Run seeded episodes on training categories and record every outcome.

    For each (task, category) with matching joint kind, episode ``e`` uses
    instance ``e mod instances_per_category`` and draws the heuristic policy
    with probability ``policy_mix`` (approaches jittered by up to
    ``heuristic_jitter`` radians), otherwise the random policy. A heuristic
    draw whose part is occluded falls back to the random policy.
    ``thresholds`` overrides :class:`TaskSpec` judge thresholds by name.
    """
    if not 0.0 <= policy_mix <= 1.0:
        raise BiAdaptError("invalid-config", "policy_mix must lie in [0, 1]")
    for c in categories:
        if c not in CATEGORIES:
            raise BiAdaptError("unknown-category", c)
    gen_cfg = {"categories": list(categories), "per_category_episodes": int(per_category_episodes),
               "policy_mix": float(policy_mix), "seed": int(seed), "tasks": list(tasks),
               "instances_per_category": int(instances_per_category), "heuristic_jitter": float(heuristic_jitter),
               "thresholds": {k: float(v) for k, v in sorted((thresholds or {}).items())}}
    records, warnings = [], []
    for task in tasks:
        spec = TaskSpec(task, **(thresholds or {}))
        for cat in categories:
            if CATEGORIES[cat] != TASK_JOINT[task]:
                continue
            insts = [training_instance(cat, i, seed) for i in range(instances_per_category)]
            pos = 0
            for e in range(per_category_episodes):
                rec = _episode(insts[e % len(insts)], cat, spec, e, policy_mix, seed, heuristic_jitter)
                pos += rec.r
                records.append(rec)
            if per_category_episodes > 0 and pos == 0:
                warnings.append(f"no-positive-affordance: {task}/{cat}")
    prov = {"generator": gen_cfg, "config_hash": config_hash(gen_cfg), "warnings": warnings}
    return SupportSet(records, prov)


def _episode(obj, category: str, task: TaskSpec, e: int, policy_mix: float, seed: int,
             jitter: float) -> SupportRecord:
    ep_seed = derive_seed(seed, "episode", category, task.task, e) % (1 << 31)
    scene = make_scene(obj, task, ep_seed)
    rng = rng_for(ep_seed, "policy-choice")
    u1 = None
    if rng.random() < policy_mix:
        try:
            u1, u2, picks = heuristic_policy(scene, task, ep_seed, with_indices=True, jitter=jitter)
        except BiAdaptError as exc:
            if exc.code != "part-occluded":
                raise
    if u1 is None:
        u1, u2, picks = random_policy(scene, ep_seed, with_indices=True)
    out = execute(scene.obj, u1, u2, task)
    px = [scene.pixel_of(i) for i in picks]
    return SupportRecord(f"{task.task}-{category}-{e:05d}", category, task.task, scene, px[0], px[1], u1, u2,
                         int(out.success))


def retrieve_sources(support: SupportSet, task: str, k: int, seed: int) -> list[SupportRecord]:
    """Seeded uniform sample without replacement among successful records of ``task``; saturates at all."""
    pool = support.eligible(task)
    if not pool:
        raise BiAdaptError("no-sources", f"no successful record for {task}")
    rng = rng_for(seed, "retrieve", task)
    idx = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
    return [pool[i] for i in idx]


# ---------------------------------------------------------------------------
# Instances and candidates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NovelSplit:
    """Novel-category instances, as (category, seed) pairs, split into a few-shot pool and a holdout."""

    seen: tuple
    unseen: tuple

    def __post_init__(self):
        if set(self.seen) & set(self.unseen):
            raise BiAdaptError("split-overlap", "seen and unseen instances must be disjoint")
        n = len(self.seen) + len(self.unseen)
        if n and len(self.seen) > 0.3 * n + 1e-9:
            raise BiAdaptError("seen-pool-too-large", f"{len(self.seen)} of {n} exceeds 30%")


def novel_split(category: str, n_instances: int, seed: int, seen_fraction: float = 0.3) -> NovelSplit:
    if not 0.0 <= seen_fraction <= 0.3:
        raise BiAdaptError("seen-pool-too-large", "seen fraction must be at most 0.3")
    keys = [(category, derive_seed(seed, "novel-instance", category, i) % (1 << 31)) for i in range(n_instances)]
    n_seen = int(np.floor(seen_fraction * n_instances + 1e-9))
    return NovelSplit(tuple(keys[:n_seen]), tuple(keys[n_seen:]))


class SceneCache:
    """Scenes and feature fields for (category, instance seed, task, scene seed), shared across methods."""

    def __init__(self, maxsize: int = 256, extractor_id: str = DEFAULT_EXTRACTOR):
        self.maxsize = maxsize
        self.extractor_id = extractor_id
        self._items: OrderedDict = OrderedDict()
        self._objects: dict = {}

    def object(self, key):
        if key not in self._objects:
            self._objects[key] = generate_object(key[0], key[1])
        return self._objects[key]

    def get(self, key, task: str, scene_seed: int) -> tuple[RenderedScene, FeatureField]:
        k = (key, task, scene_seed)
        if k in self._items:
            self._items.move_to_end(k)
            return self._items[k]
        scene = make_scene(self.object(key), TaskSpec(task), scene_seed)
        item = (scene, extract_field(scene, self.extractor_id))
        self._items[k] = item
        if len(self._items) > self.maxsize:
            self._items.popitem(last=False)
        return item


def transfer_candidates(support: SupportSet, task: str, scene: RenderedScene, fld: FeatureField, k: int,
                        seed: int) -> list[ContactPairCandidate]:
    """Map the contact pairs of ``k`` retrieved successful records onto ``scene`` by correspondence."""
    out = []
    for rec in retrieve_sources(support, task, k, seed):
        if not rec.eligible:  # structural guard: failures never reach the correspondence step
            raise BiAdaptError("ineligible-source", rec.id)
        out.append(map_contact_pair(rec, scene, fld, support.field(rec, fld.extractor_id)))
    return out


def sampled_candidates(module: PerceptionModule, scene: RenderedScene, k: int, n_pairs: int,
                       seed: int) -> list[ContactPairCandidate]:
    """Contact pairs drawn uniformly on the observation and ranked by the module's own scorer.

    This is the pathway without affordance transfer: ``n_pairs`` random pairs
    are scored and the top ``k`` (stable order) become the candidates.
    """
    obs = scene.observation
    rng = rng_for(seed, "sampled-candidates")
    idx = np.stack([rng.choice(len(obs), size=2, replace=False) for _ in range(n_pairs)])
    contacts = obs.points[idx]
    s = score_pairs(module, scene, contacts, seed)
    top = np.argsort(-s, kind="stable")[:k]
    return [ContactPairCandidate(contacts[i, 0].copy(), contacts[i, 1].copy(), scene.pixel_of(idx[i, 0]),
                                 scene.pixel_of(idx[i, 1]), float(s[i]), float(s[i]), f"sampled-{i}")
            for i in top]


# ---------------------------------------------------------------------------
# Agents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Choice:
    u1: GripperAction
    u2: GripperAction
    score: float
    candidate_id: str
    candidate: ContactPairCandidate | None = None


class ModuleAgent:
    """The perception module proposing over candidates."""

    def __init__(self, module: PerceptionModule, n_orient: int | None = None):
        self.module = module
        self.n_orient = n_orient

    def choose(self, scene, task, candidates, seed) -> Choice:
        p = propose(self.module, scene, candidates, self.n_orient, seed)
        c = candidates[p.candidate]
        return Choice(p.u1, p.u2, p.score, c.source_record_id, c)


class HeuristicAgent:
    """Oracle-pose heuristic; ignores candidates."""

    uses_candidates = False

    def choose(self, scene, task, candidates, seed) -> Choice:
        u1, u2 = heuristic_policy(scene, _task(task)[1], seed)
        return Choice(u1, u2, float("nan"), "heuristic")


@dataclass(eq=False)
class IndependentModule:
    """Two single-gripper modules trained and queried without regard to each other."""

    g1: GripperModule
    g2: GripperModule
    config: PerceptionConfig = field(default_factory=PerceptionConfig)

    @classmethod
    def create(cls, seed: int, config: PerceptionConfig | None = None) -> "IndependentModule":
        cfg = config or PerceptionConfig()

        def grip(name):
            return GripperModule(
                Proposal(1, rng_for(seed, "init", name, "A"), latent=cfg.latent, hidden=cfg.hidden,
                         kl_weight=cfg.kl_weight),
                Scorer(1, rng_for(seed, "init", name, "C"), hidden=cfg.hidden))

        return cls(grip("indep-1"), grip("indep-2"), cfg)

    def networks(self) -> dict:
        return {"A1": self.g1.proposal, "C1": self.g1.scorer, "A2": self.g2.proposal, "C2": self.g2.scorer}

    def to_bytes(self) -> bytes:
        state = {f"{n}/{k}": p.value for n, net in self.networks().items() for k, p in net.params()}
        return encode_checkpoint({"format": "independent-module", "config": asdict(self.config)}, state)

    @classmethod
    def from_bytes(cls, data: bytes) -> "IndependentModule":
        manifest, tensors = decode_checkpoint(data)
        if manifest.get("format") != "independent-module":
            raise DataError("bad-checkpoint", "not an independent-module checkpoint")
        mod = cls.create(0, PerceptionConfig(**manifest["config"]))
        for name, net in mod.networks().items():
            try:
                net.load_state({k.split("/", 1)[1]: v for k, v in tensors.items() if k.startswith(name + "/")})
            except (KeyError, ValueError) as exc:
                raise DataError("bad-checkpoint", f"{name}: {exc}") from exc
        return mod


def _swap_grippers(table: SampleTable) -> SampleTable:
    t = object.__new__(SampleTable)
    t.__dict__.update(table.__dict__)
    t.contacts = table.contacts[:, ::-1].copy()
    t.normals = table.normals[:, ::-1].copy()
    t.rotations = table.rotations[:, ::-1].copy()
    return t


def train_independent(mod: IndependentModule, samples, seed: int) -> list[tuple]:
    """Each gripper's scorer learns the joint outcome from its own action only (balanced); A on positives."""
    cfg = mod.config
    table = samples if isinstance(samples, SampleTable) else SampleTable(samples, cfg.k_points)
    curve = []
    for g, (gm, t) in enumerate(((mod.g1, table), (mod.g2, _swap_grippers(table))), start=1):
        curve += train_scorer(gm.scorer, t, cfg.steps_c1, cfg, rng_for(seed, "train", f"indep-C{g}"),
                              name=f"I{g}C")
        curve += train_proposal(gm.proposal, t, cfg.steps_a1, cfg, rng_for(seed, "train", f"indep-A{g}"),
                                name=f"I{g}A")
    return curve


class IndependentAgent:
    def __init__(self, mod: IndependentModule, n_orient: int | None = None):
        self.mod = mod
        self.n_orient = n_orient or mod.config.n_orient

    def choose(self, scene, task, candidates, seed) -> Choice:
        if len(candidates) == 0:
            raise BiAdaptError("no-candidates", "nothing to propose from")
        n, C = self.n_orient, len(candidates)
        inp = scene_input(scene, self.mod.config.k_points)
        rng = rng_for(seed, "independent")
        best, scores = [], np.ones(C)
        for g, gm in enumerate((self.mod.g1, self.mod.g2)):
            eta = rng.standard_normal((n, gm.proposal.latent))
            contacts = np.array([[c.p1] if g == 0 else [c.p2] for c in candidates])
            b = make_batch([inp], np.zeros(C, dtype=np.int64), contacts, np.zeros((C, 0, 3, 3))).repeat(n)
            R = gm.proposal.sample(b, np.tile(eta, (C, 1)))
            s = gm.scorer.predict(b.with_rotations(R[:, None])).reshape(C, n)
            k = np.argmax(s, axis=1)
            best.append(R.reshape(C, n, 3, 3)[np.arange(C), k])
            scores = scores * s[np.arange(C), k]
        w = int(np.argmax(scores))
        c = candidates[w]
        return Choice(GripperAction(c.p1, best[0][w]), GripperAction(c.p2, best[1][w]), float(scores[w]),
                      c.source_record_id, c)


# ---------------------------------------------------------------------------
# Adaptation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdaptConfig:
    num_sources: int = 8
    update_every: int = 10
    lr_scale: float = 0.3
    finetune_steps: int = 120
    sampled_pairs: int = 64
    n_orient: int = 32
    replay: float = 1.0  # supporting-set samples mixed into each fine-tune, per novel sample


@dataclass
class AdaptationBudget:
    interactions: int = 50
    seen_pool: tuple = ()

    def __post_init__(self):
        if self.interactions < 0:
            raise BiAdaptError("invalid-budget", "interactions must be non-negative")
        if self.interactions > 0 and not self.seen_pool:
            raise BiAdaptError("empty-pool", "positive budget needs a non-empty seen pool")


LOG_HEADER = ("step", "instance", "candidate_id", "c2_score", "delta_q", "success")


@dataclass
class AdaptResult:
    module: PerceptionModule
    log: list[tuple]
    snapshots: dict = field(default_factory=dict)
    a_trained_on: list = field(default_factory=list)  # per fine-tune round, outcomes of A's training samples

    def log_csv(self) -> str:
        return rows_to_csv(LOG_HEADER, self.log)


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(x) for x in r) + "\n")
    return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def build_candidates(mode: str, module, support, task, scene, fld, cfg: AdaptConfig, seed: int):
    if mode == "transfer":
        return transfer_candidates(support, task, scene, fld, cfg.num_sources, seed)
    if mode == "sampled":
        return sampled_candidates(module, scene, cfg.num_sources, cfg.sampled_pairs, seed)
    raise BiAdaptError("unknown-candidates", mode)


def finetune(module: PerceptionModule, samples: list[InteractionSample], cfg: AdaptConfig, seed: int,
             round_: int, audit: list | None = None, replay_pool=()) -> None:
    """One damped fine-tune pass on the accumulated novel-category samples, M2 before M1.

    ``replay * len(samples)`` supporting-set samples of the same task are drawn
    (seeded, without replacement) from ``replay_pool`` and mixed in to limit
    forgetting. Scorers need both outcomes for balancing and are skipped until
    both occur; proposal networks see the successful samples only.
    """
    pc = module.config
    n_replay = min(len(replay_pool), int(round(cfg.replay * len(samples))))
    if n_replay:
        pick = rng_for(seed, "replay", round_).choice(len(replay_pool), size=n_replay, replace=False)
        samples = list(samples) + [replay_pool[i] for i in np.sort(pick)]
    table = SampleTable(samples, pc.k_points)
    lr = pc.lr * cfg.lr_scale
    has_pos, has_neg = bool(np.any(table.r > 0.5)), bool(np.any(table.r <= 0.5))
    rs = lambda name: rng_for(seed, "finetune", round_, name)  # noqa: E731
    if has_pos and has_neg:
        train_scorer(module.m2.scorer, table, cfg.finetune_steps, pc, rs("C2"), lr=lr, name="C2")
    if has_pos:
        train_proposal(module.m2.proposal, table, cfg.finetune_steps, pc, rs("A2"), lr=lr, name="A2")
        if audit is not None:
            audit.append([float(x) for x in table.r[table.r > 0.5]])
    if has_pos and has_neg:
        targets = collaboration_targets(module, table, derive_seed(seed, "finetune", round_))
        train_scorer(module.m1.scorer, table, cfg.finetune_steps, pc, rs("C1"), targets=targets, balance=False,
                     lr=lr, name="C1")
    if has_pos:
        train_proposal(module.m1.proposal, table, cfg.finetune_steps, pc, rs("A1"), lr=lr, name="A1")


def _task(task) -> tuple[str, TaskSpec]:
    spec = task if isinstance(task, TaskSpec) else TaskSpec(task)
    return spec.task, spec


def adapt(module: PerceptionModule, support: SupportSet | None, budget: AdaptationBudget, task,
          config: AdaptConfig = AdaptConfig(), seed: int = 0, candidates: str = "transfer",
          snapshots=(), cache: SceneCache | None = None) -> AdaptResult:
    """Propose, execute and fine-tune on the seen pool for ``budget.interactions`` steps.

    Instances are visited round-robin. The module is fine-tuned after every
    ``update_every`` interactions and once more at the end if samples are left
    over. ``snapshots`` lists intermediate budgets; each snapshot is what a run
    with that budget would return (its pending samples are flushed on a copy).
    The input module is never mutated. ``task`` is a name or a :class:`TaskSpec`.
    """
    task, spec = _task(task)
    cache = cache or SceneCache()
    mod = module.copy()
    replay = [r.sample() for r in support.for_task(task)] if support is not None and config.replay > 0 else []
    snaps = {}
    log, samples, audit = [], [], []
    pending = 0
    rounds = 0
    if 0 in snapshots:
        snaps[0] = module.copy()
    for i in range(budget.interactions):
        key = budget.seen_pool[i % len(budget.seen_pool)]
        scene_seed = derive_seed(seed, "adapt", task, i) % (1 << 31)
        scene, fld = cache.get(key, task, scene_seed)
        cands = build_candidates(candidates, mod, support, task, scene, fld, config, scene_seed)
        p = propose(mod, scene, cands, config.n_orient, scene_seed)
        out = execute(scene.obj, p.u1, p.u2, spec)
        samples.append(InteractionSample(scene, p.u1.contact, p.u2.contact, p.u1.orientation, p.u2.orientation,
                                         float(out.success), task))
        log.append((i, f"{key[0]}:{key[1]}", cands[p.candidate].source_record_id, p.score, out.delta_q,
                    int(out.success)))
        pending += 1
        if pending == config.update_every:
            finetune(mod, samples, config, seed, rounds, audit, replay)
            rounds += 1
            pending = 0
        if (i + 1) in snapshots and (i + 1) != budget.interactions:
            snap = mod.copy()
            if pending:
                finetune(snap, samples, config, seed, rounds, None, replay)
            snaps[i + 1] = snap
    if pending:
        finetune(mod, samples, config, seed, rounds, audit, replay)
    if budget.interactions in snapshots:
        snaps[budget.interactions] = mod
    return AdaptResult(mod, log, snaps, audit)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

EVAL_HEADER = ("trial", "instance", "candidate_id", "score", "delta_q", "success")


@dataclass
class EvalResult:
    rate: float
    successes: int
    trials: int
    log: list[tuple]
    choices: list = field(default_factory=list)  # (scene, Choice) of the first ``keep_choices`` trials


def evaluate(agent, support: SupportSet | None, instances, task, trials: int, transfer_on: bool = True,
             seed: int = 0, seen_pool=(), config: AdaptConfig = AdaptConfig(),
             cache: SceneCache | None = None, keep_choices: int = 0) -> EvalResult:
    """Success rate of ``agent`` over ``trials`` seeded trials, instances visited round-robin.

    Candidates come from correspondence transfer when ``transfer_on``, else
    from the agent's own score-ranked sampling. A trial whose action cannot be
    formed (occluded part, no candidate) counts as a failure.
    """
    instances = tuple(instances)
    if set(instances) & set(seen_pool):
        raise BiAdaptError("split-overlap", "evaluation instances overlap the adaptation pool")
    if not instances or trials <= 0:
        raise BiAdaptError("invalid-evaluation", "need instances and a positive trial count")
    task, spec = _task(task)
    cache = cache or SceneCache()
    log, wins, kept = [], 0, []
    for t in range(trials):
        key = instances[t % len(instances)]
        scene_seed = derive_seed(seed, "eval", task, t) % (1 << 31)
        scene, fld = cache.get(key, task, scene_seed)
        try:
            if getattr(agent, "uses_candidates", True):
                mod = agent.module if isinstance(agent, ModuleAgent) else None
                cands = build_candidates("transfer" if transfer_on else "sampled", mod, support, task, scene, fld,
                                         config, scene_seed)
            else:
                cands = []
            ch = agent.choose(scene, spec, cands, scene_seed)
        except BiAdaptError as exc:
            if exc.code not in ("part-occluded", "no-candidates", "no-sources"):
                raise
            log.append((t, f"{key[0]}:{key[1]}", exc.code, float("nan"), 0.0, 0))
            continue
        out = execute(scene.obj, ch.u1, ch.u2, spec)
        if t < keep_choices:
            kept.append((scene, ch))
        wins += int(out.success)
        log.append((t, f"{key[0]}:{key[1]}", ch.candidate_id, ch.score, out.delta_q, int(out.success)))
    return EvalResult(wins / trials, wins, trials, log, kept)


__all__ = [
    "SupportRecord", "SupportSet", "build_support_set", "retrieve_sources", "record_blocks", "record_from_blocks",
    "encode_record", "decode_record", "config_hash", "training_instance", "NovelSplit", "novel_split",
    "SceneCache", "transfer_candidates", "sampled_candidates", "Choice", "ModuleAgent", "HeuristicAgent",
    "IndependentModule", "IndependentAgent", "train_independent", "AdaptConfig", "AdaptationBudget",
    "AdaptResult", "adapt", "finetune", "evaluate", "EvalResult", "rows_to_csv", "LOG_HEADER", "EVAL_HEADER",
    "build_candidates",
]
