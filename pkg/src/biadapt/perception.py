"""The two-gripper perception module: proposal and scoring networks for each gripper.

Training runs the reversed dataflow: the second gripper's networks (C2, A2)
first, then the first gripper's (C1, A1) against the frozen second gripper.
Inference runs forward: A1/C1 pick the first orientation, A2/C2 the second
conditioned on it.
"""

from __future__ import annotations

import weakref
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import BiAdaptError, DataError
from .geometry import check_rotation, farthest_point_indices
from .nn import Adam, CondBatch, Proposal, Scorer, sigmoid
from .nn.checkpoint import decode_checkpoint, encode_checkpoint
from .seeding import rng_for
from .world.render import RenderedScene
from .world.sim import GripperAction

CONTACT_EPS = 0.005


@dataclass(frozen=True)
class PerceptionConfig:
    k_points: int = 512
    latent: int = 16
    hidden: int = 64
    kl_weight: float = 0.1
    lr: float = 1e-3
    batch: int = 32
    steps_c2: int = 1500
    steps_a2: int = 1000
    steps_c1: int = 1000
    steps_a1: int = 1000
    c1_top_k: int = 10
    c1_partners: int = 32
    n_orient: int = 32


@dataclass(frozen=True, eq=False)
class InteractionSample:
    scene: RenderedScene
    p1: np.ndarray
    p2: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    r: float
    task: str

    def __post_init__(self):
        for name in ("p1", "p2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(3))
        for name in ("R1", "R2"):
            object.__setattr__(self, name, check_rotation(getattr(self, name)))
        if self.r not in (0, 1, 0.0, 1.0):
            raise BiAdaptError("invalid-sample", f"outcome must be 0 or 1, got {self.r}")


# ---------------------------------------------------------------------------
# Scene inputs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SceneInput:
    cloud: np.ndarray      # (k, 6) centred points and normals
    centroid: np.ndarray   # (3,)
    points: np.ndarray     # full observation, for contact checks and normal lookup
    normals: np.ndarray

    def normal_at(self, p: np.ndarray) -> np.ndarray:
        return self.normals[int(np.argmin(np.sum((self.points - p) ** 2, axis=1)))]

    def check_contact(self, p: np.ndarray, eps: float = CONTACT_EPS) -> None:
        d = float(np.sqrt(np.min(np.sum((self.points - p) ** 2, axis=1))))
        if d > eps:
            raise BiAdaptError("invalid-contact", f"contact is {d * 1000:.2f} mm from the observation")


_SCENE_CACHE: "weakref.WeakKeyDictionary[RenderedScene, dict]" = weakref.WeakKeyDictionary()


def scene_input(scene: RenderedScene, k: int) -> SceneInput:
    """Encoder input for ``scene``: a farthest-point subsample of ``k`` observation points (memoised)."""
    per = _SCENE_CACHE.setdefault(scene, {})
    if k not in per:
        obs = scene.observation
        centroid = obs.points.mean(axis=0)
        kk = min(k, len(obs))
        idx = farthest_point_indices(obs.points, kk, seed=0)
        if kk < k:  # pad small clouds by repetition; max-pooling is unaffected
            idx = np.resize(idx, k)
        cloud = np.concatenate([obs.points[idx] - centroid, obs.normals[idx]], axis=1)
        per[k] = SceneInput(cloud, centroid, obs.points, obs.normals)
    return per[k]


def make_batch(inputs: list[SceneInput], scene_index, contacts, rotations) -> CondBatch:
    """Assemble a :class:`CondBatch`; contact normals are looked up on each scene's observation."""
    scene_index = np.asarray(scene_index, dtype=np.int64)
    contacts = np.asarray(contacts, dtype=np.float64)
    normals = np.empty_like(contacts)
    for i, s in enumerate(scene_index):
        for g in range(contacts.shape[1]):
            normals[i, g] = inputs[s].normal_at(contacts[i, g])
    clouds = np.stack([x.cloud for x in inputs])
    cents = np.stack([x.centroid for x in inputs])
    rot = np.asarray(rotations, dtype=np.float64)
    if rot.ndim == 3:
        rot = rot[:, None]
    if rot.shape[1] == 0:
        rot = np.zeros((len(scene_index), 0, 3, 3))
    return CondBatch(clouds, cents, scene_index, contacts, normals, rot)


class SampleTable:
    """Dataset flattened to arrays so minibatches are cheap to assemble."""

    def __init__(self, samples: list[InteractionSample], k: int):
        if not samples:
            raise BiAdaptError("degenerate-dataset", "empty dataset")
        scenes, index = [], {}
        sidx = np.empty(len(samples), dtype=np.int64)
        for i, s in enumerate(samples):
            key = id(s.scene)
            if key not in index:
                index[key] = len(scenes)
                scenes.append(s.scene)
            sidx[i] = index[key]
        self.inputs = [scene_input(s, k) for s in scenes]
        self.scene_index = sidx
        self.contacts = np.stack([[s.p1, s.p2] for s in samples])
        self.rotations = np.stack([[s.R1, s.R2] for s in samples])
        self.r = np.array([float(s.r) for s in samples])
        self.normals = np.empty_like(self.contacts)
        for i in range(len(samples)):
            inp = self.inputs[sidx[i]]
            for g in (0, 1):
                inp.check_contact(self.contacts[i, g])
                self.normals[i, g] = inp.normal_at(self.contacts[i, g])

    def __len__(self):
        return len(self.r)

    def batch(self, idx) -> CondBatch:
        idx = np.asarray(idx, dtype=np.int64)
        scenes, local = np.unique(self.scene_index[idx], return_inverse=True)
        clouds = np.stack([self.inputs[s].cloud for s in scenes])
        cents = np.stack([self.inputs[s].centroid for s in scenes])
        return CondBatch(clouds, cents, local.reshape(-1), self.contacts[idx], self.normals[idx],
                         self.rotations[idx])


# ---------------------------------------------------------------------------
# Modules
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GripperModule:
    proposal: Proposal
    scorer: Scorer


@dataclass(eq=False)
class PerceptionModule:
    m1: GripperModule
    m2: GripperModule
    config: PerceptionConfig = field(default_factory=PerceptionConfig)
    meta: dict = field(default_factory=dict)

    @classmethod
    def create(cls, seed: int, config: PerceptionConfig | None = None, meta: dict | None = None):
        cfg = config or PerceptionConfig()

        def prop(g, name):
            return Proposal(g, rng_for(seed, "init", name), latent=cfg.latent, hidden=cfg.hidden,
                            kl_weight=cfg.kl_weight)

        def score(g, name):
            return Scorer(g, rng_for(seed, "init", name), hidden=cfg.hidden)

        return cls(GripperModule(prop(1, "A1"), score(1, "C1")), GripperModule(prop(2, "A2"), score(2, "C2")),
                   cfg, dict(meta or {}))

    def networks(self) -> dict:
        return {"A1": self.m1.proposal, "C1": self.m1.scorer, "A2": self.m2.proposal, "C2": self.m2.scorer}

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for name, net in self.networks().items():
            for pname, p in net.params():
                out[f"{name}/{pname}"] = p.value
        return out

    def to_bytes(self) -> bytes:
        manifest = {
            "format": "perception-module",
            "config": asdict(self.config),
            "networks": {
                "m1": {"proposal": "A1", "scorer": "C1", "grippers": 1},
                "m2": {"proposal": "A2", "scorer": "C2", "grippers": 2},
            },
            "encoders": {"point_dim": 128, "contact_dim": 32, "orientation_dim": 32, "point_input": 6},
            "meta": self.meta,
        }
        return encode_checkpoint(manifest, self.state())

    @classmethod
    def from_bytes(cls, data: bytes) -> "PerceptionModule":
        manifest, tensors = decode_checkpoint(data)
        if manifest.get("format") != "perception-module":
            raise DataError("bad-checkpoint", "not a perception-module checkpoint")
        mod = cls.create(0, PerceptionConfig(**manifest["config"]), manifest.get("meta", {}))
        for name, net in mod.networks().items():
            try:
                net.load_state({k.split("/", 1)[1]: v for k, v in tensors.items() if k.startswith(name + "/")})
            except (KeyError, ValueError) as exc:
                raise DataError("bad-checkpoint", f"{name}: {exc}") from exc
        return mod

    def copy(self) -> "PerceptionModule":
        return PerceptionModule.from_bytes(self.to_bytes())


# ---------------------------------------------------------------------------
# Condition features
# ---------------------------------------------------------------------------

def condition_features(net: Proposal | Scorer, scene: RenderedScene, p1, R1=None, p2=None, R2=None,
                       k: int = 512) -> np.ndarray:
    """The feature row ``net`` sees for one sample.

    Order: f_s(p1), f_p(p1), [f_R(R1)], [f_s(p2), f_p(p2), [f_R(R2)]], with the
    bracketed terms present only when the network takes them.
    """
    enc = net.cond
    inp = scene_input(scene, k)
    pts = [np.asarray(p1, dtype=np.float64)]
    if enc.n_grippers == 2:
        if p2 is None:
            raise BiAdaptError("missing-input", "second contact required")
        pts.append(np.asarray(p2, dtype=np.float64))
    for p in pts:
        inp.check_contact(p)
    rots = [R for R in (R1, R2)[:enc.n_rotations]]
    if any(R is None for R in rots):
        raise BiAdaptError("missing-input", "orientation required")
    rot = np.array(rots).reshape(1, len(rots), 3, 3) if rots else np.zeros((1, 0, 3, 3))
    b = make_batch([inp], [0], np.array(pts)[None], rot)
    return enc.forward(b)[0][0]


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _balanced_indices(r: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    pos = np.flatnonzero(r > 0.5)
    neg = np.flatnonzero(r <= 0.5)
    if pos.size == 0 or neg.size == 0:
        raise BiAdaptError("unbalanceable", f"need both outcomes, have {pos.size} positive / {neg.size} negative")
    half = n // 2
    return np.concatenate([rng.choice(pos, half), rng.choice(neg, n - half)])


def train_scorer(net: Scorer, table: SampleTable, steps: int, cfg: PerceptionConfig, rng: np.random.Generator,
                 targets: np.ndarray | None = None, balance: bool = True, lr: float | None = None,
                 name: str = "C") -> list[tuple]:
    """Weighted cross-entropy training; ``targets`` overrides the recorded outcomes (soft targets for C1)."""
    opt = Adam(net, lr=cfg.lr if lr is None else lr)
    t = table.r if targets is None else targets
    curve = []
    for step in range(steps):
        idx = _balanced_indices(table.r, cfg.batch, rng) if balance else rng.choice(len(table), cfg.batch)
        opt.zero_grad()
        loss = net.loss(table.batch(idx), t[idx])
        opt.step()
        curve.append((name, step, loss))
    return curve


def train_proposal(net: Proposal, table: SampleTable, steps: int, cfg: PerceptionConfig,
                   rng: np.random.Generator, lr: float | None = None, name: str = "A") -> list[tuple]:
    """Variational training on the successful samples only."""
    pos = np.flatnonzero(table.r > 0.5)
    if pos.size == 0:
        raise BiAdaptError("degenerate-dataset", "no successful samples to train the proposal network")
    opt = Adam(net, lr=cfg.lr if lr is None else lr)
    curve = []
    for step in range(steps):
        idx = rng.choice(pos, cfg.batch)
        eta = rng.standard_normal((cfg.batch, net.latent))
        opt.zero_grad()
        loss, _, _ = net.loss(table.batch(idx), eta)
        opt.step()
        curve.append((name, step, loss))
    return curve


def train_m2(module: PerceptionModule, samples: list[InteractionSample], seed: int,
             steps: tuple[int, int] | None = None) -> list[tuple]:
    """Train C2 (balanced minibatches) and A2 (positives only); returns the loss curve rows."""
    cfg = module.config
    table = samples if isinstance(samples, SampleTable) else SampleTable(samples, cfg.k_points)
    if not np.any(table.r > 0.5):
        raise BiAdaptError("degenerate-dataset", "no successful samples")
    sc, sa = steps or (cfg.steps_c2, cfg.steps_a2)
    curve = train_scorer(module.m2.scorer, table, sc, cfg, rng_for(seed, "train", "C2"), name="C2")
    curve += train_proposal(module.m2.proposal, table, sa, cfg, rng_for(seed, "train", "A2"), name="A2")
    return curve


def sample_partner_points(inp: SceneInput, n: int, rng: np.random.Generator) -> np.ndarray:
    return inp.points[rng.choice(len(inp.points), n, replace=len(inp.points) < n)]


def collaboration_targets(module: PerceptionModule, table: SampleTable, seed: int) -> np.ndarray:
    """C1 soft target per sample: mean of the top-K C2 scores over A2-completed partner actions.

    For each ``(scene, u1)``, ``c1_partners`` second contacts are drawn on the
    observation, each completed with one A2 orientation; the C2 scores are
    ranked and the best ``c1_top_k`` averaged.
    """
    cfg = module.config
    rng = rng_for(seed, "c1-targets")
    A2, C2 = module.m2.proposal, module.m2.scorer
    n, m = len(table), cfg.c1_partners
    out = np.empty(n)
    chunk = max(1, 256 // m)
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        b = table.batch(idx).repeat(m)
        contacts = b.contacts.copy()
        normals = b.normals.copy()
        for j, i in enumerate(idx):
            inp = table.inputs[table.scene_index[i]]
            pts = sample_partner_points(inp, m, rng)
            contacts[j * m:(j + 1) * m, 1] = pts
            normals[j * m:(j + 1) * m, 1] = [inp.normal_at(p) for p in pts]
        b = CondBatch(b.clouds, b.centroids, b.scene_index, contacts, normals, b.rotations)
        eta = rng.standard_normal((len(b), A2.latent))
        R2 = A2.sample(b, eta)
        rot = b.rotations.copy()
        rot[:, 1] = R2
        s = C2.predict(b.with_rotations(rot)).reshape(len(idx), m)
        top = -np.sort(-s, axis=1)[:, :min(cfg.c1_top_k, m)]
        out[idx] = top.mean(axis=1)
    return out


def train_m1(module: PerceptionModule, samples: list[InteractionSample], seed: int,
             steps: tuple[int, int] | None = None) -> list[tuple]:
    """Train C1 against collaboration targets from the frozen M2, and A1 on positives."""
    cfg = module.config
    table = samples if isinstance(samples, SampleTable) else SampleTable(samples, cfg.k_points)
    if not np.any(table.r > 0.5):
        raise BiAdaptError("degenerate-dataset", "no successful samples")
    sc, sa = steps or (cfg.steps_c1, cfg.steps_a1)
    targets = collaboration_targets(module, table, seed)
    curve = train_scorer(module.m1.scorer, table, sc, cfg, rng_for(seed, "train", "C1"), targets=targets,
                         balance=False, name="C1")
    curve += train_proposal(module.m1.proposal, table, sa, cfg, rng_for(seed, "train", "A1"), name="A1")
    return curve


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Proposal2:
    u1: GripperAction
    u2: GripperAction
    score: float
    candidate: int
    c1_score: float


def propose(module: PerceptionModule, scene: RenderedScene, candidates, n_orient: int | None = None,
            seed: int = 0) -> Proposal2:
    """Best action pair over contact-pair candidates.

    Per candidate: ``n_orient`` A1 samples scored by C1 (keep the argmax), then
    ``n_orient`` A2 samples conditioned on that first action, scored by C2. The
    winner maximises the C2 score; ties go to the lowest candidate index and
    orientation sample. Ranking uses logits, since saturated sigmoids tie. Latent draws are shared by all candidates, so the
    result is a pure function of (weights, scene, candidates, seed).
    """
    if len(candidates) == 0:
        raise BiAdaptError("no-candidates", "nothing to propose from")
    cfg = module.config
    n = n_orient or cfg.n_orient
    A1, C1, A2, C2 = module.m1.proposal, module.m1.scorer, module.m2.proposal, module.m2.scorer
    rng = rng_for(seed, "propose")
    eta1 = rng.standard_normal((n, A1.latent))
    eta2 = rng.standard_normal((n, A2.latent))
    inp = scene_input(scene, cfg.k_points)
    C = len(candidates)
    contacts = np.array([[c.p1, c.p2] for c in candidates], dtype=np.float64)
    for c in contacts:
        inp.check_contact(c[0])
        inp.check_contact(c[1])
    base = make_batch([inp], np.zeros(C, dtype=np.int64), contacts, np.zeros((C, 0, 3, 3))).repeat(n)
    R1 = A1.sample(base, np.tile(eta1, (C, 1)))
    s1 = C1.logits(base.with_rotations(R1[:, None]))[0].reshape(C, n)
    best1 = np.argmax(s1, axis=1)
    R1_best = R1.reshape(C, n, 3, 3)[np.arange(C), best1]
    rot = np.zeros((C * n, 2, 3, 3))
    rot[:, 0] = np.repeat(R1_best, n, axis=0)
    b2 = base.with_rotations(rot[:, :1])
    R2 = A2.sample(b2, np.tile(eta2, (C, 1)))
    rot[:, 1] = R2
    s2 = C2.logits(base.with_rotations(rot))[0].reshape(C, n)
    best2 = np.argmax(s2, axis=1)
    per_cand = s2[np.arange(C), best2]
    w = int(np.argmax(per_cand))
    R2w = R2.reshape(C, n, 3, 3)[w, best2[w]]
    u1 = GripperAction(contacts[w, 0], R1_best[w])
    u2 = GripperAction(contacts[w, 1], R2w)
    return Proposal2(u1, u2, float(sigmoid(per_cand[w])), w, float(sigmoid(s1[w, best1[w]])))


def score_pairs(module: PerceptionModule, scene: RenderedScene, contacts: np.ndarray, seed: int) -> np.ndarray:
    """C2 score of each contact pair completed with one A1 and one A2 sample (candidate pre-ranking)."""
    cfg = module.config
    A1, A2, C2 = module.m1.proposal, module.m2.proposal, module.m2.scorer
    rng = rng_for(seed, "score-pairs")
    inp = scene_input(scene, cfg.k_points)
    n = len(contacts)
    b = make_batch([inp], np.zeros(n, dtype=np.int64), contacts, np.zeros((n, 0, 3, 3)))
    R1 = A1.sample(b, rng.standard_normal((n, A1.latent)))
    R2 = A2.sample(b.with_rotations(R1[:, None]), rng.standard_normal((n, A2.latent)))
    return C2.predict(b.with_rotations(np.stack([R1, R2], axis=1)))


def scorer_accuracy(net: Scorer, table: SampleTable, balanced: bool = True) -> float:
    """(Balanced) accuracy of ``net`` thresholded at 0.5 on the table's outcomes."""
    p = np.concatenate([net.predict(table.batch(np.arange(i, min(i + 256, len(table)))))
                        for i in range(0, len(table), 256)])
    pred = p > 0.5
    truth = table.r > 0.5
    if not balanced:
        return float(np.mean(pred == truth))
    accs = [np.mean(pred[truth == c] == c) for c in (True, False) if np.any(truth == c)]
    return float(np.mean(accs))


__all__ = [
    "PerceptionConfig", "InteractionSample", "SceneInput", "scene_input", "make_batch", "SampleTable",
    "GripperModule", "PerceptionModule", "condition_features", "train_m2", "train_m1", "train_scorer",
    "train_proposal", "collaboration_targets", "propose", "Proposal2", "score_pairs", "scorer_accuracy",
    "sigmoid", "replace",
]
