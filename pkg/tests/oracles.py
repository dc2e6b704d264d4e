"""Independent oracles shared by the module tests and the acceptance suite.

The simulator cases use two hand-built objects with round dimensions so every
expected number below can be checked by hand from the documented pull model:
``dq = clamp(sum J(p).f / k)``, ``base = |sum f| / (mu m g / 0.05)`` and
``tilt = |tau_xy| / (m g r / 0.35)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from biadapt.errors import BiAdaptError
from biadapt.features import ContactPairCandidate
from biadapt.geometry import gripper_orientation
from biadapt.perception import InteractionSample
from biadapt.world import GripperAction, JointSpec, ObjectSpec, Part, TaskSpec, generate_object, make_scene
from biadapt.world.objects import PRISMATIC, REVOLUTE

ACCEPTANCE: dict = {}  # criterion number -> (passed, detail), printed by conftest at the end of the run

G = 9.81
EYE = np.eye(3)


def _part(shape, dims, translation, mass):
    return Part(shape, dims, EYE, translation, mass, canon_origin=np.zeros(3), canon_axes=EYE,
                canon_scale=np.ones(3))


def hinge_box(q=0.0, m0=8.0, mu=0.3):
    """0.2 m cube-ish base (height 0.1), 0.02 m lid hinged at x = -0.1, k = 10 N m/rad."""
    base = _part("box", [0.2, 0.2, 0.1], [0.0, 0.0, 0.05], m0)
    lid = _part("box", [0.2, 0.2, 0.02], [0.0, 0.0, 0.11], 0.5)
    joint = JointSpec(REVOLUTE, [0.0, -1.0, 0.0], [-0.1, 0.0, 0.1], (0.0, 1.6), q, 10.0)
    return ObjectSpec("box_lid", (base, lid), joint, EYE, np.zeros(3), mu)


def bottle(q=0.0, k=100.0):
    """Cylinder body r 0.04 h 0.16, cap r 0.03 h 0.03 sliding along +z, k = 100 N/m."""
    body = _part("cylinder", [0.04, 0.16], [0.0, 0.0, 0.08], 7.0)
    cap = _part("cylinder", [0.03, 0.03], [0.0, 0.0, 0.175], 0.1)
    joint = JointSpec(PRISMATIC, [0.0, 0.0, 1.0], [0.0, 0.0, 0.16], (0.0, 0.12), q, k)
    return ObjectSpec("bottle_cap", (body, cap), joint, EYE, np.zeros(3), 0.2)


def kb(m, mu):
    return mu * m * G / 0.05


def kt(m, r):
    return m * G * r / 0.35


def act(p, approach):
    return GripperAction(np.array(p, dtype=float), gripper_orientation(np.array(approach, dtype=float)))


C30, S30 = math.cos(math.radians(30)), math.sin(math.radians(30))
C45 = math.cos(math.radians(45))
C50, S50 = math.cos(math.radians(50)), math.sin(math.radians(50))
HALF_PI = math.pi / 2
OFF = [0.3, 0.0, 0.3]  # far from every surface

KB_H, KT_H = kb(8.5, 0.3), kt(8.5, 0.1)
KB_P, KT_P = kb(7.1, 0.2), kt(7.1, 0.04)


@dataclass
class SimCase:
    name: str
    obj: ObjectSpec
    u1: GripperAction
    u2: GripperAction
    task: str
    delta_q: float
    base: float
    tilt: float
    valid: tuple
    success: bool


def sim_cases() -> list[SimCase]:
    down, up = [0.0, 0.0, -1.0], [0.0, 0.0, 1.0]
    h0 = hinge_box()
    hv = hinge_box(q=HALF_PI)
    cases = [
        # lid top pulled up by both grippers: J.f = 10 (x + 0.1) each
        SimCase("lift-lid-far", h0, act([0.05, 0.05, 0.12], down), act([0.05, -0.05, 0.12], down), "Unfolding",
                0.3, 20 / KB_H, 1.0 / KT_H, (True, True), True),
        SimCase("lift-lid-near-hinge", h0, act([-0.05, 0.05, 0.12], down), act([-0.05, -0.05, 0.12], down),
                "Opening", 0.1, 20 / KB_H, 1.0 / KT_H, (True, True), False),
        SimCase("lid-plus-base-side", h0, act([0.08, 0.0, 0.12], down), act([0.1, 0.0, 0.05], [-1, 0, 0]),
                "Unfolding", 0.18, math.hypot(10, 10) / KB_H, 0.3 / KT_H, (True, True), True),
        SimCase("same-direction-base", h0, act([0.1, 0.05, 0.05], [-1, 0, 0]), act([0.1, -0.05, 0.05], [-1, 0, 0]),
                "Opening", 0.0, 20 / KB_H, 1.0 / KT_H, (True, True), False),
        SimCase("both-off-surface", h0, act(OFF, down), act(OFF, down), "Unfolding", 0.0, 0.0, 0.0,
                (False, False), False),
        SimCase("second-outside-cone", h0, act([0.05, 0.05, 0.12], down), act([0.05, -0.05, 0.12], [1, 0, 0]),
                "Unfolding", 0.15, 10 / KB_H, math.hypot(0.5, 0.5) / KT_H, (True, False), False),
        SimCase("closing-wrong-way", h0, act([0.05, 0.05, 0.12], down), act([0.05, -0.05, 0.12], down), "Closing",
                0.3, 20 / KB_H, 1.0 / KT_H, (True, True), False),
        # lid edge pulled down and out at q = 0: the joint is already at its lower limit
        SimCase("closing-clamped", h0, act([0.1, 0.05, 0.11], [-C50, 0, S50]), act([0.1, -0.05, 0.11], [-C50, 0, S50]),
                "Closing", 0.0, 20 / KB_H, 2 * (0.11 * 10 * C50 + 0.1 * 10 * S50) / KT_H, (True, True), False),
        # upright lid (q = pi/2): inner face at x = -0.1, J = (-0.15, 0, 0) at z = 0.25
        SimCase("closing-upright-lid", hv, act([-0.1, 0.05, 0.25], [-1, 0, 0]), act([-0.1, -0.05, 0.25], [-1, 0, 0]),
                "Closing", -0.3, 20 / KB_H, 5.0 / KT_H, (True, True), True),
        SimCase("opening-upper-limit", hv, act([-0.12, 0.05, 0.25], [1, 0, 0]), act([-0.12, -0.05, 0.25], [1, 0, 0]),
                "Opening", 1.6 - HALF_PI, 20 / KB_H, 5.0 / KT_H, (True, True), False),
        SimCase("closing-tips-light-base", hinge_box(q=HALF_PI, m0=2.0, mu=1.0), act([-0.1, 0.05, 0.25], [-1, 0, 0]),
                act([-0.1, -0.05, 0.25], [-1, 0, 0]), "Closing", -0.3, 20 / kb(2.5, 1.0), 5.0 / kt(2.5, 0.1),
                (True, True), False),
        SimCase("slides-low-friction", hinge_box(mu=0.1), act([0.05, 0.05, 0.12], down),
                act([0.05, -0.05, 0.12], down), "Unfolding", 0.3, 20 / kb(8.5, 0.1), 1.0 / KT_H, (True, True), False),
        # bottle: cap side grips 30 degrees below horizontal, each lifts 10 sin 30 = 5 N along the axis
        SimCase("uncap-two-sides", bottle(), act([0.03, 0, 0.175], [-C30, 0, -S30]),
                act([-0.03, 0, 0.175], [C30, 0, -S30]), "Uncapping", 0.1, 10 / KB_P, 0.0, (True, True), True),
        SimCase("uncap-one-per-part", bottle(k=10 / 0.06), act([0.0, 0.0, 0.19], down), act([0.0, 0.0, 0.0], up),
                "Uncapping", 0.06, 0.0, 0.0, (True, True), True),
        SimCase("same-direction-cap", bottle(), act([0.03, 0, 0.17], [-1, 0, 0]), act([0.03, 0, 0.18], [-1, 0, 0]),
                "Uncapping", 0.0, 20 / KB_P, 3.5 / KT_P, (True, True), False),
        SimCase("both-invalid-bottle", bottle(), act(OFF, down), act(OFF, [1, 0, 0]), "Uncapping", 0.0, 0.0, 0.0,
                (False, False), False),
        SimCase("cap-down", bottle(q=0.1), act([0.03, 0, 0.275], [-C30, 0, S30]),
                act([-0.03, 0, 0.275], [C30, 0, S30]), "Capping", -0.1, 10 / KB_P, 0.0, (True, True), True),
        SimCase("cap-down-clamped", bottle(q=0.02), act([0.03, 0, 0.195], [-C30, 0, S30]),
                act([-0.03, 0, 0.195], [C30, 0, S30]), "Capping", -0.02, 10 / KB_P, 0.0, (True, True), False),
        SimCase("uncap-upper-limit", bottle(q=0.1), act([0.03, 0, 0.275], [-C30, 0, -S30]),
                act([-0.03, 0, 0.275], [C30, 0, -S30]), "Uncapping", 0.02, 10 / KB_P, 0.0, (True, True), False),
        # cap lifted, body pulled down by an equal and opposite force: no net force
        SimCase("cap-up-body-down", bottle(), act([0.03, 0, 0.175], [-C45, 0, -C45]),
                act([-0.04, 0, 0.08], [C45, 0, C45]), "Uncapping", 10 * C45 / 100, 0.0,
                abs(10 * C45 * (0.175 - 0.03) - 10 * C45 * (0.08 + 0.04)) / KT_P, (True, True), True),
    ]
    return cases


def check_sim_case(case: SimCase, tol: float = 1e-12) -> list[str]:
    """Mismatches between ``execute`` and the hand-computed expectation (empty when it matches)."""
    from biadapt.world import execute

    out = execute(case.obj, case.u1, case.u2, TaskSpec(case.task))
    bad = []
    for name, got, want in (("delta_q", out.delta_q, case.delta_q), ("base", out.base_displacement, case.base),
                            ("tilt", out.tilt, case.tilt)):
        if abs(got - want) > tol:
            bad.append(f"{case.name}: {name} {got!r} != {want!r}")
    if tuple(out.grasp_valid) != case.valid:
        bad.append(f"{case.name}: grasp {out.grasp_valid} != {case.valid}")
    if out.success != case.success:
        bad.append(f"{case.name}: success {out.success} != {case.success}")
    return bad


# ---------------------------------------------------------------------------
# Anti-parallel world: success iff the approach axes are anti-parallel within
# 30 degrees and gripper 2 approaches from below (so only some u1 have partners)
# ---------------------------------------------------------------------------

def _unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def _perturb(a, angle, rng):
    t = _unit(rng)
    t -= (t @ a) * a
    t /= np.linalg.norm(t)
    return math.cos(angle) * a + math.sin(angle) * t


def anti_success(R1, R2) -> int:
    a1, a2 = -R1[:, 2], -R2[:, 2]
    return int(math.degrees(math.acos(float(np.clip(-a1 @ a2, -1, 1)))) < 30 and a2[2] > 0)


def anti_parallel(a1, a2, deg=30.0) -> bool:
    return math.degrees(math.acos(float(np.clip(-a1 @ a2, -1, 1)))) < deg


class AntiWorld:
    def __init__(self, n_scenes=8):
        self.scenes = [make_scene(generate_object("box_lid", s), TaskSpec("Opening"), s) for s in range(n_scenes)]

    def samples(self, n, rng):
        out = []
        for _ in range(n):
            sc = self.scenes[rng.integers(len(self.scenes))]
            pts = sc.observation.points
            p1, p2 = pts[rng.integers(len(pts))], pts[rng.integers(len(pts))]
            a1 = _unit(rng)
            a2 = _perturb(-a1, rng.uniform(0, math.radians(60)), rng) if rng.random() < 0.5 else _unit(rng)
            R1 = gripper_orientation(a1, rng.uniform(0, 2 * math.pi))
            R2 = gripper_orientation(a2, rng.uniform(0, 2 * math.pi))
            out.append(InteractionSample(sc, p1, p2, R1, R2, anti_success(R1, R2), "Opening"))
        return out

    def ranking_probe(self, rng):
        """A contact with one u1 that admits a partner (a1_z < 0.2) and one that hardly does (a1_z > 0.8)."""
        sc = self.scenes[rng.integers(len(self.scenes))]
        pts = sc.observation.points
        p = pts[rng.integers(len(pts))]
        good = _unit(rng)
        while good[2] >= 0.2:
            good = _unit(rng)
        bad = _unit(rng)
        while bad[2] <= 0.8:
            bad = _unit(rng)
        return sc, p, gripper_orientation(good, rng.uniform(0, 6)), gripper_orientation(bad, rng.uniform(0, 6))

    def candidates(self, i, n=8):
        sc = self.scenes[i % len(self.scenes)]
        pts = sc.observation.points
        r = np.random.default_rng(100 + i)
        return sc, [ContactPairCandidate(pts[r.integers(len(pts))], pts[r.integers(len(pts))], (0, 0), (0, 0),
                                         1.0, 1.0, f"c{j}") for j in range(n)]


def a2_heldout_geodesic(net, table):
    """Mean geodesic reconstruction error of a proposal network on a table, latent at the prior mean."""
    b = table.batch(np.arange(len(table)))
    return net.loss(b, np.zeros((len(table), net.latent)), backward=False)[1]


def anti_world_experiment(n_train=2000, n_test=500, steps=(2000, 1000, 1000, 1000), n_probes=200, n_scenes=100,
                          seed=0, world=None):
    """Train a perception module on the anti-parallel world and measure what it learned."""
    from biadapt.perception import (
        PerceptionConfig, PerceptionModule, SampleTable, make_batch, propose, scene_input, scorer_accuracy,
        train_m1, train_m2,
    )

    w = world or AntiWorld()
    rng = np.random.default_rng(seed)
    cfg = PerceptionConfig(steps_c2=steps[0], steps_a2=steps[1], steps_c1=steps[2], steps_a1=steps[3])
    train = SampleTable(w.samples(n_train, rng), cfg.k_points)
    test_samples = w.samples(n_test, rng)
    test = SampleTable(test_samples, cfg.k_points)
    test_pos = SampleTable([s for s in test_samples if s.r == 1], cfg.k_points)
    m = PerceptionModule.create(seed, cfg)
    a2_initial = a2_heldout_geodesic(m.m2.proposal, test_pos)
    curve = train_m2(m, train, seed + 1)
    curve += train_m1(m, train, seed + 1)
    ranked = 0
    for _ in range(n_probes):
        sc, p, good, bad = w.ranking_probe(rng)
        b = make_batch([scene_input(sc, cfg.k_points)], [0, 0], np.array([[p], [p]]), np.array([good, bad])[:, None])
        s = m.m1.scorer.predict(b)
        ranked += s[0] > s[1]
    anti = 0
    for i in range(n_scenes):
        sc, cands = w.candidates(i)
        pr = propose(m, sc, cands, seed=i)
        anti += anti_parallel(pr.u1.approach, pr.u2.approach)
    return {
        "module": m,
        "curve": curve,
        "c2_accuracy": scorer_accuracy(m.m2.scorer, test, balanced=False),
        "c1_ranking": ranked / n_probes,
        "propose_anti": anti / n_scenes,
        "a2_ratio": a2_heldout_geodesic(m.m2.proposal, test_pos) / a2_initial,
    }


# ---------------------------------------------------------------------------
# Correspondence: shifted-camera re-projection and cross-category part labels
# ---------------------------------------------------------------------------

def _task_for(category):
    from biadapt.world import CATEGORIES, TASK_JOINT, TASKS

    return next(t for t in TASKS if TASK_JOINT[t] == CATEGORIES[category])


def shifted_camera_errors(n_probes=500, n_scenes=25, shift=(0.03, 0.01)):
    """Pixel error of ``match_point`` against the re-projected surface point for visible probes."""
    from biadapt.features import extract_field, match_point
    from biadapt.geometry import CameraModel, project
    from biadapt.world import CATEGORIES, render

    cats = list(CATEGORIES)
    rng = np.random.default_rng(0)
    per = -(-n_probes // n_scenes)
    errors = []
    s = 0
    while len(errors) < n_probes:
        cat = cats[s % len(cats)]
        sc = make_scene(generate_object(cat, s), TaskSpec(_task_for(cat)), s)
        c = sc.camera
        offset = c.rotation[:, 0] * shift[0] + c.rotation[:, 1] * shift[1]
        cam2 = CameraModel(c.fx, c.fy, c.cx, c.cy, c.width, c.height, c.rotation, c.translation + offset)
        sc2 = render(sc.obj, cam2, seed=s)
        f1, f2 = extract_field(sc), extract_field(sc2)
        pix = f1.valid_pixels
        taken = 0
        while taken < per and len(errors) < n_probes:
            u, v = pix[rng.integers(len(pix))]
            try:
                uu, vv, d = project(sc.point_map[v, u], cam2)
            except BiAdaptError:  # left the frame
                continue
            iu, iv = int(round(uu)), int(round(vv))
            # the oracle only exists when the same surface point stays visible
            if abs(sc2.depth[iv, iu] - d) > 0.005:
                continue
            (mu, mv), _ = match_point(f1, (u, v), f2)
            errors.append(math.hypot(mu - uu, mv - vv))
            taken += 1
        s += 1
    return np.array(errors)


def cross_category_agreement(n_probes=200, src_cat="bottle_cap", tgt_cat="jar", n_pairs=20):
    """Fraction of probes whose matched pixel carries the source pixel's part label."""
    from biadapt.features import extract_field, match_point

    rng = np.random.default_rng(1)
    task = TaskSpec(_task_for(src_cat))
    hits, total = 0, 0
    per = n_probes // n_pairs
    for i in range(n_pairs):
        src = make_scene(generate_object(src_cat, i), task, i)
        tgt = make_scene(generate_object(tgt_cat, 100 + i), task, 100 + i)
        fs, ft = extract_field(src), extract_field(tgt)
        pix = fs.valid_pixels
        for _ in range(per):
            u, v = pix[rng.integers(len(pix))]
            (mu, mv), _ = match_point(fs, (u, v), ft)
            hits += int(src.labels[v, u] == tgt.labels[mv, mu])
            total += 1
    return hits / total


TRAIN_TO_NOVEL = (("laptop", "scissors"), ("box_lid", "scissors"), ("bottle_cap", "jar"), ("pen_cap", "jar"))


def train_to_novel_agreement(n_probes=200, n_pairs=5):
    """Part-label agreement pooled over every (training, novel) category pair sharing a joint kind."""
    per = n_probes // len(TRAIN_TO_NOVEL)
    return float(np.mean([cross_category_agreement(per, s, t, n_pairs) for s, t in TRAIN_TO_NOVEL]))


# ---------------------------------------------------------------------------
# Gradient suite: every network plus the three losses at a frozen random batch
# ---------------------------------------------------------------------------

def random_batch(seed=0, S=2, k=12, B=3, G=2):
    from biadapt.geometry import random_rotation
    from biadapt.nn import CondBatch

    rng = np.random.default_rng(seed)
    normals = rng.normal(size=(B, G, 3))
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    return CondBatch(rng.normal(size=(S, k, 6)), rng.normal(size=(S, 3)) * 0.1, rng.integers(0, S, B),
                     rng.normal(size=(B, G, 3)) * 0.1, normals,
                     np.stack([[random_rotation(rng) for _ in range(G)] for _ in range(B)]))


def gradient_objectives(seed=0):
    """``name -> (objective(backward), params)`` for every shipped network and loss."""
    from biadapt.geometry import random_rotation
    from biadapt.nn import Param, PointEncoder, Proposal, Scorer, bce_with_logits, geodesic_loss, kl_loss, rotation6d

    rng = np.random.default_rng(seed)
    b = random_batch(seed)
    out = {}
    targets = rng.uniform(size=len(b))
    for name, G in (("C1", 1), ("C2", 2)):
        net = Scorer(G, np.random.default_rng(seed + G))
        out[name] = ((lambda bw, net=net: net.loss(b, targets, backward=bw)), net)
    for name, G in (("A1", 1), ("A2", 2)):
        net = Proposal(G, np.random.default_rng(seed + 10 + G))
        eta = rng.normal(size=(len(b), net.latent))
        out[name] = ((lambda bw, net=net, eta=eta: net.loss(b, eta, backward=bw)[0]), net)
    pe = PointEncoder(np.random.default_rng(seed + 20))
    X, W = rng.normal(size=(10, 6)), rng.normal(size=(10, 128))

    def point(bw):
        y, c = pe.forward_points(X)
        if bw:
            pe.backward_points(c, W)
        return float((y * W).sum())

    out["PE"] = (point, pe)

    z = Param("z", rng.normal(size=7) * 2)
    r = rng.integers(0, 2, 7).astype(float)

    def bce(bw):
        loss, g = bce_with_logits(z.value, r)
        if bw:
            z.grad += g
        return loss

    out["bce"] = (bce, [z])
    mu, lv = Param("mu", rng.normal(size=(4, 5))), Param("lv", rng.normal(size=(4, 5)) * 0.5)

    def kl(bw):
        loss, gm, gl = kl_loss(mu.value, lv.value)
        if bw:
            mu.grad += gm
            lv.grad += gl
        return loss

    out["kl"] = (kl, [mu, lv])
    # 100 pairs at distances inside (0.1, 3.0)
    targets_R, starts = [], []
    while len(targets_R) < 100:
        R, S0 = random_rotation(rng), random_rotation(rng)
        d = math.acos(np.clip((np.trace(R.T @ S0) - 1) / 2, -1, 1))
        if 0.1 < d < 3.0:
            targets_R.append(R)
            starts.append(rotation6d.encode(S0) * rng.uniform(0.5, 2.0))
    Rt = np.array(targets_R)
    x6 = Param("x6", np.array(starts))

    def geo(bw):
        R, cache = rotation6d.decode(x6.value)
        loss, gR = geodesic_loss(R, Rt)
        if bw:
            x6.grad += rotation6d.decode_backward(cache, gR)
        return loss

    out["geodesic"] = (geo, [x6])
    return out


def gradient_suite(max_entries=None, names=None):
    from biadapt.nn import check_gradients

    objs = gradient_objectives()
    return {n: check_gradients(f, p, eps=1e-5, max_entries=max_entries)
            for n, (f, p) in objs.items() if names is None or n in names}


def corrupted_gradient_error():
    """Negative control: the ELU backward rule with its derivative dropped."""
    from biadapt.nn import check_gradients, layers

    orig = layers.ELU.backward
    layers.ELU.backward = staticmethod(lambda cache, gy: gy)
    try:
        f, p = gradient_objectives()["C2"]
        return check_gradients(f, p, eps=1e-5, max_entries=256)
    finally:
        layers.ELU.backward = orig


# ---------------------------------------------------------------------------
# A pipeline configuration small enough to run end to end in seconds
# ---------------------------------------------------------------------------

def tiny_config_text(out, trials=3, budgets="0, 2"):
    return f"""# tiny end-to-end run
out = {out}
tasks = Uncapping
support.episodes = 20
support.instances = 3
budgets = {budgets}
eval.seeds = 0
eval.trials = {trials}
eval.novel_instances = 4
eval.overlay_scenes = 1
perception.k_points = 64
perception.steps_c2 = 6
perception.steps_a2 = 5
perception.steps_c1 = 4
perception.steps_a1 = 3
perception.n_orient = 4
perception.c1_partners = 4
perception.c1_top_k = 2
transfer.num_sources = 3
adapt.update_every = 1
adapt.finetune_steps = 2
adapt.sampled_pairs = 8
adapt.n_orient = 4
"""


def pipeline_trends(rows, budgets, tasks, split="novel-unseen"):
    """Seed-mean trend checks on matrix rows (dicts as parsed from rows.csv)."""
    mean = {}
    for r in rows:
        if r["split"] == split:
            mean.setdefault((r["method"], r["budget"], r["task"]), []).append(r["rate"])
    m = {k: float(np.mean(v)) for k, v in mean.items()}
    top = budgets[-1]
    a = [t for t in tasks if m[("ours", top, t)] >= m[("ours_wo_FA", 0, t)] + 0.05 - 1e-9]
    b = {bud: [t for t in tasks if m[("ours", bud, t)] >= m[("ours_wo_AT", bud, t)]] for bud in budgets}
    c = [t for t in tasks if m[("ours", top, t)] >= m[("independent", 0, t)]]
    d = [t for t in tasks if m[("ours", top, t)] >= m[("ours", 0, t)]]
    return {
        "a": (len(a) >= 3, f"ours({top}) >= ours_wo_FA(0) + 5 pp on {len(a)}/{len(tasks)}"),
        "b": (all(len(v) >= 3 for v in b.values()),
              "ours >= ours_wo_AT per budget " + ", ".join(f"{k}:{len(v)}/{len(tasks)}" for k, v in b.items())),
        "c": (len(c) == len(tasks), f"ours({top}) >= independent on {len(c)}/{len(tasks)}"),
        "d": (len(d) == len(tasks), f"rate({top}) >= rate(0) on {len(d)}/{len(tasks)}"),
        "means": m,
    }
