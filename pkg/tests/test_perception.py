import numpy as np
import pytest

from biadapt.errors import BiAdaptError
from biadapt.geometry import check_rotation
from biadapt.perception import (
    InteractionSample, PerceptionConfig, PerceptionModule, SampleTable, condition_features, propose, score_pairs,
    train_m1, train_m2, train_proposal,
)
from biadapt.perception import _balanced_indices
from biadapt.seeding import rng_for

from oracles import AntiWorld, a2_heldout_geodesic, random_batch

SMALL = PerceptionConfig(k_points=128, steps_c2=30, steps_a2=30, steps_c1=20, steps_a1=20, c1_partners=8,
                         c1_top_k=3, n_orient=4)


@pytest.fixture(scope="module")
def world():
    return AntiWorld(n_scenes=3)


@pytest.fixture(scope="module")
def samples(world):
    return world.samples(120, np.random.default_rng(0))


@pytest.fixture(scope="module")
def module():
    return PerceptionModule.create(0, SMALL)


# --- inputs ---------------------------------------------------------------

def test_condition_feature_lengths(world, module):
    sc = world.scenes[0]
    p = sc.observation.points
    R = np.eye(3)
    assert condition_features(module.m1.proposal, sc, p[0], k=128).shape == (160,)
    assert condition_features(module.m2.scorer, sc, p[0], R, p[5], R, k=128).shape == (384,)
    with pytest.raises(BiAdaptError) as e:
        condition_features(module.m2.scorer, sc, p[0], R, None, R, k=128)
    assert e.value.code == "missing-input"
    with pytest.raises(BiAdaptError) as e:
        condition_features(module.m2.scorer, sc, p[0] + 1.0, R, p[5], R, k=128)
    assert e.value.code == "invalid-contact"


def test_permuting_cloud_keeps_gathered_features(module):
    b = random_batch()
    perm = np.random.default_rng(3).permutation(b.clouds.shape[1])
    moved = type(b)(b.clouds[:, perm], b.centroids, b.scene_index, b.contacts, b.normals, b.rotations)
    for net in module.networks().values():
        assert np.allclose(net.cond.forward(b)[0], net.cond.forward(moved)[0], atol=1e-12)


def test_sample_validation(world):
    sc = world.scenes[0]
    p = sc.observation.points[0]
    with pytest.raises(BiAdaptError) as e:
        InteractionSample(sc, p, p, np.eye(3), np.eye(3), 0.5, "Opening")
    assert e.value.code == "invalid-sample"
    with pytest.raises(BiAdaptError) as e:
        SampleTable([], 128)
    assert e.value.code == "degenerate-dataset"


# --- training -------------------------------------------------------------

def test_balancing_errors():
    with pytest.raises(BiAdaptError) as e:
        _balanced_indices(np.ones(5), 4, np.random.default_rng(0))
    assert e.value.code == "unbalanceable"
    idx = _balanced_indices(np.array([1.0, 0, 0, 0, 0, 0]), 8, np.random.default_rng(0))
    assert np.sum(idx == 0) == 4


def test_degenerate_training_sets(samples):
    negatives = [s for s in samples if s.r == 0]
    m = PerceptionModule.create(0, SMALL)
    with pytest.raises(BiAdaptError) as e:
        train_m2(m, negatives, 1)
    assert e.value.code == "degenerate-dataset"
    with pytest.raises(BiAdaptError) as e:
        train_m1(m, negatives, 1)
    assert e.value.code == "degenerate-dataset"
    with pytest.raises(BiAdaptError) as e:
        train_proposal(m.m2.proposal, SampleTable(negatives, 128), 5, SMALL, np.random.default_rng(0))
    assert e.value.code == "degenerate-dataset"


def test_training_deterministic_and_finite(samples):
    table = SampleTable(samples, SMALL.k_points)
    a, b = PerceptionModule.create(0, SMALL), PerceptionModule.create(0, SMALL)
    ca = train_m2(a, table, 1)
    cb = train_m2(b, table, 1)
    assert ca == cb and a.to_bytes() == b.to_bytes()
    assert len(ca) == SMALL.steps_c2 + SMALL.steps_a2
    frozen = a.copy()
    c1 = train_m1(a, table, 1)
    train_m1(frozen, table, 1)
    assert a.to_bytes() == frozen.to_bytes()
    assert all(np.isfinite(row[2]) for row in ca + c1)
    assert {row[0] for row in c1} == {"C1", "A1"}


def test_m1_retrain_leaves_m2_alone(samples):
    table = SampleTable(samples, SMALL.k_points)
    m = PerceptionModule.create(0, SMALL)
    train_m2(m, table, 1)
    before = {k: v.copy() for k, v in m.state().items() if k.startswith(("A2/", "C2/"))}
    train_m1(m, table, 2)
    after = m.state()
    assert all(np.array_equal(v, after[k]) for k, v in before.items())


def test_a2_reconstruction_improves_on_held_out():
    w = AntiWorld()
    rng = np.random.default_rng(0)
    cfg = PerceptionConfig()
    train = SampleTable(w.samples(1000, rng), cfg.k_points)
    held = SampleTable([s for s in w.samples(400, rng) if s.r == 1], cfg.k_points)
    A2 = PerceptionModule.create(0, cfg).m2.proposal
    initial = a2_heldout_geodesic(A2, held)
    train_proposal(A2, train, cfg.steps_a2, cfg, rng_for(1, "train", "A2"))
    assert a2_heldout_geodesic(A2, held) < 0.25 * initial


def test_checkpoint_round_trip(module):
    data = module.to_bytes()
    assert PerceptionModule.from_bytes(data).to_bytes() == data
    assert module.copy().config == SMALL


# --- inference ------------------------------------------------------------

def test_propose_single_candidate(world, module):
    sc, cands = world.candidates(0, n=1)
    pr = propose(module, sc, cands, n_orient=1, seed=3)
    assert pr.candidate == 0
    assert np.array_equal(pr.u1.contact, cands[0].p1) and np.array_equal(pr.u2.contact, cands[0].p2)


def test_propose_properties(world, module):
    sc, cands = world.candidates(1)
    pr = propose(module, sc, cands, seed=7)
    assert 0.0 < pr.score < 1.0 and 0.0 < pr.c1_score < 1.0
    check_rotation(pr.u1.orientation)
    check_rotation(pr.u2.orientation)
    again = propose(module, sc, cands, seed=7)
    assert again.candidate == pr.candidate and again.score == pr.score
    assert np.array_equal(again.u2.orientation, pr.u2.orientation)
    doubled = propose(module, sc, cands + cands, seed=7)
    assert doubled.candidate == pr.candidate and doubled.score == pr.score
    with pytest.raises(BiAdaptError) as e:
        propose(module, sc, [], seed=7)
    assert e.value.code == "no-candidates"


def test_score_pairs_in_unit_interval(world, module):
    sc = world.scenes[2]
    pts = sc.observation.points
    s = score_pairs(module, sc, np.stack([pts[:6], pts[6:12]], axis=1), seed=0)
    assert s.shape == (6,) and np.all((s > 0) & (s < 1))
    assert np.array_equal(s, score_pairs(module, sc, np.stack([pts[:6], pts[6:12]], axis=1), seed=0))
