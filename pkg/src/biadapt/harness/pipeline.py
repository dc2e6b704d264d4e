"""The four experiment stages: supporting set, pre-training, the method matrix and the report inputs.

Layout of an output directory::

    support/              index.tsv, provenance.json, records/*.biaw
    checkpoints/          <task>.biad (perception module), <task>.independent.biad
    loss_curve.csv        task, network, step, loss
    train_summary.csv     task, train_samples, holdout_samples, c2_balanced_accuracy
    rows.csv              method, task, split, budget, seed, successes, trials, rate
    efficiency.csv        task, budget, method, rate (mean over evaluation seeds)
    adapt_logs/           <method>-<task>-s<seed>.csv
    overlays/             <task>-s<seed>-t<trial>.biaw (scene + winning contact pixels)
    checksums.txt         sha256 of every CSV above
"""

from __future__ import annotations

import hashlib
import sys
from pathlib import Path

import numpy as np

from ..binfmt import encode_blocks, read_file, write_file
from ..errors import DataError
from ..perception import PerceptionModule, SampleTable, scorer_accuracy, train_m1, train_m2
from ..seeding import derive_seed, rng_for
from ..transfer import (
    AdaptationBudget, HeuristicAgent, IndependentAgent, IndependentModule, ModuleAgent, SceneCache, SupportSet,
    adapt, build_support_set, evaluate, novel_split, rows_to_csv, train_independent, training_instance,
)
from ..world import CATEGORIES
from ..world.io import MAGIC as WORLD_MAGIC, VERSION as WORLD_VERSION, scene_blocks
from .config import ExperimentConfig

ROW_HEADER = ("method", "task", "split", "budget", "seed", "successes", "trials", "rate")
EFFICIENCY_HEADER = ("task", "budget", "method", "rate")
LOSS_HEADER = ("task", "network", "step", "loss")
SUMMARY_HEADER = ("task", "train_samples", "holdout_samples", "c2_balanced_accuracy")


def _say(msg: str, quiet: bool) -> None:
    if not quiet:
        print(msg, file=sys.stderr, flush=True)


def support_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out) / "support"


def checkpoint_path(cfg: ExperimentConfig, task: str, independent: bool = False) -> Path:
    return Path(cfg.out) / "checkpoints" / (f"{task}.independent.biad" if independent else f"{task}.biad")


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def run_gen(cfg: ExperimentConfig, quiet: bool = False) -> tuple[SupportSet, list[str]]:
    support = build_support_set(cfg.train_categories, cfg.episodes, cfg.policy_mix, cfg.seed, cfg.tasks,
                                cfg.train_instances, cfg.heuristic_jitter, _threshold_dict(cfg))
    support.save(support_dir(cfg))
    lines = [f"positives {task}/{cat}: {pos}/{tot}" for (task, cat), (pos, tot) in support.counts().items()]
    for w in support.provenance["warnings"]:
        lines.append(f"warning {w}")
    return support, lines


def _threshold_dict(cfg: ExperimentConfig) -> dict:
    return {k: getattr(cfg.thresholds, k) for k in cfg.thresholds.__dataclass_fields__}


def load_support(cfg: ExperimentConfig) -> SupportSet:
    return SupportSet.load(support_dir(cfg))


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def holdout_split(n: int, fraction: float, seed: int, task: str) -> tuple[np.ndarray, np.ndarray]:
    perm = rng_for(seed, "holdout", task).permutation(n)
    n_ho = int(round(fraction * n))
    return np.sort(perm[n_ho:]), np.sort(perm[:n_ho])


def train_task(cfg: ExperimentConfig, support: SupportSet, task: str):
    """Pre-train the perception module (M2 then M1) and the independent baseline for ``task``."""
    samples = [r.sample() for r in support.for_task(task)]
    if not samples:
        raise DataError("degenerate-dataset", f"no supporting-set records for {task}")
    tr, ho = holdout_split(len(samples), cfg.holdout, cfg.seed, task)
    pc = cfg.perception
    table = SampleTable([samples[i] for i in tr], pc.k_points)
    seed = derive_seed(cfg.seed, "pretrain", task)
    mod = PerceptionModule.create(seed, pc, {"task": task, "support_hash": support.provenance["config_hash"]})
    curve = train_m2(mod, table, seed)
    curve += train_m1(mod, table, seed)
    acc = scorer_accuracy(mod.m2.scorer, SampleTable([samples[i] for i in ho], pc.k_points)) if len(ho) else float("nan")
    ind = IndependentModule.create(derive_seed(seed, "independent"), pc)
    curve += train_independent(ind, table, derive_seed(seed, "independent"))
    return mod, ind, curve, (len(tr), len(ho), acc)


def run_train(cfg: ExperimentConfig, quiet: bool = False) -> list[tuple]:
    support = load_support(cfg)
    loss_rows, summary = [], []
    for task in cfg.tasks:
        mod, ind, curve, (n_tr, n_ho, acc) = train_task(cfg, support, task)
        write_file(checkpoint_path(cfg, task), mod.to_bytes())
        write_file(checkpoint_path(cfg, task, True), ind.to_bytes())
        loss_rows += [(task, net, step, loss) for net, step, loss in curve]
        summary.append((task, n_tr, n_ho, acc))
    out = Path(cfg.out)
    write_file(out / "loss_curve.csv", rows_to_csv(LOSS_HEADER, loss_rows).encode("utf-8"))
    write_file(out / "train_summary.csv", rows_to_csv(SUMMARY_HEADER, summary).encode("utf-8"))
    return summary


def load_module(cfg: ExperimentConfig, task: str) -> PerceptionModule:
    p = checkpoint_path(cfg, task)
    if not p.is_file():
        raise DataError("missing-checkpoint", f"{p} not found; run train first")
    return PerceptionModule.from_bytes(read_file(p))


def load_independent(cfg: ExperimentConfig, task: str) -> IndependentModule:
    p = checkpoint_path(cfg, task, True)
    if not p.is_file():
        raise DataError("missing-checkpoint", f"{p} not found; run train first")
    return IndependentModule.from_bytes(read_file(p))


# ---------------------------------------------------------------------------
# run-matrix
# ---------------------------------------------------------------------------

def task_instances(cfg: ExperimentConfig, task: str, eval_seed: int) -> dict[str, tuple]:
    """Instance keys ``(category, object seed)`` per split for one evaluation seed."""
    kind = cfg.task_spec(task).joint_kind
    seen, unseen = [], []
    for cat in cfg.novel_categories:
        if CATEGORIES[cat] == kind:
            sp = novel_split(cat, cfg.novel_instances, derive_seed(cfg.seed, "novel", eval_seed), cfg.seen_fraction)
            seen += sp.seen
            unseen += sp.unseen
    train = [(c, training_instance(c, i, cfg.seed).seed) for c in cfg.train_categories if CATEGORIES[c] == kind
             for i in range(cfg.train_instances)]
    return {"train": tuple(train), "novel-seen": tuple(seen), "novel-unseen": tuple(unseen)}


def run_cell(cfg: ExperimentConfig, support: SupportSet, task: str, eval_seed: int, mod: PerceptionModule,
             ind: IndependentModule, quiet: bool = True):
    """All methods, budgets and splits for one (task, evaluation seed); returns rows, logs and overlays."""
    spec = cfg.task_spec(task)
    inst = task_instances(cfg, task, eval_seed)
    seen = inst["novel-seen"]
    cache = SceneCache(maxsize=4 * cfg.trials)
    ev_seed = derive_seed(cfg.seed, "evaluate", eval_seed)
    ad_seed = derive_seed(cfg.seed, "adapt", eval_seed)
    rows, logs, overlays = [], {}, []
    budgets = cfg.budgets

    def ev(agent, split, transfer_on=True, keep=0):
        # the seen pool is excluded from every split but its own
        guard = () if split == "novel-seen" else seen
        return evaluate(agent, support, inst[split], spec, cfg.trials, transfer_on, ev_seed, guard, cfg.adapt,
                        cache, keep)

    def emit(method, split, budget, res):
        rows.append((method, task, split, budget, eval_seed, res.successes, res.trials, res.rate))

    def adapted(method, candidates):
        if budgets[-1] == 0:
            return {0: mod}
        res = adapt(mod, support, AdaptationBudget(budgets[-1], seen), spec, cfg.adapt, ad_seed, candidates,
                    snapshots=budgets, cache=cache)
        logs[f"{method}-{task}-s{eval_seed}"] = res.log_csv()
        return res.snapshots

    methods = cfg.methods
    snaps = {}
    if "ours" in methods:
        snaps["ours"] = adapted("ours", "transfer")
    if "ours_wo_AT" in methods:
        snaps["ours_wo_AT"] = adapted("ours_wo_AT", "sampled")
    for split in cfg.splits:
        if not inst[split]:
            continue
        if "heuristic" in methods:
            emit("heuristic", split, 0, ev(HeuristicAgent(), split))
        if "independent" in methods:
            emit("independent", split, 0, ev(IndependentAgent(ind), split))
        base = None
        if "ours_wo_FA" in methods or ("ours" in methods and 0 in budgets):
            keep = cfg.overlay_scenes if split == "novel-unseen" and budgets[-1] == 0 else 0
            base = ev(ModuleAgent(mod), split, keep=keep)
            if "ours_wo_FA" in methods:
                emit("ours_wo_FA", split, 0, base)
        for method in ("ours", "ours_wo_AT"):
            if method not in methods:
                continue
            for b in budgets:
                if method == "ours" and b == 0:
                    res = base  # budget 0 is the module as pre-trained: the ours_wo_FA pathway
                else:
                    keep = cfg.overlay_scenes if (method == "ours" and split == "novel-unseen"
                                                   and b == budgets[-1]) else 0
                    res = ev(ModuleAgent(snaps[method][b]), split, method == "ours", keep)
                emit(method, split, b, res)
                if method == "ours" and b == budgets[-1] and split == "novel-unseen":
                    overlays = res.choices
        _say(f"  {task} seed {eval_seed} {split} done", quiet)
    return rows, logs, overlays


def overlay_blocks(scene, choice) -> dict:
    c = choice.candidate
    b = scene_blocks(scene)
    b["overlay.pixels"] = np.array([c.px1, c.px2], dtype=np.int64)
    b["overlay.roles"] = "gripper1,gripper2"
    b["overlay.similarity"] = np.array([c.similarity1, c.similarity2], dtype=np.float64)
    b["overlay.source"] = c.source_record_id
    return b


def efficiency_rows(cfg: ExperimentConfig, rows: list[tuple]) -> list[tuple]:
    split = "novel-unseen" if "novel-unseen" in cfg.splits else cfg.splits[0]
    acc: dict = {}
    for method, task, sp, budget, seed, succ, trials, rate in rows:
        if sp == split:
            acc.setdefault((task, budget, method), []).append(rate)
    order = {m: i for i, m in enumerate(("heuristic", "independent", "ours_wo_FA", "ours_wo_AT", "ours"))}
    keys = sorted(acc, key=lambda k: (cfg.tasks.index(k[0]), k[1], order[k[2]]))
    return [(t, b, m, float(np.mean(acc[(t, b, m)]))) for t, b, m in keys]


def run_matrix(cfg: ExperimentConfig, quiet: bool = False) -> tuple[list[tuple], list[tuple]]:
    support = load_support(cfg)
    out = Path(cfg.out)
    rows, logs = [], {}
    for task in cfg.tasks:
        mod, ind = load_module(cfg, task), load_independent(cfg, task)
        for i, s in enumerate(cfg.eval_seeds):
            r, lg, ov = run_cell(cfg, support, task, s, mod, ind, quiet)
            rows += r
            logs.update(lg)
            if i == 0:
                for t, (scene, ch) in enumerate(ov):
                    if ch.candidate is not None:
                        write_file(out / "overlays" / f"{task}-s{s}-t{t}.biaw",
                                   encode_blocks(WORLD_MAGIC, WORLD_VERSION, overlay_blocks(scene, ch)))
        _say(f"matrix {task} done", quiet)
    eff = efficiency_rows(cfg, rows)
    files = {"rows.csv": rows_to_csv(ROW_HEADER, rows), "efficiency.csv": rows_to_csv(EFFICIENCY_HEADER, eff)}
    for name in sorted(logs):
        files[f"adapt_logs/{name}.csv"] = logs[name]
    for name, text in files.items():
        write_file(out / name, text.encode("utf-8"))
    sums = "".join(f"{hashlib.sha256(t.encode('utf-8')).hexdigest()}  {n}\n" for n, t in files.items())
    write_file(out / "checksums.txt", sums.encode("utf-8"))
    return rows, eff
