import re
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from biadapt.binfmt import encode_blocks
from biadapt.errors import ConfigError, DataError
from biadapt.harness.cli import main
from biadapt.harness.config import DEFAULT_CONFIG, format_config, load_config, parse_config
from biadapt.harness.pipeline import ROW_HEADER, checkpoint_path, overlay_blocks, run_gen
from biadapt.harness.report import format_table, parse_rows, read_overlay, run_report
from biadapt.perception import PerceptionModule
from biadapt.transfer import Choice
from biadapt.world import GripperAction, TaskSpec, generate_object, make_scene
from biadapt.world.io import MAGIC, VERSION

from oracles import tiny_config_text


# --- configuration --------------------------------------------------------

def test_empty_config_is_default():
    assert parse_config("") == DEFAULT_CONFIG
    assert parse_config("# only a comment\n\n") == DEFAULT_CONFIG


def test_config_errors_name_the_line():
    with pytest.raises(ConfigError) as e:
        parse_config("seed = 1\n# note\nsead = 2\n", "x.cfg")
    assert e.value.code == "unknown-key" and "x.cfg line 3" in str(e.value)
    with pytest.raises(ConfigError) as e:
        parse_config("seed 1\n")
    assert e.value.code == "parse" and "line 1" in str(e.value)
    with pytest.raises(ConfigError) as e:
        parse_config("\neval.trials = many\n")
    assert e.value.code == "parse" and "line 2" in str(e.value)


@pytest.mark.parametrize("text", [
    "budgets = 10, 3",
    "budgets = 0, 0, 5",
    "split.train = laptop, jar",
    "split.novel = teapot",
    "eval.seen_fraction = 0.5",
    "eval.trials = 0",
    "eval.seeds = ",
    "eval.methods = ours, magic",
    "support.policy_mix = 1.5",
    "extractor_id = nope",
    "eval.novel_instances = 2",
    "task.tilt_threshold = 0",
])
def test_config_invariants(text):
    with pytest.raises(ConfigError) as e:
        parse_config(text + "\n")
    assert e.value.code == "invalid-config"


def test_format_config_round_trip(tmp_path):
    cfg = parse_config(tiny_config_text(tmp_path / "run"))
    assert parse_config(format_config(cfg)) == cfg
    assert parse_config(format_config(DEFAULT_CONFIG)) == DEFAULT_CONFIG
    assert cfg.trials == 3 and cfg.perception.k_points == 64 and cfg.adapt.num_sources == 3
    with pytest.raises(ConfigError) as e:
        load_config(tmp_path / "absent.cfg")
    assert e.value.code == "io"


# --- end-to-end on a tiny configuration -----------------------------------

@pytest.fixture(scope="module")
def run(tmp_path_factory):
    d = tmp_path_factory.mktemp("tiny")
    cfg_path = d / "tiny.cfg"
    cfg_path.write_text(tiny_config_text(d / "run"))
    codes = [main(["gen", "--config", str(cfg_path), "--quiet"]),
             main(["train", "--config", str(cfg_path), "--quiet"]),
             main(["run-matrix", "--config", str(cfg_path), "--quiet"]),
             main(["report", "--config", str(cfg_path), "--quiet"])]
    return d, cfg_path, load_config(cfg_path), codes


def test_cli_pipeline_succeeds(run):
    d, _, cfg, codes = run
    assert codes == [0, 0, 0, 0]
    for name in ("rows.csv", "efficiency.csv", "checksums.txt", "loss_curve.csv", "train_summary.csv",
                 "report/report.txt", "report/efficiency.png", "report/rates.png", "support/index.tsv"):
        assert (d / "run" / name).is_file(), name
    assert list((d / "run" / "overlays").glob("*.biaw"))
    assert (d / "run" / "report" / "overlays").is_dir()


def test_gen_rerun_is_byte_identical(run, tmp_path):
    d, _, cfg, _ = run
    again = replace(cfg, out=str(tmp_path / "again"))
    run_gen(again)
    src = d / "run" / "support"
    for f in sorted(src.rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "again" / "support" / f.relative_to(src)).read_bytes()


def test_gen_unwritable_path(run, tmp_path):
    (tmp_path / "file").write_text("x")
    with pytest.raises(DataError) as e:
        run_gen(replace(run[2], out=str(tmp_path / "file" / "sub")))
    assert e.value.code == "io"


def test_loss_curve_rows_match_steps(run):
    d, _, cfg, _ = run
    lines = (d / "run" / "loss_curve.csv").read_text().splitlines()
    assert lines[0] == "task,network,step,loss"
    counts = {}
    for line in lines[1:]:
        task, net, step, loss = line.split(",")
        counts[net] = counts.get(net, 0) + 1
        assert np.isfinite(float(loss))
    pc = cfg.perception
    assert counts == {"C2": pc.steps_c2, "A2": pc.steps_a2, "C1": pc.steps_c1, "A1": pc.steps_a1,
                      "I1C": pc.steps_c1, "I1A": pc.steps_a1, "I2C": pc.steps_c1, "I2A": pc.steps_a1}


def test_checkpoint_reload_resaves_identically(run):
    cfg = run[2]
    data = checkpoint_path(cfg, "Uncapping").read_bytes()
    assert data[:4] == b"BIAD"
    assert PerceptionModule.from_bytes(data).to_bytes() == data


def test_rows_trials_and_budget_zero(run):
    d, _, cfg, _ = run
    rows = parse_rows((d / "run" / "rows.csv").read_text())
    assert rows and all(r["trials"] == cfg.trials for r in rows)
    methods = {r["method"] for r in rows}
    assert methods == set(cfg.methods)
    assert {r["budget"] for r in rows if r["method"] == "ours"} == set(cfg.budgets)
    ours0 = [r for r in rows if r["method"] == "ours" and r["budget"] == 0]
    wo_fa = [r for r in rows if r["method"] == "ours_wo_FA"]
    assert [(r["successes"], r["seed"]) for r in ours0] == [(r["successes"], r["seed"]) for r in wo_fa]


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("seed = 1\nbogus = 2\n")
    assert main(["gen", "--config", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    good = tmp_path / "good.cfg"
    good.write_text(tiny_config_text(tmp_path / "empty"))
    assert main(["train", "--config", str(good), "--quiet"]) == 3
    assert main(["run-matrix", "--config", str(good), "--quiet"]) == 3
    assert main(["report", "--config", str(good), "--quiet"]) == 3
    assert main(["gen", "--config", str(good), "--task", "Juggling"]) == 2


def test_console_entry_point(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nope = 1\n")
    out = subprocess.run([sys.executable, "-m", "biadapt.harness.cli", "gen", "--config", str(bad)],
                         capture_output=True, text=True)
    assert out.returncode == 2 and "unknown-key" in out.stderr


# --- report ---------------------------------------------------------------

HEADER = ",".join(ROW_HEADER)


def test_table_two_decimals():
    rows = parse_rows(HEADER + "\nours,Opening,novel-unseen,50,0,2,3,0.6666666666666666\n"
                      "ours,Opening,novel-unseen,50,1,1,3,0.3333333333333333\n")
    table = format_table(rows)
    assert "50.00" in table
    for cell in re.findall(r"\d+\.\d+", table):
        assert len(cell.split(".")[1]) == 2


def test_empty_rows_give_header_only(tmp_path):
    (tmp_path / "rows.csv").write_text(HEADER + "\n")
    table = run_report(tmp_path / "rows.csv", tmp_path / "rep")
    assert len(table.splitlines()) == 1 and table.split()[:3] == ["split", "method", "budget"]
    assert (tmp_path / "rep" / "efficiency.png").is_file()


@pytest.mark.parametrize("body, line", [
    ("ours,Opening,novel-unseen,50,0,2,3\n", 2),
    ("ours,Opening,novel-unseen,50,0,2,3,0.6666666666666666\nours,Opening,novel-unseen,x,0,2,3,0.5\n", 3),
    ("magic,Opening,novel-unseen,50,0,2,3,0.6666666666666666\n", 2),
    ("ours,Opening,novel-unseen,50,0,2,3,0.5\n", 2),
])
def test_parse_errors_name_the_line(body, line):
    with pytest.raises(DataError) as e:
        parse_rows(HEADER + "\n" + body, "r.csv")
    assert e.value.code == "parse" and f"r.csv line {line}:" in str(e.value)
    with pytest.raises(DataError) as e:
        parse_rows("method,task\n")
    assert "line 1" in str(e.value)


def test_overlay_pixels_checked(tmp_path):
    scene = make_scene(generate_object("jar", 1), TaskSpec("Uncapping"), 1)
    px = scene.pixel_of(0)
    from biadapt.features import ContactPairCandidate

    cand = ContactPairCandidate(scene.observation.points[0], scene.observation.points[0], px, px, 0.9, 0.8, "r")
    ch = Choice(GripperAction(cand.p1, np.eye(3)), GripperAction(cand.p2, np.eye(3)), 0.5, "r", cand)
    b = overlay_blocks(scene, ch)
    (tmp_path / "ok.biaw").write_bytes(encode_blocks(MAGIC, VERSION, b))
    _, entries = read_overlay(tmp_path / "ok.biaw")
    assert entries == [(px[0], px[1], "gripper1", 0.9), (px[0], px[1], "gripper2", 0.8)]
    b["overlay.pixels"] = np.array([[px[0], px[1]], [scene.depth.shape[1], 0]], dtype=np.int64)
    (tmp_path / "bad.biaw").write_bytes(encode_blocks(MAGIC, VERSION, b))
    with pytest.raises(DataError) as e:
        read_overlay(tmp_path / "bad.biaw")
    assert e.value.code == "corrupt"
