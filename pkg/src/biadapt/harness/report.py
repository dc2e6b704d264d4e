"""Text tables, overlay dumps and matplotlib figures from the matrix outputs."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from ..binfmt import decode_blocks, read_file, write_file
from ..errors import DataError
from ..world.io import MAGIC as WORLD_MAGIC, VERSION as WORLD_VERSION, scene_from_blocks
from .pipeline import ROW_HEADER

METHOD_ORDER = ("heuristic", "independent", "ours_wo_FA", "ours_wo_AT", "ours")
SPLIT_ORDER = ("train", "novel-seen", "novel-unseen")


def parse_rows(text: str, source: str = "rows.csv") -> list[dict]:
    """Parse and validate a rows CSV; malformed input raises a ``parse`` error naming the line."""
    lines = text.splitlines()
    if not lines:
        raise DataError("parse", f"{source} line 1: missing header")
    if tuple(lines[0].split(",")) != ROW_HEADER:
        raise DataError("parse", f"{source} line 1: expected header {','.join(ROW_HEADER)}")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = next(csv.reader([line]))
        if len(cols) != len(ROW_HEADER):
            raise DataError("parse", f"{source} line {n}: expected {len(ROW_HEADER)} fields, got {len(cols)}")
        try:
            r = {"method": cols[0], "task": cols[1], "split": cols[2], "budget": int(cols[3]),
                 "seed": int(cols[4]), "successes": int(cols[5]), "trials": int(cols[6]), "rate": float(cols[7])}
        except ValueError as exc:
            raise DataError("parse", f"{source} line {n}: {exc}") from exc
        if r["method"] not in METHOD_ORDER or r["split"] not in SPLIT_ORDER:
            raise DataError("parse", f"{source} line {n}: unknown method or split")
        if r["trials"] <= 0 or not 0 <= r["successes"] <= r["trials"] or r["rate"] != r["successes"] / r["trials"]:
            raise DataError("parse", f"{source} line {n}: rate must equal successes / trials with trials > 0")
        rows.append(r)
    return rows


def aggregate(rows: list[dict]) -> dict:
    """(split, method, budget, task) to (mean rate over seeds, seed count)."""
    acc: dict = {}
    for r in rows:
        acc.setdefault((r["split"], r["method"], r["budget"], r["task"]), []).append(r["rate"])
    return {k: (float(np.mean(v)), len(v)) for k, v in acc.items()}


def format_table(rows: list[dict], tasks=None) -> str:
    """Success rates in percent (2 decimals), one line per (split, method, budget), one column per task."""
    if tasks is None:
        tasks = []
        for r in rows:
            if r["task"] not in tasks:
                tasks.append(r["task"])
    agg = aggregate(rows)
    widths = [12, 11, 6] + [max(9, len(t)) for t in tasks] + [7]
    header = ["split", "method", "budget", *tasks, "mean"]
    out = ["  ".join(h.ljust(w) if i < 3 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths)))]
    lines = sorted({(k[0], k[1], k[2]) for k in agg},
                   key=lambda x: (SPLIT_ORDER.index(x[0]), METHOD_ORDER.index(x[1]), x[2]))
    for split, method, budget in lines:
        vals = [agg.get((split, method, budget, t), (None, 0))[0] for t in tasks]
        present = [v for v in vals if v is not None]
        cells = [split, method, str(budget)] + ["-" if v is None else f"{100 * v:.2f}" for v in vals]
        cells.append(f"{100 * np.mean(present):.2f}" if present else "-")
        out.append("  ".join(c.ljust(w) if i < 3 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))))
    return "\n".join(out) + "\n"


def read_overlay(path) -> tuple:
    """Scene and overlay entries ``(u, v, role, similarity)`` from an overlay file; pixels are bounds-checked."""
    _, b = decode_blocks(read_file(path), WORLD_MAGIC, WORLD_VERSION)
    try:
        scene = scene_from_blocks(b)
        px, sims, roles = b["overlay.pixels"], b["overlay.similarity"], b["overlay.roles"].split(",")
    except KeyError as exc:
        raise DataError("corrupt", f"{path}: missing block {exc}") from exc
    H, W = scene.depth.shape
    entries = []
    for (u, v), s, role in zip(px, sims, roles):
        if not (0 <= u < W and 0 <= v < H):
            raise DataError("corrupt", f"{path}: overlay pixel ({u}, {v}) outside {W}x{H}")
        entries.append((int(u), int(v), role, float(s)))
    return scene, entries


def overlay_text(entries) -> str:
    buf = io.StringIO()
    buf.write("u\tv\trole\tsimilarity\n")
    for u, v, role, s in entries:
        buf.write(f"{u}\t{v}\t{role}\t{s!r}\n")
    return buf.getvalue()


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_efficiency(rows: list[dict], path, split: str = "novel-unseen") -> None:
    """Rate versus adaptation budget per task; budget-free methods as horizontal lines."""
    plt = _pyplot()
    agg = aggregate([r for r in rows if r["split"] == split])
    tasks = []
    for r in rows:
        if r["task"] not in tasks:
            tasks.append(r["task"])
    n = max(1, len(tasks))
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.0), sharey=True, squeeze=False)
    styles = {"ours": ("C0", "-"), "ours_wo_AT": ("C1", "-"), "ours_wo_FA": ("C2", ":"),
              "independent": ("C3", "--"), "heuristic": ("0.5", "--")}
    for ax, task in zip(axes[0], tasks):
        for method in ("ours", "ours_wo_AT"):
            pts = sorted((k[2], v[0]) for k, v in agg.items() if k[1] == method and k[3] == task)
            if pts:
                b, r = zip(*pts)
                ax.plot(b, r, marker="o", color=styles[method][0], ls=styles[method][1], label=method)
        for method in ("ours_wo_FA", "independent", "heuristic"):
            v = agg.get((split, method, 0, task))
            if v is not None:
                ax.axhline(v[0], color=styles[method][0], ls=styles[method][1], lw=1, label=method)
        ax.set_title(task)
        ax.set_xlabel("interactions")
        ax.set_ylim(0, 1)
    axes[0][0].set_ylabel("success rate")
    if tasks:
        axes[0][-1].legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rates(rows: list[dict], path, split: str = "novel-unseen") -> None:
    """Grouped bars of each method's rate at its largest budget, per task."""
    plt = _pyplot()
    agg = aggregate([r for r in rows if r["split"] == split])
    tasks = []
    for r in rows:
        if r["task"] not in tasks:
            tasks.append(r["task"])
    methods = [m for m in METHOD_ORDER if any(k[1] == m for k in agg)]
    fig, ax = plt.subplots(figsize=(1.6 * max(1, len(tasks)) + 2, 3.0))
    width = 0.8 / max(1, len(methods))
    for j, m in enumerate(methods):
        vals = []
        for t in tasks:
            bs = [k[2] for k in agg if k[1] == m and k[3] == t]
            vals.append(agg[(split, m, max(bs), t)][0] if bs else 0.0)
        ax.bar(np.arange(len(tasks)) + j * width, vals, width, label=m)
    ax.set_xticks(np.arange(len(tasks)) + 0.4 - width / 2)
    ax.set_xticklabels(tasks)
    ax.set_ylim(0, 1)
    ax.set_ylabel("success rate")
    if methods:
        ax.legend(fontsize=7, ncol=len(methods))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_overlay(scene, entries, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(3.2, 3.2))
    depth = np.where(scene.valid, scene.depth, np.nan)
    ax.imshow(depth, cmap="gray_r")
    colors = {"gripper1": "C3", "gripper2": "C0"}
    for u, v, role, s in entries:
        ax.scatter([u], [v], s=40, color=colors.get(role, "C2"), edgecolor="k", label=f"{role} ({s:.2f})")
    ax.set_axis_off()
    ax.legend(fontsize=6, loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def run_report(rows_path, out_dir, overlay_dir=None, tasks=None, plots: bool = True) -> str:
    """Write ``report.txt``, per-overlay TSV files and PNG figures to ``out_dir``; return the table text."""
    p = Path(rows_path)
    if not p.is_file():
        raise DataError("missing-rows", f"{p} not found; run run-matrix first")
    rows = parse_rows(read_file(p).decode("utf-8"), str(p))
    table = format_table(rows, tasks)
    out = Path(out_dir)
    write_file(out / "report.txt", table.encode("utf-8"))
    if plots:
        out.mkdir(parents=True, exist_ok=True)
        split = "novel-unseen" if any(r["split"] == "novel-unseen" for r in rows) else (
            rows[0]["split"] if rows else "novel-unseen")
        plot_efficiency(rows, out / "efficiency.png", split)
        plot_rates(rows, out / "rates.png", split)
    if overlay_dir is not None and Path(overlay_dir).is_dir():
        for f in sorted(Path(overlay_dir).glob("*.biaw")):
            scene, entries = read_overlay(f)
            write_file(out / "overlays" / f"{f.stem}.tsv", overlay_text(entries).encode("utf-8"))
            if plots:
                plot_overlay(scene, entries, out / "overlays" / f"{f.stem}.png")
    return table
