"""Report rendering: plaintext summary table, CSV, and matplotlib figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def summary_table(reports: list[dict], skipped: list[dict] | None = None) -> str:
    """Plaintext accuracy table with a trailing average row."""
    lines = []
    header = f"{'Site':>6}  {'Drivers':>7}  {'Sessions/driver':>15}  {'Accuracy':>9}"
    lines.append(header)
    lines.append("-" * len(header))
    for rep in reports:
        lines.append(f"{rep['site']:>6}  {rep['n']:>7}  {rep['s']:>15}  "
                     f"{100 * rep['accuracy']:>8.1f}%")
    if reports:
        mean_acc = float(np.mean([r["accuracy"] for r in reports]))
        lines.append("-" * len(header))
        lines.append(f"{'Average across all sites':>32}  {100 * mean_acc:>8.1f}%")
    for skip in skipped or []:
        lines.append(f"{skip['site']:>6}  skipped: {skip['reason']}")
    return "\n".join(lines) + "\n"


def write_summary_csv(reports: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["site", "n", "s", "accuracy", "seed", "reps"])
        for rep in reports:
            writer.writerow([rep["site"], rep["n"], rep["s"],
                             f"{rep['accuracy']:.6f}", rep["seed"], rep["reps"]])


def save_confusion_figure(report: dict, path: str | Path) -> None:
    """Row-normalized confusion matrix as integer percentages."""
    confusion = np.array(report["confusion"], dtype=float)
    drivers = report["drivers"]
    n = len(drivers)
    fig, ax = plt.subplots(figsize=(1.2 * n + 2.2, 1.2 * n + 1.6))
    ax.imshow(confusion, cmap="Blues", vmin=0, vmax=100)
    for i in range(n):
        for j in range(n):
            shade = "white" if confusion[i, j] > 55 else "black"
            ax.text(j, i, f"{confusion[i, j]:.0f}", ha="center", va="center",
                    color=shade)
    ax.set_xticks(range(n), drivers, rotation=45, ha="right")
    ax.set_yticks(range(n), drivers)
    ax.set_xlabel("predicted driver")
    ax.set_ylabel("true driver")
    ax.set_title(f"site {report['site']}: accuracy {100 * report['accuracy']:.1f}%")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_importance_figure(report: dict, path: str | Path) -> None:
    names = [row[0] for row in report["importance"]]
    weights = [row[1] for row in report["importance"]]
    fig, ax = plt.subplots(figsize=(7, 4.2))
    pos = np.arange(len(names))
    ax.barh(pos, weights, color="#336699")
    ax.set_yticks(pos, names)
    ax.invert_yaxis()
    ax.set_xlabel("share of total impurity decrease")
    ax.set_title(f"site {report['site']}: sensor importance")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_report_files(reports: list[dict], out_dir: str | Path,
                        skipped: list[dict] | None = None) -> list[Path]:
    """Write the table, CSV, and per-site figures; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    table_path = out / "summary.txt"
    table_path.write_text(summary_table(reports, skipped))
    written.append(table_path)

    csv_path = out / "summary.csv"
    write_summary_csv(reports, csv_path)
    written.append(csv_path)

    fig_dir = out / "figures"
    fig_dir.mkdir(exist_ok=True)
    for rep in reports:
        conf_path = fig_dir / f"site_{rep['site']}_confusion.png"
        save_confusion_figure(rep, conf_path)
        written.append(conf_path)
        imp_path = fig_dir / f"site_{rep['site']}_importance.png"
        save_importance_figure(rep, imp_path)
        written.append(imp_path)
    return written
