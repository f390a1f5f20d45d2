"""Result persistence: stable CSV, bar charts, and a text summary.

The CSV is the canonical artifact: rows are fully sorted and floats are
written with fixed precision, so re-running on the same inputs produces
byte-identical output. Plots and the summary are conveniences layered on
the same rows.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from .evaluate import ResultRow, ResultTable

CSV_COLUMNS = ("method", "subject", "k_shot", "label_ratio", "seed",
               "accuracy_pct", "n_queries")


def _row_sort_key(row: ResultRow):
    return (
        row.method,
        row.subject,
        -1 if row.k_shot is None else row.k_shot,
        -1.0 if row.label_ratio is None else row.label_ratio,
        row.seed,
    )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def write_results_csv(tables: list[ResultTable], path: Path) -> None:
    rows = sorted((r for t in tables for r in t.rows), key=_row_sort_key)
    hashes = sorted({(t.method, t.config_hash) for t in tables})
    with open(path, "w", newline="") as fh:
        for method, digest in hashes:
            fh.write(f"# config {method} {digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([
                row.method, row.subject, _cell(row.k_shot),
                _cell(row.label_ratio), row.seed,
                f"{row.accuracy_pct:.4f}", row.n_queries,
            ])


def _aggregate(tables: list[ResultTable]):
    """(method, subject, k_shot, label_ratio) -> list of per-seed accuracies."""
    agg = defaultdict(list)
    for t in tables:
        for r in t.rows:
            agg[(r.method, r.subject, r.k_shot, r.label_ratio)].append(r.accuracy_pct)
    return agg


def write_summary(tables: list[ResultTable], path: Path) -> None:
    agg = _aggregate(tables)
    lines = ["accuracy % (mean +- std over seeds)", ""]
    header = f"{'method':<10} {'subject':<12} {'k':>3} {'ratio':>6}  accuracy"
    lines.append(header)
    lines.append("-" * len(header))
    for key in sorted(agg, key=lambda k: (k[0], k[1],
                                          -1 if k[2] is None else k[2],
                                          -1.0 if k[3] is None else k[3])):
        method, subject, k_shot, ratio = key
        accs = np.array(agg[key])
        lines.append(
            f"{method:<10} {subject:<12} {_cell(k_shot):>3} {_cell(ratio):>6}  "
            f"{accs.mean():6.2f} +- {accs.std():5.2f}"
        )
    path.write_text("\n".join(lines) + "\n")


def write_bar_chart(tables: list[ResultTable], path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    agg = _aggregate(tables)
    subjects = sorted({k[1] for k in agg})
    series_keys = sorted({(k[0], k[2], k[3]) for k in agg},
                         key=lambda k: (k[0],
                                        -1 if k[1] is None else k[1],
                                        -1.0 if k[2] is None else k[2]))
    width = 0.8 / max(len(series_keys), 1)
    x = np.arange(len(subjects))
    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(subjects)), 4.0))
    for i, (method, k_shot, ratio) in enumerate(series_keys):
        means = []
        for s in subjects:
            accs = agg.get((method, s, k_shot, ratio))
            means.append(np.mean(accs) if accs else np.nan)
        label = method
        if k_shot is not None:
            label += f" k={k_shot}"
        if ratio is not None:
            label += f" r={ratio:g}"
        ax.bar(x + i * width, means, width, label=label)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(subjects)
    ax.set_ylabel("accuracy %")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def report(tables: list[ResultTable], out_dir) -> dict[str, Path]:
    """Write results.csv, summary.txt, and accuracy_by_subject.png."""
    if not tables:
        raise ValueError("report needs at least one result table")
    for t in tables:
        t.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out / "results.csv",
        "summary": out / "summary.txt",
        "plot": out / "accuracy_by_subject.png",
    }
    write_results_csv(tables, paths["csv"])
    write_summary(tables, paths["summary"])
    write_bar_chart(tables, paths["plot"])
    return paths
