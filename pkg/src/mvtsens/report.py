"""Result serialization: CSV tables, JSON metadata sidecars, figures.

Result CSVs open with '# key: value' comment lines carrying the
metadata needed for bit-identical reproduction (version, seed, config
hash). Volatile facts (timestamps, worker counts, runtimes) go only to
the JSON sidecar so the CSVs stay byte-identical across thread counts.
Floats are written with repr(), the shortest round-trip form.
"""

from __future__ import annotations

import csv
import hashlib
import json

import numpy as np

from .simulation import StudyMetrics

_MARKERS = ("o", "^", "s", "D", "v", "P", "X")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def config_sha256(payload: dict) -> str:
    """Hash of the canonical-JSON form of a resolved configuration."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_csv_with_meta(path, meta: dict, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"# {key}: {meta[key]}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv_skip_meta(path):
    """(meta dict, header, rows) for files written by this module."""
    meta = {}
    with open(path, newline="", encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    return meta, header, list(reader)


RESULTS_HEADER = [
    "contrast", "lambda", "Lambda", "point_estimate",
    "lo", "hi", "ci_lo", "ci_hi",
]


def write_results_csv(
    path,
    results: list,
    cis: list,
    meta: dict,
) -> None:
    """One row per (contrast, lambda): point interval plus CI.

    ``results`` and ``cis`` run parallel (see pairwise_ate_table order:
    contrast-major, lambda ascending).
    """
    rows = []
    for res, ci in zip(results, cis):
        rows.append([
            res.contrast.label, res.lam, float(np.exp(res.lam)),
            res.point_estimate, res.interval_lo, res.interval_hi,
            ci.lo, ci.hi,
        ])
    _write_csv_with_meta(path, meta, RESULTS_HEADER, rows)


PLOT_HEADER = ["contrast", "lambda", "interval_type", "lo", "hi", "mid"]


def write_plot_data_csv(path, results: list, cis: list, meta: dict) -> None:
    """Long-format rows for error-bar rendering: per (contrast, lambda)
    one 'point' row (range of point estimates) and one 'confidence' row."""
    rows = []
    for res, ci in zip(results, cis):
        rows.append([
            res.contrast.label, res.lam, "point",
            res.interval_lo, res.interval_hi,
            0.5 * (res.interval_lo + res.interval_hi),
        ])
        rows.append([
            res.contrast.label, res.lam, "confidence",
            ci.lo, ci.hi, 0.5 * (ci.lo + ci.hi),
        ])
    _write_csv_with_meta(path, meta, PLOT_HEADER, rows)


STUDY_HEADER = [
    "contrast", "lambda", "true_lo", "true_hi",
    "median_point_lo", "median_point_hi",
    "pct_bias_lo", "pct_bias_hi",
    "median_ci_lo", "median_ci_hi", "noncoverage",
]


def write_study_csv(path, metrics: StudyMetrics, meta: dict) -> None:
    rows = [
        [r.contrast, r.lam, r.true_lo, r.true_hi,
         r.median_point_lo, r.median_point_hi,
         r.pct_bias_lo, r.pct_bias_hi,
         r.median_ci_lo, r.median_ci_hi, r.noncoverage]
        for r in metrics.rows
    ]
    _write_csv_with_meta(path, meta, STUDY_HEADER, rows)


def write_metadata_json(path, meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def render_results_figure(path, results: list, cis: list) -> None:
    """Error-bar figure, one panel per contrast: solid bars span the
    point-estimate range, dashed bars the confidence interval."""
    from matplotlib.figure import Figure

    order = []
    for res in results:
        if res.contrast.label not in order:
            order.append(res.contrast.label)
    by_label = {lab: [] for lab in order}
    for res, ci in zip(results, cis):
        by_label[res.contrast.label].append((res, ci))

    fig = Figure(figsize=(3.6 * len(order), 3.6), dpi=130)
    axes = fig.subplots(1, len(order), sharey=True)
    if len(order) == 1:
        axes = [axes]
    for k, (lab, ax) in enumerate(zip(order, axes)):
        cells = sorted(by_label[lab], key=lambda t: t[0].lam)
        marker = _MARKERS[k % len(_MARKERS)]
        color = f"C{k % 10}"
        for res, ci in cells:
            x = res.lam
            ax.plot([x, x], [ci.lo, ci.hi], linestyle="--", color=color,
                    linewidth=1.1, zorder=1)
            mid = 0.5 * (res.interval_lo + res.interval_hi)
            ax.errorbar(
                [x], [mid],
                yerr=[[mid - res.interval_lo], [res.interval_hi - mid]],
                fmt=marker, color=color, capsize=4, markersize=5,
                linewidth=1.8, zorder=2,
            )
        ax.axhline(0.0, color="0.6", linewidth=0.7, zorder=0)
        ax.set_title(lab)
        ax.set_xlabel("lambda")
    axes[0].set_ylabel("estimand")
    fig.tight_layout()
    fig.savefig(path)
