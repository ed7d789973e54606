"""Report rendering: delimited tables plus matplotlib figures on disk.

Every report writes a CSV and one or more PNGs side by side in the chosen
output directory, so results can be read by scripts and eyeballed by
operators without re-running anything.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .compression import compress_track, fidelity_report
from .metrics import MetricConfig
from .model import MonitorItemSet

BENCH_FIELDS = [
    "budget",
    "ss_raw", "ss_compressed",
    "pc_raw", "pc_compressed",
    "ed_raw", "ed_compressed",
    "dtw_raw", "dtw_compressed",
    "ratio",
]


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fieldnames)
        w.writeheader()
        w.writerows(rows)


def bench_compression(a, b, budgets, items=None, cfg=None, outdir=None):
    """Sweep hinge budgets on one track pair and report metric fidelity.

    Returns one row per budget with raw vs compressed aggregate metrics and
    the compression ratio.  With outdir set, writes hinge_sweep.csv, a
    metrics-vs-hinges figure, and a raw/reconstruction overlay at the largest
    budget.
    """
    items = items if items is not None else MonitorItemSet()
    cfg = cfg if cfg is not None else MetricConfig()
    rows = []
    last_fr = None
    for budget in budgets:
        fr = fidelity_report(a, b, budget, items, cfg)
        last_fr = fr
        ratios = [r.ratio for r in fr.reports_a.values()]
        rows.append(
            {
                "budget": budget,
                "ss_raw": fr.raw.aggregate_ss,
                "ss_compressed": fr.compressed.aggregate_ss,
                "pc_raw": fr.raw.aggregate_pc,
                "pc_compressed": fr.compressed.aggregate_pc,
                "ed_raw": fr.raw.aggregate_ed,
                "ed_compressed": fr.compressed.aggregate_ed,
                "dtw_raw": fr.raw.aggregate_dtw,
                "dtw_compressed": fr.compressed.aggregate_dtw,
                "ratio": float(np.mean(ratios)),
            }
        )

    if outdir:
        os.makedirs(outdir, exist_ok=True)
        _write_csv(os.path.join(outdir, "hinge_sweep.csv"), BENCH_FIELDS, rows)
        _plot_hinge_sweep(rows, os.path.join(outdir, "metrics_vs_hinges.png"))
        _plot_overlay(a, max(budgets), items, os.path.join(outdir, "reconstruction_overlay.png"))
    return rows


def _plot_hinge_sweep(rows, path):
    budgets = [r["budget"] for r in rows]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    for ax, metric, label in zip(
        axes.ravel(),
        ("ss", "pc", "ed", "dtw"),
        ("similarity score", "correlation", "euclidean", "warping distance"),
    ):
        ax.plot(budgets, [r[f"{metric}_compressed"] for r in rows], "o-", label="compressed")
        ax.axhline(rows[0][f"{metric}_raw"], color="gray", ls="--", label="raw")
        ax.set_ylabel(label)
        ax.legend(fontsize=8)
    for ax in axes[1]:
        ax.set_xlabel("hinge points")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_overlay(track, budget, items, path):
    name = next(c for c in items if c in track.channels)
    s = track.channels[name]
    cc = compress_track(track, budget).channels[name]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(s.times, s.values, lw=0.6, alpha=0.6, label=f"raw ({len(s)} pts)")
    ax.plot(cc.hinge_times, cc.hinge_values, "o-", ms=4, lw=1.5,
            label=f"reconstruction ({cc.hinge_count} hinges)")
    ax.set_xlabel("seconds since track start")
    ax.set_ylabel(name)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


EVAL_FIELDS = ["kind", "auc", "fold_aucs"]


def evaluate_models(reports, outdir=None):
    """Tabulate cross-validation reports; optionally write CSV + AUC figure."""
    rows = [
        {"kind": r.kind, "auc": r.auc, "fold_aucs": " ".join(f"{a:.4f}" for a in r.fold_aucs)}
        for r in reports
    ]
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        _write_csv(os.path.join(outdir, "model_aucs.csv"), EVAL_FIELDS, rows)
        fig, ax = plt.subplots(figsize=(6, 4))
        kinds = [r.kind for r in reports]
        ax.bar(kinds, [r.auc for r in reports], color="#4878a8")
        for i, r in enumerate(reports):
            ax.scatter([i] * len(r.fold_aucs), r.fold_aucs, color="k", zorder=3, s=12)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("AUC (dots: folds)")
        fig.tight_layout()
        fig.savefig(os.path.join(outdir, "model_aucs.png"), dpi=120)
        plt.close(fig)
    return rows
