"""Figure rendering for pipeline artifacts.

Each renderer takes a delimited/JSON artifact written by the CLI and
drops a PNG next to it; nothing here feeds back into the pipeline.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

import numpy as np  # noqa: E402

from .certify import max_certified_radius  # noqa: E402
from .train import ModelArtifact  # noqa: E402


def render_training_curves(trace_csv_path, out_png) -> str:
    epochs, loss, tr_acc, te_acc = [], [], [], []
    with open(trace_csv_path, newline="") as f:
        for row in csv.DictReader(f):
            epochs.append(int(row["epoch"]))
            loss.append(float(row["loss"]))
            tr_acc.append(float(row["train_acc"]))
            te_acc.append(float(row["test_acc"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, loss, color="tab:blue", label="loss")
    ax.plot(epochs, tr_acc, color="tab:red", label="train accuracy")
    ax.plot(epochs, te_acc, color="tab:orange", label="test accuracy")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss / accuracy")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return os.fspath(out_png)


def render_sweep(sweep_csv_path, out_png) -> str:
    by_p: dict[float, list[tuple[float, float]]] = {}
    with open(sweep_csv_path, newline="") as f:
        for row in csv.DictReader(f):
            by_p.setdefault(float(row["p"]), []).append(
                (float(row["L"]), float(row["acc"]))
            )
    fig, ax = plt.subplots(figsize=(6, 4))
    for p in sorted(by_p):
        pts = sorted(by_p[p])
        label = "baseline (p=0)" if p == 0 else f"p={p:g}"
        ax.plot([l for l, _ in pts], [a for _, a in pts], marker="o", label=label)
    ax.set_xlabel("attack radius L (l2)")
    ax.set_ylabel("conventional accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return os.fspath(out_png)


def render_certificates(cert_json_path, out_png) -> str:
    with open(cert_json_path) as f:
        doc = json.load(f)
    settings = doc["settings"]
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(1, len(settings))
    for si, setting in enumerate(settings):
        certs = setting["certificates"]
        ratios = [c["B"] for c in certs if c["B"] is not None]
        xs = np.arange(len(ratios)) + si * width
        ax.bar(xs, ratios, width=width,
               label=f"p={setting['p']:g}, tau={setting['tau_d']:g}")
        if setting["threshold"] is not None:
            ax.axhline(setting["threshold"], linestyle="--", linewidth=0.8,
                       color=f"C{si}")
    ax.set_xlabel("test example")
    ax.set_ylabel("score ratio vs threshold (dashed)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return os.fspath(out_png)


def render_certified_radius_vs_noise(
    model: ModelArtifact, examples, out_png, measured_dim: int = 2
) -> str:
    """Certified trace radius and noisy top score as noise grows."""
    ps = np.linspace(0.05, 0.95, 50)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for i, ex in enumerate(examples):
        radii = [max_certified_radius(model.noisy_scores(ex.features, p), p,
                                      measured_dim) for p in ps]
        tops = [float(np.max(model.noisy_scores(ex.features, p).scores)) for p in ps]
        ax1.plot(ps, radii, label=f"example {i}")
        ax2.plot(ps, tops, label=f"example {i}")
    ax1.set_xlabel("noise p")
    ax1.set_ylabel("max certified trace radius")
    ax2.set_xlabel("noise p")
    ax2.set_ylabel("noisy top score")
    ax2.axhline(0.5, linestyle=":", color="gray")
    ax1.legend(fontsize=8)
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return os.fspath(out_png)


def render_attack_paths(trace_jsonl_path, out_png) -> str:
    paths: dict[int, list[dict]] = {}
    with open(trace_jsonl_path) as f:
        for line in f:
            rec = json.loads(line)
            paths.setdefault(rec["example"], []).append(rec)
    fig, ax = plt.subplots(figsize=(6, 4))
    for idx, recs in sorted(paths.items()):
        recs.sort(key=lambda r: r["step"])
        ax.plot([r["step"] for r in recs], [r["trace"] for r in recs],
                alpha=0.6, linewidth=0.9)
    ax.set_xlabel("attack step")
    ax.set_ylabel("trace distance from clean input")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return os.fspath(out_png)
