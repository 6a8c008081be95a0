"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import _labels01, _probs


def _roc_points(labels, scores):
    y = _labels01(labels)
    s = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-s, kind="mergesort")
    ys, ss = y[order], s[order]
    tp = np.cumsum(ys)
    fp = np.cumsum(1.0 - ys)
    last = np.flatnonzero(np.r_[ss[1:] != ss[:-1], True])
    n1, n0 = max(tp[-1], 1.0), max(fp[-1], 1.0)
    return np.r_[0.0, fp[last] / n0], np.r_[0.0, tp[last] / n1]


def save_roc_curve(labels, probs, path) -> str:
    fpr, tpr = _roc_points(labels, probs)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(fpr, tpr, lw=1.8)
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="gray")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title("ROC")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_pr_curve(labels, probs, path) -> str:
    y = _labels01(labels)
    s = np.asarray(probs, dtype=np.float64)
    order = np.argsort(-s, kind="mergesort")
    ys, ss = y[order], s[order]
    tp = np.cumsum(ys)
    last = np.flatnonzero(np.r_[ss[1:] != ss[:-1], True])
    n1 = max(tp[-1], 1.0)
    precision = tp[last] / (last + 1.0)
    recall = tp[last] / n1
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.step(np.r_[0.0, recall], np.r_[precision[0] if precision.size else 1.0, precision], where="post", lw=1.8)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_ylim(0, 1.05)
    ax.set_title("precision-recall")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_reliability_diagram(labels, probs, path, bins: int = 10) -> str:
    y = _labels01(labels)
    p = _probs(probs, y.size)
    order = np.argsort(p, kind="mergesort")
    ys, ps = y[order], p[order]
    cuts = np.linspace(0, y.size, bins + 1).astype(int)
    mean_p, mean_y = [], []
    for k in range(bins):
        lo, hi = cuts[k], cuts[k + 1]
        if hi > lo:
            mean_p.append(ps[lo:hi].mean())
            mean_y.append(ys[lo:hi].mean())
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="gray")
    ax.plot(mean_p, mean_y, marker="o", lw=1.5)
    ax.set_xlabel("mean predicted risk")
    ax.set_ylabel("observed rate")
    ax.set_title("reliability")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_score_histogram(totals, labels, path) -> str:
    t = np.asarray(totals, dtype=np.float64)
    y = _labels01(labels)
    lo, hi = t.min(), t.max()
    edges = np.arange(lo - 0.5, hi + 1.5) if hi - lo < 80 else 40
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist([t[y == 0], t[y == 1]], bins=edges, label=["negative", "positive"], stacked=True)
    ax.set_xlabel("total score")
    ax.set_ylabel("count")
    ax.legend()
    ax.set_title("score distribution")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def save_pool_overview(rows: list[dict], path) -> str:
    """Scatter of training loss vs overall sparsity for every card in a pool."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r["overall_sparsity"] for r in rows]
    ys = [r["loss"] for r in rows]
    ax.scatter(xs, ys, s=36)
    for r in rows:
        ax.annotate(r["label"], (r["overall_sparsity"], r["loss"]), fontsize=7,
                    textcoords="offset points", xytext=(4, 3))
    ax.set_xlabel("overall sparsity")
    ax.set_ylabel("training loss")
    ax.set_title("pool overview")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
