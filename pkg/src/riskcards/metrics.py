"""Discrimination and calibration metrics, plus isotonic recalibration.

Label convention everywhere: values > 0 are the positive class, so {0,1}
and {-1,+1} codings both work unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import DataValidationError, UndefinedMetricError

_EPS = 1e-10


def _labels01(labels) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or y.size == 0:
        raise DataValidationError("labels must be a non-empty 1-D array")
    return (y > 0).astype(np.float64)


def _probs(probs, n: int | None = None) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DataValidationError("probabilities must be a non-empty 1-D array")
    if n is not None and p.size != n:
        raise DataValidationError("labels and probabilities differ in length")
    if np.any(p < 0) or np.any(p > 1) or not np.isfinite(p).all():
        raise DataValidationError("probabilities must lie in [0, 1]")
    return p


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their run."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    edges = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1], True])
    ranks = np.empty(x.size, dtype=np.float64)
    for k in range(edges.size - 1):
        lo, hi = edges[k], edges[k + 1]
        ranks[order[lo:hi]] = 0.5 * (lo + hi + 1)
    return ranks


def auroc(labels, scores) -> float:
    """Mann-Whitney AUROC; tied scores count one half."""
    y = _labels01(labels)
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise DataValidationError("labels and scores differ in length")
    n1 = int(y.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedMetricError("AUROC needs both classes present")
    r = _average_ranks(s)
    return float((r[y > 0].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def auprc(labels, scores) -> float:
    """Average precision: step integration of the PR curve, no interpolation."""
    y = _labels01(labels)
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise DataValidationError("labels and scores differ in length")
    n1 = int(y.sum())
    if n1 == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive label")
    order = np.argsort(-s, kind="mergesort")
    ys = y[order]
    ss = s[order]
    tp = np.cumsum(ys)
    # evaluate precision/recall once per distinct score (last index of each run)
    last = np.flatnonzero(np.r_[ss[1:] != ss[:-1], True])
    precision = tp[last] / (last + 1.0)
    recall = tp[last] / n1
    prev_recall = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev_recall) * precision))


def brier(labels, probs) -> float:
    """Mean squared error between probabilities and 0/1 labels."""
    y = _labels01(labels)
    p = _probs(probs, y.size)
    return float(np.mean((p - y) ** 2))


def _hl_detail(labels, probs, bins: int) -> tuple[float, bool]:
    y = _labels01(labels)
    p = _probs(probs, y.size)
    if bins < 1:
        raise DataValidationError("bins must be >= 1")
    if y.size < bins:
        raise DataValidationError(f"need n >= bins, got n={y.size} < bins={bins}")
    # sums run over probability-sorted rows so permuting the input cannot
    # change the floating-point result
    order = np.argsort(p, kind="mergesort")
    sp, sy = p[order], y[order]
    n = y.size
    boundaries = np.array(
        [sp[(g * n + bins - 1) // bins - 1] for g in range(1, bins)], dtype=np.float64
    )
    # probabilities equal to a boundary fall into the lower group
    group = np.searchsorted(boundaries, sp, side="left")
    chi2 = 0.0
    clamped = False
    for g in range(bins):
        mask = group == g
        n_g = int(mask.sum())
        if n_g == 0:
            continue
        obs = float(sy[mask].sum())
        exp = float(sp[mask].sum())
        denom = exp * (1.0 - exp / n_g)
        if denom < _EPS:
            denom = _EPS
            clamped = True
        chi2 += (obs - exp) ** 2 / denom
    return float(chi2), clamped


def hl_chi2(labels, probs, bins: int = 10) -> float:
    """Hosmer-Lemeshow chi-square over probability deciles (nearest-rank).

    Groups where the expected count hits 0 or the group size get an
    epsilon-clamped denominator; evaluate() flags that condition.
    """
    return _hl_detail(labels, probs, bins)[0]


def smr(labels, probs) -> float:
    """Standardized mortality ratio: observed positives / expected positives.

    The expected count sums sorted probabilities, making the value exactly
    permutation invariant.
    """
    y = _labels01(labels)
    p = _probs(probs, y.size)
    total = float(np.sort(p, kind="mergesort").sum())
    if total <= 0.0:
        raise UndefinedMetricError("SMR undefined: expected count is zero")
    return float(y.sum() / total)


@dataclass(frozen=True)
class IsotonicMap:
    """Nondecreasing step function: thresholds are block starts (ascending)."""

    thresholds: np.ndarray
    values: np.ndarray


def fit_isotonic(probs, labels) -> IsotonicMap:
    """Pool-adjacent-violators fit of labels against probabilities.

    Tied probabilities are pooled before PAV, so the result is the unique
    nondecreasing step function minimizing squared error to the labels
    ordered by probability.
    """
    y = _labels01(labels)
    p = _probs(probs, y.size)
    order = np.argsort(p, kind="mergesort")
    ps, ys = p[order], y[order]
    xs, start = np.unique(ps, return_index=True)
    # mean label and count per distinct probability
    bounds = np.r_[start, ps.size]
    means = np.array([ys[bounds[k]:bounds[k + 1]].mean() for k in range(xs.size)])
    counts = (bounds[1:] - bounds[:-1]).astype(np.float64)

    val: list[float] = []
    wt: list[float] = []
    left: list[float] = []
    for x, v, c in zip(xs, means, counts):
        val.append(float(v))
        wt.append(float(c))
        left.append(float(x))
        while len(val) > 1 and val[-1] <= val[-2]:
            v2, c2 = val.pop(), wt.pop()
            left.pop()
            val[-1] = (val[-1] * wt[-1] + v2 * c2) / (wt[-1] + c2)
            wt[-1] += c2
    return IsotonicMap(thresholds=np.asarray(left), values=np.asarray(val))


def apply_isotonic(iso: IsotonicMap, probs):
    """Evaluate the step map; inputs outside the fitted range clamp to the ends."""
    p = np.asarray(probs, dtype=np.float64)
    scalar = p.ndim == 0
    idx = np.searchsorted(iso.thresholds, np.atleast_1d(p), side="right") - 1
    out = iso.values[np.clip(idx, 0, iso.values.size - 1)]
    return float(out[0]) if scalar else out


@dataclass
class EvaluationReport:
    """Metric bundle; fields are None when undefined for the given inputs."""

    auroc: float | None
    auprc: float | None
    brier: float | None
    hl_chi2: float | None
    smr: float | None
    n: int
    n_positive: int
    hl_clamped: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(labels, probs, bins: int = 10) -> EvaluationReport:
    """Compute the full report; metrics undefined for these inputs become None."""
    y = _labels01(labels)
    p = _probs(probs, y.size)
    n = y.size
    n_pos = int(y.sum())

    def _try(fn, *args):
        try:
            return fn(*args)
        except (UndefinedMetricError, DataValidationError):
            return None

    hl = clamped = None
    if n >= bins:
        hl, clamped = _hl_detail(y, p, bins)
    return EvaluationReport(
        auroc=_try(auroc, y, p),
        auprc=_try(auprc, y, p),
        brier=brier(y, p),
        hl_chi2=hl,
        smr=_try(smr, y, p),
        n=n,
        n_positive=n_pos,
        hl_clamped=bool(clamped),
    )
