"""Synthetic benchmark data sampled from a ground-truth scorecard.

Sampling distributions (fixed and documented so oracle comparisons are
reproducible): continuous variables draw uniformly over the card's threshold
span padded by 25% on each side (span taken as 2.0 when a variable has a
single threshold); categorical variables draw uniformly over the known
tokens; variables whose map carries a missing indicator lose each cell
independently with probability 0.05; variables with no splits draw uniform
[0, 1) noise. Labels are Bernoulli(true risk). Draw order is fixed: per
variable values then missing mask, then one label vector.
"""

from __future__ import annotations

import numpy as np

from .binarize import CATEGORICAL, MISSING, THRESHOLD, BinarizationMap, RawDataset
from .errors import DataValidationError
from .model import Scorecard, predict_matrix
from .binarize import transform_matrix

MISSING_RATE = 0.05


def _has_missing_indicator(bmap: BinarizationMap, v: int) -> bool:
    return any(bmap.splits[j].kind == MISSING for j in bmap.columns_by_variable[v])


def sample_raw(card: Scorecard, n: int, seed: int) -> RawDataset:
    """Draw n unlabeled records matching the card's variable schema."""
    if n < 1:
        raise DataValidationError("n must be >= 1")
    bmap = card.map
    rng = np.random.default_rng(seed)
    columns: list[np.ndarray] = []
    for v in range(bmap.q):
        thresholds = sorted(
            bmap.splits[j].threshold
            for j in bmap.columns_by_variable[v]
            if bmap.splits[j].kind == THRESHOLD
        )
        if bmap.kinds[v] == CATEGORICAL and bmap.categories[v]:
            cats = bmap.categories[v]
            vals = np.array([cats[k] for k in rng.integers(0, len(cats), size=n)], dtype=object)
        elif thresholds:
            span = thresholds[-1] - thresholds[0] if len(thresholds) > 1 else 2.0
            pad = 0.25 * span
            lo, hi = thresholds[0] - pad, thresholds[-1] + pad
            vals = np.array(list(rng.uniform(lo, hi, size=n)), dtype=object)
        else:
            vals = np.array(list(rng.uniform(0.0, 1.0, size=n)), dtype=object)
        if _has_missing_indicator(bmap, v):
            mask = rng.random(n) < MISSING_RATE
            vals[mask] = None
        columns.append(vals)
    return RawDataset(
        variable_names=bmap.variable_names,
        columns=tuple(columns),
        kinds=bmap.kinds,
        labels=None,
    )


def sample_dataset(card: Scorecard, n: int, seed: int):
    """Sample records, their true risks, and Bernoulli labels.

    Returns (raw, true_risk, labels01); the label draw consumes the RNG after
    every variable draw, so the same seed always yields the same table.
    """
    raw = sample_raw(card, n, seed)
    rng = np.random.default_rng(seed + 1)
    risk = predict_matrix(card, transform_matrix(card.map, raw))
    labels01 = (rng.random(n) < risk).astype(int)
    return raw, risk, labels01
