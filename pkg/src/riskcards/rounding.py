"""Stage 3: multiplier grid plus sequential floor/ceil rounding to integers.

A continuous solution is scaled by each multiplier on an equally spaced grid,
then rounded one coordinate at a time: at each step both the floor and the
ceiling of the current scaled coefficient (clipped into the integer box) are
evaluated at full loss and the better one is kept. The intercept is rounded
last. The grid winner is the (w, w0, m) with the lowest rounded loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .binarize import BinarizedDataset
from .errors import ConfigError, ConstraintViolationError
from .pool import SolutionPool
from .solver import ConstraintSet, ContinuousSolution, _margins, _softplus, assert_feasible, logistic_loss

log = logging.getLogger("riskcards.rounding")


@dataclass(frozen=True, eq=False)
class IntegerRiskScore:
    """Integer coefficients/intercept with the multiplier used by predictions."""

    w: np.ndarray  # int64
    w0: int
    m: float
    loss: float
    provenance: int = 0
    grid_losses: tuple[tuple[float, float], ...] = ()  # (multiplier, loss) diagnostics


def multiplier_grid(w_star: np.ndarray, constraints: ConstraintSet, n_multipliers: int) -> list[float]:
    """Equally spaced multipliers in [1, max(|a|,|b|)_inf / |w*|_inf].

    Returns [1.0] when the solution is all zeros, when the upper end falls
    below 1, or when n_multipliers is 1; duplicate grid values collapse.
    """
    if n_multipliers < 1:
        raise ConfigError("n_multipliers must be >= 1")
    w_star = np.asarray(w_star, dtype=np.float64)
    w_max = float(np.max(np.abs(w_star))) if w_star.size else 0.0
    if w_max == 0.0:
        return [1.0]
    bound = max(float(np.max(np.abs(constraints.box_low))), float(np.max(np.abs(constraints.box_high))))
    m_max = bound / w_max
    if m_max < 1.0:
        return [1.0]
    grid = np.linspace(1.0, m_max, n_multipliers)
    out: list[float] = []
    for m in grid:
        if not out or m != out[-1]:
            out.append(float(m))
    return out


def sequential_round(
    sol: ContinuousSolution,
    data: BinarizedDataset,
    m: float,
    constraints: ConstraintSet,
) -> IntegerRiskScore:
    """Round m * w one coordinate at a time, largest magnitude first.

    Visits support coordinates in descending |m * w_j| (ties to the smaller
    index), intercept last. At each coordinate the loss is evaluated at the
    floor and the ceiling of the current scaled value, both clipped into the
    integer box; ties pick the smaller absolute value. Coordinates outside
    the support stay exactly zero.
    """
    if not m > 0:
        raise ConstraintViolationError(f"multiplier m={m} must be positive")
    assert_feasible(sol.w, sol.w0, constraints, data.map)

    lo = np.ceil(constraints.box_low)
    hi = np.floor(constraints.box_high)
    if np.any(lo > hi):
        raise ConstraintViolationError("box contains no integer")
    ilo, ihi = math.ceil(constraints.intercept_low), math.floor(constraints.intercept_high)
    if ilo > ihi:
        raise ConstraintViolationError("intercept box contains no integer")

    v = m * np.asarray(sol.w, dtype=np.float64)
    v0 = m * sol.w0
    y = data.labels
    t = _margins(data, v, v0)  # unscaled totals; loss uses t / m

    order = sorted(sol.support, key=lambda j: (-abs(v[j]), j))
    for j in order:
        rows = data.column_rows[j]
        f = min(max(math.floor(v[j]), lo[j]), hi[j])
        c = min(max(math.ceil(v[j]), lo[j]), hi[j])
        if f == c:
            chosen = f
        else:
            yv, base_t = y[rows], t[rows]
            lf = float(_softplus(-yv * ((base_t + (f - v[j])) / m)).sum())
            lc = float(_softplus(-yv * ((base_t + (c - v[j])) / m)).sum())
            if lf < lc:
                chosen = f
            elif lc < lf:
                chosen = c
            else:
                chosen = f if abs(f) < abs(c) else c
        t[rows] += chosen - v[j]
        v[j] = chosen

    f = min(max(math.floor(v0), ilo), ihi)
    c = min(max(math.ceil(v0), ilo), ihi)
    if f == c:
        chosen0 = f
    else:
        lf = float(_softplus(-y * ((t + (f - v0)) / m)).sum())
        lc = float(_softplus(-y * ((t + (c - v0)) / m)).sum())
        if lf < lc:
            chosen0 = f
        elif lc < lf:
            chosen0 = c
        else:
            chosen0 = f if abs(f) < abs(c) else c
    v0 = float(chosen0)

    w_int = np.rint(v).astype(np.int64)
    loss = logistic_loss(w_int.astype(np.float64), v0, data, m)
    return IntegerRiskScore(w=w_int, w0=int(v0), m=float(m), loss=loss)


def round_pool(
    pool: SolutionPool,
    data: BinarizedDataset,
    constraints: ConstraintSet,
    n_multipliers: int = 25,
) -> list[IntegerRiskScore]:
    """Round every pool entry at every grid multiplier; keep each entry's best.

    Each entry contributes its minimum-loss (w, w0, m) over the grid (ties to
    the smaller multiplier); the full (multiplier, loss) trace is retained in
    grid_losses for auditing. Results are sorted by ascending loss, ties by
    pool position.
    """
    results: list[IntegerRiskScore] = []
    for idx, entry in enumerate(pool.entries):
        grid = multiplier_grid(entry.w, constraints, n_multipliers)
        best: IntegerRiskScore | None = None
        trace: list[tuple[float, float]] = []
        for m in grid:
            cand = sequential_round(entry, data, m, constraints)
            trace.append((m, cand.loss))
            if best is None or cand.loss < best.loss:
                best = cand
        results.append(replace(best, provenance=idx, grid_losses=tuple(trace)))
    results.sort(key=lambda s: (s.loss, s.provenance))
    return results
