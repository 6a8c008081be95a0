"""Stage 1: sparse box-constrained logistic regression via beam search.

Supports grow one coordinate at a time: candidate additions are ranked by
gradient magnitude, the top few are fine-tuned with box-projected coordinate
descent, and the best beam_width supports survive each round. All reductions
use fixed-order summation paths (index sums, einsum, np.sum) so results are
byte-identical regardless of BLAS thread count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .binarize import BinarizationMap, BinarizedDataset
from .errors import ConfigError, ConstraintViolationError

log = logging.getLogger("riskcards.solver")

FREE = "free"
NONNEG = "nonneg"
NONPOS = "nonpos"


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x):
    # log(1 + exp(x)), stable at both tails
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class ConstraintSet:
    """Sparsity budget, group budget, per-column boxes, intercept box.

    Monotone directions are recorded per raw variable and already folded into
    the per-column boxes by `for_map`; lam bounds the number of nonzero
    coefficients (intercept excluded) and gamma the number of used groups.
    """

    lam: int
    gamma: int
    box_low: np.ndarray
    box_high: np.ndarray
    intercept_low: float = -100.0
    intercept_high: float = 100.0
    monotone: tuple[str, ...] = ()

    @classmethod
    def for_map(
        cls,
        bmap: BinarizationMap,
        lam: int,
        gamma: int,
        box: tuple[float, float] = (-5.0, 5.0),
        box_overrides: dict[str, tuple[float, float]] | None = None,
        monotone: dict[str, str] | None = None,
        intercept_box: tuple[float, float] = (-100.0, 100.0),
    ) -> "ConstraintSet":
        """Build and validate constraints against a fitted map.

        box_overrides and monotone are keyed by raw variable name; monotone
        "nonneg" clips every box in the variable's group to [max(a,0), b]
        (and "nonpos" symmetrically), so sign restrictions ride on the boxes.
        """
        p = bmap.p
        if not isinstance(lam, (int, np.integer)) or lam < 0:
            raise ConfigError("lambda must be a non-negative integer")
        if lam > p:
            raise ConfigError(f"lambda={lam} exceeds number of columns p={p}")
        if not isinstance(gamma, (int, np.integer)) or gamma < 0:
            raise ConfigError("gamma must be a non-negative integer")
        if gamma > bmap.n_groups:
            raise ConfigError(f"gamma={gamma} exceeds number of variables with splits ({bmap.n_groups})")

        lo = np.full(p, float(box[0]))
        hi = np.full(p, float(box[1]))
        name_to_var = {name: v for v, name in enumerate(bmap.variable_names)}
        for name, (a, b) in (box_overrides or {}).items():
            v = name_to_var.get(name)
            if v is None:
                raise ConfigError(f"box override names unknown variable {name!r}")
            cols = bmap.columns_by_variable[v]
            lo[cols] = float(a)
            hi[cols] = float(b)

        directions = [FREE] * bmap.q
        for name, d in (monotone or {}).items():
            v = name_to_var.get(name)
            if v is None:
                raise ConfigError(f"monotone constraint names unknown variable {name!r}")
            if d not in (FREE, NONNEG, NONPOS):
                raise ConfigError(f"monotone direction {d!r} must be free|nonneg|nonpos")
            directions[v] = d
            cols = bmap.columns_by_variable[v]
            if d == NONNEG:
                if np.any(hi[cols] < 0):
                    raise ConfigError(f"variable {name!r}: nonneg monotonicity needs box upper >= 0")
                lo[cols] = np.maximum(lo[cols], 0.0)
            elif d == NONPOS:
                if np.any(lo[cols] > 0):
                    raise ConfigError(f"variable {name!r}: nonpos monotonicity needs box lower <= 0")
                hi[cols] = np.minimum(hi[cols], 0.0)

        ilo, ihi = float(intercept_box[0]), float(intercept_box[1])
        cs = cls(int(lam), int(gamma), lo, hi, ilo, ihi, tuple(directions))
        cs.validate()
        return cs

    def validate(self):
        lo, hi = self.box_low, self.box_high
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ConfigError("box bounds must be finite")
        if np.any(lo > hi):
            j = int(np.flatnonzero(lo > hi)[0])
            raise ConfigError(f"column {j}: box lower {lo[j]} exceeds upper {hi[j]}")
        if not (math.isfinite(self.intercept_low) and math.isfinite(self.intercept_high)):
            raise ConfigError("intercept box must be finite")
        if self.intercept_low > self.intercept_high:
            raise ConfigError("intercept box is empty")
        # every box must admit at least one integer for the rounding stage
        if np.any(np.ceil(lo) > np.floor(hi)):
            j = int(np.flatnonzero(np.ceil(lo) > np.floor(hi))[0])
            raise ConfigError(f"column {j}: box [{lo[j]}, {hi[j]}] contains no integer")
        if math.ceil(self.intercept_low) > math.floor(self.intercept_high):
            raise ConfigError("intercept box contains no integer")

    @property
    def p(self) -> int:
        return self.box_low.shape[0]


@dataclass(frozen=True, eq=False)
class ContinuousSolution:
    """Real-valued coefficients with their nonzero support and exact loss."""

    w: np.ndarray
    w0: float
    support: tuple[int, ...]
    loss: float

    @classmethod
    def build(cls, w: np.ndarray, w0: float, data: BinarizedDataset) -> "ContinuousSolution":
        w = np.asarray(w, dtype=np.float64)
        support = tuple(int(j) for j in np.flatnonzero(w))
        return cls(w=w, w0=float(w0), support=support, loss=logistic_loss(w, w0, data))


def _margins(data: BinarizedDataset, w: np.ndarray, w0: float) -> np.ndarray:
    """w.x + w0 per row, accumulated column-by-column (fixed summation order)."""
    z = np.full(data.n, float(w0), dtype=np.float64)
    for j in np.flatnonzero(w):
        z[data.column_rows[j]] += w[j]
    return z


def logistic_loss(w: np.ndarray, w0: float, data: BinarizedDataset, m: float = 1.0) -> float:
    """Sum over rows of log(1 + exp(-y (w.x + w0) / m))."""
    if not m > 0:
        raise ConstraintViolationError(f"multiplier m={m} must be positive")
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (data.p,):
        raise ConstraintViolationError(f"w has shape {w.shape}, expected ({data.p},)")
    z = _margins(data, w, w0)
    return float(_softplus(-(data.labels * z) / m).sum())


def loss_gradient(w: np.ndarray, w0: float, data: BinarizedDataset, m: float = 1.0):
    """Analytic gradient of logistic_loss in (w, w0); returns (grad_w, grad_w0)."""
    if not m > 0:
        raise ConstraintViolationError(f"multiplier m={m} must be positive")
    w = np.asarray(w, dtype=np.float64)
    z = _margins(data, w, w0)
    s = _sigmoid(-(data.labels * z) / m) * data.labels / m
    # einsum's non-BLAS path: deterministic for any thread count
    grad_w = -np.einsum("ij,i->j", data.matrix, s)
    return grad_w, float(-s.sum())


def check_feasibility(
    w: np.ndarray,
    w0: float,
    constraints: ConstraintSet,
    bmap: BinarizationMap,
    integer: bool = False,
    tol: float = 0.0,
) -> tuple[str, ...]:
    """Independent constraint audit; returns the violated constraint names.

    Recomputes everything from the coefficient vector alone (no solver
    bookkeeping): nonzero count vs lambda, used groups vs gamma, per-column
    boxes, intercept box, monotone signs per variable, and integrality when
    asked. Empty result means feasible.
    """
    w = np.asarray(w, dtype=np.float64)
    out = []
    nz = np.flatnonzero(w)
    if nz.size > constraints.lam:
        out.append(f"sparsity: {nz.size} nonzeros > lambda={constraints.lam}")
    used_groups = {int(bmap.column_group[j]) for j in nz}
    if len(used_groups) > constraints.gamma:
        out.append(f"group-sparsity: {len(used_groups)} groups > gamma={constraints.gamma}")
    low_bad = np.flatnonzero(w < constraints.box_low - tol)
    high_bad = np.flatnonzero(w > constraints.box_high + tol)
    if low_bad.size or high_bad.size:
        j = int(low_bad[0]) if low_bad.size else int(high_bad[0])
        out.append(f"box: column {j} value {w[j]} outside [{constraints.box_low[j]}, {constraints.box_high[j]}]")
    if w0 < constraints.intercept_low - tol or w0 > constraints.intercept_high + tol:
        out.append(f"intercept-box: {w0} outside [{constraints.intercept_low}, {constraints.intercept_high}]")
    if constraints.monotone:
        for v, d in enumerate(constraints.monotone):
            if d == FREE:
                continue
            cols = bmap.columns_by_variable[v]
            if d == NONNEG and np.any(w[cols] < -tol):
                out.append(f"monotone-sign: variable {bmap.variable_names[v]!r} has negative coefficient")
            elif d == NONPOS and np.any(w[cols] > tol):
                out.append(f"monotone-sign: variable {bmap.variable_names[v]!r} has positive coefficient")
    if integer:
        if np.any(w != np.rint(w)) or w0 != round(w0):
            out.append("integrality: non-integer coefficient or intercept")
    return tuple(out)


def assert_feasible(w, w0, constraints, bmap, integer: bool = False, tol: float = 0.0):
    violations = check_feasibility(w, w0, constraints, bmap, integer=integer, tol=tol)
    if violations:
        raise ConstraintViolationError("; ".join(violations))


def _scalar_box_min(yv: np.ndarray, zo: np.ndarray, lo: float, hi: float, x0: float) -> float:
    """Minimize sum softplus(-yv (zo + d)) over d in [lo, hi].

    Convex 1-D problem: endpoint derivative tests first, then safeguarded
    Newton with a bisection bracket. yv in {-1,+1}; zo is the margin from all
    other coordinates on the rows where this column fires.
    """

    def grad(d: float) -> float:
        return float(-np.einsum("i,i->", yv, _sigmoid(-yv * (zo + d))))

    if grad(lo) >= 0.0:
        return lo
    if grad(hi) <= 0.0:
        return hi
    lo_b, hi_b = lo, hi
    d = min(max(x0, lo), hi)
    for _ in range(64):
        u = -yv * (zo + d)
        sig = _sigmoid(u)
        g = float(-np.einsum("i,i->", yv, sig))
        if g < 0.0:
            lo_b = d
        elif g > 0.0:
            hi_b = d
        else:
            return d
        if abs(g) <= 1e-12 * yv.size or (hi_b - lo_b) <= 1e-14 * max(1.0, abs(d)):
            break
        h = float(np.einsum("i,i->", sig, 1.0 - sig))
        nd = d - g / h if h > 1e-300 else 0.5 * (lo_b + hi_b)
        if not (lo_b < nd < hi_b):
            nd = 0.5 * (lo_b + hi_b)
        d = nd
    return d


def _local_loss(yv: np.ndarray, zo: np.ndarray, d: float) -> float:
    return float(_softplus(-yv * (zo + d)).sum())


def coordinate_descent(
    data: BinarizedDataset,
    support,
    init: ContinuousSolution,
    constraints: ConstraintSet,
    tol: float = 1e-8,
    max_iter: int = 100,
    loss_history: list | None = None,
) -> ContinuousSolution:
    """Box-projected coordinate descent over a fixed support plus intercept.

    Cycles support coordinates in ascending index order, intercept last; each
    1-D subproblem is solved exactly (safeguarded Newton) and a candidate is
    accepted only if it does not increase the loss. Stops when a full sweep
    improves the loss by less than `tol` or after `max_iter` sweeps.
    """
    support = tuple(sorted({int(j) for j in support}))
    if any(j < 0 or j >= data.p for j in support):
        raise ConstraintViolationError("support: column index out of range")
    if len(support) > constraints.lam:
        raise ConstraintViolationError(f"sparsity: |support|={len(support)} > lambda={constraints.lam}")
    groups = {int(data.map.column_group[j]) for j in support}
    if len(groups) > constraints.gamma:
        raise ConstraintViolationError(f"group-sparsity: {len(groups)} groups > gamma={constraints.gamma}")
    outside = np.setdiff1d(np.arange(data.p), np.asarray(support, dtype=int))
    if outside.size and np.any(np.asarray(init.w)[outside] != 0.0):
        raise ConstraintViolationError("init has nonzero coefficients outside the support")
    assert_feasible_init(init, constraints, data.map)

    w = np.asarray(init.w, dtype=np.float64).copy()
    w0 = float(init.w0)
    y = data.labels
    z = _margins(data, w, w0)
    loss = float(_softplus(-y * z).sum())
    if loss_history is not None:
        loss_history.append(loss)

    lo, hi = constraints.box_low, constraints.box_high
    for _ in range(max_iter):
        for j in support:
            rows = data.column_rows[j]
            if rows.size == 0:
                continue  # constant-zero column: loss is flat in w_j
            yv = y[rows]
            zo = z[rows] - w[j]
            d = _scalar_box_min(yv, zo, float(lo[j]), float(hi[j]), w[j])
            if d != w[j] and _local_loss(yv, zo, d) < _local_loss(yv, zo, w[j]):
                z[rows] = zo + d
                w[j] = d
        # intercept sweep: every row fires
        zo = z - w0
        d = _scalar_box_min(y, zo, constraints.intercept_low, constraints.intercept_high, w0)
        if d != w0 and _local_loss(y, zo, d) < _local_loss(y, zo, w0):
            z = zo + d
            w0 = d
        new_loss = float(_softplus(-y * z).sum())
        if loss_history is not None:
            loss_history.append(new_loss)
        if loss - new_loss < tol:
            loss = new_loss
            break
        loss = new_loss

    return ContinuousSolution.build(w, w0, data)


def assert_feasible_init(init: ContinuousSolution, constraints: ConstraintSet, bmap: BinarizationMap):
    """Reject an infeasible starting point, naming the violated constraint."""
    violations = check_feasibility(init.w, init.w0, constraints, bmap)
    # sparsity/group checks of the structural support happen in the caller;
    # here only box/intercept/monotone apply to the numeric values
    hard = [v for v in violations if not v.startswith(("sparsity", "group-sparsity"))]
    if hard:
        raise ConstraintViolationError("; ".join(hard))


def zero_solution(data: BinarizedDataset) -> ContinuousSolution:
    return ContinuousSolution.build(np.zeros(data.p), 0.0, data)


def fit_continuous(
    data: BinarizedDataset,
    constraints: ConstraintSet,
    beam_width: int = 10,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> ContinuousSolution:
    """Beam search over supports, one coordinate added per round.

    Each surviving support nominates its top 2*beam_width admissible
    additions by |gradient| (ties to the smaller column index); each
    nomination is fine-tuned by coordinate_descent warm-started from the
    parent. Stops at lambda coordinates or when no candidate improves the
    best loss by more than `tol`.
    """
    if beam_width < 1:
        raise ConfigError("beam_width must be >= 1")
    if constraints.p != data.p:
        raise ConstraintViolationError("constraint arity does not match data")

    base = coordinate_descent(data, (), zero_solution(data), constraints, tol, max_iter)
    best_support: tuple[int, ...] = ()
    best = base
    if constraints.lam == 0:
        assert_feasible(best.w, best.w0, constraints, data.map)
        return best

    # boxes pinned to {0} can never host a nonzero coefficient
    admissible = ~((constraints.box_low == 0.0) & (constraints.box_high == 0.0))
    col_group = data.map.column_group
    beam: list[tuple[tuple[int, ...], ContinuousSolution]] = [((), base)]

    for _ in range(constraints.lam):
        prev_best_loss = best.loss
        seen: set[tuple[int, ...]] = set()
        candidates: list[tuple[float, tuple[int, ...], ContinuousSolution]] = []
        for support, sol in beam:
            grad, _ = loss_gradient(sol.w, sol.w0, data)
            used_groups = {int(col_group[j]) for j in support}
            order = np.lexsort((np.arange(data.p), -np.abs(grad)))
            nominated = 0
            for j in order:
                if nominated >= 2 * beam_width:
                    break
                j = int(j)
                if j in support or not admissible[j]:
                    continue
                g = int(col_group[j])
                if g not in used_groups and len(used_groups) >= constraints.gamma:
                    continue
                nominated += 1
                new_support = tuple(sorted(support + (j,)))
                if new_support in seen:
                    continue
                seen.add(new_support)
                init = ContinuousSolution(w=sol.w, w0=sol.w0, support=sol.support, loss=sol.loss)
                cand = coordinate_descent(data, new_support, init, constraints, tol, max_iter)
                candidates.append((cand.loss, new_support, cand))
        if not candidates:
            break
        candidates.sort(key=lambda t: (t[0], t[1]))
        beam = [(s, sol) for _, s, sol in candidates[:beam_width]]
        cand_loss, cand_support, cand_sol = candidates[0]
        if (cand_loss, cand_support) < (best.loss, best_support):
            best, best_support = cand_sol, cand_support
        if cand_loss >= prev_best_loss - tol:
            break  # no candidate improves the loss

    assert_feasible(best.w, best.w0, constraints, data.map)
    return best
