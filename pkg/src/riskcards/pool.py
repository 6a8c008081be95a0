"""Stage 2: diverse near-optimal solutions via single-feature support swaps.

For each support coordinate of the base solution, drop it, rank the zero
coordinates by gradient magnitude at the dropped point, re-fit the top few
swapped supports, and keep every distinct-support solution whose loss stays
within (1 + epsilon_u) of the base loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .binarize import BinarizedDataset
from .errors import ConfigError
from .solver import (
    ConstraintSet,
    ContinuousSolution,
    _margins,
    _sigmoid,
    assert_feasible,
    check_feasibility,
    coordinate_descent,
)

log = logging.getLogger("riskcards.pool")


@dataclass(frozen=True)
class SolutionPool:
    """Distinct-support solutions sorted by ascending loss; base included."""

    entries: tuple[ContinuousSolution, ...]
    epsilon_u: float
    base_loss: float


def generate_pool(
    base: ContinuousSolution,
    data: BinarizedDataset,
    constraints: ConstraintSet,
    epsilon_u: float = 0.3,
    swap_candidates: int = 10,
    pool_size: int = 10,
    rounds: int = 1,
) -> SolutionPool:
    """Harvest near-optimal support swaps around a base solution.

    swap_candidates bounds how many alternative columns are re-fitted per
    dropped coordinate; pool_size bounds the returned pool. A solution is
    kept iff its loss <= (1 + epsilon_u) * base.loss and it is feasible.
    The base solution is always included, even when pool_size better swaps
    exist. `rounds` > 1 re-applies the swap pass to newly found entries.
    """
    if epsilon_u < 0:
        raise ConfigError("epsilon_u must be >= 0")
    if swap_candidates < 1 or pool_size < 1 or rounds < 1:
        raise ConfigError("swap_candidates, pool_size and rounds must be >= 1")
    assert_feasible(base.w, base.w0, constraints, data.map)

    budget = (1.0 + epsilon_u) * base.loss
    admissible = ~((constraints.box_low == 0.0) & (constraints.box_high == 0.0))
    col_group = data.map.column_group
    harvest: dict[tuple[int, ...], ContinuousSolution] = {base.support: base}
    frontier = [base]

    for _ in range(rounds):
        new_entries: list[ContinuousSolution] = []
        for sol in sorted(frontier, key=lambda s: (s.loss, s.support)):
            z = _margins(data, sol.w, sol.w0)
            for j_minus in sol.support:
                kept = tuple(j for j in sol.support if j != j_minus)
                kept_groups = {int(col_group[j]) for j in kept}
                z_drop = z.copy()
                z_drop[data.column_rows[j_minus]] -= sol.w[j_minus]
                s = _sigmoid(-(data.labels * z_drop)) * data.labels
                grad = -np.einsum("ij,i->j", data.matrix, s)
                order = np.lexsort((np.arange(data.p), -np.abs(grad)))
                picked = 0
                for j_plus in order:
                    if picked >= swap_candidates:
                        break
                    j_plus = int(j_plus)
                    if sol.w[j_plus] != 0.0 or not admissible[j_plus]:
                        continue
                    g = int(col_group[j_plus])
                    if g not in kept_groups and len(kept_groups) >= constraints.gamma:
                        continue
                    picked += 1
                    new_support = tuple(sorted(kept + (j_plus,)))
                    if new_support in harvest:
                        continue
                    w_init = sol.w.copy()
                    w_init[j_minus] = 0.0
                    init = ContinuousSolution(w=w_init, w0=sol.w0, support=kept, loss=sol.loss)
                    cand = coordinate_descent(data, new_support, init, constraints)
                    if cand.loss <= budget and not check_feasibility(
                        cand.w, cand.w0, constraints, data.map
                    ):
                        # key on the realized nonzero support (descent may zero
                        # the swapped-in column); keep the lower-loss duplicate
                        prev = harvest.get(cand.support)
                        if prev is None:
                            harvest[cand.support] = cand
                            new_entries.append(cand)
                        elif cand.loss < prev.loss and prev.support != base.support:
                            harvest[cand.support] = cand
        frontier = new_entries
        if not frontier:
            break

    entries = sorted(harvest.values(), key=lambda s: (s.loss, s.support))
    if len(entries) > pool_size:
        top = entries[:pool_size]
        if all(e.support != base.support for e in top):
            top = top[: pool_size - 1] + [base]
        entries = sorted(top, key=lambda s: (s.loss, s.support))
    return SolutionPool(entries=tuple(entries), epsilon_u=float(epsilon_u), base_loss=base.loss)
