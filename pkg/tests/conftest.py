"""Shared builders for the test suite.

Most tests want either a hand-built binarized dataset with a known group
layout, or a small random raw table. Both come from here so the constraint
plumbing (map <-> matrix agreement) is set up once and correctly.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from riskcards.binarize import (
    CATEGORICAL,
    CONTINUOUS,
    THRESHOLD,
    BinarizationMap,
    BinarizedDataset,
    RawDataset,
    SplitSpec,
)
from riskcards.solver import ConstraintSet, coordinate_descent, zero_solution


def synthetic_map(group_sizes, names=None) -> BinarizationMap:
    """A map with one continuous variable per group and the given split counts."""
    q = len(group_sizes)
    if names is None:
        names = tuple(f"v{i}" for i in range(q))
    splits = []
    for v, size in enumerate(group_sizes):
        for k in range(size):
            splits.append(SplitSpec(variable_index=v, kind=THRESHOLD, threshold=float(k + 1)))
    return BinarizationMap(
        variable_names=tuple(names),
        kinds=(CONTINUOUS,) * q,
        splits=tuple(splits),
        categories=(None,) * q,
    )


def make_dataset(matrix, labels01, group_sizes=None) -> BinarizedDataset:
    """Wrap a 0/1 matrix and 0/1 labels into a BinarizedDataset.

    group_sizes defaults to one group per column.
    """
    matrix = np.asarray(matrix, dtype=np.int8)
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-D")
    p = matrix.shape[1]
    if group_sizes is None:
        group_sizes = [1] * p
    if sum(group_sizes) != p:
        raise ValueError("group sizes must cover all columns")
    labels = np.where(np.asarray(labels01) > 0, 1, -1).astype(np.int8)
    return BinarizedDataset(matrix=matrix, labels=labels, map=synthetic_map(group_sizes))


def make_raw(columns: dict, labels01=None) -> RawDataset:
    """columns: name -> (kind, list of values, None for missing)."""
    names, kinds, cols = [], [], []
    for name, (kind, values) in columns.items():
        names.append(name)
        kinds.append(kind)
        arr = np.empty(len(values), dtype=object)
        for i, v in enumerate(values):
            if v is None:
                arr[i] = None
            elif kind == CONTINUOUS:
                arr[i] = float(v)
            else:
                arr[i] = str(v)
        cols.append(arr)
    labels = None
    label_values = None
    if labels01 is not None:
        labels = np.where(np.asarray(labels01) > 0, 1, -1).astype(np.int8)
        label_values = ("0", "1")
    return RawDataset(
        variable_names=tuple(names),
        columns=tuple(cols),
        kinds=tuple(kinds),
        labels=labels,
        label_values=label_values,
    )


def default_constraints(data: BinarizedDataset, lam=None, gamma=None, **kw) -> ConstraintSet:
    bmap = data.map
    if lam is None:
        lam = bmap.p
    if gamma is None:
        gamma = bmap.n_groups
    return ConstraintSet.for_map(bmap, lam=lam, gamma=gamma, **kw)


def random_binary_instance(rng, n, group_sizes, beta_scale=1.5):
    """Random correlated 0/1 matrix plus labels from a planted logistic model."""
    p = sum(group_sizes)
    latent = rng.normal(size=(n, len(group_sizes)))
    cols = []
    for g, size in enumerate(group_sizes):
        for k in range(size):
            cols.append((latent[:, g] > rng.normal(scale=0.8)).astype(np.int8))
    matrix = np.column_stack(cols)
    beta = rng.normal(scale=beta_scale, size=p) * (rng.uniform(size=p) < 0.6)
    z = matrix @ beta + rng.normal(scale=0.3)
    prob = 1.0 / (1.0 + np.exp(-z))
    labels01 = (rng.uniform(size=n) < prob).astype(int)
    if labels01.min() == labels01.max():
        labels01[0] = 1 - labels01[0]
    return make_dataset(matrix, labels01, group_sizes)


def exhaustive_optimum(data, constraints, tol=1e-10, max_iter=400):
    """Global optimum by enumerating every feasible support and solving each.

    The per-support problem is smooth, convex, and box-constrained, so
    coordinate descent lands on its global minimum; the best over all
    supports is the true constrained optimum (used as a small-instance
    oracle for the beam search).
    """
    p = data.p
    groups = data.map.column_group
    best = coordinate_descent(data, (), zero_solution(data), constraints, tol=tol, max_iter=max_iter)
    for size in range(1, constraints.lam + 1):
        for support in itertools.combinations(range(p), size):
            if len(set(groups[list(support)])) > constraints.gamma:
                continue
            sol = coordinate_descent(
                data, support, zero_solution(data), constraints, tol=tol, max_iter=max_iter
            )
            if sol.loss < best.loss:
                best = sol
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
