"""Deployable scorecard: prediction, text rendering, JSON (de)serialization.

A scorecard bundles integer coefficients (plus intercept and multiplier)
with the binarization map that defines its bins, an optional isotonic
calibration map, and free-form metadata. risk = sigmoid(total / m), with
total = sum of fired split coefficients + intercept.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .binarize import (
    CATEGORICAL,
    CATEGORY,
    CONTINUOUS,
    MISSING,
    THRESHOLD,
    BinarizationMap,
    SplitSpec,
    apply_record,
)
from .errors import DataValidationError, ParseError
from .metrics import IsotonicMap, apply_isotonic
from .rounding import IntegerRiskScore
from .solver import _sigmoid

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Scorecard:
    score: IntegerRiskScore
    map: BinarizationMap
    display_names: tuple[str, ...] | None = None
    calibration: IsotonicMap | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.score.w.shape != (self.map.p,):
            raise DataValidationError("coefficient count does not match map columns")
        if self.display_names is not None and len(self.display_names) != self.map.q:
            raise DataValidationError("display name count does not match variables")

    @property
    def names(self) -> tuple[str, ...]:
        return self.display_names or self.map.variable_names


@dataclass(frozen=True)
class SparsityReport:
    group_sparsity: int  # raw variables used
    overall_sparsity: int  # nonzero coefficients + intercept + multiplier


def used_variables(card: Scorecard) -> list[int]:
    """Raw variable indices with at least one nonzero coefficient."""
    w = card.score.w
    return [
        v
        for v in range(card.map.q)
        if card.map.columns_by_variable[v].size and np.any(w[card.map.columns_by_variable[v]] != 0)
    ]


def sparsity_report(card: Scorecard) -> SparsityReport:
    nnz = int(np.count_nonzero(card.score.w))
    return SparsityReport(
        group_sparsity=len(used_variables(card)),
        overall_sparsity=nnz + 1 + 1,
    )


def score_total(card: Scorecard, record) -> int:
    """Integer total w.x + w0 for one record."""
    x = apply_record(card.map, record)
    return int(card.score.w[x > 0.5].sum()) + card.score.w0


def predict_risk(card: Scorecard, record) -> float:
    """Risk for one record: sigmoid(total / m), then calibration if present."""
    risk = float(_sigmoid(score_total(card, record) / card.score.m))
    if card.calibration is not None:
        risk = float(apply_isotonic(card.calibration, risk))
    return risk


def predict_matrix(card: Scorecard, matrix: np.ndarray) -> np.ndarray:
    """Vectorized risks for an already-binarized design matrix."""
    if matrix.ndim != 2 or matrix.shape[1] != card.map.p:
        raise DataValidationError("matrix width does not match card")
    totals = np.full(matrix.shape[0], float(card.score.w0))
    for j in np.flatnonzero(card.score.w):
        totals += card.score.w[j] * matrix[:, j]
    risk = _sigmoid(totals / card.score.m)
    if card.calibration is not None:
        risk = apply_isotonic(card.calibration, risk)
    return risk


def variable_bins(card: Scorecard, v: int) -> list[tuple[str, int]]:
    """Rendered bins for one variable: (label, points) with equal runs merged.

    Points are partial sums of the split coefficients, i.e. the value the
    variable contributes to the total for raw values in that bin; summing one
    bin per variable plus the intercept reproduces w.x + w0 exactly.
    """
    w = card.score.w
    cols = card.map.columns_by_variable[v]
    thresh = [j for j in cols if card.map.splits[j].kind == THRESHOLD]
    cats_splits = [j for j in cols if card.map.splits[j].kind == CATEGORY]
    miss = [j for j in cols if card.map.splits[j].kind == MISSING]

    bins: list[tuple[str, int]] = []
    if thresh:
        ts = [card.map.splits[j].threshold for j in thresh]
        suffix = np.r_[np.cumsum(w[thresh][::-1])[::-1], 0].astype(int)
        labels = [f"<= {ts[0]:g}"]
        labels += [f"({a:g}, {b:g}]" for a, b in zip(ts, ts[1:])]
        labels += [f"> {ts[-1]:g}"]
        bins += [(lab, int(pts)) for lab, pts in zip(labels, suffix)]
        # merge adjacent equal-point intervals into one span
        merged: list[tuple[str, int]] = []
        run_start = 0
        for k in range(1, len(bins) + 1):
            if k == len(bins) or bins[k][1] != bins[run_start][1]:
                if run_start == 0 and k == len(bins):
                    lab = "any"
                elif run_start == 0:
                    lab = f"<= {ts[k - 1]:g}"
                elif k == len(bins):
                    lab = f"> {ts[run_start - 1]:g}"
                else:
                    lab = f"({ts[run_start - 1]:g}, {ts[k - 1]:g}]"
                merged.append((lab, bins[run_start][1]))
                run_start = k
        bins = merged
    elif cats_splits:
        cats = card.map.categories[v] or ()
        u = w[cats_splits]
        suffix = np.r_[np.cumsum(u[::-1])[::-1], 0].astype(int)  # points per token rank
        token_bins = [(tok, int(suffix[r])) for r, tok in enumerate(cats)]
        token_bins.append(("other", 0))
        merged = []
        for tok, pts in token_bins:
            if merged and merged[-1][1] == pts:
                merged[-1] = (merged[-1][0] + ", " + tok, pts)
            else:
                merged.append((tok, pts))
        bins = merged

    for j in miss:
        if w[j] != 0:
            bins.append(("missing", int(w[j])))
    return bins


def scorecard_rows(card: Scorecard) -> list[tuple[str, list[tuple[str, int]]]]:
    """One (display name, bins) row per used variable."""
    return [(card.names[v], variable_bins(card, v)) for v in used_variables(card)]


def _footer_totals(card: Scorecard) -> list[int]:
    meta = card.metadata.get("score_totals")
    if meta:
        return [int(t) for t in meta]
    # fall back to the achievable range when no training totals were recorded
    w, w0 = card.score.w, card.score.w0
    lo = hi = w0
    for v in range(card.map.q):
        pts = [p for _, p in variable_bins(card, v)] or [0]
        lo += min(pts)
        hi += max(pts)
    if lo == hi:
        return [int(lo)]
    grid = np.unique(np.rint(np.linspace(lo, hi, 5)).astype(int))
    return [int(t) for t in grid]


def render_scorecard(card: Scorecard) -> str:
    """Human-readable text card; the serialized JSON is the machine form."""
    rep = sparsity_report(card)
    label = card.metadata.get("label", "risk scorecard")
    lines = [
        f"{label}  (variables used: {rep.group_sparsity}, overall sparsity: {rep.overall_sparsity})"
    ]
    rows = scorecard_rows(card)
    name_w = max((len(n) for n, _ in rows), default=0)
    lines.append("-" * 72)
    for name, bins in rows:
        cells = " | ".join(f"{lab}: {pts:+d}" for lab, pts in bins)
        lines.append(f"{name:<{name_w}} | {cells}")
    lines.append("-" * 72)
    lines.append(f"intercept: {card.score.w0:+d}    multiplier: {card.score.m:g}")
    totals = _footer_totals(card)
    risks = [float(_sigmoid(t / card.score.m)) for t in totals]
    if card.calibration is not None:
        risks = [float(apply_isotonic(card.calibration, r)) for r in risks]
    lines.append("total score: " + "  ".join(f"{t:+d}" for t in totals))
    lines.append("risk:        " + "  ".join(f"{100 * r:.1f}%" for r in risks))
    return "\n".join(lines) + "\n"


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    return obj


def serialize(card: Scorecard) -> dict:
    """Versioned JSON-shaped document; lossless, see deserialize."""
    variables = []
    for v, name in enumerate(card.map.variable_names):
        entry: dict = {"name": name, "kind": card.map.kinds[v], "bins": []}
        if card.map.kinds[v] == CATEGORICAL and card.map.categories[v] is not None:
            entry["categories"] = list(card.map.categories[v])
        for j in card.map.columns_by_variable[v]:
            s = card.map.splits[j]
            if s.kind == THRESHOLD:
                cond = {"op": "le", "threshold": float(s.threshold)}
            elif s.kind == CATEGORY:
                cond = {"op": "category_le", "boundary": s.boundary}
            else:
                entry["missing_points"] = int(card.score.w[j])
                continue
            entry["bins"].append({"condition": cond, "points": int(card.score.w[j])})
        variables.append(entry)

    metadata = dict(card.metadata)
    metadata.setdefault("fitted_on", card.map.fitted_on)
    if card.display_names is not None:
        metadata["display_names"] = list(card.display_names)
    doc = {
        "version": FORMAT_VERSION,
        "multiplier": float(card.score.m),
        "intercept": int(card.score.w0),
        "variables": variables,
        "metadata": _json_safe(metadata),
    }
    if card.calibration is not None:
        doc["calibration"] = {
            "thresholds": [float(t) for t in card.calibration.thresholds],
            "values": [float(v) for v in card.calibration.values],
        }
    return doc


def _expect(cond: bool, location: str, message: str):
    if not cond:
        raise ParseError(message, location)


def deserialize(doc: dict) -> Scorecard:
    """Rebuild a Scorecard from its serialized document."""
    _expect(isinstance(doc, dict), "$", "document must be an object")
    version = doc.get("version")
    _expect(version == FORMAT_VERSION, "$.version", f"unsupported version {version!r}")
    _expect(isinstance(doc.get("multiplier"), (int, float)), "$.multiplier", "must be a number")
    m = float(doc["multiplier"])
    _expect(m > 0, "$.multiplier", "must be positive")
    _expect(
        isinstance(doc.get("intercept"), int) and not isinstance(doc.get("intercept"), bool),
        "$.intercept",
        "must be an integer",
    )
    _expect(isinstance(doc.get("variables"), list), "$.variables", "must be a list")

    names: list[str] = []
    kinds: list[str] = []
    splits: list[SplitSpec] = []
    categories: list[tuple[str, ...] | None] = []
    weights: list[int] = []
    for v, entry in enumerate(doc["variables"]):
        loc = f"$.variables[{v}]"
        _expect(isinstance(entry, dict), loc, "must be an object")
        _expect(isinstance(entry.get("name"), str), f"{loc}.name", "must be a string")
        kind = entry.get("kind")
        _expect(kind in (CONTINUOUS, CATEGORICAL), f"{loc}.kind", f"unknown kind {kind!r}")
        names.append(entry["name"])
        kinds.append(kind)
        cats = entry.get("categories")
        if cats is not None:
            _expect(
                isinstance(cats, list) and all(isinstance(c, str) for c in cats),
                f"{loc}.categories",
                "must be a list of strings",
            )
            categories.append(tuple(cats))
        else:
            categories.append(None)
        _expect(isinstance(entry.get("bins"), list), f"{loc}.bins", "must be a list")
        for b, bin_ in enumerate(entry["bins"]):
            bloc = f"{loc}.bins[{b}]"
            _expect(isinstance(bin_, dict), bloc, "must be an object")
            cond = bin_.get("condition")
            _expect(isinstance(cond, dict), f"{bloc}.condition", "must be an object")
            pts = bin_.get("points")
            _expect(
                isinstance(pts, int) and not isinstance(pts, bool), f"{bloc}.points", "must be an integer"
            )
            op = cond.get("op")
            if op == "le":
                _expect(
                    isinstance(cond.get("threshold"), (int, float)),
                    f"{bloc}.condition.threshold",
                    "must be a number",
                )
                _expect(kind == CONTINUOUS, f"{bloc}.condition", "le condition on a categorical variable")
                splits.append(SplitSpec(v, THRESHOLD, threshold=float(cond["threshold"])))
            elif op == "category_le":
                _expect(
                    isinstance(cond.get("boundary"), str),
                    f"{bloc}.condition.boundary",
                    "must be a string",
                )
                _expect(kind == CATEGORICAL, f"{bloc}.condition", "category condition on a continuous variable")
                _expect(
                    categories[-1] is not None and cond["boundary"] in categories[-1],
                    f"{bloc}.condition.boundary",
                    "boundary not in declared categories",
                )
                splits.append(SplitSpec(v, CATEGORY, boundary=cond["boundary"]))
            else:
                raise ParseError(f"unknown condition op {op!r}", f"{bloc}.condition.op")
            weights.append(pts)
        if "missing_points" in entry:
            mp = entry["missing_points"]
            _expect(
                isinstance(mp, int) and not isinstance(mp, bool),
                f"{loc}.missing_points",
                "must be an integer",
            )
            splits.append(SplitSpec(v, MISSING))
            weights.append(mp)

    metadata = doc.get("metadata", {})
    _expect(isinstance(metadata, dict), "$.metadata", "must be an object")
    metadata = dict(metadata)
    fitted_on = metadata.pop("fitted_on", "")
    _expect(isinstance(fitted_on, str), "$.metadata.fitted_on", "must be a string")
    display = metadata.pop("display_names", None)
    _expect(
        display is None or (isinstance(display, list) and all(isinstance(d, str) for d in display)),
        "$.metadata.display_names",
        "must be a list of strings",
    )

    try:
        bmap = BinarizationMap(
            variable_names=tuple(names),
            kinds=tuple(kinds),
            splits=tuple(splits),
            categories=tuple(categories),
            fitted_on=fitted_on,
        )
    except DataValidationError as e:
        raise ParseError(str(e), "$.variables") from None

    calibration = None
    if "calibration" in doc:
        cal = doc["calibration"]
        _expect(isinstance(cal, dict), "$.calibration", "must be an object")
        th = cal.get("thresholds")
        vals = cal.get("values")
        ok = (
            isinstance(th, list)
            and isinstance(vals, list)
            and len(th) == len(vals)
            and len(th) > 0
            and all(isinstance(x, (int, float)) for x in th + vals)
        )
        _expect(ok, "$.calibration", "thresholds/values must be equal-length numeric lists")
        calibration = IsotonicMap(
            thresholds=np.asarray(th, dtype=np.float64), values=np.asarray(vals, dtype=np.float64)
        )

    score = IntegerRiskScore(
        w=np.asarray(weights, dtype=np.int64), w0=int(doc["intercept"]), m=m, loss=float("nan")
    )
    return Scorecard(
        score=score,
        map=bmap,
        display_names=tuple(display) if display is not None else None,
        calibration=calibration,
        metadata=metadata,
    )


def dumps(card: Scorecard) -> str:
    return json.dumps(serialize(card), indent=2, sort_keys=True) + "\n"


def save_card(card: Scorecard, path):
    with open(path, "w") as fh:
        fh.write(dumps(card))


def load_card(path) -> Scorecard:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", f"{path}:{e.lineno}:{e.colno}") from None
    return deserialize(doc)
