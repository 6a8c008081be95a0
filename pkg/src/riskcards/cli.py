"""Command-line interface: train, predict, evaluate, render, synth.

Every run writes a manifest (resolved config + seed + SHA-256 of each input)
next to its outputs, sufficient to reproduce them bit-for-bit. Exit codes:
0 success, 1 usage error, 2 data/validation error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .binarize import (
    MISSING_TOKENS,
    apply_binarizer,
    fit_binarizer,
    load_csv,
    transform_matrix,
)
from .config import RunConfig, as_dict, load_config
from .errors import ConfigError, DataValidationError, RiskcardsError
from .figures import (
    save_pool_overview,
    save_pr_curve,
    save_reliability_diagram,
    save_roc_curve,
    save_score_histogram,
)
from .metrics import apply_isotonic, evaluate, fit_isotonic
from .model import (
    Scorecard,
    load_card,
    predict_matrix,
    predict_risk,
    render_scorecard,
    save_card,
    serialize,
    sparsity_report,
)
from .pool import generate_pool
from .rounding import round_pool
from .solver import ConstraintSet, fit_continuous
from .synth import sample_dataset

log = logging.getLogger("riskcards.cli")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        raise _UsageError(message)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(path, command: str, argv: list[str], cfg: RunConfig | None, inputs: dict):
    _write_json(
        path,
        {
            "command": command,
            "argv": argv,
            "config": as_dict(cfg) if cfg is not None else None,
            "seed": cfg.seed if cfg is not None else None,
            "inputs": {str(k): _sha256(k) for k in inputs.values()},
            "package_version": __version__,
        },
    )


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {
        "lam": "lam",
        "gamma": "gamma",
        "bins_per_variable": "bins_per_variable",
        "beam_width": "beam_width",
        "epsilon_u": "epsilon_u",
        "swap_candidates": "swap_candidates",
        "pool_size": "pool_size",
        "multiplier_grid_size": "multiplier_grid_size",
        "swap_rounds": "swap_rounds",
        "tol": "tol",
        "max_iter": "max_iter",
        "cv_folds": "cv_folds",
        "seed": "seed",
        "label": "label",
    }
    for attr, dest in overrides.items():
        v = getattr(args, dest, None)
        if v is not None:
            setattr(cfg, attr, v)
    if getattr(args, "box", None) is not None:
        cfg.box_default = _pair_flag(args.box, "--box")
    if getattr(args, "intercept_box", None) is not None:
        cfg.intercept_box = _pair_flag(args.intercept_box, "--intercept-box")
    for item in getattr(args, "box_var", None) or []:
        name, _, val = item.partition("=")
        if not name or not val:
            raise ConfigError(f"--box-var expects VAR=LO,HI, got {item!r}")
        cfg.box_overrides[name] = _pair_flag(val, "--box-var")
    for item in getattr(args, "monotone", None) or []:
        name, _, val = item.partition("=")
        if not name or not val:
            raise ConfigError(f"--monotone expects VAR=nonneg|nonpos, got {item!r}")
        cfg.monotone[name] = val.strip()
    return cfg


def _pair_flag(text: str, flag: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{flag} expects LO,HI")
    try:
        a, b = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"{flag} expects numbers, got {text!r}") from None
    return a, b


def _load_schema(path) -> dict[str, str]:
    import configparser

    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise DataValidationError(f"schema file not found: {path}") from None
    except configparser.Error as e:
        raise DataValidationError(f"{path}: {e}") from None
    if parser.sections() != ["schema"]:
        raise DataValidationError(f"{path}: expected a single [schema] section")
    return {k: parser.get("schema", k).strip() for k in parser.options("schema")}


def _read_labels_lenient(path, label: str) -> np.ndarray:
    """Labels as +-1 for evaluation; single-class files are allowed.

    Two distinct values map exactly as in load_csv (smaller value negative,
    numeric comparison when both parse). A single distinct value must be
    numeric: positive numbers mean all-positive, otherwise all-negative.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        rows = list(reader)
    if label not in header:
        raise DataValidationError(f"label column {label!r} not found")
    idx = header.index(label)
    toks = [row[idx].strip() for row in rows if len(row) > idx]
    if len(toks) != len(rows):
        raise DataValidationError(f"{path}: short rows in label column")
    if any(t in MISSING_TOKENS for t in toks):
        raise DataValidationError(f"label column {label!r} has missing values")
    distinct = sorted(set(toks))
    if len(distinct) == 2:
        try:
            distinct.sort(key=float)
        except ValueError:
            pass
        pos = distinct[1]
        return np.where(np.array(toks) == pos, 1.0, -1.0)
    if len(distinct) == 1:
        try:
            v = float(distinct[0])
        except ValueError:
            raise DataValidationError(
                f"single label value {distinct[0]!r} is not numeric; cannot tell the class"
            ) from None
        return np.full(len(toks), 1.0 if v > 0 else -1.0)
    raise DataValidationError(
        f"label column {label!r} must have 1 or 2 distinct values, found {len(distinct)}"
    )


def _score_totals(card_w, card_w0, matrix) -> np.ndarray:
    totals = np.full(matrix.shape[0], float(card_w0))
    for j in np.flatnonzero(card_w):
        totals += card_w[j] * matrix[:, j]
    return totals


def _quantile_totals(totals: np.ndarray) -> list[int]:
    ts = np.sort(totals.astype(np.int64), kind="mergesort")
    n = ts.size
    picks = [ts[0]] + [ts[(q * n + 3) // 4 - 1] for q in (1, 2, 3)] + [ts[-1]]
    out: list[int] = []
    for t in picks:
        if not out or int(t) != out[-1]:
            out.append(int(t))
    return out


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    cfg.validate(need_seed=True)
    if cfg.label is None:
        raise ConfigError("a label column is required: set [run] label or pass --label")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    schema = _load_schema(args.schema) if args.schema else None
    raw = load_csv(args.data, label=cfg.label, schema=schema)

    if cfg.cv_folds >= 2:
        if raw.n < cfg.cv_folds:
            raise DataValidationError(f"cv_folds={cfg.cv_folds} exceeds row count {raw.n}")
        rng = np.random.default_rng(cfg.seed)
        perm = rng.permutation(raw.n)
        n_val = raw.n // cfg.cv_folds
        val_raw = raw.take(np.sort(perm[:n_val]))
        train_raw = raw.take(np.sort(perm[n_val:]))
    else:
        train_raw, val_raw = raw, None

    bmap = fit_binarizer(train_raw, cfg.bins_per_variable)
    constraints = ConstraintSet.for_map(
        bmap,
        lam=cfg.lam,
        gamma=cfg.gamma,
        box=cfg.box_default,
        box_overrides=cfg.box_overrides,
        monotone=cfg.monotone,
        intercept_box=cfg.intercept_box,
    )
    data = apply_binarizer(bmap, train_raw)
    base = fit_continuous(data, constraints, cfg.beam_width, tol=cfg.tol, max_iter=cfg.max_iter)
    pool = generate_pool(
        base,
        data,
        constraints,
        epsilon_u=cfg.epsilon_u,
        swap_candidates=cfg.swap_candidates,
        pool_size=cfg.pool_size,
        rounds=cfg.swap_rounds,
    )
    scores = round_pool(pool, data, constraints, cfg.multiplier_grid_size)

    val_matrix = val_labels = None
    if val_raw is not None:
        val_matrix = transform_matrix(bmap, val_raw)
        val_labels = val_raw.labels

    cards, card_docs, summary_rows = [], [], []
    for k, score in enumerate(scores):
        totals = _score_totals(score.w, score.w0, data.matrix)
        card = Scorecard(
            score=score,
            map=bmap,
            metadata={
                "label": f"GFR-{cfg.gamma}",
                "card_index": k,
                "loss": score.loss,
                "seed": cfg.seed,
                "lambda": cfg.lam,
                "gamma": cfg.gamma,
                "label_column": cfg.label,
                "label_values": list(raw.label_values),
                "score_totals": _quantile_totals(totals),
            },
        )
        cards.append(card)
        rep = sparsity_report(card)
        probs = predict_matrix(card, data.matrix)
        train_report = evaluate(data.labels, probs)
        entry = {
            "card": serialize(card),
            "train_report": train_report.as_dict(),
            "loss": score.loss,
            "group_sparsity": rep.group_sparsity,
            "overall_sparsity": rep.overall_sparsity,
        }
        row = {
            "card": k,
            "label": f"GFR-{cfg.gamma}",
            "loss": score.loss,
            "group_sparsity": rep.group_sparsity,
            "overall_sparsity": rep.overall_sparsity,
            "train_auroc": train_report.auroc,
        }
        if val_matrix is not None:
            val_report = evaluate(val_labels, predict_matrix(card, val_matrix))
            entry["validation_report"] = val_report.as_dict()
            row["validation_auroc"] = val_report.auroc
        card_docs.append(entry)
        summary_rows.append(row)

    pool_doc = {
        "version": 1,
        "config": as_dict(cfg),
        "base_loss": pool.base_loss,
        "epsilon_u": pool.epsilon_u,
        "cards": card_docs,
    }
    _write_json(outdir / "pool.json", pool_doc)
    for k, card in enumerate(cards):
        save_card(card, outdir / f"card_{k}.json")

    columns = list(summary_rows[0].keys())
    with open(outdir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in summary_rows:
            writer.writerow([_cell(row[c]) for c in columns])

    overview = [
        {"label": f"{r['label']}#{r['card']}", "loss": r["loss"], "overall_sparsity": r["overall_sparsity"]}
        for r in summary_rows
    ]
    save_pool_overview(overview, outdir / "pool_overview.png")
    _write_manifest(
        outdir / "manifest.json", "train", list(args.argv), cfg, {"data": args.data}
    )

    print(f"pool of {len(cards)} cards -> {outdir / 'pool.json'} (card_K.json each)")
    header = f"{'card':>4}  {'label':<8} {'loss':>12}  {'groups':>6}  {'overall':>7}  {'train_auroc':>11}"
    if val_matrix is not None:
        header += f"  {'val_auroc':>9}"
    print(header)
    for r in summary_rows:
        line = (
            f"{r['card']:>4}  {r['label']:<8} {r['loss']:>12.4f}  {r['group_sparsity']:>6}"
            f"  {r['overall_sparsity']:>7}  {_fmt(r['train_auroc']):>11}"
        )
        if val_matrix is not None:
            line += f"  {_fmt(r.get('validation_auroc')):>9}"
        print(line)
    return 0


def _fmt(x) -> str:
    return "undefined" if x is None else f"{x:.4f}"


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def cmd_predict(args) -> int:
    card = load_card(args.card)
    with open(args.data, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{args.data}: empty file") from None
        rows = list(reader)
    out_path = Path(args.out)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header + ["risk"])
        for i, row in enumerate(rows):
            if len(row) != len(header):
                raise DataValidationError(f"{args.data}: row {i + 2} has {len(row)} fields")
            record = dict(zip(header, row))
            writer.writerow(row + [repr(predict_risk(card, record))])
    _write_manifest(
        out_path.with_suffix(out_path.suffix + ".manifest.json"),
        "predict",
        list(args.argv),
        None,
        {"card": args.card, "data": args.data},
    )
    print(f"{len(rows)} predictions -> {out_path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    if cfg.label is None:
        raise ConfigError("a label column is required: pass --label")
    cfg.validate(need_seed=args.calibrate is not None)
    card = load_card(args.card)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    schema = _load_schema(args.schema) if args.schema else None
    # the label column rides along as an ignored extra feature column, so
    # single-class evaluation files are accepted
    raw = load_csv(args.data, schema=schema)
    labels = _read_labels_lenient(args.data, cfg.label)
    matrix = transform_matrix(card.map, raw)
    probs = predict_matrix(card, matrix)
    totals = _score_totals(card.score.w, card.score.w0, matrix)

    n_cal = 0
    if args.calibrate is not None:
        n_cal = int(args.calibrate)
        if n_cal < 1:
            raise DataValidationError("--calibrate needs a positive row count")
        if n_cal >= raw.n:
            raise DataValidationError(
                f"--calibrate {n_cal} leaves no rows to evaluate (dataset has {raw.n})"
            )
        rng = np.random.default_rng(cfg.seed)
        perm = rng.permutation(raw.n)
        cal_idx = perm[:n_cal]
        eval_idx = np.sort(perm[n_cal:])
        iso = fit_isotonic(probs[cal_idx], labels[cal_idx])
        card = Scorecard(
            score=card.score,
            map=card.map,
            display_names=card.display_names,
            calibration=iso,
            metadata={**card.metadata, "calibrated_on_rows": n_cal},
        )
        save_card(card, outdir / "calibrated_card.json")
        labels = labels[eval_idx]
        probs = apply_isotonic(iso, probs[eval_idx])
        totals = totals[eval_idx]

    report = evaluate(labels, probs)
    rep = sparsity_report(card)
    doc = report.as_dict()
    doc["sparsity"] = {"group_sparsity": rep.group_sparsity, "overall_sparsity": rep.overall_sparsity}
    if n_cal:
        doc["n_calibration"] = n_cal
    _write_json(outdir / "report.json", doc)

    with open(outdir / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in ("auroc", "auprc", "brier", "hl_chi2", "smr", "n", "n_positive"):
            writer.writerow([key, _cell(doc[key])])
        writer.writerow(["group_sparsity", rep.group_sparsity])
        writer.writerow(["overall_sparsity", rep.overall_sparsity])

    two_class = len(np.unique(labels)) == 2
    if two_class:
        save_roc_curve(labels, probs, outdir / "roc.png")
        save_pr_curve(labels, probs, outdir / "pr.png")
    save_reliability_diagram(labels, probs, outdir / "calibration.png")
    save_score_histogram(totals, labels, outdir / "score_hist.png")
    _write_manifest(
        outdir / "manifest.json", "evaluate", list(args.argv), cfg, {"card": args.card, "data": args.data}
    )

    for key in ("auroc", "auprc", "brier", "hl_chi2", "smr"):
        print(f"{key:>10}: {_fmt(doc[key])}")
    print(f"{'n':>10}: {doc['n']}   positives: {doc['n_positive']}")
    return 0


def cmd_render(args) -> int:
    card = load_card(args.card)
    text = render_scorecard(card)
    if args.out:
        Path(args.out).write_text(text)
        print(f"card -> {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_synth(args) -> int:
    if args.seed is None:
        raise ConfigError("seed is mandatory: pass --seed")
    if args.n < 1:
        raise DataValidationError("--n must be >= 1")
    card = load_card(args.card)
    raw, risk, labels01 = sample_dataset(card, args.n, args.seed)
    out_path = Path(args.out)
    label_name = args.label or "label"
    if label_name in raw.variable_names:
        raise DataValidationError(f"label name {label_name!r} collides with a card variable")

    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(raw.variable_names) + [label_name])
        for i in range(raw.n):
            row = []
            for col in raw.columns:
                x = col[i]
                row.append("" if x is None else (x if isinstance(x, str) else repr(float(x))))
            row.append(str(int(labels01[i])))
            writer.writerow(row)

    truth_path = out_path.with_name(out_path.stem + "_truth.csv")
    with open(truth_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "true_risk"])
        for i, r in enumerate(risk):
            writer.writerow([i, repr(float(r))])

    card_copy = out_path.with_name(out_path.stem + "_card.json")
    save_card(card, card_copy)
    _write_manifest(
        out_path.with_suffix(out_path.suffix + ".manifest.json"),
        "synth",
        list(args.argv),
        None,
        {"card": args.card},
    )
    print(f"{raw.n} rows -> {out_path} (truth: {truth_path.name}, card: {card_copy.name})")
    return 0


def _add_config_flags(p: _Parser, train: bool = False):
    p.add_argument("--config", help="INI config file (flags override it)")
    p.add_argument("--label", help="name of the label column")
    p.add_argument("--seed", type=int, help="RNG seed (mandatory where randomness is used)")
    p.add_argument("--schema", help="INI sidecar: [schema] variable = continuous|categorical")
    if train:
        p.add_argument("--lambda", dest="lam", type=int, help="max nonzero coefficients")
        p.add_argument("--gamma", type=int, help="max raw variables used")
        p.add_argument("--bins", dest="bins_per_variable", type=int, help="bins per variable")
        p.add_argument("--beam-width", dest="beam_width", type=int)
        p.add_argument("--epsilon-u", dest="epsilon_u", type=float, help="pool loss tolerance")
        p.add_argument("--swap-candidates", dest="swap_candidates", type=int)
        p.add_argument("--pool-size", dest="pool_size", type=int)
        p.add_argument("--multiplier-grid", dest="multiplier_grid_size", type=int)
        p.add_argument("--swap-rounds", dest="swap_rounds", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--cv-folds", dest="cv_folds", type=int, help="0 = no holdout, k>=2 holds out 1/k")
        p.add_argument("--box", help="default coefficient box LO,HI")
        p.add_argument("--intercept-box", dest="intercept_box", help="intercept box LO,HI")
        p.add_argument("--box-var", action="append", help="per-variable box VAR=LO,HI (repeatable)")
        p.add_argument("--monotone", action="append", help="VAR=nonneg|nonpos (repeatable)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="riskcards", description="sparse integer risk scorecards")
    parser.add_argument("--version", action="version", version=f"riskcards {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn a pool of scorecards from a CSV")
    p.add_argument("data", help="training CSV with a header row")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p, train=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="append a risk column to a CSV")
    p.add_argument("card", help="serialized scorecard JSON")
    p.add_argument("data", help="input CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="metric report for a card on labeled data")
    p.add_argument("card")
    p.add_argument("data")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--calibrate", type=int, help="fit isotonic on this many held-out rows")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", help="print a scorecard as text")
    p.add_argument("card")
    p.add_argument("--out", help="write to file instead of stdout")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("synth", help="sample a synthetic dataset from a ground-truth card")
    p.add_argument("card", help="ground-truth scorecard JSON")
    p.add_argument("--n", type=int, required=True, help="number of rows")
    p.add_argument("--seed", type=int, help="RNG seed (mandatory)")
    p.add_argument("--label", help="name for the label column (default: label)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    args.argv = argv
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"error: file not found: {e.filename or e}", file=sys.stderr)
        return 2
    except RiskcardsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:  # pragma: no cover - internal errors
        import traceback

        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
