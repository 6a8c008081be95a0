"""Run configuration: INI-style config file plus CLI flag overrides.

Config files use key = value sections:

    [model]
    lambda = 8
    gamma = 4
    bins_per_variable = 20

    [search]
    beam_width = 10
    epsilon_u = 0.3
    swap_candidates = 10
    pool_size = 10
    multiplier_grid = 25
    swap_rounds = 1
    tol = 1e-8
    max_iter = 100

    [run]
    seed = 7
    label = outcome
    cv_folds = 0

    [box]
    default = -5, 5
    intercept = -100, 100
    age = 0, 5            ; any other key is a per-variable override

    [monotone]
    age = nonneg
    gcs = nonpos

Flags passed on the command line override file values. The seed is
mandatory for every run that involves randomness.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    lam: int = 10
    gamma: int = 5
    bins_per_variable: int = 20
    beam_width: int = 10
    epsilon_u: float = 0.3
    swap_candidates: int = 10
    pool_size: int = 10
    multiplier_grid_size: int = 25
    swap_rounds: int = 1
    tol: float = 1e-8
    max_iter: int = 100
    box_default: tuple[float, float] = (-5.0, 5.0)
    intercept_box: tuple[float, float] = (-100.0, 100.0)
    box_overrides: dict[str, tuple[float, float]] = field(default_factory=dict)
    monotone: dict[str, str] = field(default_factory=dict)
    cv_folds: int = 0
    seed: int | None = None
    label: str | None = None

    def validate(self, need_seed: bool = True):
        """Reject values outside their documented ranges before any compute."""
        checks = [
            (self.lam >= 1, "lambda must be >= 1"),
            (self.gamma >= 1, "gamma must be >= 1"),
            (self.bins_per_variable >= 2, "bins_per_variable must be >= 2"),
            (self.beam_width >= 1, "beam_width must be >= 1"),
            (self.epsilon_u >= 0, "epsilon_u must be >= 0"),
            (self.swap_candidates >= 1, "swap_candidates must be >= 1"),
            (self.pool_size >= 1, "pool_size must be >= 1"),
            (self.multiplier_grid_size >= 1, "multiplier_grid must be >= 1"),
            (self.swap_rounds >= 1, "swap_rounds must be >= 1"),
            (self.tol > 0, "tol must be > 0"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.cv_folds == 0 or self.cv_folds >= 2, "cv_folds must be 0 or >= 2"),
            (self.box_default[0] <= self.box_default[1], "box default is empty"),
            (self.intercept_box[0] <= self.intercept_box[1], "intercept box is empty"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for name, (a, b) in self.box_overrides.items():
            if a > b:
                raise ConfigError(f"box override for {name!r} is empty")
        for name, d in self.monotone.items():
            if d not in ("free", "nonneg", "nonpos"):
                raise ConfigError(f"monotone direction for {name!r} must be free|nonneg|nonpos")
        if need_seed and self.seed is None:
            raise ConfigError("seed is mandatory: set it in [run] or pass --seed")


def _parse_pair(text: str, where: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{where}: expected two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"{where}: expected numbers, got {text!r}") from None


def _get(parser, section, key, cast, current, where):
    if not parser.has_option(section, key):
        return current
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (ValueError, TypeError):
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def load_config(path) -> RunConfig:
    """Parse an INI config file into a RunConfig (missing keys keep defaults)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # variable names are case-sensitive
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}") from None

    known = {"model", "search", "run", "box", "monotone"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"{path}: unknown sections {sorted(extra)}")

    cfg = RunConfig()
    cfg.lam = _get(parser, "model", "lambda", int, cfg.lam, path)
    cfg.gamma = _get(parser, "model", "gamma", int, cfg.gamma, path)
    cfg.bins_per_variable = _get(parser, "model", "bins_per_variable", int, cfg.bins_per_variable, path)
    cfg.beam_width = _get(parser, "search", "beam_width", int, cfg.beam_width, path)
    cfg.epsilon_u = _get(parser, "search", "epsilon_u", float, cfg.epsilon_u, path)
    cfg.swap_candidates = _get(parser, "search", "swap_candidates", int, cfg.swap_candidates, path)
    cfg.pool_size = _get(parser, "search", "pool_size", int, cfg.pool_size, path)
    cfg.multiplier_grid_size = _get(parser, "search", "multiplier_grid", int, cfg.multiplier_grid_size, path)
    cfg.swap_rounds = _get(parser, "search", "swap_rounds", int, cfg.swap_rounds, path)
    cfg.tol = _get(parser, "search", "tol", float, cfg.tol, path)
    cfg.max_iter = _get(parser, "search", "max_iter", int, cfg.max_iter, path)
    cfg.seed = _get(parser, "run", "seed", int, cfg.seed, path)
    cfg.cv_folds = _get(parser, "run", "cv_folds", int, cfg.cv_folds, path)
    if parser.has_option("run", "label"):
        cfg.label = parser.get("run", "label")

    if parser.has_section("box"):
        for key in parser.options("box"):
            pair = _parse_pair(parser.get("box", key), f"[box] {key}")
            if key == "default":
                cfg.box_default = pair
            elif key == "intercept":
                cfg.intercept_box = pair
            else:
                cfg.box_overrides[key] = pair
    if parser.has_section("monotone"):
        for key in parser.options("monotone"):
            cfg.monotone[key] = parser.get("monotone", key).strip()
    return cfg


def as_dict(cfg: RunConfig) -> dict:
    """JSON-safe view of the resolved configuration, for manifests."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = list(v) if isinstance(v, tuple) else v
    out["box_overrides"] = {k: list(v) for k, v in cfg.box_overrides.items()}
    return out
