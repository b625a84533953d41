"""Run configuration: defaults, JSON loading, and key=value overrides.

Every knob of the pipeline lives in PipelineConfig.  An empty file or a
missing file yields the defaults unchanged; unknown keys and out-of-range
values are hard errors rather than warnings, so a typo cannot silently
run a different experiment.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

from .errors import MalformedConfig, OutOfRange, UnknownKey


@dataclass
class PipelineConfig:
    # Budget
    train_episodes: int = 50
    steps_per_episode: int = 100
    test_episodes: int = 10
    # Exploration
    epsilon_start: float = 0.9
    epsilon_end: float = 0.1
    gamma: float = 0.95
    # Networks
    rgcn_hidden: int = 32
    rgcn_out: int = 64
    predictor_hidden: int = 100
    target_sync: int = 10
    buffer_capacity: int = 16
    batch_size: int = 8
    learning_rate: float = 0.01
    # Graph growth
    cluster_k: Optional[int] = None  # None: max(2, floor(sqrt(node count)))
    cluster_signal: str = "both"  # both | structure | feature
    node_cap: Optional[int] = None  # None: 4 x original feature count
    prune_top_k: Optional[int] = None  # None: 2 x original feature count
    max_new_features_per_step: int = 64
    prune_schedule_fraction: float = 0.30
    episode_start: str = "roots"  # roots | global_best
    operand_excludes_head: bool = True
    safe_guards: bool = True
    # Evaluation
    evaluator: str = "forest"  # forest | tree | ridge
    metric_averaging: str = "weighted"  # weighted | macro
    cv_folds: int = 5
    reward_split: str = "same"  # same | divided
    forest_trees: int = 100
    forest_max_depth: int = 10
    forest_min_leaf: int = 2
    mi_bins: int = 20
    # Data handling
    train_fraction: float = 0.8
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}
_OPTIONAL_INT = {"cluster_k", "node_cap", "prune_top_k"}
_CHOICES = {
    "cluster_signal": {"both", "structure", "feature"},
    "episode_start": {"roots", "global_best"},
    "evaluator": {"forest", "tree", "ridge"},
    "metric_averaging": {"weighted", "macro"},
    "reward_split": {"same", "divided"},
}
_POSITIVE_INT = {
    "train_episodes",
    "steps_per_episode",
    "rgcn_hidden",
    "rgcn_out",
    "predictor_hidden",
    "target_sync",
    "buffer_capacity",
    "batch_size",
    "max_new_features_per_step",
    "forest_trees",
    "forest_max_depth",
    "forest_min_leaf",
    "cv_folds",
}
_NONNEGATIVE_INT = {"test_episodes", "seed"}
_UNIT_INTERVAL = {"epsilon_start", "epsilon_end", "gamma", "prune_schedule_fraction"}


def _coerce(key: str, value):
    """Turn a JSON value or an override string into the field's type."""
    field = _FIELDS[key]
    if isinstance(value, str):
        text = value.strip()
        low = text.lower()
        if key in _OPTIONAL_INT and low in ("none", "null", ""):
            return None
        if field.type in ("bool",):
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise OutOfRange(key, value, "expected a boolean")
        if field.type in ("int",) or key in _OPTIONAL_INT:
            try:
                return int(text)
            except ValueError:
                raise OutOfRange(key, value, "expected an integer") from None
        if field.type in ("float",):
            try:
                return float(text)
            except ValueError:
                raise OutOfRange(key, value, "expected a number") from None
        return text
    if value is None and key in _OPTIONAL_INT:
        return None
    if isinstance(value, bool):
        if field.type != "bool":
            raise OutOfRange(key, value, f"expected {field.type}")
        return value
    if isinstance(value, int) and field.type in ("int", "float") or key in _OPTIONAL_INT:
        return int(value) if field.type != "float" else float(value)
    if isinstance(value, float):
        if field.type == "float":
            return value
        if field.type == "int" and value.is_integer():
            return int(value)
        raise OutOfRange(key, value, f"expected {field.type}")
    if field.type == "str" and isinstance(value, str):
        return value
    raise OutOfRange(key, value, f"expected {field.type}")


def validate(config: PipelineConfig) -> PipelineConfig:
    """Range-check every field; returns the config for chaining."""
    c = config
    for key in _POSITIVE_INT:
        if getattr(c, key) < 1:
            raise OutOfRange(key, getattr(c, key), "must be >= 1")
    for key in _NONNEGATIVE_INT:
        if getattr(c, key) < 0:
            raise OutOfRange(key, getattr(c, key), "must be >= 0")
    for key in _UNIT_INTERVAL:
        v = getattr(c, key)
        if not 0.0 <= v <= 1.0:
            raise OutOfRange(key, v, "must be in [0, 1]")
    if c.epsilon_end > c.epsilon_start:
        raise OutOfRange("epsilon_end", c.epsilon_end, "must not exceed epsilon_start")
    if not 0.0 < c.train_fraction < 1.0:
        raise OutOfRange("train_fraction", c.train_fraction, "must be in (0, 1)")
    if not 0.0 < c.learning_rate:
        raise OutOfRange("learning_rate", c.learning_rate, "must be positive")
    if c.batch_size > c.buffer_capacity:
        raise OutOfRange("batch_size", c.batch_size, "must fit in the replay buffer")
    for key, allowed in _CHOICES.items():
        v = getattr(c, key)
        if v not in allowed:
            raise OutOfRange(key, v, f"must be one of {sorted(allowed)}")
    for key in _OPTIONAL_INT:
        v = getattr(c, key)
        if v is not None and v < 1:
            raise OutOfRange(key, v, "must be >= 1 or null")
    return c


def parse_config(path: Optional[str] = None, overrides: Optional[list[str]] = None) -> PipelineConfig:
    """Build a validated config from an optional JSON file plus overrides.

    overrides are "key=value" strings applied after the file, e.g. from
    repeated --set flags.  No file and no overrides gives the defaults.
    """
    values: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise MalformedConfig(f"cannot read config {path}: {exc}") from None
        if text.strip():
            try:
                loaded = json.loads(text)
            except json.JSONDecodeError as exc:
                raise MalformedConfig(f"config {path} is not valid JSON: {exc}") from None
            if not isinstance(loaded, dict):
                raise MalformedConfig(f"config {path} must hold a JSON object")
            values.update(loaded)

    for item in overrides or []:
        if "=" not in item:
            raise MalformedConfig(f"override {item!r} is not KEY=VALUE")
        key, _, raw = item.partition("=")
        values[key.strip()] = raw

    kwargs = {}
    for key, value in values.items():
        if key not in _FIELDS:
            raise UnknownKey(key)
        kwargs[key] = _coerce(key, value)
    return validate(PipelineConfig(**kwargs))
