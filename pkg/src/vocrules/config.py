"""
Run configuration loaded from a TOML file.

Example::

    [dataset]
    path = "data/tweets.csv"        # relative to the config file
    mode = "text"                   # or "tabular"
    text_column = "tweet"
    label_column = "class"
    delimiter = ","

    [pipeline]
    min_df = 5
    ngram_range = [1, 3]

    [learner]
    kind = "foil"                   # or "ripper"

    [iteration]
    voc_threshold = 0.9
    max_iterations = 5

    [evaluation]
    thresholds = [0.0, 0.6, 0.7, 0.8, 0.9]
    seed = 0

    [output]
    directory = "runs/tweets"

Every block is optional except ``dataset``. Unknown blocks or keys raise
:class:`ConfigError`, as do missing input files.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .evaluation import DEFAULT_THRESHOLDS, SplitSpec
from .iterative import IterationConfig
from .learners import FOIL, RIPPER, LearnerKind

_SCHEMA = {
    "dataset": {"path": str, "mode": str, "text_column": str, "label_column": str, "id_column": str,
                "delimiter": str, "name": str},
    "pipeline": {"min_df": int, "ngram_range": list, "max_features": int},
    "learner": {"kind": str, "max_conditions": int, "grow_fraction": float, "mdl_slack_bits": float},
    "iteration": {"max_iterations": int, "voc_threshold": float, "initial_dictionary_fraction": float,
                  "expansion_factor": int, "patience": int, "max_rules_per_label": int, "n_jobs": int},
    "evaluation": {"thresholds": list, "seed": int, "test_fraction": float,
                   "validation_fraction_of_train": float, "stratified": bool},
    "output": {"directory": str, "formats": list},
}
_FORMATS = ("text", "json")


def _check_type(block, key, value, kind):
    ok = isinstance(value, kind) and not (kind is int and isinstance(value, bool))
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if not ok:
        raise ConfigError(f"[{block}] {key}: expected {kind.__name__}, got {type(value).__name__}")


def validate_raw(raw: dict) -> None:
    unknown = set(raw) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config blocks: {sorted(unknown)}")
    for block, values in raw.items():
        if not isinstance(values, dict):
            raise ConfigError(f"[{block}] must be a table")
        extra = set(values) - set(_SCHEMA[block])
        if extra:
            raise ConfigError(f"[{block}] unknown keys: {sorted(extra)}")
        for key, value in values.items():
            _check_type(block, key, value, _SCHEMA[block][key])


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path

    # -- blocks ----------------------------------------------------------

    def _get(self, block, key, default=None):
        return self.raw.get(block, {}).get(key, default)

    @property
    def dataset_path(self) -> Path:
        return self.base_dir / self._get("dataset", "path")

    @property
    def dataset_name(self) -> str:
        return self._get("dataset", "name") or Path(self._get("dataset", "path")).stem

    @property
    def mode(self) -> str:
        return self._get("dataset", "mode", "text")

    @property
    def text_column(self) -> str:
        return self._get("dataset", "text_column", "text")

    @property
    def label_column(self) -> str:
        return self._get("dataset", "label_column", "label")

    @property
    def id_column(self) -> str | None:
        return self._get("dataset", "id_column")

    @property
    def delimiter(self) -> str:
        return self._get("dataset", "delimiter", ",")

    @property
    def min_df(self) -> int:
        return self._get("pipeline", "min_df", 5)

    @property
    def ngram_range(self) -> tuple[int, int]:
        return tuple(self._get("pipeline", "ngram_range", [1, 3]))

    @property
    def max_features(self) -> int | None:
        return self._get("pipeline", "max_features")

    @property
    def seed(self) -> int:
        return self._get("evaluation", "seed", 0)

    @property
    def learner(self) -> LearnerKind:
        return LearnerKind(**self.raw.get("learner", {}))

    @property
    def iteration(self) -> IterationConfig:
        opts = {k: v for k, v in self.raw.get("iteration", {}).items() if k != "n_jobs"}
        return IterationConfig(seed=self.seed, **opts)

    @property
    def n_jobs(self) -> int:
        return self._get("iteration", "n_jobs", 1)

    @property
    def thresholds(self) -> tuple[float, ...]:
        return tuple(float(t) for t in self._get("evaluation", "thresholds", list(DEFAULT_THRESHOLDS)))

    @property
    def split_spec(self) -> SplitSpec:
        ev = self.raw.get("evaluation", {})
        return SplitSpec(ev.get("test_fraction", 0.2), ev.get("validation_fraction_of_train", 0.15),
                         self.seed, ev.get("stratified", True))

    @property
    def output_dir(self) -> Path:
        return self.base_dir / self._get("output", "directory", "runs")

    @property
    def formats(self) -> tuple[str, ...]:
        return tuple(self._get("output", "formats", list(_FORMATS)))

    def echo(self) -> dict:
        """The configuration as used, overrides included."""
        return copy.deepcopy(self.raw)

    # -- checks ----------------------------------------------------------

    def validate(self) -> None:
        validate_raw(self.raw)
        if "path" not in self.raw.get("dataset", {}):
            raise ConfigError("[dataset] path is required")
        if self.mode not in ("text", "tabular"):
            raise ConfigError(f"[dataset] mode must be 'text' or 'tabular', not {self.mode!r}")
        if len(self.delimiter) != 1:
            raise ConfigError("[dataset] delimiter must be one character")
        if not self.dataset_path.is_file():
            raise ConfigError(f"[dataset] path does not exist: {self.dataset_path}")
        ng = self.ngram_range
        if len(ng) != 2 or not all(isinstance(x, int) for x in ng) or not 1 <= ng[0] <= ng[1]:
            raise ConfigError("[pipeline] ngram_range must be two integers 1 <= lo <= hi")
        if self.min_df < 1:
            raise ConfigError("[pipeline] min_df must be >= 1")
        if self._get("learner", "kind", FOIL) not in (FOIL, RIPPER):
            raise ConfigError(f"[learner] kind must be {FOIL!r} or {RIPPER!r}")
        if self.n_jobs < 1:
            raise ConfigError("[iteration] n_jobs must be >= 1")
        bad = [f for f in self.formats if f not in _FORMATS]
        if bad:
            raise ConfigError(f"[output] unknown formats {bad}; choose from {list(_FORMATS)}")
        if not all(isinstance(t, (int, float)) and 0 <= t <= 1 for t in self._get("evaluation", "thresholds", [0])):
            raise ConfigError("[evaluation] thresholds must be numbers in [0, 1]")
        try:
            self.learner, self.iteration, self.split_spec
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path, seed: int | None = None, out: str | None = None) -> RunConfig:
    """Read and validate a TOML run config, applying command-line overrides."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if seed is not None:
        raw.setdefault("evaluation", {})["seed"] = seed
    base = path.resolve().parent
    if out is not None:
        raw.setdefault("output", {})["directory"] = str(Path(out).resolve())
    cfg = RunConfig(raw, base)
    cfg.validate()
    return cfg
