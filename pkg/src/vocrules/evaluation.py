"""Splitting, threshold sweeps and baseline-versus-iterative comparisons."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Dataset
from .errors import InsufficientData
from .iterative import IterationConfig, IterationTrace, learn_multiclass
from .learners import LearnerKind, learn_baseline
from .memory import measure_peak_memory
from .rules import RuleSet, predict_dataset

DEFAULT_THRESHOLDS = (0.0, 0.6, 0.7, 0.8, 0.9)
MIN_PER_LABEL = 10


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    validation_fraction_of_train: float = 0.15
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        for name in ("test_fraction", "validation_fraction_of_train"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


def _allocate(counts: Sequence[int], fraction: float) -> list[int]:
    """Largest-remainder apportionment of ``round(fraction * sum(counts))``.

    Each group gets ``floor`` or ``ceil`` of its exact share, so every
    group is within one example of its proportional size.
    """
    exact = [c * fraction for c in counts]
    base = [math.floor(x) for x in exact]
    total = math.floor(sum(counts) * fraction + 0.5)
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:max(0, total - sum(base))]:
        base[i] += 1
    return base


def split(dataset: Dataset, spec: SplitSpec = SplitSpec()):
    """Partition ``dataset`` into ``(train, valid, test)`` views.

    The test share is taken first, then the validation share of what
    remains. With ``stratified`` every label is split separately (labels in
    sorted order, one seeded permutation each), otherwise the whole set is
    one group.
    """
    codes = dataset.label_codes
    rows = dataset.rows
    if spec.stratified:
        groups = [rows[codes == c] for c in np.unique(codes)]
        small = [len(g) for g in groups if len(g) < MIN_PER_LABEL]
        if small:
            raise InsufficientData(f"stratified split needs at least {MIN_PER_LABEL} examples per label")
    else:
        groups = [rows]
    if not len(rows):
        raise InsufficientData("cannot split an empty dataset")
    counts = [len(g) for g in groups]
    n_test = _allocate(counts, spec.test_fraction)
    n_valid = _allocate([c - t for c, t in zip(counts, n_test)], spec.validation_fraction_of_train)
    rng = np.random.default_rng(spec.seed)
    parts = ([], [], [])
    for g, t, v in zip(groups, n_test, n_valid):
        perm = rng.permutation(g)
        parts[2].append(perm[:t])
        parts[1].append(perm[t:t + v])
        parts[0].append(perm[t + v:])
    train, valid, test = (dataset.with_rows(np.concatenate(p)) for p in parts)
    return train, valid, test


def stratified_subsample(labels: Sequence[str], n: int, seed: int = 0) -> np.ndarray:
    """Sorted indices of ``n`` items keeping label proportions (largest remainder)."""
    labels = np.asarray(labels)
    if n >= len(labels):
        return np.arange(len(labels))
    names = sorted(set(labels.tolist()))
    groups = [np.flatnonzero(labels == name) for name in names]
    take = _allocate([len(g) for g in groups], n / len(labels))
    rng = np.random.default_rng(seed)
    picked = [rng.permutation(g)[:k] for g, k in zip(groups, take)]
    return np.sort(np.concatenate(picked))


@dataclass(frozen=True)
class ThresholdRow:
    threshold: float | None
    predicted: int
    correct: int
    precision: float
    abstained: int

    @property
    def incorrect(self) -> int:
        return self.predicted - self.correct


@dataclass
class EvaluationReport:
    rows: list[ThresholdRow]
    total: int
    correct: int
    predicted: int
    accuracy: float
    peak_memory_bytes: int | None = None
    wall_time: float | None = None

    def row(self, threshold) -> ThresholdRow:
        return next(r for r in self.rows if r.threshold == threshold)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "total": self.total,
            "correct": self.correct,
            "predicted": self.predicted,
            "accuracy": self.accuracy,
            "thresholds": [
                {"threshold": r.threshold, "predicted": r.predicted, "correct": r.correct,
                 "precision": r.precision, "abstained": r.abstained}
                for r in self.rows
            ],
        }
        if include_timing:
            d["peak_memory_bytes"] = self.peak_memory_bytes
            d["wall_time"] = self.wall_time
        return d


def _counts(ruleset: RuleSet, test: Dataset, threshold):
    preds = predict_dataset(ruleset, test, threshold)
    predicted = sum(p is not None for p in preds)
    correct = sum(p == y for p, y in zip(preds, test.labels))
    return predicted, correct


def evaluate(ruleset: RuleSet, test: Dataset, thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> EvaluationReport:
    """Threshold sweep plus plain accuracy of the unfiltered rule set.

    A row for threshold ``t`` only uses rules with ``voc > t``; its
    precision is ``correct / predicted`` (0 when nothing is predicted).
    ``accuracy`` uses every rule and counts abstentions as errors.
    """
    n = len(test)
    rows = []
    for t in thresholds:
        predicted, correct = _counts(ruleset, test, t)
        rows.append(ThresholdRow(t, predicted, correct, correct / predicted if predicted else 0.0, n - predicted))
    predicted, correct = _counts(ruleset, test, None)
    return EvaluationReport(rows, n, correct, predicted, correct / n if n else 0.0)


# -- comparison runs -----------------------------------------------------------


@dataclass
class RunResult:
    method: str
    ruleset: RuleSet
    report: EvaluationReport
    traces: list[IterationTrace] = field(default_factory=list)


@dataclass
class ComparisonRecord:
    name: str
    learner: str
    baseline: RunResult
    iterative: RunResult

    def rows(self):
        for r in (self.baseline, self.iterative):
            yield self.name, self.learner, r


def _timed(fn, measure_memory: bool):
    if measure_memory:
        return measure_peak_memory(fn)
    return measure_peak_memory(fn, isolate=False)


def compare_runs(dataset: Dataset, config: IterationConfig = IterationConfig(),
                 learner_kind: LearnerKind = LearnerKind(), split_spec: SplitSpec = SplitSpec(),
                 thresholds: Sequence[float] = DEFAULT_THRESHOLDS, name: str = "dataset",
                 measure_memory: bool = True) -> ComparisonRecord:
    """Baseline learner on all training data versus the iterative learner.

    Both runs see the same test split. The baseline gets training plus
    validation data and the whole dictionary; the iterative run keeps the
    validation part for gating. Peak memory and wall time are measured
    around the learning step only.
    """
    train, valid, test = split(dataset, split_spec)
    full_train = train.add(valid.row_mask())
    labels = tuple(sorted(set(train.label_set) | set(valid.label_set)))

    base = _timed(lambda: learn_baseline(full_train, learner_kind, config.max_rules_per_label,
                                         config.seed, labels), measure_memory)
    it = _timed(lambda: learn_multiclass(train, valid, config, learner_kind), measure_memory)

    results = []
    for method, m, ruleset, traces in (("baseline", base, base.result, []),
                                       ("iterative", it, it.result[0], it.result[1])):
        report = evaluate(ruleset, test, thresholds)
        report.peak_memory_bytes = m.peak_bytes
        report.wall_time = m.wall_time
        results.append(RunResult(method, ruleset, report, traces))
    return ComparisonRecord(name, learner_kind.kind, *results)


# -- formatting ------------------------------------------------------------------


def _table(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(c.rjust(w) if c[:1].isdigit() else c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _pct(x: float) -> str:
    return f"{100 * x:.2f}%"


def _threshold_name(t) -> str:
    return "all" if t is None else f"t={t:g}"


def format_threshold_table(reports: Sequence[tuple[str, EvaluationReport]]) -> str:
    """Precision and predicted counts per threshold, one row per run."""
    if not reports:
        return ""
    thresholds = [r.threshold for r in reports[0][1].rows]
    header = ["run"] + [_threshold_name(t) for t in thresholds]
    body = []
    for name, rep in reports:
        body.append([name] + [f"{_pct(r.precision)} ({r.predicted})" for r in rep.rows])
    return _table(header, body)


def format_accuracy_table(rows: Sequence[tuple[str, str, EvaluationReport]], include_timing: bool = True) -> str:
    """Accuracy per (dataset, method), with memory and wall time when known."""
    header = ["dataset", "method", "accuracy", "abstained"]
    if include_timing:
        header += ["memory GiB", "time s"]
    body = []
    for name, method, rep in rows:
        r = [name, method, _pct(rep.accuracy), str(rep.total - rep.predicted)]
        if include_timing:
            mem = "-" if rep.peak_memory_bytes is None else f"{rep.peak_memory_bytes / 2**30:.3f}"
            r += [mem, "-" if rep.wall_time is None else f"{rep.wall_time:.2f}"]
        body.append(r)
    return _table(header, body)


def format_comparison(records: Sequence[ComparisonRecord]) -> str:
    rows = [(rec.name, f"{rec.learner} {r.method}", r.report) for rec in records for _, _, r in rec.rows()]
    return format_accuracy_table(rows)


def dump_report(report: EvaluationReport, config: dict | None = None, include_timing: bool = False,
                **extra) -> str:
    """Stable JSON text for one run; timing is left out unless asked for."""
    d = {"report": report.to_dict(include_timing), "config": config or {}}
    d.update(extra)
    return json.dumps(d, indent=2, sort_keys=True) + "\n"
