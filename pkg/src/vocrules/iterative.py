"""
Confidence-gated rule learning with vocabulary expansion.

Each rule is learned on the training data restricted to a small dictionary
(the most frequent features), then scored on the validation data by its
Value of Confidence ``p / (p + n)``. A rule that does not clear the
threshold sends its validation false positives to the training set and the
dictionary doubles before the rule is learned again. After the last
iteration the rule is kept anyway, flagged ``accepted=False``.
"""

from __future__ import annotations

import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corpus import Dataset
from .errors import NoRuleFound
from .learners import LearnerKind, learn_one_rule
from .rules import Rule, RuleSet, ScoredRule, coverage, cover_mask

ACCEPTED = "accepted"
EXPANDED = "expanded"
FALLBACK = "fallback"


@dataclass(frozen=True)
class IterationConfig:
    max_iterations: int = 5
    voc_threshold: float = 0.9
    initial_dictionary_fraction: float = 1 / 8
    expansion_factor: int = 2
    patience: int = 3
    max_rules_per_label: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.initial_dictionary_fraction <= 1:
            raise ValueError("initial_dictionary_fraction must lie in (0, 1]")
        if self.expansion_factor < 2:
            raise ValueError("expansion_factor must be >= 2")
        if not 0 <= self.voc_threshold <= 1:
            raise ValueError("voc_threshold must lie in [0, 1]")
        if self.max_iterations < 1 or self.patience < 1 or self.max_rules_per_label < 1:
            raise ValueError("max_iterations, patience and max_rules_per_label must be >= 1")

    def initial_size(self, V: int) -> int:
        return min(V, max(1, math.ceil(self.initial_dictionary_fraction * V)))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    dictionary_size: int | None
    rule: Rule
    voc: float
    decision: str
    moved_false_positives: int = 0


@dataclass
class IterationTrace:
    label: str
    rule_index: int
    records: list[IterationRecord] = field(default_factory=list)

    @property
    def dictionary_sizes(self) -> list[int | None]:
        return [r.dictionary_size for r in self.records]

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def to_dict(self, vocabulary=None) -> dict:
        from .rules import render
        return {
            "label": self.label,
            "rule_index": self.rule_index,
            "records": [
                {
                    "iteration": r.iteration,
                    "dictionary_size": r.dictionary_size,
                    "rule": render(r.rule, vocabulary),
                    "voc": r.voc,
                    "decision": r.decision,
                    "moved_false_positives": r.moved_false_positives,
                }
                for r in self.records
            ],
        }


def dump_traces(traces, vocabulary=None) -> str:
    """One JSON object per line, one line per learned rule."""
    return "".join(json.dumps(t.to_dict(vocabulary), sort_keys=True) + "\n" for t in traces)


def value_of_confidence(rule: Rule, validation: Dataset, target_label: str | None = None) -> float:
    """Precision of ``rule`` on ``validation``; 0 when it covers nothing."""
    p, n = coverage(rule, validation, target_label)
    return p / (p + n) if p + n else 0.0


@dataclass
class ConfidentRule:
    scored: ScoredRule
    trace: IterationTrace
    train: Dataset
    valid: Dataset


def _rule_seed(seed: int, label: str, rule_index: int, iteration: int):
    return [seed, zlib.crc32(label.encode("utf-8")), rule_index, iteration]


def learn_confident_rule(train: Dataset, valid: Dataset, target_label: str,
                         config: IterationConfig = IterationConfig(),
                         learner: LearnerKind = LearnerKind(), rule_index: int = 0) -> ConfidentRule:
    """Learn one rule, expanding the dictionary until its VoC clears the threshold.

    Returns the scored rule, its trace and the updated ``train``/``valid``
    views (false positives of rejected rules move from validation to
    training). :class:`NoRuleFound` from the learner propagates.
    """
    text = train.mode == "text"
    V = train.full_size if text else None
    size = config.initial_size(V) if text else None
    trace = IterationTrace(target_label, rule_index)
    for it in range(1, config.max_iterations + 1):
        tr = train.restrict(size) if text else train
        va = valid.restrict(size) if text else valid
        rule = learn_one_rule(learner, tr, target_label, seed=_rule_seed(config.seed, target_label, rule_index, it))
        voc = value_of_confidence(rule, va, target_label)
        if voc > config.voc_threshold:
            trace.records.append(IterationRecord(it, size, rule, voc, ACCEPTED))
            return ConfidentRule(ScoredRule(rule, voc, True, it, size), trace, train, valid)
        fp = cover_mask(rule, va) & ~valid.label_mask(target_label)
        moved = int(np.count_nonzero(fp))
        train = train.add(fp)
        valid = valid.remove(fp)
        last = it == config.max_iterations
        trace.records.append(IterationRecord(it, size, rule, voc, FALLBACK if last else EXPANDED, moved))
        if last:
            return ConfidentRule(ScoredRule(rule, voc, False, it, size), trace, train, valid)
        if text:
            size = min(config.expansion_factor * size, V)
    raise AssertionError("unreachable")


def _learn_label(train: Dataset, valid: Dataset, target_label: str, config: IterationConfig,
                 learner: LearnerKind):
    scored: list[ScoredRule] = []
    traces: list[IterationTrace] = []
    misses = 0
    while len(scored) < config.max_rules_per_label and train.count(target_label) > 0:
        try:
            res = learn_confident_rule(train, valid, target_label, config, learner, rule_index=len(scored))
        except NoRuleFound:
            break
        scored.append(res.scored)
        traces.append(res.trace)
        covered_pos = cover_mask(res.scored.rule, res.train) & res.train.label_mask(target_label)
        train = res.train.remove(covered_pos)
        valid = res.valid
        misses = 0 if res.scored.accepted else misses + 1
        if misses >= config.patience:
            break
    return scored, traces


def learn_ruleset_iterative(train: Dataset, valid: Dataset, target_label: str,
                            config: IterationConfig = IterationConfig(),
                            learner: LearnerKind = LearnerKind()):
    """Sequential covering around :func:`learn_confident_rule` for one label.

    Stops at ``max_rules_per_label`` rules, when no training example of the
    label is left, after ``patience`` consecutive fallback rules, or when the
    learner finds nothing. Covered positives leave the training set only;
    the dictionary starts from its initial size again for every rule.
    Returns ``(RuleSet, traces)``.
    """
    scored, traces = _learn_label(train, valid, target_label, config, learner)
    return RuleSet.from_learned(scored, _labels(train, valid), train.mode, train.fingerprint), traces


def _labels(train: Dataset, valid: Dataset):
    return tuple(sorted(set(train.label_set) | set(valid.label_set)))


def learn_multiclass(train: Dataset, valid: Dataset, config: IterationConfig = IterationConfig(),
                     learner: LearnerKind = LearnerKind(), n_jobs: int = 1):
    """One-vs-rest: an independent iterative run per label, concatenated.

    Per-label runs share only immutable inputs, so ``n_jobs > 1`` runs them
    on a thread pool; results are merged in label order either way.
    Returns ``(RuleSet, traces)``.
    """
    labels = _labels(train, valid)
    if len(labels) < 2:
        raise ValueError("one-vs-rest needs at least two labels")

    def run(label):
        return _learn_label(train, valid, label, config, learner)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, labels))
    else:
        results = [run(label) for label in labels]
    scored = [s for ss, _ in results for s in ss]
    traces = [t for _, ts in results for t in ts]
    return RuleSet.from_learned(scored, labels, train.mode, train.fingerprint), traces

