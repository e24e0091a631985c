"""
Propositional FOIL and a RIPPER-style learner (IREP* grow/prune with a
description-length stop).

Formulas, following the standard FOIL and RIPPER definitions:

* FOIL gain of a literal turning coverage ``(p0, n0)`` into ``(p1, n1)``::

      p1 * (log2(p1 / (p1 + n1)) - log2(p0 / (p0 + n0)))

* IREP* pruning value of a rule prefix on the prune split: ``(p - n) / (p + n)``.
* Description length of a rule set in bits = sum of rule theory bits +
  exception bits. A rule with ``k`` of ``n`` possible conditions costs
  ``0.5 * (log2 k + k log2(n/k) + (n - k) log2(n/(n - k)))``; exceptions cost
  ``log2 C(cov, fp) + log2 C(N - cov, fn)``.

RIPPER's global optimization passes are not implemented.

All routines work on boolean masks over the shared store of a
:class:`~vocrules.corpus.Dataset`, so positives and negatives are simply two
views of the same data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .corpus import Dataset
from .errors import NoRuleFound
from .rules import Condition, Op, Rule, RuleSet, ScoredRule, condition_mask, cover_mask

FOIL = "foil"
RIPPER = "ripper"


@dataclass(frozen=True)
class LearnerKind:
    kind: str = FOIL
    max_conditions: int = 16
    grow_fraction: float = 2 / 3
    mdl_slack_bits: float = 64.0

    def __post_init__(self):
        if self.kind not in (FOIL, RIPPER):
            raise ValueError(f"unknown learner {self.kind!r}")
        if not 0.0 < self.grow_fraction < 1.0:
            raise ValueError("grow_fraction must lie in (0, 1)")
        if self.max_conditions < 1:
            raise ValueError("max_conditions must be >= 1")


@dataclass(frozen=True)
class CandidateLiteral:
    condition: Condition
    gain: float


def foil_gain(p0: int, n0: int, p1: int, n1: int) -> float:
    if p1 == 0:
        return -math.inf
    return p1 * (math.log2(p1 / (p1 + n1)) - math.log2(p0 / (p0 + n0)))


def _gains(p0, n0, p1, n1) -> np.ndarray:
    p1 = np.asarray(p1, dtype=np.float64)
    n1 = np.asarray(n1, dtype=np.float64)
    base = math.log2(p0 / (p0 + n0))
    with np.errstate(divide="ignore", invalid="ignore"):
        g = p1 * (np.log2(p1 / (p1 + n1)) - base)
    g[p1 == 0] = -np.inf
    return g


# -- candidate enumeration -------------------------------------------------


def _column_counts(indptr: np.ndarray, rows: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Number of masked rows in each column of a column-major prefix."""
    hits = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(mask[rows], out=hits[1:])
    return hits[indptr[1:]] - hits[indptr[:-1]]


def _text_candidates(dataset: Dataset, pos: np.ndarray, neg: np.ndarray):
    indptr, rows = dataset.column_prefix()
    pc = _column_counts(indptr, rows, pos)
    nc = _column_counts(indptr, rows, neg)
    p0, n0 = int(pos.sum()), int(neg.sum())
    # interleaved so that flat index = 2*rank + (0 present | 1 absent)
    p1 = np.empty(2 * len(pc), dtype=np.int64)
    n1 = np.empty(2 * len(pc), dtype=np.int64)
    p1[0::2], p1[1::2] = pc, p0 - pc
    n1[0::2], n1[1::2] = nc, n0 - nc

    def condition(i):
        return Condition(int(i // 2), Op.PRESENT if i % 2 == 0 else Op.ABSENT)

    return p1, n1, condition


def _boundary_thresholds(pos_vals: np.ndarray, neg_vals: np.ndarray) -> np.ndarray:
    """Midpoints between adjacent distinct values where the class changes."""
    values = np.unique(np.concatenate([pos_vals, neg_vals]))
    if len(values) < 2:
        return np.zeros(0)
    has_pos = np.isin(values, pos_vals)
    has_neg = np.isin(values, neg_vals)
    pure = has_pos ^ has_neg
    same = pure[:-1] & pure[1:] & (has_pos[:-1] == has_pos[1:])
    lo, hi = values[:-1][~same], values[1:][~same]
    return (lo + hi) / 2.0


def _tabular_candidates(dataset: Dataset, pos: np.ndarray, neg: np.ndarray):
    conds, p1s, n1s = [], [], []
    for attr in dataset.attributes:
        col = dataset.column(attr.name)
        if attr.kind == "nominal":
            values = np.unique(col[pos | neg].astype(str))
            for v in values:
                hit = col == v
                conds.append(Condition(attr.name, Op.EQUALS, str(v)))
                p1s.append(int(np.count_nonzero(hit & pos)))
                n1s.append(int(np.count_nonzero(hit & neg)))
            continue
        pv = col[pos]
        nv = col[neg]
        pv = np.sort(pv[~np.isnan(pv)])
        nv = np.sort(nv[~np.isnan(nv)])
        cuts = _boundary_thresholds(pv, nv)
        le_p = np.searchsorted(pv, cuts, side="right")
        le_n = np.searchsorted(nv, cuts, side="right")
        ge_p = len(pv) - np.searchsorted(pv, cuts, side="left")
        ge_n = len(nv) - np.searchsorted(nv, cuts, side="left")
        for op, cp, cn in ((Op.LE, le_p, le_n), (Op.GE, ge_p, ge_n)):
            for t, a, b in zip(cuts, cp, cn):
                conds.append(Condition(attr.name, op, float(t)))
                p1s.append(int(a))
                n1s.append(int(b))
    return np.array(p1s, dtype=np.int64), np.array(n1s, dtype=np.int64), conds.__getitem__


def candidate_counts(dataset: Dataset, pos: np.ndarray, neg: np.ndarray):
    """``(p1, n1, condition_of_index)`` for every candidate literal.

    Candidates come in tie-break order: attribute rank, then operator
    (present < absent < equals < le < ge), then value.
    """
    if dataset.mode == "text":
        return _text_candidates(dataset, pos, neg)
    return _tabular_candidates(dataset, pos, neg)


def enumerate_candidates(dataset: Dataset, pos: np.ndarray, neg: np.ndarray) -> list[CandidateLiteral]:
    p1, n1, condition = candidate_counts(dataset, pos, neg)
    gains = _gains(int(pos.sum()), int(neg.sum()), p1, n1)
    return [CandidateLiteral(condition(i), float(g)) for i, g in enumerate(gains)]


# -- growing ---------------------------------------------------------------


def _grow(dataset: Dataset, pos: np.ndarray, neg: np.ndarray, label: str, max_conditions: int) -> Rule:
    """Greedy FOIL-gain specialization on the rows flagged by ``pos``/``neg``."""
    pos = pos.copy()
    neg = neg.copy()
    conds: list[Condition] = []
    if not pos.any():
        raise NoRuleFound("no positive examples to learn from")
    while neg.any() and len(conds) < max_conditions:
        p0, n0 = int(pos.sum()), int(neg.sum())
        p1, n1, condition = candidate_counts(dataset, pos, neg)
        if len(p1) == 0:
            break
        gains = _gains(p0, n0, p1, n1)
        best = int(np.argmax(gains))
        if not gains[best] > 0:
            break
        cond = condition(best)
        conds.append(cond)
        m = condition_mask(cond, dataset)
        pos &= m
        neg &= m
    if not conds:
        raise NoRuleFound(f"no literal with positive gain for label {label!r}")
    return Rule(label, tuple(conds))


def _split_masks(dataset: Dataset, label: str):
    pos = dataset.label_mask(label)
    return pos, dataset.row_mask() & ~pos


def foil_learn_one_rule(positives: Dataset, negatives: Dataset, label: str, max_conditions: int = 16) -> Rule:
    """Grow one rule separating ``positives`` from ``negatives`` (views of one store)."""
    if not positives.same_schema(negatives):
        raise ValueError("positives and negatives must share a store")
    return _grow(positives, positives.row_mask(), negatives.row_mask(), label, max_conditions)


def ripper_grow(positives_grow: Dataset, negatives_grow: Dataset, label: str, max_conditions: int = 16) -> Rule:
    return foil_learn_one_rule(positives_grow, negatives_grow, label, max_conditions)


def prune_values(rule: Rule, dataset: Dataset, pos: np.ndarray, neg: np.ndarray) -> list[float | None]:
    """``(p - n) / (p + n)`` of every prefix; ``None`` where the prefix covers nothing."""
    out = []
    cov = pos | neg
    for c in rule.conditions:
        cov = cov & condition_mask(c, dataset)
        p = int(np.count_nonzero(cov & pos))
        n = int(np.count_nonzero(cov & neg))
        out.append((p - n) / (p + n) if p + n else None)
    return out


def _prune(rule: Rule, dataset: Dataset, pos: np.ndarray, neg: np.ndarray) -> Rule:
    values = prune_values(rule, dataset, pos, neg)
    best_k, best_v = None, None
    for k, v in enumerate(values, 1):
        if v is not None and (best_v is None or v > best_v):
            best_k, best_v = k, v
    if best_k is None:
        return rule
    return rule.prefix(best_k)


def ripper_prune(rule: Rule, positives_prune: Dataset, negatives_prune: Dataset) -> Rule:
    """Keep the prefix with the best IREP* value; shorter prefixes win ties."""
    return _prune(rule, positives_prune, positives_prune.row_mask(), negatives_prune.row_mask())


def _random_half(mask: np.ndarray, fraction: float, rng: np.random.Generator):
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return mask.copy(), mask.copy()
    idx = rng.permutation(idx)
    n_grow = max(1, int(math.floor(fraction * len(idx) + 0.5)))
    grow = np.zeros_like(mask)
    grow[idx[:n_grow]] = True
    return grow, mask & ~grow


def _ripper_grow_prune(dataset: Dataset, pos: np.ndarray, neg: np.ndarray, label: str,
                       options: LearnerKind, rng: np.random.Generator):
    """One grown-and-pruned rule plus its ``(p, n)`` coverage on the prune partition."""
    pos_grow, pos_prune = _random_half(pos, options.grow_fraction, rng)
    neg_grow, neg_prune = _random_half(neg, options.grow_fraction, rng)
    rule = _prune(_grow(dataset, pos_grow, neg_grow, label, options.max_conditions), dataset, pos_prune, neg_prune)
    m = cover_mask(rule, dataset)
    return rule, int(np.count_nonzero(m & pos_prune)), int(np.count_nonzero(m & neg_prune))


def _ripper_one_rule(dataset: Dataset, pos: np.ndarray, neg: np.ndarray, label: str,
                     options: LearnerKind, rng: np.random.Generator) -> Rule:
    return _ripper_grow_prune(dataset, pos, neg, label, options, rng)[0]


def learn_one_rule(kind: LearnerKind, train: Dataset, target_label: str, seed=0) -> Rule:
    """Single-rule entry point used by the iterative wrapper.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`; it
    only matters for RIPPER's grow/prune split.
    """
    pos, neg = _split_masks(train, target_label)
    if kind.kind == FOIL:
        return _grow(train, pos, neg, target_label, kind.max_conditions)
    return _ripper_one_rule(train, pos, neg, target_label, kind, np.random.default_rng(seed))


# -- description length ----------------------------------------------------


def _log2_binom(n: int, k: int) -> float:
    if k < 0 or k > n:
        return 0.0
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / math.log(2)


def rule_theory_bits(n_conditions: int, n_possible: int) -> float:
    k, n = n_conditions, max(n_possible, n_conditions + 1)
    s = k * math.log2(n / k) + (n - k) * math.log2(n / (n - k))
    return 0.5 * (math.log2(k) + s)


def exception_bits(n_total: int, n_covered: int, false_pos: int, false_neg: int) -> float:
    return _log2_binom(n_covered, false_pos) + _log2_binom(n_total - n_covered, false_neg)


def possible_conditions(dataset: Dataset, pos: np.ndarray, neg: np.ndarray) -> int:
    if dataset.mode == "text":
        return 2 * dataset.n_features
    return len(candidate_counts(dataset, pos, neg)[0])


def description_length(rules: list[Rule], dataset: Dataset, pos: np.ndarray, neg: np.ndarray,
                       n_possible: int) -> float:
    covered = np.zeros_like(pos)
    theory = 0.0
    for r in rules:
        covered |= cover_mask(r, dataset)
        theory += rule_theory_bits(len(r), n_possible)
    n_cov = int(np.count_nonzero(covered & (pos | neg)))
    fp = int(np.count_nonzero(covered & neg))
    fn = int(np.count_nonzero(pos & ~covered))
    return theory + exception_bits(int(pos.sum() + neg.sum()), n_cov, fp, fn)


# -- rule sets -------------------------------------------------------------


def _training_scored(rules: list[Rule], dataset: Dataset, pos, neg) -> list[ScoredRule]:
    """Rules scored by training precision (there is no validation split)."""
    out = []
    ds = dataset.n_features if dataset.mode == "text" else None
    for r in rules:
        m = cover_mask(r, dataset)
        p = int(np.count_nonzero(m & pos))
        n = int(np.count_nonzero(m & neg))
        out.append(ScoredRule(r, p / (p + n) if p + n else 0.0, False, 0, ds))
    return out


def _covering_loop(dataset: Dataset, label: str, max_rules: int,
                   next_rule: Callable[[np.ndarray, np.ndarray, int], Rule],
                   accept: Callable[[list[Rule], Rule], bool] | None = None) -> list[Rule]:
    pos, neg = _split_masks(dataset, label)
    remaining = pos.copy()
    rules: list[Rule] = []
    while remaining.any() and len(rules) < max_rules:
        try:
            rule = next_rule(remaining, neg, len(rules))
        except NoRuleFound:
            break
        if accept is not None and not accept(rules, rule):
            break
        rules.append(rule)
        remaining &= ~cover_mask(rule, dataset)
    return rules


def foil_learn_rules(dataset: Dataset, target_label: str, options: LearnerKind = LearnerKind(),
                     max_rules: int = 10) -> list[Rule]:
    """Plain FOIL sequential covering: rules until positives run out."""
    return _covering_loop(
        dataset, target_label, max_rules,
        lambda rem, neg, i: _grow(dataset, rem, neg, target_label, options.max_conditions))


def ripper_learn_rules(dataset: Dataset, target_label: str, options: LearnerKind = LearnerKind(RIPPER),
                       max_rules: int = 10, seed: int = 0) -> list[Rule]:
    """IREP* covering with the description-length stop.

    A new rule is discarded and learning stops when it pushes the
    description length more than ``mdl_slack_bits`` above the smallest
    value seen so far, or when at least half of what it covers on its prune
    partition is negative (the usual IREP error-rate check). The finished
    list is then simplified: rules are visited from last to first and
    dropped whenever dropping them lowers the total description length.
    """
    pos, neg = _split_masks(dataset, target_label)
    n_possible = possible_conditions(dataset, pos, neg)
    state = {"best": description_length([], dataset, pos, neg, n_possible), "prune": (0, 0)}

    def next_rule(rem, neg_, i):
        rule, p, n = _ripper_grow_prune(dataset, rem, neg_, target_label, options, np.random.default_rng([seed, i]))
        state["prune"] = (p, n)
        return rule

    def accept(rules, rule):
        p, n = state["prune"]
        if p + n and n / (p + n) >= 0.5:
            return False
        dl = description_length(rules + [rule], dataset, pos, neg, n_possible)
        if dl > state["best"] + options.mdl_slack_bits:
            return False
        state["best"] = min(state["best"], dl)
        return True

    rules = _covering_loop(dataset, target_label, max_rules, next_rule, accept)
    return simplify_by_description_length(rules, dataset, pos, neg, n_possible)


def simplify_by_description_length(rules: list[Rule], dataset: Dataset, pos: np.ndarray, neg: np.ndarray,
                                   n_possible: int) -> list[Rule]:
    """Drop rules, last first, whenever that makes the description length smaller."""
    rules = list(rules)
    current = description_length(rules, dataset, pos, neg, n_possible)
    for i in range(len(rules) - 1, -1, -1):
        candidate = rules[:i] + rules[i + 1:]
        dl = description_length(candidate, dataset, pos, neg, n_possible)
        if dl < current:
            rules, current = candidate, dl
    return rules


def ripper_learn_ruleset(dataset: Dataset, target_label: str, options: LearnerKind = LearnerKind(RIPPER),
                         max_rules: int = 10, seed: int = 0) -> RuleSet:
    rules = ripper_learn_rules(dataset, target_label, options, max_rules, seed)
    pos, neg = _split_masks(dataset, target_label)
    return RuleSet.from_learned(_training_scored(rules, dataset, pos, neg), dataset.label_set,
                                dataset.mode, dataset.fingerprint)


def learn_baseline(dataset: Dataset, kind: LearnerKind, max_rules_per_label: int = 10, seed: int = 0,
                   labels=None) -> RuleSet:
    """Ordinary one-vs-rest learner on the full data, no validation split."""
    scored = []
    for i, label in enumerate(dataset.label_set if labels is None else labels):
        if kind.kind == FOIL:
            rules = foil_learn_rules(dataset, label, kind, max_rules_per_label)
        else:
            rules = ripper_learn_rules(dataset, label, kind, max_rules_per_label, seed=seed + i)
        pos, neg = _split_masks(dataset, label)
        scored.extend(_training_scored(rules, dataset, pos, neg))
    return RuleSet.from_learned(scored, dataset.label_set, dataset.mode, dataset.fingerprint)
