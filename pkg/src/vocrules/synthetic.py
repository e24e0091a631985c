"""Synthetic keyword-bag corpora with planted rules and known ground truth."""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .corpus import build_vocabulary, tokenize
from .errors import InvalidSpec

_FILLER_RE = re.compile(r"w\d+$")


@dataclass(frozen=True)
class PlantedRule:
    """Conjunction over keywords; ``(keyword, True)`` means the keyword must occur."""

    label: str
    conditions: tuple[tuple[str, bool], ...]

    def holds(self, keywords: set) -> bool:
        return all((kw in keywords) == present for kw, present in self.conditions)

    def to_dict(self):
        return {"label": self.label, "conditions": [[k, p] for k, p in self.conditions]}


@dataclass(frozen=True)
class SyntheticSpec:
    vocabulary_size: int = 2000
    document_count: int = 2000
    planted_rules: tuple[PlantedRule, ...] = ()
    keyword_rates: Mapping[str, float] = field(default_factory=dict)
    default_label: str = "neg"
    label_noise_rate: float = 0.0
    doc_length_mean: float = 30.0
    doc_length_min: int = 5
    zipf_exponent: float = 1.0
    seed: int = 0

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted({self.default_label} | {r.label for r in self.planted_rules}))

    def validate(self):
        if self.vocabulary_size < 1 or self.document_count < 1:
            raise InvalidSpec("vocabulary_size and document_count must be positive")
        if not 0.0 <= self.label_noise_rate < 0.5:
            raise InvalidSpec("label_noise_rate must lie in [0, 0.5)")
        if self.doc_length_mean <= 0 or self.doc_length_min < 0 or self.zipf_exponent < 0:
            raise InvalidSpec("bad document length or zipf parameters")
        for kw, rate in self.keyword_rates.items():
            if tokenize(kw) != [kw] or _FILLER_RE.match(kw):
                raise InvalidSpec(f"keyword {kw!r} must be one lowercase token distinct from filler words")
            if not 0.0 <= rate <= 1.0:
                raise InvalidSpec(f"rate of {kw!r} outside [0, 1]")
        for rule in self.planted_rules:
            if not rule.conditions:
                raise InvalidSpec("planted rules need at least one condition")
            for kw, _ in rule.conditions:
                if kw not in self.keyword_rates:
                    raise InvalidSpec(f"planted keyword {kw!r} has no rate")


@dataclass
class SyntheticCorpus:
    texts: list[str]
    labels: list[str]
    clean_labels: list[str]
    ground_truth: tuple[PlantedRule, ...]

    def __iter__(self):
        # (corpus, ground_truth) unpacking
        return iter(((self.texts, self.labels), self.ground_truth))


def generate_synthetic(spec: SyntheticSpec) -> SyntheticCorpus:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    weights = 1.0 / np.arange(1, spec.vocabulary_size + 1) ** spec.zipf_exponent
    weights /= weights.sum()
    lengths = np.maximum(spec.doc_length_min, rng.poisson(spec.doc_length_mean, spec.document_count))
    filler = rng.choice(spec.vocabulary_size, size=int(lengths.sum()), p=weights)
    keywords = sorted(spec.keyword_rates)
    rates = np.array([spec.keyword_rates[k] for k in keywords])
    kw_draws = rng.random((spec.document_count, len(keywords))) < rates
    flips = rng.random(spec.document_count) < spec.label_noise_rate
    labels_all = spec.labels

    texts, labels, clean = [], [], []
    start = 0
    for i, n in enumerate(lengths):
        tokens = [f"w{j}" for j in filler[start:start + n]]
        start += n
        present = {k for k, hit in zip(keywords, kw_draws[i]) if hit}
        tokens.extend(sorted(present))
        order = rng.permutation(len(tokens))
        texts.append(" ".join(tokens[j] for j in order))
        label = next((r.label for r in spec.planted_rules if r.holds(present)), spec.default_label)
        clean.append(label)
        if flips[i]:
            others = [x for x in labels_all if x != label]
            if others:
                label = others[int(rng.integers(len(others)))]
        labels.append(label)
    return SyntheticCorpus(texts, labels, clean, tuple(spec.planted_rules))


def place_keyword_rank(spec: SyntheticSpec, keyword: str, lo_fraction: float, hi_fraction: float,
                       min_df: int = 5, ngram_range=(1, 3), max_tries: int = 40):
    """Adjust the rate of ``keyword`` until its vocabulary rank r satisfies
    ``lo_fraction * V < r <= hi_fraction * V``.

    Returns ``(spec, corpus, vocabulary, rank)``. Bisection on the rate
    works because rank falls monotonically (up to sampling noise) as the
    keyword's document frequency rises.
    """
    lo_rate, hi_rate = 0.0, 1.0
    for _ in range(max_tries):
        rate = (lo_rate + hi_rate) / 2
        trial = replace(spec, keyword_rates={**spec.keyword_rates, keyword: rate})
        corpus = generate_synthetic(trial)
        vocab = build_vocabulary(corpus.texts, min_df, ngram_range)
        rank = vocab.rank_of(keyword)
        V = len(vocab)
        if rank is None or rank > hi_fraction * V:
            lo_rate = rate
        elif rank <= lo_fraction * V:
            hi_rate = rate
        else:
            return trial, corpus, vocab, rank
    raise InvalidSpec(f"could not place {keyword!r} between {lo_fraction} and {hi_fraction} of the vocabulary")


def write_corpus_csv(corpus: SyntheticCorpus, path, text_column="text", label_column="label") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", text_column, label_column])
        for i, (t, y) in enumerate(zip(corpus.texts, corpus.labels)):
            w.writerow([i, t, y])


def write_ground_truth(corpus: SyntheticCorpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"planted_rules": [r.to_dict() for r in corpus.ground_truth]}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def spec_from_mapping(data: Mapping) -> SyntheticSpec:
    """Build a spec from a parsed config mapping (``planted_rules`` as lists)."""
    data = dict(data)
    rules = []
    for r in data.pop("planted_rules", []):
        conds = []
        for c in r["conditions"]:
            if isinstance(c, str):
                conds.append((c.lstrip("!"), not c.startswith("!")))
            else:
                conds.append((str(c[0]), bool(c[1])))
        rules.append(PlantedRule(str(r["label"]), tuple(conds)))
    allowed = set(SyntheticSpec.__dataclass_fields__) - {"planted_rules"}
    unknown = set(data) - allowed
    if unknown:
        raise InvalidSpec(f"unknown synthetic spec keys: {sorted(unknown)}")
    return SyntheticSpec(planted_rules=tuple(rules), **data)


def expected_flip_bound(n: int, rate: float, z: float = 4.0) -> float:
    """Half-width of a ``z``-sigma binomial band for an observed flip rate."""
    return z * math.sqrt(rate * (1 - rate) / n)


__all__ = [
    "PlantedRule", "SyntheticSpec", "SyntheticCorpus", "generate_synthetic", "place_keyword_rank",
    "write_corpus_csv", "write_ground_truth", "spec_from_mapping",
]
