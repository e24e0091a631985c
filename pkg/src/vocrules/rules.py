"""
Conjunctive if-then rules, rule sets and their text file format.

Rule-set file grammar (version 1)::

    file      := "vocrules-ruleset 1" NL header* rule* "end-ruleset" NL
    header    := "mode " ("text" | "tabular") NL
               | "schema " HEX NL
               | "labels " JSON-ARRAY NL
               | "rules " INT NL
    rule      := "rule " JSON-STRING " voc=" FLOAT " accepted=" ("0"|"1")
                 " iteration=" INT " dictionary_size=" (INT | "-") NL
                 condition+ "end" NL
    condition := "  " ATTR " " OP [" " VALUE] NL
    ATTR      := INT (feature rank, text mode) | JSON-STRING (attribute name)
    OP        := "present" | "absent" | "equals" | "le" | "ge"
    VALUE     := JSON-STRING (equals) | FLOAT (le, ge)

Floats are written with ``repr`` so they round-trip exactly. Lines starting
with ``#`` and blank lines are ignored. All four header lines are required.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .corpus import Dataset, Example
from .errors import ParseError, SchemaMismatch

FORMAT_TAG = "vocrules-ruleset"
FORMAT_VERSION = 1


class Op(str, enum.Enum):
    PRESENT = "present"
    ABSENT = "absent"
    EQUALS = "equals"
    LE = "le"
    GE = "ge"


# tie-break order used by the learners
OP_ORDER = {Op.PRESENT: 0, Op.ABSENT: 1, Op.EQUALS: 2, Op.LE: 3, Op.GE: 4}


@dataclass(frozen=True)
class Condition:
    attribute: int | str
    op: Op
    value: str | float | None = None

    def __post_init__(self):
        object.__setattr__(self, "op", Op(self.op))
        if self.op in (Op.PRESENT, Op.ABSENT):
            if not isinstance(self.attribute, (int, np.integer)) or self.value is not None:
                raise ValueError("present/absent take an integer feature rank and no value")
            object.__setattr__(self, "attribute", int(self.attribute))
        elif self.op is Op.EQUALS:
            if not isinstance(self.value, str):
                raise ValueError("equals needs a nominal symbol")
        else:
            if not isinstance(self.value, (int, float, np.floating, np.integer)) or math.isnan(self.value):
                raise ValueError("threshold operators need a real value")
            object.__setattr__(self, "value", float(self.value))

    def holds(self, example: Example) -> bool:
        if self.op in (Op.PRESENT, Op.ABSENT):
            if example.present_features is None:
                raise SchemaMismatch("text condition applied to a tabular example")
            return (self.attribute in example.present_features) == (self.op is Op.PRESENT)
        values = example.attribute_values
        if values is None or self.attribute not in values:
            raise SchemaMismatch(f"example has no attribute {self.attribute!r}")
        v = values[self.attribute]
        if self.op is Op.EQUALS:
            return v == self.value
        if isinstance(v, str) or v is None or math.isnan(v):
            return False
        return v <= self.value if self.op is Op.LE else v >= self.value


def _contradicts(a: Condition, b: Condition) -> bool:
    if a.attribute != b.attribute:
        return False
    ops = {a.op, b.op}
    if ops == {Op.PRESENT, Op.ABSENT}:
        return True
    if a.op is Op.EQUALS and b.op is Op.EQUALS:
        return a.value != b.value
    if ops == {Op.LE, Op.GE}:
        le, ge = (a, b) if a.op is Op.LE else (b, a)
        return ge.value > le.value
    return False


@dataclass(frozen=True)
class Rule:
    label: str
    conditions: tuple[Condition, ...]

    def __post_init__(self):
        conds = tuple(self.conditions)
        object.__setattr__(self, "conditions", conds)
        if not conds:
            raise ValueError("a rule needs at least one condition")
        for i, a in enumerate(conds):
            for b in conds[i + 1:]:
                if _contradicts(a, b):
                    raise ValueError(f"contradictory conditions {a} and {b}")

    def __len__(self):
        return len(self.conditions)

    def prefix(self, k: int) -> "Rule":
        return Rule(self.label, self.conditions[:k])


@dataclass(frozen=True)
class ScoredRule:
    rule: Rule
    voc: float
    accepted: bool
    iteration: int = 0
    dictionary_size: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.voc <= 1.0:
            raise ValueError(f"voc {self.voc} outside [0, 1]")

    @property
    def label(self):
        return self.rule.label


@dataclass(frozen=True)
class RuleSet:
    """Scored rules ordered by descending VoC, earlier-learned first on ties."""

    rules: tuple[ScoredRule, ...]
    label_set: tuple[str, ...]
    mode: str
    schema_fingerprint: str

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "label_set", tuple(self.label_set))
        for a, b in zip(self.rules, self.rules[1:]):
            if a.voc < b.voc:
                raise ValueError("rules must be sorted by descending voc")

    @classmethod
    def from_learned(cls, scored: Iterable[ScoredRule], label_set, mode, schema_fingerprint) -> "RuleSet":
        """Build from rules in learning order; the sort is stable so ties keep that order."""
        ordered = sorted(scored, key=lambda s: -s.voc)
        return cls(tuple(ordered), tuple(label_set), mode, schema_fingerprint)

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def for_label(self, label: str) -> list[ScoredRule]:
        return [s for s in self.rules if s.label == label]

    def above(self, voc_threshold: float | None) -> list[ScoredRule]:
        if voc_threshold is None:
            return list(self.rules)
        return [s for s in self.rules if s.voc > voc_threshold]


# -- matching --------------------------------------------------------------


def matches(rule: Rule, example: Example) -> bool:
    return all(c.holds(example) for c in rule.conditions)


def condition_mask(cond: Condition, dataset: Dataset) -> np.ndarray:
    """Store-level mask of rows satisfying ``cond`` (ignores the row selection)."""
    if cond.op in (Op.PRESENT, Op.ABSENT):
        if dataset.mode != "text":
            raise SchemaMismatch("text condition applied to tabular data")
        m = dataset.feature_mask(cond.attribute)
        return m if cond.op is Op.PRESENT else ~m
    if dataset.mode != "tabular":
        raise SchemaMismatch("tabular condition applied to text data")
    col = dataset.column(cond.attribute)
    if cond.op is Op.EQUALS:
        return col == cond.value
    with np.errstate(invalid="ignore"):
        return col <= cond.value if cond.op is Op.LE else col >= cond.value


def cover_mask(rule: Rule, dataset: Dataset) -> np.ndarray:
    """Store-level mask of rows of ``dataset`` matched by ``rule``."""
    m = dataset.row_mask()
    for c in rule.conditions:
        m &= condition_mask(c, dataset)
    return m


def coverage(rule: Rule, dataset: Dataset, target_label: str | None = None) -> tuple[int, int]:
    """``(p, n)``: covered examples with and without ``target_label``."""
    target_label = rule.label if target_label is None else target_label
    m = cover_mask(rule, dataset)
    pos = dataset.label_mask(target_label)
    p = int(np.count_nonzero(m & pos))
    return p, int(np.count_nonzero(m)) - p


def _check_schema(ruleset: RuleSet, dataset: Dataset):
    if ruleset.schema_fingerprint != dataset.fingerprint:
        raise SchemaMismatch(
            f"rule set bound to schema {ruleset.schema_fingerprint}, data has {dataset.fingerprint}")


def predict(ruleset: RuleSet, example: Example, voc_threshold: float | None = 0.0) -> str | None:
    """Label of the first fully matched rule with voc above the threshold, else ``None``.

    ``voc_threshold=None`` disables filtering altogether.
    """
    for s in ruleset.above(voc_threshold):
        if matches(s.rule, example):
            return s.label
    return None


def predict_dataset(ruleset: RuleSet, dataset: Dataset, voc_threshold: float | None = 0.0) -> list[str | None]:
    """Vectorized :func:`predict` over every row of ``dataset``."""
    _check_schema(ruleset, dataset)
    n = dataset.store.n_rows
    out = np.full(n, -1, dtype=np.int64)
    undecided = dataset.row_mask()
    labels = list(ruleset.label_set)
    for s in ruleset.above(voc_threshold):
        if not undecided.any():
            break
        hit = cover_mask(s.rule, dataset) & undecided
        if s.label not in labels:
            labels.append(s.label)
        out[hit] = labels.index(s.label)
        undecided &= ~hit
    codes = out[dataset.rows]
    return [labels[c] if c >= 0 else None for c in codes]


# -- rendering -------------------------------------------------------------


def _fmt_number(x: float) -> str:
    return f"{x:g}"


def render(rule: Rule, schema: Dataset | object | None = None, class_name: str = "Type") -> str:
    """``IF <attr> = 1 AND ... THEN Type = <label>``.

    ``schema`` may be a Dataset or a Vocabulary; text features are shown by
    their gram when it is available and by ``f<rank>`` otherwise.
    """
    vocab = getattr(schema, "vocabulary", schema)
    parts = []
    for c in rule.conditions:
        if c.op in (Op.PRESENT, Op.ABSENT):
            name = vocab.gram(c.attribute) if vocab is not None and hasattr(vocab, "gram") else f"f{c.attribute}"
            parts.append(f"{name} = {1 if c.op is Op.PRESENT else 0}")
        elif c.op is Op.EQUALS:
            parts.append(f"{c.attribute} = {c.value}")
        else:
            sym = "<=" if c.op is Op.LE else ">="
            parts.append(f"{c.attribute} {sym} {_fmt_number(c.value)}")
    return f"IF {' AND '.join(parts)} THEN {class_name} = {rule.label}"


# -- serialization ---------------------------------------------------------


def _dump_attr(attr):
    return str(attr) if isinstance(attr, int) else json.dumps(attr, ensure_ascii=False)


def serialize(ruleset: RuleSet) -> str:
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION}",
        f"mode {ruleset.mode}",
        f"schema {ruleset.schema_fingerprint}",
        f"labels {json.dumps(list(ruleset.label_set), ensure_ascii=False)}",
        f"rules {len(ruleset.rules)}",
    ]
    for s in ruleset.rules:
        ds = "-" if s.dictionary_size is None else str(s.dictionary_size)
        lines.append(f"rule {json.dumps(s.label, ensure_ascii=False)} voc={s.voc!r} "
                     f"accepted={int(s.accepted)} iteration={s.iteration} dictionary_size={ds}")
        for c in s.rule.conditions:
            line = f"  {_dump_attr(c.attribute)} {c.op.value}"
            if c.op is Op.EQUALS:
                line += " " + json.dumps(c.value, ensure_ascii=False)
            elif c.op in (Op.LE, Op.GE):
                line += f" {c.value!r}"
            lines.append(line)
        lines.append("end")
    lines.append("end-ruleset")
    return "\n".join(lines) + "\n"


_RULE_RE = re.compile(r'rule (?P<label>"(?:[^"\\]|\\.)*") voc=(?P<voc>\S+) accepted=(?P<acc>[01]) '
                      r'iteration=(?P<it>\d+) dictionary_size=(?P<ds>\d+|-)$')


class _Lines:
    def __init__(self, text):
        self.items = [(i + 1, ln.rstrip("\r")) for i, ln in enumerate(text.split("\n"))
                      if ln.strip() and not ln.lstrip().startswith("#")]
        self.pos = 0
        self.last = len(text.split("\n"))

    def next(self, what):
        if self.pos >= len(self.items):
            raise ParseError(f"unexpected end of input, expected {what}", self.last)
        item = self.items[self.pos]
        self.pos += 1
        return item

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (self.last, None)


def _json_prefix(s: str, lineno: int, col: int):
    try:
        value, end = json.JSONDecoder().raw_decode(s)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON value: {exc.msg}", lineno, col + exc.pos) from None
    return value, end


def _parse_float(tok: str, lineno: int, col: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", lineno, col) from None


def _parse_condition(line: str, lineno: int) -> Condition:
    if not line.startswith("  "):
        raise ParseError("condition lines are indented by two spaces", lineno, 1)
    body = line[2:]
    col = 3
    if body.startswith('"'):
        attr, end = _json_prefix(body, lineno, col)
    else:
        m = re.match(r"\d+", body)
        if not m:
            raise ParseError("expected a feature rank or quoted attribute name", lineno, col)
        attr, end = int(m.group()), m.end()
    rest = body[end:]
    col += end
    if not rest.startswith(" "):
        raise ParseError("expected an operator", lineno, col)
    op_tok, _, value_tok = rest[1:].partition(" ")
    col += 1
    try:
        op = Op(op_tok)
    except ValueError:
        raise ParseError(f"unknown operator {op_tok!r}", lineno, col) from None
    col += len(op_tok) + 1
    if op in (Op.PRESENT, Op.ABSENT):
        if value_tok:
            raise ParseError(f"{op.value} takes no value", lineno, col)
        value = None
    elif op is Op.EQUALS:
        value, end = _json_prefix(value_tok, lineno, col)
        if end != len(value_tok) or not isinstance(value, str):
            raise ParseError("equals needs one JSON string", lineno, col)
    else:
        value = _parse_float(value_tok, lineno, col)
    try:
        return Condition(attr, op, value)
    except ValueError as exc:
        raise ParseError(str(exc), lineno, 3) from None


def parse(text: str) -> RuleSet:
    lines = _Lines(text)
    lineno, first = lines.next("format line")
    if first != f"{FORMAT_TAG} {FORMAT_VERSION}":
        raise ParseError(f"expected '{FORMAT_TAG} {FORMAT_VERSION}'", lineno)
    header = {}
    for key in ("mode", "schema", "labels", "rules"):
        lineno, line = lines.next(f"'{key}' header")
        if not line.startswith(key + " "):
            raise ParseError(f"expected '{key}' header", lineno)
        header[key] = (lineno, line[len(key) + 1:])
    mode = header["mode"][1]
    if mode not in ("text", "tabular"):
        raise ParseError(f"unknown mode {mode!r}", header["mode"][0], 6)
    labels, end = _json_prefix(header["labels"][1], header["labels"][0], 8)
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise ParseError("labels must be a JSON array of strings", header["labels"][0], 8)
    if not header["rules"][1].isdigit():
        raise ParseError("rule count must be an integer", header["rules"][0], 7)
    expected = int(header["rules"][1])

    scored = []
    while True:
        lineno, line = lines.next("'rule' or 'end-ruleset'")
        if line == "end-ruleset":
            break
        m = _RULE_RE.match(line)
        if not m:
            raise ParseError("malformed rule header", lineno)
        label = json.loads(m.group("label"))
        voc = _parse_float(m.group("voc"), lineno, m.start("voc") + 1)
        conds = []
        while True:
            clineno, cline = lines.next("condition or 'end'")
            if cline == "end":
                break
            conds.append(_parse_condition(cline, clineno))
        try:
            rule = Rule(label, tuple(conds))
            ds = None if m.group("ds") == "-" else int(m.group("ds"))
            scored.append(ScoredRule(rule, voc, m.group("acc") == "1", int(m.group("it")), ds))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    trailing = lines.peek()
    if trailing[1] is not None:
        raise ParseError("content after 'end-ruleset'", trailing[0])
    if len(scored) != expected:
        raise ParseError(f"header announces {expected} rules, found {len(scored)}", header["rules"][0], 7)
    try:
        return RuleSet(tuple(scored), tuple(labels), mode, header["schema"][1])
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def save_ruleset(ruleset: RuleSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize(ruleset))


def load_ruleset(path) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
