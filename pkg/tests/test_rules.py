import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vocrules import (Condition, Example, Op, ParseError, Rule, RuleSet, SchemaMismatch, ScoredRule,
                      from_rank_sets, parse, predict, predict_dataset, render, serialize, tabular_dataset)
from vocrules.corpus import Feature, Vocabulary
from vocrules.rules import coverage, load_ruleset, matches, save_ruleset

from conftest import make_vocab, random_binary_dataset

P, A = Op.PRESENT, Op.ABSENT


def text_example(*ranks, label="x"):
    return Example("e", label, present_features=frozenset(ranks))


def test_matches_examples():
    bad, great = 0, 1
    rule = Rule("neg", (Condition(bad, P), Condition(great, A)))
    assert matches(rule, text_example(bad))
    assert not matches(Rule("neg", (Condition(bad, P),)), text_example())
    interval = Rule("y", (Condition("x", Op.LE, 3.0), Condition("x", Op.GE, 1.0)))
    assert matches(interval, Example("e", "y", attribute_values={"x": 2.0}))
    assert not matches(interval, Example("e", "y", attribute_values={"x": 3.5}))
    with pytest.raises(SchemaMismatch):
        matches(interval, Example("e", "y", attribute_values={"z": 2.0}))
    with pytest.raises(SchemaMismatch):
        matches(rule, Example("e", "y", attribute_values={"z": 2.0}))


def test_condition_and_rule_invariants():
    with pytest.raises(ValueError):
        Condition(0, Op.EQUALS, 3.0)
    with pytest.raises(ValueError):
        Condition("x", P)
    with pytest.raises(ValueError):
        Rule("a", ())
    with pytest.raises(ValueError):
        Rule("a", (Condition(3, P), Condition(3, A)))
    with pytest.raises(ValueError):
        Rule("a", (Condition("x", Op.GE, 5.0), Condition("x", Op.LE, 4.0)))
    with pytest.raises(ValueError):
        ScoredRule(Rule("a", (Condition(0, P),)), 1.2, True)


def test_coverage_examples():
    vocab = make_vocab(3)
    alpha = 0
    rows = [{alpha}] * 10 + [{alpha}] * 3 + [set()] * 7
    labels = ["pos"] * 10 + ["neg"] * 10
    ds = from_rank_sets(rows, labels, vocab)
    assert coverage(Rule("pos", (Condition(alpha, P),)), ds) == (10, 3)
    assert coverage(Rule("pos", (Condition(2, P),)), ds) == (0, 0)


def _naive_coverage(rule, ds, target):
    p = n = 0
    for e in ds:
        if matches(rule, e):
            if e.label == target:
                p += 1
            else:
                n += 1
    return p, n


def _random_rule(rng, n_features, label="pos"):
    k = int(rng.integers(1, 4))
    feats = rng.choice(n_features, size=k, replace=False)
    return Rule(label, tuple(Condition(int(f), P if rng.random() < 0.6 else A) for f in feats))


def test_coverage_matches_naive_oracle_and_is_additive():
    rng = np.random.default_rng(0)
    for _ in range(40):
        ds = random_binary_dataset(rng, 8, 50)
        rule = _random_rule(rng, 8)
        assert coverage(rule, ds, "pos") == _naive_coverage(rule, ds, "pos")
        cut = int(rng.integers(1, 49))
        a, b = ds.with_rows(ds.rows[:cut]), ds.with_rows(ds.rows[cut:])
        pa, na = coverage(rule, a, "pos")
        pb, nb = coverage(rule, b, "pos")
        assert (pa + pb, na + nb) == coverage(rule, ds, "pos")


def _ruleset(*items, fp="fp"):
    scored = [ScoredRule(Rule(lbl, tuple(Condition(r, P) for r in ranks)), voc, voc > 0.9)
              for lbl, ranks, voc in items]
    return RuleSet.from_learned(scored, ("A", "B"), "text", fp)


def test_predict_filters_and_orders():
    rs = _ruleset(("B", [1], 0.80), ("A", [0], 0.95))
    both = text_example(0, 1)
    assert predict(rs, both, 0.9) == "A"
    assert predict(rs, text_example(1), 0.9) is None  # r2 not considered
    assert predict(rs, text_example(1), 0.0) == "B"
    assert predict(rs, text_example(), 0.0) is None
    assert predict(rs, text_example(1), None) == "B"


def test_ruleset_order_is_voc_then_learning_order():
    rs = _ruleset(("B", [1], 0.5), ("A", [0], 0.7), ("A", [2], 0.5))
    assert [s.rule.conditions[0].attribute for s in rs] == [0, 1, 2]
    with pytest.raises(ValueError):
        RuleSet(tuple(reversed(rs.rules)), ("A", "B"), "text", "fp")


def test_predict_dataset_matches_scalar_predict():
    rng = np.random.default_rng(1)
    for _ in range(20):
        ds = random_binary_dataset(rng, 6, 40, labels=("A", "B"))
        scored = [ScoredRule(_random_rule(rng, 6, lbl), float(rng.random()), False)
                  for lbl in ("A", "B", "A", "B")]
        rs = RuleSet.from_learned(scored, ("A", "B"), "text", ds.fingerprint)
        for t in (None, 0.0, 0.5, 0.9):
            assert predict_dataset(rs, ds, t) == [predict(rs, e, t) for e in ds]


def test_predict_dataset_schema_check():
    ds = from_rank_sets([{0}], ["A"], make_vocab(2))
    with pytest.raises(SchemaMismatch):
        predict_dataset(_ruleset(("A", [0], 1.0), fp="other"), ds)


def test_threshold_monotone_prediction_sets():
    rng = np.random.default_rng(2)
    ds = random_binary_dataset(rng, 8, 60, labels=("A", "B"))
    scored = [ScoredRule(_random_rule(rng, 8, "AB"[i % 2]), float(rng.random()), False) for i in range(8)]
    rs = RuleSet.from_learned(scored, ("A", "B"), "text", ds.fingerprint)
    prev = None
    for t in (0.0, 0.6, 0.7, 0.8, 0.9):
        predicted = {i for i, p in enumerate(predict_dataset(rs, ds, t)) if p is not None}
        if prev is not None:
            assert predicted <= prev
        prev = predicted


def test_render_surface_style():
    vocab = Vocabulary([Feature("dumb", 9, 0), Feature("monkey", 8, 1), Feature("cute", 7, 2)], 10, 1)
    assert render(Rule("Hate Speech", (Condition(0, P),)), vocab) == "IF dumb = 1 THEN Type = Hate Speech"
    r = Rule("NOT Hate Speech", (Condition(1, P), Condition(2, P)))
    assert render(r, vocab) == "IF monkey = 1 AND cute = 1 THEN Type = NOT Hate Speech"
    assert render(Rule("x", (Condition(2, A),)), vocab) == "IF cute = 0 THEN Type = x"
    assert render(Rule("x", (Condition(2, A),))) == "IF f2 = 0 THEN Type = x"
    num = Rule("Yes", (Condition("Insulin", Op.GE, 140.0), Condition("Insulin", Op.LE, 170.0)))
    assert render(num, class_name="Diabetes") == "IF Insulin >= 140 AND Insulin <= 170 THEN Diabetes = Yes"
    assert render(Rule("y", (Condition("Sex", Op.EQUALS, "f"),))) == "IF Sex = f THEN Type = y"


_conditions = st.one_of(
    st.builds(lambda r, p: Condition(r, P if p else A), st.integers(0, 10_000), st.booleans()),
    st.builds(lambda a, v: Condition(a, Op.EQUALS, v), st.text(min_size=1, max_size=8), st.text(max_size=8)),
    st.builds(lambda a, o, v: Condition(a, o, v), st.text(min_size=1, max_size=8), st.sampled_from([Op.LE, Op.GE]),
              st.floats(allow_nan=False, allow_infinity=False, width=64)),
)


def _consistent(conds):
    out = []
    for c in conds:
        try:
            Rule("x", tuple(out + [c]))
            out.append(c)
        except ValueError:
            pass
    return out


@st.composite
def rulesets(draw):
    n = draw(st.integers(0, 6))
    scored = []
    labels = draw(st.lists(st.text(min_size=1, max_size=6), min_size=1, max_size=3, unique=True))
    for _ in range(n):
        conds = _consistent(draw(st.lists(_conditions, min_size=1, max_size=4)))
        label = draw(st.sampled_from(labels))
        voc = draw(st.floats(0, 1, allow_nan=False))
        ds = draw(st.one_of(st.none(), st.integers(1, 10**6)))
        scored.append(ScoredRule(Rule(label, tuple(conds)), voc, draw(st.booleans()),
                                 draw(st.integers(0, 9)), ds))
    mode = draw(st.sampled_from(["text", "tabular"]))
    return RuleSet.from_learned(scored, tuple(sorted(labels)), mode, "abc123")


@settings(max_examples=150, deadline=None)
@given(rulesets())
def test_serialize_round_trip(rs):
    text = serialize(rs)
    back = parse(text)
    assert back == rs
    assert serialize(back) == text
    assert [render(s.rule) for s in back] == [render(s.rule) for s in rs]


def test_truncated_and_malformed_documents():
    rs = _ruleset(("A", [0, 3], 0.95), ("B", [1], 0.5))
    text = serialize(rs)
    lines = text.splitlines()
    for cut in range(1, len(lines)):
        with pytest.raises(ParseError):
            parse("\n".join(lines[:cut]) + "\n")
    with pytest.raises(ParseError) as exc:
        parse(text.replace("  0 present", "  0 sometimes"))
    assert exc.value.line == 7 and exc.value.column == 5
    with pytest.raises(ParseError):
        parse(text.replace("rules 2", "rules 3"))
    with pytest.raises(ParseError):
        parse(text + "extra\n")
    with pytest.raises(ParseError):
        parse(text.replace("voc=0.95", "voc=abc"))


FIXTURE = """\
vocrules-ruleset 1
# hand-written: one rule over rank 1 of a three-gram vocabulary
mode text
schema {fp}
labels ["neg", "pos"]
rules 1
rule "pos" voc=0.9375 accepted=1 iteration=2 dictionary_size=3
  1 present
  0 absent
end
end-ruleset
"""


def test_hand_written_file_loads_and_predicts(tmp_path):
    vocab = Vocabulary([Feature("the", 9, 0), Feature("alpha", 6, 1), Feature("beta", 5, 2)], 10, 5)
    path = tmp_path / "rules.txt"
    path.write_text(FIXTURE.format(fp=vocab.fingerprint), encoding="utf-8")
    rs = load_ruleset(path)
    s = rs.rules[0]
    assert (s.voc, s.accepted, s.iteration, s.dictionary_size) == (0.9375, True, 2, 3)
    assert render(s.rule, vocab) == "IF alpha = 1 AND the = 0 THEN Type = pos"
    ds = from_rank_sets([{1}, {0, 1}, {2}], ["pos", "neg", "neg"], vocab)
    assert predict_dataset(rs, ds, 0.9) == ["pos", None, None]
    assert predict_dataset(rs, ds, 0.95) == [None, None, None]
    save_ruleset(rs, tmp_path / "again.txt")
    assert load_ruleset(tmp_path / "again.txt") == rs


def test_tabular_predict_dataset_matches_scalar():
    recs = [{"x": str(i % 7), "c": "ab"[i % 2], "y": "AB"[(i // 3) % 2]} for i in range(30)]
    recs[4]["x"] = ""
    ds = tabular_dataset(recs, "y")
    rules = [ScoredRule(Rule("A", (Condition("x", Op.LE, 3.5), Condition("c", Op.EQUALS, "a"))), 0.9, True),
             ScoredRule(Rule("B", (Condition("x", Op.GE, 2.5),)), 0.7, False)]
    rs = RuleSet.from_learned(rules, ("A", "B"), "tabular", ds.fingerprint)
    assert predict_dataset(rs, ds, 0.0) == [predict(rs, e, 0.0) for e in ds]
    assert predict(rs, ds[4], 0.0) is None  # missing value satisfies no threshold
