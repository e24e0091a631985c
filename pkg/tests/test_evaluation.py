import json

import numpy as np
import pytest

from vocrules import (Condition, InsufficientData, InvalidSpec, IterationConfig, LearnerKind, Op, Rule, RuleSet,
                      ScoredRule, SplitSpec, SyntheticSpec, compare_runs, evaluate,
                      from_rank_sets, generate_synthetic, measure_peak_memory, split, tabular_dataset)
from vocrules.evaluation import (DEFAULT_THRESHOLDS, dump_report, format_accuracy_table, format_comparison,
                                 format_threshold_table)
from vocrules.synthetic import PlantedRule, place_keyword_rank, spec_from_mapping, write_corpus_csv

from conftest import CONCEPT, make_vocab

P = Op.PRESENT


def _labelled(counts):
    labels = [lbl for lbl, n in counts.items() for _ in range(n)]
    return from_rank_sets([set()] * len(labels), labels, make_vocab(2))


def test_split_sizes_default():
    ds = _labelled({"a": 500, "b": 500})
    train, valid, test = split(ds, SplitSpec(seed=0))
    assert (len(test), len(valid), len(train)) == (200, 120, 680)
    masks = [p.row_mask() for p in (train, valid, test)]
    assert not np.any(masks[0] & masks[1]) and not np.any(masks[0] & masks[2]) and not np.any(masks[1] & masks[2])
    assert np.all(masks[0] | masks[1] | masks[2])


def test_split_stratified_and_deterministic():
    ds = _labelled({"maj": 900, "min": 100})
    train, valid, test = split(ds, SplitSpec(seed=3))
    assert abs(test.count("maj") - 180) <= 1 and abs(test.count("min") - 20) <= 1
    assert abs(valid.count("min") - 12) <= 1
    again = split(ds, SplitSpec(seed=3))
    assert all(np.array_equal(a.rows, b.rows) for a, b in zip((train, valid, test), again))
    other = split(ds, SplitSpec(seed=4))
    assert not np.array_equal(test.rows, other[2].rows)


def test_split_odd_sizes_within_one_per_label():
    ds = _labelled({"a": 37, "b": 61, "c": 13})
    train, valid, test = split(ds, SplitSpec(seed=1))
    for lbl, n in (("a", 37), ("b", 61), ("c", 13)):
        assert abs(test.count(lbl) - 0.2 * n) <= 1
        assert abs(valid.count(lbl) - 0.15 * (n - test.count(lbl))) <= 1
    assert len(test) == round(0.2 * 111)


def test_split_errors_and_unstratified():
    with pytest.raises(InsufficientData):
        split(_labelled({"a": 50, "b": 9}))
    train, valid, test = split(_labelled({"a": 50, "b": 9}), SplitSpec(stratified=False))
    assert len(test) == 12
    with pytest.raises(ValueError):
        SplitSpec(test_fraction=1.0)


def _hand_fixture():
    vocab = make_vocab(4)
    groups = [({0}, "A", 8), ({0}, "B", 2), ({0, 1}, "A", 4), ({1}, "B", 6), ({1}, "A", 3),
              ({2}, "A", 3), ({2}, "B", 1), ({1, 2}, "B", 1), ({3}, "A", 2)]
    rows, labels = [], []
    for feats, lbl, n in groups:
        rows += [feats] * n
        labels += [lbl] * n
    ds = from_rank_sets(rows, labels, vocab)
    rules = [ScoredRule(Rule("A", (Condition(0, P),)), 0.95, True),
             ScoredRule(Rule("B", (Condition(1, P),)), 0.75, False),
             ScoredRule(Rule("A", (Condition(2, P),)), 0.65, False)]
    return ds, RuleSet.from_learned(rules, ("A", "B"), "text", ds.fingerprint)


def test_hand_enumerated_fixture():
    ds, rs = _hand_fixture()
    assert len(ds) == 30
    rep = evaluate(rs, ds)
    got = [(r.threshold, r.predicted, r.correct, r.abstained) for r in rep.rows]
    assert got == [(0.0, 28, 22, 2), (0.6, 28, 22, 2), (0.7, 24, 19, 6), (0.8, 14, 12, 16), (0.9, 14, 12, 16)]
    assert rep.row(0.7).precision == pytest.approx(19 / 24)
    assert rep.accuracy == pytest.approx(22 / 30)
    assert all(r.predicted == r.correct + r.incorrect for r in rep.rows)


def test_all_rules_perfect_gives_identical_rows():
    ds, rs = _hand_fixture()
    perfect = RuleSet(tuple(ScoredRule(s.rule, 1.0, True) for s in rs), rs.label_set, rs.mode,
                      rs.schema_fingerprint)
    rows = evaluate(perfect, ds).rows
    assert len({(r.predicted, r.correct) for r in rows}) == 1


def test_predicted_counts_non_increasing_random():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n, V = 60, 8
        rows = [np.flatnonzero(rng.random(V) < 0.3) for _ in range(n)]
        ds = from_rank_sets(rows, [("A", "B")[int(rng.integers(2))] for _ in range(n)], make_vocab(V))
        rules = [ScoredRule(Rule("AB"[i % 2], (Condition(int(rng.integers(V)), P),)), float(rng.random()), False)
                 for i in range(6)]
        rs = RuleSet.from_learned(rules, ("A", "B"), "text", ds.fingerprint)
        counts = [r.predicted for r in evaluate(rs, ds).rows]
        assert counts == sorted(counts, reverse=True)


def test_default_sweep_columns():
    assert DEFAULT_THRESHOLDS == (0.0, 0.6, 0.7, 0.8, 0.9)


def test_report_formats():
    ds, rs = _hand_fixture()
    rep = evaluate(rs, ds)
    table = format_threshold_table([("foil iterative", rep)])
    assert "t=0.9" in table and "85.71% (14)" in table
    acc = format_accuracy_table([("toy", "foil iterative", rep)], include_timing=False)
    assert "73.33%" in acc and "memory" not in acc
    data = json.loads(dump_report(rep, {"evaluation": {"seed": 1}}, run="x"))
    assert data["config"] == {"evaluation": {"seed": 1}} and data["run"] == "x"
    assert "wall_time" not in data["report"]
    assert [r["predicted"] for r in data["report"]["thresholds"]] == [28, 28, 24, 14, 14]


# -- synthetic generator ---------------------------------------------------


def test_noise_free_labels_follow_planted_rule():
    spec = SyntheticSpec(vocabulary_size=200, document_count=500, planted_rules=(PlantedRule("pos", (("alpha", True),)),),
                         keyword_rates={"alpha": 0.3}, seed=0)
    c = generate_synthetic(spec)
    for text, label in zip(c.texts, c.labels):
        assert (label == "pos") == ("alpha" in text.split())
    assert c.labels == c.clean_labels


def test_label_noise_rate_within_two_points():
    spec = SyntheticSpec(vocabulary_size=200, document_count=6000, planted_rules=CONCEPT,
                         keyword_rates={"alpha": 0.15, "beta": 0.2, "gamma": 0.3}, label_noise_rate=0.1,
                         doc_length_mean=10, seed=11)
    c = generate_synthetic(spec)
    flipped = np.mean([a != b for a, b in zip(c.labels, c.clean_labels)])
    assert abs(flipped - 0.1) <= 0.02


def test_generator_is_deterministic_and_validates():
    spec = SyntheticSpec(vocabulary_size=100, document_count=50, seed=4)
    assert generate_synthetic(spec).texts == generate_synthetic(spec).texts
    for bad in (dict(label_noise_rate=0.5), dict(label_noise_rate=-0.1), dict(document_count=0),
                dict(keyword_rates={"w12": 0.1}), dict(keyword_rates={"Two words": 0.1}),
                dict(planted_rules=(PlantedRule("x", (("zeta", True),)),))):
        with pytest.raises(InvalidSpec):
            generate_synthetic(SyntheticSpec(**bad))


def test_planted_rules_are_perfect_on_clean_corpus(planted):
    corpus, vocab, ds = planted
    rules = []
    for r in corpus.ground_truth:
        conds = tuple(Condition(vocab.rank_of(k), P if present else Op.ABSENT) for k, present in r.conditions)
        rules.append(ScoredRule(Rule(r.label, conds), 1.0, True))
    rs = RuleSet.from_learned(rules, ds.label_set, "text", ds.fingerprint)
    rep = evaluate(rs, ds)
    assert all(row.precision == 1.0 for row in rep.rows)
    assert rep.row(0.0).predicted == ds.count("pos")


def test_keyword_rank_placement(placed):
    vocab, rank, _ = placed
    assert len(vocab) / 8 < rank <= len(vocab) / 4
    spec = SyntheticSpec(vocabulary_size=300, document_count=300, keyword_rates={"kappa": 0.1}, seed=1)
    with pytest.raises(InvalidSpec):
        place_keyword_rank(spec, "kappa", 0.0, 0.0, max_tries=5)


def test_spec_from_mapping_and_csv(tmp_path):
    spec = spec_from_mapping({"vocabulary_size": 50, "document_count": 20, "keyword_rates": {"a": 0.5, "b": 0.5},
                              "planted_rules": [{"label": "pos", "conditions": ["a", "!b"]}]})
    assert spec.planted_rules[0].conditions == (("a", True), ("b", False))
    with pytest.raises(InvalidSpec):
        spec_from_mapping({"vocab_size": 3})
    c = generate_synthetic(spec)
    write_corpus_csv(c, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text(encoding="utf-8").splitlines()[0] == "id,text,label"


# -- comparison runs and memory --------------------------------------------


def test_compare_runs_on_planted_corpus(planted):
    _, _, ds = planted
    for kind in (LearnerKind(), LearnerKind("ripper")):
        rec = compare_runs(ds, IterationConfig(), kind, name="planted")
        assert rec.baseline.report.accuracy >= 0.99 and rec.iterative.report.accuracy >= 0.99
        assert rec.baseline.report.wall_time is not None
        assert rec.iterative.traces and not rec.baseline.traces
        text = format_comparison([rec])
        assert "baseline" in text and "iterative" in text


def test_compare_runs_tabular():
    rng = np.random.default_rng(1)
    recs = [{"x": float(v), "y": "hi" if v >= 50 else "lo"} for v in rng.integers(0, 100, 300)]
    rec = compare_runs(tabular_dataset(recs, "y"), measure_memory=False)
    assert rec.iterative.report.accuracy >= 0.95 and rec.baseline.report.accuracy >= 0.95


def test_measure_peak_memory_sees_allocation():
    def work():
        a = np.ones(40_000_000 // 8)
        return float(a.sum())

    m = measure_peak_memory(work)
    assert m.result == 40_000_000 // 8
    if m.peak_bytes is not None:
        assert m.peak_bytes >= 30_000_000
    m2 = measure_peak_memory(lambda: 1, isolate=False)
    assert m2.result == 1 and m2.wall_time >= 0


def test_measure_peak_memory_relays_errors():
    def boom():
        raise InsufficientData("nope")

    with pytest.raises(InsufficientData):
        measure_peak_memory(boom)
