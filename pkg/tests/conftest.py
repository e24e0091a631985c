import numpy as np
import pytest

from vocrules import (SyntheticSpec, PlantedRule, Vocabulary, build_vocabulary, from_rank_sets,
                      generate_synthetic, vectorize)
from vocrules.corpus import Feature

CONCEPT = (
    PlantedRule("pos", (("alpha", True),)),
    PlantedRule("pos", (("beta", True), ("gamma", False))),
)
CONCEPT_RATES = {"alpha": 0.15, "beta": 0.2, "gamma": 0.3}


def make_vocab(n, prefix="g"):
    """Vocabulary of ``n`` placeholder grams with strictly decreasing df."""
    feats = [Feature(f"{prefix}{i:05d}", 10 * n - i, i) for i in range(n)]
    return Vocabulary(feats, corpus_size=10 * n, min_df=1, ngram_range=(1, 1))


def random_binary_dataset(rng, n_features, n_examples, labels=("pos", "neg"), density=0.4):
    vocab = make_vocab(n_features)
    rows = [np.flatnonzero(rng.random(n_features) < density) for _ in range(n_examples)]
    ys = [labels[int(rng.integers(len(labels)))] for _ in range(n_examples)]
    # make sure both classes occur
    ys[0], ys[-1] = labels[0], labels[1]
    return from_rank_sets(rows, ys, vocab)


def planted_corpus(n_docs=2000, seed=1, noise=0.0, vocabulary_size=600):
    spec = SyntheticSpec(vocabulary_size=vocabulary_size, document_count=n_docs, planted_rules=CONCEPT,
                         keyword_rates=CONCEPT_RATES, default_label="neg", label_noise_rate=noise, seed=seed)
    corpus = generate_synthetic(spec)
    vocab = build_vocabulary(corpus.texts, 5, (1, 3))
    return corpus, vocab, vectorize(corpus.texts, vocab, corpus.labels)


@pytest.fixture(scope="session")
def planted():
    return planted_corpus()


def placed_keyword_corpus(seed=5):
    """Corpus whose only separating keyword sits at a rank in (V/8, V/4]."""
    from vocrules.synthetic import place_keyword_rank
    spec = SyntheticSpec(vocabulary_size=3000, document_count=3000, doc_length_mean=30, default_label="neg",
                         planted_rules=(PlantedRule("pos", (("kappa", True),)),), keyword_rates={"kappa": 0.05},
                         seed=seed)
    spec, corpus, vocab, rank = place_keyword_rank(spec, "kappa", 1 / 8, 1 / 4, 5, (1, 1))
    return vocab, rank, vectorize(corpus.texts, vocab, corpus.labels)


@pytest.fixture(scope="session")
def placed():
    return placed_keyword_corpus()


# -- acceptance reporting --------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
