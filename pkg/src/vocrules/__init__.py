"""Interpretable rule learning for text with confidence-gated dictionary expansion."""

from .corpus import (
    AttributeSpec, Dataset, Example, Feature, Vocabulary, build_vocabulary, from_rank_sets, load_dataset,
    ngrams, read_table_csv, read_text_csv, restrict, save_dataset, tabular_dataset, tokenize, vectorize,
)
from .errors import (
    ConfigError, DataError, EmptyVocabulary, InsufficientData, InvalidRestriction, InvalidSpec, NoRuleFound,
    ParseError, SchemaMismatch, VocrulesError,
)
from .evaluation import EvaluationReport, SplitSpec, compare_runs, evaluate, split
from .iterative import (
    IterationConfig, IterationRecord, IterationTrace, learn_confident_rule, learn_multiclass,
    learn_ruleset_iterative, value_of_confidence,
)
from .learners import FOIL, RIPPER, LearnerKind, foil_gain, learn_baseline, learn_one_rule
from .memory import measure_peak_memory
from .rules import (
    Condition, Op, Rule, RuleSet, ScoredRule, load_ruleset, parse, predict, predict_dataset, render,
    save_ruleset, serialize,
)
from .synthetic import PlantedRule, SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
