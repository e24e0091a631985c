"""
Corpus handling: tokenization, n-gram vocabularies and sparse binary datasets.

A text-mode :class:`Dataset` never owns its data. It is a view over a shared
store (row-major and column-major copies of the same sorted rank lists) plus
a row selection and a visible-feature limit ``k``. Because the vocabulary is
sorted most-frequent-first, restricting to the first ``k`` ranks is a prefix
slice of the column-major arrays, so :func:`restrict` costs nothing and the
learners only ever touch the visible part of the matrix.
"""

from __future__ import annotations

import csv
import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DataError, EmptyVocabulary, InvalidRestriction, SchemaMismatch

CACHE_FORMAT = "vocrules-dataset"
CACHE_VERSION = 1

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on every non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


def ngrams(tokens: Sequence[str], ngram_range: tuple[int, int] = (1, 3)) -> list[str]:
    lo, hi = ngram_range
    out = []
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            out.append(" ".join(tokens[i:i + n]))
    return out


@dataclass(frozen=True)
class Feature:
    gram: str
    document_frequency: int
    rank: int


class Vocabulary:
    """Document-frequency ordered n-gram list (most frequent first).

    Ordering by ascending IDF is the same as ordering by descending document
    frequency, so IDF values are never materialized. Ties are broken on the
    gram text.
    """

    def __init__(self, features: Sequence[Feature], corpus_size: int, min_df: int,
                 ngram_range: tuple[int, int] = (1, 3)):
        self.features = tuple(features)
        self.corpus_size = corpus_size
        self.min_df = min_df
        self.ngram_range = tuple(ngram_range)
        self._index = {f.gram: f.rank for f in self.features}
        if len(self._index) != len(self.features):
            raise ValueError("duplicate grams in vocabulary")
        for i, f in enumerate(self.features):
            if f.rank != i:
                raise ValueError(f"feature {f.gram!r} has rank {f.rank}, expected {i}")
        for a, b in zip(self.features, self.features[1:]):
            if (-a.document_frequency, a.gram) >= (-b.document_frequency, b.gram):
                raise ValueError(f"vocabulary out of order at rank {b.rank}")
        self._fingerprint = None

    def __len__(self):
        return len(self.features)

    def __repr__(self):
        return f"Vocabulary(V={len(self)}, min_df={self.min_df}, corpus_size={self.corpus_size})"

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (self.features == other.features and self.corpus_size == other.corpus_size
                and self.min_df == other.min_df and self.ngram_range == other.ngram_range)

    def rank_of(self, gram: str) -> int | None:
        return self._index.get(gram)

    def gram(self, rank: int) -> str:
        return self.features[rank].gram

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            h = hashlib.sha256()
            for f in self.features:
                h.update(f.gram.encode("utf-8"))
                h.update(b"\n")
            self._fingerprint = h.hexdigest()[:16]
        return self._fingerprint

    def dump(self, path) -> None:
        """Write ``rank<TAB>gram<TAB>df`` lines, preceded by ``#`` metadata lines."""
        lo, hi = self.ngram_range
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# corpus_size={self.corpus_size} min_df={self.min_df} ngram_range={lo},{hi}\n")
            for f in self.features:
                fh.write(f"{f.rank}\t{f.gram}\t{f.document_frequency}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        meta = {}
        features = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if line.startswith("#"):
                    for item in line[1:].split():
                        key, _, value = item.partition("=")
                        meta[key] = value
                    continue
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise DataError(f"{path}:{lineno}: expected rank<TAB>gram<TAB>df")
                features.append(Feature(parts[1], int(parts[2]), int(parts[0])))
        lo, hi = (int(x) for x in meta.get("ngram_range", "1,3").split(","))
        return cls(features, int(meta.get("corpus_size", 0)), int(meta.get("min_df", 1)), (lo, hi))


def build_vocabulary(corpus: Iterable[str], min_df: int = 5, ngram_range: tuple[int, int] = (1, 3),
                     max_features: int | None = None) -> Vocabulary:
    """Collect every n-gram occurring in at least ``min_df`` documents.

    ``max_features`` keeps only the most frequent grams, which is how a
    cropped feature space (e.g. the 20k most frequent grams) is obtained.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    df = Counter()
    n_docs = 0
    for text in corpus:
        n_docs += 1
        df.update(set(ngrams(tokenize(text), ngram_range)))
    if n_docs == 0:
        raise ValueError("corpus is empty")
    kept = sorted(((g, c) for g, c in df.items() if c >= min_df), key=lambda gc: (-gc[1], gc[0]))
    if max_features is not None:
        kept = kept[:max_features]
    if not kept:
        raise EmptyVocabulary(f"no n-gram appears in at least {min_df} of {n_docs} documents")
    features = [Feature(g, c, r) for r, (g, c) in enumerate(kept)]
    return Vocabulary(features, n_docs, min_df, ngram_range)


@dataclass(frozen=True)
class Example:
    id: str
    label: str
    present_features: frozenset | None = None
    attribute_values: Mapping | None = None


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str  # "nominal" or "numeric"


class _TextStore:
    def __init__(self, vocabulary, indptr, indices, label_codes, label_names, ids):
        self.vocabulary = vocabulary
        self.indptr = indptr
        self.indices = indices
        self.label_codes = label_codes
        self.label_names = label_names
        self.ids = ids
        n_rows = len(indptr) - 1
        row_of_entry = np.repeat(np.arange(n_rows, dtype=np.int32), np.diff(indptr))
        order = np.argsort(indices, kind="stable")
        self.col_rows = row_of_entry[order]
        counts = np.bincount(indices, minlength=len(vocabulary))
        self.col_indptr = np.zeros(len(vocabulary) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.col_indptr[1:])

    @property
    def n_rows(self):
        return len(self.indptr) - 1


class _TabularStore:
    def __init__(self, attributes, columns, label_codes, label_names, ids):
        self.attributes = tuple(attributes)
        self.columns = columns
        self.label_codes = label_codes
        self.label_names = label_names
        self.ids = ids
        self._index = {a.name: i for i, a in enumerate(self.attributes)}

    @property
    def n_rows(self):
        return len(self.label_codes)

    @property
    def fingerprint(self):
        h = hashlib.sha256()
        for a in self.attributes:
            h.update(f"{a.name}\t{a.kind}\n".encode("utf-8"))
        return h.hexdigest()[:16]


class Dataset:
    """Rows of a shared store seen through a feature limit.

    ``rows`` are store-level row ids, always sorted ascending. All masks
    returned by the ``*_mask`` methods are boolean arrays over the whole
    store, which keeps set operations between views cheap.
    """

    __slots__ = ("_store", "rows", "limit")

    def __init__(self, store, rows=None, limit=None):
        self._store = store
        if rows is None:
            rows = np.arange(store.n_rows, dtype=np.int64)
        self.rows = np.asarray(rows, dtype=np.int64)
        if isinstance(store, _TextStore):
            self.limit = len(store.vocabulary) if limit is None else int(limit)
        else:
            self.limit = None

    # -- basic properties -------------------------------------------------

    @property
    def mode(self) -> str:
        return "text" if isinstance(self._store, _TextStore) else "tabular"

    @property
    def store(self):
        return self._store

    @property
    def vocabulary(self) -> Vocabulary | None:
        return self._store.vocabulary if self.mode == "text" else None

    @property
    def attributes(self) -> tuple:
        return () if self.mode == "text" else self._store.attributes

    @property
    def full_size(self) -> int:
        """V for text data, the attribute count for tabular data."""
        if self.mode == "text":
            return len(self._store.vocabulary)
        return len(self._store.attributes)

    @property
    def n_features(self) -> int:
        return self.limit if self.mode == "text" else len(self._store.attributes)

    @property
    def fingerprint(self) -> str:
        if self.mode == "text":
            return self._store.vocabulary.fingerprint
        return self._store.fingerprint

    @property
    def label_codes(self) -> np.ndarray:
        return self._store.label_codes[self.rows]

    @property
    def labels(self) -> list[str]:
        names = self._store.label_names
        return [names[c] for c in self.label_codes]

    @property
    def label_set(self) -> tuple[str, ...]:
        names = self._store.label_names
        return tuple(sorted({names[c] for c in np.unique(self.label_codes)}))

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return f"Dataset(mode={self.mode}, n={len(self)}, features={self.n_features})"

    def count(self, label: str) -> int:
        return int(np.count_nonzero(self.label_mask(label)))

    # -- examples -----------------------------------------------------------

    def present_features(self, row: int) -> np.ndarray:
        """Sorted visible ranks of store row ``row``."""
        s = self._store
        seg = s.indices[s.indptr[row]:s.indptr[row + 1]]
        return seg[:np.searchsorted(seg, self.limit)]

    def example(self, i: int) -> Example:
        row = int(self.rows[i])
        s = self._store
        label = s.label_names[s.label_codes[row]]
        if self.mode == "text":
            ranks = frozenset(int(r) for r in self.present_features(row))
            return Example(str(s.ids[row]), label, present_features=ranks)
        values = {}
        for a in s.attributes:
            v = s.columns[a.name][row]
            values[a.name] = float(v) if a.kind == "numeric" else str(v)
        return Example(str(s.ids[row]), label, attribute_values=values)

    def __iter__(self) -> Iterator[Example]:
        for i in range(len(self.rows)):
            yield self.example(i)

    def __getitem__(self, i):
        return self.example(i)

    # -- views --------------------------------------------------------------

    def restrict(self, k: int) -> "Dataset":
        return restrict(self, k)

    def with_rows(self, rows) -> "Dataset":
        return Dataset(self._store, np.sort(np.asarray(rows, dtype=np.int64)), self.limit)

    def with_mask(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self._store, np.flatnonzero(mask), self.limit)

    def add(self, mask: np.ndarray) -> "Dataset":
        return self.with_mask(self.row_mask() | mask)

    def remove(self, mask: np.ndarray) -> "Dataset":
        return self.with_mask(self.row_mask() & ~mask)

    def same_schema(self, other: "Dataset") -> bool:
        return self._store is other._store

    # -- masks --------------------------------------------------------------

    def row_mask(self) -> np.ndarray:
        m = np.zeros(self._store.n_rows, dtype=bool)
        m[self.rows] = True
        return m

    def label_mask(self, label: str) -> np.ndarray:
        """Rows of this view carrying ``label``."""
        names = self._store.label_names
        m = self.row_mask()
        if label not in names:
            m[:] = False
            return m
        m &= self._store.label_codes == names.index(label)
        return m

    def feature_mask(self, rank: int) -> np.ndarray:
        """Store rows whose document contains feature ``rank``."""
        s = self._store
        if not 0 <= rank < self.limit:
            raise SchemaMismatch(f"feature rank {rank} is outside the visible space of {self.limit}")
        m = np.zeros(s.n_rows, dtype=bool)
        m[s.col_rows[s.col_indptr[rank]:s.col_indptr[rank + 1]]] = True
        return m

    def column(self, name: str) -> np.ndarray:
        if self.mode != "tabular" or name not in self._store.columns:
            raise SchemaMismatch(f"unknown attribute {name!r}")
        return self._store.columns[name]

    def attribute_kind(self, name: str) -> str:
        s = self._store
        if self.mode != "tabular" or name not in s._index:
            raise SchemaMismatch(f"unknown attribute {name!r}")
        return s.attributes[s._index[name]].kind

    def column_prefix(self, k: int | None = None):
        """Column-major slices covering ranks ``< k`` without copying."""
        s = self._store
        k = self.limit if k is None else k
        indptr = s.col_indptr[:k + 1]
        return indptr, s.col_rows[:indptr[-1]]


def restrict(dataset: Dataset, k: int) -> Dataset:
    """Same rows, with only the ``k`` most frequent features visible."""
    if dataset.mode != "text":
        raise InvalidRestriction("only text datasets have a dictionary to restrict")
    if not 1 <= k <= len(dataset.vocabulary):
        raise InvalidRestriction(f"dictionary size {k} outside [1, {len(dataset.vocabulary)}]")
    return Dataset(dataset.store, dataset.rows, k)


def _encode_labels(labels):
    names = tuple(sorted(set(labels)))
    if not names:
        raise DataError("dataset has no labels")
    lookup = {n: i for i, n in enumerate(names)}
    return np.array([lookup[x] for x in labels], dtype=np.int32), names


def _check_ids(ids, n):
    if ids is None:
        ids = [str(i) for i in range(n)]
    ids = np.array([str(i) for i in ids], dtype=str)
    if len(ids) != n:
        raise DataError("ids and labels differ in length")
    return ids


def vectorize(corpus: Sequence[str], vocabulary: Vocabulary, labels: Sequence[str],
              ids: Sequence[str] | None = None) -> Dataset:
    """Binary presence matrix of ``corpus`` over ``vocabulary``."""
    if len(corpus) != len(labels):
        raise DataError("corpus and labels differ in length")
    indptr = np.zeros(len(corpus) + 1, dtype=np.int64)
    chunks = []
    for i, text in enumerate(corpus):
        found = {vocabulary.rank_of(g) for g in ngrams(tokenize(text), vocabulary.ngram_range)}
        found.discard(None)
        row = np.array(sorted(found), dtype=np.int32)
        chunks.append(row)
        indptr[i + 1] = indptr[i] + len(row)
    indices = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int32)
    codes, names = _encode_labels(labels)
    return Dataset(_TextStore(vocabulary, indptr, indices.astype(np.int32), codes, names,
                              _check_ids(ids, len(labels))))


def from_rank_sets(rank_sets: Sequence[Iterable[int]], labels: Sequence[str], vocabulary: Vocabulary,
                   ids: Sequence[str] | None = None) -> Dataset:
    """Text dataset from precomputed rank sets (fixtures, cached data)."""
    if len(rank_sets) != len(labels):
        raise DataError("rank sets and labels differ in length")
    V = len(vocabulary)
    indptr = np.zeros(len(rank_sets) + 1, dtype=np.int64)
    chunks = []
    for i, ranks in enumerate(rank_sets):
        row = np.unique(np.asarray(list(ranks), dtype=np.int32))
        if len(row) and (row[0] < 0 or row[-1] >= V):
            raise DataError(f"row {i} references a rank outside [0, {V})")
        chunks.append(row)
        indptr[i + 1] = indptr[i] + len(row)
    indices = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int32)
    codes, names = _encode_labels(labels)
    return Dataset(_TextStore(vocabulary, indptr, indices.astype(np.int32), codes, names,
                              _check_ids(ids, len(labels))))


def _is_number(value: str) -> bool:
    try:
        float(value)
    except (TypeError, ValueError):
        return False
    return True


def tabular_dataset(records: Sequence[Mapping], label: str, attributes: Sequence[AttributeSpec] | None = None,
                    ids: Sequence[str] | None = None) -> Dataset:
    """Mixed nominal/numeric dataset; kinds are inferred when not given.

    A column is numeric when every value parses as a float. Missing numeric
    values become NaN and satisfy no threshold condition.
    """
    if not records:
        raise DataError("no records")
    if attributes is None:
        names = [k for k in records[0] if k != label]
        attributes = []
        for name in names:
            vals = [r[name] for r in records]
            numeric = all(isinstance(v, (int, float)) or _is_number(v) for v in vals if v not in ("", None, "?"))
            attributes.append(AttributeSpec(name, "numeric" if numeric else "nominal"))
    columns = {}
    for a in attributes:
        vals = [r.get(a.name) for r in records]
        if a.kind == "numeric":
            columns[a.name] = np.array([np.nan if v in ("", None, "?") else float(v) for v in vals],
                                       dtype=np.float64)
        elif a.kind == "nominal":
            columns[a.name] = np.array(["" if v is None else str(v) for v in vals], dtype=object)
        else:
            raise DataError(f"unknown attribute kind {a.kind!r}")
    codes, names = _encode_labels([str(r[label]) for r in records])
    return Dataset(_TabularStore(attributes, columns, codes, names, _check_ids(ids, len(records))))


# -- file formats ----------------------------------------------------------


def read_text_csv(path, text_column: str, label_column: str, delimiter: str = ",",
                  id_column: str | None = None) -> tuple[list[str], list[str], list[str]]:
    """Read ``(texts, labels, ids)`` from a UTF-8 CSV with a header row."""
    texts, labels, ids = [], [], []
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        fields = reader.fieldnames or []
        for col in (text_column, label_column, id_column):
            if col is not None and col not in fields:
                raise DataError(f"{path}: missing column {col!r} (have {fields})")
        for i, row in enumerate(reader):
            texts.append(row[text_column] or "")
            labels.append(row[label_column])
            ids.append(row[id_column] if id_column else str(i))
    if not texts:
        raise DataError(f"{path}: no data rows")
    return texts, labels, ids


def read_table_csv(path, label_column: str, delimiter: str = ",",
                   id_column: str | None = None) -> Dataset:
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if label_column not in (reader.fieldnames or []):
            raise DataError(f"{path}: missing label column {label_column!r}")
        records = list(reader)
    if not records:
        raise DataError(f"{path}: no data rows")
    ids = [r.pop(id_column) for r in records] if id_column else None
    return tabular_dataset(records, label_column, ids=ids)


def save_dataset(dataset: Dataset, path) -> None:
    """Write the dataset's store as a versioned ``.npz`` container.

    Only the rows of ``dataset`` are written. Text caches hold the CSR
    arrays and the vocabulary fingerprint; the vocabulary itself lives in its
    own dump file and must be supplied again on load.
    """
    s = dataset.store
    rows = dataset.rows
    payload = {
        "format": np.array(CACHE_FORMAT),
        "version": np.array(CACHE_VERSION),
        "mode": np.array(dataset.mode),
        "label_names": np.array(s.label_names, dtype=str),
        "label_codes": s.label_codes[rows],
        "ids": s.ids[rows],
    }
    if dataset.mode == "text":
        lengths = np.diff(s.indptr)[rows]
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        parts = [s.indices[s.indptr[r]:s.indptr[r + 1]] for r in rows]
        payload["indptr"] = indptr
        payload["indices"] = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int32)
        payload["vocabulary_fingerprint"] = np.array(s.vocabulary.fingerprint)
    else:
        payload["attribute_names"] = np.array([a.name for a in s.attributes], dtype=str)
        payload["attribute_kinds"] = np.array([a.kind for a in s.attributes], dtype=str)
        for i, a in enumerate(s.attributes):
            col = s.columns[a.name][rows]
            payload[f"col_{i}"] = col if a.kind == "numeric" else col.astype(str)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_dataset(path, vocabulary: Vocabulary | None = None) -> Dataset:
    with np.load(path, allow_pickle=False) as z:
        if str(z["format"]) != CACHE_FORMAT:
            raise DataError(f"{path}: not a {CACHE_FORMAT} file")
        if int(z["version"]) != CACHE_VERSION:
            raise DataError(f"{path}: unsupported cache version {int(z['version'])}")
        names = tuple(str(x) for x in z["label_names"])
        codes = z["label_codes"].astype(np.int32)
        ids = z["ids"]
        if str(z["mode"]) == "text":
            if vocabulary is None:
                raise DataError("text dataset cache needs its vocabulary")
            if str(z["vocabulary_fingerprint"]) != vocabulary.fingerprint:
                raise SchemaMismatch(f"{path}: cache was built for a different vocabulary")
            store = _TextStore(vocabulary, z["indptr"], z["indices"].astype(np.int32), codes, names, ids)
        else:
            attrs = [AttributeSpec(str(n), str(k)) for n, k in zip(z["attribute_names"], z["attribute_kinds"])]
            columns = {}
            for i, a in enumerate(attrs):
                col = z[f"col_{i}"]
                columns[a.name] = col.astype(np.float64) if a.kind == "numeric" else col.astype(object)
            store = _TabularStore(attrs, columns, codes, names, ids)
    return Dataset(store)
