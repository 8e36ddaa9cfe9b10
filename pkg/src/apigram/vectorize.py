"""Sparse TF-IDF and relative-frequency feature matrices.

TF is the term's share of all token-window occurrences in its document
(out-of-vocabulary occurrences still count toward the denominator). IDF is
the base-10 log of corpus size over document frequency, with no smoothing:
a term present in every document weighs exactly zero, and absent terms
stay exactly zero, so sparsity is preserved.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyCorpus, EmptyDocument, IoFailure, ZeroDf
from .labels import ClassLabel
from .tokens import TokenDocument, Vocabulary


def tf(count: int, doc_total: int) -> float:
    """Relative frequency of a term within one document."""
    if doc_total <= 0:
        raise EmptyDocument("term frequency is undefined for an empty document")
    if count < 0 or count > doc_total:
        raise DimensionMismatch(f"count {count} outside [0, {doc_total}]")
    return count / doc_total


def idf(df: int, n_docs: int) -> float:
    """Base-10 inverse document frequency, unsmoothed."""
    if n_docs <= 0:
        raise EmptyCorpus("idf is undefined for an empty corpus")
    if df <= 0:
        raise ZeroDf("idf is undefined for a term no document contains")
    if df > n_docs:
        raise DimensionMismatch(f"df {df} exceeds corpus size {n_docs}")
    return math.log10(n_docs / df)


def tfidf(count: int, doc_total: int, df: int, n_docs: int) -> float:
    return tf(count, doc_total) * idf(df, n_docs)


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-sparse matrix with per-row sample identity and class label.

    ``rows[i]`` maps column index to a nonzero weight; columns follow the
    vocabulary's term order. ``normalized`` records whether rows were
    scaled to unit Euclidean norm.
    """

    rows: tuple[dict[int, float], ...]
    n_cols: int
    sample_ids: tuple[str, ...]
    labels: tuple[ClassLabel, ...]
    normalized: bool = False

    def __post_init__(self) -> None:
        if not (len(self.rows) == len(self.sample_ids) == len(self.labels)):
            raise DimensionMismatch("rows, sample_ids and labels must align")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols), dtype=np.float64)
        for i, row in enumerate(self.rows):
            for j, weight in row.items():
                dense[i, j] = weight
        return dense

    def labels_array(self) -> np.ndarray:
        return np.array([label.ordinal for label in self.labels], dtype=np.int64)

    def column_values(self, col: int) -> np.ndarray:
        values = np.zeros(self.n_rows, dtype=np.float64)
        for i, row in enumerate(self.rows):
            if col in row:
                values[i] = row[col]
        return values

    def select_rows(self, indices: list[int]) -> "FeatureMatrix":
        return FeatureMatrix(
            rows=tuple(dict(self.rows[i]) for i in indices),
            n_cols=self.n_cols,
            sample_ids=tuple(self.sample_ids[i] for i in indices),
            labels=tuple(self.labels[i] for i in indices),
            normalized=self.normalized,
        )

    def apply_mask(self, kept_columns: list[int] | tuple[int, ...]) -> "FeatureMatrix":
        """Keep only the given columns, renumbering them to 0..k-1.

        Weights are carried over unchanged.
        """
        remap = {old: new for new, old in enumerate(kept_columns)}
        new_rows = tuple(
            {remap[j]: w for j, w in row.items() if j in remap}
            for row in self.rows
        )
        return FeatureMatrix(
            rows=new_rows,
            n_cols=len(kept_columns),
            sample_ids=self.sample_ids,
            labels=self.labels,
            normalized=False,
        )


def _l2_normalize(row: dict[int, float]) -> dict[int, float]:
    norm = math.sqrt(math.fsum(w * w for w in row.values()))
    if norm == 0.0:
        return row
    return {j: w / norm for j, w in row.items()}


def tfidf_matrix(
    documents: list[TokenDocument],
    vocabulary: Vocabulary,
    l2: bool = False,
) -> FeatureMatrix:
    """TF-IDF weights for each document against a fixed vocabulary.

    Terms outside the vocabulary are dropped but still count toward each
    document's occurrence total. Documents with zero occurrences become
    all-zero rows.
    """
    if not documents:
        raise EmptyCorpus("cannot vectorize zero documents")
    idf_by_col = [idf(df, vocabulary.n_docs) for df in vocabulary.df]
    rows = []
    for doc in documents:
        row: dict[int, float] = {}
        if doc.total > 0:
            for term, count in doc.counts.items():
                col = vocabulary.index_of(term)
                if col is None:
                    continue
                weight = (count / doc.total) * idf_by_col[col]
                if weight != 0.0:
                    row[col] = weight
        rows.append(_l2_normalize(row) if l2 else row)
    return FeatureMatrix(
        rows=tuple(rows),
        n_cols=len(vocabulary),
        sample_ids=tuple(d.sample_id for d in documents),
        labels=tuple(d.label for d in documents),
        normalized=l2,
    )


def frequency_matrix(
    documents: list[TokenDocument],
    vocabulary: Vocabulary,
) -> FeatureMatrix:
    """Raw per-document occurrence counts over the vocabulary."""
    if not documents:
        raise EmptyCorpus("cannot vectorize zero documents")
    rows = []
    for doc in documents:
        row: dict[int, float] = {}
        for term, count in doc.counts.items():
            col = vocabulary.index_of(term)
            if col is not None and count > 0:
                row[col] = float(count)
        rows.append(row)
    return FeatureMatrix(
        rows=tuple(rows),
        n_cols=len(vocabulary),
        sample_ids=tuple(d.sample_id for d in documents),
        labels=tuple(d.label for d in documents),
    )


# ---------------------------------------------------------------------------
# CSV persistence (17 significant digits, so floats round-trip exactly)
# ---------------------------------------------------------------------------

def write_matrix(path: str | Path, matrix: FeatureMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "col", "weight"])
        writer.writerow(["#shape", matrix.n_rows, matrix.n_cols])
        for i, row in enumerate(matrix.rows):
            for j in sorted(row):
                writer.writerow([i, j, format(row[j], ".17g")])


def write_labels(path: str | Path, matrix: FeatureMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "sample_id", "label"])
        for i, sid in enumerate(matrix.sample_ids):
            writer.writerow([i, sid, matrix.labels[i].value])


def read_matrix(path: str | Path, labels_path: str | Path) -> FeatureMatrix:
    try:
        with open(labels_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            pairs = [(row["sample_id"], ClassLabel.from_name(row["label"])) for row in reader]
        with open(path, newline="", encoding="utf-8") as fh:
            reader2 = csv.reader(fh)
            header = next(reader2)
            if header != ["row", "col", "weight"]:
                raise ValueError(f"unexpected header {header!r}")
            shape_row = next(reader2)
            if shape_row[0] != "#shape":
                raise ValueError("missing shape row")
            n_rows, n_cols = int(shape_row[1]), int(shape_row[2])
            rows: list[dict[int, float]] = [dict() for _ in range(n_rows)]
            for row in reader2:
                rows[int(row[0])][int(row[1])] = float(row[2])
    except (OSError, KeyError, ValueError, IndexError, StopIteration) as exc:
        raise IoFailure(f"cannot read matrix {path}: {exc}") from exc
    if len(pairs) != n_rows:
        raise IoFailure(f"label file {labels_path} does not match matrix shape")
    return FeatureMatrix(
        rows=tuple(rows),
        n_cols=n_cols,
        sample_ids=tuple(sid for sid, _ in pairs),
        labels=tuple(label for _, label in pairs),
    )
