"""Hybrid feature-selection cascade.

Stages run in a fixed order: lexical rules over argument content, then
document-frequency bounds, then mutual-information ranking, then greedy
correlation pruning, then truncation to the target retention ratio. Both
ratio stages are measured against the original vocabulary size, so the
final mask never exceeds ``ceil(target_ratio * V)`` columns.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AllFeaturesRemoved, DimensionMismatch, IoFailure
from .labels import ClassLabel, N_CLASSES
from .tokens import NGRAM_JOINER, TOKEN_JOINER, Vocabulary
from .vectorize import FeatureMatrix

RULE_CONTAINS_DIGIT = "contains-digit"
RULE_CONTAINS_SPECIAL = "contains-special"
RULE_HEX_ADDRESS = "is-hex-address"
RULE_PURE_NUMERIC = "is-pure-numeric"

ALL_LEXICAL_RULES = frozenset(
    {RULE_CONTAINS_DIGIT, RULE_CONTAINS_SPECIAL, RULE_HEX_ADDRESS, RULE_PURE_NUMERIC}
)
DEFAULT_LEXICAL_RULES = ALL_LEXICAL_RULES

_DIGIT = re.compile(r"\d")
_SPECIAL = re.compile(r"[^A-Za-z._-]")
_HEX_ADDR = re.compile(r"^0x[0-9a-fA-F]+$")
_PURE_NUM = re.compile(r"^[0-9]+$")

# A successful duplicate match at a clamped threshold of 1.0 tolerates
# float rounding in the correlation itself.
_DUPLICATE_EPS = 1e-12


@dataclass(frozen=True)
class SelectionConfig:
    lexical_filters: frozenset[str] = DEFAULT_LEXICAL_RULES
    min_df: int = 2
    max_df_ratio: float = 0.95
    mi_top_ratio: float = 0.05
    corr_threshold: float = 0.95
    target_ratio: float = 0.016

    def __post_init__(self) -> None:
        if not 0.0 < self.target_ratio <= 1.0:
            raise DimensionMismatch(f"target_ratio must be in (0, 1], got {self.target_ratio}")
        if self.min_df < 1:
            raise DimensionMismatch(f"min_df must be >= 1, got {self.min_df}")
        unknown = set(self.lexical_filters) - ALL_LEXICAL_RULES
        if unknown:
            raise DimensionMismatch(f"unknown lexical rules: {sorted(unknown)}")


@dataclass(frozen=True)
class SelectionMask:
    """Kept original column indices (strictly increasing) with provenance.

    ``scores`` maps a column to its mutual-information score when the
    ranking stage has run; ``provenance`` records each stage's input and
    output feature counts in execution order.
    """

    kept: tuple[int, ...]
    scores: dict[int, float] = field(default_factory=dict)
    provenance: tuple[tuple[str, int, int], ...] = ()

    def __post_init__(self) -> None:
        if not self.kept:
            raise AllFeaturesRemoved("selection mask would keep zero features")
        if any(a >= b for a, b in zip(self.kept, self.kept[1:])):
            raise DimensionMismatch("mask indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.kept)


def identity_mask(n_cols: int, stage: str = "identity") -> SelectionMask:
    return SelectionMask(kept=tuple(range(n_cols)), provenance=((stage, n_cols, n_cols),))


# ---------------------------------------------------------------------------
# Stage 1: lexical rules over argument segments
# ---------------------------------------------------------------------------

def _argument_segments(term: str) -> list[str]:
    """Argument segments of every token in an n-gram.

    Tokens are split on the structural joiner; the leading API-name
    segment of each token is exempt from lexical rules.
    """
    segments: list[str] = []
    for token in term.split(NGRAM_JOINER):
        segments.extend(token.split(TOKEN_JOINER)[1:])
    return segments


def _violates(segment: str, rules: frozenset[str]) -> bool:
    if RULE_HEX_ADDRESS in rules and _HEX_ADDR.match(segment):
        return True
    if RULE_PURE_NUMERIC in rules and _PURE_NUM.match(segment):
        return True
    if RULE_CONTAINS_DIGIT in rules and _DIGIT.search(segment):
        return True
    if RULE_CONTAINS_SPECIAL in rules and _SPECIAL.search(segment):
        return True
    return False


def lexical_filter(vocabulary: Vocabulary, rules: frozenset[str] | set[str]) -> SelectionMask:
    """Drop terms whose argument content matches any enabled rule."""
    rules = frozenset(rules)
    unknown = rules - ALL_LEXICAL_RULES
    if unknown:
        raise DimensionMismatch(f"unknown lexical rules: {sorted(unknown)}")
    if not rules:
        return identity_mask(len(vocabulary), "lexical")
    kept = [
        j
        for j, term in enumerate(vocabulary.terms)
        if not any(_violates(seg, rules) for seg in _argument_segments(term))
    ]
    if not kept:
        raise AllFeaturesRemoved("lexical rules removed every feature")
    return SelectionMask(
        kept=tuple(kept),
        provenance=(("lexical", len(vocabulary), len(kept)),),
    )


# ---------------------------------------------------------------------------
# Stage 2: document-frequency bounds
# ---------------------------------------------------------------------------

def _column_df(matrix: FeatureMatrix) -> np.ndarray:
    df = np.zeros(matrix.n_cols, dtype=np.int64)
    for row in matrix.rows:
        for j in row:
            df[j] += 1
    return df


def frequency_filter(
    freq: FeatureMatrix,
    vocabulary: Vocabulary,
    min_df: int,
    max_df_ratio: float,
) -> SelectionMask:
    """Keep features seen in at least ``min_df`` and at most
    ``max_df_ratio * N`` of the matrix's rows.

    Document frequency is measured on the matrix itself, so masks fitted
    on a training subset reflect that subset.
    """
    if freq.n_cols != len(vocabulary):
        raise DimensionMismatch("frequency matrix does not match the vocabulary")
    df = _column_df(freq)
    ceiling = max_df_ratio * freq.n_rows
    kept = [j for j in range(freq.n_cols) if min_df <= df[j] <= ceiling]
    if not kept:
        raise AllFeaturesRemoved("document-frequency bounds removed every feature")
    return SelectionMask(
        kept=tuple(kept),
        provenance=(("frequency", freq.n_cols, len(kept)),),
    )


# ---------------------------------------------------------------------------
# Stage 3: mutual information between feature presence and class label
# ---------------------------------------------------------------------------

def _presence_class_counts(matrix: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-column presence counts broken out by class, plus class sizes."""
    counts = np.zeros((matrix.n_cols, N_CLASSES), dtype=np.int64)
    class_sizes = np.zeros(N_CLASSES, dtype=np.int64)
    for i, row in enumerate(matrix.rows):
        c = matrix.labels[i].ordinal
        class_sizes[c] += 1
        for j, weight in row.items():
            if weight != 0.0:
                counts[j, c] += 1
    return counts, class_sizes


def mutual_information_all(matrix: FeatureMatrix) -> np.ndarray:
    """MI (nats) of every column's presence indicator with the class label.

    Computed from exact integer contingency counts, so the result is
    independent of row order.
    """
    n = matrix.n_rows
    if n == 0:
        raise DimensionMismatch("mutual information needs at least one row")
    present_c, class_sizes = _presence_class_counts(matrix)
    absent_c = class_sizes[np.newaxis, :] - present_c
    n_present = present_c.sum(axis=1)
    n_absent = n - n_present

    def cell_terms(joint: np.ndarray, marginal: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (joint * n) / (marginal[:, np.newaxis] * class_sizes[np.newaxis, :])
            terms = (joint / n) * np.log(ratio)
        return np.where(joint > 0, terms, 0.0)

    mi = cell_terms(present_c, n_present).sum(axis=1)
    mi += cell_terms(absent_c, n_absent).sum(axis=1)
    return np.maximum(mi, 0.0)


def mutual_information(matrix: FeatureMatrix, labels: list[ClassLabel], feature: int) -> float:
    """MI of one column; ``labels`` must match the matrix rows."""
    if tuple(labels) != matrix.labels:
        matrix = FeatureMatrix(
            rows=matrix.rows,
            n_cols=matrix.n_cols,
            sample_ids=matrix.sample_ids,
            labels=tuple(labels),
        )
    return float(mutual_information_all(matrix)[feature])


def rank_by_mi(matrix: FeatureMatrix, candidates: SelectionMask, keep: int) -> SelectionMask:
    """Keep the ``keep`` highest-MI candidates (ties: lower column index)."""
    mi = mutual_information_all(matrix)
    order = sorted(candidates.kept, key=lambda j: (-mi[j], j))
    chosen = sorted(order[:max(keep, 1)])
    if not chosen:
        raise AllFeaturesRemoved("mutual-information ranking removed every feature")
    return SelectionMask(
        kept=tuple(chosen),
        scores={j: float(mi[j]) for j in chosen},
        provenance=candidates.provenance + (("mi", len(candidates), len(chosen)),),
    )


# ---------------------------------------------------------------------------
# Stage 4: greedy correlation pruning
# ---------------------------------------------------------------------------

def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    if denom == 0.0:
        return 0.0
    return float(np.dot(xc, yc)) / denom


def correlation_prune(
    matrix: FeatureMatrix,
    candidates: SelectionMask,
    threshold: float,
) -> SelectionMask:
    """Greedy redundancy pruning over the TF-IDF columns.

    Candidates are visited in descending MI order (ties: ascending column
    index); one is dropped when its Pearson correlation with any feature
    kept so far exceeds the threshold. Thresholds above 1.0 clamp to 1.0,
    where only exact duplicates are pruned.
    """
    thr = min(threshold, 1.0)
    duplicates_only = thr >= 1.0
    order = sorted(candidates.kept, key=lambda j: (-candidates.scores.get(j, 0.0), j))
    columns: dict[int, np.ndarray] = {}
    kept_order: list[int] = []
    for j in order:
        col = matrix.column_values(j)
        redundant = False
        for k in kept_order:
            r = _pearson(col, columns[k])
            if (r >= 1.0 - _DUPLICATE_EPS) if duplicates_only else (r > thr):
                redundant = True
                break
        if not redundant:
            kept_order.append(j)
            columns[j] = col
    if not kept_order:
        raise AllFeaturesRemoved("correlation pruning removed every feature")
    chosen = tuple(sorted(kept_order))
    return SelectionMask(
        kept=chosen,
        scores={j: candidates.scores.get(j, 0.0) for j in chosen},
        provenance=candidates.provenance + (("correlation", len(candidates), len(chosen)),),
    )


# ---------------------------------------------------------------------------
# Full cascade
# ---------------------------------------------------------------------------

def hybrid_select(
    tfidf: FeatureMatrix,
    freq: FeatureMatrix,
    vocabulary: Vocabulary,
    config: SelectionConfig,
) -> SelectionMask:
    """Run the full cascade and return the final mask with provenance.

    Feature presence for MI is read from the frequency matrix (a TF-IDF
    weight of zero can also mean df = N). Both ratio stages are sized
    against the original vocabulary; at ``target_ratio`` = 1.0 the ranking
    keeps everything and pruning is skipped, so the cascade reduces to the
    enabled filter stages alone.
    """
    if tfidf.n_cols != len(vocabulary) or freq.n_cols != len(vocabulary):
        raise DimensionMismatch("matrices do not match the vocabulary")
    v_original = len(vocabulary)
    mask = lexical_filter(vocabulary, config.lexical_filters)

    freq_mask = frequency_filter(freq, vocabulary, config.min_df, config.max_df_ratio)
    surviving = sorted(set(mask.kept) & set(freq_mask.kept))
    if not surviving:
        raise AllFeaturesRemoved("no features survive the filter stages")
    mask = SelectionMask(
        kept=tuple(surviving),
        provenance=mask.provenance + (("frequency", len(mask), len(surviving)),),
    )

    mi_keep = math.ceil(max(config.mi_top_ratio, config.target_ratio) * v_original)
    mask = rank_by_mi(freq, mask, mi_keep)

    if config.target_ratio < 1.0:
        mask = correlation_prune(tfidf, mask, config.corr_threshold)
        target = math.ceil(config.target_ratio * v_original)
        n_in = len(mask)
        if n_in > target:
            by_rank = sorted(mask.kept, key=lambda j: (-mask.scores[j], j))[:target]
            chosen = tuple(sorted(by_rank))
            mask = SelectionMask(
                kept=chosen,
                scores={j: mask.scores[j] for j in chosen},
                provenance=mask.provenance + (("truncate", n_in, len(chosen)),),
            )
        else:
            mask = SelectionMask(
                kept=mask.kept,
                scores=mask.scores,
                provenance=mask.provenance + (("truncate", n_in, n_in),),
            )
    return mask


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------

def write_mask(path: str | Path, mask: SelectionMask, vocabulary: Vocabulary) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kept_index", "ngram", "mi_score"])
        for j in mask.kept:
            writer.writerow([j, vocabulary.terms[j], format(mask.scores.get(j, 0.0), ".17g")])


def read_mask(path: str | Path) -> SelectionMask:
    kept: list[int] = []
    scores: dict[int, float] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                j = int(row["kept_index"])
                kept.append(j)
                scores[j] = float(row["mi_score"])
    except (OSError, KeyError, ValueError) as exc:
        raise IoFailure(f"cannot read selection mask {path}: {exc}") from exc
    return SelectionMask(kept=tuple(kept), scores=scores)


def write_selection_report(path: str | Path, mask: SelectionMask) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["stage", "features_in", "features_out"])
        for stage, n_in, n_out in mask.provenance:
            writer.writerow([stage, n_in, n_out])
