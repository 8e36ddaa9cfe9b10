"""Canonical API-call tokens, n-gram extraction, and vocabularies.

A call becomes one token: the API name joined to its first ``max_args``
argument values with ``_`` (calls without arguments get the ``na``
placeholder). n-grams are consecutive token windows joined with ``,``;
commas inside tokens are rewritten to ``;`` so the joiner stays
unambiguous.
"""
from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyCorpus, InvalidN, IoFailure
from .ingest import ApiCallRecord, BehaviorReport
from .labels import ClassLabel

_WHITESPACE = re.compile(r"[ \t\n\r\f\v]+")
_CONTROL = re.compile(r"[\x00-\x1f\x7f]")

NO_ARGS_PLACEHOLDER = "na"
NGRAM_JOINER = ","
TOKEN_JOINER = "_"


def sanitize_segment(text: str) -> str:
    """Make a name or argument value safe inside tokens and n-grams.

    Whitespace collapses before control characters are stripped so tab and
    newline count as whitespace, not as control characters.
    """
    text = _WHITESPACE.sub("-", text)
    text = _CONTROL.sub("", text)
    return text.replace(NGRAM_JOINER, ";")


def canonical_token(call: ApiCallRecord, max_args: int = 2) -> str:
    """Collapse one API call to its canonical token.

    Only the first ``max_args`` recorded arguments contribute; arguments
    that sanitize to the empty string are skipped. A call with no surviving
    arguments yields ``name_na``.
    """
    name = sanitize_segment(call.name)
    segments = [sanitize_segment(a) for a in call.arguments[:max_args]]
    segments = [s for s in segments if s]
    if not segments:
        segments = [NO_ARGS_PLACEHOLDER]
    return TOKEN_JOINER.join([name] + segments)


SUPPORTED_N = (1, 2, 3)


def extract_ngrams(tokens: list[str] | tuple[str, ...], n: int) -> list[str]:
    """All order-preserving n-grams of a token sequence, with multiplicity.

    Sequences shorter than ``n`` yield no n-grams.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n not in SUPPORTED_N:
        raise InvalidN(f"n-gram size must be one of {SUPPORTED_N}, got {n!r}")
    return [NGRAM_JOINER.join(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def tokenize_report(report: BehaviorReport, max_args: int = 2) -> list[str]:
    """Canonical token sequence of a report's full call trace."""
    return [canonical_token(call, max_args) for call in report.calls]


def report_ngrams(
    report: BehaviorReport,
    n: int,
    max_args: int = 2,
    reset_at_process: bool = False,
) -> list[str]:
    """All n-gram occurrences of one report, in trace order.

    With ``reset_at_process`` the sliding window restarts at each process
    boundary, so no n-gram spans two processes.
    """
    if reset_at_process and report.process_call_counts:
        out: list[str] = []
        for segment in report.process_segments():
            tokens = [canonical_token(call, max_args) for call in segment]
            out.extend(extract_ngrams(tokens, n))
        return out
    return extract_ngrams(tokenize_report(report, max_args), n)


@dataclass(frozen=True)
class TokenDocument:
    """One sample's n-gram occurrence counts for a single n (or a union)."""

    sample_id: str
    label: ClassLabel
    counts: dict[str, int]
    total: int

    @staticmethod
    def from_report(
        report: BehaviorReport,
        n: int,
        max_args: int = 2,
        reset_at_process: bool = False,
    ) -> "TokenDocument":
        grams = report_ngrams(report, n, max_args, reset_at_process)
        return TokenDocument(
            sample_id=report.sample_id,
            label=report.label,
            counts=dict(Counter(grams)),
            total=len(grams),
        )

    def merged_with(self, other: "TokenDocument") -> "TokenDocument":
        """Union document combining counts from two n-gram sizes."""
        combined = Counter(self.counts)
        combined.update(other.counts)
        return TokenDocument(
            sample_id=self.sample_id,
            label=self.label,
            counts=dict(combined),
            total=self.total + other.total,
        )


def documents_for_n(
    reports: list[BehaviorReport],
    n: int,
    max_args: int = 2,
    reset_at_process: bool = False,
) -> list[TokenDocument]:
    return [TokenDocument.from_report(r, n, max_args, reset_at_process) for r in reports]


def merge_documents(per_n: list[list[TokenDocument]]) -> list[TokenDocument]:
    """Merge parallel per-n document lists into union documents."""
    if not per_n:
        raise EmptyCorpus("no document lists to merge")
    merged = per_n[0]
    for docs in per_n[1:]:
        merged = [a.merged_with(b) for a, b in zip(merged, docs, strict=True)]
    return merged


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Vocabulary:
    """Immutable term list with document frequencies.

    Terms are sorted lexicographically, which fixes the column order of
    every downstream matrix. ``df[i]`` counts the documents containing
    ``terms[i]`` at least once; ``n_docs`` is the corpus size the
    frequencies were measured on.
    """

    terms: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def index_of(self, term: str) -> int | None:
        return self._index.get(term)

    def subset(self, kept_indices: list[int]) -> "Vocabulary":
        """Vocabulary restricted to the given column indices (order kept)."""
        return Vocabulary(
            terms=tuple(self.terms[i] for i in kept_indices),
            df=tuple(self.df[i] for i in kept_indices),
            n_docs=self.n_docs,
        )


def build_vocabulary(documents: list[TokenDocument]) -> Vocabulary:
    """Collect every term that occurs in the corpus, with its df."""
    if not documents:
        raise EmptyCorpus("cannot build a vocabulary from zero documents")
    df_counter: Counter[str] = Counter()
    for doc in documents:
        df_counter.update(doc.counts.keys())
    terms = tuple(sorted(df_counter))
    return Vocabulary(
        terms=terms,
        df=tuple(df_counter[t] for t in terms),
        n_docs=len(documents),
    )


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------

def write_ngram_counts(path: str | Path, documents: list[TokenDocument]) -> None:
    """Write per-sample n-gram counts (terms sorted within each sample)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "label", "ngram", "count"])
        for doc in documents:
            for term in sorted(doc.counts):
                writer.writerow([doc.sample_id, doc.label.value, term, doc.counts[term]])


def read_ngram_counts(path: str | Path) -> list[TokenDocument]:
    """Rebuild documents from a counts CSV, preserving first-seen order."""
    order: list[str] = []
    labels: dict[str, ClassLabel] = {}
    counts: dict[str, dict[str, int]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                sid = row["sample_id"]
                if sid not in counts:
                    order.append(sid)
                    labels[sid] = ClassLabel.from_name(row["label"])
                    counts[sid] = {}
                counts[sid][row["ngram"]] = int(row["count"])
    except (OSError, KeyError, ValueError) as exc:
        raise IoFailure(f"cannot read n-gram counts {path}: {exc}") from exc
    return [
        TokenDocument(
            sample_id=sid,
            label=labels[sid],
            counts=counts[sid],
            total=sum(counts[sid].values()),
        )
        for sid in order
    ]


def write_vocabulary(path: str | Path, vocabulary: Vocabulary) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "ngram", "df"])
        for i, term in enumerate(vocabulary.terms):
            writer.writerow([i, term, vocabulary.df[i]])
        writer.writerow(["#n_docs", "", vocabulary.n_docs])


def read_vocabulary(path: str | Path) -> Vocabulary:
    terms: list[str] = []
    df: list[int] = []
    n_docs = 0
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["index", "ngram", "df"]:
                raise ValueError(f"unexpected header {header!r}")
            for row in reader:
                if row[0] == "#n_docs":
                    n_docs = int(row[2])
                    continue
                terms.append(row[1])
                df.append(int(row[2]))
    except (OSError, ValueError, IndexError, StopIteration) as exc:
        raise IoFailure(f"cannot read vocabulary {path}: {exc}") from exc
    return Vocabulary(terms=tuple(terms), df=tuple(df), n_docs=n_docs)
