"""Canonical tokens, n-gram windows, vocabularies, and their CSV forms."""
from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from apigram.errors import EmptyCorpus, InvalidN
from apigram.ingest import ApiCallRecord, BehaviorReport
from apigram.labels import ALL_LABELS, ClassLabel
from apigram.tokens import (
    TokenDocument,
    build_vocabulary,
    canonical_token,
    documents_for_n,
    extract_ngrams,
    merge_documents,
    read_ngram_counts,
    read_vocabulary,
    report_ngrams,
    sanitize_segment,
    tokenize_report,
    write_ngram_counts,
    write_vocabulary,
)


def _call(name: str, *args: str) -> ApiCallRecord:
    return ApiCallRecord(category="system", name=name, arguments=tuple(args), return_value="0")


def _report(names_with_args, counts=(), sample_id="r", label=ClassLabel.TROJAN) -> BehaviorReport:
    calls = tuple(_call(n, *a) for n, a in names_with_args)
    return BehaviorReport(sample_id, label, calls, tuple(counts))


def test_canonical_token_name_plus_two_arguments():
    call = _call("LdrLoadDll", "urlmon", "urlmon.dll")
    assert canonical_token(call) == "LdrLoadDll_urlmon_urlmon.dll"


def test_canonical_token_no_arguments_gets_placeholder():
    assert canonical_token(_call("NtAllocateVirtualMemory")) == "NtAllocateVirtualMemory_na"


def test_canonical_token_procedure_address_example():
    call = _call("LdrGetProcedureAddress", "ole32", "OleUninitialize")
    assert canonical_token(call) == "LdrGetProcedureAddress_ole32_OleUninitialize"


def test_canonical_token_truncates_to_max_args():
    call = _call("NtCreateFile", "a", "b", "c", "d")
    assert canonical_token(call, max_args=2) == "NtCreateFile_a_b"
    assert canonical_token(call, max_args=3) == "NtCreateFile_a_b_c"
    assert canonical_token(call, max_args=0) == "NtCreateFile_na"


def test_sanitize_whitespace_comma_and_control_characters():
    assert sanitize_segment("a b\tc") == "a-b-c"
    assert sanitize_segment("x,y") == "x;y"
    assert sanitize_segment("k\x00e\x1fy\x7f") == "key"
    call = _call("Reg Open", "val,ue")
    assert canonical_token(call) == "Reg-Open_val;ue"


def test_arguments_that_sanitize_to_empty_are_skipped():
    assert canonical_token(_call("NtClose", "\x00", "handle")) == "NtClose_handle"
    assert canonical_token(_call("NtClose", "\x00\x1f")) == "NtClose_na"


def test_extract_ngrams_window_shorter_than_n_is_empty():
    assert extract_ngrams(["A"], 2) == []
    assert extract_ngrams([], 1) == []


def test_extract_ngrams_bigrams_of_three_tokens():
    assert Counter(extract_ngrams(["A", "B", "C"], 2)) == {"A,B": 1, "B,C": 1}


def test_extract_ngrams_counts_repeated_windows():
    assert Counter(extract_ngrams(["A", "B", "A", "B"], 2)) == {"A,B": 2, "B,A": 1}


def test_extract_ngrams_rejects_unsupported_n():
    for bad in (0, 4, -1, 100, True, 2.0):
        with pytest.raises(InvalidN):
            extract_ngrams(["A", "B"], bad)


def test_ngram_count_matches_window_arithmetic():
    rng = np.random.default_rng(7)
    for _ in range(200):
        length = int(rng.integers(0, 30))
        tokens = [f"T{int(rng.integers(0, 5))}" for _ in range(length)]
        for n in (1, 2, 3):
            assert len(extract_ngrams(tokens, n)) == max(0, length - n + 1)


def test_report_ngrams_cross_process_by_default_and_reset_on_request():
    report = _report(
        [("A", ()), ("B", ()), ("C", ()), ("D", ())],
        counts=(2, 2),
    )
    crossing = report_ngrams(report, 2)
    assert crossing == ["A_na,B_na", "B_na,C_na", "C_na,D_na"]
    stopped = report_ngrams(report, 2, reset_at_process=True)
    assert stopped == ["A_na,B_na", "C_na,D_na"]


def test_token_document_total_counts_all_windows():
    report = _report([("A", ()), ("B", ()), ("C", ())])
    for n in (1, 2, 3):
        doc = TokenDocument.from_report(report, n)
        assert doc.total == max(0, len(report.calls) - n + 1)
        assert sum(doc.counts.values()) == doc.total


def test_merge_documents_unions_counts_per_sample():
    report = _report([("A", ()), ("B", ())])
    uni = documents_for_n([report], 1)
    bi = documents_for_n([report], 2)
    merged = merge_documents([uni, bi])[0]
    assert merged.counts == {"A_na": 1, "B_na": 1, "A_na,B_na": 1}
    assert merged.total == 3
    with pytest.raises(EmptyCorpus):
        merge_documents([])


def _doc(sample_id, counts, label=ClassLabel.BENIGN):
    return TokenDocument(sample_id, label, dict(counts), sum(counts.values()))


def test_vocabulary_single_document():
    vocabulary = build_vocabulary([_doc("d", {"X": 3})])
    assert len(vocabulary) == 1
    assert vocabulary.terms == ("X",)
    assert vocabulary.df == (1,)
    assert vocabulary.n_docs == 1


def test_vocabulary_two_documents_counts_df_by_hand():
    docs = [_doc("a", {"X": 1, "Y": 2}), _doc("b", {"Y": 1, "Z": 1})]
    vocabulary = build_vocabulary(docs)
    assert len(vocabulary) == 3
    by_term = dict(zip(vocabulary.terms, vocabulary.df))
    assert by_term == {"X": 1, "Y": 2, "Z": 1}


def test_vocabulary_word_corpus_document_frequencies():
    doc_a = _doc("A", {"sample": 1, "text": 1, "document": 2, "here": 1})
    doc_b = _doc("B", {"another": 1, "text": 1, "document": 2, "here": 1})
    vocabulary = build_vocabulary([doc_a, doc_b])
    by_term = dict(zip(vocabulary.terms, vocabulary.df))
    assert by_term["sample"] == 1
    assert by_term["another"] == 1
    assert by_term["text"] == 2
    assert by_term["document"] == 2


def test_vocabulary_is_lexicographic_bijection_and_order_independent():
    rng = np.random.default_rng(31)
    for _ in range(50):
        n_docs = int(rng.integers(1, 10))
        docs = [
            _doc(
                f"d{i}",
                {f"t{int(rng.integers(0, 20)):02d}": int(rng.integers(1, 5))
                 for _ in range(int(rng.integers(1, 8)))},
            )
            for i in range(n_docs)
        ]
        vocabulary = build_vocabulary(docs)
        assert list(vocabulary.terms) == sorted(vocabulary.terms)
        assert [vocabulary.index_of(t) for t in vocabulary.terms] == list(range(len(vocabulary)))
        assert all(1 <= f <= n_docs for f in vocabulary.df)
        shuffled = [docs[i] for i in rng.permutation(n_docs)]
        assert build_vocabulary(shuffled).terms == vocabulary.terms
        assert build_vocabulary(shuffled).df == vocabulary.df


def test_build_vocabulary_rejects_empty_corpus():
    with pytest.raises(EmptyCorpus):
        build_vocabulary([])


def test_ngram_counts_csv_round_trip(tmp_path):
    docs = [
        _doc("a", {"X": 2, "Y": 1}, ClassLabel.ADWARE),
        _doc("b", {"Z": 4}, ClassLabel.WORM),
    ]
    path = tmp_path / "ngrams.csv"
    write_ngram_counts(path, docs)
    header = path.read_text().splitlines()[0]
    assert header == "sample_id,label,ngram,count"
    again = read_ngram_counts(path)
    assert again == docs


def test_vocabulary_csv_round_trip(tmp_path):
    vocabulary = build_vocabulary([_doc("a", {"X": 1, "Y": 2}), _doc("b", {"Y": 1})])
    path = tmp_path / "vocab.csv"
    write_vocabulary(path, vocabulary)
    again = read_vocabulary(path)
    assert again.terms == vocabulary.terms
    assert again.df == vocabulary.df
    assert again.n_docs == vocabulary.n_docs


def test_tokenize_report_uses_trace_order():
    report = _report([("B", ("x",)), ("A", ())])
    assert tokenize_report(report) == ["B_x", "A_na"]
