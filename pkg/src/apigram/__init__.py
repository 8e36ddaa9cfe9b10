"""Behavioral-report classification toolkit.

Sandbox-style JSON reports in; API-call n-gram TF-IDF features, a hybrid
feature-selection cascade, six from-scratch classifiers, and evaluation
artifacts out. Every stage is deterministic given its seed.
"""
from __future__ import annotations

from .config import PipelineConfig, read_config, write_config
from .errors import (
    AllFeaturesRemoved,
    ClassTooSmall,
    ConfigError,
    CorruptModel,
    DegenerateData,
    DimensionMismatch,
    EmptyCorpus,
    EmptyDocument,
    EmptyTestSet,
    EmptyTrace,
    InvalidN,
    InvalidSpec,
    IoFailure,
    MalformedJson,
    MissingArtifact,
    MissingBehaviorSection,
    NonFiniteInput,
    PipelineError,
    Unsupported,
    VersionMismatch,
    ZeroDf,
)
from .evaluate import (
    EvalReport,
    SplitSpec,
    emit_report,
    evaluate,
    metrics_from_confusion,
    stratified_split,
)
from .ingest import (
    ApiCallRecord,
    BehaviorReport,
    load_corpus,
    load_manifest,
    parse_report,
    partition_elements,
)
from .labels import ALL_LABELS, N_CLASSES, ClassLabel
from .models import (
    DEFAULT_PARAMS,
    ClassDistribution,
    HyperParams,
    ModelKind,
    TrainedModel,
    load_model,
    predict,
    predict_matrix,
    predict_proba,
    save_model,
    train,
)
from .select import (
    SelectionConfig,
    SelectionMask,
    hybrid_select,
    mutual_information,
    mutual_information_all,
)
from .synth import ClassProfile, CorpusSpec, default_spec, generate_corpus
from .tokens import (
    TokenDocument,
    Vocabulary,
    build_vocabulary,
    canonical_token,
    documents_for_n,
    extract_ngrams,
    tokenize_report,
)
from .vectorize import FeatureMatrix, frequency_matrix, idf, tf, tfidf, tfidf_matrix

__version__ = "0.1.0"

__all__ = [
    "ALL_LABELS",
    "AllFeaturesRemoved",
    "ApiCallRecord",
    "BehaviorReport",
    "ClassDistribution",
    "ClassLabel",
    "ClassProfile",
    "ClassTooSmall",
    "ConfigError",
    "CorpusSpec",
    "CorruptModel",
    "DEFAULT_PARAMS",
    "DegenerateData",
    "DimensionMismatch",
    "EmptyCorpus",
    "EmptyDocument",
    "EmptyTestSet",
    "EmptyTrace",
    "EvalReport",
    "FeatureMatrix",
    "HyperParams",
    "InvalidN",
    "InvalidSpec",
    "IoFailure",
    "MalformedJson",
    "MissingArtifact",
    "MissingBehaviorSection",
    "ModelKind",
    "N_CLASSES",
    "NonFiniteInput",
    "PipelineError",
    "PipelineConfig",
    "SelectionConfig",
    "SelectionMask",
    "SplitSpec",
    "TokenDocument",
    "TrainedModel",
    "Unsupported",
    "VersionMismatch",
    "Vocabulary",
    "ZeroDf",
    "build_vocabulary",
    "canonical_token",
    "default_spec",
    "documents_for_n",
    "emit_report",
    "evaluate",
    "extract_ngrams",
    "frequency_matrix",
    "generate_corpus",
    "hybrid_select",
    "idf",
    "load_corpus",
    "load_manifest",
    "load_model",
    "metrics_from_confusion",
    "mutual_information",
    "mutual_information_all",
    "parse_report",
    "partition_elements",
    "predict",
    "predict_matrix",
    "predict_proba",
    "read_config",
    "save_model",
    "stratified_split",
    "tf",
    "tfidf",
    "tfidf_matrix",
    "tokenize_report",
    "train",
    "write_config",
]
