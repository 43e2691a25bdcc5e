"""Retriever-agnostic audit suite for composed-image-retrieval benchmarks.

The package measures how much of a benchmark is solvable without composing
the two query modalities, quantifies the gap between multimodal and
best-unimodal retrieval quality, attaches bootstrap uncertainty to both,
and runs a human validation workflow over the queries that survive the
audit.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .audit import (
    AUDIT_CATEGORIES,
    SF_CATEGORIES,
    AuditConfig,
    AuditLabel,
    AuditReport,
    Panel,
    audit_dataset,
    best_unimodal_ranks,
    build_panel,
    classify_query,
    cutoff_sweep,
    label_lines,
    loo_analysis,
    parse_label_lines,
    report_document,
)
from .metrics import (
    AvgCompGap,
    CompGapValue,
    ConditionScores,
    Metric,
    ScoreTable,
    avg_comp_gap,
    avg_comp_gap_over,
    comp_gap,
    condition_scores,
    load_score_table,
    metric_value,
    split_report,
)
from .rank_store import (
    CONDITIONS,
    AssetRefs,
    BenchmarkManifest,
    Condition,
    DataError,
    GeneratedFixture,
    RunMatrix,
    RunRecord,
    dump_manifest,
    generate_fixture,
    ingest_runs,
    load_manifest,
    ranks_from_scores,
    serialize_runs,
    validate_matrix,
)
from .stats import (
    BootstrapConfig,
    IntervalEstimate,
    LabelMatrix,
    between_split_delta_ci,
    bootstrap_mean_ci,
    cohen_kappa,
    fleiss_kappa,
    krippendorff_alpha_nominal,
    paired_delta_ci,
    pairwise_agreement,
    stratified_sample,
)
from .validation import (
    DECISION_STEPS,
    ISSUE_LABELS,
    AggregateLabel,
    AnnotationRecord,
    AnnotationTask,
    Majority,
    SingleAssignee,
    ValidationStore,
    aggregate_labels,
    check_overly_broad,
    combine_validity,
    export_splits,
    issue_distribution,
    parse_policy,
    replay_log,
    validate_record,
    validity_counts,
)

__all__ = [
    "AUDIT_CATEGORIES",
    "CONDITIONS",
    "DECISION_STEPS",
    "ISSUE_LABELS",
    "SF_CATEGORIES",
    "AggregateLabel",
    "AnnotationRecord",
    "AnnotationTask",
    "AssetRefs",
    "AuditConfig",
    "AuditLabel",
    "AuditReport",
    "AvgCompGap",
    "BenchmarkManifest",
    "BootstrapConfig",
    "CompGapValue",
    "Condition",
    "ConditionScores",
    "DataError",
    "GeneratedFixture",
    "IntervalEstimate",
    "LabelMatrix",
    "Majority",
    "Metric",
    "Panel",
    "RunMatrix",
    "RunRecord",
    "ScoreTable",
    "SingleAssignee",
    "ValidationStore",
    "aggregate_labels",
    "audit_dataset",
    "avg_comp_gap",
    "avg_comp_gap_over",
    "best_unimodal_ranks",
    "between_split_delta_ci",
    "bootstrap_mean_ci",
    "build_panel",
    "check_overly_broad",
    "combine_validity",
    "classify_query",
    "cohen_kappa",
    "comp_gap",
    "condition_scores",
    "cutoff_sweep",
    "dump_manifest",
    "export_splits",
    "fleiss_kappa",
    "generate_fixture",
    "ingest_runs",
    "issue_distribution",
    "krippendorff_alpha_nominal",
    "label_lines",
    "load_manifest",
    "load_score_table",
    "loo_analysis",
    "metric_value",
    "paired_delta_ci",
    "pairwise_agreement",
    "parse_label_lines",
    "parse_policy",
    "ranks_from_scores",
    "replay_log",
    "report_document",
    "serialize_runs",
    "split_report",
    "stratified_sample",
    "validate_matrix",
    "validate_record",
    "validity_counts",
    "__version__",
]
