"""Human-validation workflow: task serving, judgment log, aggregation, splits.

Annotators walk a fixed decision order — text validity, reference image
quality, target correctness, query specificity — and may attach any subset of
the four issue labels; a judgment with no issues is Valid.  Judgments land in
an append-only log (event sourcing: replaying the log reconstructs the exact
aggregate state).  Aggregated validity feeds the exported evaluation splits:
Full (everything), SF (the audit's shortcut-free residue), and V (the audited,
human-validated subset of SF).
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import IO, NamedTuple

from .audit import AuditReport, Panel
from .rank_store import BenchmarkManifest, DataError

__all__ = [
    "ISSUE_LABELS",
    "DECISION_STEPS",
    "STEP_ISSUE",
    "TraceStep",
    "AnnotationTask",
    "AnnotationRecord",
    "AggregateLabel",
    "SingleAssignee",
    "Majority",
    "SplitManifest",
    "ValidationStore",
    "check_overly_broad",
    "aggregate_labels",
    "issue_distribution",
    "export_splits",
    "replay_log",
    "validity_counts",
    "combine_validity",
]

ISSUE_LABELS: tuple[str, ...] = (
    "invalid_text",
    "invalid_reference_image",
    "invalid_target_image",
    "overly_broad_query",
)

DECISION_STEPS: tuple[str, ...] = (
    "text_validity",
    "reference_quality",
    "target_correctness",
    "specificity",
)

STEP_ISSUE: dict[str, str] = dict(zip(DECISION_STEPS, ISSUE_LABELS))

_OUTCOMES = ("ok", "issue")


class TraceStep(NamedTuple):
    step: str
    outcome: str  # "ok" | "issue"


@dataclass(frozen=True)
class AnnotationTask:
    """What an annotator sees for one query.  Never carries the audit category."""

    query_id: str
    reference: str
    text: str
    targets: tuple[str, ...]
    panel: Panel
    k: int

    def to_document(self) -> dict:
        doc = {
            "query": self.query_id,
            "reference": self.reference,
            "text": self.text,
            "targets": list(self.targets),
            "panel": {
                "items": list(self.panel.items),
                "contributors": dict(self.panel.contributors),
            },
            "k": self.k,
            "steps": list(DECISION_STEPS),
        }
        assert "category" not in doc
        return doc


@dataclass(frozen=True)
class AnnotationRecord:
    query_id: str
    annotator_id: str
    timestamp: float
    issues: frozenset[str]
    valid: bool
    decision_trace: tuple[TraceStep, ...]
    note: str | None = None

    def to_document(self) -> dict:
        return {
            "query": self.query_id,
            "annotator": self.annotator_id,
            "timestamp": self.timestamp,
            "valid": self.valid,
            "issues": sorted(self.issues),
            "trace": [{"step": s.step, "outcome": s.outcome} for s in self.decision_trace],
            "note": self.note,
        }

    @classmethod
    def from_document(cls, doc: Mapping) -> "AnnotationRecord":
        try:
            trace = tuple(
                TraceStep(step=str(t["step"]), outcome=str(t["outcome"]))
                for t in doc["trace"]
            )
            record = cls(
                query_id=str(doc["query"]),
                annotator_id=str(doc["annotator"]),
                timestamp=float(doc["timestamp"]),
                valid=bool(doc["valid"]),
                issues=frozenset(str(x) for x in doc["issues"]),
                decision_trace=trace,
                note=None if doc.get("note") is None else str(doc["note"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed judgment document: {exc}") from exc
        validate_record(record)
        return record


def validate_record(record: AnnotationRecord) -> None:
    """Enforce trace order, trace/issue consistency, and validity coherence.

    The trace must walk the four decision steps in their fixed order.  The
    issue set must be exactly the issues implied by the trace outcomes.  A
    record may be invalid with an empty issue set (an overall rejection with
    no specific box ticked — reported separately downstream), but never valid
    with a nonempty one.
    """
    steps = tuple(s.step for s in record.decision_trace)
    if steps != DECISION_STEPS:
        raise DataError(
            f"decision trace must cover steps {list(DECISION_STEPS)} in order, "
            f"got {list(steps)}"
        )
    for s in record.decision_trace:
        if s.outcome not in _OUTCOMES:
            raise DataError(f"trace outcome must be ok|issue, got {s.outcome!r}")
    implied = frozenset(
        STEP_ISSUE[s.step] for s in record.decision_trace if s.outcome == "issue"
    )
    if record.issues != implied:
        raise DataError(
            f"issue set {sorted(record.issues)} disagrees with the trace "
            f"({sorted(implied)})"
        )
    unknown = record.issues - set(ISSUE_LABELS)
    if unknown:
        raise DataError(f"unknown issue labels: {sorted(unknown)}")
    if record.valid and record.issues:
        raise DataError("a record cannot be valid with a nonempty issue set")


def check_overly_broad(
    panel: Panel,
    plausible_marks: Iterable[str],
    relevant: Iterable[str],
    k: int,
) -> bool:
    """Advisory: do >= k non-ground-truth panel items plausibly match?

    Ground-truth targets never count toward the threshold.  The annotator's
    final label governs; this only drives the UI hint.
    """
    marks = set(plausible_marks)
    outside = marks - set(panel.items)
    if outside:
        raise DataError(f"marks outside the panel: {sorted(outside)}")
    return len(marks - set(relevant)) >= k


# ---------------------------------------------------------------------------
# Aggregation policies


@dataclass(frozen=True)
class SingleAssignee:
    """The designated annotator's latest judgment governs."""

    name: str = "single_assignee"


@dataclass(frozen=True)
class Majority:
    """Valid iff more than `threshold` of the raters judge valid."""

    threshold: float = 0.5
    quorum: int = 1
    name: str = "majority"

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold < 1.0:
            raise DataError("majority threshold must lie in [0, 1)")
        if self.quorum < 1:
            raise DataError("majority quorum must be >= 1")


Policy = SingleAssignee | Majority


def parse_policy(text: str) -> Policy:
    """Parse "single_assignee" or "majority[:threshold[:quorum]]"."""
    parts = text.split(":")
    if parts[0] == "single_assignee" and len(parts) == 1:
        return SingleAssignee()
    if parts[0] == "majority":
        threshold = float(parts[1]) if len(parts) > 1 else 0.5
        quorum = int(parts[2]) if len(parts) > 2 else 1
        return Majority(threshold=threshold, quorum=quorum)
    raise DataError(f"unknown aggregation policy {text!r}")


@dataclass(frozen=True)
class AggregateLabel:
    query_id: str
    valid: bool
    issues: frozenset[str]
    rater_count: int


def _latest_per_annotator(
    records: Sequence[AnnotationRecord],
) -> dict[str, dict[str, AnnotationRecord]]:
    """query -> annotator -> latest record (timestamp, then log order)."""
    latest: dict[str, dict[str, tuple[int, AnnotationRecord]]] = {}
    for pos, rec in enumerate(records):
        per_q = latest.setdefault(rec.query_id, {})
        held = per_q.get(rec.annotator_id)
        if held is None or (rec.timestamp, pos) >= (held[1].timestamp, held[0]):
            per_q[rec.annotator_id] = (pos, rec)
    return {
        qid: {ann: rec for ann, (_, rec) in per_ann.items()}
        for qid, per_ann in latest.items()
    }


def aggregate_labels(
    records: Sequence[AnnotationRecord],
    policy: Policy = SingleAssignee(),
) -> dict[str, AggregateLabel]:
    """Fold judgments into one final validity + issue set per query."""
    for rec in records:
        validate_record(rec)
    by_query = _latest_per_annotator(records)
    out: dict[str, AggregateLabel] = {}
    for qid in sorted(by_query):
        per_ann = by_query[qid]
        if isinstance(policy, SingleAssignee):
            # One assignee expected; if overlap raters also judged it, the
            # newest judgment governs (ties broken by annotator id).
            chosen = max(
                per_ann.values(),
                key=lambda r: (r.timestamp, r.annotator_id),
            )
            out[qid] = AggregateLabel(
                query_id=qid,
                valid=chosen.valid,
                issues=chosen.issues,
                rater_count=len(per_ann),
            )
        else:
            if len(per_ann) < policy.quorum:
                raise DataError(
                    f"query {qid!r}: {len(per_ann)} raters < quorum {policy.quorum}"
                )
            votes = list(per_ann.values())
            valid_frac = sum(1 for r in votes if r.valid) / len(votes)
            final_valid = valid_frac > policy.threshold
            issues: frozenset[str] = frozenset()
            if not final_valid:
                issues = frozenset().union(
                    *(r.issues for r in votes if not r.valid)
                )
            out[qid] = AggregateLabel(
                query_id=qid,
                valid=final_valid,
                issues=issues,
                rater_count=len(votes),
            )
    return out


# ---------------------------------------------------------------------------
# Issue distribution (per audit bucket)


@dataclass(frozen=True)
class IssueDistribution:
    bucket: str
    audited: int
    invalid: int
    issue_counts: Mapping[str, int]
    no_explicit_issue: int

    def percent(self, issue: str) -> float:
        if self.invalid == 0:
            return 0.0
        return 100.0 * self.issue_counts.get(issue, 0) / self.invalid


def issue_distribution(
    aggregated: Mapping[str, AggregateLabel],
    audit_categories: Mapping[str, str],
) -> dict[str, IssueDistribution]:
    """Issue counts among invalid queries, split by audit category bucket.

    Percentages are of the bucket's invalid count; labels are non-exclusive so
    they need not sum to 100.  Invalid queries with no explicit issue are
    counted in their own bucket row.
    """
    buckets: dict[str, dict] = {}
    for qid, label in aggregated.items():
        cat = audit_categories.get(qid)
        if cat is None:
            raise DataError(f"aggregated query {qid!r} has no audit category")
        b = buckets.setdefault(
            cat,
            {"audited": 0, "invalid": 0, "counts": {i: 0 for i in ISSUE_LABELS}, "none": 0},
        )
        b["audited"] += 1
        if label.valid:
            continue
        b["invalid"] += 1
        if not label.issues:
            b["none"] += 1
        for issue in label.issues:
            b["counts"][issue] += 1
    return {
        cat: IssueDistribution(
            bucket=cat,
            audited=b["audited"],
            invalid=b["invalid"],
            issue_counts=b["counts"],
            no_explicit_issue=b["none"],
        )
        for cat, b in sorted(buckets.items())
    }


def validity_counts(
    aggregated: Mapping[str, AggregateLabel],
    audit_categories: Mapping[str, str],
) -> dict[str, tuple[int, int]]:
    """Per audit bucket: (audited count, valid count)."""
    out: dict[str, list[int]] = {}
    for qid, label in aggregated.items():
        cat = audit_categories.get(qid)
        if cat is None:
            raise DataError(f"aggregated query {qid!r} has no audit category")
        pair = out.setdefault(cat, [0, 0])
        pair[0] += 1
        if label.valid:
            pair[1] += 1
    return {cat: (a, v) for cat, (a, v) in sorted(out.items())}


def combine_validity(
    per_dataset: Mapping[str, Mapping[str, tuple[int, int]]],
) -> dict[str, tuple[int, int]]:
    """Sum per-dataset (audited, valid) pairs into per-bucket totals."""
    totals: dict[str, list[int]] = {}
    for counts in per_dataset.values():
        for cat, (audited, valid) in counts.items():
            pair = totals.setdefault(cat, [0, 0])
            pair[0] += audited
            pair[1] += valid
    return {cat: (a, v) for cat, (a, v) in sorted(totals.items())}


# ---------------------------------------------------------------------------
# Split export


@dataclass(frozen=True)
class SplitManifest:
    benchmark_id: str
    audit_run_id: str
    split_id: str
    query_ids: tuple[str, ...]
    provenance: Mapping

    def to_document(self) -> dict:
        return {
            "benchmark_id": self.benchmark_id,
            "split": self.split_id,
            "query_ids": list(self.query_ids),
            "provenance": dict(self.provenance, audit_run_id=self.audit_run_id),
        }


def export_splits(
    manifest: BenchmarkManifest,
    audit_report: AuditReport,
    aggregated: Mapping[str, AggregateLabel] | None,
    *,
    policy_name: str = "single_assignee",
    batch_ids: Sequence[str] = (),
    include_v: bool = True,
) -> dict[str, SplitManifest]:
    """Build the Full / SF / V split manifests with provenance.

    SF is the audit's shortcut-free residue.  V is the subset of SF that was
    audited by annotators and aggregated as valid; exporting V without any
    aggregation is an error.
    """
    run_id = audit_report.run_id()
    provenance = {
        "cutoff_k": audit_report.config.k,
        "pool": list(audit_report.pool),
        "aggregation_policy": policy_name,
        "annotation_batches": list(batch_ids),
    }
    sf_ids = [
        qid
        for qid in manifest.query_ids
        if qid in audit_report.labels and audit_report.labels[qid].shortcut_free
    ]
    out = {
        "Full": SplitManifest(
            benchmark_id=manifest.benchmark_id,
            audit_run_id=run_id,
            split_id="Full",
            query_ids=tuple(manifest.query_ids),
            provenance=provenance,
        ),
        "SF": SplitManifest(
            benchmark_id=manifest.benchmark_id,
            audit_run_id=run_id,
            split_id="SF",
            query_ids=tuple(sf_ids),
            provenance=provenance,
        ),
    }
    if include_v:
        if not aggregated:
            raise DataError("cannot export the V split before any aggregation")
        sf_set = set(sf_ids)
        v_ids = [
            qid
            for qid in sf_ids  # manifest order, SF-restricted
            if qid in aggregated and aggregated[qid].valid and qid in sf_set
        ]
        out["V"] = SplitManifest(
            benchmark_id=manifest.benchmark_id,
            audit_run_id=run_id,
            split_id="V",
            query_ids=tuple(v_ids),
            provenance=provenance,
        )
    return out


# ---------------------------------------------------------------------------
# Store: serving, persistence, replay


class ValidationStore:
    """Single-benchmark annotation state over an append-only judgment log.

    Writes are serialised by the caller (the service handles one request at a
    time per worker); the log file is append-only and replayable.
    """

    def __init__(
        self,
        manifest: BenchmarkManifest,
        audit_report: AuditReport,
        panels: Mapping[str, Panel],
        batches: Mapping[str, Sequence[str]],
        overlap: Sequence[str] = (),
        log_path: str | Path | None = None,
    ) -> None:
        self.manifest = manifest
        self.audit_report = audit_report
        self.panels = dict(panels)
        self.k = audit_report.config.k
        self.overlap = tuple(overlap)
        self._batches: dict[str, tuple[str, ...]] = {}
        for annotator, qids in batches.items():
            self._batches[annotator] = self._order_for(qids)
        self._records: list[AnnotationRecord] = []
        self._served: dict[str, set[str]] = {a: set() for a in self._batches}
        self._log_path = None if log_path is None else Path(log_path)
        if self._log_path is not None and self._log_path.exists():
            for rec in replay_log(self._log_path):
                self._accept(rec, persist=False)

    def _order_for(self, qids: Sequence[str]) -> tuple[str, ...]:
        known = set(self.manifest.query_ids)
        ordered: list[str] = []
        for qid in [*self.overlap, *qids]:
            if qid not in known:
                raise DataError(f"batch references unknown query {qid!r}")
            if qid not in ordered:
                ordered.append(qid)
        return tuple(ordered)

    # -- annotators / tasks

    def register_annotator(self, annotator_id: str, batch: Sequence[str] = ()) -> None:
        if annotator_id in self._batches:
            return
        self._batches[annotator_id] = self._order_for(batch)
        self._served[annotator_id] = set()

    @property
    def annotators(self) -> tuple[str, ...]:
        return tuple(sorted(self._batches))

    def _judged(self, annotator_id: str) -> set[str]:
        return {
            r.query_id for r in self._records if r.annotator_id == annotator_id
        }

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        """Next unjudged task in the annotator's batch; idempotent until submit."""
        if annotator_id not in self._batches:
            raise DataError(f"unknown annotator {annotator_id!r}")
        done = self._judged(annotator_id)
        for qid in self._batches[annotator_id]:
            if qid in done:
                continue
            self._served[annotator_id].add(qid)
            return self._task_for(qid)
        return None

    def _task_for(self, qid: str) -> AnnotationTask:
        panel = self.panels.get(qid)
        if panel is None:
            raise DataError(f"no panel available for query {qid!r}")
        refs = self.manifest.asset_refs.get(qid)
        if refs is None:
            raise DataError(f"no asset references for query {qid!r}")
        return AnnotationTask(
            query_id=qid,
            reference=refs.reference,
            text=refs.text,
            targets=refs.targets,
            panel=panel,
            k=self.k,
        )

    def progress(self, annotator_id: str) -> dict:
        if annotator_id not in self._batches:
            raise DataError(f"unknown annotator {annotator_id!r}")
        batch = self._batches[annotator_id]
        done = self._judged(annotator_id) & set(batch)
        return {"annotator": annotator_id, "total": len(batch), "done": len(done)}

    # -- judgments

    def submit(self, record: AnnotationRecord) -> dict:
        if record.annotator_id not in self._batches:
            raise DataError(f"unknown annotator {record.annotator_id!r}")
        if record.query_id not in self._served[record.annotator_id]:
            raise DataError(
                f"query {record.query_id!r} was never served to "
                f"{record.annotator_id!r}"
            )
        validate_record(record)
        superseded = any(
            r.query_id == record.query_id and r.annotator_id == record.annotator_id
            for r in self._records
        )
        self._accept(record, persist=True)
        return {"accepted": True, "superseded": superseded}

    def _accept(self, record: AnnotationRecord, persist: bool) -> None:
        self._records.append(record)
        served = self._served.setdefault(record.annotator_id, set())
        served.add(record.query_id)
        self._batches.setdefault(record.annotator_id, ())
        if persist and self._log_path is not None:
            with open(self._log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record.to_document(), sort_keys=True) + "\n")

    @property
    def records(self) -> tuple[AnnotationRecord, ...]:
        return tuple(self._records)

    def check_advisory(self, qid: str, marks: Iterable[str]) -> dict:
        panel = self.panels.get(qid)
        if panel is None:
            raise DataError(f"no panel available for query {qid!r}")
        relevant = self.manifest.relevant(qid)
        marks = list(marks)
        reached = check_overly_broad(panel, marks, relevant, self.k)
        return {
            "query": qid,
            "non_ground_truth_marks": len(set(marks) - set(relevant)),
            "k": self.k,
            "reached": reached,
        }

    # -- aggregation and export

    def aggregate(self, policy: Policy = SingleAssignee()) -> dict[str, AggregateLabel]:
        return aggregate_labels(self._records, policy)

    def export(
        self, policy: Policy = SingleAssignee(), include_v: bool = True
    ) -> dict[str, SplitManifest]:
        aggregated = self.aggregate(policy) if self._records else {}
        return export_splits(
            self.manifest,
            self.audit_report,
            aggregated,
            policy_name=getattr(policy, "name", str(policy)),
            batch_ids=self.annotators,
            include_v=include_v,
        )


def replay_log(source: Iterable[str] | IO[str] | str | Path) -> list[AnnotationRecord]:
    """Parse an append-only judgment log back into records, in log order."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return replay_log(fh)
    records: list[AnnotationRecord] = []
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"judgment log line {lineno}: {exc}") from exc
        records.append(AnnotationRecord.from_document(doc))
    return records
