"""Unimodal-shortcut audit over a pool of retrievers.

A query is solved at cutoff K by a condition when any pool retriever places a
relevant item at rank <= K under that condition.  The audit takes the best
(minimum) achievable rank per condition across the pool and classifies every
query: solvable by text alone, by image alone, by both, only by the composed
query, or by nothing at the cutoff.  The last two categories together form the
shortcut-free residue handed to human validation.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .rank_store import (
    AUDIT_CATEGORIES,
    SHORTCUT_CATEGORIES,
    Condition,
    DataError,
    RunMatrix,
)

__all__ = [
    "AUDIT_CATEGORIES",
    "SHORTCUT_CATEGORIES",
    "SF_CATEGORIES",
    "AuditConfig",
    "AuditLabel",
    "AuditReport",
    "Panel",
    "LooReport",
    "best_unimodal_ranks",
    "classify_query",
    "audit_dataset",
    "cutoff_sweep",
    "loo_analysis",
    "build_panel",
]

SF_CATEGORIES: tuple[str, ...] = ("composition_required", "unresolved")

INF = math.inf


@dataclass(frozen=True)
class AuditConfig:
    k: int = 10
    panel_depth: int | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise DataError("audit cutoff k must be >= 1")
        if self.panel_depth is not None and self.panel_depth < 1:
            raise DataError("panel_depth must be >= 1")

    @property
    def depth(self) -> int:
        return self.panel_depth if self.panel_depth is not None else self.k


@dataclass(frozen=True)
class AuditLabel:
    category: str
    best_text_rank: float  # positive integer rank, or +inf
    best_image_rank: float
    best_mm_rank: float

    @property
    def shortcut(self) -> bool:
        return self.category in SHORTCUT_CATEGORIES

    @property
    def shortcut_free(self) -> bool:
        return self.category in SF_CATEGORIES


@dataclass(frozen=True)
class AuditReport:
    labels: Mapping[str, AuditLabel]
    counts: Mapping[str, int]
    config: AuditConfig
    pool: tuple[str, ...]

    @property
    def total(self) -> int:
        return len(self.labels)

    @property
    def percentages(self) -> dict[str, float]:
        n = self.total
        return {cat: 100.0 * self.counts[cat] / n for cat in AUDIT_CATEGORIES}

    @property
    def shortcut_count(self) -> int:
        return sum(self.counts[c] for c in SHORTCUT_CATEGORIES)

    @property
    def shortcut_rate(self) -> float:
        return self.shortcut_count / self.total

    def sf_query_ids(self) -> list[str]:
        return [q for q, lab in self.labels.items() if lab.shortcut_free]

    def category_of(self) -> dict[str, str]:
        return {q: lab.category for q, lab in self.labels.items()}

    def run_id(self) -> str:
        """Stable identifier derived from the audit's full outcome."""
        h = hashlib.sha256()
        h.update(json.dumps(
            {
                "k": self.config.k,
                "pool": list(self.pool),
                "labels": {q: lab.category for q, lab in sorted(self.labels.items())},
            },
            sort_keys=True,
        ).encode())
        return h.hexdigest()[:12]


@dataclass(frozen=True)
class Panel:
    query_id: str
    items: tuple[str, ...]
    contributors: Mapping[str, int]


def _scalar(matrix: RunMatrix, qid: str, rid: str, cond: Condition) -> float:
    record = matrix.get(qid, rid, cond)
    if record is None:
        return INF  # missing cell: can never demonstrate success
    return record.scalar_rank


def _check_pool(matrix: RunMatrix, pool: Sequence[str] | None) -> tuple[str, ...]:
    if pool is None:
        return tuple(matrix.manifest.retriever_ids)
    pool = tuple(pool)
    if not pool:
        raise DataError("retriever pool must be nonempty")
    known = set(matrix.manifest.retriever_ids)
    unknown = [r for r in pool if r not in known]
    if unknown:
        raise DataError(f"unknown retrievers in pool: {unknown}")
    if len(set(pool)) != len(pool):
        raise DataError("duplicate retrievers in pool")
    return pool


def best_unimodal_ranks(
    matrix: RunMatrix, query_id: str, pool: Sequence[str] | None = None
) -> tuple[float, float]:
    """Best (minimum) text-only and image-only ranks achievable by the pool.

    The minimum is taken over relevant items first (a record's scalar rank),
    then over retrievers.  Missing cells count as +inf.
    """
    pool = _check_pool(matrix, pool)
    if query_id not in matrix.manifest.relevance:
        raise DataError(f"unknown query id {query_id!r}")
    best_text = min(_scalar(matrix, query_id, r, Condition.TEXT) for r in pool)
    best_image = min(_scalar(matrix, query_id, r, Condition.IMAGE) for r in pool)
    return best_text, best_image


def classify_query(
    best_text: float,
    best_image: float,
    mm_ranks: Iterable[float],
    k: int,
) -> AuditLabel:
    """Assign the audit category from best per-condition ranks at cutoff k."""
    if k < 1:
        raise DataError("cutoff k must be >= 1")
    best_mm = min(mm_ranks, default=INF)
    text_ok = best_text <= k
    image_ok = best_image <= k
    if text_ok and image_ok:
        category = "shortcut_both"
    elif text_ok:
        category = "shortcut_text"
    elif image_ok:
        category = "shortcut_image"
    elif best_mm <= k:
        category = "composition_required"
    else:
        category = "unresolved"
    return AuditLabel(
        category=category,
        best_text_rank=best_text,
        best_image_rank=best_image,
        best_mm_rank=best_mm,
    )


def audit_dataset(
    matrix: RunMatrix,
    config: AuditConfig = AuditConfig(),
    pool: Sequence[str] | None = None,
) -> AuditReport:
    """Classify every manifest query; deterministic and pool-order invariant."""
    pool = _check_pool(matrix, pool)
    labels: dict[str, AuditLabel] = {}
    counts = {cat: 0 for cat in AUDIT_CATEGORIES}
    for qid in matrix.manifest.query_ids:
        bt, bi = best_unimodal_ranks(matrix, qid, pool)
        mm = (_scalar(matrix, qid, r, Condition.MM) for r in pool)
        label = classify_query(bt, bi, mm, config.k)
        labels[qid] = label
        counts[label.category] += 1
    return AuditReport(
        labels=labels, counts=counts, config=config, pool=tuple(sorted(pool))
    )


def cutoff_sweep(
    matrix: RunMatrix,
    ks: Sequence[int],
    pool: Sequence[str] | None = None,
) -> dict[int, float]:
    """Shortcut rate (fraction of queries) at each cutoff; monotone in K."""
    if not ks:
        raise DataError("cutoff list must be nonempty")
    if any(k < 1 for k in ks):
        raise DataError("cutoffs must be >= 1")
    pool = _check_pool(matrix, pool)
    best = [
        min(best_unimodal_ranks(matrix, qid, pool))
        for qid in matrix.manifest.query_ids
    ]
    n = len(best)
    return {int(k): sum(1 for b in best if b <= k) / n for k in ks}


@dataclass(frozen=True)
class LooReport:
    full_rate: float
    rates: Mapping[str, float]  # retriever removed -> shortcut rate
    config: AuditConfig

    @property
    def min_rate(self) -> float:
        return min(self.rates.values())

    @property
    def max_rate(self) -> float:
        return max(self.rates.values())


def loo_analysis(
    matrix: RunMatrix,
    config: AuditConfig = AuditConfig(),
    pool: Sequence[str] | None = None,
) -> LooReport:
    """Shortcut rate with each retriever left out; every rate <= full rate."""
    pool = _check_pool(matrix, pool)
    if len(pool) < 2:
        raise DataError("leave-one-out needs a pool of at least 2 retrievers")
    k = config.k
    # Per query, per retriever: its own best unimodal rank; the pool minimum
    # and the left-out minima all derive from this one pass.
    per_retriever: dict[str, list[float]] = {r: [] for r in pool}
    for qid in matrix.manifest.query_ids:
        for r in pool:
            per_retriever[r].append(
                min(
                    _scalar(matrix, qid, r, Condition.TEXT),
                    _scalar(matrix, qid, r, Condition.IMAGE),
                )
            )
    n = len(matrix.manifest.query_ids)
    columns = {r: per_retriever[r] for r in pool}
    full_solved = [
        min(columns[r][i] for r in pool) <= k for i in range(n)
    ]
    full_rate = sum(full_solved) / n
    rates: dict[str, float] = {}
    for left_out in pool:
        rest = [r for r in pool if r != left_out]
        solved = sum(
            1 for i in range(n) if min(columns[r][i] for r in rest) <= k
        )
        rates[left_out] = solved / n
    return LooReport(full_rate=full_rate, rates=rates, config=config)


def build_panel(
    matrix: RunMatrix,
    query_id: str,
    panel_depth: int,
    pool: Sequence[str] | None = None,
) -> Panel:
    """Aggregate multimodal panel: deduplicated union of MM top lists.

    Items are ordered by (best rank across retrievers asc, number of
    contributing retrievers desc, item id asc).
    """
    pool = _check_pool(matrix, pool)
    if panel_depth < 1:
        raise DataError("panel_depth must be >= 1")
    best_rank: dict[str, int] = {}
    contributors: dict[str, int] = {}
    for rid in pool:
        record = matrix.get(query_id, rid, Condition.MM)
        if record is None or record.topk_items is None:
            raise DataError(
                f"no multimodal top-k data for retriever {rid!r} "
                f"on query {query_id!r}"
            )
        for pos, item in enumerate(record.topk_items[:panel_depth], start=1):
            contributors[item] = contributors.get(item, 0) + 1
            if item not in best_rank or pos < best_rank[item]:
                best_rank[item] = pos
    ordered = sorted(
        best_rank, key=lambda it: (best_rank[it], -contributors[it], it)
    )
    return Panel(
        query_id=query_id, items=tuple(ordered), contributors=contributors
    )


# ---------------------------------------------------------------------------
# Serialisation


def report_document(report: AuditReport) -> dict:
    """Category counts and percentages, mirroring the summary table layout."""
    n = report.total
    pct = report.percentages
    return {
        "total_queries": n,
        "cutoff_k": report.config.k,
        "pool": list(report.pool),
        "categories": {
            cat: {"count": report.counts[cat], "percent": pct[cat]}
            for cat in AUDIT_CATEGORIES
        },
        "shortcut_any": {
            "count": report.shortcut_count,
            "percent": 100.0 * report.shortcut_count / n,
        },
        "audit_run_id": report.run_id(),
    }


def label_lines(report: AuditReport) -> Iterable[str]:
    """One line per query: {query, category, best_ranks}."""

    def enc(value: float) -> int | None:
        return None if value == INF else int(value)

    for qid, lab in report.labels.items():
        yield json.dumps(
            {
                "query": qid,
                "category": lab.category,
                "best_ranks": {
                    "mm": enc(lab.best_mm_rank),
                    "text": enc(lab.best_text_rank),
                    "image": enc(lab.best_image_rank),
                },
            },
            sort_keys=True,
        )


def parse_label_lines(lines: Iterable[str]) -> dict[str, str]:
    """Read a per-query label file back to a query -> category map."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            qid, cat = str(doc["query"]), str(doc["category"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"label line {lineno}: malformed: {exc}") from exc
        if cat not in AUDIT_CATEGORIES:
            raise DataError(f"label line {lineno}: unknown category {cat!r}")
        out[qid] = cat
    return out
