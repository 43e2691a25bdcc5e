"""Ranking metrics, condition scores, and the normalised composition gap.

All metrics are per-query values in [0, 1], averaged over a split to give the
(MM, T, I) triple for one retriever.  Relevance is binary and may be
multi-positive; the scalar success event is "some relevant item within the
cutoff", so Recall@K is an indicator and MRR uses the best relevant rank.
nDCG uses binary gains with the 1/log2(1+rank) discount; the ideal ranking
places all |R| relevant items at the top positions.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, NamedTuple

from .rank_store import Condition, DataError, RunMatrix

__all__ = [
    "Metric",
    "ConditionScores",
    "CompGapValue",
    "AvgCompGap",
    "ScoreRow",
    "ScoreTable",
    "SplitReportRow",
    "metric_value",
    "condition_scores",
    "comp_gap",
    "avg_comp_gap",
    "avg_comp_gap_over",
    "split_report",
    "load_score_table",
]

INF = math.inf

_KINDS = ("recall", "mrr", "ndcg")


@dataclass(frozen=True)
class Metric:
    """A metric family plus cutoff; cutoff inf means full catalogue."""

    kind: str
    cutoff: float = INF

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise DataError(f"unknown metric kind {self.kind!r}")
        if self.cutoff != INF:
            if int(self.cutoff) != self.cutoff or self.cutoff < 1:
                raise DataError("metric cutoff must be a positive integer or inf")
        if self.kind == "recall" and self.cutoff == INF:
            raise DataError("recall requires a finite cutoff")

    @classmethod
    def parse(cls, text: str) -> "Metric":
        """Parse e.g. "ndcg", "ndcg@10", "recall@10", "mrr"."""
        kind, _, cut = text.strip().lower().partition("@")
        cutoff: float = INF
        if cut:
            try:
                cutoff = int(cut)
            except ValueError:
                raise DataError(f"bad metric cutoff in {text!r}") from None
        return cls(kind=kind, cutoff=cutoff)

    def __str__(self) -> str:
        if self.cutoff == INF:
            return self.kind
        return f"{self.kind}@{int(self.cutoff)}"


def metric_value(
    metric: Metric,
    relevant_ranks: Sequence[int],
    relevance_count: int | None = None,
) -> float:
    """One query's metric value from the ranks of its relevant items.

    Recall@K = 1 if the best rank is within K.  MRR = 1/best rank, zero beyond
    a finite cutoff.  nDCG = DCG/IDCG with binary gains,
    DCG = sum over relevant ranks r <= cutoff of 1/log2(1+r), and
    IDCG = sum_{j=1..min(relevance_count, cutoff)} 1/log2(1+j).
    """
    if not relevant_ranks:
        raise DataError("relevant_ranks must be nonempty")
    if any(b <= a for a, b in zip(relevant_ranks, relevant_ranks[1:])):
        raise DataError("relevant_ranks must be strictly increasing")
    if relevant_ranks[0] < 1:
        raise DataError("ranks are 1-based positives")
    n_rel = len(relevant_ranks) if relevance_count is None else relevance_count
    if n_rel != len(relevant_ranks):
        raise DataError("relevance_count disagrees with the rank list")
    best = relevant_ranks[0]
    cutoff = metric.cutoff
    if metric.kind == "recall":
        return 1.0 if best <= cutoff else 0.0
    if metric.kind == "mrr":
        return 1.0 / best if best <= cutoff else 0.0
    dcg = sum(1.0 / math.log2(1.0 + r) for r in relevant_ranks if r <= cutoff)
    ideal_n = n_rel if cutoff == INF else min(n_rel, int(cutoff))
    idcg = sum(1.0 / math.log2(1.0 + j) for j in range(1, ideal_n + 1))
    return dcg / idcg


@dataclass(frozen=True)
class ConditionScores:
    """Mean metric value per condition for one retriever on one split."""

    retriever_id: str
    split_id: str
    mm: float
    t: float
    i: float


def condition_scores(
    matrix: RunMatrix,
    split: Sequence[str],
    retriever_id: str,
    metric: Metric,
    split_id: str = "split",
) -> ConditionScores:
    """Average the metric over the split's queries for each condition.

    A missing cell contributes 0 (an undemonstrated success scores nothing),
    which is only reachable under the allow-missing ingestion policy.
    """
    if not split:
        raise DataError("split must contain at least one query")
    if retriever_id not in matrix.manifest.retriever_ids:
        raise DataError(f"unknown retriever id {retriever_id!r}")
    sums = {c: 0.0 for c in Condition}
    for qid in split:
        if qid not in matrix.manifest.relevance:
            raise DataError(f"split references unknown query {qid!r}")
        for cond in Condition:
            record = matrix.get(qid, retriever_id, cond)
            if record is not None:
                sums[cond] += metric_value(metric, record.relevant_ranks)
    n = len(split)
    return ConditionScores(
        retriever_id=retriever_id,
        split_id=split_id,
        mm=sums[Condition.MM] / n,
        t=sums[Condition.TEXT] / n,
        i=sums[Condition.IMAGE] / n,
    )


class CompGapValue(NamedTuple):
    """1 - max(I, T)/MM; undefined (None) when MM is zero; never clamped."""

    value: float | None

    @property
    def defined(self) -> bool:
        return self.value is not None


def comp_gap(scores: ConditionScores) -> CompGapValue:
    if scores.mm == 0:
        return CompGapValue(None)
    return CompGapValue(1.0 - max(scores.i, scores.t) / scores.mm)


@dataclass(frozen=True)
class AvgCompGap:
    mean: float | None
    defined_count: int
    undefined_count: int


def avg_comp_gap_over(scores: Iterable[ConditionScores]) -> AvgCompGap:
    """Mean composition gap over retrievers, excluding undefined values."""
    defined: list[float] = []
    undefined = 0
    for s in scores:
        gap = comp_gap(s)
        if gap.value is None:
            undefined += 1
        else:
            defined.append(gap.value)
    if not defined:
        if undefined == 0:
            raise DataError("no condition scores supplied")
        return AvgCompGap(mean=None, defined_count=0, undefined_count=undefined)
    return AvgCompGap(
        mean=sum(defined) / len(defined),
        defined_count=len(defined),
        undefined_count=undefined,
    )


# ---------------------------------------------------------------------------
# Transcribed score-table fixture


@dataclass(frozen=True)
class ScoreRow:
    """One published (retriever, dataset, split) row: MM plus signed deltas."""

    metric: str
    dataset: str
    split: str
    retriever: str
    mm: float
    delta_mm_i: float
    delta_mm_t: float
    delta_i_t: float

    def to_condition_scores(self) -> ConditionScores:
        return ConditionScores(
            retriever_id=self.retriever,
            split_id=self.split,
            mm=self.mm,
            t=self.mm - self.delta_mm_t,
            i=self.mm - self.delta_mm_i,
        )


@dataclass(frozen=True)
class ScoreTable:
    rows: tuple[ScoreRow, ...]

    def metrics(self) -> list[str]:
        return sorted({r.metric for r in self.rows})

    def datasets(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.rows:
            seen.setdefault(r.dataset, None)
        return list(seen)

    def splits(self, dataset: str | None = None) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.rows:
            if dataset is None or r.dataset == dataset:
                seen.setdefault(r.split, None)
        return list(seen)

    def select(
        self,
        metric: str,
        dataset: str,
        split: str,
        pool: Sequence[str] | None = None,
    ) -> list[ScoreRow]:
        rows = [
            r
            for r in self.rows
            if r.metric == metric and r.dataset == dataset and r.split == split
        ]
        if pool is not None:
            wanted = set(pool)
            rows = [r for r in rows if r.retriever in wanted]
        return rows


def load_score_table(source: IO[str] | str | Path | None = None) -> ScoreTable:
    """Load the published-score transcription (defaults to the packaged copy)."""
    if source is None:
        ref = resources.files("ciraudit").joinpath("data/score_tables.csv")
        with ref.open("r", encoding="utf-8") as fh:
            return _parse_score_table(fh)
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return _parse_score_table(fh)
    return _parse_score_table(source)


def _parse_score_table(fh: IO[str]) -> ScoreTable:
    reader = csv.DictReader(fh)
    required = {
        "metric", "dataset", "split", "retriever",
        "mm", "delta_mm_i", "delta_mm_t", "delta_i_t",
    }
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise DataError(
            f"score table needs columns {sorted(required)}, "
            f"got {reader.fieldnames}"
        )
    rows: list[ScoreRow] = []
    for lineno, rec in enumerate(reader, start=2):
        try:
            rows.append(
                ScoreRow(
                    metric=rec["metric"],
                    dataset=rec["dataset"],
                    split=rec["split"],
                    retriever=rec["retriever"],
                    mm=float(rec["mm"]),
                    delta_mm_i=float(rec["delta_mm_i"]),
                    delta_mm_t=float(rec["delta_mm_t"]),
                    delta_i_t=float(rec["delta_i_t"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise DataError(f"score table line {lineno}: {exc}") from exc
    if not rows:
        raise DataError("score table is empty")
    return ScoreTable(rows=tuple(rows))


def avg_comp_gap(
    source: RunMatrix | ScoreTable,
    split: Sequence[str] | str,
    metric: Metric | str,
    pool: Sequence[str] | None = None,
    *,
    dataset: str | None = None,
    split_id: str = "split",
) -> AvgCompGap:
    """Retriever-averaged composition gap from live runs or a score table.

    With a RunMatrix, `split` is the query-id set and `metric` a Metric.  With
    a ScoreTable, `split` is the split name (e.g. "Full"), `metric` the table's
    metric key, and `dataset` selects the benchmark.
    """
    if isinstance(source, ScoreTable):
        if dataset is None:
            raise DataError("score-table averaging needs a dataset name")
        key = str(metric)
        rows = source.select(key, dataset, str(split), pool)
        if not rows:
            raise DataError(
                f"no score rows for metric={key!r} dataset={dataset!r} "
                f"split={split!r}"
            )
        return avg_comp_gap_over(r.to_condition_scores() for r in rows)
    if isinstance(metric, str):
        metric = Metric.parse(metric)
    the_pool = tuple(pool) if pool is not None else source.manifest.retriever_ids
    scores = [
        condition_scores(source, list(split), rid, metric, split_id=split_id)
        for rid in the_pool
    ]
    return avg_comp_gap_over(scores)


# ---------------------------------------------------------------------------
# Split reports


@dataclass(frozen=True)
class SplitReportRow:
    retriever_id: str
    split_id: str
    mm: float
    delta_mm_i: float
    delta_mm_t: float
    delta_i_t: float


def split_report(
    matrix: RunMatrix,
    splits: Mapping[str, Sequence[str]],
    metric: Metric,
    pool: Sequence[str] | None = None,
) -> list[SplitReportRow]:
    """Per retriever and split: MM score plus the three signed deltas."""
    if not splits:
        raise DataError("no splits supplied")
    the_pool = tuple(pool) if pool is not None else matrix.manifest.retriever_ids
    rows: list[SplitReportRow] = []
    for split_id, qids in splits.items():
        for rid in the_pool:
            s = condition_scores(matrix, list(qids), rid, metric, split_id=split_id)
            rows.append(
                SplitReportRow(
                    retriever_id=rid,
                    split_id=split_id,
                    mm=s.mm,
                    delta_mm_i=s.mm - s.i,
                    delta_mm_t=s.mm - s.t,
                    delta_i_t=s.i - s.t,
                )
            )
    return rows
