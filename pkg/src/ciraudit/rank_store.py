"""Data model and IO for benchmark manifests and retriever rank exports.

A benchmark is a manifest (queries, gallery, relevance sets, retriever pool)
plus one run record per (query, retriever, condition) triple.  Conditions are
the three query ablations: the full multimodal query, the edit text alone, and
the reference image alone.  Records carry only the ranks of the relevant
gallery items (1-based, within the full gallery ordering) and optionally the
top-k item ids for panel building; full orderings are never stored.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, NamedTuple

import numpy as np

__all__ = [
    "DataError",
    "Condition",
    "CONDITIONS",
    "AssetRefs",
    "BenchmarkManifest",
    "RunRecord",
    "RunMatrix",
    "ValidationReport",
    "GeneratedFixture",
    "load_manifest",
    "dump_manifest",
    "ranks_from_scores",
    "ingest_runs",
    "serialize_runs",
    "validate_matrix",
    "generate_fixture",
]


class DataError(ValueError):
    """An input document violates the data contract."""


class Condition(str, Enum):
    """Which parts of the composed query produced a ranking."""

    MM = "mm"
    TEXT = "text"
    IMAGE = "image"


CONDITIONS: tuple[Condition, ...] = (Condition.MM, Condition.TEXT, Condition.IMAGE)


@dataclass(frozen=True)
class AssetRefs:
    """References to the displayable assets of one query triplet."""

    reference: str
    text: str
    targets: tuple[str, ...]


@dataclass(frozen=True)
class BenchmarkManifest:
    benchmark_id: str
    gallery_size: int
    query_ids: tuple[str, ...]
    retriever_ids: tuple[str, ...]
    relevance: Mapping[str, frozenset[str]]
    asset_refs: Mapping[str, AssetRefs] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.gallery_size < 1:
            raise DataError("gallery_size must be a positive integer")
        if len(set(self.query_ids)) != len(self.query_ids):
            raise DataError("duplicate query ids in manifest")
        if len(set(self.retriever_ids)) != len(self.retriever_ids):
            raise DataError("duplicate retriever ids in manifest")
        for qid in self.query_ids:
            rel = self.relevance.get(qid)
            if not rel:
                raise DataError(f"query {qid!r} has an empty relevance set")
            if len(rel) > self.gallery_size:
                raise DataError(
                    f"query {qid!r}: relevance set larger than the gallery"
                )

    def relevant(self, query_id: str) -> frozenset[str]:
        try:
            return self.relevance[query_id]
        except KeyError:
            raise DataError(f"unknown query id {query_id!r}") from None


@dataclass(frozen=True)
class RunRecord:
    query_id: str
    retriever_id: str
    condition: Condition
    relevant_ranks: tuple[int, ...]
    topk_items: tuple[str, ...] | None = None

    @property
    def scalar_rank(self) -> int:
        """Rank of the best-placed relevant item (multi-positive collapses to min)."""
        return min(self.relevant_ranks)


@dataclass(frozen=True)
class RunMatrix:
    """Immutable grid of run records over (query, retriever, condition)."""

    manifest: BenchmarkManifest
    cells: Mapping[tuple[str, str, Condition], RunRecord]

    @property
    def completeness(self) -> str:
        expected = (
            len(self.manifest.query_ids)
            * len(self.manifest.retriever_ids)
            * len(CONDITIONS)
        )
        return "complete" if len(self.cells) == expected else "partial"

    def get(self, query_id: str, retriever_id: str, condition: Condition) -> RunRecord | None:
        return self.cells.get((query_id, retriever_id, condition))

    def missing_cells(self) -> list[tuple[str, str, Condition]]:
        out = []
        for qid in self.manifest.query_ids:
            for rid in self.manifest.retriever_ids:
                for cond in CONDITIONS:
                    if (qid, rid, cond) not in self.cells:
                        out.append((qid, rid, cond))
        return out


@dataclass(frozen=True)
class ValidationReport:
    policy: str
    missing: tuple[tuple[str, str, Condition], ...]

    @property
    def ok(self) -> bool:
        return not self.missing


# ---------------------------------------------------------------------------
# Manifest IO


def load_manifest(source: IO[bytes] | IO[str] | str | Path) -> BenchmarkManifest:
    """Parse a manifest document (see README for the wire format).

    Unknown fields are ignored.  Raises DataError on malformed documents,
    duplicate ids, empty relevance sets, or an impossible gallery size.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest document: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError("manifest document must be a mapping")
    try:
        benchmark_id = str(doc["benchmark_id"])
        gallery_size = doc["gallery_size"]
        queries = doc["queries"]
        retrievers = doc["retrievers"]
    except KeyError as exc:
        raise DataError(f"manifest missing required field {exc.args[0]!r}") from None
    if not isinstance(gallery_size, int) or isinstance(gallery_size, bool):
        raise DataError("gallery_size must be an integer")
    if not isinstance(queries, list) or not isinstance(retrievers, list):
        raise DataError("manifest queries/retrievers must be lists")

    query_ids: list[str] = []
    relevance: dict[str, frozenset[str]] = {}
    asset_refs: dict[str, AssetRefs] = {}
    for entry in queries:
        if not isinstance(entry, dict) or "id" not in entry:
            raise DataError("each manifest query needs an 'id'")
        qid = str(entry["id"])
        query_ids.append(qid)
        rel = entry.get("relevant", [])
        if not isinstance(rel, list):
            raise DataError(f"query {qid!r}: 'relevant' must be a list")
        relevance[qid] = frozenset(str(x) for x in rel)
        assets = entry.get("assets")
        if assets is not None:
            try:
                asset_refs[qid] = AssetRefs(
                    reference=str(assets["reference"]),
                    text=str(assets["text"]),
                    targets=tuple(str(t) for t in assets["targets"]),
                )
            except (KeyError, TypeError) as exc:
                raise DataError(f"query {qid!r}: malformed assets block") from exc
    return BenchmarkManifest(
        benchmark_id=benchmark_id,
        gallery_size=gallery_size,
        query_ids=tuple(query_ids),
        retriever_ids=tuple(str(r) for r in retrievers),
        relevance=relevance,
        asset_refs=asset_refs,
    )


def dump_manifest(manifest: BenchmarkManifest) -> str:
    """Serialise a manifest back to its wire format (canonical key order)."""
    queries = []
    for qid in manifest.query_ids:
        entry: dict = {"id": qid, "relevant": sorted(manifest.relevance[qid])}
        refs = manifest.asset_refs.get(qid)
        if refs is not None:
            entry["assets"] = {
                "reference": refs.reference,
                "text": refs.text,
                "targets": list(refs.targets),
            }
        queries.append(entry)
    doc = {
        "benchmark_id": manifest.benchmark_id,
        "gallery_size": manifest.gallery_size,
        "queries": queries,
        "retrievers": list(manifest.retriever_ids),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Rank computation


def ranks_from_scores(
    scores: Iterable[tuple[str, float]], relevant: Iterable[str]
) -> list[int]:
    """Ranks of the relevant items under a full-gallery similarity scoring.

    An item's rank is 1 + the number of items scoring strictly higher + the
    number of equal-scoring items with lexicographically smaller id, so ties
    break deterministically and the result is invariant to input order.
    Returns the relevant items' ranks in ascending order.
    """
    pairs = list(scores)
    seen: set[str] = set()
    for item, value in pairs:
        if item in seen:
            raise DataError(f"duplicate item {item!r} in score list")
        seen.add(item)
        if not math.isfinite(value):
            raise DataError(f"non-finite similarity for item {item!r}")
    wanted = set(relevant)
    missing = wanted - seen
    if missing:
        raise DataError(f"relevant items absent from scores: {sorted(missing)}")
    order = sorted(pairs, key=lambda pair: (-pair[1], pair[0]))
    return sorted(i + 1 for i, (item, _) in enumerate(order) if item in wanted)


# ---------------------------------------------------------------------------
# Run ingestion


_CONDITION_VALUES = {c.value: c for c in CONDITIONS}


def _parse_record(doc: dict, manifest: BenchmarkManifest, where: str) -> RunRecord:
    for key in ("query", "retriever", "condition", "relevant_ranks"):
        if key not in doc:
            raise DataError(f"{where}: missing field {key!r}")
    qid = str(doc["query"])
    rid = str(doc["retriever"])
    if qid not in manifest.relevance:
        raise DataError(f"{where}: unknown query id {qid!r}")
    if rid not in manifest.retriever_ids:
        raise DataError(f"{where}: unknown retriever id {rid!r}")
    cond = _CONDITION_VALUES.get(doc["condition"])
    if cond is None:
        raise DataError(
            f"{where}: condition must be one of {sorted(_CONDITION_VALUES)}, "
            f"got {doc['condition']!r}"
        )
    ranks_raw = doc["relevant_ranks"]
    if not isinstance(ranks_raw, list) or not ranks_raw:
        raise DataError(f"{where}: relevant_ranks must be a nonempty list")
    ranks: list[int] = []
    for r in ranks_raw:
        if not isinstance(r, int) or isinstance(r, bool):
            raise DataError(f"{where}: rank {r!r} is not an integer")
        if not 1 <= r <= manifest.gallery_size:
            raise DataError(
                f"{where}: rank {r} outside [1, {manifest.gallery_size}]"
            )
        ranks.append(r)
    if len(set(ranks)) != len(ranks):
        raise DataError(f"{where}: duplicate ranks within one record")
    expected = len(manifest.relevance[qid])
    if len(ranks) != expected:
        raise DataError(
            f"{where}: query {qid!r} has {expected} relevant items "
            f"but the record carries {len(ranks)} ranks"
        )
    topk = doc.get("topk")
    topk_items: tuple[str, ...] | None = None
    if topk is not None:
        if not isinstance(topk, list):
            raise DataError(f"{where}: topk must be a list of item ids")
        topk_items = tuple(str(x) for x in topk)
        if len(set(topk_items)) != len(topk_items):
            raise DataError(f"{where}: duplicate items in topk")
    return RunRecord(
        query_id=qid,
        retriever_id=rid,
        condition=cond,
        relevant_ranks=tuple(sorted(ranks)),
        topk_items=topk_items,
    )


def ingest_runs(
    source: Iterable[str | dict] | IO[str] | str | Path,
    manifest: BenchmarkManifest,
) -> RunMatrix:
    """Build a RunMatrix from line-delimited run records.

    `source` may be a path, an open text stream, or any iterable of JSON lines
    or already-parsed dicts.  Unknown fields are ignored; a duplicate
    (query, retriever, condition) cell is an error.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return ingest_runs(fh, manifest)
    cells: dict[tuple[str, str, Condition], RunRecord] = {}
    for lineno, item in enumerate(source, start=1):
        where = f"record {lineno}"
        if isinstance(item, str):
            if not item.strip():
                continue
            try:
                doc = json.loads(item)
            except json.JSONDecodeError as exc:
                raise DataError(f"{where}: malformed document: {exc}") from exc
        else:
            doc = item
        if not isinstance(doc, dict):
            raise DataError(f"{where}: expected a mapping")
        record = _parse_record(doc, manifest, where)
        key = (record.query_id, record.retriever_id, record.condition)
        if key in cells:
            raise DataError(
                f"{where}: duplicate cell "
                f"({record.query_id}, {record.retriever_id}, {record.condition.value})"
            )
        cells[key] = record
    return RunMatrix(manifest=manifest, cells=cells)


def serialize_runs(matrix: RunMatrix) -> Iterable[str]:
    """Yield one wire-format line per record, in manifest order (round-trips)."""
    for qid in matrix.manifest.query_ids:
        for rid in matrix.manifest.retriever_ids:
            for cond in CONDITIONS:
                record = matrix.get(qid, rid, cond)
                if record is None:
                    continue
                doc: dict = {
                    "query": record.query_id,
                    "retriever": record.retriever_id,
                    "condition": record.condition.value,
                    "relevant_ranks": list(record.relevant_ranks),
                }
                if record.topk_items is not None:
                    doc["topk"] = list(record.topk_items)
                yield json.dumps(doc, sort_keys=True)


def validate_matrix(matrix: RunMatrix, policy: str = "strict") -> ValidationReport:
    """Check completeness under the chosen missing-data policy.

    strict: any missing cell is an error.  allow_missing: missing cells are
    reported; downstream a missing unimodal cell counts as rank +inf (it can
    never demonstrate a shortcut) and a missing multimodal cell as not-solved.
    """
    if policy not in ("strict", "allow_missing"):
        raise DataError(f"unknown policy {policy!r}")
    missing = tuple(matrix.missing_cells())
    if missing and policy == "strict":
        qid, rid, cond = missing[0]
        raise DataError(
            f"matrix is partial under strict policy: first missing cell "
            f"({qid}, {rid}, {cond.value}); {len(missing)} missing in total"
        )
    return ValidationReport(policy=policy, missing=missing)


# ---------------------------------------------------------------------------
# Synthetic fixtures

AUDIT_CATEGORIES: tuple[str, ...] = (
    "shortcut_both",
    "shortcut_text",
    "shortcut_image",
    "composition_required",
    "unresolved",
)
SHORTCUT_CATEGORIES: tuple[str, ...] = AUDIT_CATEGORIES[:3]


class GeneratedFixture(NamedTuple):
    manifest: BenchmarkManifest
    records: list[RunRecord]
    labels: dict[str, str]


def generate_fixture(
    counts: Mapping[str, int],
    pool_size: int,
    gallery_size: int,
    k: int = 10,
    seed: int = 0,
    *,
    sweep_profile: Mapping[int, int] | None = None,
    relevants_per_query: int = 1,
    include_topk: bool = False,
    panel_depth: int | None = None,
    benchmark_id: str = "fixture",
) -> GeneratedFixture:
    """Synthesise a manifest plus a complete run set with planted audit labels.

    Each query is constructed so that its best achievable ranks satisfy the
    planted category's definition at cutoff `k` exactly.  `sweep_profile`
    optionally pins the number of queries whose best unimodal rank falls at or
    below each listed cutoff (the cutoff `k` entry must equal the planted
    shortcut total), which fixes shortcut rates across a whole cutoff sweep.
    Deterministic under `seed`.
    """
    for cat in counts:
        if cat not in AUDIT_CATEGORIES:
            raise DataError(f"unknown audit category {cat!r}")
    clean = {cat: int(counts.get(cat, 0)) for cat in AUDIT_CATEGORIES}
    if any(n < 0 for n in clean.values()):
        raise DataError("planted counts must be nonnegative")
    total = sum(clean.values())
    if total == 0:
        raise DataError("fixture must plant at least one query")
    if pool_size < 1:
        raise DataError("pool_size must be positive")
    if k < 1 or k >= gallery_size:
        raise DataError("need 1 <= k < gallery_size")
    depth = panel_depth if panel_depth is not None else k
    shortcut_total = sum(clean[c] for c in SHORTCUT_CATEGORIES)
    beyond_total = total - shortcut_total

    # Resolve per-query best-unimodal rank bands.  Without a profile the band
    # is simply [1, k] for shortcut queries and (k, gallery] for the rest.
    if sweep_profile is not None:
        cuts = sorted(int(c) for c in sweep_profile)
        if k not in cuts:
            raise DataError("sweep_profile must include the audit cutoff k")
        if cuts[0] < 1 or cuts[-1] >= gallery_size:
            raise DataError("sweep_profile cutoffs must lie in [1, gallery_size)")
        cum = [int(sweep_profile[c]) for c in cuts]
        if any(b < a for a, b in zip(cum, cum[1:])):
            raise DataError("sweep_profile counts must be nondecreasing")
        if cum[-1] > total:
            raise DataError("sweep_profile exceeds the planted query count")
        if int(sweep_profile[k]) != shortcut_total:
            raise DataError(
                "sweep_profile at the audit cutoff must equal the planted "
                f"shortcut total ({shortcut_total})"
            )
        edges = [1] + [c + 1 for c in cuts]
        sizes = [cum[0]] + [b - a for a, b in zip(cum, cum[1:])]
        edges_hi = cuts + [gallery_size]
        bands = [
            (lo, hi, n) for lo, hi, n in zip(edges, edges_hi, sizes + [0]) if n
        ]
        # Queries beyond the last cutoff:
        tail = total - cum[-1]
        if tail:
            if cuts[-1] + 1 > gallery_size:
                raise DataError("no gallery room beyond the last cutoff")
            bands.append((cuts[-1] + 1, gallery_size, tail))
        shortcut_bands = [(lo, hi, n) for lo, hi, n in bands if hi <= k]
        beyond_bands = [(lo, hi, n) for lo, hi, n in bands if lo > k]
        if sum(n for _, _, n in shortcut_bands) != shortcut_total or sum(
            n for _, _, n in beyond_bands
        ) != beyond_total:
            raise DataError("sweep_profile bands straddle the audit cutoff")
    else:
        shortcut_bands = [(1, k, shortcut_total)]
        beyond_bands = [(k + 1, gallery_size, beyond_total)]

    if relevants_per_query < 1:
        raise DataError("relevants_per_query must be >= 1")
    spare = relevants_per_query - 1
    cap = gallery_size - spare  # room above the planted minimum for extras
    if cap <= k:
        raise DataError("gallery too small for ranks beyond the cutoff")

    rng = np.random.default_rng(seed)

    def band_values(bands: list[tuple[int, int, int]]) -> list[int]:
        vals: list[int] = []
        for lo, hi, n in bands:
            hi = min(hi, cap)
            if hi < lo:
                raise DataError("gallery too small for the requested bands")
            vals.extend(int(v) for v in rng.integers(lo, hi + 1, size=n))
        return vals

    categories: list[str] = []
    for cat in AUDIT_CATEGORIES:
        categories.extend([cat] * clean[cat])
    categories = [categories[i] for i in rng.permutation(total)]

    shortcut_vals = band_values(shortcut_bands)
    beyond_vals = band_values(beyond_bands)
    rng.shuffle(shortcut_vals)  # type: ignore[arg-type]
    rng.shuffle(beyond_vals)  # type: ignore[arg-type]

    width = max(5, len(str(total)))
    gwidth = max(7, len(str(gallery_size)))
    qids = [f"q{i:0{width}d}" for i in range(1, total + 1)]
    rids = [f"ret{i:02d}" for i in range(1, pool_size + 1)]
    gallery_id = lambda j: f"g{j:0{gwidth}d}"  # noqa: E731

    def draw_above(lo: int) -> int:
        return int(rng.integers(lo, cap + 1))

    manifest_queries: list[str] = []
    relevance: dict[str, frozenset[str]] = {}
    asset_refs: dict[str, AssetRefs] = {}
    records: list[RunRecord] = []
    labels: dict[str, str] = {}
    si = bi = 0
    for qid, cat in zip(qids, categories):
        labels[qid] = cat
        if cat in SHORTCUT_CATEGORIES:
            v = shortcut_vals[si]
            si += 1
        else:
            v = beyond_vals[bi]
            bi += 1
        if cat == "shortcut_both":
            other = int(rng.integers(v, k + 1))
            t_min, i_min = (v, other) if rng.integers(2) else (other, v)
            mm_min = draw_above(1)
        elif cat == "shortcut_text":
            t_min, i_min = v, draw_above(k + 1)
            mm_min = draw_above(1)
        elif cat == "shortcut_image":
            t_min, i_min = draw_above(k + 1), v
            mm_min = draw_above(1)
        elif cat == "composition_required":
            side = draw_above(v)
            t_min, i_min = (v, side) if rng.integers(2) else (side, v)
            mm_min = int(rng.integers(1, k + 1))
        else:  # unresolved
            side = draw_above(v)
            t_min, i_min = (v, side) if rng.integers(2) else (side, v)
            mm_min = draw_above(k + 1)

        rel_ids = frozenset(gallery_id(int(j) + 1) for j in
                            rng.choice(gallery_size, size=relevants_per_query,
                                       replace=False))
        manifest_queries.append(qid)
        relevance[qid] = rel_ids
        asset_refs[qid] = AssetRefs(
            reference=f"assets/{qid}/reference.png",
            text=f"edit request for {qid}",
            targets=tuple(f"assets/{qid}/target{j}.png"
                          for j in range(relevants_per_query)),
        )

        for cond, cond_min, floor in (
            (Condition.MM, mm_min, 1 if cat != "unresolved" else k + 1),
            (Condition.TEXT, t_min, 1 if t_min <= k else k + 1),
            (Condition.IMAGE, i_min, 1 if i_min <= k else k + 1),
        ):
            lo = max(cond_min, floor)
            others = rng.integers(lo, cap + 1, size=pool_size - 1)
            achiever = int(rng.integers(pool_size))
            mins = np.insert(others, achiever, cond_min)
            for rid, m in zip(rids, mins):
                m = int(m)
                if spare:
                    extra = rng.choice(
                        np.arange(m + 1, gallery_size + 1), size=spare, replace=False
                    )
                    ranks = tuple(sorted([m, *map(int, extra)]))
                else:
                    ranks = (m,)
                topk: tuple[str, ...] | None = None
                if include_topk and cond is Condition.MM:
                    topk = _topk_for(
                        rng, ranks, sorted(rel_ids), depth, gallery_size, gallery_id
                    )
                records.append(
                    RunRecord(
                        query_id=qid,
                        retriever_id=rid,
                        condition=cond,
                        relevant_ranks=ranks,
                        topk_items=topk,
                    )
                )

    manifest = BenchmarkManifest(
        benchmark_id=benchmark_id,
        gallery_size=gallery_size,
        query_ids=tuple(manifest_queries),
        retriever_ids=tuple(rids),
        relevance=relevance,
        asset_refs=asset_refs,
    )
    return GeneratedFixture(manifest=manifest, records=records, labels=labels)


def _topk_for(
    rng: np.random.Generator,
    ranks: Sequence[int],
    rel_ids: Sequence[str],
    depth: int,
    gallery_size: int,
    gallery_id,
) -> tuple[str, ...]:
    """Top-`depth` id list consistent with the record's relevant ranks."""
    by_rank = {r: rel_ids[j] for j, r in enumerate(ranks)}
    forbidden = set(rel_ids)
    fillers: list[str] = []
    while len(fillers) < depth:
        for j in rng.integers(1, gallery_size + 1, size=depth + 8):
            item = gallery_id(int(j))
            if item not in forbidden:
                fillers.append(item)
                forbidden.add(item)
            if len(fillers) >= depth:
                break
    out: list[str] = []
    fi = 0
    for pos in range(1, depth + 1):
        if pos in by_rank:
            out.append(by_rank[pos])
        else:
            out.append(fillers[fi])
            fi += 1
    return tuple(out)
