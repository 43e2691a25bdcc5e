"""Query bootstrap, annotator-agreement coefficients, stratified sampling.

Bootstrap intervals use the percentile method: the statistic is recomputed on
B resamples and the bounds are nearest-rank percentiles of the sorted resample
values.  Resample i draws from its own generator seeded by (master_seed, i),
so results are bit-identical regardless of execution order or parallelism.

Agreement coefficients implement the standard chance-corrected forms and
return None (undefined) when the chance-agreement term degenerates to 1,
rather than forcing 0 or 1.
"""

from __future__ import annotations

import math
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .rank_store import DataError

__all__ = [
    "BootstrapConfig",
    "IntervalEstimate",
    "LabelMatrix",
    "PairwiseAgreement",
    "StratifiedSample",
    "bootstrap_mean_ci",
    "paired_delta_ci",
    "between_split_delta_ci",
    "fleiss_kappa",
    "krippendorff_alpha_nominal",
    "cohen_kappa",
    "pairwise_agreement",
    "stratified_sample",
]


@dataclass(frozen=True)
class BootstrapConfig:
    resamples: int = 10_000
    confidence: float = 0.95
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.resamples < 1:
            raise DataError("resamples must be >= 1")
        if not 0.0 < self.confidence < 1.0:
            raise DataError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class IntervalEstimate:
    estimate: float
    lower: float
    upper: float


def _substream(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((master_seed, index))))


def _nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: 1-based position ceil(q*B), clamped to [1, B]."""
    b = len(sorted_values)
    pos = min(max(math.ceil(q * b), 1), b)
    return float(sorted_values[pos - 1])


def _percentile_interval(
    estimate: float, stats: np.ndarray, confidence: float
) -> IntervalEstimate:
    stats = np.sort(stats)
    alpha = (1.0 - confidence) / 2.0
    return IntervalEstimate(
        estimate=estimate,
        lower=_nearest_rank(stats, alpha),
        upper=_nearest_rank(stats, 1.0 - alpha),
    )


def bootstrap_mean_ci(
    values: Sequence[float], config: BootstrapConfig = BootstrapConfig()
) -> IntervalEstimate:
    """Percentile CI for the mean under query resampling with replacement."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise DataError("bootstrap input must be nonempty")
    n = arr.size
    stats = np.empty(config.resamples)
    for i in range(config.resamples):
        rng = _substream(config.master_seed, i)
        stats[i] = arr[rng.integers(0, n, size=n)].mean()
    return _percentile_interval(float(arr.mean()), stats, config.confidence)


def paired_delta_ci(
    pairs_by_query: Mapping[str, Sequence[tuple[float, float]]],
    config: BootstrapConfig = BootstrapConfig(),
) -> IntervalEstimate:
    """CI for the mean multimodal-unimodal difference, paired within query.

    Differences are taken per (query, retriever) pair first; resampling a
    query carries all of its retrievers' differences together.
    """
    if not pairs_by_query:
        raise DataError("no paired values supplied")
    deltas: list[float] = []
    for qid in sorted(pairs_by_query):
        pairs = list(pairs_by_query[qid])
        if not pairs:
            raise DataError(f"query {qid!r} has no paired values")
        deltas.append(
            sum(mm - unimodal for mm, unimodal in pairs) / len(pairs)
        )
    arr = np.asarray(deltas)
    n = arr.size
    stats = np.empty(config.resamples)
    for i in range(config.resamples):
        rng = _substream(config.master_seed, i)
        stats[i] = arr[rng.integers(0, n, size=n)].mean()
    return _percentile_interval(float(arr.mean()), stats, config.confidence)


def between_split_delta_ci(
    values_split_a: Sequence[float],
    values_split_b: Sequence[float],
    config: BootstrapConfig = BootstrapConfig(),
) -> IntervalEstimate:
    """CI for mean(a) - mean(b) with each split resampled independently."""
    a = np.asarray(list(values_split_a), dtype=float)
    b = np.asarray(list(values_split_b), dtype=float)
    if a.size == 0 or b.size == 0:
        raise DataError("both splits must be nonempty")
    stats = np.empty(config.resamples)
    for i in range(config.resamples):
        rng = _substream(config.master_seed, i)
        ra = a[rng.integers(0, a.size, size=a.size)].mean()
        rb = b[rng.integers(0, b.size, size=b.size)].mean()
        stats[i] = ra - rb
    return _percentile_interval(float(a.mean() - b.mean()), stats, config.confidence)


# ---------------------------------------------------------------------------
# Agreement


@dataclass(frozen=True)
class LabelMatrix:
    """Items x raters grid of categorical labels; missing entries allowed."""

    item_ids: tuple[str, ...]
    rater_ids: tuple[str, ...]
    labels: Mapping[tuple[str, str], Hashable]
    categories: tuple[Hashable, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.rater_ids) < 2:
            raise DataError("a label matrix needs at least 2 raters")
        if not self.item_ids:
            raise DataError("a label matrix needs at least 1 item")
        items, raters = set(self.item_ids), set(self.rater_ids)
        present = {lab for key, lab in self.labels.items()}
        for item, rater in self.labels:
            if item not in items or rater not in raters:
                raise DataError(f"label for unknown cell ({item!r}, {rater!r})")
        cats = self.categories or tuple(sorted(present, key=repr))
        unknown = present - set(cats)
        if unknown:
            raise DataError(f"labels outside the category set: {sorted(unknown, key=repr)}")
        object.__setattr__(self, "categories", cats)

    def item_labels(self, item_id: str) -> list[Hashable]:
        return [
            self.labels[(item_id, r)]
            for r in self.rater_ids
            if (item_id, r) in self.labels
        ]

    def rater_vector(self, rater_id: str) -> dict[str, Hashable]:
        return {
            i: self.labels[(i, rater_id)]
            for i in self.item_ids
            if (i, rater_id) in self.labels
        }

    def map_labels(self, fn) -> "LabelMatrix":
        return LabelMatrix(
            item_ids=self.item_ids,
            rater_ids=self.rater_ids,
            labels={key: fn(lab) for key, lab in self.labels.items()},
        )


def _counts(labels: Sequence[Hashable], categories: Sequence[Hashable]) -> np.ndarray:
    index = {c: j for j, c in enumerate(categories)}
    out = np.zeros(len(categories))
    for lab in labels:
        out[index[lab]] += 1
    return out


def fleiss_kappa(matrix: LabelMatrix) -> float | None:
    """Chance-corrected agreement for a fixed number of raters per item.

    kappa = (P_bar - P_e) / (1 - P_e) where P_i = (sum_j n_ij^2 - n) / (n(n-1))
    and P_e = sum_j p_j^2 over the pooled category proportions.  None when
    chance agreement is exactly 1 (a single category in use).
    """
    per_item = [matrix.item_labels(i) for i in matrix.item_ids]
    ns = {len(labs) for labs in per_item}
    if len(ns) != 1:
        raise DataError("fleiss_kappa needs the same rater count for every item")
    n = ns.pop()
    if n < 2:
        raise DataError("fleiss_kappa needs at least 2 raters per item")
    cats = matrix.categories
    grid = np.stack([_counts(labs, cats) for labs in per_item])
    big_n = grid.shape[0]
    p_i = (np.square(grid).sum(axis=1) - n) / (n * (n - 1))
    p_j = grid.sum(axis=0) / (big_n * n)
    p_e = float(np.square(p_j).sum())
    if np.count_nonzero(grid.sum(axis=0)) < 2:
        return None  # one category in use -> P_e == 1 exactly
    return float((p_i.mean() - p_e) / (1.0 - p_e))


def krippendorff_alpha_nominal(matrix: LabelMatrix) -> float | None:
    """Nominal-distance alpha via the coincidence-matrix formulation.

    Items carrying fewer than two labels are excluded.  None when expected
    disagreement is zero (a single category among the usable items).
    """
    cats = matrix.categories
    index = {c: j for j, c in enumerate(cats)}
    m = len(cats)
    coincidence = np.zeros((m, m))
    usable = 0
    for item in matrix.item_ids:
        labs = matrix.item_labels(item)
        if len(labs) < 2:
            continue
        usable += 1
        counts = _counts(labs, cats)
        mu = len(labs)
        pair = np.outer(counts, counts) - np.diag(counts)
        coincidence += pair / (mu - 1)
    if usable == 0:
        raise DataError("no item carries two or more labels")
    totals = coincidence.sum(axis=1)
    n = totals.sum()
    observed = coincidence.sum() - np.trace(coincidence)
    expected = (n * n - np.square(totals).sum()) / (n - 1) if n > 1 else 0.0
    if expected == 0:
        return None
    return float(1.0 - observed / expected)


def cohen_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float | None:
    """Two-rater chance-corrected agreement; None when p_e degenerates to 1."""
    a, b = list(a), list(b)
    if len(a) != len(b):
        raise DataError("label vectors differ in length")
    if not a:
        raise DataError("label vectors must be nonempty")
    n = len(a)
    cats = sorted({*a, *b}, key=repr)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    pa = _counts(a, cats) / n
    pb = _counts(b, cats) / n
    p_e = float((pa * pb).sum())
    if len(cats) == 1:
        return None  # both raters constant on the same category
    if p_e == 1.0:
        return None
    return float((p_o - p_e) / (1.0 - p_e))


@dataclass(frozen=True)
class PairwiseAgreement:
    """Pairwise-rater summary on binary validity plus exact-signature rates."""

    kappas: Mapping[tuple[str, str], float | None]
    mean_kappa: float | None
    min_kappa: float | None
    max_kappa: float | None
    unanimous_rate: float
    signature_rates: Mapping[tuple[str, str], float]


def pairwise_agreement(matrix: LabelMatrix) -> PairwiseAgreement:
    """Per-pair Cohen kappa on valid/invalid, plus exact-signature rates.

    Labels must be the issue signatures themselves (e.g. frozensets of issue
    names, empty meaning valid); the binary decision is derived by emptiness.
    Rates use items labelled by both raters of a pair; the unanimous rate uses
    items labelled by every rater.
    """
    for lab in matrix.labels.values():
        if not isinstance(lab, (frozenset, set)):
            raise DataError("pairwise_agreement expects issue-set labels")
    binary = {key: len(lab) == 0 for key, lab in matrix.labels.items()}
    kappas: dict[tuple[str, str], float | None] = {}
    signature_rates: dict[tuple[str, str], float] = {}
    for r1, r2 in combinations(matrix.rater_ids, 2):
        common = [
            i
            for i in matrix.item_ids
            if (i, r1) in matrix.labels and (i, r2) in matrix.labels
        ]
        if not common:
            raise DataError(f"raters {r1!r} and {r2!r} share no items")
        kappas[(r1, r2)] = cohen_kappa(
            [binary[(i, r1)] for i in common],
            [binary[(i, r2)] for i in common],
        )
        exact = sum(
            1
            for i in common
            if frozenset(matrix.labels[(i, r1)]) == frozenset(matrix.labels[(i, r2)])
        )
        signature_rates[(r1, r2)] = exact / len(common)
    defined = [k for k in kappas.values() if k is not None]
    complete_items = [
        i
        for i in matrix.item_ids
        if all((i, r) in matrix.labels for r in matrix.rater_ids)
    ]
    if not complete_items:
        raise DataError("no item is labelled by every rater")
    unanimous = sum(
        1
        for i in complete_items
        if len({binary[(i, r)] for r in matrix.rater_ids}) == 1
    )
    return PairwiseAgreement(
        kappas=kappas,
        mean_kappa=sum(defined) / len(defined) if defined else None,
        min_kappa=min(defined) if defined else None,
        max_kappa=max(defined) if defined else None,
        unanimous_rate=unanimous / len(complete_items),
        signature_rates=signature_rates,
    )


# ---------------------------------------------------------------------------
# Stratified sampling


@dataclass(frozen=True)
class StratifiedSample:
    selected: Mapping[str, tuple[str, ...]]
    shortfall: Mapping[str, int]

    def all_ids(self) -> list[str]:
        out: list[str] = []
        for cat in self.selected:
            out.extend(self.selected[cat])
        return out


def stratified_sample(
    labels: Mapping[str, str],
    requests: Mapping[str, int],
    seed: int = 0,
) -> StratifiedSample:
    """Uniform without-replacement samples per category, deterministic in seed.

    A stratum smaller than its request is returned whole with the shortfall
    recorded.
    """
    for cat, want in requests.items():
        if want < 0:
            raise DataError(f"negative request for category {cat!r}")
    strata: dict[str, list[str]] = {}
    for qid, cat in labels.items():
        strata.setdefault(cat, []).append(qid)
    rng = np.random.default_rng(seed)
    selected: dict[str, tuple[str, ...]] = {}
    shortfall: dict[str, int] = {}
    for cat in sorted(requests):
        want = requests[cat]
        members = sorted(strata.get(cat, []))
        take = min(want, len(members))
        if take:
            picked = rng.choice(len(members), size=take, replace=False)
            selected[cat] = tuple(sorted(members[int(j)] for j in picked))
        else:
            selected[cat] = ()
        shortfall[cat] = want - take
    return StratifiedSample(selected=selected, shortfall=shortfall)
